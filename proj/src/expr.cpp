#include "ensdev/expr.hpp"

#include <charconv>
#include <cmath>
#include <fmt/format.h>
#include <functional>
#include <unordered_map>
#include <unordered_set>

namespace ensdev {

namespace {

using NodePtr = std::shared_ptr<const ExprNode>;

NodePtr make_node(ExprNode n) { return std::make_shared<const ExprNode>(std::move(n)); }

NodePtr constant_node(cplx c) {
  ExprNode n;
  n.op = Op::constant;
  n.value = c;
  return make_node(std::move(n));
}

const NodePtr& zero_node() {
  static const NodePtr z = constant_node(0.0);
  return z;
}

bool is_const(const NodePtr& n) { return n->op == Op::constant; }
bool is_const_value(const NodePtr& n, cplx c) { return n->op == Op::constant && n->value == c; }

cplx ipow(cplx x, int p) {
  if (p < 0) return 1.0 / ipow(x, -p);
  cplx r = 1.0;
  while (p) {
    if (p & 1) r *= x;
    x *= x;
    p >>= 1;
  }
  return r;
}

cplx real_pow(cplx x, double p) {
  if (p == std::round(p) && std::abs(p) < 64) return ipow(x, int(p));
  if (x.imag() == 0.0 && x.real() >= 0.0) return std::pow(x.real(), p);
  return std::pow(x, p);
}

}  // namespace

struct ExprBuilder {
  static Expr wrap(NodePtr n) { return Expr(std::move(n)); }

  static Expr binary(Op op, const Expr& a, const Expr& b) {
    const NodePtr& x = a.node_;
    const NodePtr& y = b.node_;
    switch (op) {
      case Op::add:
        if (is_const_value(x, 0.0)) return b;
        if (is_const_value(y, 0.0)) return a;
        if (is_const(x) && is_const(y)) return Expr(x->value + y->value);
        break;
      case Op::sub:
        if (is_const_value(y, 0.0)) return a;
        if (x == y) return Expr();
        if (is_const(x) && is_const(y)) return Expr(x->value - y->value);
        if (is_const_value(x, 0.0)) return -b;
        break;
      case Op::mul:
        if (is_const_value(x, 0.0) || is_const_value(y, 0.0)) return Expr();
        if (is_const_value(x, 1.0)) return b;
        if (is_const_value(y, 1.0)) return a;
        if (is_const(x) && is_const(y)) return Expr(x->value * y->value);
        break;
      case Op::div:
        if (is_const_value(y, 0.0)) throw std::domain_error("expression: division by constant zero");
        if (is_const_value(x, 0.0)) return Expr();
        if (is_const_value(y, 1.0)) return a;
        if (is_const(x) && is_const(y)) return Expr(x->value / y->value);
        break;
      default:
        break;
    }
    ExprNode n;
    n.op = op;
    n.a = x;
    n.b = y;
    return Expr(make_node(std::move(n)));
  }

  static Expr unary(Op op, const Expr& a, double param = 0.0) {
    const NodePtr& x = a.node_;
    if (is_const(x)) {
      const cplx v = x->value;
      switch (op) {
        case Op::neg: return Expr(-v);
        case Op::pow: return Expr(real_pow(v, param));
        case Op::exp: return Expr(std::exp(v));
        case Op::sin: return Expr(std::sin(v));
        case Op::cos: return Expr(std::cos(v));
        case Op::sqrt: return Expr(std::sqrt(v));
        case Op::log: return Expr(std::log(v));
        default: break;
      }
    }
    if (op == Op::neg && x->op == Op::neg) return Expr(x->a);
    if (op == Op::pow) {
      if (param == 0.0) return Expr(1.0);
      if (param == 1.0) return a;
    }
    ExprNode n;
    n.op = op;
    n.a = x;
    n.param = param;
    return Expr(make_node(std::move(n)));
  }
};

Expr::Expr() : node_(zero_node()) {}
Expr::Expr(double c) : node_(c == 0.0 ? zero_node() : constant_node(c)) {}
Expr::Expr(cplx c) : node_(c == cplx(0.0) ? zero_node() : constant_node(c)) {}

Expr Expr::constant(cplx c) { return Expr(c); }

Expr Expr::coord(int j) {
  if (j < 0 || j >= kMaxDim) throw std::invalid_argument("Expr::coord: index out of range");
  ExprNode n;
  n.op = Op::coord;
  n.index = j;
  return Expr(make_node(std::move(n)));
}

Expr Expr::gauss(std::vector<double> center, double width) {
  if (!(width > 0.0)) throw std::invalid_argument("gauss: width must be positive");
  if (center.empty() || center.size() > std::size_t(kMaxDim)) throw std::invalid_argument("gauss: bad center");
  ExprNode n;
  n.op = Op::gauss;
  n.center = std::move(center);
  n.param = width;
  return Expr(make_node(std::move(n)));
}

Expr Expr::bump(std::vector<double> center, double width, int power) {
  if (!(width > 0.0)) throw std::invalid_argument("bump: width must be positive");
  if (center.empty() || center.size() > std::size_t(kMaxDim)) throw std::invalid_argument("bump: bad center");
  ExprNode n;
  n.op = Op::bump;
  n.center = std::move(center);
  n.param = width;
  n.index = power;
  return Expr(make_node(std::move(n)));
}

Expr operator+(const Expr& a, const Expr& b) { return ExprBuilder::binary(Op::add, a, b); }
Expr operator-(const Expr& a, const Expr& b) { return ExprBuilder::binary(Op::sub, a, b); }
Expr operator*(const Expr& a, const Expr& b) { return ExprBuilder::binary(Op::mul, a, b); }
Expr operator/(const Expr& a, const Expr& b) { return ExprBuilder::binary(Op::div, a, b); }
Expr operator-(const Expr& a) { return ExprBuilder::unary(Op::neg, a); }
Expr pow(const Expr& a, double p) { return ExprBuilder::unary(Op::pow, a, p); }
Expr exp(const Expr& a) { return ExprBuilder::unary(Op::exp, a); }
Expr sin(const Expr& a) { return ExprBuilder::unary(Op::sin, a); }
Expr cos(const Expr& a) { return ExprBuilder::unary(Op::cos, a); }
Expr sqrt(const Expr& a) { return ExprBuilder::unary(Op::sqrt, a); }
Expr log(const Expr& a) { return ExprBuilder::unary(Op::log, a); }

bool Expr::is_zero() const { return is_const_value(node_, 0.0); }
bool Expr::is_constant() const { return !depends_on_actions(); }

cplx Expr::constant_value() const {
  if (!is_constant()) throw std::logic_error("Expr::constant_value: expression depends on the actions");
  return evaluate(std::array<double, kMaxDim>{});
}

namespace {

template <class F>
void visit_dag(const ExprNode* root, F&& f) {
  std::unordered_set<const ExprNode*> seen;
  std::vector<const ExprNode*> stack{root};
  while (!stack.empty()) {
    const ExprNode* n = stack.back();
    stack.pop_back();
    if (!n || !seen.insert(n).second) continue;
    f(*n);
    if (n->a) stack.push_back(n->a.get());
    if (n->b) stack.push_back(n->b.get());
  }
}

}  // namespace

bool Expr::depends_on_actions() const {
  bool dep = false;
  visit_dag(node_.get(), [&](const ExprNode& n) {
    if (n.op == Op::coord || n.op == Op::gauss || n.op == Op::bump) dep = true;
  });
  return dep;
}

int Expr::min_dimension() const {
  int d = 0;
  visit_dag(node_.get(), [&](const ExprNode& n) {
    if (n.op == Op::coord) d = std::max(d, n.index + 1);
    if (n.op == Op::gauss || n.op == Op::bump) d = std::max(d, int(n.center.size()));
  });
  return d;
}

std::size_t Expr::node_count() const {
  std::size_t c = 0;
  visit_dag(node_.get(), [&](const ExprNode&) { ++c; });
  return c;
}

Expr Expr::derivative(int j) const {
  std::unordered_map<const ExprNode*, Expr> memo;
  std::function<Expr(const NodePtr&)> d = [&](const NodePtr& p) -> Expr {
    if (auto it = memo.find(p.get()); it != memo.end()) return it->second;
    const ExprNode& n = *p;
    const Expr self = ExprBuilder::wrap(p);
    Expr r;
    switch (n.op) {
      case Op::constant: r = Expr(); break;
      case Op::coord: r = Expr(n.index == j ? 1.0 : 0.0); break;
      case Op::add: r = d(n.a) + d(n.b); break;
      case Op::sub: r = d(n.a) - d(n.b); break;
      case Op::neg: r = -d(n.a); break;
      case Op::mul: {
        const Expr a = ExprBuilder::wrap(n.a), b = ExprBuilder::wrap(n.b);
        r = d(n.a) * b + a * d(n.b);
        break;
      }
      case Op::div: {
        const Expr a = ExprBuilder::wrap(n.a), b = ExprBuilder::wrap(n.b);
        const Expr da = d(n.a), db = d(n.b);
        r = da / b - a * db / (b * b);
        break;
      }
      case Op::pow: {
        const Expr a = ExprBuilder::wrap(n.a);
        r = Expr(n.param) * pow(a, n.param - 1.0) * d(n.a);
        break;
      }
      case Op::exp: r = self * d(n.a); break;
      case Op::sin: r = cos(ExprBuilder::wrap(n.a)) * d(n.a); break;
      case Op::cos: r = -sin(ExprBuilder::wrap(n.a)) * d(n.a); break;
      case Op::sqrt: r = d(n.a) / (Expr(2.0) * self); break;
      case Op::log: r = d(n.a) / ExprBuilder::wrap(n.a); break;
      case Op::gauss: {
        if (j >= int(n.center.size())) { r = Expr(); break; }
        const double w2 = n.param * n.param;
        r = -(Expr::coord(j) - Expr(n.center[j])) / Expr(w2) * self;
        break;
      }
      case Op::bump: {
        if (j >= int(n.center.size())) { r = Expr(); break; }
        // d/dq [e^{1-1/q} q^{-p}] = b_{p+2} - p b_{p+1};  dq/dI_j = -2 (I_j - c_j) / w^2
        const double w2 = n.param * n.param;
        const int p = n.index;
        Expr dfdq = Expr::bump(n.center, n.param, p + 2);
        if (p != 0) dfdq = dfdq - Expr(double(p)) * Expr::bump(n.center, n.param, p + 1);
        r = Expr(-2.0 / w2) * (Expr::coord(j) - Expr(n.center[j])) * dfdq;
        break;
      }
    }
    memo.emplace(p.get(), r);
    return r;
  };
  return d(node_);
}

Expr Expr::conj() const {
  std::unordered_map<const ExprNode*, Expr> memo;
  std::function<Expr(const NodePtr&)> c = [&](const NodePtr& p) -> Expr {
    if (auto it = memo.find(p.get()); it != memo.end()) return it->second;
    const ExprNode& n = *p;
    Expr r;
    switch (n.op) {
      case Op::constant: r = Expr(std::conj(n.value)); break;
      case Op::coord:
      case Op::gauss:
      case Op::bump: r = ExprBuilder::wrap(p); break;
      case Op::add: r = c(n.a) + c(n.b); break;
      case Op::sub: r = c(n.a) - c(n.b); break;
      case Op::mul: r = c(n.a) * c(n.b); break;
      case Op::div: r = c(n.a) / c(n.b); break;
      case Op::neg: r = -c(n.a); break;
      case Op::pow: r = pow(c(n.a), n.param); break;
      case Op::exp: r = exp(c(n.a)); break;
      case Op::sin: r = sin(c(n.a)); break;
      case Op::cos: r = cos(c(n.a)); break;
      case Op::sqrt: r = sqrt(c(n.a)); break;
      case Op::log: r = log(c(n.a)); break;
    }
    memo.emplace(p.get(), r);
    return r;
  };
  return c(node_);
}

cplx Expr::evaluate(std::span<const double> I) const {
  std::function<cplx(const ExprNode&)> ev = [&](const ExprNode& n) -> cplx {
    switch (n.op) {
      case Op::constant: return n.value;
      case Op::coord: return I[n.index];
      case Op::add: return ev(*n.a) + ev(*n.b);
      case Op::sub: return ev(*n.a) - ev(*n.b);
      case Op::mul: return ev(*n.a) * ev(*n.b);
      case Op::div: return ev(*n.a) / ev(*n.b);
      case Op::neg: return -ev(*n.a);
      case Op::pow: return real_pow(ev(*n.a), n.param);
      case Op::exp: return std::exp(ev(*n.a));
      case Op::sin: return std::sin(ev(*n.a));
      case Op::cos: return std::cos(ev(*n.a));
      case Op::sqrt: return std::sqrt(ev(*n.a));
      case Op::log: return std::log(ev(*n.a));
      case Op::gauss: {
        double s = 0.0;
        for (std::size_t j = 0; j < n.center.size(); ++j) s += (I[j] - n.center[j]) * (I[j] - n.center[j]);
        return std::exp(-0.5 * s / (n.param * n.param));
      }
      case Op::bump: {
        double s = 0.0;
        for (std::size_t j = 0; j < n.center.size(); ++j) s += (I[j] - n.center[j]) * (I[j] - n.center[j]);
        const double q = 1.0 - s / (n.param * n.param);
        if (q <= 0.0) return 0.0;
        return std::exp(1.0 - 1.0 / q - n.index * std::log(q));
      }
    }
    return 0.0;
  };
  return ev(*node_);
}

namespace {

std::string number_text(double x) {
  std::string s = fmt::format("{}", x);
  if (x < 0) return "(" + s + ")";
  return s;
}

std::string constant_text(cplx c) {
  if (c.imag() == 0.0) return number_text(c.real());
  return fmt::format("complex({}, {})", c.real(), c.imag());
}

}  // namespace

std::string Expr::to_string() const {
  std::function<std::string(const ExprNode&)> s = [&](const ExprNode& n) -> std::string {
    switch (n.op) {
      case Op::constant: return constant_text(n.value);
      case Op::coord: return fmt::format("I{}", n.index + 1);
      case Op::add: return "(" + s(*n.a) + " + " + s(*n.b) + ")";
      case Op::sub: return "(" + s(*n.a) + " - " + s(*n.b) + ")";
      case Op::mul: return "(" + s(*n.a) + " * " + s(*n.b) + ")";
      case Op::div: return "(" + s(*n.a) + " / " + s(*n.b) + ")";
      case Op::neg: return "(-" + s(*n.a) + ")";
      case Op::pow: return "(" + s(*n.a) + " ^ " + number_text(n.param) + ")";
      case Op::exp: return "exp(" + s(*n.a) + ")";
      case Op::sin: return "sin(" + s(*n.a) + ")";
      case Op::cos: return "cos(" + s(*n.a) + ")";
      case Op::sqrt: return "sqrt(" + s(*n.a) + ")";
      case Op::log: return "log(" + s(*n.a) + ")";
      case Op::gauss: return fmt::format("gauss([{}], {})", fmt::join(n.center, ", "), n.param);
      case Op::bump:
        if (n.index == 0) return fmt::format("bump([{}], {})", fmt::join(n.center, ", "), n.param);
        return fmt::format("bump([{}], {}, {})", fmt::join(n.center, ", "), n.param, n.index);
    }
    return "?";
  };
  return s(*node_);
}

// ---------------------------------------------------------------------------
// Tape

Tape::Tape(std::span<const Expr> outputs, int dim) : dim_(dim) {
  if (dim < 1 || dim > kMaxDim) throw std::invalid_argument("Tape: unsupported dimension");
  std::unordered_map<const ExprNode*, int> slot;
  std::function<int(const ExprNode*)> emit = [&](const ExprNode* n) -> int {
    if (auto it = slot.find(n); it != slot.end()) return it->second;
    Instr in;
    in.op = n->op;
    if (n->a) in.a = emit(n->a.get());
    if (n->b) in.b = emit(n->b.get());
    in.index = n->index;
    in.param = n->param;
    in.value = n->value;
    if (n->op == Op::coord && n->index >= dim) throw std::invalid_argument(
        fmt::format("Tape: expression uses I{} in dimension {}", n->index + 1, dim));
    if (n->op == Op::gauss || n->op == Op::bump) {
      if (int(n->center.size()) != dim)
        throw std::invalid_argument(fmt::format("Tape: bump/gauss center has {} entries, dimension is {}",
                                                n->center.size(), dim));
      for (std::size_t j = 0; j < n->center.size(); ++j) in.center[j] = n->center[j];
    }
    if (n->op == Op::coord || n->op == Op::gauss || n->op == Op::bump) depends_ = true;
    code_.push_back(in);
    const int id = int(code_.size()) - 1;
    slot.emplace(n, id);
    return id;
  };
  for (const Expr& e : outputs) outputs_.push_back(emit(e.node()));
}

namespace {

struct JetOps {
  int d;
  int order;

  void zero(Jet& r) const {
    r.v = 0.0;
    if (order >= 1)
      for (int a = 0; a < d; ++a) r.g[a] = 0.0;
    if (order >= 2)
      for (int a = 0; a < d; ++a)
        for (int b = 0; b < d; ++b) r.h[a * kMaxDim + b] = 0.0;
  }

  void lin(Jet& r, const Jet& x, cplx sx, const Jet& y, cplx sy) const {
    r.v = sx * x.v + sy * y.v;
    if (order >= 1)
      for (int a = 0; a < d; ++a) r.g[a] = sx * x.g[a] + sy * y.g[a];
    if (order >= 2)
      for (int a = 0; a < d; ++a)
        for (int b = 0; b < d; ++b) r.h[a * kMaxDim + b] = sx * x.h[a * kMaxDim + b] + sy * y.h[a * kMaxDim + b];
  }

  void mul(Jet& r, const Jet& x, const Jet& y) const {
    const cplx xv = x.v, yv = y.v;
    if (order >= 2)
      for (int a = 0; a < d; ++a)
        for (int b = 0; b < d; ++b)
          r.h[a * kMaxDim + b] = xv * y.h[a * kMaxDim + b] + yv * x.h[a * kMaxDim + b] + x.g[a] * y.g[b] +
                                 y.g[a] * x.g[b];
    if (order >= 1)
      for (int a = 0; a < d; ++a) r.g[a] = xv * y.g[a] + yv * x.g[a];
    r.v = xv * yv;
  }

  // r = f(x) given f, f', f'' at x.v; r may alias x
  void compose(Jet& r, const Jet& x, cplx f0, cplx f1, cplx f2) const {
    if (order >= 2)
      for (int a = 0; a < d; ++a)
        for (int b = 0; b < d; ++b) r.h[a * kMaxDim + b] = f1 * x.h[a * kMaxDim + b] + f2 * x.g[a] * x.g[b];
    if (order >= 1)
      for (int a = 0; a < d; ++a) r.g[a] = f1 * x.g[a];
    r.v = f0;
  }

  // radial helpers: s = sum ((I-c)/w)^2 with ds_a = 2 (I_a - c_a)/w^2, d2s = 2/w^2 delta
  void radial(Jet& r, std::span<const double> I, const std::array<double, kMaxDim>& c, double w, double f0,
              double fs, double fss) const {
    // f as a function of s: value f0, df/ds = fs, d2f/ds2 = fss
    const double w2 = w * w;
    r.v = f0;
    if (order >= 1)
      for (int a = 0; a < d; ++a) r.g[a] = fs * 2.0 * (I[a] - c[a]) / w2;
    if (order >= 2)
      for (int a = 0; a < d; ++a)
        for (int b = 0; b < d; ++b) {
          const double sa = 2.0 * (I[a] - c[a]) / w2, sb = 2.0 * (I[b] - c[b]) / w2;
          r.h[a * kMaxDim + b] = fss * sa * sb + (a == b ? fs * 2.0 / w2 : 0.0);
        }
  }
};

thread_local std::vector<Jet> tl_work;
thread_local std::vector<cplx> tl_values;

}  // namespace

void Tape::eval(std::span<const double> I, int order, std::span<Jet> out) const {
  if (int(I.size()) < dim_) throw std::invalid_argument("Tape::eval: action dimension mismatch");
  if (out.size() != outputs_.size()) throw std::invalid_argument("Tape::eval: output span size mismatch");
  std::vector<Jet>& w = tl_work;
  if (w.size() < code_.size()) w.resize(code_.size());
  const JetOps ops{dim_, order};
  const int d = dim_;
  for (std::size_t i = 0; i < code_.size(); ++i) {
    const Instr& in = code_[i];
    Jet& r = w[i];
    switch (in.op) {
      case Op::constant:
        ops.zero(r);
        r.v = in.value;
        break;
      case Op::coord:
        ops.zero(r);
        r.v = I[in.index];
        if (order >= 1) r.g[in.index] = 1.0;
        break;
      case Op::add: ops.lin(r, w[in.a], 1.0, w[in.b], 1.0); break;
      case Op::sub: ops.lin(r, w[in.a], 1.0, w[in.b], -1.0); break;
      case Op::neg: ops.lin(r, w[in.a], -1.0, w[in.a], 0.0); break;
      case Op::mul: ops.mul(r, w[in.a], w[in.b]); break;
      case Op::div: {
        const Jet& y = w[in.b];
        const cplx inv = 1.0 / y.v;
        Jet rec;
        ops.compose(rec, y, inv, -inv * inv, 2.0 * inv * inv * inv);
        ops.mul(r, w[in.a], rec);
        break;
      }
      case Op::pow: {
        const Jet& x = w[in.a];
        const double p = in.param;
        const cplx f0 = real_pow(x.v, p);
        const cplx f1 = order >= 1 ? p * real_pow(x.v, p - 1.0) : 0.0;
        const cplx f2 = order >= 2 ? p * (p - 1.0) * real_pow(x.v, p - 2.0) : 0.0;
        ops.compose(r, x, f0, f1, f2);
        break;
      }
      case Op::exp: {
        const cplx e = std::exp(w[in.a].v);
        ops.compose(r, w[in.a], e, e, e);
        break;
      }
      case Op::sin: {
        const cplx s = std::sin(w[in.a].v), c = std::cos(w[in.a].v);
        ops.compose(r, w[in.a], s, c, -s);
        break;
      }
      case Op::cos: {
        const cplx s = std::sin(w[in.a].v), c = std::cos(w[in.a].v);
        ops.compose(r, w[in.a], c, -s, -c);
        break;
      }
      case Op::sqrt: {
        const cplx s = std::sqrt(w[in.a].v);
        ops.compose(r, w[in.a], s, 0.5 / s, -0.25 / (s * s * s));
        break;
      }
      case Op::log: {
        const cplx x = w[in.a].v;
        ops.compose(r, w[in.a], std::log(x), 1.0 / x, -1.0 / (x * x));
        break;
      }
      case Op::gauss: {
        double s = 0.0;
        for (int a = 0; a < d; ++a) s += (I[a] - in.center[a]) * (I[a] - in.center[a]);
        s /= in.param * in.param;
        const double f = std::exp(-0.5 * s);
        ops.zero(r);
        ops.radial(r, I, in.center, in.param, f, -0.5 * f, 0.25 * f);
        break;
      }
      case Op::bump: {
        double s = 0.0;
        for (int a = 0; a < d; ++a) s += (I[a] - in.center[a]) * (I[a] - in.center[a]);
        s /= in.param * in.param;
        const double q = 1.0 - s;
        ops.zero(r);
        if (q <= 0.0) break;
        const int p = in.index;
        const double f = std::exp(1.0 - 1.0 / q - p * std::log(q));
        if (f == 0.0) break;
        // F(q) with L = F'/F; derivatives with respect to s flip the sign once
        const double L = 1.0 / (q * q) - p / q;
        const double dL = -2.0 / (q * q * q) + p / (q * q);
        ops.radial(r, I, in.center, in.param, f, -f * L, f * (L * L + dL));
        break;
      }
    }
  }
  for (std::size_t o = 0; o < outputs_.size(); ++o) out[o] = w[outputs_[o]];
}

void Tape::eval_values(std::span<const double> I, std::span<cplx> out) const {
  if (int(I.size()) < dim_) throw std::invalid_argument("Tape::eval_values: action dimension mismatch");
  if (out.size() != outputs_.size()) throw std::invalid_argument("Tape::eval_values: output span size mismatch");
  std::vector<cplx>& w = tl_values;
  if (w.size() < code_.size()) w.resize(code_.size());
  const int d = dim_;
  for (std::size_t i = 0; i < code_.size(); ++i) {
    const Instr& in = code_[i];
    cplx& r = w[i];
    switch (in.op) {
      case Op::constant: r = in.value; break;
      case Op::coord: r = I[in.index]; break;
      case Op::add: r = w[in.a] + w[in.b]; break;
      case Op::sub: r = w[in.a] - w[in.b]; break;
      case Op::neg: r = -w[in.a]; break;
      case Op::mul: r = w[in.a] * w[in.b]; break;
      case Op::div: r = w[in.a] / w[in.b]; break;
      case Op::pow: r = real_pow(w[in.a], in.param); break;
      case Op::exp: r = std::exp(w[in.a]); break;
      case Op::sin: r = std::sin(w[in.a]); break;
      case Op::cos: r = std::cos(w[in.a]); break;
      case Op::sqrt: r = std::sqrt(w[in.a]); break;
      case Op::log: r = std::log(w[in.a]); break;
      case Op::gauss: {
        double s = 0.0;
        for (int a = 0; a < d; ++a) s += (I[a] - in.center[a]) * (I[a] - in.center[a]);
        r = std::exp(-0.5 * s / (in.param * in.param));
        break;
      }
      case Op::bump: {
        double s = 0.0;
        for (int a = 0; a < d; ++a) s += (I[a] - in.center[a]) * (I[a] - in.center[a]);
        const double q = 1.0 - s / (in.param * in.param);
        r = q <= 0.0 ? 0.0 : std::exp(1.0 - 1.0 / q - in.index * std::log(q));
        break;
      }
    }
  }
  for (std::size_t o = 0; o < outputs_.size(); ++o) out[o] = w[outputs_[o]];
}

// ---------------------------------------------------------------------------
// Parser

ParseError::ParseError(std::size_t position, const std::string& message)
    : Error(fmt::format("{} (at column {})", message, position + 1)), position_(position) {}

namespace {

class Parser {
 public:
  Parser(std::string_view text, int dim) : s_(text), dim_(dim) {}

  Expr parse() {
    Expr e = expr();
    skip();
    if (pos_ != s_.size()) fail("unexpected trailing input");
    return e;
  }

 private:
  std::string_view s_;
  std::size_t pos_ = 0;
  int dim_;

  [[noreturn]] void fail(const std::string& msg) const { throw ParseError(pos_, msg); }

  void skip() {
    while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
  }

  bool accept(char c) {
    skip();
    if (pos_ < s_.size() && s_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  void expect(char c) {
    if (!accept(c)) fail(fmt::format("expected '{}'", c));
  }

  Expr expr() {
    Expr e = term();
    for (;;) {
      if (accept('+')) e = e + term();
      else if (accept('-')) e = e - term();
      else return e;
    }
  }

  Expr term() {
    Expr e = unary();
    for (;;) {
      if (accept('*')) e = e * unary();
      else if (accept('/')) {
        const std::size_t at = pos_;
        Expr den = unary();
        if (den.is_zero()) throw ParseError(at, "division by zero");
        e = e / den;
      } else return e;
    }
  }

  Expr unary() {
    if (accept('-')) return -unary();
    if (accept('+')) return unary();
    return power();
  }

  Expr power() {
    Expr base = primary();
    if (accept('^')) {
      const std::size_t at = pos_;
      Expr ex = unary();
      if (!ex.is_constant()) throw ParseError(at, "exponent must be a constant");
      const cplx p = ex.constant_value();
      if (p.imag() != 0.0) throw ParseError(at, "exponent must be real");
      return pow(base, p.real());
    }
    return base;
  }

  double number_literal() {
    skip();
    bool neg = false;
    if (accept('-')) neg = true;
    skip();
    const char* first = s_.data() + pos_;
    const char* last = s_.data() + s_.size();
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec != std::errc()) fail("expected a number");
    pos_ += std::size_t(ptr - first);
    return neg ? -v : v;
  }

  double constant_argument() {
    const std::size_t at = pos_;
    Expr e = expr();
    if (!e.is_constant()) throw ParseError(at, "argument must be a constant");
    const cplx v = e.constant_value();
    if (v.imag() != 0.0) throw ParseError(at, "argument must be real");
    return v.real();
  }

  std::vector<double> vector_literal() {
    expect('[');
    std::vector<double> v;
    if (!accept(']')) {
      do v.push_back(constant_argument());
      while (accept(','));
      expect(']');
    }
    return v;
  }

  Expr primary() {
    skip();
    if (pos_ >= s_.size()) fail("unexpected end of expression");
    const char c = s_[pos_];
    if (c == '(') {
      ++pos_;
      Expr e = expr();
      expect(')');
      return e;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return Expr(number_literal());
    if (std::isalpha(static_cast<unsigned char>(c))) {
      const std::size_t start = pos_;
      while (pos_ < s_.size() && (std::isalnum(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == '_')) ++pos_;
      const std::string_view id = s_.substr(start, pos_ - start);
      if (id.size() >= 2 && id[0] == 'I' && std::isdigit(static_cast<unsigned char>(id[1]))) {
        int j = 0;
        auto [p, ec] = std::from_chars(id.data() + 1, id.data() + id.size(), j);
        if (ec != std::errc() || p != id.data() + id.size()) throw ParseError(start, "malformed coordinate name");
        if (j < 1 || j > dim_) throw ParseError(start, fmt::format("coordinate I{} out of range 1..{}", j, dim_));
        return Expr::coord(j - 1);
      }
      if (id == "pi") return Expr(std::numbers::pi);
      if (id == "bump" || id == "gauss") {
        expect('(');
        const std::size_t at = pos_;
        std::vector<double> center = vector_literal();
        if (int(center.size()) != dim_)
          throw ParseError(at, fmt::format("{} center needs {} entries, got {}", id, dim_, center.size()));
        expect(',');
        const std::size_t wat = pos_;
        const double width = constant_argument();
        if (!(width > 0.0)) throw ParseError(wat, "width must be positive");
        int power = 0;
        if (id == "bump" && accept(',')) power = int(constant_argument());
        expect(')');
        return id == "bump" ? Expr::bump(center, width, power) : Expr::gauss(center, width);
      }
      if (id == "complex") {
        expect('(');
        const double re = constant_argument();
        expect(',');
        const double im = constant_argument();
        expect(')');
        return Expr(cplx(re, im));
      }
      expect('(');
      Expr arg = expr();
      expect(')');
      if (id == "exp") return exp(arg);
      if (id == "sin") return sin(arg);
      if (id == "cos") return cos(arg);
      if (id == "sqrt") return sqrt(arg);
      if (id == "log") return log(arg);
      throw ParseError(start, fmt::format("unknown function '{}'", id));
    }
    fail(fmt::format("unexpected character '{}'", c));
  }
};

}  // namespace

Expr parse_expression(std::string_view text, int dim) {
  if (dim < 1 || dim > kMaxDim) throw std::invalid_argument("parse_expression: unsupported dimension");
  return Parser(text, dim).parse();
}

}  // namespace ensdev
