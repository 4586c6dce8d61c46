#pragma once

// Expression DAGs over the action coordinates I1..In with complex constants.
// Expressions can be differentiated symbolically (needed to build frequency
// maps and small divisors from h) and compiled to a tape that evaluates
// value, gradient and Hessian in one forward pass.

#include <complex>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ensdev/core.hpp"

namespace ensdev {

using cplx = std::complex<double>;

/// Second-order forward jet of a scalar function of the actions.
struct Jet {
  cplx v{};
  std::array<cplx, kMaxDim> g{};
  std::array<cplx, kMaxDim * kMaxDim> h{};

  cplx hess(int a, int b) const { return h[a * kMaxDim + b]; }
};

enum class Op : unsigned char {
  constant,
  coord,
  add,
  sub,
  mul,
  div,
  neg,
  pow,    // real constant exponent
  exp,
  sin,
  cos,
  sqrt,
  log,
  gauss,  // exp(-|I-c|^2 / (2 w^2))
  bump,   // exp(1 - 1/q) q^{-p}, q = 1 - |I-c|^2/w^2, zero for q <= 0
};

struct ExprNode;

class Expr {
 public:
  Expr();  // zero
  Expr(double c);  // NOLINT(google-explicit-constructor)
  Expr(cplx c);    // NOLINT(google-explicit-constructor)

  static Expr constant(cplx c);
  static Expr coord(int j);
  static Expr gauss(std::vector<double> center, double width);
  static Expr bump(std::vector<double> center, double width, int power = 0);

  friend Expr operator+(const Expr& a, const Expr& b);
  friend Expr operator-(const Expr& a, const Expr& b);
  friend Expr operator*(const Expr& a, const Expr& b);
  friend Expr operator/(const Expr& a, const Expr& b);
  friend Expr operator-(const Expr& a);
  friend Expr pow(const Expr& a, double p);
  friend Expr exp(const Expr& a);
  friend Expr sin(const Expr& a);
  friend Expr cos(const Expr& a);
  friend Expr sqrt(const Expr& a);
  friend Expr log(const Expr& a);

  Expr& operator+=(const Expr& b) { return *this = *this + b; }
  Expr& operator*=(const Expr& b) { return *this = *this * b; }

  /// d/dI_j, simplified on the fly.
  Expr derivative(int j) const;
  /// Complex conjugate of the function (real inputs).
  Expr conj() const;

  bool is_zero() const;
  bool is_constant() const;
  /// Value if constant, throws otherwise.
  cplx constant_value() const;
  bool depends_on_actions() const;
  /// Largest coordinate index used plus one.
  int min_dimension() const;
  /// Number of distinct nodes in the DAG.
  std::size_t node_count() const;

  /// Direct recursive evaluation of the value; slow, used as a test oracle.
  cplx evaluate(std::span<const double> action) const;
  /// Round-trippable infix text (parseable by parse_expression).
  std::string to_string() const;

  const ExprNode* node() const { return node_.get(); }
  const std::shared_ptr<const ExprNode>& shared() const { return node_; }

 private:
  explicit Expr(std::shared_ptr<const ExprNode> n) : node_(std::move(n)) {}
  friend struct ExprBuilder;
  std::shared_ptr<const ExprNode> node_;
};

struct ExprNode {
  Op op = Op::constant;
  cplx value{};                // constant
  int index = 0;               // coord index or bump power
  double param = 0.0;          // pow exponent or bump/gauss width
  std::vector<double> center;  // bump/gauss
  std::shared_ptr<const ExprNode> a, b;
};

/// Compiled multi-output evaluator. Nodes shared between outputs are
/// evaluated once.
class Tape {
 public:
  Tape() = default;
  Tape(std::span<const Expr> outputs, int dim);

  int dim() const { return dim_; }
  std::size_t outputs() const { return outputs_.size(); }
  std::size_t size() const { return code_.size(); }
  bool depends_on_actions() const { return depends_; }

  /// order 0: values only; 1: values and gradients; 2: everything.
  void eval(std::span<const double> action, int order, std::span<Jet> out) const;
  void eval_values(std::span<const double> action, std::span<cplx> out) const;

 private:
  struct Instr {
    Op op;
    int a = -1, b = -1;
    int index = 0;
    double param = 0.0;
    cplx value{};
    std::array<double, kMaxDim> center{};
  };
  std::vector<Instr> code_;
  std::vector<int> outputs_;
  int dim_ = 0;
  bool depends_ = false;
};

class ParseError : public Error {
 public:
  ParseError(std::size_t position, const std::string& message);
  std::size_t position() const { return position_; }

 private:
  std::size_t position_;
};

/// Grammar: numbers, I1..In, pi, + - * / ^ (constant exponent), parentheses,
/// exp sin cos sqrt log, bump([c1,..,cn], w[, p]), gauss([c1,..,cn], w),
/// complex(re, im).
Expr parse_expression(std::string_view text, int dim);

}  // namespace ensdev
