#pragma once

// Fourier modes of fields, mode products a_k = G_k f_{0,-k}, the
// high-frequency tail R_{>K} and a sampled-theta FFT path.

#include <functional>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "ensdev/model.hpp"
#include "ensdev/parallel.hpp"

namespace ensdev {

/// c_k of a field; the zero expression when absent.
Expr fourier_coeff(const TrigPolyField& field, const Wavevector& k);

struct ModeProduct {
  Wavevector k;
  Expr a;                 // G_k f_{0,-k}
  std::vector<Expr> grad; // dA/dI_j

  bool is_zero() const { return a.is_zero(); }
};

ModeProduct mode_product(const TrigPolyField& G, const TrigPolyField& f0, const Wavevector& k);

using CGrad = std::array<cplx, kMaxDim>;

/// Mode products a_k and their I-gradients at any action point, for a fixed
/// list of wavevectors. For real G and f_0 only one of each +-k pair is
/// listed and `multiplicity` is 2, since a_{-k} = conj(a_k).
class ModeSource {
 public:
  virtual ~ModeSource() = default;
  virtual int dim() const = 0;
  virtual const std::vector<Wavevector>& modes() const = 0;
  virtual double multiplicity() const = 0;
  /// a[i], grad[i] for modes()[i], plus G_0 f_{0,0} in *zero.
  virtual void eval(std::span<const double> I, std::span<cplx> a, std::span<CGrad> grad, double* zero) const = 0;
  virtual std::string describe() const = 0;
};

/// Mask applied to the density side: value and I-gradient.
using ActionMask = std::function<double(std::span<const double>, Vec*)>;

/// Mode products read off symbolic fields, optionally multiplied by a mask.
/// `min_order` < |k|_1 <= `max_order` selects the modes (max_order < 0: all).
class FieldModeSource final : public ModeSource {
 public:
  FieldModeSource(const TrigPolyField& G, const TrigPolyField& f0, int min_order = 0, int max_order = -1,
                  ActionMask mask = nullptr);

  int dim() const override { return dim_; }
  const std::vector<Wavevector>& modes() const override { return modes_; }
  double multiplicity() const override { return mult_; }
  void eval(std::span<const double> I, std::span<cplx> a, std::span<CGrad> grad, double* zero) const override;
  std::string describe() const override;

 private:
  int dim_ = 0;
  double mult_ = 1.0;
  std::vector<Wavevector> modes_;
  Tape tape_;  // a_k for each mode, then the zero product
  ActionMask mask_;
};

/// Evaluates another source once at every weighted node of a grid and
/// answers later queries at those nodes from the table. Other points fall
/// through to the wrapped source, which must outlive this one. Nodes with
/// active[i] == 0 are stored as zero without evaluating the source.
class TabulatedModeSource final : public ModeSource {
 public:
  TabulatedModeSource(const ModeSource& src, const ActionGrid& grid, Exec exec = default_exec(),
                      const std::vector<std::uint8_t>* active = nullptr);

  int dim() const override { return src_.dim(); }
  const std::vector<Wavevector>& modes() const override { return src_.modes(); }
  double multiplicity() const override { return src_.multiplicity(); }
  void eval(std::span<const double> I, std::span<cplx> a, std::span<CGrad> grad, double* zero) const override;
  std::string describe() const override { return src_.describe(); }

 private:
  const ModeSource& src_;
  std::map<std::vector<double>, std::size_t> row_;
  std::vector<cplx> a_;
  std::vector<CGrad> grad_;
  std::vector<double> zero_;
};

/// Per-mode quadrature of |a_k| and |grad a_k| (Euclidean, complex modulus).
struct ModeNorms {
  std::vector<Wavevector> modes;
  std::vector<double> a_l1, grad_l1;
  double multiplicity = 1.0;
  double zero_integral = 0.0;  // int G_0 f_{0,0} dI
};

ModeNorms mode_l1_norms(const ModeSource& src, const ActionGrid& grid, Exec exec = default_exec());

/// (2 pi)^n sum_{|k|_1 > K} int |a_k| dI (masked by the source).
double tail(const ModeSource& src, int K, const ActionGrid& grid, Exec exec = default_exec());
double tail(const TrigPolyField& G, const TrigPolyField& f0, int K, const ActionGrid& grid,
            Exec exec = default_exec());

struct DecayFit {
  double sigma0 = 0.0;
  double intercept = 0.0;
  double residual = 0.0;  // rms in log space
};

/// Least-squares slope of log R_{>K} against K over the nonzero tails.
DecayFit tail_decay_fit(std::span<const int> Ks, std::span<const double> tails);

/// Forward DFT over a tensor theta grid of M points per axis (FFTW). Index j
/// of a sample is row-major with theta_1 slowest; theta_j = 2 pi j / M.
class ThetaTransform {
 public:
  ThetaTransform(int dim, int M);
  ~ThetaTransform();
  ThetaTransform(const ThetaTransform&) = delete;
  ThetaTransform& operator=(const ThetaTransform&) = delete;

  int dim() const { return dim_; }
  int points() const { return M_; }
  std::size_t size() const { return size_; }
  /// theta of sample j.
  void angles(std::size_t j, Vec& theta) const;
  /// Largest |k_j| resolved without aliasing, (M - 1) / 2.
  int resolved() const { return (M_ - 1) / 2; }
  /// c_k = M^{-n} sum_j f_j e^{-i k.theta_j} for every k; thread safe.
  void forward(std::span<const cplx> samples, std::span<cplx> coeffs) const;
  /// Position of k in the coefficient array.
  std::size_t index(std::span<const int> k) const;

 private:
  int dim_, M_;
  std::size_t size_;
  void* plan_ = nullptr;
};

/// Coefficients of a field at I from theta samples, for every |k_j| <= resolved.
std::vector<std::pair<Wavevector, cplx>> sampled_coefficients(const TrigPolyField& field,
                                                               std::span<const double> I, int M);

struct ParsevalCheck {
  double mode_side = 0.0;  // (2 pi)^n sum_k int |c_k|^2 dI
  double grid_side = 0.0;  // int int |F|^2 dtheta dI on a tensor grid
};
ParsevalCheck parseval_check(const TrigPolyField& field, const ActionGrid& grid, Exec exec = default_exec());

/// JSON object {"k1,k2": "expression", ...} for the mode table.
std::string mode_table_json(const TrigPolyField& field);

}  // namespace ensdev
