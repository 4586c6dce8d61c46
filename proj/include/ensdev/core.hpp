#pragma once

// Phase-space primitives: torus arithmetic, action domains, quadrature grids,
// wavevector enumeration, seeded randomness and compensated summation.

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace ensdev {

/// Largest number of degrees of freedom the jet arithmetic supports.
inline constexpr int kMaxDim = 4;
inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

/// Base class for every error the library raises on its own account.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

using Vec = std::array<double, kMaxDim>;
using Wavevector = std::vector<int>;

struct PhasePoint {
  int dim = 0;
  Vec theta{};
  Vec action{};

  PhasePoint() = default;
  PhasePoint(std::span<const double> th, std::span<const double> ac);

  std::span<const double> angles() const { return {theta.data(), std::size_t(dim)}; }
  std::span<const double> actions() const { return {action.data(), std::size_t(dim)}; }
};

double wrap_angle(double x);
std::vector<double> wrap_angles(std::span<const double> raw);
void wrap_in_place(PhasePoint& z);
/// Representative of a - b in (-pi, pi].
double angle_difference(double a, double b);
/// Euclidean distance with the angle part measured on the torus.
double phase_distance(const PhasePoint& a, const PhasePoint& b);

class ActionDomain {
 public:
  enum class Kind { ball, box };

  static ActionDomain ball(std::vector<double> center, double radius);
  static ActionDomain box(std::vector<double> lower, std::vector<double> upper);

  Kind kind() const { return kind_; }
  int dim() const { return int(lower_.size()); }
  double volume() const;
  double diameter() const;
  bool contains(std::span<const double> action) const;
  /// Distance to the boundary, negative outside.
  double boundary_distance(std::span<const double> action) const;
  /// Bounding box; equals the domain for boxes.
  const std::vector<double>& lower() const { return lower_; }
  const std::vector<double>& upper() const { return upper_; }
  const std::vector<double>& center() const { return center_; }
  double radius() const { return radius_; }
  std::string describe() const;

 private:
  Kind kind_ = Kind::box;
  std::vector<double> lower_, upper_, center_;
  double radius_ = 0.0;
};

enum class QuadratureRule { midpoint, gauss_legendre };

/// Tensor grid over the bounding box of a domain. For balls the nodes outside
/// the ball carry zero weight and the cells cut by the sphere absorb the
/// difference to the exact ball volume.
struct ActionGrid {
  ActionDomain domain;
  std::vector<int> resolution;
  QuadratureRule rule = QuadratureRule::midpoint;
  int dim = 0;
  std::vector<double> nodes;    // node-major, dim entries per node
  std::vector<double> weights;  // one per node
  std::vector<double> spacing;  // per-axis cell width (max gap for Gauss)

  std::size_t size() const { return weights.size(); }
  std::span<const double> node(std::size_t i) const {
    return {nodes.data() + i * std::size_t(dim), std::size_t(dim)};
  }
  /// Half the diagonal of one grid cell.
  double half_cell_diagonal() const;
  std::string describe() const;
};

ActionGrid build_grid(const ActionDomain& domain, std::vector<int> resolution,
                      QuadratureRule rule = QuadratureRule::midpoint);

/// Gauss-Legendre nodes and weights on [-1, 1].
void gauss_legendre(int n, std::vector<double>& x, std::vector<double>& w);

int l1_norm(std::span<const int> k);
double l2_norm(std::span<const int> k);
double dot(std::span<const int> k, std::span<const double> v);

enum class WavevectorSet { all, half };

/// Integer vectors with 0 < |k|_1 <= order in lexicographic order. With
/// `half`, only the representative whose first nonzero entry is positive.
std::vector<Wavevector> enumerate_wavevectors(int dim, int order, WavevectorSet set,
                                              std::size_t limit = 10'000'000);
std::size_t count_wavevectors(int dim, int order);
bool is_half_representative(std::span<const int> k);
Wavevector negate(std::span<const int> k);

/// |k . omega| / |k|_2, the Euclidean distance of omega to the hyperplane k . w = 0.
double distance_to_resonance(std::span<const double> omega, std::span<const int> k);

/// Deterministic stream keyed by (seed, stream id).
class SeededRng {
 public:
  SeededRng(std::uint64_t seed, std::uint64_t stream);
  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream() const { return stream_; }
  std::uint64_t next_u64();
  /// Uniform in [0, 1) with 53 random bits.
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

 private:
  std::uint64_t seed_, stream_;
  std::mt19937_64 engine_;
};

/// Neumaier-compensated sum; used for every reduction so results do not
/// depend on how the per-element work was partitioned.
double compensated_sum(std::span<const double> values);

class CompensatedAccumulator {
 public:
  void add(double x) {
    const double t = sum_ + x;
    if (std::abs(sum_) >= std::abs(x)) comp_ += (sum_ - t) + x;
    else comp_ += (x - t) + sum_;
    sum_ = t;
  }
  double value() const { return sum_ + comp_; }

 private:
  double sum_ = 0.0, comp_ = 0.0;
};

}  // namespace ensdev
