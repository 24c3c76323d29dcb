#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "fieldreg/errors.hpp"

namespace fieldreg {

enum class KernelFamily { box, epanechnikov_paper, epanechnikov_normalized, triangle, custom_table };
enum class RadialNorm { euclidean, max };

std::string to_string(KernelFamily family);
std::string to_string(RadialNorm norm);

/// Measured properties of a kernel against the standing weight-function
/// assumptions: unit mass, symmetry, nonnegativity, compact support on
/// [-1,1]^d, Lipschitz continuity, and two-sided bounds 0 < c <= K <= C.
struct A1Report {
  double mass_quadrature = 0.0;       // cached high-accuracy mass
  double mass_grid = 0.0;             // midpoint estimate at the report resolution
  double max_symmetry_violation = 0.0;
  double lipschitz_measured = 0.0;    // max finite difference over the grid
  double lipschitz_cached = 0.0;
  double min_on_cube = 0.0;           // measured c
  double max_on_cube = 0.0;           // measured C
  double max_outside_support = 0.0;   // should be exactly 0

  bool mass_ok = false;
  bool symmetric_ok = false;
  bool nonnegative_ok = false;
  bool support_ok = false;
  bool lipschitz_ok = false;
  bool lower_bound_ok = false;        // strict positivity on the whole cube

  bool all_pass() const {
    return mass_ok && symmetric_ok && nonnegative_ok && support_ok && lipschitz_ok &&
           lower_bound_ok;
  }
  std::string to_string() const;
};

/// Symmetric nonnegative weight function supported on [-1,1]^d with cached
/// moments. Immutable after construction; cheap to copy, safe to share.
class Kernel {
 public:
  static Kernel box(int d);
  static Kernel epanechnikov_paper(int d, RadialNorm norm = RadialNorm::euclidean);
  static Kernel epanechnikov_normalized(int d, RadialNorm norm = RadialNorm::euclidean);
  static Kernel triangle(int d);

  /// Tabulated kernel on a full tensor grid spanning [-1,1] per axis,
  /// evaluated by multilinear interpolation.
  static Kernel custom_table(int d, RadialNorm norm, std::vector<std::vector<double>> axis_nodes,
                             std::vector<double> values);
  /// Plain-text table: header "d norm", then rows "u_1 ... u_d value".
  static Kernel from_table_file(const std::string& path);

  /// Lookup by CLI name: box | epanechnikov-paper | epanechnikov-normalized | triangle.
  static Kernel from_name(const std::string& name, int d,
                          RadialNorm norm = RadialNorm::euclidean);

  int dim() const { return d_; }
  KernelFamily family() const { return family_; }
  RadialNorm norm() const { return norm_; }
  std::string name() const;

  double mass() const { return mass_; }          // ∫ K
  double l2_moment() const { return l2_; }       // ∫ K²
  double lipschitz() const { return lipschitz_; }
  double lower_bound() const { return lower_; }  // inf over [-1,1]^d
  double upper_bound() const { return upper_; }  // sup over [-1,1]^d

  /// Pointwise value; exactly 0 outside [-1,1]^d. `u` must have dim() coords.
  double evaluate(const double* u) const;
  double evaluate(const std::vector<double>& u) const;

  /// Copy with K multiplied by c > 0 (the regression ratio is invariant).
  Kernel scaled(double c) const;

  A1Report check_assumption_a1(int grid_resolution) const;

 private:
  Kernel() = default;
  void compute_moments();

  KernelFamily family_ = KernelFamily::box;
  RadialNorm norm_ = RadialNorm::euclidean;
  int d_ = 1;
  double amplitude_ = 1.0;  // family-specific leading constant, times any scaled() factor
  double mass_ = 0.0;
  double l2_ = 0.0;
  double lipschitz_ = 0.0;
  double lower_ = 0.0;
  double upper_ = 0.0;
  // custom-table storage
  std::vector<std::vector<double>> axis_nodes_;
  std::vector<double> table_;
  double table_interpolate(const double* u) const;
};

inline double Kernel::evaluate(const double* u) const {
  for (int l = 0; l < d_; ++l)
    if (u[l] < -1.0 || u[l] > 1.0) return 0.0;
  switch (family_) {
    case KernelFamily::box:
      return amplitude_;
    case KernelFamily::epanechnikov_paper:
    case KernelFamily::epanechnikov_normalized: {
      double r2;
      if (norm_ == RadialNorm::euclidean) {
        r2 = 0.0;
        for (int l = 0; l < d_; ++l) r2 += u[l] * u[l];
      } else {
        double m = 0.0;
        for (int l = 0; l < d_; ++l) m = std::max(m, std::fabs(u[l]));
        r2 = m * m;
      }
      return r2 <= 1.0 ? amplitude_ * (1.0 - r2) : 0.0;
    }
    case KernelFamily::triangle: {
      double v = amplitude_;
      for (int l = 0; l < d_; ++l) v *= 1.0 - std::fabs(u[l]);
      return v;
    }
    case KernelFamily::custom_table:
      return table_interpolate(u);
  }
  return 0.0;
}

inline double Kernel::evaluate(const std::vector<double>& u) const {
  if (static_cast<int>(u.size()) != d_)
    throw ValidationError("kernel: point dimension mismatch");
  return evaluate(u.data());
}

}  // namespace fieldreg
