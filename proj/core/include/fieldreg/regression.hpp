#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "fieldreg/kernel.hpp"
#include "fieldreg/lattice.hpp"

namespace fieldreg {

/// Bandwidth h_n, either fixed or the power law c * n^{-gamma}.
/// CLT-based inference additionally needs n h^{d+1} -> infinity,
/// i.e. gamma < 1/(d+1) in the power-law form.
struct BandwidthRule {
  enum class Form { fixed, power_law };
  Form form = Form::power_law;
  double fixed_h = 0.1;
  double c = 1.0;
  double gamma = 0.25;

  static BandwidthRule fixed(double h);
  static BandwidthRule power_law(double c, double gamma);
  double bandwidth(int n) const;
  bool clt_valid(int d) const;
  void require_clt_valid(int d) const;  // throws ValidationError naming the requirement
  std::string describe() const;
};

struct WeightEntry {
  std::uint64_t index;  // linear lattice index
  double weight;
};

/// Nonzero kernel weights K((x - i/n)/h), sparse over the support window.
/// May be empty near the boundary when h < 1/n; estimate() treats an
/// all-zero weight vector as a per-query error.
std::vector<WeightEntry> kernel_weights(const Lattice& lat, const Kernel& kernel, double h,
                                        const std::vector<double>& x);

struct Estimate {
  int n = 0;
  int d = 0;
  double bandwidth = 0.0;
  std::vector<std::vector<double>> queries;
  std::vector<double> values;
  std::vector<double> weight_sums;
  std::vector<bool> boundary;  // query closer than h to the boundary of [0,1]^d
};

/// Kernel regression estimate at arbitrary query points. A query whose
/// weights all vanish raises an error naming the query.
Estimate estimate(std::span<const double> y, const Lattice& lat, const Kernel& kernel, double h,
                  const std::vector<std::vector<double>>& queries);

struct GridEstimate {
  int n = 0;
  int d = 0;
  double bandwidth = 0.0;
  std::vector<double> values;       // at all design points, lexicographic order
  std::vector<double> weight_sums;
};

/// Estimate at every design point; identical to calling estimate() there.
GridEstimate estimate_grid(std::span<const double> y, const Lattice& lat, const Kernel& kernel,
                           double h, int threads = 0);

struct RiemannDiagnostic {
  double cross = 0.0;  // (nh)^{-d} sum a_i(x) a_i(y)  -> delta_xy sigma^2
  double mass = 0.0;   // (nh)^{-d} sum a_i(x)         -> 1
  bool x_boundary = false;
  bool y_boundary = false;
};
RiemannDiagnostic riemann_diagnostic(const Lattice& lat, const Kernel& kernel, double h,
                                     const std::vector<double>& x, const std::vector<double>& y);

struct SCoefficientReport {
  std::vector<WeightEntry> coefficients;  // s~_i, sparse
  double sum_sq = 0.0;                    // sum s~_i^2 -> 1 for x != y
  double sup_scaled = 0.0;                // sup |s~_i| * (nh)^{d/2}, bounded in n
  double sum_abs_scaled = 0.0;            // sum |s~_i| * (nh)^{-d/2}, bounded in n
};
SCoefficientReport s_coefficients(const Lattice& lat, const Kernel& kernel, double h,
                                  const std::vector<double>& x, const std::vector<double>& y,
                                  double lambda1, double lambda2);

using ScalarField = std::function<double(const std::vector<double>&)>;

struct BiasRow {
  int n = 0;
  double h = 0.0;
  double sup_error = 0.0;
};
struct BiasStudy {
  std::vector<BiasRow> rows;
  double slope_vs_h = 0.0;  // fitted log-log slope of sup_error against h (NaN if undefined)
  std::string to_string() const;
};

/// Noiseless E g_n against g over an interior query grid, per (n, h) row.
BiasStudy bias_study(const ScalarField& g, const Kernel& kernel,
                     const std::vector<std::pair<int, double>>& configs, int queries_per_axis = 33);
BiasStudy bias_study(const ScalarField& g, const Kernel& kernel, const BandwidthRule& rule,
                     const std::vector<int>& n_list, int queries_per_axis = 33);

void write_estimate_csv(const Estimate& est, const std::string& path);

}  // namespace fieldreg
