#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "fieldreg/field_sim.hpp"
#include "fieldreg/kernel.hpp"
#include "fieldreg/regression.hpp"

namespace fieldreg {

/// Standard normal CDF, Phi(x) = erfc(-x/sqrt(2))/2.
double normal_cdf(double x);
/// Inverse of Phi (Acklam's rational approximation plus Newton polish).
double normal_quantile(double p);

/// p = P(chi^2_1 > z^2) = erfc(|z|/sqrt(2)). Throws on NaN.
double chi_square_pvalue(double z);

/// Kolmogorov-Smirnov distance of a sample against the standard normal.
double ks_statistic(std::vector<double> sample);
/// Asymptotic critical value k_alpha / sqrt(n) for alpha in {0.10, 0.05, 0.025, 0.01}.
double ks_critical(double alpha, std::size_t n);

struct StandardizedStat {
  double z = 0.0;
  double t = 0.0;  // z^2, the chi^2(1) statistic
  double p = 1.0;
  bool boundary = false;
};

/// z = (n h)^{d/2} (g_n(x) - m(x)) / (sigma sqrt(eta * inflation)).
/// The reference must share query points, lattice, and bandwidth.
std::vector<StandardizedStat> standardize(const Estimate& est, const Estimate& mean_ref,
                                          double sigma2, double eta, double inflation = 1.0);

enum class MeanPolicy { leave_one_out, include_self };
std::string to_string(MeanPolicy policy);

/// Pointwise arithmetic mean of replicate fits plus the variance inflation
/// factor of g_n - mean: (1 + 1/R) when the target is held out of the mean,
/// (1 - 1/R) when it is included.
struct EstimateMean {
  Estimate mean;
  double inflation = 1.0;
};
EstimateMean mean_reference(const std::vector<Estimate>& fits, MeanPolicy policy);

struct GridMean {
  std::vector<double> values;
  double inflation = 1.0;
};
GridMean mean_reference_grid(const std::vector<GridEstimate>& fits, MeanPolicy policy);

struct PValueMap {
  int n = 0;
  int d = 0;
  double bandwidth = 0.0;
  double sigma2 = 0.0;
  double eta = 0.0;  // eta-hat actually used in the normalization
  double threshold = 0.01;
  std::vector<StandardizedStat> stats;  // per design point, lexicographic order
  std::uint64_t interior_count = 0;
  std::uint64_t boundary_count = 0;
  double interior_fraction_above = 0.0;  // fraction of interior p-values > threshold
  double boundary_fraction_above = 0.0;
};

struct PipelineConfig {
  Kernel kernel;  // the one kernel used for both fitting and sigma^2
  double bandwidth = 0.1;
  int rho = -1;  // -1: default_rho(n)
  MeanPolicy policy = MeanPolicy::leave_one_out;
  double threshold = 0.01;
  int threads = 0;
  const Field* true_noise = nullptr;  // when set, eta-hat uses it instead of residuals
};

/// Full pipeline: fit the target, fit the replicates, average them, estimate
/// eta from the target residuals, and standardize at every design point.
/// Under leave_one_out `replicates` must exclude the target (the inflation
/// 1+1/R is divided out); under include_self it must contain it (uncorrected).
PValueMap pvalue_map(std::span<const double> noisy,
                     const std::vector<std::span<const double>>& replicates, const Lattice& lat,
                     const PipelineConfig& config);

struct NormalityReport {
  std::vector<std::vector<double>> queries;
  std::vector<double> mean;
  std::vector<double> variance;
  std::vector<double> ks_distance;
  double ks_critical_value = 0.0;
  double ks_alpha = 0.01;
  std::vector<std::vector<double>> correlation;  // across queries
  double max_offdiag_correlation = 0.0;
  double sigma2 = 0.0;
  double eta = 0.0;
  int replicates = 0;
  std::string to_string() const;
};

/// Monte Carlo check of the normal limit of (nh)^{d/2}(g_n - E g_n)/(sigma sqrt(eta))
/// at distinct interior query points; E g_n is computed exactly from g.
NormalityReport mc_normality_study(const FieldSpec& spec, const ScalarField& g,
                                   const Kernel& kernel, const BandwidthRule& rule, int n,
                                   const std::vector<std::vector<double>>& queries, int replicates,
                                   double ks_alpha = 0.01, int threads = 0);

void write_pvalue_map_csv(const PValueMap& map, const std::string& path);

}  // namespace fieldreg
