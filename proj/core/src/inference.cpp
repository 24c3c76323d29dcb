#include "fieldreg/inference.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "fieldreg/dependence.hpp"
#include "fieldreg/errors.hpp"
#include "fieldreg/parallel.hpp"
#include "fieldreg/rng.hpp"

namespace fieldreg {

namespace {
constexpr double kSqrt2 = 1.4142135623730950488016887242097;
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x / kSqrt2); }

double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) throw ValidationError("normal_quantile: p must lie in (0,1)");
  // Acklam's rational approximation
  static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                             -2.759285104469687e+02, 1.383577518672690e+02,
                             -3.066479806614716e+01, 2.506628277459239e+00};
  static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                             -1.556989798598866e+02, 6.680131188771972e+01,
                             -1.328068155288572e+01};
  static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                             -2.400758277161838e+00, -2.549732539343734e+00,
                             4.374664141464968e+00,  2.938163982698783e+00};
  static const double dd[] = {7.784695709041462e-03, 3.224671290700398e-01,
                              2.445134137142996e+00, 3.754408661907416e+00};
  const double p_low = 0.02425;
  double x;
  if (p < p_low) {
    const double q = std::sqrt(-2.0 * std::log(p));
    x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((dd[0] * q + dd[1]) * q + dd[2]) * q + dd[3]) * q + 1.0);
  } else if (p <= 1.0 - p_low) {
    const double q = p - 0.5;
    const double r = q * q;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
  } else {
    const double q = std::sqrt(-2.0 * std::log(1.0 - p));
    x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((dd[0] * q + dd[1]) * q + dd[2]) * q + dd[3]) * q + 1.0);
  }
  // two Newton steps against the erfc-based CDF
  for (int it = 0; it < 2; ++it) {
    const double density = std::exp(-0.5 * x * x) / 2.5066282746310005024;
    if (density <= 0.0) break;
    const double err = (p < 0.5) ? normal_cdf(x) - p : (1.0 - p) - 0.5 * std::erfc(x / kSqrt2);
    x -= err / density;
  }
  return x;
}

double chi_square_pvalue(double z) {
  if (std::isnan(z)) throw ValidationError("chi_square_pvalue: NaN statistic");
  return std::erfc(std::fabs(z) / kSqrt2);
}

double ks_statistic(std::vector<double> sample) {
  if (sample.empty()) throw ValidationError("ks_statistic: empty sample");
  std::sort(sample.begin(), sample.end());
  const double n = static_cast<double>(sample.size());
  double dist = 0.0;
  for (std::size_t i = 0; i < sample.size(); ++i) {
    const double f = normal_cdf(sample[i]);
    dist = std::max(dist, std::fabs((static_cast<double>(i) + 1.0) / n - f));
    dist = std::max(dist, std::fabs(f - static_cast<double>(i) / n));
  }
  return dist;
}

double ks_critical(double alpha, std::size_t n) {
  if (n == 0) throw ValidationError("ks_critical: empty sample");
  struct Entry {
    double alpha, k;
  };
  static const Entry table[] = {{0.10, 1.22385}, {0.05, 1.35810}, {0.025, 1.48007}, {0.01, 1.62762}};
  for (const auto& e : table)
    if (std::fabs(alpha - e.alpha) < 1e-12) return e.k / std::sqrt(static_cast<double>(n));
  throw ValidationError("ks_critical: alpha must be one of 0.10, 0.05, 0.025, 0.01");
}

std::vector<StandardizedStat> standardize(const Estimate& est, const Estimate& mean_ref,
                                          double sigma2, double eta, double inflation) {
  if (!(sigma2 > 0)) throw ValidationError("standardize: sigma^2 must be > 0");
  if (!(eta > 0)) throw ValidationError("standardize: eta must be > 0");
  if (!(inflation > 0)) throw ValidationError("standardize: inflation must be > 0");
  if (est.n != mean_ref.n || est.d != mean_ref.d || est.bandwidth != mean_ref.bandwidth ||
      est.queries != mean_ref.queries)
    throw ValidationError("standardize: estimate and reference must share queries, n, d and h");

  const double rate = std::pow(static_cast<double>(est.n) * est.bandwidth, 0.5 * est.d);
  const double scale = std::sqrt(sigma2 * eta * inflation);
  std::vector<StandardizedStat> stats(est.values.size());
  for (std::size_t q = 0; q < est.values.size(); ++q) {
    StandardizedStat& s = stats[q];
    s.z = rate * (est.values[q] - mean_ref.values[q]) / scale;
    s.t = s.z * s.z;
    s.p = chi_square_pvalue(s.z);
    s.boundary = est.boundary[q];
  }
  return stats;
}

std::string to_string(MeanPolicy policy) {
  return policy == MeanPolicy::leave_one_out ? "leave-one-out" : "include-self";
}

EstimateMean mean_reference(const std::vector<Estimate>& fits, MeanPolicy policy) {
  if (fits.empty()) throw ValidationError("mean_reference: empty replicate list");
  EstimateMean out;
  out.mean = fits.front();
  for (std::size_t r = 1; r < fits.size(); ++r) {
    if (fits[r].queries != out.mean.queries)
      throw ValidationError("mean_reference: replicates must share the query grid");
    for (std::size_t q = 0; q < out.mean.values.size(); ++q)
      out.mean.values[q] += fits[r].values[q];
  }
  const double r_count = static_cast<double>(fits.size());
  for (auto& v : out.mean.values) v /= r_count;
  out.inflation = policy == MeanPolicy::leave_one_out ? 1.0 + 1.0 / r_count : 1.0 - 1.0 / r_count;
  return out;
}

GridMean mean_reference_grid(const std::vector<GridEstimate>& fits, MeanPolicy policy) {
  if (fits.empty()) throw ValidationError("mean_reference: empty replicate list");
  GridMean out;
  out.values = fits.front().values;
  for (std::size_t r = 1; r < fits.size(); ++r) {
    if (fits[r].values.size() != out.values.size())
      throw ValidationError("mean_reference: replicates must share the grid");
    for (std::size_t q = 0; q < out.values.size(); ++q) out.values[q] += fits[r].values[q];
  }
  const double r_count = static_cast<double>(fits.size());
  for (auto& v : out.values) v /= r_count;
  out.inflation = policy == MeanPolicy::leave_one_out ? 1.0 + 1.0 / r_count : 1.0 - 1.0 / r_count;
  return out;
}

PValueMap pvalue_map(std::span<const double> noisy,
                     const std::vector<std::span<const double>>& replicates, const Lattice& lat,
                     const PipelineConfig& config) {
  if (replicates.size() < 2) throw ValidationError("pvalue_map: need at least 2 replicates");
  const double h = config.bandwidth;
  const GridEstimate fit = estimate_grid(noisy, lat, config.kernel, h, config.threads);

  std::vector<GridEstimate> rep_fits(replicates.size());
  for (std::size_t r = 0; r < replicates.size(); ++r)
    rep_fits[r] = estimate_grid(replicates[r], lat, config.kernel, h, config.threads);
  const GridMean ref = mean_reference_grid(rep_fits, config.policy);

  const int rho = config.rho >= 0 ? config.rho : default_rho(lat.n(), lat.d());
  EtaEstimate eta;
  if (config.true_noise != nullptr) {
    eta = estimate_eta(*config.true_noise, rho, config.threads);
  } else {
    const Field eps = residuals(noisy, fit, lat);
    eta = estimate_eta(eps, rho, config.threads);
  }

  // the corrected form divides the inflation out; include-self reproduces the
  // uncorrected arithmetic-mean normalization
  const double inflation = config.policy == MeanPolicy::leave_one_out ? ref.inflation : 1.0;

  PValueMap map;
  map.n = lat.n();
  map.d = lat.d();
  map.bandwidth = h;
  map.sigma2 = config.kernel.l2_moment();
  map.eta = eta.value;
  map.threshold = config.threshold;
  map.stats.resize(lat.size());

  const double rate = std::pow(static_cast<double>(lat.n()) * h, 0.5 * lat.d());
  const double scale = std::sqrt(map.sigma2 * eta.value * inflation);
  std::uint64_t interior_above = 0, boundary_above = 0;
  std::vector<double> x(static_cast<std::size_t>(lat.d()));
  for (std::uint64_t k = 0; k < lat.size(); ++k) {
    lat.design_point(k, x.data());
    bool boundary = false;
    for (double c : x)
      if (std::min(c, 1.0 - c) < h) boundary = true;
    StandardizedStat& s = map.stats[k];
    s.z = rate * (fit.values[k] - ref.values[k]) / scale;
    s.t = s.z * s.z;
    s.p = chi_square_pvalue(s.z);
    s.boundary = boundary;
    if (boundary) {
      ++map.boundary_count;
      if (s.p > config.threshold) ++boundary_above;
    } else {
      ++map.interior_count;
      if (s.p > config.threshold) ++interior_above;
    }
  }
  map.interior_fraction_above =
      map.interior_count ? static_cast<double>(interior_above) / static_cast<double>(map.interior_count) : 0.0;
  map.boundary_fraction_above =
      map.boundary_count ? static_cast<double>(boundary_above) / static_cast<double>(map.boundary_count) : 0.0;
  return map;
}

NormalityReport mc_normality_study(const FieldSpec& spec, const ScalarField& g,
                                   const Kernel& kernel, const BandwidthRule& rule, int n,
                                   const std::vector<std::vector<double>>& queries, int replicates,
                                   double ks_alpha, int threads) {
  if (replicates < 2) throw ValidationError("mc_normality_study: need at least 2 replicates");
  if (queries.size() < 1) throw ValidationError("mc_normality_study: need at least one query");
  const int d = static_cast<int>(queries.front().size());
  if (rule.form == BandwidthRule::Form::power_law) rule.require_clt_valid(d);
  const Lattice lat(n, d);
  const double h = rule.bandwidth(n);
  spec.validate(d);

  for (std::size_t a = 0; a < queries.size(); ++a) {
    if (static_cast<int>(queries[a].size()) != d)
      throw ValidationError("mc_normality_study: query dimension mismatch");
    for (double c : queries[a])
      if (std::min(c, 1.0 - c) < h)
        throw ValidationError("mc_normality_study: queries must be interior (farther than h from the boundary)");
    for (std::size_t b = a + 1; b < queries.size(); ++b)
      if (queries[a] == queries[b])
        throw ValidationError("mc_normality_study: queries must be pairwise distinct");
  }

  // fixed weights and the exact E g_n from g
  const std::size_t q_count = queries.size();
  std::vector<std::vector<WeightEntry>> weights(q_count);
  std::vector<double> weight_sum(q_count);
  std::vector<double> expected(q_count);
  std::vector<double> xv(static_cast<std::size_t>(d));
  for (std::size_t q = 0; q < q_count; ++q) {
    weights[q] = kernel_weights(lat, kernel, h, queries[q]);
    double den = 0.0, num = 0.0;
    for (const auto& e : weights[q]) {
      lat.design_point(e.index, xv.data());
      num += g(xv) * e.weight;
      den += e.weight;
    }
    if (den <= 0.0) throw ValidationError("mc_normality_study: zero weight sum at a query");
    weight_sum[q] = den;
    expected[q] = num / den;
  }

  int truncation = 1;
  if (spec.kind == FieldKind::ma_field) {
    for (const auto& a : spec.stencil)
      for (const auto& b : spec.stencil)
        for (std::size_t l = 0; l < a.offset.size(); ++l)
          truncation = std::max(truncation, std::abs(a.offset[l] - b.offset[l]));
  } else if (spec.kind == FieldKind::exp_gaussian_spectral) {
    truncation = std::max(60, static_cast<int>(std::ceil(60.0 * spec.range)));
  }
  const double eta = theoretical_eta(spec, d, truncation);
  const double sigma2 = kernel.l2_moment();
  const double rate = std::pow(static_cast<double>(n) * h, 0.5 * d);
  const double scale = std::sqrt(sigma2 * eta);

  // one field per replicate, z for each query; replicates are independent
  std::vector<double> z(static_cast<std::size_t>(replicates) * q_count);
  parallel_for(static_cast<std::uint64_t>(replicates), threads,
               [&](std::uint64_t begin, std::uint64_t end) {
                 std::vector<double> x(static_cast<std::size_t>(d));
                 for (std::uint64_t rep = begin; rep < end; ++rep) {
                   FieldSpec rep_spec = spec;
                   rep_spec.seed = CounterRng::derive(spec.seed, rep);
                   const Field eps = simulate(rep_spec, lat, 1);
                   for (std::size_t q = 0; q < q_count; ++q) {
                     double num = 0.0;
                     for (const auto& e : weights[q]) {
                       lat.design_point(e.index, x.data());
                       num += (g(x) + eps.values[e.index]) * e.weight;
                     }
                     const double gn = num / weight_sum[q];
                     z[rep * q_count + q] = rate * (gn - expected[q]) / scale;
                   }
                 }
               });

  NormalityReport report;
  report.queries = queries;
  report.sigma2 = sigma2;
  report.eta = eta;
  report.replicates = replicates;
  report.ks_alpha = ks_alpha;
  report.ks_critical_value = ks_critical(ks_alpha, static_cast<std::size_t>(replicates));
  report.mean.resize(q_count);
  report.variance.resize(q_count);
  report.ks_distance.resize(q_count);
  for (std::size_t q = 0; q < q_count; ++q) {
    std::vector<double> sample(static_cast<std::size_t>(replicates));
    double mean = 0.0;
    for (int rep = 0; rep < replicates; ++rep) {
      sample[static_cast<std::size_t>(rep)] = z[static_cast<std::size_t>(rep) * q_count + q];
      mean += sample[static_cast<std::size_t>(rep)];
    }
    mean /= replicates;
    double var = 0.0;
    for (double v : sample) var += (v - mean) * (v - mean);
    var /= (replicates - 1);
    report.mean[q] = mean;
    report.variance[q] = var;
    report.ks_distance[q] = ks_statistic(sample);
  }
  report.correlation.assign(q_count, std::vector<double>(q_count, 0.0));
  for (std::size_t a = 0; a < q_count; ++a) {
    for (std::size_t b = 0; b < q_count; ++b) {
      double cov = 0.0;
      for (int rep = 0; rep < replicates; ++rep)
        cov += (z[static_cast<std::size_t>(rep) * q_count + a] - report.mean[a]) *
               (z[static_cast<std::size_t>(rep) * q_count + b] - report.mean[b]);
      cov /= (replicates - 1);
      report.correlation[a][b] = cov / std::sqrt(report.variance[a] * report.variance[b]);
      if (a != b)
        report.max_offdiag_correlation =
            std::max(report.max_offdiag_correlation, std::fabs(report.correlation[a][b]));
    }
  }
  return report;
}

std::string NormalityReport::to_string() const {
  std::ostringstream os;
  char buf[256];
  os << "query,mean,variance,ks_distance,ks_critical\n";
  for (std::size_t q = 0; q < queries.size(); ++q) {
    os << "(";
    for (std::size_t l = 0; l < queries[q].size(); ++l) {
      if (l) os << " ";
      os << queries[q][l];
    }
    std::snprintf(buf, sizeof buf, "),%.6g,%.6g,%.6g,%.6g\n", mean[q], variance[q], ks_distance[q],
                  ks_critical_value);
    os << buf;
  }
  std::snprintf(buf, sizeof buf,
                "replicates %d  sigma^2 %.6g  eta %.6g  max |off-diagonal correlation| %.4g\n",
                replicates, sigma2, eta, max_offdiag_correlation);
  os << buf;
  return os.str();
}

void write_pvalue_map_csv(const PValueMap& map, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open for writing: " + path);
  for (int l = 1; l <= map.d; ++l) out << "i_" << l << ",";
  out << "z,p,boundary\n";
  Lattice lat(map.n, map.d);
  std::vector<int> coords(static_cast<std::size_t>(map.d));
  char buf[96];
  for (std::uint64_t k = 0; k < lat.size(); ++k) {
    lat.delinearize(k, coords.data());
    for (int l = 0; l < map.d; ++l) out << coords[static_cast<std::size_t>(l)] << ",";
    std::snprintf(buf, sizeof buf, "%.17g,%.17g,%d\n", map.stats[k].z, map.stats[k].p,
                  map.stats[k].boundary ? 1 : 0);
    out << buf;
  }
  if (!out) throw IoError("write failed: " + path);
}

}  // namespace fieldreg
