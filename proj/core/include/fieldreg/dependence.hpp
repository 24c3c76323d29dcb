#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "fieldreg/field_sim.hpp"
#include "fieldreg/regression.hpp"

namespace fieldreg {

/// Residual field eps_i = Y_i - g_n(i/n).
Field residuals(std::span<const double> y, const GridEstimate& fitted, const Lattice& lat);

/// Default pairing radius floor(n^{1/4}), at least 1. Grows without bound
/// while rho^{3d} / n^d -> 0 for every d >= 1.
int default_rho(int n, int d);

struct EtaEstimate {
  double value = 0.0;      // max(1, raw_sum) / n^d
  double raw_sum = 0.0;    // sum of eps_i eps_j over ordered pairs |i-j| <= rho
  std::uint64_t pair_count = 0;
  int rho = 0;
};

/// Long-run variance estimate from ordered pairs (diagonal included) at
/// max-norm distance <= rho. Deterministic summation order.
EtaEstimate estimate_eta(const Field& eps, int rho, int threads = 0);

struct ConditionReport {
  enum class Verdict { converges, diverges, inconclusive };
  int first_radius = 0;
  std::vector<double> shell_terms;   // term at radius first_radius + t
  std::vector<double> partial_sums;  // nondecreasing
  Verdict verdict = Verdict::inconclusive;
  double tail_bound = 0.0;  // geometric extrapolation; inf when not converging
  double last_window_ratio = 0.0;
  bool alpha_clamped = false;  // alpha values above 1/4 were clamped

  double total() const { return partial_sums.empty() ? 0.0 : partial_sums.back(); }
  std::string to_string() const;
};

std::string to_string(ConditionReport::Verdict v);

/// Summability check of sum_k shell(|k|) * integral_0^{alpha(|k|)} Q^2(u) du
/// over max-norm shells of Z^d up to max_radius. A finite-radius scan cannot
/// decide convergence; the verdict is a ratio heuristic and says so.
ConditionReport check_quantile_condition(const std::function<double(int)>& alpha,
                                         const std::function<double(double)>& quantile, int d,
                                         int max_radius);

/// Summability check of sum_m m^{d-1} alpha(m)^{delta/(2+delta)}. This
/// moment-based test is more restrictive than the quantile-integral test.
ConditionReport check_mixing_rate_condition(const std::function<double(int)>& alpha, double delta,
                                            int d, int max_radius);

// Built-in ingredients for the checkers.
std::function<double(double)> gaussian_abs_quantile();       // |N(0,1)| upper quantile
std::function<double(double)> bounded_abs_quantile(double bound);
std::function<double(int)> alpha_exponential(double rate);   // e^{-rate r}, clamped to 1/4
std::function<double(int)> alpha_power(double q);            // r^{-q}, clamped to 1/4
std::function<double(int)> alpha_m_dependent(int m);         // 0 beyond radius m-1

/// Two-column plain-text tables "r value" / "u value"; step interpolation for
/// alpha (last value held), linear interpolation for quantiles.
std::function<double(int)> alpha_from_table_file(const std::string& path);
std::function<double(double)> quantile_from_table_file(const std::string& path);

}  // namespace fieldreg
