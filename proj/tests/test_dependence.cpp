#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <fstream>

#include "fieldreg/dependence.hpp"
#include "fieldreg/errors.hpp"
#include "fieldreg/inference.hpp"
#include "fieldreg/quadrature.hpp"
#include "support/oracles.hpp"

using namespace fieldreg;

TEST_CASE("residual extraction") {
  const Lattice lat(16, 1);
  std::vector<double> y(lat.size(), 5.0);
  GridEstimate fit;
  fit.n = 16;
  fit.d = 1;
  fit.bandwidth = 0.2;
  fit.values.assign(lat.size(), 5.0);
  fit.weight_sums.assign(lat.size(), 1.0);
  const Field eps = residuals(y, fit, lat);
  for (double v : eps.values) CHECK(v == 0.0);

  // Y = eps with a zero fit supplied: residuals reproduce eps
  const Field noise = simulate(FieldSpec::iid(1.0, 3), lat, 1);
  fit.values.assign(lat.size(), 0.0);
  const Field back = residuals(noise.values, fit, lat);
  for (std::uint64_t k = 0; k < lat.size(); ++k) CHECK(back.values[k] == noise.values[k]);

  std::vector<double> bad(lat.size() - 1, 0.0);
  CHECK_THROWS_AS(residuals(bad, fit, lat), ValidationError);
}

TEST_CASE("default rho is the integer fourth root") {
  CHECK(default_rho(16, 1) == 2);
  CHECK(default_rho(256, 2) == 4);
  CHECK(default_rho(10000, 1) == 10);
  CHECK(default_rho(4096, 1) == 8);
  CHECK(default_rho(2, 1) == 1);
  CHECK_THROWS_AS(default_rho(1, 1), ValidationError);
}

TEST_CASE("eta estimate: forced clamp on the zero field") {
  const Lattice lat(10, 1);
  Field zero{lat, std::vector<double>(lat.size(), 0.0), FieldSpec{}};
  const EtaEstimate eta = estimate_eta(zero, 2);
  CHECK(eta.raw_sum == 0.0);
  CHECK(eta.value == 0.1);  // max(1, 0)/n^d
}

TEST_CASE("eta estimate: constant field pair count") {
  const Lattice lat(10, 1);
  Field ones{lat, std::vector<double>(lat.size(), 1.0), FieldSpec{}};
  const EtaEstimate eta = estimate_eta(ones, 1);
  CHECK(eta.raw_sum == 28.0);  // 10 diagonal + 2*9 neighbours
  CHECK(eta.pair_count == 28);
  CHECK(eta.value == doctest::Approx(2.8).epsilon(1e-15));
  CHECK_THROWS_AS(estimate_eta(ones, 10), ValidationError);  // rho must be < n
}

TEST_CASE("eta estimate equals brute-force pair enumeration (n <= 20)") {
  for (int d = 1; d <= 2; ++d) {
    for (int n : {7, 12, 20}) {
      const Lattice lat(n, d);
      const Field f = simulate(FieldSpec::iid(1.0, static_cast<std::uint64_t>(n + d)), lat, 1);
      for (int rho : {0, 1, 3}) {
        std::uint64_t pairs = 0;
        const double raw = oracle::brute_eta_raw(f.values, lat, rho, &pairs);
        const EtaEstimate eta = estimate_eta(f, rho, 2);
        CHECK(eta.pair_count == pairs);
        CHECK(eta.raw_sum == doctest::Approx(raw).epsilon(1e-12));
      }
    }
  }
}

TEST_CASE("eta raw sum is quadratic in the field scale") {
  const Lattice lat(50, 1);
  const Field f = simulate(FieldSpec::iid(1.0, 4), lat, 1);
  Field scaled = f;
  for (auto& v : scaled.values) v *= 3.0;
  const double raw = estimate_eta(f, 3).raw_sum;
  const double raw_scaled = estimate_eta(scaled, 3).raw_sum;
  CHECK(raw_scaled == doctest::Approx(9.0 * raw).epsilon(1e-12));
}

TEST_CASE("eta is consistent for the ma field (Monte Carlo)") {
  // per-seed noise of eta-hat at n=512 is ~10-20% relative even at the
  // smallest window covering the stencil, so the aggregate is what converges
  const Lattice lat(512, 1);
  const FieldSpec base = FieldSpec::ma({{{0}, 1.0}, {{1}, 0.5}}, 0);
  const double truth = theoretical_eta(base, 1, 1);
  const int rho = 1;  // stencil diameter
  int within25 = 0;
  double mean = 0.0;
  const int seeds = 100;
  for (int s = 0; s < seeds; ++s) {
    FieldSpec spec = base;
    spec.seed = 3000 + static_cast<std::uint64_t>(s);
    const Field f = simulate(spec, lat, 1);
    const EtaEstimate eta = estimate_eta(f, rho);
    mean += eta.value;
    if (std::fabs(eta.value - truth) / truth <= 0.25) ++within25;
  }
  mean /= seeds;
  CHECK(std::fabs(mean - truth) / truth <= 0.10);
  CHECK(within25 >= 90);
}

TEST_CASE("eta on iid d=2 concentrates near 1") {
  const Lattice lat(256, 2);
  int within = 0;
  const int seeds = 20;
  for (int s = 0; s < seeds; ++s) {
    const Field f = simulate(FieldSpec::iid(1.0, 500 + static_cast<std::uint64_t>(s)), lat, 0);
    const EtaEstimate eta = estimate_eta(f, 4, 0);
    if (eta.value >= 0.9 && eta.value <= 1.1) ++within;
  }
  CHECK(within >= 18);  // >= 90% of seeds
}

TEST_CASE("gaussian quantile integrates to the second moment") {
  // integral over (0,1) of Q^2 equals E eps^2 = 1 for the standard normal
  const auto q = gaussian_abs_quantile();
  const double total = integrate_to_singular_origin([&](double u) { return q(u) * q(u); }, 1.0, 1e-9);
  CHECK(total == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("quantile condition: m-dependent alpha converges") {
  const auto rep = check_quantile_condition(alpha_m_dependent(2), gaussian_abs_quantile(), 2, 200);
  CHECK(rep.verdict == ConditionReport::Verdict::converges);
  CHECK(rep.tail_bound == 0.0);
  // partial sums flat beyond radius 1
  CHECK(rep.partial_sums.back() == doctest::Approx(rep.partial_sums[2]).epsilon(1e-14));
}

TEST_CASE("quantile condition: exponential alpha converges") {
  const auto rep = check_quantile_condition(alpha_exponential(1.0), gaussian_abs_quantile(), 2, 200);
  CHECK(rep.verdict == ConditionReport::Verdict::converges);
  CHECK(rep.alpha_clamped);  // e^{-0}, e^{-1} exceed 1/4
  for (std::size_t t = 1; t < rep.partial_sums.size(); ++t)
    CHECK(rep.partial_sums[t] >= rep.partial_sums[t - 1]);
}

TEST_CASE("quantile condition: alpha ~ r^-d with bounded noise does not converge") {
  const auto rep = check_quantile_condition(alpha_power(2.0), bounded_abs_quantile(1.0), 2, 2000);
  CHECK(rep.verdict != ConditionReport::Verdict::converges);
}

TEST_CASE("quantile condition rejects non-monotone alpha") {
  auto alpha = [](int r) { return r == 3 ? 0.2 : 0.1; };
  CHECK_THROWS_AS(check_quantile_condition(alpha, gaussian_abs_quantile(), 1, 10),
                  ValidationError);
}

TEST_CASE("mixing rate condition: single-term and geometric cases") {
  const auto rep1 = check_mixing_rate_condition(alpha_m_dependent(2), 2.0, 2, 500);
  CHECK(rep1.verdict == ConditionReport::Verdict::converges);
  // only m=1 contributes
  CHECK(rep1.partial_sums.back() == doctest::Approx(std::sqrt(0.25)).epsilon(1e-12));

  const auto rep2 = check_mixing_rate_condition(alpha_exponential(1.0), 1.0, 3, 500);
  CHECK(rep2.verdict == ConditionReport::Verdict::converges);
}

TEST_CASE("mixing rate condition flips at the p-series boundary (d=2, delta=2)") {
  const auto conv = check_mixing_rate_condition(alpha_power(5.0), 2.0, 2, 4000);
  CHECK(conv.verdict == ConditionReport::Verdict::converges);
  const auto div = check_mixing_rate_condition(alpha_power(3.5), 2.0, 2, 4000);
  CHECK(div.verdict != ConditionReport::Verdict::converges);
}

TEST_CASE("alpha and quantile table files") {
  const std::string apath = "alpha_table_test.txt";
  {
    std::ofstream out(apath);
    out << "0 0.25\n1 0.1\n5 0.01\n";
  }
  const auto alpha = alpha_from_table_file(apath);
  CHECK(alpha(0) == 0.25);
  CHECK(alpha(1) == 0.1);
  CHECK(alpha(3) == 0.1);  // step function holds the last value
  CHECK(alpha(7) == 0.01);
  std::remove(apath.c_str());

  const std::string qpath = "quantile_table_test.txt";
  {
    std::ofstream out(qpath);
    out << "0.0 2.0\n0.5 1.0\n1.0 0.0\n";
  }
  const auto q = quantile_from_table_file(qpath);
  CHECK(q(0.25) == doctest::Approx(1.5).epsilon(1e-12));
  CHECK(q(0.75) == doctest::Approx(0.5).epsilon(1e-12));
  std::remove(qpath.c_str());
}
