#include "fieldreg/dependence.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

#include "fieldreg/errors.hpp"
#include "fieldreg/inference.hpp"
#include "fieldreg/parallel.hpp"
#include "fieldreg/quadrature.hpp"

namespace fieldreg {

Field residuals(std::span<const double> y, const GridEstimate& fitted, const Lattice& lat) {
  if (y.size() != lat.size() || fitted.values.size() != lat.size())
    throw ValidationError("residuals: size mismatch between observations, fit, and lattice");
  Field eps{lat, std::vector<double>(lat.size()), FieldSpec{}};
  eps.spec.kind = FieldKind::external;
  for (std::uint64_t k = 0; k < lat.size(); ++k) eps.values[k] = y[k] - fitted.values[k];
  return eps;
}

int default_rho(int n, int /*d*/) {
  if (n < 2) throw ValidationError("default_rho: n must be >= 2");
  int r = static_cast<int>(std::floor(std::pow(static_cast<double>(n), 0.25)));
  auto fourth = [](long long v) { return v * v * v * v; };
  while (fourth(r + 1) <= n) ++r;  // guard against pow() landing just below an integer
  while (r > 1 && fourth(r) > n) --r;
  return std::max(1, r);
}

EtaEstimate estimate_eta(const Field& eps, int rho, int threads) {
  const Lattice& lat = eps.lattice;
  const int d = lat.d();
  const int n = lat.n();
  if (rho < 0) throw ValidationError("estimate_eta: rho must be >= 0");
  if (rho >= n) throw ValidationError("estimate_eta: rho must be < n");

  // enumerate lags in lexicographic order; linear offset of a lag is constant
  std::vector<std::vector<int>> lags;
  {
    std::vector<int> k(static_cast<std::size_t>(d), -rho);
    while (true) {
      lags.push_back(k);
      int l = d - 1;
      while (l >= 0 && k[static_cast<std::size_t>(l)] == rho) {
        k[static_cast<std::size_t>(l)] = -rho;
        --l;
      }
      if (l < 0) break;
      ++k[static_cast<std::size_t>(l)];
    }
  }

  std::vector<double> lag_sums(lags.size(), 0.0);
  std::vector<std::uint64_t> lag_counts(lags.size(), 0);
  const double* v = eps.values.data();

  parallel_for(lags.size(), threads, [&](std::uint64_t begin, std::uint64_t end) {
    for (std::uint64_t li = begin; li < end; ++li) {
      const auto& lag = lags[li];
      std::int64_t offset = 0;
      std::uint64_t count = 1;
      std::vector<int> lo(static_cast<std::size_t>(d)), hi(static_cast<std::size_t>(d));
      for (int l = 0; l < d; ++l) {
        lo[static_cast<std::size_t>(l)] = std::max(1, 1 - lag[static_cast<std::size_t>(l)]);
        hi[static_cast<std::size_t>(l)] = std::min(n, n - lag[static_cast<std::size_t>(l)]);
        count *= static_cast<std::uint64_t>(hi[static_cast<std::size_t>(l)] -
                                            lo[static_cast<std::size_t>(l)] + 1);
      }
      for (int l = d - 1, stride = 1; l >= 0; --l, stride *= n)
        offset += static_cast<std::int64_t>(lag[static_cast<std::size_t>(l)]) * stride;

      // iterate rows (all axes but the last), contiguous run along the last axis
      double sum = 0.0;
      std::vector<int> row(lo);
      const int run = hi[static_cast<std::size_t>(d - 1)] - lo[static_cast<std::size_t>(d - 1)] + 1;
      while (true) {
        const std::uint64_t base = lat.linearize(row);
        const double* p = v + base;
        const double* q = v + (static_cast<std::int64_t>(base) + offset);
        for (int t = 0; t < run; ++t) sum += p[t] * q[t];
        int l = d - 2;
        while (l >= 0 && row[static_cast<std::size_t>(l)] == hi[static_cast<std::size_t>(l)]) {
          row[static_cast<std::size_t>(l)] = lo[static_cast<std::size_t>(l)];
          --l;
        }
        if (l < 0) break;
        ++row[static_cast<std::size_t>(l)];
      }
      lag_sums[li] = sum;
      lag_counts[li] = count;
    }
  });

  EtaEstimate est;
  est.rho = rho;
  for (std::size_t li = 0; li < lags.size(); ++li) {
    est.raw_sum += lag_sums[li];  // fixed lag order keeps the reduction deterministic
    est.pair_count += lag_counts[li];
  }
  est.value = std::max(1.0, est.raw_sum) / static_cast<double>(lat.size());
  return est;
}

namespace {

std::uint64_t shell_count(int r, int d) {
  if (r == 0) return 1;
  auto ball = [d](long long radius) {
    std::uint64_t c = 1;
    for (int l = 0; l < d; ++l) c *= static_cast<std::uint64_t>(2 * radius + 1);
    return c;
  };
  return ball(r) - ball(r - 1);
}

ConditionReport assemble_report(std::vector<double> terms, int first_radius) {
  ConditionReport rep;
  rep.first_radius = first_radius;
  rep.shell_terms = std::move(terms);
  rep.partial_sums.resize(rep.shell_terms.size());
  double acc = 0.0;
  for (std::size_t t = 0; t < rep.shell_terms.size(); ++t) {
    if (rep.shell_terms[t] < 0)
      throw ValidationError("condition checker: negative shell term (bad alpha or quantile)");
    acc += rep.shell_terms[t];
    rep.partial_sums[t] = acc;
  }

  const int max_radius = first_radius + static_cast<int>(rep.shell_terms.size()) - 1;
  auto window_sum = [&](int lo, int hi) {  // radii in (lo, hi]
    double s = 0.0;
    for (int r = lo + 1; r <= hi; ++r)
      if (r >= first_radius) s += rep.shell_terms[static_cast<std::size_t>(r - first_radius)];
    return s;
  };

  double recent = 0.0, previous = 0.0;
  if (max_radius >= 100) {
    recent = window_sum(max_radius / 10, max_radius);
    previous = window_sum(max_radius / 100, max_radius / 10);
  } else if (max_radius >= 8) {
    recent = window_sum(max_radius / 2, max_radius);
    previous = window_sum(max_radius / 4, max_radius / 2);
  } else {
    // too few shells for the window heuristic
    if (!rep.shell_terms.empty() && rep.shell_terms.back() == 0.0) {
      rep.verdict = ConditionReport::Verdict::converges;
      rep.tail_bound = 0.0;
      rep.last_window_ratio = 0.0;
    } else {
      rep.verdict = ConditionReport::Verdict::inconclusive;
      rep.tail_bound = std::numeric_limits<double>::infinity();
      rep.last_window_ratio = std::numeric_limits<double>::quiet_NaN();
    }
    return rep;
  }

  if (recent == 0.0) {
    rep.verdict = ConditionReport::Verdict::converges;  // tail vanished identically
    rep.tail_bound = 0.0;
    rep.last_window_ratio = 0.0;
    return rep;
  }
  if (previous <= 0.0) {
    rep.verdict = ConditionReport::Verdict::inconclusive;
    rep.tail_bound = std::numeric_limits<double>::infinity();
    rep.last_window_ratio = std::numeric_limits<double>::infinity();
    return rep;
  }
  const double ratio = recent / previous;
  rep.last_window_ratio = ratio;
  if (ratio < 0.95) {
    rep.verdict = ConditionReport::Verdict::converges;
    rep.tail_bound = recent * ratio / (1.0 - ratio);
  } else if (ratio >= 1.0) {
    rep.verdict = ConditionReport::Verdict::diverges;  // at least logarithmic growth
    rep.tail_bound = std::numeric_limits<double>::infinity();
  } else {
    rep.verdict = ConditionReport::Verdict::inconclusive;
    rep.tail_bound = std::numeric_limits<double>::infinity();
  }
  return rep;
}

double clamped_alpha(double raw, double prev_raw, bool* clamped) {
  if (!std::isfinite(raw) || raw < 0)
    throw ValidationError("condition checker: alpha must be finite and >= 0");
  if (raw > prev_raw + 1e-12)
    throw ValidationError("condition checker: alpha must be nonincreasing in the radius");
  if (raw > 0.25) {
    *clamped = true;
    return 0.25;
  }
  return raw;
}

}  // namespace

ConditionReport check_quantile_condition(const std::function<double(int)>& alpha,
                                         const std::function<double(double)>& quantile, int d,
                                         int max_radius) {
  if (d < 1) throw ValidationError("check_quantile_condition: d must be >= 1");
  if (max_radius < 1) throw ValidationError("check_quantile_condition: max_radius must be >= 1");

  bool clamped = false;
  std::vector<double> terms;
  terms.reserve(static_cast<std::size_t>(max_radius) + 1);
  double prev = std::numeric_limits<double>::infinity();
  double prev_integral = -1.0;
  double prev_alpha_used = -1.0;
  for (int r = 0; r <= max_radius; ++r) {
    const double raw = alpha(r);
    const double a = clamped_alpha(raw, prev, &clamped);
    prev = raw;
    double integral;
    if (a == prev_alpha_used)
      integral = prev_integral;  // flat alpha stretches share the quadrature
    else {
      integral = a == 0.0 ? 0.0
                          : integrate_to_singular_origin(
                                [&](double u) {
                                  const double q = quantile(u);
                                  return q * q;
                                },
                                a, 1e-8);
      prev_alpha_used = a;
      prev_integral = integral;
    }
    terms.push_back(static_cast<double>(shell_count(r, d)) * integral);
  }
  ConditionReport rep = assemble_report(std::move(terms), 0);
  rep.alpha_clamped = clamped;
  return rep;
}

ConditionReport check_mixing_rate_condition(const std::function<double(int)>& alpha, double delta,
                                            int d, int max_radius) {
  if (!(delta > 0)) throw ValidationError("check_mixing_rate_condition: delta must be > 0");
  if (d < 1) throw ValidationError("check_mixing_rate_condition: d must be >= 1");
  if (max_radius < 1) throw ValidationError("check_mixing_rate_condition: max_radius must be >= 1");

  const double exponent = delta / (2.0 + delta);
  bool clamped = false;
  std::vector<double> terms;
  terms.reserve(static_cast<std::size_t>(max_radius));
  double prev = std::numeric_limits<double>::infinity();
  for (int m = 1; m <= max_radius; ++m) {
    const double raw = alpha(m);
    const double a = clamped_alpha(raw, prev, &clamped);
    prev = raw;
    terms.push_back(std::pow(static_cast<double>(m), d - 1) * std::pow(a, exponent));
  }
  ConditionReport rep = assemble_report(std::move(terms), 1);
  rep.alpha_clamped = clamped;
  return rep;
}

std::string to_string(ConditionReport::Verdict v) {
  switch (v) {
    case ConditionReport::Verdict::converges: return "converges";
    case ConditionReport::Verdict::diverges: return "diverges";
    case ConditionReport::Verdict::inconclusive: return "inconclusive";
  }
  return "?";
}

std::string ConditionReport::to_string() const {
  std::ostringstream os;
  char buf[256];
  std::snprintf(buf, sizeof buf,
                "radii %d..%d  partial sum %.10g  last-window ratio %.4g  verdict %s\n",
                first_radius, first_radius + static_cast<int>(shell_terms.size()) - 1, total(),
                last_window_ratio, fieldreg::to_string(verdict).c_str());
  os << buf;
  if (verdict == Verdict::converges) {
    std::snprintf(buf, sizeof buf, "extrapolated tail bound %.4g\n", tail_bound);
    os << buf;
  }
  if (alpha_clamped) os << "note: alpha values above 1/4 were clamped to 1/4\n";
  os << "note: a finite-radius scan cannot decide convergence; the verdict is a heuristic\n";
  return os.str();
}

std::function<double(double)> gaussian_abs_quantile() {
  return [](double u) {
    if (u <= 0.0) return std::numeric_limits<double>::infinity();
    if (u >= 1.0) return 0.0;
    // -Phi^{-1}(u/2) keeps precision where 1 - u/2 would round to 1
    return -normal_quantile(0.5 * u);
  };
}

std::function<double(double)> bounded_abs_quantile(double bound) {
  if (!(bound >= 0)) throw ValidationError("bounded_abs_quantile: bound must be >= 0");
  return [bound](double) { return bound; };
}

std::function<double(int)> alpha_exponential(double rate) {
  if (!(rate > 0)) throw ValidationError("alpha_exponential: rate must be > 0");
  return [rate](int r) { return std::exp(-rate * r); };
}

std::function<double(int)> alpha_power(double q) {
  if (!(q > 0)) throw ValidationError("alpha_power: exponent must be > 0");
  return [q](int r) { return r == 0 ? 1.0 : std::pow(static_cast<double>(r), -q); };
}

std::function<double(int)> alpha_m_dependent(int m) {
  if (m < 1) throw ValidationError("alpha_m_dependent: m must be >= 1");
  return [m](int r) { return r >= m ? 0.0 : 0.25; };
}

namespace {

std::vector<std::pair<double, double>> read_two_column(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open table file: " + path);
  std::vector<std::pair<double, double>> rows;
  double a, b;
  while (in >> a >> b) rows.emplace_back(a, b);
  if (rows.empty()) throw ValidationError("table file has no rows: " + path);
  std::sort(rows.begin(), rows.end());
  return rows;
}

}  // namespace

std::function<double(int)> alpha_from_table_file(const std::string& path) {
  auto rows = read_two_column(path);
  return [rows](int r) {
    const double x = static_cast<double>(r);
    if (x <= rows.front().first) return rows.front().second;
    for (std::size_t i = rows.size(); i > 0; --i)
      if (rows[i - 1].first <= x) return rows[i - 1].second;
    return rows.back().second;
  };
}

std::function<double(double)> quantile_from_table_file(const std::string& path) {
  auto rows = read_two_column(path);
  return [rows](double u) {
    if (u <= rows.front().first) return rows.front().second;
    if (u >= rows.back().first) return rows.back().second;
    for (std::size_t i = 1; i < rows.size(); ++i) {
      if (u <= rows[i].first) {
        const double t = (u - rows[i - 1].first) / (rows[i].first - rows[i - 1].first);
        return rows[i - 1].second + t * (rows[i].second - rows[i - 1].second);
      }
    }
    return rows.back().second;
  };
}

}  // namespace fieldreg
