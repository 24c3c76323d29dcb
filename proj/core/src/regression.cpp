#include "fieldreg/regression.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

#include "fieldreg/errors.hpp"
#include "fieldreg/parallel.hpp"

namespace fieldreg {

namespace {

constexpr int kMaxDim = 16;

struct Window {
  int lo[kMaxDim];
  int hi[kMaxDim];
  bool empty;
};

/// Index window covering the kernel support around x, widened by one index
/// per side so that support membership is decided by the kernel itself in
/// the same floating-point terms as a full-lattice loop.
Window support_window(const Lattice& lat, double h, const double* x) {
  Window w;
  w.empty = false;
  const int n = lat.n();
  for (int l = 0; l < lat.d(); ++l) {
    const double lo_real = static_cast<double>(n) * (x[l] - h);
    const double hi_real = static_cast<double>(n) * (x[l] + h);
    // clamp in double first: n*(x+h) may not fit in int
    const int lo = lo_real <= 1.0 ? 1 : static_cast<int>(std::floor(lo_real));
    const int hi = hi_real >= static_cast<double>(n) ? n : static_cast<int>(std::ceil(hi_real));
    if (lo > hi) w.empty = true;
    w.lo[l] = lo;
    w.hi[l] = hi;
  }
  return w;
}

/// Iterates the window in lexicographic order, calling f(linear_index, weight)
/// for every evaluated point (weight may be 0 at the widened edges).
template <typename F>
void for_each_weight(const Lattice& lat, const Kernel& kernel, double h, const double* x, F&& f) {
  const Window w = support_window(lat, h, x);
  if (w.empty) return;
  const int d = lat.d();
  const int n = lat.n();
  const double nd = static_cast<double>(n);

  int idx[kMaxDim];
  double u[kMaxDim];
  std::uint64_t linear = 0;
  for (int l = 0; l < d; ++l) {
    idx[l] = w.lo[l];
    linear = linear * static_cast<std::uint64_t>(n) + static_cast<std::uint64_t>(w.lo[l] - 1);
  }
  // strides for updating the linear index on odometer steps
  std::uint64_t stride[kMaxDim];
  stride[d - 1] = 1;
  for (int l = d - 2; l >= 0; --l) stride[l] = stride[l + 1] * static_cast<std::uint64_t>(n);

  while (true) {
    for (int l = 0; l < d; ++l) u[l] = (x[l] - static_cast<double>(idx[l]) / nd) / h;
    f(linear, kernel.evaluate(u));
    int l = d - 1;
    while (l >= 0 && idx[l] == w.hi[l]) {
      linear -= stride[l] * static_cast<std::uint64_t>(w.hi[l] - w.lo[l]);
      idx[l] = w.lo[l];
      --l;
    }
    if (l < 0) break;
    ++idx[l];
    linear += stride[l];
  }
}

bool near_boundary(const double* x, int d, double h) {
  for (int l = 0; l < d; ++l)
    if (std::min(x[l], 1.0 - x[l]) < h) return true;
  return false;
}

void check_query(const Lattice& lat, const Kernel& kernel, double h,
                 const std::vector<double>& x) {
  if (lat.d() > kMaxDim)
    throw ValidationError("estimate: dimension exceeds the supported maximum of 16");
  if (static_cast<int>(x.size()) != lat.d())
    throw ValidationError("estimate: query dimension mismatch");
  if (kernel.dim() != lat.d()) throw ValidationError("estimate: kernel dimension mismatch");
  if (!(h > 0)) throw ValidationError("estimate: bandwidth must be > 0");
  for (double c : x)
    if (c < 0.0 || c > 1.0) throw ValidationError("estimate: query must lie in [0,1]^d");
}

std::string format_point(const std::vector<double>& x) {
  std::ostringstream os;
  os << "(";
  for (std::size_t l = 0; l < x.size(); ++l) {
    if (l) os << ",";
    os << x[l];
  }
  os << ")";
  return os.str();
}

}  // namespace

BandwidthRule BandwidthRule::fixed(double h) {
  if (!(h > 0)) throw ValidationError("bandwidth rule: fixed h must be > 0");
  BandwidthRule r;
  r.form = Form::fixed;
  r.fixed_h = h;
  return r;
}

BandwidthRule BandwidthRule::power_law(double c, double gamma) {
  if (!(c > 0)) throw ValidationError("bandwidth rule: c must be > 0");
  if (!(gamma > 0 && gamma < 1))
    throw ValidationError("bandwidth rule: gamma must lie in (0,1) so that h->0 and nh->inf");
  BandwidthRule r;
  r.form = Form::power_law;
  r.c = c;
  r.gamma = gamma;
  return r;
}

double BandwidthRule::bandwidth(int n) const {
  if (n < 1) throw ValidationError("bandwidth rule: n must be >= 1");
  if (form == Form::fixed) return fixed_h;
  return c * std::pow(static_cast<double>(n), -gamma);
}

bool BandwidthRule::clt_valid(int d) const {
  if (form == Form::fixed) return false;
  return gamma > 0 && gamma < 1.0 / (d + 1);
}

void BandwidthRule::require_clt_valid(int d) const {
  if (!clt_valid(d)) {
    std::ostringstream os;
    os << "bandwidth rule " << describe() << " violates the CLT requirement n*h^(d+1) -> infinity: "
       << "need a power law with gamma in (0, 1/(d+1)) = (0, " << 1.0 / (d + 1) << ") for d = " << d;
    throw ValidationError(os.str());
  }
}

std::string BandwidthRule::describe() const {
  std::ostringstream os;
  if (form == Form::fixed)
    os << "fixed(h=" << fixed_h << ")";
  else
    os << "power-law(c=" << c << ",gamma=" << gamma << ")";
  return os.str();
}

std::vector<WeightEntry> kernel_weights(const Lattice& lat, const Kernel& kernel, double h,
                                        const std::vector<double>& x) {
  check_query(lat, kernel, h, x);
  std::vector<WeightEntry> entries;
  for_each_weight(lat, kernel, h, x.data(), [&](std::uint64_t linear, double w) {
    if (w != 0.0) entries.push_back({linear, w});
  });
  return entries;
}

Estimate estimate(std::span<const double> y, const Lattice& lat, const Kernel& kernel, double h,
                  const std::vector<std::vector<double>>& queries) {
  if (y.size() != lat.size())
    throw ValidationError("estimate: observation count must equal n^d");
  Estimate est;
  est.n = lat.n();
  est.d = lat.d();
  est.bandwidth = h;
  est.queries = queries;
  est.values.resize(queries.size());
  est.weight_sums.resize(queries.size());
  est.boundary.resize(queries.size());
  for (std::size_t q = 0; q < queries.size(); ++q) {
    const auto& x = queries[q];
    check_query(lat, kernel, h, x);
    double num = 0.0, den = 0.0;
    for_each_weight(lat, kernel, h, x.data(), [&](std::uint64_t linear, double w) {
      num += y[linear] * w;
      den += w;
    });
    if (den <= 0.0)
      throw ValidationError("estimate: zero weight sum at query " + format_point(x) +
                            " (bandwidth too small for this location)");
    est.values[q] = num / den;
    est.weight_sums[q] = den;
    est.boundary[q] = near_boundary(x.data(), lat.d(), h);
  }
  return est;
}

GridEstimate estimate_grid(std::span<const double> y, const Lattice& lat, const Kernel& kernel,
                           double h, int threads) {
  if (y.size() != lat.size())
    throw ValidationError("estimate_grid: observation count must equal n^d");
  if (lat.d() > kMaxDim)
    throw ValidationError("estimate_grid: dimension exceeds the supported maximum of 16");
  if (kernel.dim() != lat.d()) throw ValidationError("estimate_grid: kernel dimension mismatch");
  if (!(h > 0)) throw ValidationError("estimate_grid: bandwidth must be > 0");
  GridEstimate grid;
  grid.n = lat.n();
  grid.d = lat.d();
  grid.bandwidth = h;
  grid.values.resize(lat.size());
  grid.weight_sums.resize(lat.size());

  std::atomic<bool> zero_weight{false};
  parallel_for(lat.size(), threads, [&](std::uint64_t begin, std::uint64_t end) {
    double x[kMaxDim];
    for (std::uint64_t k = begin; k < end; ++k) {
      lat.design_point(k, x);
      double num = 0.0, den = 0.0;
      for_each_weight(lat, kernel, h, x, [&](std::uint64_t linear, double w) {
        num += y[linear] * w;
        den += w;
      });
      if (den <= 0.0) {
        zero_weight.store(true);
        grid.values[k] = std::numeric_limits<double>::quiet_NaN();
        grid.weight_sums[k] = 0.0;
      } else {
        grid.values[k] = num / den;
        grid.weight_sums[k] = den;
      }
    }
  });
  if (zero_weight.load())
    throw ValidationError("estimate_grid: zero weight sum at a design point "
                          "(bandwidth below the lattice spacing)");
  return grid;
}

RiemannDiagnostic riemann_diagnostic(const Lattice& lat, const Kernel& kernel, double h,
                                     const std::vector<double>& x, const std::vector<double>& y) {
  check_query(lat, kernel, h, x);
  check_query(lat, kernel, h, y);
  const double scale = std::pow(static_cast<double>(lat.n()) * h, -lat.d());
  double mass = 0.0, cross = 0.0;
  std::vector<double> u(y.size());
  const double nd = static_cast<double>(lat.n());
  std::vector<int> coords(static_cast<std::size_t>(lat.d()));
  for_each_weight(lat, kernel, h, x.data(), [&](std::uint64_t linear, double wx) {
    mass += wx;
    if (wx != 0.0) {
      lat.delinearize(linear, coords.data());
      for (std::size_t l = 0; l < u.size(); ++l)
        u[l] = (y[l] - static_cast<double>(coords[l]) / nd) / h;
      cross += wx * kernel.evaluate(u.data());
    }
  });
  RiemannDiagnostic diag;
  diag.mass = scale * mass;
  diag.cross = scale * cross;
  diag.x_boundary = near_boundary(x.data(), lat.d(), h);
  diag.y_boundary = near_boundary(y.data(), lat.d(), h);
  return diag;
}

SCoefficientReport s_coefficients(const Lattice& lat, const Kernel& kernel, double h,
                                  const std::vector<double>& x, const std::vector<double>& y,
                                  double lambda1, double lambda2) {
  if (std::fabs(lambda1 * lambda1 + lambda2 * lambda2 - 1.0) > 1e-9)
    throw ValidationError("s_coefficients: lambda1^2 + lambda2^2 must equal 1");
  if (x == y) throw ValidationError("s_coefficients: x and y must be distinct");
  const auto wx = kernel_weights(lat, kernel, h, x);
  const auto wy = kernel_weights(lat, kernel, h, y);

  auto sums = [](const std::vector<WeightEntry>& w) {
    double s = 0.0, s2 = 0.0;
    for (const auto& e : w) {
      s += e.weight;
      s2 += e.weight * e.weight;
    }
    return std::pair{s, s2};
  };
  const auto [sx, sx2] = sums(wx);
  const auto [sy, sy2] = sums(wy);
  if (sx <= 0.0 || sy <= 0.0)
    throw ValidationError("s_coefficients: zero weight sum at a query point");

  const double nhd = std::pow(static_cast<double>(lat.n()) * h, lat.d());
  const double vx = std::sqrt(nhd / sx) * std::sqrt(sx2 / sx);
  const double vy = std::sqrt(nhd / sy) * std::sqrt(sy2 / sy);
  const double sigma = std::sqrt(kernel.l2_moment());

  // merge the two sparse windows: s~_i = (l1 v(x) b_i(x) + l2 v(y) b_i(y)) / sigma
  SCoefficientReport rep;
  rep.coefficients.reserve(wx.size() + wy.size());
  const double cx = lambda1 * vx / (std::sqrt(sx2) * sigma);
  const double cy = lambda2 * vy / (std::sqrt(sy2) * sigma);
  std::size_t ix = 0, iy = 0;
  while (ix < wx.size() || iy < wy.size()) {
    std::uint64_t index;
    double value = 0.0;
    if (iy >= wy.size() || (ix < wx.size() && wx[ix].index < wy[iy].index)) {
      index = wx[ix].index;
      value = cx * wx[ix].weight;
      ++ix;
    } else if (ix >= wx.size() || wy[iy].index < wx[ix].index) {
      index = wy[iy].index;
      value = cy * wy[iy].weight;
      ++iy;
    } else {
      index = wx[ix].index;
      value = cx * wx[ix].weight + cy * wy[iy].weight;
      ++ix;
      ++iy;
    }
    rep.coefficients.push_back({index, value});
  }
  double sum_sq = 0.0, sup = 0.0, sum_abs = 0.0;
  for (const auto& e : rep.coefficients) {
    sum_sq += e.weight * e.weight;
    sup = std::max(sup, std::fabs(e.weight));
    sum_abs += std::fabs(e.weight);
  }
  rep.sum_sq = sum_sq;
  rep.sup_scaled = sup * std::sqrt(nhd);
  rep.sum_abs_scaled = sum_abs / std::sqrt(nhd);
  return rep;
}

BiasStudy bias_study(const ScalarField& g, const Kernel& kernel,
                     const std::vector<std::pair<int, double>>& configs, int queries_per_axis) {
  if (queries_per_axis < 1) throw ValidationError("bias_study: queries_per_axis must be >= 1");
  const int d = kernel.dim();
  BiasStudy study;
  for (const auto& [n, h] : configs) {
    Lattice lat(n, d);
    std::vector<double> gy(lat.size());
    std::vector<double> x(static_cast<std::size_t>(d));
    std::vector<double> xv(static_cast<std::size_t>(d));
    for (std::uint64_t k = 0; k < lat.size(); ++k) {
      lat.design_point(k, xv.data());
      gy[k] = g(xv);
    }
    // interior query grid in [h, 1-h]^d
    const double lo = std::min(h, 0.5);
    const double hi = 1.0 - lo;
    std::vector<std::vector<double>> queries;
    std::vector<int> step(static_cast<std::size_t>(d), 0);
    const int q = hi > lo ? queries_per_axis : 1;
    while (true) {
      std::vector<double> point(static_cast<std::size_t>(d));
      for (int l = 0; l < d; ++l)
        point[static_cast<std::size_t>(l)] =
            q == 1 ? 0.5 : lo + (hi - lo) * step[static_cast<std::size_t>(l)] / (q - 1);
      queries.push_back(std::move(point));
      int l = d - 1;
      while (l >= 0 && step[static_cast<std::size_t>(l)] == q - 1) {
        step[static_cast<std::size_t>(l)] = 0;
        --l;
      }
      if (l < 0) break;
      ++step[static_cast<std::size_t>(l)];
    }
    const Estimate expected = estimate(gy, lat, kernel, h, queries);  // exact E g_n
    double sup = 0.0;
    for (std::size_t i = 0; i < queries.size(); ++i)
      sup = std::max(sup, std::fabs(expected.values[i] - g(queries[i])));
    study.rows.push_back({n, h, sup});
  }
  // log-log fit of sup_error against h over rows with positive error
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  int m = 0;
  for (const auto& row : study.rows) {
    if (row.sup_error <= 0.0) continue;
    const double lx = std::log(row.h);
    const double ly = std::log(row.sup_error);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
    ++m;
  }
  const double denom = m * sxx - sx * sx;
  study.slope_vs_h = (m >= 2 && std::fabs(denom) > 1e-12) ? (m * sxy - sx * sy) / denom
                                                          : std::numeric_limits<double>::quiet_NaN();
  return study;
}

BiasStudy bias_study(const ScalarField& g, const Kernel& kernel, const BandwidthRule& rule,
                     const std::vector<int>& n_list, int queries_per_axis) {
  std::vector<std::pair<int, double>> configs;
  configs.reserve(n_list.size());
  for (int n : n_list) configs.emplace_back(n, rule.bandwidth(n));
  return bias_study(g, kernel, configs, queries_per_axis);
}

std::string BiasStudy::to_string() const {
  std::ostringstream os;
  os << "n,h,sup_error\n";
  char buf[128];
  for (const auto& row : rows) {
    std::snprintf(buf, sizeof buf, "%d,%.17g,%.17g\n", row.n, row.h, row.sup_error);
    os << buf;
  }
  std::snprintf(buf, sizeof buf, "log-log slope vs h: %.6g\n", slope_vs_h);
  os << buf;
  return os.str();
}

void write_estimate_csv(const Estimate& est, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open for writing: " + path);
  for (int l = 1; l <= est.d; ++l) out << "x_" << l << ",";
  out << "value,weight_sum,boundary_flag\n";
  char buf[64];
  for (std::size_t q = 0; q < est.queries.size(); ++q) {
    for (int l = 0; l < est.d; ++l) {
      std::snprintf(buf, sizeof buf, "%.17g", est.queries[q][static_cast<std::size_t>(l)]);
      out << buf << ",";
    }
    std::snprintf(buf, sizeof buf, "%.17g", est.values[q]);
    out << buf << ",";
    std::snprintf(buf, sizeof buf, "%.17g", est.weight_sums[q]);
    out << buf << "," << (est.boundary[q] ? 1 : 0) << "\n";
  }
  if (!out) throw IoError("write failed: " + path);
}

}  // namespace fieldreg
