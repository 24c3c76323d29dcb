#include "fieldreg/kernel.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "fieldreg/quadrature.hpp"

namespace fieldreg {

namespace {
constexpr double kMomentTol = 1e-8;
}

std::string to_string(KernelFamily family) {
  switch (family) {
    case KernelFamily::box: return "box";
    case KernelFamily::epanechnikov_paper: return "epanechnikov-paper";
    case KernelFamily::epanechnikov_normalized: return "epanechnikov-normalized";
    case KernelFamily::triangle: return "triangle";
    case KernelFamily::custom_table: return "custom-table";
  }
  return "?";
}

std::string to_string(RadialNorm norm) {
  return norm == RadialNorm::euclidean ? "euclidean" : "max";
}

std::string Kernel::name() const { return fieldreg::to_string(family_); }

void Kernel::compute_moments() {
  std::vector<double> lo(static_cast<std::size_t>(d_), -1.0);
  std::vector<double> hi(static_cast<std::size_t>(d_), 1.0);
  mass_ = integrate_box([this](const double* u) { return evaluate(u); }, lo.data(), hi.data(), d_,
                        kMomentTol);
  l2_ = integrate_box(
      [this](const double* u) {
        const double v = evaluate(u);
        return v * v;
      },
      lo.data(), hi.data(), d_, kMomentTol);
}

Kernel Kernel::box(int d) {
  if (d < 1) throw ValidationError("kernel: d must be >= 1");
  Kernel k;
  k.family_ = KernelFamily::box;
  k.d_ = d;
  k.amplitude_ = std::pow(0.5, d);
  k.lipschitz_ = 0.0;  // constant on its closed support
  k.lower_ = k.upper_ = k.amplitude_;
  k.compute_moments();
  return k;
}

Kernel Kernel::epanechnikov_paper(int d, RadialNorm norm) {
  if (d < 1) throw ValidationError("kernel: d must be >= 1");
  Kernel k;
  k.family_ = KernelFamily::epanechnikov_paper;
  k.norm_ = norm;
  k.d_ = d;
  k.amplitude_ = 3.0 / 8.0;
  k.lipschitz_ = norm == RadialNorm::euclidean ? 2.0 * k.amplitude_ * d : 2.0 * k.amplitude_;
  k.lower_ = 0.0;
  k.upper_ = k.amplitude_;
  k.compute_moments();
  return k;
}

Kernel Kernel::epanechnikov_normalized(int d, RadialNorm norm) {
  Kernel k = epanechnikov_paper(d, norm);
  k.family_ = KernelFamily::epanechnikov_normalized;
  const double scale = 1.0 / k.mass_;
  k.amplitude_ *= scale;
  k.mass_ *= scale;
  k.l2_ *= scale * scale;
  k.lipschitz_ *= scale;
  k.upper_ *= scale;
  return k;
}

Kernel Kernel::triangle(int d) {
  if (d < 1) throw ValidationError("kernel: d must be >= 1");
  Kernel k;
  k.family_ = KernelFamily::triangle;
  k.d_ = d;
  k.amplitude_ = 1.0;
  k.lipschitz_ = static_cast<double>(d);
  k.lower_ = 0.0;
  k.upper_ = 1.0;
  k.compute_moments();
  return k;
}

Kernel Kernel::custom_table(int d, RadialNorm norm, std::vector<std::vector<double>> axis_nodes,
                            std::vector<double> values) {
  if (d < 1) throw ValidationError("kernel: d must be >= 1");
  if (static_cast<int>(axis_nodes.size()) != d)
    throw ValidationError("custom-table kernel: need one node list per axis");
  std::size_t expected = 1;
  for (const auto& nodes : axis_nodes) {
    if (nodes.size() < 2) throw ValidationError("custom-table kernel: need >= 2 nodes per axis");
    if (!std::is_sorted(nodes.begin(), nodes.end()))
      throw ValidationError("custom-table kernel: axis nodes must be sorted");
    if (std::fabs(nodes.front() + 1.0) > 1e-12 || std::fabs(nodes.back() - 1.0) > 1e-12)
      throw ValidationError("custom-table kernel: axis nodes must span [-1,1]");
    expected *= nodes.size();
  }
  if (values.size() != expected)
    throw ValidationError("custom-table kernel: value count does not match the tensor grid");

  Kernel k;
  k.family_ = KernelFamily::custom_table;
  k.norm_ = norm;
  k.d_ = d;
  k.axis_nodes_ = std::move(axis_nodes);
  k.table_ = std::move(values);
  k.lower_ = *std::min_element(k.table_.begin(), k.table_.end());
  k.upper_ = *std::max_element(k.table_.begin(), k.table_.end());

  // Lipschitz estimate: sum over axes of the steepest per-axis node slope
  double lip = 0.0;
  std::vector<std::size_t> stride(static_cast<std::size_t>(d), 1);
  for (int l = d - 2; l >= 0; --l)
    stride[static_cast<std::size_t>(l)] =
        stride[static_cast<std::size_t>(l + 1)] * k.axis_nodes_[static_cast<std::size_t>(l + 1)].size();
  for (int l = 0; l < d; ++l) {
    const auto& nodes = k.axis_nodes_[static_cast<std::size_t>(l)];
    double axis_max = 0.0;
    for (std::size_t flat = 0; flat < k.table_.size(); ++flat) {
      const std::size_t pos = (flat / stride[static_cast<std::size_t>(l)]) % nodes.size();
      if (pos + 1 < nodes.size()) {
        const double dv = k.table_[flat + stride[static_cast<std::size_t>(l)]] - k.table_[flat];
        axis_max = std::max(axis_max, std::fabs(dv) / (nodes[pos + 1] - nodes[pos]));
      }
    }
    lip += axis_max;
  }
  k.lipschitz_ = lip;
  k.compute_moments();
  return k;
}

double Kernel::table_interpolate(const double* u) const {
  // support check already done by evaluate()
  std::vector<std::size_t> cell(static_cast<std::size_t>(d_));
  std::vector<double> frac(static_cast<std::size_t>(d_));
  for (int l = 0; l < d_; ++l) {
    const auto& nodes = axis_nodes_[static_cast<std::size_t>(l)];
    auto it = std::upper_bound(nodes.begin(), nodes.end(), u[l]);
    std::size_t hi = static_cast<std::size_t>(it - nodes.begin());
    if (hi == 0) hi = 1;
    if (hi >= nodes.size()) hi = nodes.size() - 1;
    const std::size_t lo = hi - 1;
    cell[static_cast<std::size_t>(l)] = lo;
    frac[static_cast<std::size_t>(l)] = (u[l] - nodes[lo]) / (nodes[hi] - nodes[lo]);
  }
  std::vector<std::size_t> stride(static_cast<std::size_t>(d_), 1);
  for (int l = d_ - 2; l >= 0; --l)
    stride[static_cast<std::size_t>(l)] =
        stride[static_cast<std::size_t>(l + 1)] * axis_nodes_[static_cast<std::size_t>(l + 1)].size();
  double value = 0.0;
  for (unsigned corner = 0; corner < (1u << d_); ++corner) {
    double w = 1.0;
    std::size_t flat = 0;
    for (int l = 0; l < d_; ++l) {
      const bool high = (corner >> l) & 1u;
      w *= high ? frac[static_cast<std::size_t>(l)] : 1.0 - frac[static_cast<std::size_t>(l)];
      flat += (cell[static_cast<std::size_t>(l)] + (high ? 1 : 0)) * stride[static_cast<std::size_t>(l)];
    }
    value += w * table_[flat];
  }
  return amplitude_ * value;
}

Kernel Kernel::from_table_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open kernel table file: " + path);
  std::string header;
  if (!std::getline(in, header)) throw IoError("kernel table file is empty: " + path);
  std::istringstream hs(header);
  int d = 0;
  std::string norm_name;
  if (!(hs >> d >> norm_name)) throw ValidationError("kernel table: header must be 'd norm'");
  RadialNorm norm;
  if (norm_name == "euclidean")
    norm = RadialNorm::euclidean;
  else if (norm_name == "max")
    norm = RadialNorm::max;
  else
    throw ValidationError("kernel table: unknown norm '" + norm_name + "'");
  if (d < 1) throw ValidationError("kernel table: d must be >= 1");

  std::vector<std::vector<double>> points;
  std::vector<double> raw_values;
  std::string line;
  while (std::getline(in, line)) {
    std::istringstream ls(line);
    std::vector<double> coords(static_cast<std::size_t>(d));
    double value;
    bool any = false;
    for (int l = 0; l < d; ++l) {
      if (!(ls >> coords[static_cast<std::size_t>(l)])) {
        if (l == 0) break;  // blank line
        throw ValidationError("kernel table: malformed row '" + line + "'");
      }
      any = true;
    }
    if (!any) continue;
    if (!(ls >> value)) throw ValidationError("kernel table: row missing value '" + line + "'");
    points.push_back(std::move(coords));
    raw_values.push_back(value);
  }
  if (points.empty()) throw ValidationError("kernel table: no rows");

  std::vector<std::vector<double>> axis_nodes(static_cast<std::size_t>(d));
  for (int l = 0; l < d; ++l) {
    std::vector<double> vals;
    for (const auto& p : points) vals.push_back(p[static_cast<std::size_t>(l)]);
    std::sort(vals.begin(), vals.end());
    vals.erase(std::unique(vals.begin(), vals.end()), vals.end());
    axis_nodes[static_cast<std::size_t>(l)] = std::move(vals);
  }
  std::size_t expected = 1;
  for (const auto& nodes : axis_nodes) expected *= nodes.size();
  if (points.size() != expected)
    throw ValidationError("kernel table: rows must form a full tensor grid");

  std::vector<double> values(expected, 0.0);
  std::vector<std::size_t> stride(static_cast<std::size_t>(d), 1);
  for (int l = d - 2; l >= 0; --l)
    stride[static_cast<std::size_t>(l)] =
        stride[static_cast<std::size_t>(l + 1)] * axis_nodes[static_cast<std::size_t>(l + 1)].size();
  std::vector<bool> seen(expected, false);
  for (std::size_t r = 0; r < points.size(); ++r) {
    std::size_t flat = 0;
    for (int l = 0; l < d; ++l) {
      const auto& nodes = axis_nodes[static_cast<std::size_t>(l)];
      auto it = std::lower_bound(nodes.begin(), nodes.end(), points[r][static_cast<std::size_t>(l)]);
      flat += static_cast<std::size_t>(it - nodes.begin()) * stride[static_cast<std::size_t>(l)];
    }
    if (seen[flat]) throw ValidationError("kernel table: duplicate grid point");
    seen[flat] = true;
    values[flat] = raw_values[r];
  }
  return custom_table(d, norm, std::move(axis_nodes), std::move(values));
}

Kernel Kernel::from_name(const std::string& name, int d, RadialNorm norm) {
  if (name == "box") return box(d);
  if (name == "epanechnikov-paper" || name == "epanechnikov") return epanechnikov_paper(d, norm);
  if (name == "epanechnikov-normalized") return epanechnikov_normalized(d, norm);
  if (name == "triangle") return triangle(d);
  throw ValidationError("unknown kernel family '" + name + "'");
}

Kernel Kernel::scaled(double c) const {
  if (!(c > 0)) throw ValidationError("kernel: scale factor must be > 0");
  Kernel k = *this;
  k.amplitude_ *= c;
  k.mass_ *= c;
  k.l2_ *= c * c;
  k.lipschitz_ *= c;
  k.lower_ *= c;
  k.upper_ *= c;
  return k;
}

A1Report Kernel::check_assumption_a1(int grid_resolution) const {
  if (grid_resolution < 8) throw ValidationError("check_assumption_a1: grid_resolution must be >= 8");
  const int g = grid_resolution;
  A1Report rep;
  rep.mass_quadrature = mass_;
  rep.lipschitz_cached = lipschitz_;

  const std::uint64_t nodes_total = [&] {
    std::uint64_t t = 1;
    for (int l = 0; l < d_; ++l) t *= static_cast<std::uint64_t>(g + 1);
    return t;
  }();
  const double step = 2.0 / g;

  double min_v = 1e300, max_v = -1e300, max_sym = 0.0, max_lip = 0.0;
  std::vector<double> u(static_cast<std::size_t>(d_));
  std::vector<double> neg(static_cast<std::size_t>(d_));
  std::vector<double> shifted(static_cast<std::size_t>(d_));
  for (std::uint64_t node = 0; node < nodes_total; ++node) {
    std::uint64_t rest = node;
    for (int l = d_ - 1; l >= 0; --l) {
      u[static_cast<std::size_t>(l)] = -1.0 + step * static_cast<double>(rest % (g + 1));
      rest /= (g + 1);
    }
    const double v = evaluate(u.data());
    min_v = std::min(min_v, v);
    max_v = std::max(max_v, v);
    for (int l = 0; l < d_; ++l) neg[static_cast<std::size_t>(l)] = -u[static_cast<std::size_t>(l)];
    max_sym = std::max(max_sym, std::fabs(v - evaluate(neg.data())));
    for (int l = 0; l < d_; ++l) {
      if (u[static_cast<std::size_t>(l)] + step <= 1.0 + 1e-12) {
        shifted = u;
        shifted[static_cast<std::size_t>(l)] = std::min(1.0, u[static_cast<std::size_t>(l)] + step);
        max_lip = std::max(max_lip, std::fabs(evaluate(shifted.data()) - v) / step);
      }
    }
  }

  // midpoint mass estimate at the report resolution
  std::uint64_t cells_total = 1;
  for (int l = 0; l < d_; ++l) cells_total *= static_cast<std::uint64_t>(g);
  double mass_grid = 0.0;
  for (std::uint64_t cell = 0; cell < cells_total; ++cell) {
    std::uint64_t rest = cell;
    for (int l = d_ - 1; l >= 0; --l) {
      u[static_cast<std::size_t>(l)] = -1.0 + step * (static_cast<double>(rest % g) + 0.5);
      rest /= g;
    }
    mass_grid += evaluate(u.data());
  }
  rep.mass_grid = mass_grid * std::pow(step, d_);

  double outside = 0.0;
  for (int l = 0; l < d_; ++l) {
    std::fill(u.begin(), u.end(), 0.0);
    u[static_cast<std::size_t>(l)] = 1.0 + 1.0 / g;
    outside = std::max(outside, std::fabs(evaluate(u.data())));
    u[static_cast<std::size_t>(l)] = 2.0;
    outside = std::max(outside, std::fabs(evaluate(u.data())));
  }
  std::fill(u.begin(), u.end(), 1.0 + 1.0 / g);
  outside = std::max(outside, std::fabs(evaluate(u.data())));

  rep.min_on_cube = min_v;
  rep.max_on_cube = max_v;
  rep.max_symmetry_violation = max_sym;
  rep.lipschitz_measured = max_lip;
  rep.max_outside_support = outside;

  rep.mass_ok = std::fabs(mass_ - 1.0) <= 1e-6;
  rep.symmetric_ok = max_sym <= 1e-12;
  rep.nonnegative_ok = min_v >= 0.0;
  rep.support_ok = outside == 0.0;
  rep.lipschitz_ok = max_lip <= lipschitz_ * (1.0 + 1e-6) + 1e-9;
  rep.lower_bound_ok = min_v > 0.0;
  return rep;
}

std::string A1Report::to_string() const {
  auto flag = [](bool ok) { return ok ? "pass" : "FAIL"; };
  char buf[1024];
  std::snprintf(buf, sizeof(buf),
                "mass           %.10g (grid %.6g)  [%s]\n"
                "symmetry       max violation %.3g  [%s]\n"
                "nonnegativity  min %.6g  [%s]\n"
                "support        max outside %.3g  [%s]\n"
                "lipschitz      measured %.6g vs cached %.6g  [%s]\n"
                "lower bound c  %.6g (upper C %.6g)  [%s]\n",
                mass_quadrature, mass_grid, flag(mass_ok), max_symmetry_violation,
                flag(symmetric_ok), min_on_cube, flag(nonnegative_ok), max_outside_support,
                flag(support_ok), lipschitz_measured, lipschitz_cached, flag(lipschitz_ok),
                min_on_cube, max_on_cube, flag(lower_bound_ok));
  return buf;
}

}  // namespace fieldreg
