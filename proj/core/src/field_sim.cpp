#include "fieldreg/field_sim.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "fieldreg/errors.hpp"
#include "fieldreg/parallel.hpp"
#include "fieldreg/rng.hpp"

static_assert(std::endian::native == std::endian::little,
              "field binary format assumes a little-endian host");

namespace fieldreg {

namespace {

constexpr std::uint64_t kStreamDriver = 0;
constexpr std::uint64_t kStreamRadial = 1;
constexpr std::uint64_t kStreamDirection = 2;
constexpr std::uint64_t kStreamPhase = 3;

constexpr double kPi = 3.14159265358979323846;
constexpr double kTwoPi = 2.0 * kPi;

/// Axis-aligned integer box, used to index driving noise beyond the lattice.
struct IndexBox {
  std::vector<int> lo, hi;  // inclusive
  std::uint64_t size() const {
    std::uint64_t s = 1;
    for (std::size_t l = 0; l < lo.size(); ++l)
      s *= static_cast<std::uint64_t>(hi[l] - lo[l] + 1);
    return s;
  }
  std::uint64_t linearize(const int* coords) const {
    std::uint64_t k = 0;
    for (std::size_t l = 0; l < lo.size(); ++l)
      k = k * static_cast<std::uint64_t>(hi[l] - lo[l] + 1) +
          static_cast<std::uint64_t>(coords[l] - lo[l]);
    return k;
  }
};

std::vector<double> driving_normals(const IndexBox& box, const CounterRng& rng, int threads) {
  std::vector<double> xi(box.size());
  parallel_for(xi.size(), threads, [&](std::uint64_t begin, std::uint64_t end) {
    for (std::uint64_t k = begin; k < end; ++k) xi[k] = rng.normal(k);
  });
  return xi;
}

void simulate_iid(const FieldSpec& spec, const Lattice& lat, std::vector<double>& out,
                  int threads) {
  const CounterRng rng(spec.seed, kStreamDriver);
  const double sd = spec.sd;
  parallel_for(lat.size(), threads, [&](std::uint64_t begin, std::uint64_t end) {
    for (std::uint64_t k = begin; k < end; ++k) out[k] = sd * rng.normal(k);
  });
}

void simulate_ma(const FieldSpec& spec, const Lattice& lat, std::vector<double>& out,
                 int threads) {
  const int d = lat.d();
  const int n = lat.n();
  IndexBox box;
  box.lo.assign(static_cast<std::size_t>(d), 1);
  box.hi.assign(static_cast<std::size_t>(d), n);
  for (const auto& tap : spec.stencil)
    for (int l = 0; l < d; ++l) {
      box.lo[static_cast<std::size_t>(l)] =
          std::min(box.lo[static_cast<std::size_t>(l)], 1 - tap.offset[static_cast<std::size_t>(l)]);
      box.hi[static_cast<std::size_t>(l)] =
          std::max(box.hi[static_cast<std::size_t>(l)], n - tap.offset[static_cast<std::size_t>(l)]);
    }
  const std::vector<double> xi = driving_normals(box, CounterRng(spec.seed, kStreamDriver), threads);

  parallel_for(lat.size(), threads, [&](std::uint64_t begin, std::uint64_t end) {
    std::vector<int> coords(static_cast<std::size_t>(d));
    std::vector<int> shifted(static_cast<std::size_t>(d));
    for (std::uint64_t k = begin; k < end; ++k) {
      lat.delinearize(k, coords.data());
      double acc = 0.0;
      for (const auto& tap : spec.stencil) {
        for (int l = 0; l < d; ++l)
          shifted[static_cast<std::size_t>(l)] =
              coords[static_cast<std::size_t>(l)] - tap.offset[static_cast<std::size_t>(l)];
        acc += tap.theta * xi[box.linearize(shifted.data())];
      }
      out[k] = acc;
    }
  });
}

void simulate_md(const FieldSpec& spec, const Lattice& lat, std::vector<double>& out,
                 int threads) {
  const int d = lat.d();
  const int n = lat.n();
  IndexBox box;
  box.lo.assign(static_cast<std::size_t>(d), 1);
  box.hi.assign(static_cast<std::size_t>(d), n);
  box.lo[static_cast<std::size_t>(d - 1)] = 0;  // lexicographic predecessor along the last axis
  const std::vector<double> xi = driving_normals(box, CounterRng(spec.seed, kStreamDriver), threads);
  const double beta = spec.beta;
  const double normalizer = std::sqrt(1.0 + beta);

  parallel_for(lat.size(), threads, [&](std::uint64_t begin, std::uint64_t end) {
    std::vector<int> coords(static_cast<std::size_t>(d));
    for (std::uint64_t k = begin; k < end; ++k) {
      lat.delinearize(k, coords.data());
      const std::uint64_t self = box.linearize(coords.data());
      coords[static_cast<std::size_t>(d - 1)] -= 1;
      const std::uint64_t prev = box.linearize(coords.data());
      out[k] = xi[self] * std::sqrt(1.0 + beta * xi[prev] * xi[prev]) / normalizer;
    }
  });
}

/// Radius quantile of the isotropic spectral measure of exp(-|h|/a) in R^d.
/// d=1: (a/pi)/(1+a^2 w^2) gives r = tan(pi u / 2)/a.
/// d=2: radial density a^2 r (1+a^2 r^2)^{-3/2} gives r = sqrt((1-u)^{-2}-1)/a.
/// d=3: radial cdf (2/pi)(atan t - t/(1+t^2)), t = a r, inverted by bisection.
double spectral_radius(double u, double a, int d) {
  switch (d) {
    case 1:
      return std::tan(0.5 * kPi * u) / a;
    case 2: {
      const double s = 1.0 / (1.0 - u);
      return std::sqrt(s * s - 1.0) / a;
    }
    case 3: {
      auto cdf = [](double t) { return (2.0 / kPi) * (std::atan(t) - t / (1.0 + t * t)); };
      double lo = 0.0;
      double hi = std::max(16.0, 8.0 / (kPi * (1.0 - u)));
      while (cdf(hi) < u) hi *= 2.0;
      for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (cdf(mid) < u)
          lo = mid;
        else
          hi = mid;
      }
      return 0.5 * (lo + hi) / a;
    }
    default:
      throw ValidationError("exp-gaussian-spectral: spectral sampler implemented for d in {1,2,3}");
  }
}

void simulate_exp_spectral(const FieldSpec& spec, const Lattice& lat, std::vector<double>& out,
                           int threads) {
  const int d = lat.d();
  const int m_count = spec.components;
  const CounterRng radial_rng(spec.seed, kStreamRadial);
  const CounterRng dir_rng(spec.seed, kStreamDirection);
  const CounterRng phase_rng(spec.seed, kStreamPhase);

  // frequencies and phases: small, drawn serially
  std::vector<double> freq(static_cast<std::size_t>(m_count) * static_cast<std::size_t>(d));
  std::vector<double> phase(static_cast<std::size_t>(m_count));
  for (int m = 0; m < m_count; ++m) {
    const double r = spectral_radius(radial_rng.uniform(static_cast<std::uint64_t>(m)), spec.range, d);
    double* w = &freq[static_cast<std::size_t>(m) * static_cast<std::size_t>(d)];
    switch (d) {
      case 1:
        w[0] = dir_rng.uniform(static_cast<std::uint64_t>(m)) < 0.5 ? -r : r;
        break;
      case 2: {
        const double theta = kTwoPi * dir_rng.uniform(static_cast<std::uint64_t>(m));
        w[0] = r * std::cos(theta);
        w[1] = r * std::sin(theta);
        break;
      }
      case 3: {
        const auto [u1, u2] = dir_rng.uniform_pair(static_cast<std::uint64_t>(m));
        const double z = 2.0 * u1 - 1.0;
        const double s = std::sqrt(std::max(0.0, 1.0 - z * z));
        const double phi = kTwoPi * u2;
        w[0] = r * s * std::cos(phi);
        w[1] = r * s * std::sin(phi);
        w[2] = r * z;
        break;
      }
      default:
        throw ValidationError("exp-gaussian-spectral: d must be in {1,2,3}");
    }
    phase[static_cast<std::size_t>(m)] = kTwoPi * phase_rng.uniform(static_cast<std::uint64_t>(m));
  }

  const double amplitude = std::sqrt(spec.cst * 2.0 / static_cast<double>(m_count));
  parallel_for(lat.size(), threads, [&](std::uint64_t begin, std::uint64_t end) {
    std::vector<int> coords(static_cast<std::size_t>(d));
    for (std::uint64_t k = begin; k < end; ++k) {
      lat.delinearize(k, coords.data());
      double acc = 0.0;
      for (int m = 0; m < m_count; ++m) {
        const double* w = &freq[static_cast<std::size_t>(m) * static_cast<std::size_t>(d)];
        double arg = phase[static_cast<std::size_t>(m)];
        for (int l = 0; l < d; ++l) arg += w[l] * static_cast<double>(coords[static_cast<std::size_t>(l)]);
        acc += std::cos(arg);
      }
      out[k] = amplitude * acc;
    }
  });
}

}  // namespace

std::string to_string(FieldKind kind) {
  switch (kind) {
    case FieldKind::iid_gaussian: return "iid-gaussian";
    case FieldKind::exp_gaussian_spectral: return "exp-gaussian-spectral";
    case FieldKind::ma_field: return "ma-field";
    case FieldKind::md_field: return "md-field";
    case FieldKind::external: return "external";
  }
  return "?";
}

FieldSpec FieldSpec::iid(double sd, std::uint64_t seed) {
  FieldSpec s;
  s.kind = FieldKind::iid_gaussian;
  s.sd = sd;
  s.seed = seed;
  return s;
}

FieldSpec FieldSpec::exp_spectral(double cst, double range, int components, std::uint64_t seed) {
  FieldSpec s;
  s.kind = FieldKind::exp_gaussian_spectral;
  s.cst = cst;
  s.range = range;
  s.components = components;
  s.seed = seed;
  return s;
}

FieldSpec FieldSpec::ma(std::vector<MaTap> stencil, std::uint64_t seed) {
  FieldSpec s;
  s.kind = FieldKind::ma_field;
  s.stencil = std::move(stencil);
  s.seed = seed;
  return s;
}

FieldSpec FieldSpec::md(double beta, std::uint64_t seed) {
  FieldSpec s;
  s.kind = FieldKind::md_field;
  s.beta = beta;
  s.seed = seed;
  return s;
}

void FieldSpec::validate(int d) const {
  switch (kind) {
    case FieldKind::iid_gaussian:
      if (!(sd > 0)) throw ValidationError("iid-gaussian: sd must be > 0");
      break;
    case FieldKind::exp_gaussian_spectral:
      if (!(cst > 0)) throw ValidationError("exp-gaussian-spectral: cst must be > 0");
      if (!(range > 0)) throw ValidationError("exp-gaussian-spectral: range must be > 0");
      if (components < 1) throw ValidationError("exp-gaussian-spectral: components must be >= 1");
      if (d < 1 || d > 3)
        throw ValidationError("exp-gaussian-spectral: spectral sampler implemented for d in {1,2,3}");
      break;
    case FieldKind::ma_field:
      if (stencil.empty()) throw ValidationError("ma-field: stencil must be nonempty");
      for (const auto& tap : stencil) {
        if (static_cast<int>(tap.offset.size()) != d)
          throw ValidationError("ma-field: stencil offset dimension mismatch");
        if (!std::isfinite(tap.theta)) throw ValidationError("ma-field: stencil weight not finite");
      }
      break;
    case FieldKind::md_field:
      if (!(beta >= 0)) throw ValidationError("md-field: beta must be >= 0");
      break;
    case FieldKind::external:
      throw ValidationError("external fields cannot be simulated");
  }
}

std::string FieldSpec::describe() const {
  std::ostringstream os;
  os << to_string(kind);
  switch (kind) {
    case FieldKind::iid_gaussian:
      os << "(sd=" << sd << ")";
      break;
    case FieldKind::exp_gaussian_spectral:
      os << "(cst=" << cst << ",a=" << range << ",M=" << components << ")";
      break;
    case FieldKind::ma_field: {
      os << "(stencil=";
      for (std::size_t t = 0; t < stencil.size(); ++t) {
        if (t) os << ";";
        for (std::size_t l = 0; l < stencil[t].offset.size(); ++l) {
          if (l) os << ",";
          os << stencil[t].offset[l];
        }
        os << ":" << stencil[t].theta;
      }
      os << ")";
      break;
    }
    case FieldKind::md_field:
      os << "(beta=" << beta << ")";
      break;
    case FieldKind::external:
      break;
  }
  return os.str();
}

Field simulate(const FieldSpec& spec, const Lattice& lat, int threads) {
  spec.validate(lat.d());
  Field field{lat, std::vector<double>(lat.size()), spec};
  switch (spec.kind) {
    case FieldKind::iid_gaussian:
      simulate_iid(spec, lat, field.values, threads);
      break;
    case FieldKind::exp_gaussian_spectral:
      simulate_exp_spectral(spec, lat, field.values, threads);
      break;
    case FieldKind::ma_field:
      simulate_ma(spec, lat, field.values, threads);
      break;
    case FieldKind::md_field:
      simulate_md(spec, lat, field.values, threads);
      break;
    case FieldKind::external:
      throw ValidationError("external fields cannot be simulated");
  }
  return field;
}

double theoretical_eta(const FieldSpec& spec, int d, int truncation) {
  if (truncation < 0) throw ValidationError("theoretical_eta: truncation must be >= 0");
  switch (spec.kind) {
    case FieldKind::iid_gaussian:
      return spec.sd * spec.sd;
    case FieldKind::md_field:
      return 1.0;  // normalizer keeps E eps^2 = 1; other lags are uncorrelated
    case FieldKind::ma_field: {
      int diameter = 0;
      for (const auto& a : spec.stencil)
        for (const auto& b : spec.stencil)
          for (std::size_t l = 0; l < a.offset.size(); ++l)
            diameter = std::max(diameter, std::abs(a.offset[l] - b.offset[l]));
      if (truncation < diameter)
        throw ValidationError("theoretical_eta: truncation smaller than ma stencil diameter");
      double total = 0.0;
      for (const auto& tap : spec.stencil) total += tap.theta;
      return total * total;
    }
    case FieldKind::exp_gaussian_spectral: {
      // lattice sum of cst * exp(-|k|_2 / a) over the max-norm ball
      std::vector<int> k(static_cast<std::size_t>(d), -truncation);
      double sum = 0.0;
      while (true) {
        double norm2 = 0.0;
        for (int c : k) norm2 += static_cast<double>(c) * c;
        sum += std::exp(-std::sqrt(norm2) / spec.range);
        int l = d - 1;
        while (l >= 0 && k[static_cast<std::size_t>(l)] == truncation) {
          k[static_cast<std::size_t>(l)] = -truncation;
          --l;
        }
        if (l < 0) break;
        ++k[static_cast<std::size_t>(l)];
      }
      return spec.cst * sum;
    }
    case FieldKind::external:
      throw ValidationError("theoretical_eta: external fields have no generator covariance");
  }
  return 0.0;
}

double empirical_covariance(const Field& field, const std::vector<int>& lag) {
  const Lattice& lat = field.lattice;
  const int d = lat.d();
  const int n = lat.n();
  if (static_cast<int>(lag.size()) != d)
    throw ValidationError("empirical_covariance: lag dimension mismatch");
  for (int c : lag)
    if (std::abs(c) >= n) throw ValidationError("empirical_covariance: |lag| must be < n");

  std::vector<int> lo(static_cast<std::size_t>(d)), hi(static_cast<std::size_t>(d));
  std::uint64_t count = 1;
  for (int l = 0; l < d; ++l) {
    lo[static_cast<std::size_t>(l)] = std::max(1, 1 - lag[static_cast<std::size_t>(l)]);
    hi[static_cast<std::size_t>(l)] = std::min(n, n - lag[static_cast<std::size_t>(l)]);
    count *= static_cast<std::uint64_t>(hi[static_cast<std::size_t>(l)] - lo[static_cast<std::size_t>(l)] + 1);
  }
  std::vector<int> i(lo);
  std::vector<int> j(static_cast<std::size_t>(d));
  double sum = 0.0;
  while (true) {
    for (int l = 0; l < d; ++l)
      j[static_cast<std::size_t>(l)] = i[static_cast<std::size_t>(l)] + lag[static_cast<std::size_t>(l)];
    sum += field.values[lat.linearize(i)] * field.values[lat.linearize(j)];
    int l = d - 1;
    while (l >= 0 && i[static_cast<std::size_t>(l)] == hi[static_cast<std::size_t>(l)]) {
      i[static_cast<std::size_t>(l)] = lo[static_cast<std::size_t>(l)];
      --l;
    }
    if (l < 0) break;
    ++i[static_cast<std::size_t>(l)];
  }
  return sum / static_cast<double>(count);
}

void write_field(const Field& field, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open for writing: " + path);
  const char magic[4] = {'R', 'F', 'B', '1'};
  out.write(magic, 4);
  const std::uint32_t d = static_cast<std::uint32_t>(field.lattice.d());
  const std::uint64_t n = static_cast<std::uint64_t>(field.lattice.n());
  out.write(reinterpret_cast<const char*>(&d), sizeof d);
  out.write(reinterpret_cast<const char*>(&n), sizeof n);
  out.write(reinterpret_cast<const char*>(field.values.data()),
            static_cast<std::streamsize>(field.values.size() * sizeof(double)));
  if (!out) throw IoError("write failed: " + path);
}

Field read_field(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open for reading: " + path);
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, "RFB1", 4) != 0)
    throw IoError("not a field file (bad magic): " + path);
  std::uint32_t d = 0;
  std::uint64_t n = 0;
  in.read(reinterpret_cast<char*>(&d), sizeof d);
  in.read(reinterpret_cast<char*>(&n), sizeof n);
  if (!in || d < 1 || n < 1) throw IoError("corrupt field header: " + path);
  Lattice lat(static_cast<int>(n), static_cast<int>(d));
  Field field{lat, std::vector<double>(lat.size()), FieldSpec{}};
  field.spec.kind = FieldKind::external;
  in.read(reinterpret_cast<char*>(field.values.data()),
          static_cast<std::streamsize>(field.values.size() * sizeof(double)));
  if (!in) throw IoError("truncated field payload: " + path);
  for (double v : field.values)
    if (!std::isfinite(v)) throw IoError("field payload contains non-finite values: " + path);
  return field;
}

void write_field_csv(const Field& field, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open for writing: " + path);
  const int d = field.lattice.d();
  for (int l = 1; l <= d; ++l) out << "i_" << l << ",";
  out << "value\n";
  std::vector<int> coords(static_cast<std::size_t>(d));
  char buf[64];
  for (std::uint64_t k = 0; k < field.lattice.size(); ++k) {
    field.lattice.delinearize(k, coords.data());
    for (int l = 0; l < d; ++l) out << coords[static_cast<std::size_t>(l)] << ",";
    std::snprintf(buf, sizeof buf, "%.17g", field.values[k]);
    out << buf << "\n";
  }
  if (!out) throw IoError("write failed: " + path);
}

}  // namespace fieldreg
