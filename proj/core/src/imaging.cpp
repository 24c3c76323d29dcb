#include "fieldreg/imaging.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "fieldreg/dependence.hpp"
#include "fieldreg/errors.hpp"
#include "fieldreg/rng.hpp"

namespace fieldreg {

std::uint8_t export_pixel(double v) {
  const double r = std::floor(v + 0.5);  // round half-up
  if (r <= 0.0) return 0;
  if (r >= 255.0) return 255;
  return static_cast<std::uint8_t>(r);
}

namespace {

// PGM header token reader: skips whitespace and '#' comments.
struct ByteScanner {
  std::span<const std::uint8_t> bytes;
  std::size_t pos = 0;

  bool skip_space() {
    while (pos < bytes.size()) {
      const char c = static_cast<char>(bytes[pos]);
      if (c == '#') {
        while (pos < bytes.size() && static_cast<char>(bytes[pos]) != '\n') ++pos;
      } else if (c == ' ' || c == '\t' || c == '\r' || c == '\n') {
        ++pos;
      } else {
        break;
      }
    }
    return pos < bytes.size();
  }

  long next_int() {
    if (!skip_space()) throw IoError("pgm: truncated header");
    long v = 0;
    bool any = false;
    while (pos < bytes.size()) {
      const char c = static_cast<char>(bytes[pos]);
      if (c < '0' || c > '9') break;
      v = v * 10 + (c - '0');
      any = true;
      ++pos;
    }
    if (!any) throw IoError("pgm: malformed header (expected an integer)");
    return v;
  }
};

}  // namespace

GrayImage decode_pgm(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 2 || bytes[0] != 'P' || bytes[1] != '5')
    throw IoError("pgm: not a binary P5 file");
  ByteScanner sc{bytes, 2};
  const long w = sc.next_int();
  const long h = sc.next_int();
  const long maxval = sc.next_int();
  if (w < 1 || h < 1) throw IoError("pgm: bad dimensions");
  if (maxval > 255)
    throw IoError("pgm: unsupported format (maxval " + std::to_string(maxval) +
                  " > 255; only 8-bit images are supported)");
  if (maxval < 1) throw IoError("pgm: bad maxval");
  ++sc.pos;  // exactly one whitespace byte separates header and payload
  const std::size_t need = static_cast<std::size_t>(w) * static_cast<std::size_t>(h);
  if (bytes.size() - sc.pos < need) throw IoError("pgm: truncated payload");
  GrayImage img;
  img.width = static_cast<int>(w);
  img.height = static_cast<int>(h);
  img.values.resize(need);
  for (std::size_t i = 0; i < need; ++i) img.values[i] = static_cast<double>(bytes[sc.pos + i]);
  return img;
}

std::vector<std::uint8_t> encode_pgm(const GrayImage& img) {
  if (img.width < 1 || img.height < 1 ||
      img.values.size() != static_cast<std::size_t>(img.width) * static_cast<std::size_t>(img.height))
    throw ValidationError("pgm: image dimensions do not match pixel count");
  char header[64];
  const int header_len =
      std::snprintf(header, sizeof header, "P5\n%d %d\n255\n", img.width, img.height);
  std::vector<std::uint8_t> bytes;
  bytes.reserve(static_cast<std::size_t>(header_len) + img.values.size());
  bytes.insert(bytes.end(), header, header + header_len);
  for (double v : img.values) bytes.push_back(export_pixel(v));
  return bytes;
}

GrayImage read_pgm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open for reading: " + path);
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  return decode_pgm(bytes);
}

void write_pgm(const GrayImage& img, const std::string& path) {
  const auto bytes = encode_pgm(img);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open for writing: " + path);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed: " + path);
}

GrayImage synth_sinusoid(int n) {
  if (n < 2) throw ValidationError("synth_sinusoid: n must be >= 2");
  GrayImage img;
  img.width = img.height = n;
  img.values.resize(static_cast<std::size_t>(n) * static_cast<std::size_t>(n));
  constexpr double kTwoPi = 6.283185307179586476925286766559;
  for (int row = 0; row < n; ++row) {
    const double x1 = static_cast<double>(row + 1) / n;
    for (int col = 0; col < n; ++col) {
      const double x2 = static_cast<double>(col + 1) / n;
      img.at(row, col) = 127.5 * (1.0 + std::sin(kTwoPi * x1) * std::sin(kTwoPi * x2));
    }
  }
  return img;
}

GrayImage synth_phantom(int n) {
  if (n < 2) throw ValidationError("synth_phantom: n must be >= 2");
  GrayImage img;
  img.width = img.height = n;
  img.values.resize(static_cast<std::size_t>(n) * static_cast<std::size_t>(n));
  for (int row = 0; row < n; ++row) {
    const double x1 = static_cast<double>(row + 1) / n;
    for (int col = 0; col < n; ++col) {
      const double x2 = static_cast<double>(col + 1) / n;
      double v = 40.0 + 120.0 * (0.5 * (x1 + x2));  // gradient background
      const double dx = x1 - 0.35, dy = x2 - 0.40;
      if (dx * dx + dy * dy <= 0.22 * 0.22) v = 220.0;
      if (x1 >= 0.55 && x1 <= 0.85 && x2 >= 0.60 && x2 <= 0.90) v = 30.0;
      img.at(row, col) = v;
    }
  }
  return img;
}

GrayImage add_noise(const GrayImage& img, const Field& noise) {
  if (noise.lattice.d() != 2 || noise.lattice.n() != img.width || img.width != img.height)
    throw ValidationError("add_noise: image and noise field sizes do not match");
  GrayImage out = img;
  // lattice index (i1,i2) maps to pixel (row i1-1, col i2-1); both are
  // lexicographic row-major, so the flat arrays align
  for (std::size_t k = 0; k < out.values.size(); ++k) out.values[k] += noise.values[k];
  return out;
}

GrayImage pvalue_image(const PValueMap& map) {
  if (map.d != 2) throw ValidationError("pvalue_image: map must be 2-dimensional");
  GrayImage img;
  img.width = img.height = map.n;
  img.values.resize(map.stats.size());
  for (std::size_t k = 0; k < map.stats.size(); ++k) img.values[k] = map.stats[k].p * 255.0;
  return img;
}

DenoiseResult denoise_experiment(const GrayImage& original, const FieldSpec& noise, int replicates,
                                 const DenoiseConfig& config) {
  if (original.width != original.height) throw ValidationError("denoise: image must be square");
  if (replicates < 2) throw ValidationError("denoise: need at least 2 replicates");
  const int n = original.width;
  const Lattice lat(n, 2);
  const double h = config.bandwidth;

  const int total = config.policy == MeanPolicy::leave_one_out ? replicates + 1 : replicates;

  DenoiseResult result;
  result.original = original;
  result.replicate_fits.reserve(static_cast<std::size_t>(total));

  std::vector<double> target_y;
  Field target_noise{lat, {}, FieldSpec{}};
  for (int t = 0; t < total; ++t) {
    FieldSpec rep_spec = noise;
    rep_spec.seed = CounterRng::derive(config.seed, static_cast<std::uint64_t>(t));
    Field eps = simulate(rep_spec, lat, config.threads);
    GrayImage noisy = add_noise(original, eps);
    if (config.clamp_observations)
      for (auto& v : noisy.values) v = std::clamp(v, 0.0, 255.0);
    result.replicate_fits.push_back(
        estimate_grid(noisy.values, lat, config.kernel, h, config.threads));
    if (t == 0) {
      result.noisy_example = noisy;
      target_y = noisy.values;
      target_noise = std::move(eps);
    }
  }

  // reference mean: everything but the target under leave-one-out, everything
  // including it under include-self
  std::vector<GridEstimate> reference_fits;
  if (config.policy == MeanPolicy::leave_one_out)
    reference_fits.assign(result.replicate_fits.begin() + 1, result.replicate_fits.end());
  else
    reference_fits = result.replicate_fits;
  const GridMean ref = mean_reference_grid(reference_fits, config.policy);
  const double inflation = config.policy == MeanPolicy::leave_one_out ? ref.inflation : 1.0;

  const int rho = config.rho >= 0 ? config.rho : default_rho(n, 2);
  EtaEstimate eta;
  if (config.use_true_noise) {
    eta = estimate_eta(target_noise, rho, config.threads);
  } else {
    const Field eps_hat = residuals(target_y, result.replicate_fits.front(), lat);
    eta = estimate_eta(eps_hat, rho, config.threads);
  }
  result.eta_hat = eta.value;

  PValueMap map;
  map.n = n;
  map.d = 2;
  map.bandwidth = h;
  map.sigma2 = config.kernel.l2_moment();
  map.eta = eta.value;
  map.threshold = config.threshold;
  map.stats.resize(lat.size());
  const double rate = static_cast<double>(n) * h;  // (nh)^{d/2} with d = 2
  const double scale = std::sqrt(map.sigma2 * eta.value * inflation);
  const GridEstimate& target_fit = result.replicate_fits.front();
  std::uint64_t interior_above = 0, boundary_above = 0;
  double x[2];
  for (std::uint64_t k = 0; k < lat.size(); ++k) {
    lat.design_point(k, x);
    const bool boundary =
        std::min(x[0], 1.0 - x[0]) < h || std::min(x[1], 1.0 - x[1]) < h;
    StandardizedStat& s = map.stats[k];
    s.z = rate * (target_fit.values[k] - ref.values[k]) / scale;
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

  result.restored_mean = GrayImage{n, n, ref.values};
  result.pvalues = pvalue_image(map);
  result.interior_fraction_above = map.interior_fraction_above;
  result.map = std::move(map);
  return result;
}

void write_denoise_outputs(const DenoiseResult& result, const std::string& out_dir) {
  write_pgm(result.original, out_dir + "/original.pgm");
  write_pgm(result.noisy_example, out_dir + "/noisy.pgm");
  write_pgm(result.restored_mean, out_dir + "/restored_mean.pgm");
  write_pgm(result.pvalues, out_dir + "/pvalues.pgm");
  std::ofstream out(out_dir + "/summary.csv");
  if (!out) throw IoError("cannot open for writing: " + out_dir + "/summary.csv");
  out << "fraction_p_above_threshold,boundary_fraction_above,eta_hat,bandwidth,sigma2,threshold,"
         "n,interior_count,boundary_count\n";
  char buf[512];
  std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%d,%llu,%llu\n",
                result.map.interior_fraction_above, result.map.boundary_fraction_above,
                result.eta_hat, result.map.bandwidth, result.map.sigma2, result.map.threshold,
                result.map.n, static_cast<unsigned long long>(result.map.interior_count),
                static_cast<unsigned long long>(result.map.boundary_count));
  out << buf;
  if (!out) throw IoError("write failed: " + out_dir + "/summary.csv");
}

}  // namespace fieldreg
