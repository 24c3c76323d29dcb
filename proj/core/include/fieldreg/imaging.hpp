#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "fieldreg/field_sim.hpp"
#include "fieldreg/inference.hpp"
#include "fieldreg/kernel.hpp"

namespace fieldreg {

/// Grayscale image with real-valued working pixels (nominal range [0,255]).
/// Quantization to 8 bits happens only at export.
struct GrayImage {
  int width = 0;
  int height = 0;
  std::vector<double> values;  // row-major

  double& at(int row, int col) { return values[static_cast<std::size_t>(row) * width + col]; }
  double at(int row, int col) const { return values[static_cast<std::size_t>(row) * width + col]; }
};

/// Export quantization: clamp to [0,255], round half-up.
std::uint8_t export_pixel(double v);

// Binary PGM (P5), maxval 255, canonical header "P5\n<w> <h>\n255\n".
GrayImage decode_pgm(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> encode_pgm(const GrayImage& img);
GrayImage read_pgm(const std::string& path);
void write_pgm(const GrayImage& img, const std::string& path);

/// Test pattern 127.5 * (1 + sin(2 pi x1) sin(2 pi x2)) sampled at the
/// design points of an n x n lattice; continuously differentiable on [0,1]^2.
GrayImage synth_sinusoid(int n);

/// Piecewise-continuous test scene (gradient background, disk, rectangle).
/// Its jump edges violate the smoothness assumption behind the pointwise
/// test, so no normality claim is made along them; the pipeline still runs.
GrayImage synth_phantom(int n);

/// Pixelwise sum of image and noise field (d = 2, matching size); working
/// values are NOT clamped.
GrayImage add_noise(const GrayImage& img, const Field& noise);

/// p-value rendering: p * 255, rounded half-up (white = p near 1).
GrayImage pvalue_image(const PValueMap& map);

struct DenoiseConfig {
  Kernel kernel;
  double bandwidth = 0.25;
  int rho = -1;  // -1: default_rho(n)
  MeanPolicy policy = MeanPolicy::leave_one_out;
  double threshold = 0.01;
  bool clamp_observations = false;  // clamp noisy pixels to [0,255] before fitting
  bool use_true_noise = false;      // eta-hat from the simulated noise, not residuals
  int threads = 0;
  std::uint64_t seed = 0;
};

struct DenoiseResult {
  GrayImage original;
  GrayImage noisy_example;   // the target replicate, export-clamped view comes at write time
  GrayImage restored_mean;
  GrayImage pvalues;
  std::vector<GridEstimate> replicate_fits;
  PValueMap map;
  double eta_hat = 0.0;
  double interior_fraction_above = 0.0;
};

/// The denoising experiment: simulate replicate noisy images, restore each,
/// average the restorations, and test pixel by pixel. Under leave_one_out a
/// target plus `replicates` references are simulated; under include_self the
/// target is the first of `replicates` total.
DenoiseResult denoise_experiment(const GrayImage& original, const FieldSpec& noise, int replicates,
                                 const DenoiseConfig& config);

/// Writes original.pgm, noisy.pgm, restored_mean.pgm, pvalues.pgm and
/// summary.csv into out_dir (which must exist).
void write_denoise_outputs(const DenoiseResult& result, const std::string& out_dir);

}  // namespace fieldreg
