#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fieldreg/lattice.hpp"

namespace fieldreg {

enum class FieldKind {
  iid_gaussian,
  exp_gaussian_spectral,  // stationary Gaussian field, covariance cst*exp(-|k|/a)
  ma_field,               // finite moving average over i.i.d. normals
  md_field,               // martingale-difference field, uncorrelated but dependent
  external                // loaded or derived data, no generator attached
};

std::string to_string(FieldKind kind);

struct MaTap {
  MultiIndex offset;  // in Z^d, may be negative
  double theta;
};

struct FieldSpec {
  FieldKind kind = FieldKind::iid_gaussian;
  double sd = 1.0;           // iid standard deviation
  double cst = 1.0;          // exp: C(0)
  double range = 1.0;        // exp: a
  int components = 4096;     // exp: spectral component count M
  std::vector<MaTap> stencil;
  double beta = 1.0;         // md dependence strength
  std::uint64_t seed = 0;

  static FieldSpec iid(double sd, std::uint64_t seed);
  static FieldSpec exp_spectral(double cst, double range, int components, std::uint64_t seed);
  static FieldSpec ma(std::vector<MaTap> stencil, std::uint64_t seed);
  static FieldSpec md(double beta, std::uint64_t seed);

  void validate(int d) const;
  std::string describe() const;
};

struct Field {
  Lattice lattice;
  std::vector<double> values;  // lexicographic order, length lattice.size()
  FieldSpec spec;              // provenance; kind external when not simulated
};

/// Deterministic given (spec, lattice): same output for any worker count.
Field simulate(const FieldSpec& spec, const Lattice& lat, int threads = 0);

/// Sum of autocovariances over the max-norm ball |k| <= truncation.
/// Exact (independent of truncation) for iid, md and for ma once the
/// truncation covers the stencil diameter; a plain lattice sum for exp.
double theoretical_eta(const FieldSpec& spec, int d, int truncation);

/// Mean of products over all in-lattice pairs (i, i+lag).
double empirical_covariance(const Field& field, const std::vector<int>& lag);

// Flat binary format: "RFB1", u32 d, u64 n (little endian), then n^d doubles
// in lexicographic order.
void write_field(const Field& field, const std::string& path);
Field read_field(const std::string& path);
void write_field_csv(const Field& field, const std::string& path);

}  // namespace fieldreg
