#pragma once

#include <array>
#include <cstdint>
#include <utility>

namespace fieldreg {

/// Philox4x32-10 counter-based generator (Salmon et al., SC'11).
///
/// Every draw is a pure function of (seed, stream, counter), so simulation
/// output does not depend on evaluation order or worker count. Substreams
/// are derived with a splitmix64-style mix, never by offsetting counters.
class CounterRng {
 public:
  explicit CounterRng(std::uint64_t seed, std::uint64_t stream = 0)
      : seed_(seed), stream_(stream) {}

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream() const { return stream_; }

  /// Raw 128-bit block for a counter value.
  std::array<std::uint32_t, 4> block(std::uint64_t counter) const;

  /// One double uniform on (0,1); never returns 0 or 1.
  double uniform(std::uint64_t counter) const;
  /// Two independent uniforms from one block.
  std::pair<double, double> uniform_pair(std::uint64_t counter) const;

  /// Standard normals via Box-Muller on one block.
  double normal(std::uint64_t counter) const;
  std::pair<double, double> normal_pair(std::uint64_t counter) const;

  /// Derived generator with an independent stream for the given label.
  CounterRng split(std::uint64_t label) const;

  /// Stateless seed derivation for replicate/worker sub-seeds.
  static std::uint64_t derive(std::uint64_t base, std::uint64_t label);

  /// Raw Philox4x32-10 on explicit counter/key words (exposed for known-answer tests).
  static std::array<std::uint32_t, 4> philox4x32(const std::array<std::uint32_t, 4>& counter,
                                                 const std::array<std::uint32_t, 2>& key);

 private:
  std::uint64_t seed_;
  std::uint64_t stream_;
};

}  // namespace fieldreg
