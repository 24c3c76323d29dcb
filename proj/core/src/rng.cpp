#include "fieldreg/rng.hpp"

#include <cmath>

namespace fieldreg {

namespace {

constexpr std::uint32_t kPhiloxM0 = 0xD2511F53u;
constexpr std::uint32_t kPhiloxM1 = 0xCD9E8D57u;
constexpr std::uint32_t kPhiloxW0 = 0x9E3779B9u;
constexpr std::uint32_t kPhiloxW1 = 0xBB67AE85u;

inline void philox_round(std::array<std::uint32_t, 4>& c, const std::array<std::uint32_t, 2>& k) {
  const std::uint64_t p0 = static_cast<std::uint64_t>(kPhiloxM0) * c[0];
  const std::uint64_t p1 = static_cast<std::uint64_t>(kPhiloxM1) * c[2];
  const std::uint32_t hi0 = static_cast<std::uint32_t>(p0 >> 32);
  const std::uint32_t lo0 = static_cast<std::uint32_t>(p0);
  const std::uint32_t hi1 = static_cast<std::uint32_t>(p1 >> 32);
  const std::uint32_t lo1 = static_cast<std::uint32_t>(p1);
  c = {hi1 ^ c[1] ^ k[0], lo1, hi0 ^ c[3] ^ k[1], lo0};
}

inline std::uint64_t splitmix64(std::uint64_t z) {
  z += 0x9E3779B97F4A7C15ull;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

inline double to_unit_interval(std::uint64_t bits) {
  // 53 significant bits, offset to stay strictly inside (0,1)
  return static_cast<double>(bits >> 11) * 0x1.0p-53 + 0x1.0p-54;
}

constexpr double kTwoPi = 6.283185307179586476925286766559;

}  // namespace

std::array<std::uint32_t, 4> CounterRng::philox4x32(const std::array<std::uint32_t, 4>& counter,
                                                    const std::array<std::uint32_t, 2>& key) {
  std::array<std::uint32_t, 4> c = counter;
  std::array<std::uint32_t, 2> k = key;
  philox_round(c, k);
  for (int round = 1; round < 10; ++round) {
    k[0] += kPhiloxW0;
    k[1] += kPhiloxW1;
    philox_round(c, k);
  }
  return c;
}

std::array<std::uint32_t, 4> CounterRng::block(std::uint64_t counter) const {
  const std::array<std::uint32_t, 4> c = {
      static_cast<std::uint32_t>(counter), static_cast<std::uint32_t>(counter >> 32),
      static_cast<std::uint32_t>(stream_), static_cast<std::uint32_t>(stream_ >> 32)};
  const std::array<std::uint32_t, 2> k = {static_cast<std::uint32_t>(seed_),
                                          static_cast<std::uint32_t>(seed_ >> 32)};
  return philox4x32(c, k);
}

double CounterRng::uniform(std::uint64_t counter) const {
  const auto b = block(counter);
  return to_unit_interval((static_cast<std::uint64_t>(b[1]) << 32) | b[0]);
}

std::pair<double, double> CounterRng::uniform_pair(std::uint64_t counter) const {
  const auto b = block(counter);
  return {to_unit_interval((static_cast<std::uint64_t>(b[1]) << 32) | b[0]),
          to_unit_interval((static_cast<std::uint64_t>(b[3]) << 32) | b[2])};
}

std::pair<double, double> CounterRng::normal_pair(std::uint64_t counter) const {
  const auto [u1, u2] = uniform_pair(counter);
  const double r = std::sqrt(-2.0 * std::log(u1));
  return {r * std::cos(kTwoPi * u2), r * std::sin(kTwoPi * u2)};
}

double CounterRng::normal(std::uint64_t counter) const { return normal_pair(counter).first; }

CounterRng CounterRng::split(std::uint64_t label) const {
  return CounterRng(seed_, splitmix64(stream_ ^ splitmix64(label)));
}

std::uint64_t CounterRng::derive(std::uint64_t base, std::uint64_t label) {
  return splitmix64(base ^ splitmix64(label ^ 0x5851F42D4C957F2Dull));
}

}  // namespace fieldreg
