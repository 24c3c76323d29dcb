#include "fieldreg/lattice.hpp"

#include <limits>

#include "fieldreg/errors.hpp"

namespace fieldreg {

namespace {

std::uint64_t checked_pow(int n, int d) {
  std::uint64_t size = 1;
  const std::uint64_t limit = std::uint64_t{1} << 40;  // 8 TiB of doubles is already absurd
  for (int l = 0; l < d; ++l) {
    if (size > limit / static_cast<std::uint64_t>(n))
      throw ValidationError("lattice size n^d overflows addressable memory");
    size *= static_cast<std::uint64_t>(n);
  }
  return size;
}

}  // namespace

Lattice::Lattice(int n, int d) : n_(n), d_(d) {
  if (n < 1) throw ValidationError("lattice: n must be >= 1");
  if (d < 1) throw ValidationError("lattice: d must be >= 1");
  size_ = checked_pow(n, d);
}

bool Lattice::contains(const MultiIndex& i) const {
  if (static_cast<int>(i.size()) != d_) return false;
  for (int c : i)
    if (c < 1 || c > n_) return false;
  return true;
}

std::uint64_t Lattice::linearize(const MultiIndex& i) const {
  if (!contains(i)) throw ValidationError("lattice: multi-index out of range");
  std::uint64_t k = 0;
  for (int l = 0; l < d_; ++l) k = k * static_cast<std::uint64_t>(n_) + static_cast<std::uint64_t>(i[l] - 1);
  return k;
}

void Lattice::delinearize(std::uint64_t k, int* coords) const {
  for (int l = d_ - 1; l >= 0; --l) {
    coords[l] = static_cast<int>(k % static_cast<std::uint64_t>(n_)) + 1;
    k /= static_cast<std::uint64_t>(n_);
  }
}

MultiIndex Lattice::delinearize(std::uint64_t k) const {
  if (k >= size_) throw ValidationError("lattice: linear index out of range");
  MultiIndex i(static_cast<std::size_t>(d_));
  delinearize(k, i.data());
  return i;
}

std::vector<double> Lattice::design_point(const MultiIndex& i) const {
  if (!contains(i)) throw ValidationError("lattice: multi-index out of range");
  std::vector<double> x(static_cast<std::size_t>(d_));
  for (int l = 0; l < d_; ++l) x[l] = static_cast<double>(i[l]) / static_cast<double>(n_);
  return x;
}

void Lattice::design_point(std::uint64_t k, double* out) const {
  for (int l = d_ - 1; l >= 0; --l) {
    out[l] = static_cast<double>(k % static_cast<std::uint64_t>(n_) + 1) / static_cast<double>(n_);
    k /= static_cast<std::uint64_t>(n_);
  }
}

bool Lattice::is_interior(const MultiIndex& i, int margin) const {
  for (int c : i) {
    int dist = std::min(c - 1, n_ - c);
    if (dist < margin) return false;
  }
  return true;
}

std::uint64_t Lattice::interior_count(int margin) const {
  long long per_axis = static_cast<long long>(n_) - 2LL * margin;
  if (per_axis <= 0) return 0;
  std::uint64_t count = 1;
  for (int l = 0; l < d_; ++l) count *= static_cast<std::uint64_t>(per_axis);
  return count;
}

std::vector<MultiIndex> Lattice::interior_indices(int margin) const {
  std::vector<MultiIndex> out;
  if (margin < 0) margin = 0;
  int lo = 1 + margin;
  int hi = n_ - margin;
  if (lo > hi) return out;
  out.reserve(static_cast<std::size_t>(interior_count(margin)));
  MultiIndex i(static_cast<std::size_t>(d_), lo);
  while (true) {
    out.push_back(i);
    int l = d_ - 1;
    while (l >= 0 && i[l] == hi) {
      i[l] = lo;
      --l;
    }
    if (l < 0) break;
    ++i[l];
  }
  return out;
}

}  // namespace fieldreg
