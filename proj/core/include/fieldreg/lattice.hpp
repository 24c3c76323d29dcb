#pragma once

#include <cstdint>
#include <vector>

namespace fieldreg {

/// Multi-index on the cubic lattice {1,...,n}^d, 1-based per axis.
using MultiIndex = std::vector<int>;

/// The index set {1,...,n}^d with a lexicographic linearization
/// (first coordinate most significant, linear index 0-based).
class Lattice {
 public:
  Lattice(int n, int d);

  int n() const { return n_; }
  int d() const { return d_; }
  std::uint64_t size() const { return size_; }

  bool contains(const MultiIndex& i) const;

  /// 0-based linear index; ordering agrees with the lexicographic order
  /// on multi-indices.
  std::uint64_t linearize(const MultiIndex& i) const;
  MultiIndex delinearize(std::uint64_t k) const;
  void delinearize(std::uint64_t k, int* coords) const;

  /// Design point i/n, coordinates in (0,1].
  std::vector<double> design_point(const MultiIndex& i) const;
  void design_point(std::uint64_t k, double* out) const;

  /// Indices at max-norm distance >= margin from the lattice boundary.
  /// Cardinality is max(0, n - 2*margin)^d.
  std::vector<MultiIndex> interior_indices(int margin) const;
  std::uint64_t interior_count(int margin) const;
  bool is_interior(const MultiIndex& i, int margin) const;

 private:
  int n_;
  int d_;
  std::uint64_t size_;
};

}  // namespace fieldreg
