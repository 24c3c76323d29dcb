#include <doctest.h>

#include <set>

#include "fieldreg/errors.hpp"
#include "fieldreg/lattice.hpp"

using namespace fieldreg;

TEST_CASE("lattice cardinality") {
  CHECK(Lattice(3, 2).size() == 9);
  CHECK(Lattice(1, 5).size() == 1);
  CHECK(Lattice(256, 2).size() == 65536);
  CHECK(Lattice(1, 5).delinearize(0) == MultiIndex{1, 1, 1, 1, 1});
  CHECK_THROWS_AS(Lattice(0, 1), ValidationError);
  CHECK_THROWS_AS(Lattice(2, 0), ValidationError);
  CHECK_THROWS_AS(Lattice(1 << 20, 4), ValidationError);  // n^d overflow
}

TEST_CASE("design points are i/n") {
  const Lattice l1(4, 1);
  CHECK(l1.design_point(MultiIndex{2})[0] == 0.5);
  const Lattice l2(4, 2);
  const auto corner = l2.design_point(MultiIndex{4, 4});
  CHECK(corner[0] == 1.0);
  CHECK(corner[1] == 1.0);
  const Lattice l3(256, 2);
  const auto p = l3.design_point(MultiIndex{128, 64});
  CHECK(p[0] == 0.5);
  CHECK(p[1] == 0.25);
  CHECK_THROWS_AS(l1.design_point(MultiIndex{5}), ValidationError);
  CHECK_THROWS_AS(l1.design_point(MultiIndex{0}), ValidationError);
}

TEST_CASE("interior indices by max-norm distance to the boundary") {
  const Lattice l1(5, 1);
  auto in1 = l1.interior_indices(1);
  REQUIRE(in1.size() == 3);
  CHECK(in1[0] == MultiIndex{2});
  CHECK(in1[2] == MultiIndex{4});

  const Lattice l2(5, 2);
  auto in2 = l2.interior_indices(2);
  REQUIRE(in2.size() == 1);
  CHECK(in2[0] == MultiIndex{3, 3});

  CHECK(l1.interior_indices(3).empty());
  CHECK(l1.interior_indices(0).size() == 5);
}

TEST_CASE("interior count matches brute force for n <= 10, d <= 3") {
  for (int d = 1; d <= 3; ++d) {
    for (int n = 1; n <= 10; ++n) {
      const Lattice lat(n, d);
      for (int margin = 0; margin <= 5; ++margin) {
        const long long per_axis = static_cast<long long>(n) - 2LL * margin;
        std::uint64_t expected = per_axis <= 0 ? 0 : 1;
        for (int l = 0; l < d && expected; ++l) expected *= static_cast<std::uint64_t>(per_axis);
        CHECK(lat.interior_indices(margin).size() == expected);
        CHECK(lat.interior_count(margin) == expected);
      }
    }
  }
}

TEST_CASE("linearization is a lexicographic bijection") {
  const Lattice lat(4, 3);
  std::set<std::uint64_t> seen;
  MultiIndex prev;
  for (std::uint64_t k = 0; k < lat.size(); ++k) {
    const MultiIndex i = lat.delinearize(k);
    CHECK(lat.linearize(i) == k);
    seen.insert(k);
    if (!prev.empty()) CHECK(prev < i);  // vector operator< is lexicographic, coordinate 1 major
    prev = i;
  }
  CHECK(seen.size() == lat.size());
}
