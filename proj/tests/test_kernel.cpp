#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <fstream>

#include "fieldreg/errors.hpp"
#include "fieldreg/kernel.hpp"
#include "support/oracles.hpp"

using namespace fieldreg;

TEST_CASE("pointwise evaluation") {
  const Kernel epa2 = Kernel::epanechnikov_paper(2);
  CHECK(epa2.evaluate({0.0, 0.0}) == 0.375);  // 3/8 at the origin
  CHECK(epa2.evaluate({2.0, 0.0}) == 0.0);
  CHECK(epa2.evaluate({0.9, 0.9}) == 0.0);  // outside the euclidean unit ball

  const Kernel epa2max = Kernel::epanechnikov_paper(2, RadialNorm::max);
  CHECK(epa2max.evaluate({0.9, 0.9}) == doctest::Approx(0.375 * (1.0 - 0.81)).epsilon(1e-12));

  const Kernel box1 = Kernel::box(1);
  CHECK(box1.evaluate({0.3}) == 0.5);
  CHECK(box1.evaluate({1.0}) == 0.5);  // closed support
  CHECK(box1.evaluate({1.0000001}) == 0.0);

  CHECK_THROWS_AS(box1.evaluate({0.1, 0.2}), ValidationError);
}

TEST_CASE("l2 moments against closed forms") {
  CHECK(Kernel::box(1).l2_moment() == doctest::Approx(0.5).epsilon(1e-9));
  CHECK(Kernel::box(2).l2_moment() == doctest::Approx(0.25).epsilon(1e-9));
  // standard 1-d Epanechnikov (3/4)(1-u^2): integral of squares is 3/5
  const Kernel epa1 = Kernel::epanechnikov_normalized(1);
  CHECK(epa1.evaluate({0.0}) == doctest::Approx(0.75).epsilon(1e-9));
  CHECK(epa1.l2_moment() == doctest::Approx(0.6).epsilon(1e-8));
  CHECK(Kernel::triangle(1).l2_moment() == doctest::Approx(2.0 / 3.0).epsilon(1e-8));
}

TEST_CASE("epanechnikov-paper d=2 l2 moment matches the frozen midpoint oracle") {
  const Kernel k = Kernel::epanechnikov_paper(2);
  // golden value recorded from a 4096^2-cell midpoint rule before the build
  const double golden = 0.147262155636945;
  CHECK(k.l2_moment() == doctest::Approx(golden).epsilon(1e-7));
  // cheaper oracle recomputed live
  const double live = oracle::midpoint_l2([&](const double* u) { return k.evaluate(u); }, 2, 1024);
  CHECK(k.l2_moment() == doctest::Approx(live).epsilon(1e-5));
}

TEST_CASE("l2 moment within 1e-5 of a 2^20-cell Riemann sum for d <= 2") {
  const Kernel k1 = Kernel::epanechnikov_normalized(1);
  const double r1 = oracle::midpoint_l2([&](const double* u) { return k1.evaluate(u); }, 1, 1 << 20);
  CHECK(k1.l2_moment() == doctest::Approx(r1).epsilon(1e-5));

  const Kernel k2 = Kernel::triangle(2);
  const double r2 = oracle::midpoint_l2([&](const double* u) { return k2.evaluate(u); }, 2, 1024);
  CHECK(k2.l2_moment() == doctest::Approx(r2).epsilon(1e-5));
}

TEST_CASE("normalized variant has unit mass") {
  CHECK(Kernel::epanechnikov_normalized(1).mass() == doctest::Approx(1.0).epsilon(1e-8));
  CHECK(Kernel::epanechnikov_normalized(2).mass() == doctest::Approx(1.0).epsilon(1e-8));
  CHECK(Kernel::epanechnikov_normalized(2, RadialNorm::max).mass() ==
        doctest::Approx(1.0).epsilon(1e-8));
  // the 3/8 variant does not integrate to 1 on d=2
  CHECK(Kernel::epanechnikov_paper(2).mass() ==
        doctest::Approx(3.0 * M_PI / 16.0).epsilon(1e-7));
}

TEST_CASE("built-in families satisfy their cached Lipschitz bound") {
  for (const Kernel& k : {Kernel::box(2), Kernel::epanechnikov_paper(2),
                          Kernel::epanechnikov_normalized(2), Kernel::triangle(2)}) {
    const auto rep = k.check_assumption_a1(64);
    CHECK(rep.lipschitz_measured <= k.lipschitz() * (1.0 + 1e-6) + 1e-9);
  }
}

TEST_CASE("assumption report: box passes every clause") {
  CHECK_THROWS_AS(Kernel::box(1).check_assumption_a1(4), ValidationError);
  const auto rep = Kernel::box(1).check_assumption_a1(32);
  CHECK(rep.mass_ok);
  CHECK(rep.symmetric_ok);
  CHECK(rep.nonnegative_ok);
  CHECK(rep.support_ok);
  CHECK(rep.lipschitz_ok);
  CHECK(rep.lower_bound_ok);
  CHECK(rep.min_on_cube == 0.5);
  CHECK(rep.max_on_cube == 0.5);
  CHECK(rep.all_pass());
}

TEST_CASE("assumption report: epanechnikov-paper fails the strict lower bound") {
  const auto rep = Kernel::epanechnikov_paper(2).check_assumption_a1(32);
  CHECK_FALSE(rep.lower_bound_ok);  // infimum 0 at the support boundary
  CHECK(rep.min_on_cube == 0.0);
  CHECK_FALSE(rep.mass_ok);  // 3/8 does not normalize on d=2
  CHECK(rep.symmetric_ok);
  CHECK(rep.nonnegative_ok);
  CHECK(rep.support_ok);
  CHECK_FALSE(rep.all_pass());
  CHECK(rep.to_string().find("FAIL") != std::string::npos);
}

TEST_CASE("assumption report: asymmetric table fails the symmetry clause") {
  // nodes -1, 0, 1 with one perturbed corner value
  const Kernel k = Kernel::custom_table(1, RadialNorm::euclidean, {{-1.0, 0.0, 1.0}},
                                        {0.5, 1.0, 0.25});
  const auto rep = k.check_assumption_a1(16);
  CHECK_FALSE(rep.symmetric_ok);
  CHECK(rep.max_symmetry_violation == doctest::Approx(0.25).epsilon(1e-12));
}

TEST_CASE("table kernels load from file and interpolate multilinearly") {
  const std::string path = "kernel_table_test.txt";
  {
    std::ofstream out(path);
    out << "2 euclidean\n";
    for (double a : {-1.0, 0.0, 1.0})
      for (double b : {-1.0, 0.0, 1.0}) out << a << " " << b << " " << (a * a + b * b) / 4 << "\n";
  }
  const Kernel k = Kernel::from_table_file(path);
  CHECK(k.dim() == 2);
  CHECK(k.evaluate({0.0, 0.0}) == 0.0);
  CHECK(k.evaluate({1.0, 1.0}) == 0.5);
  // multilinear between (0,0)=0 and (1,0)=0.25 along the first axis
  CHECK(k.evaluate({0.5, 0.0}) == doctest::Approx(0.125).epsilon(1e-12));
  CHECK(k.evaluate({1.5, 0.0}) == 0.0);
  std::remove(path.c_str());

  CHECK_THROWS_AS(Kernel::from_table_file("no_such_table_file.txt"), IoError);
}

TEST_CASE("scaled copies track moments") {
  const Kernel k = Kernel::epanechnikov_normalized(1);
  const Kernel k3 = k.scaled(3.0);
  CHECK(k3.evaluate({0.2}) == doctest::Approx(3.0 * k.evaluate({0.2})).epsilon(1e-14));
  CHECK(k3.mass() == doctest::Approx(3.0).epsilon(1e-8));
  CHECK(k3.l2_moment() == doctest::Approx(9.0 * 0.6).epsilon(1e-7));
}
