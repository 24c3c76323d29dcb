#include "fieldreg/quadrature.hpp"

#include <cmath>
#include <vector>

#include "fieldreg/errors.hpp"

namespace fieldreg {

namespace {

struct SimpsonState {
  const std::function<double(double)>* f;
  int max_depth;
};

double simpson_recurse(const SimpsonState& st, double a, double b, double fa, double fm, double fb,
                       double whole, double eps, int depth) {
  const double m = 0.5 * (a + b);
  const double lm = 0.5 * (a + m);
  const double rm = 0.5 * (m + b);
  const double flm = (*st.f)(lm);
  const double frm = (*st.f)(rm);
  const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
  const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
  const double delta = left + right - whole;
  if (depth >= st.max_depth || std::fabs(delta) <= 15.0 * eps)
    return left + right + delta / 15.0;
  return simpson_recurse(st, a, m, fa, flm, fm, left, 0.5 * eps, depth + 1) +
         simpson_recurse(st, m, b, fm, frm, fb, right, 0.5 * eps, depth + 1);
}

}  // namespace

double adaptive_simpson(const std::function<double(double)>& f, double a, double b, double rel_tol,
                        int max_depth) {
  if (!(rel_tol > 0)) throw ValidationError("adaptive_simpson: rel_tol must be > 0");
  if (a == b) return 0.0;
  const double fa = f(a);
  const double fb = f(b);
  const double fm = f(0.5 * (a + b));
  const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
  // crude magnitude scale for converting the relative tolerance
  double scale = std::fabs(whole);
  const int probes = 8;
  double avg = 0.0;
  for (int i = 0; i < probes; ++i) avg += std::fabs(f(a + (b - a) * (i + 0.5) / probes));
  scale = std::max(scale, std::fabs(b - a) * avg / probes);
  const double eps = std::max(rel_tol * scale, 1e-300);
  SimpsonState st{&f, max_depth};
  return simpson_recurse(st, a, b, fa, fm, fb, whole, eps, 0);
}

double integrate_box(const std::function<double(const double*)>& f, const double* lo,
                     const double* hi, int d, double rel_tol) {
  if (d < 1) throw ValidationError("integrate_box: d must be >= 1");
  std::vector<double> point(static_cast<std::size_t>(d), 0.0);

  // integrate dimension `axis`, with point[0..axis-1] already fixed
  std::function<double(int, double)> level = [&](int axis, double tol) -> double {
    std::function<double(double)> g = [&](double x) -> double {
      point[static_cast<std::size_t>(axis)] = x;
      if (axis == d - 1) return f(point.data());
      return level(axis + 1, tol * 0.25);
    };
    return adaptive_simpson(g, lo[axis], hi[axis], tol);
  };
  return level(0, rel_tol);
}

double integrate_to_singular_origin(const std::function<double(double)>& f, double upper,
                                    double rel_tol) {
  if (upper <= 0) return 0.0;
  double total = 0.0;
  double hi = upper;
  for (int piece = 0; piece < 64; ++piece) {
    const double lo = hi * 0.5;
    const double part = adaptive_simpson(f, lo, hi, rel_tol);
    total += part;
    if (piece > 2 && std::fabs(part) < rel_tol * std::fabs(total)) break;
    hi = lo;
  }
  return total;
}

}  // namespace fieldreg
