#include "besselqlm/roots.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <utility>

namespace besselqlm {

double brent_root(const std::function<double(double)>& f, double a, double b, double xtol,
                  int max_iter) {
  double fa = f(a);
  double fb = f(b);
  if (fa == 0.0) return a;
  if (fb == 0.0) return b;
  if ((fa > 0.0) == (fb > 0.0)) throw std::invalid_argument("brent_root: interval does not bracket a root");

  double c = a, fc = fa;
  double d = b - a, e = d;
  constexpr double eps = std::numeric_limits<double>::epsilon();
  for (int it = 0; it < max_iter; ++it) {
    if ((fb > 0.0) == (fc > 0.0)) {
      c = a;
      fc = fa;
      d = e = b - a;
    }
    if (std::abs(fc) < std::abs(fb)) {
      a = b;
      b = c;
      c = a;
      fa = fb;
      fb = fc;
      fc = fa;
    }
    const double tol1 = 2.0 * eps * std::abs(b) + 0.5 * xtol;
    const double xm = 0.5 * (c - b);
    if (std::abs(xm) <= tol1 || fb == 0.0) return b;
    if (std::abs(e) >= tol1 && std::abs(fa) > std::abs(fb)) {
      // Inverse quadratic interpolation, or secant when only two points differ.
      double p, q;
      const double s = fb / fa;
      if (a == c) {
        p = 2.0 * xm * s;
        q = 1.0 - s;
      } else {
        const double qa = fa / fc;
        const double r = fb / fc;
        p = s * (2.0 * xm * qa * (qa - r) - (b - a) * (r - 1.0));
        q = (qa - 1.0) * (r - 1.0) * (s - 1.0);
      }
      if (p > 0.0) q = -q;
      p = std::abs(p);
      if (2.0 * p < std::min(3.0 * xm * q - std::abs(tol1 * q), std::abs(e * q))) {
        e = d;
        d = p / q;
      } else {
        d = xm;
        e = d;
      }
    } else {
      d = xm;
      e = d;
    }
    a = b;
    fa = fb;
    b += (std::abs(d) > tol1) ? d : (xm > 0.0 ? tol1 : -tol1);
    fb = f(b);
  }
  return b;
}

std::optional<Bracket> first_sign_change(const std::function<double(double)>& f, double a,
                                         double b, int samples) {
  if (samples < 2) throw std::invalid_argument("first_sign_change needs at least two samples");
  double x_prev = a;
  double f_prev = f(a);
  for (int i = 1; i < samples; ++i) {
    const double x = a + (b - a) * static_cast<double>(i) / static_cast<double>(samples - 1);
    const double fx = f(x);
    if (f_prev > 0.0 && fx <= 0.0) return Bracket{x_prev, x};
    x_prev = x;
    f_prev = fx;
  }
  return std::nullopt;
}

}  // namespace besselqlm
