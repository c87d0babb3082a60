#pragma once

#include <functional>
#include <optional>

namespace besselqlm {

/// Root of f in [a, b] by Brent's method; f(a) and f(b) must differ in sign.
/// Throws std::invalid_argument when they do not.
double brent_root(const std::function<double(double)>& f, double a, double b, double xtol,
                  int max_iter = 200);

struct Bracket {
  double lo;
  double hi;
};

/// First sub-interval of a uniform `samples`-point scan over [a, b] on which
/// f goes from positive to non-positive.
std::optional<Bracket> first_sign_change(const std::function<double(double)>& f, double a,
                                         double b, int samples);

}  // namespace besselqlm
