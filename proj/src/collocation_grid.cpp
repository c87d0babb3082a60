#include "besselqlm/collocation_grid.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>

namespace besselqlm {

std::vector<double> shifted_chebyshev_roots(int count) {
  if (count < 1) {
    throw std::invalid_argument("need at least one collocation point, got " +
                                std::to_string(count));
  }
  std::vector<double> t(static_cast<std::size_t>(count));
  const double k = count;
  for (int i = 0; i < count; ++i) {
    // cos decreases in i, so fill from the back to get ascending order.
    // (1 + cos a)/2 == cos^2(a/2) avoids cancellation next to t = 0.
    const double half_angle = (2.0 * i + 1.0) * std::numbers::pi / (4.0 * k);
    const double c = std::cos(half_angle);
    t[static_cast<std::size_t>(count - 1 - i)] = c * c;
  }
  return t;
}

CollocationGrid build_grid(const BasisSpec& spec, int count) {
  spec.validate();
  CollocationGrid g;
  g.unit_points = shifted_chebyshev_roots(count);
  g.domain_points.reserve(g.unit_points.size());
  for (double t : g.unit_points) g.domain_points.push_back(inverse_map(spec, t));
  g.spec = spec;
  g.placement = NodePlacement::Mapped;
  g.interval_end = std::numeric_limits<double>::infinity();
  return g;
}

CollocationGrid build_interval_grid(const BasisSpec& spec, int count, double interval_end) {
  spec.validate();
  if (!(interval_end > 0.0) || !std::isfinite(interval_end)) {
    throw std::invalid_argument("collocation interval end must be finite and positive");
  }
  CollocationGrid g;
  g.unit_points = shifted_chebyshev_roots(count);
  g.domain_points.reserve(g.unit_points.size());
  for (double t : g.unit_points) g.domain_points.push_back(interval_end * t);
  g.spec = spec;
  g.placement = NodePlacement::Interval;
  g.interval_end = interval_end;
  return g;
}

}  // namespace besselqlm
