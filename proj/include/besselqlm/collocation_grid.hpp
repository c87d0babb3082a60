#pragma once

#include <vector>

#include "besselqlm/bessel_basis.hpp"

namespace besselqlm {

/// How unit-interval roots are carried to collocation abscissae.
enum class NodePlacement {
  /// x = phi^{-1}(t): nodes spread over all of [0, inf).
  Mapped,
  /// x = X * t: nodes on the finite interval [0, X].
  Interval,
};

/// Collocation nodes, sorted ascending; unit_points in (0,1), domain_points in (0, inf).
struct CollocationGrid {
  std::vector<double> unit_points;
  std::vector<double> domain_points;
  BasisSpec spec;
  NodePlacement placement = NodePlacement::Mapped;
  /// X for Interval placement; +inf for Mapped.
  double interval_end = 0.0;

  int size() const { return static_cast<int>(domain_points.size()); }
};

/// Roots of T_K(2t - 1), ascending: t_i = (1 + cos((2i+1) pi / 2K)) / 2.
std::vector<double> shifted_chebyshev_roots(int count);

/// Shifted Chebyshev roots pulled back through the basis map.
CollocationGrid build_grid(const BasisSpec& spec, int count);

/// Shifted Chebyshev roots scaled onto (0, interval_end).
CollocationGrid build_interval_grid(const BasisSpec& spec, int count, double interval_end);

}  // namespace besselqlm
