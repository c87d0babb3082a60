#pragma once

#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace besselqlm {

/// Reference Lane-Emden profile from an adaptive Runge-Kutta integration.
struct OracleTrajectory {
  double m = 0.0;
  /// Increasing abscissae: every accepted step end plus any requested
  /// output points, starting at the series-start offset.
  std::vector<double> nodes;
  std::vector<double> y_values;
  std::vector<double> yprime_values;
  /// Absent when y stays positive up to x_max.
  std::optional<double> first_zero;
  double tol = 0.0;
};

class OracleError : public std::runtime_error {
 public:
  OracleError(const std::string& what, double location)
      : std::runtime_error(what), location_(location) {}
  /// Abscissa at which the integration gave up.
  double location() const { return location_; }

 private:
  double location_;
};

struct SeriesValue {
  double y;
  double yprime;
};

/// Offset at which the integration starts.
inline constexpr double kOracleStart = 0.01;

/// Taylor start y = 1 - x0^2/6 + m x0^4/120, y' = -x0/3 + m x0^3/30.
/// Requires 0 < x0 <= 0.01.
SeriesValue series_start(double m, double x0);

/// Integrates y'' = -2y'/x - y^m from kOracleStart to x_max with an embedded
/// Dormand-Prince 5(4) pair, absolute and relative local tolerance `tol`.
///
/// The first sign change of y is located by bisection on the dense output to
/// 1e-12. For non-integer m the integration stops there; for integer m it
/// continues to x_max. `output_points` inside the integrated range are added
/// to the trajectory as dense-output samples.
OracleTrajectory integrate(double m, double x_max, double tol,
                           std::span<const double> output_points = {});

/// First zero of the Lane-Emden solution, refined to width `tol`. Requires
/// 0 <= m < 5 and a zero below x = 50.
double oracle_first_zero(double m, double tol);

}  // namespace besselqlm
