#include "besselqlm/oracle.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <sstream>

#include <boost/numeric/odeint.hpp>

#include "besselqlm/lane_emden.hpp"

namespace besselqlm {

namespace {

using State = std::array<double, 2>;
namespace odeint = boost::numeric::odeint;

struct LaneEmdenRhs {
  double m;
  void operator()(const State& s, State& ds, double x) const {
    ds[0] = s[1];
    ds[1] = -2.0 * s[1] / x - lane_emden_power(s[0], m);
  }
};

void check_tolerance(double tol) {
  if (!(tol >= 1e-13 && tol <= 1e-6)) {
    std::ostringstream os;
    os << "oracle tolerance must lie in [1e-13, 1e-6], got " << tol;
    throw std::invalid_argument(os.str());
  }
}

OracleTrajectory run(double m, double x_max, double tol, std::span<const double> output_points,
                     double event_width, bool stop_at_zero) {
  LaneEmdenParams{m}.validate();
  check_tolerance(tol);
  if (!(x_max > kOracleStart)) throw std::invalid_argument("oracle x_max must exceed 0.01");

  std::vector<double> pending(output_points.begin(), output_points.end());
  std::sort(pending.begin(), pending.end());
  auto next_out = std::lower_bound(pending.begin(), pending.end(), kOracleStart);

  const LaneEmdenRhs rhs{m};
  auto stepper = odeint::make_dense_output(tol, tol, odeint::runge_kutta_dopri5<State>());
  const SeriesValue s0 = series_start(m, kOracleStart);
  stepper.initialize(State{s0.y, s0.yprime}, kOracleStart, 1e-3);

  OracleTrajectory traj;
  traj.m = m;
  traj.tol = tol;
  auto record = [&](double x, const State& s) {
    traj.nodes.push_back(x);
    traj.y_values.push_back(s[0]);
    traj.yprime_values.push_back(s[1]);
  };
  record(kOracleStart, State{s0.y, s0.yprime});

  State probe;
  while (stepper.current_time() < x_max) {
    const double x_prev = stepper.current_time();
    const double y_prev = stepper.current_state()[0];
    try {
      stepper.do_step(rhs);
    } catch (const odeint::step_adjustment_error&) {
      throw OracleError("oracle step size underflow", x_prev);
    }
    const double x_now = std::min(stepper.current_time(), x_max);
    if (!(stepper.current_time() - x_prev > 16.0 * std::numeric_limits<double>::epsilon() * x_prev)) {
      std::ostringstream os;
      os << "oracle step size underflow at x = " << x_prev;
      throw OracleError(os.str(), x_prev);
    }

    // Event: first sign change of y, bisected on the dense output.
    double x_end = x_now;
    if (!traj.first_zero) {
      stepper.calc_state(x_now, probe);
      if (y_prev > 0.0 && probe[0] <= 0.0) {
        double lo = x_prev, hi = x_now;
        while (hi - lo > event_width) {
          const double mid = 0.5 * (lo + hi);
          stepper.calc_state(mid, probe);
          (probe[0] > 0.0 ? lo : hi) = mid;
        }
        traj.first_zero = 0.5 * (lo + hi);
        if (stop_at_zero) x_end = *traj.first_zero;
      }
    }

    for (; next_out != pending.end() && *next_out <= x_end; ++next_out) {
      if (*next_out <= x_prev) continue;
      stepper.calc_state(*next_out, probe);
      if (*next_out < x_end) record(*next_out, probe);
    }
    stepper.calc_state(x_end, probe);
    record(x_end, probe);
    if (stop_at_zero && traj.first_zero) break;
  }
  return traj;
}

}  // namespace

SeriesValue series_start(double m, double x0) {
  if (!(x0 > 0.0 && x0 <= kOracleStart)) {
    std::ostringstream os;
    os << "series start offset must lie in (0, 0.01], got " << x0;
    throw std::invalid_argument(os.str());
  }
  const double x2 = x0 * x0;
  return {1.0 - x2 / 6.0 + m * x2 * x2 / 120.0, -x0 / 3.0 + m * x2 * x0 / 30.0};
}

OracleTrajectory integrate(double m, double x_max, double tol,
                           std::span<const double> output_points) {
  return run(m, x_max, tol, output_points, 1e-12, std::floor(m) != m);
}

double oracle_first_zero(double m, double tol) {
  if (m == 5.0) throw std::invalid_argument("the m = 5 profile has no first zero");
  LaneEmdenParams{m}.validate();
  if (!(tol > 0.0)) throw std::invalid_argument("oracle tolerance must be positive");
  constexpr double kSafetyBound = 50.0;
  const double step_tol = std::clamp(tol, 1e-13, 1e-6);
  const OracleTrajectory traj = run(m, kSafetyBound, step_tol, {}, std::min(tol, 1e-12), true);
  if (!traj.first_zero) {
    throw std::runtime_error("no sign change of y below x = 50");
  }
  return *traj.first_zero;
}

}  // namespace besselqlm
