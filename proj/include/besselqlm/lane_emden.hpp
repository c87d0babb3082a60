#pragma once

#include <limits>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "besselqlm/bessel_basis.hpp"
#include "besselqlm/collocation_grid.hpp"
#include "besselqlm/qlm_engine.hpp"

namespace besselqlm {

/// Polytropic index m of y'' + (2/x) y' + y^m = 0, y(0) = 1, y'(0) = 0.
struct LaneEmdenParams {
  double m = 0.0;
  /// Throws std::invalid_argument unless 0 <= m <= 5.
  void validate() const;
};

/// Prefactors that embed y(0) = 1, y'(0) = 0 in every coefficient vector:
///   RationalTrial:    u(x) = 1 + x^2 sum b_n RB_n(x)
///   ExponentialTrial: u(x) = 1/(x^2+1) + x^2/(x+1) sum c_n EB_n(x)
enum class TrialForm { RationalTrial, ExponentialTrial };

TrialForm trial_form_for(MapKind kind);

/// u, u', u'' at one abscissa.
struct TrialJet {
  double value;
  double d1;
  double d2;
};

class SpectralSolution {
 public:
  SpectralSolution(LaneEmdenParams params, BasisSpec spec, std::vector<double> coefficients,
                   std::shared_ptr<const BesselPolyTable> table = nullptr);

  /// All-zero coefficients: u = 1 (rational) or 1/(x^2+1) (exponential).
  static SpectralSolution zero(LaneEmdenParams params, BasisSpec spec,
                               std::shared_ptr<const BesselPolyTable> table = nullptr);

  TrialJet jet(double x) const;
  /// deriv in {0,1,2}.
  double eval(double x, int deriv) const;
  double value(double x) const { return eval(x, 0); }
  double slope(double x) const { return eval(x, 1); }

  const LaneEmdenParams& params() const { return params_; }
  const BasisSpec& spec() const { return spec_; }
  const std::vector<double>& coefficients() const { return coefficients_; }
  TrialForm trial_form() const { return trial_form_for(spec_.kind); }
  const std::shared_ptr<const BesselPolyTable>& table() const { return table_; }

 private:
  LaneEmdenParams params_;
  BasisSpec spec_;
  std::vector<double> coefficients_;
  std::shared_ptr<const BesselPolyTable> table_;
};

double eval_trial(const SpectralSolution& sol, double x, int deriv);

/// sign(y) |y|^p.
double signed_pow(double y, double p);

/// y^p: the ordinary power for integer p, signed_pow otherwise.
double lane_emden_power(double y, double p);

/// d/dy lane_emden_power(y, m) divided by m: y^(m-1) for integer m,
/// |y|^(m-1) otherwise. Zero when m == 0.
double lane_emden_power_slope(double y, double m);

/// The Lane-Emden right-hand side u'' = -2u'/x - y^m with its partials.
NonlinearProblem lane_emden_problem(const LaneEmdenParams& params);

/// x u+'' + 2 u+' - (m-1) x P(u-, m) + m x u+ D(u-, m): the linearized
/// equation around sol_prev, evaluated on sol_next. P = lane_emden_power,
/// D = lane_emden_power_slope.
double qlm_residual(const SpectralSolution& sol_next, const SpectralSolution& sol_prev, double x);

class CollocationError : public std::runtime_error {
 public:
  CollocationError(const std::string& what, double condition_estimate)
      : std::runtime_error(what), condition_estimate_(condition_estimate) {}
  double condition_estimate() const { return condition_estimate_; }

 private:
  double condition_estimate_;
};

struct CollocationReport {
  /// Estimated 1-norm condition number of the column-equilibrated system.
  double condition_estimate = 0.0;
  /// max_i |qlm_residual(new, prev, x_i)|.
  double residual_max = 0.0;
  /// Infinity norm of the assembled matrix.
  double matrix_norm = 0.0;
};

/// Collocates the linearized equation around `prev` on `grid` and solves the
/// resulting (N+1)x(N+1) system by LU with partial pivoting.
SpectralSolution assemble_and_solve(const SpectralSolution& prev, const CollocationGrid& grid,
                                    CollocationReport* report = nullptr);

/// Truncation order above which every solve carries a conditioning warning.
inline constexpr int kWarnOrder = 60;

enum class InitialGuess {
  /// All coefficients zero.
  ZeroCoefficients,
  /// Coefficients that interpolate y = 1 at the collocation nodes.
  InterpolatedConstant,
};

struct SolverOptions {
  NodePlacement placement = NodePlacement::Interval;
  /// Fixed right end of the collocation interval; unset means track it.
  std::optional<double> interval_end;
  InitialGuess initial_guess = InitialGuess::ZeroCoefficients;
  /// Interval end as a fraction of the tracked first zero.
  double zero_fraction = 0.95;
  /// Cap on interval-tracking passes.
  int max_tracking_passes = 40;
  /// Largest interval end tracking may reach before giving up on a zero.
  double max_interval_end = 40.0;
  /// Condition estimates above this are reported as warnings. Runs with
  /// N > kWarnOrder warn regardless.
  double condition_warning = std::numeric_limits<double>::infinity();
};

struct LaneEmdenRun {
  QlmRun<SpectralSolution> qlm;
  CollocationGrid grid;
  std::vector<double> condition_estimates;
  std::vector<std::string> warnings;
  /// Interval-tracking passes before the final run (0 for a fixed grid).
  int tracking_passes = 0;
  /// True when the final run started from the last tracking solution
  /// instead of the configured initial guess.
  bool warm_started = false;

  const SpectralSolution& solution() const { return qlm.final(); }
};

/// One QLM run on a given grid.
LaneEmdenRun solve_on_grid(const LaneEmdenParams& params, const CollocationGrid& grid, int max_iter,
                           double tol, InitialGuess guess = InitialGuess::ZeroCoefficients,
                           double condition_warning = std::numeric_limits<double>::infinity());

/// One QLM run on a given grid from an explicit starting iterate.
LaneEmdenRun solve_on_grid_from(const CollocationGrid& grid, SpectralSolution start, int max_iter,
                                double tol,
                                double condition_warning = std::numeric_limits<double>::infinity());

/// Full pipeline: builds the grid (tracking the interval end when not fixed)
/// and runs QLM from the configured initial guess. K must equal N + 1.
LaneEmdenRun solve_lane_emden(const LaneEmdenParams& params, const BasisSpec& spec, int K,
                              int max_iter, double tol, const SolverOptions& opts = {});

}  // namespace besselqlm
