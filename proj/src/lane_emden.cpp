#include "besselqlm/lane_emden.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include <Eigen/Dense>

#include "besselqlm/roots.hpp"

namespace besselqlm {

void LaneEmdenParams::validate() const {
  if (!(m >= 0.0 && m <= 5.0)) {
    std::ostringstream os;
    os << "polytropic index m must lie in [0, 5], got " << m;
    throw std::invalid_argument(os.str());
  }
}

TrialForm trial_form_for(MapKind kind) {
  return kind == MapKind::Rational ? TrialForm::RationalTrial : TrialForm::ExponentialTrial;
}

namespace {

std::shared_ptr<const BesselPolyTable> table_for(const BasisSpec& spec,
                                                 std::shared_ptr<const BesselPolyTable> table) {
  if (!table) return std::make_shared<const BesselPolyTable>(spec.order_n_max);
  if (table->order_n_max() != spec.order_n_max) {
    throw std::invalid_argument("Bessel table order does not match basis spec");
  }
  return table;
}

/// The coefficient-free part of the trial function.
TrialJet trial_base(TrialForm form, double x) {
  if (form == TrialForm::RationalTrial) return {1.0, 0.0, 0.0};
  const double d = x * x + 1.0;
  return {1.0 / d, -2.0 * x / (d * d), (6.0 * x * x - 2.0) / (d * d * d)};
}

/// Multiplies a basis jet (S, S', S'') by the trial prefactor.
TrialJet apply_prefactor(TrialForm form, double x, const BasisJet& s) {
  if (form == TrialForm::RationalTrial) {
    return {x * x * s.value, 2.0 * x * s.value + x * x * s.d1,
            2.0 * s.value + 4.0 * x * s.d1 + x * x * s.d2};
  }
  const double xp1 = x + 1.0;
  const double q = x * x / xp1;
  const double q1 = x * (x + 2.0) / (xp1 * xp1);
  const double q2 = 2.0 / (xp1 * xp1 * xp1);
  return {q * s.value, q1 * s.value + q * s.d1, q2 * s.value + 2.0 * q1 * s.d1 + q * s.d2};
}

bool is_integer(double p) { return std::floor(p) == p; }

}  // namespace

SpectralSolution::SpectralSolution(LaneEmdenParams params, BasisSpec spec,
                                   std::vector<double> coefficients,
                                   std::shared_ptr<const BesselPolyTable> table)
    : params_(params), spec_(spec), coefficients_(std::move(coefficients)) {
  params_.validate();
  spec_.validate();
  if (coefficients_.size() != static_cast<std::size_t>(spec_.size())) {
    throw std::invalid_argument("coefficient vector length must be N + 1");
  }
  table_ = table_for(spec_, std::move(table));
}

SpectralSolution SpectralSolution::zero(LaneEmdenParams params, BasisSpec spec,
                                        std::shared_ptr<const BesselPolyTable> table) {
  spec.validate();
  return SpectralSolution(params, spec, std::vector<double>(static_cast<std::size_t>(spec.size()), 0.0),
                          std::move(table));
}

TrialJet SpectralSolution::jet(double x) const {
  if (!(x >= 0.0)) throw std::domain_error("trial function evaluated at negative or NaN x");
  const MapValues map = domain_map(spec_, x);
  double t0 = 0.0, t1 = 0.0, t2 = 0.0;
  for (int n = 0; n < spec_.size(); ++n) {
    const double b = coefficients_[static_cast<std::size_t>(n)];
    if (b == 0.0) continue;
    t0 += b * table_->eval(n, map.phi, 0);
    t1 += b * table_->eval(n, map.phi, 1);
    t2 += b * table_->eval(n, map.phi, 2);
  }
  const BasisJet s{t0, t1 * map.dphi, t2 * map.dphi * map.dphi + t1 * map.d2phi};
  const TrialForm form = trial_form();
  const TrialJet base = trial_base(form, x);
  const TrialJet var = apply_prefactor(form, x, s);
  return {base.value + var.value, base.d1 + var.d1, base.d2 + var.d2};
}

double SpectralSolution::eval(double x, int deriv) const {
  if (deriv < 0 || deriv > 2) {
    throw std::invalid_argument("trial derivative order must be 0, 1 or 2, got " +
                                std::to_string(deriv));
  }
  const TrialJet j = jet(x);
  return deriv == 0 ? j.value : (deriv == 1 ? j.d1 : j.d2);
}

double eval_trial(const SpectralSolution& sol, double x, int deriv) { return sol.eval(x, deriv); }

double signed_pow(double y, double p) { return std::copysign(std::pow(std::abs(y), p), y); }

double lane_emden_power(double y, double p) {
  if (is_integer(p)) return std::pow(y, p);
  return signed_pow(y, p);
}

double lane_emden_power_slope(double y, double m) {
  if (m == 0.0) return 0.0;
  if (is_integer(m)) return std::pow(y, m - 1.0);
  return std::pow(std::abs(y), m - 1.0);
}

NonlinearProblem lane_emden_problem(const LaneEmdenParams& params) {
  params.validate();
  const double m = params.m;
  NonlinearProblem p;
  p.rhs = [m](double du, double u, double x) { return -2.0 * du / x - lane_emden_power(u, m); };
  p.d_du = [m](double, double u, double) { return -m * lane_emden_power_slope(u, m); };
  p.d_dslope = [](double, double, double x) { return -2.0 / x; };
  return p;
}

double qlm_residual(const SpectralSolution& sol_next, const SpectralSolution& sol_prev, double x) {
  const double m = sol_next.params().m;
  const TrialJet next = sol_next.jet(x);
  const double prev = sol_prev.value(x);
  return x * next.d2 + 2.0 * next.d1 - (m - 1.0) * x * lane_emden_power(prev, m) +
         m * x * next.value * lane_emden_power_slope(prev, m);
}

namespace {

void check_compatible(const SpectralSolution& prev, const CollocationGrid& grid) {
  const BasisSpec& a = prev.spec();
  const BasisSpec& b = grid.spec;
  if (a.kind != b.kind || a.order_n_max != b.order_n_max || a.scale_L != b.scale_L) {
    throw std::invalid_argument("collocation grid and previous iterate use different bases");
  }
  if (grid.size() != a.size()) {
    throw std::invalid_argument("collocation grid has " + std::to_string(grid.size()) +
                                " points but the basis has " + std::to_string(a.size()) +
                                " members");
  }
}

/// Column j of the trial expansion (prefactor times basis member j) at every node.
std::vector<std::vector<TrialJet>> trial_columns(const CollocationGrid& grid,
                                                 const BesselPolyTable& table) {
  const TrialForm form = trial_form_for(grid.spec.kind);
  std::vector<std::vector<TrialJet>> cols(grid.domain_points.size());
  for (std::size_t i = 0; i < grid.domain_points.size(); ++i) {
    const double x = grid.domain_points[i];
    cols[i].reserve(static_cast<std::size_t>(grid.spec.size()));
    for (int n = 0; n < grid.spec.size(); ++n) {
      cols[i].push_back(apply_prefactor(form, x, eval_basis_jet(grid.spec, table, n, x)));
    }
  }
  return cols;
}

/// Solves A c = r with column equilibration; returns c and the condition estimate.
std::vector<double> equilibrated_lu_solve(const Eigen::MatrixXd& A, const Eigen::VectorXd& r,
                                          double& condition) {
  const Eigen::Index n = A.cols();
  Eigen::VectorXd scale(n);
  for (Eigen::Index j = 0; j < n; ++j) {
    const double c = A.col(j).cwiseAbs().maxCoeff();
    if (!(c > 0.0) || !std::isfinite(c)) {
      throw CollocationError("collocation column " + std::to_string(j) + " is zero or not finite",
                             std::numeric_limits<double>::infinity());
    }
    scale(j) = 1.0 / c;
  }
  const Eigen::MatrixXd As = A * scale.asDiagonal();
  const Eigen::PartialPivLU<Eigen::MatrixXd> lu(As);
  const double rcond = lu.rcond();
  condition = rcond > 0.0 ? 1.0 / rcond : std::numeric_limits<double>::infinity();
  const Eigen::MatrixXd& packed = lu.matrixLU();
  for (Eigen::Index j = 0; j < n; ++j) {
    if (packed(j, j) == 0.0) {
      throw CollocationError("collocation matrix is singular", condition);
    }
  }
  const Eigen::VectorXd y = lu.solve(r);
  const Eigen::VectorXd c = scale.asDiagonal() * y;
  if (!c.allFinite()) throw CollocationError("collocation solve produced non-finite values", condition);
  return {c.data(), c.data() + n};
}

SpectralSolution assemble_with_columns(const SpectralSolution& prev, const CollocationGrid& grid,
                                       const std::vector<std::vector<TrialJet>>& cols,
                                       CollocationReport* report) {
  const NonlinearProblem problem = lane_emden_problem(prev.params());
  const LinearOde<SpectralSolution> ode = linearize(problem, prev);
  const TrialForm form = prev.trial_form();
  const Eigen::Index size = grid.size();
  const double m = prev.params().m;

  // Rows are the linearized operator multiplied through by x, which is the
  // form the residual takes (no 1/x singularity, and x > 0 at every node).
  Eigen::MatrixXd A(size, size);
  Eigen::VectorXd r(size);
  for (Eigen::Index i = 0; i < size; ++i) {
    const double x = grid.domain_points[static_cast<std::size_t>(i)];
    const LinearCoefficients c = ode.at(x);
    // The generic g = F - p F_u - p' F_u' collapses to (m-1) P(p, m); using
    // the closed form keeps the m = 1 system independent of prev bit for bit.
    const double g_closed = (m - 1.0) * lane_emden_power(prev.value(x), m);
    const TrialJet base = trial_base(form, x);
    for (Eigen::Index n = 0; n < size; ++n) {
      const TrialJet& g = cols[static_cast<std::size_t>(i)][static_cast<std::size_t>(n)];
      A(i, n) = x * (c.a2 * g.d2 + c.a1 * g.d1 + c.a0 * g.value);
    }
    r(i) = x * (g_closed - (c.a2 * base.d2 + c.a1 * base.d1 + c.a0 * base.value));
  }

  double condition = 0.0;
  std::vector<double> coeffs = equilibrated_lu_solve(A, r, condition);
  SpectralSolution next(prev.params(), prev.spec(), std::move(coeffs), prev.table());

  // Normwise backward error of the computed coefficients, measured with the
  // residual evaluated afresh from the trial function rather than from A c.
  const double a_norm = A.cwiseAbs().rowwise().sum().maxCoeff();
  const Eigen::Map<const Eigen::VectorXd> cv(next.coefficients().data(), size);
  const double scale = a_norm * cv.cwiseAbs().maxCoeff() + r.cwiseAbs().maxCoeff();
  double res = 0.0;
  for (double x : grid.domain_points) res = std::max(res, std::abs(qlm_residual(next, prev, x)));
  if (report) *report = {condition, res, a_norm};
  if (!(res <= 1e-8 * scale)) {
    std::ostringstream os;
    os << "collocation residual " << res << " exceeds 1e-8*(||A|| ||c|| + ||r||) = " << 1e-8 * scale
       << " (condition estimate " << condition << ")";
    throw CollocationError(os.str(), condition);
  }
  return next;
}

}  // namespace

SpectralSolution assemble_and_solve(const SpectralSolution& prev, const CollocationGrid& grid,
                                    CollocationReport* report) {
  check_compatible(prev, grid);
  return assemble_with_columns(prev, grid, trial_columns(grid, *prev.table()), report);
}

namespace {

/// Coefficients whose trial function equals 1 at every collocation node.
SpectralSolution interpolated_constant(const LaneEmdenParams& params, const CollocationGrid& grid,
                                       const std::vector<std::vector<TrialJet>>& cols,
                                       std::shared_ptr<const BesselPolyTable> table) {
  const TrialForm form = trial_form_for(grid.spec.kind);
  const Eigen::Index size = grid.size();
  Eigen::MatrixXd A(size, size);
  Eigen::VectorXd r(size);
  for (Eigen::Index i = 0; i < size; ++i) {
    const double x = grid.domain_points[static_cast<std::size_t>(i)];
    for (Eigen::Index n = 0; n < size; ++n) {
      A(i, n) = cols[static_cast<std::size_t>(i)][static_cast<std::size_t>(n)].value;
    }
    r(i) = 1.0 - trial_base(form, x).value;
  }
  double condition = 0.0;
  return SpectralSolution(params, grid.spec, equilibrated_lu_solve(A, r, condition),
                          std::move(table));
}

}  // namespace

namespace {

LaneEmdenRun run_qlm(const CollocationGrid& grid, const std::vector<std::vector<TrialJet>>& cols,
                     SpectralSolution start, int max_iter, double tol, double condition_warning) {
  LaneEmdenRun run;
  run.grid = grid;
  const std::function<SpectralSolution(const LinearOde<SpectralSolution>&)> step =
      [&](const LinearOde<SpectralSolution>& ode) {
        CollocationReport rep;
        SpectralSolution next = assemble_with_columns(ode.previous(), grid, cols, &rep);
        run.condition_estimates.push_back(rep.condition_estimate);
        return next;
      };
  const LaneEmdenParams params = start.params();
  run.qlm = iterate(lane_emden_problem(params), std::move(start), step,
                    std::span<const double>(grid.domain_points), QlmOptions{max_iter, tol});

  const double worst =
      run.condition_estimates.empty()
          ? 0.0
          : *std::max_element(run.condition_estimates.begin(), run.condition_estimates.end());
  if (worst > condition_warning || grid.spec.order_n_max > kWarnOrder) {
    std::ostringstream os;
    os << "collocation matrix is ill-conditioned (N = " << grid.spec.order_n_max
       << ", condition estimate " << worst << ")";
    run.warnings.push_back(os.str());
  }
  return run;
}

SpectralSolution initial_iterate(const LaneEmdenParams& params, const CollocationGrid& grid,
                                 const std::vector<std::vector<TrialJet>>& cols,
                                 std::shared_ptr<const BesselPolyTable> table, InitialGuess guess) {
  if (guess == InitialGuess::ZeroCoefficients) return SpectralSolution::zero(params, grid.spec, table);
  return interpolated_constant(params, grid, cols, std::move(table));
}

/// Estimate of the first zero from a solution computed on [0, X]: the root
/// inside the interval if there is one, else a Newton step from x = X.
double estimate_first_zero(const SpectralSolution& sol, double X) {
  const auto f = [&](double x) { return sol.value(x); };
  if (auto br = first_sign_change(f, 0.0, X, 2001)) return brent_root(f, br->lo, br->hi, 1e-13);
  const TrialJet j = sol.jet(X);
  if (!(j.d1 < 0.0) || !(j.value > 0.0)) return std::numeric_limits<double>::infinity();
  return X - j.value / j.d1;
}

}  // namespace

LaneEmdenRun solve_on_grid(const LaneEmdenParams& params, const CollocationGrid& grid, int max_iter,
                           double tol, InitialGuess guess, double condition_warning) {
  params.validate();
  grid.spec.validate();
  auto table = std::make_shared<const BesselPolyTable>(grid.spec.order_n_max);
  const auto cols = trial_columns(grid, *table);
  return run_qlm(grid, cols, initial_iterate(params, grid, cols, table, guess), max_iter, tol,
                 condition_warning);
}

LaneEmdenRun solve_on_grid_from(const CollocationGrid& grid, SpectralSolution start, int max_iter,
                                double tol, double condition_warning) {
  check_compatible(start, grid);
  const auto cols = trial_columns(grid, *start.table());
  return run_qlm(grid, cols, std::move(start), max_iter, tol, condition_warning);
}

LaneEmdenRun solve_lane_emden(const LaneEmdenParams& params, const BasisSpec& spec, int K,
                              int max_iter, double tol, const SolverOptions& opts) {
  params.validate();
  spec.validate();
  if (K != spec.size()) {
    throw std::invalid_argument("collocation point count K must equal N + 1");
  }
  if (opts.placement == NodePlacement::Mapped) {
    return solve_on_grid(params, build_grid(spec, K), max_iter, tol, opts.initial_guess,
                         opts.condition_warning);
  }
  if (opts.interval_end) {
    return solve_on_grid(params, build_interval_grid(spec, K, *opts.interval_end), max_iter, tol,
                         opts.initial_guess, opts.condition_warning);
  }
  if (!(opts.zero_fraction > 0.0 && opts.zero_fraction < 1.0)) {
    throw std::invalid_argument("zero_fraction must lie in (0, 1)");
  }
  if (opts.max_tracking_passes < 1) throw std::invalid_argument("max_tracking_passes must be >= 1");

  // Continuation in the interval end: each pass starts from the previous
  // solution and moves X towards zero_fraction times the current zero estimate,
  // growing by at most kGrowth per pass.
  constexpr double kStart = 2.0;
  constexpr double kGrowth = 1.5;
  constexpr double kSettled = 1e-5;
  constexpr double kPassTolerance = 1e-4;
  constexpr int kPassIterations = 15;
  constexpr double kPassStop = 1e-11;
  auto table = std::make_shared<const BesselPolyTable>(spec.order_n_max);
  SpectralSolution current = SpectralSolution::zero(params, spec, table);
  double X = std::min(kStart, opts.max_interval_end);
  double X_good = 0.0;
  int passes = 0;
  bool capped = false;
  for (; passes < opts.max_tracking_passes; ++passes) {
    // A failed pass (a blown-up extrapolation of the warm start, typically)
    // is retried on an interval halfway back to the last good one.
    std::optional<SpectralSolution> solved;
    for (int retry = 0; retry < 8 && !solved; ++retry) {
      try {
        const LaneEmdenRun pass = solve_on_grid_from(build_interval_grid(spec, K, X), current,
                                                     kPassIterations, kPassStop,
                                                     opts.condition_warning);
        const auto& q = pass.qlm.change_norms;
        if (q.empty() || !(q.back() <= kPassTolerance)) {
          throw std::runtime_error("tracking pass did not converge");
        }
        solved = pass.solution();
      } catch (const std::exception&) {
        if (retry == 7 || X_good == 0.0) throw;
        X = X_good + 0.5 * (X - X_good);
      }
    }
    current = *solved;
    X_good = X;
    const double z = estimate_first_zero(current, X);
    double next = std::min(kGrowth * X, opts.zero_fraction * z);
    if (next >= opts.max_interval_end) {
      next = opts.max_interval_end;
      capped = true;
    }
    const bool settled = std::abs(next - X) <= kSettled * X;
    X = next;
    if (settled) break;
  }

  const CollocationGrid grid = build_interval_grid(spec, K, X);
  std::vector<std::string> notes;
  if (passes == opts.max_tracking_passes) {
    notes.push_back("interval tracking did not settle within " +
                    std::to_string(opts.max_tracking_passes) + " passes");
  }
  if (capped) {
    std::ostringstream os;
    os << "no first zero found below x = " << opts.max_interval_end;
    notes.push_back(os.str());
  }

  LaneEmdenRun run;
  bool cold_ok = false;
  try {
    run = solve_on_grid(params, grid, max_iter, tol, opts.initial_guess, opts.condition_warning);
    const double z_cold = estimate_first_zero(run.solution(), X);
    const double z_warm = estimate_first_zero(current, X);
    cold_ok = run.qlm.converged || std::abs(z_cold - z_warm) <= 1e-8 * z_warm ||
              (std::isinf(z_cold) && std::isinf(z_warm));
  } catch (const std::exception&) {
    cold_ok = false;
  }
  if (!cold_ok) {
    run = solve_on_grid_from(grid, current, max_iter, tol, opts.condition_warning);
    run.warm_started = true;
    notes.push_back("QLM from the initial guess did not converge on the tracked interval; "
                    "restarted from the tracking solution");
  }
  run.tracking_passes = passes + (passes < opts.max_tracking_passes ? 1 : 0);
  run.warnings.insert(run.warnings.end(), notes.begin(), notes.end());
  return run;
}

}  // namespace besselqlm
