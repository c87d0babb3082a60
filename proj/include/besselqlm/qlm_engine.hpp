#pragma once

#include <algorithm>
#include <cmath>
#include <concepts>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace besselqlm {

/// u'' = F(u', u, x) together with its partial derivatives in u and u'.
struct NonlinearProblem {
  std::function<double(double du, double u, double x)> rhs;
  std::function<double(double du, double u, double x)> d_du;
  std::function<double(double du, double u, double x)> d_dslope;
};

/// Anything that can report u(x) and u'(x).
template <class S>
concept EvaluableSolution = requires(const S& s, double x) {
  { s.value(x) } -> std::convertible_to<double>;
  { s.slope(x) } -> std::convertible_to<double>;
};

/// a2 u'' + a1 u' + a0 u = g at one abscissa.
struct LinearCoefficients {
  double a2;
  double a1;
  double a0;
  double g;
};

/// The linear ODE whose solution is the next quasilinearization iterate:
///   u'' = F(p', p, x) + (u - p) F_u(p', p, x) + (u' - p') F_u'(p', p, x)
/// around a frozen previous iterate p.
template <EvaluableSolution S>
class LinearOde {
 public:
  LinearOde(const NonlinearProblem& problem, const S& prev) : problem_(&problem), prev_(&prev) {}

  LinearCoefficients at(double x) const {
    const double p = prev_->value(x);
    const double dp = prev_->slope(x);
    const double f = problem_->rhs(dp, p, x);
    const double fu = problem_->d_du(dp, p, x);
    const double fs = problem_->d_dslope(dp, p, x);
    return {1.0, -fs, -fu, f - p * fu - dp * fs};
  }

  const S& previous() const { return *prev_; }
  const NonlinearProblem& problem() const { return *problem_; }

 private:
  const NonlinearProblem* problem_;
  const S* prev_;
};

template <EvaluableSolution S>
LinearOde<S> linearize(const NonlinearProblem& problem, const S& prev) {
  return LinearOde<S>(problem, prev);
}

/// Sequence of iterates y_0 (the guess), y_1, ... and q_I = ||y_{I+1} - y_I||
/// for I >= 1. change_norms.size() == iterations_used - 1 once any solve ran.
template <class S>
struct QlmRun {
  std::vector<S> iterates;
  std::vector<double> change_norms;
  bool converged = false;
  int iterations_used = 0;

  const S& final() const { return iterates.back(); }
};

class QlmError : public std::runtime_error {
 public:
  QlmError(int iteration, const std::string& what)
      : std::runtime_error("QLM iteration " + std::to_string(iteration) + ": " + what),
        iteration_(iteration) {}
  int iteration() const { return iteration_; }

 private:
  int iteration_;
};

struct QlmOptions {
  int max_iter = 15;
  double tol = 1e-12;
};

/// sup_i |a(x_i) - b(x_i)|.
template <EvaluableSolution S>
double sup_change(const S& a, const S& b, std::span<const double> points) {
  double q = 0.0;
  for (double x : points) q = std::max(q, std::abs(a.value(x) - b.value(x)));
  return q;
}

/// Runs linearize -> solve until q_I < tol or max_iter linear solves.
///
/// `solve` receives the linearized ODE (which also exposes the previous
/// iterate) and must return the next iterate. Any exception it throws is
/// rethrown as QlmError carrying the 1-based iteration index.
template <EvaluableSolution S>
QlmRun<S> iterate(const NonlinearProblem& problem, S initial_guess,
                  const std::function<S(const LinearOde<S>&)>& solve,
                  std::span<const double> norm_points, const QlmOptions& opts = {}) {
  if (opts.max_iter < 1) throw std::invalid_argument("max_iter must be >= 1");
  if (!(opts.tol > 0.0)) throw std::invalid_argument("tolerance must be > 0");

  QlmRun<S> run;
  run.iterates.reserve(static_cast<std::size_t>(opts.max_iter) + 1);
  run.iterates.push_back(std::move(initial_guess));
  for (int it = 1; it <= opts.max_iter; ++it) {
    // Copy: push_back below may reallocate while the ODE still refers to prev.
    const S prev = run.iterates.back();
    S next = [&] {
      try {
        return solve(linearize(problem, prev));
      } catch (const QlmError&) {
        throw;
      } catch (const std::exception& e) {
        throw QlmError(it, e.what());
      }
    }();
    run.iterates.push_back(std::move(next));
    run.iterations_used = it;
    if (it >= 2) {
      const double q = sup_change(run.iterates[static_cast<std::size_t>(it)],
                                  run.iterates[static_cast<std::size_t>(it - 1)], norm_points);
      run.change_norms.push_back(q);
      if (q < opts.tol) {
        run.converged = true;
        break;
      }
    }
  }
  return run;
}

}  // namespace besselqlm
