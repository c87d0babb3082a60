#include "besselqlm/bessel_basis.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numeric>

#include <Eigen/Dense>
#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>

namespace besselqlm {

std::string to_string(MapKind kind) {
  return kind == MapKind::Rational ? "rational" : "exponential";
}

MapKind parse_map_kind(const std::string& name) {
  if (name == "rational") return MapKind::Rational;
  if (name == "exponential") return MapKind::Exponential;
  throw std::invalid_argument("unknown basis kind '" + name + "' (expected rational|exponential)");
}

void BasisSpec::validate() const {
  if (order_n_max < 0) {
    throw std::invalid_argument("basis order N must be >= 0, got " + std::to_string(order_n_max));
  }
  if (!(scale_L > 0.0) || !std::isfinite(scale_L)) {
    throw std::invalid_argument("map scale L must be a finite positive number");
  }
}

MapValues domain_map(const BasisSpec& spec, double x) {
  const double L = spec.scale_L;
  if (std::isinf(x)) return {1.0, 0.0, 0.0};
  if (spec.kind == MapKind::Rational) {
    const double s = x + L;
    return {x / s, L / (s * s), -2.0 * L / (s * s * s)};
  }
  const double e = std::exp(-x / L);
  return {-std::expm1(-x / L), e / L, -e / (L * L)};
}

double inverse_map(const BasisSpec& spec, double t) {
  if (t >= 1.0) return std::numeric_limits<double>::infinity();
  if (spec.kind == MapKind::Rational) return spec.scale_L * t / (1.0 - t);
  return -spec.scale_L * std::log1p(-t);
}

BesselPolyTable::BesselPolyTable(int order_n_max) : order_n_max_(order_n_max) {
  if (order_n_max < 0) throw std::invalid_argument("Bessel table order must be >= 0");
  terms_.resize(static_cast<std::size_t>(order_n_max) + 1);
  // 1/n! by running product; the r-recurrence below never forms a factorial.
  double inv_n_factorial = 1.0;
  for (int n = 0; n <= order_n_max; ++n) {
    if (n > 0) inv_n_factorial /= n;
    auto& row = terms_[static_cast<std::size_t>(n)];
    const int r_max = (order_n_max - n) / 2;
    row.reserve(static_cast<std::size_t>(r_max) + 1);
    double c = inv_n_factorial;
    for (int r = 0; r <= r_max; ++r) {
      row.push_back({c, 2 * r + n});
      c *= -1.0 / (static_cast<double>(r + 1) * static_cast<double>(n + r + 1));
    }
  }
}

std::span<const SeriesTerm> BesselPolyTable::terms(int n) const {
  if (n < 0 || n > order_n_max_) {
    throw std::out_of_range("basis index " + std::to_string(n) + " outside 0.." +
                            std::to_string(order_n_max_));
  }
  return terms_[static_cast<std::size_t>(n)];
}

double BesselPolyTable::eval(int n, double t, int order) const {
  if (order < 0 || order > 2) throw std::invalid_argument("derivative order must be 0, 1 or 2");
  const auto row = terms(n);
  const double h = 0.5 * t;
  const double s = h * h;
  // d^k/dt^k of c (t/2)^e is c * e!/(e-k)! * 2^-k * (t/2)^(e-k); p tracks (t/2)^(e-k).
  double sum = 0.0;
  double p = 0.0;
  bool started = false;
  for (const SeriesTerm& term : row) {
    const int e = term.exponent;
    if (e < order) continue;
    if (!started) {
      p = std::pow(h, e - order);
      started = true;
    } else {
      p *= s;
    }
    double falling = 1.0;
    for (int k = 0; k < order; ++k) falling *= 0.5 * (e - k);
    sum += term.coeff * falling * p;
  }
  return sum;
}

BesselPolyTable build_bessel_table(int order_n_max) { return BesselPolyTable(order_n_max); }

namespace {

void check_table(const BasisSpec& spec, const BesselPolyTable& table) {
  if (table.order_n_max() != spec.order_n_max) {
    throw std::invalid_argument("Bessel table order does not match basis spec");
  }
}

void check_point(double x) {
  if (!(x >= 0.0)) throw std::domain_error("basis evaluated at negative or NaN x");
}

}  // namespace

double eval_basis(const BasisSpec& spec, const BesselPolyTable& table, int n, double x) {
  check_table(spec, table);
  check_point(x);
  return table.eval(n, domain_map(spec, x).phi, 0);
}

BasisJet eval_basis_jet(const BasisSpec& spec, const BesselPolyTable& table, int n, double x) {
  check_table(spec, table);
  check_point(x);
  const MapValues m = domain_map(spec, x);
  const double b0 = table.eval(n, m.phi, 0);
  const double b1 = table.eval(n, m.phi, 1);
  const double b2 = table.eval(n, m.phi, 2);
  return {b0, b1 * m.dphi, b2 * m.dphi * m.dphi + b1 * m.d2phi};
}

double eval_basis_deriv(const BasisSpec& spec, const BesselPolyTable& table, int n, double x,
                        int order) {
  if (order != 1 && order != 2) {
    throw std::invalid_argument("basis derivative order must be 1 or 2, got " +
                                std::to_string(order));
  }
  const BasisJet j = eval_basis_jet(spec, table, n, x);
  return order == 1 ? j.d1 : j.d2;
}

double weight(const BasisSpec& spec, double x) {
  check_point(x);
  return domain_map(spec, x).dphi;
}

namespace {

using Kronrod = boost::math::quadrature::gauss_kronrod<double, 15>;
using Gauss = boost::math::quadrature::gauss<double, 7>;

/// Nodes and weights of a composite rule on [0,1] in the t variable.
struct CompositeRule {
  std::vector<double> nodes;
  std::vector<double> weights;
};

/// One G7/K15 panel: node list plus Kronrod and embedded Gauss weights.
struct Panel {
  double a;
  double b;
  std::array<double, 15> t{};
  std::array<double, 15> wk{};
  std::array<double, 15> wg{};

  Panel(double lo, double hi) : a(lo), b(hi) {
    const auto& xa = Kronrod::abscissa();
    const auto& kw = Kronrod::weights();
    const auto& gw = Gauss::weights();
    const double mid = 0.5 * (a + b);
    const double half = 0.5 * (b - a);
    t[0] = mid;
    wk[0] = half * kw[0];
    wg[0] = half * gw[0];
    std::size_t k = 1;
    for (std::size_t i = 1; i < xa.size(); ++i) {
      const double g = (i % 2 == 0) ? half * gw[i / 2] : 0.0;
      for (double sgn : {-1.0, 1.0}) {
        t[k] = mid + sgn * half * xa[i];
        wk[k] = half * kw[i];
        wg[k] = g;
        ++k;
      }
    }
  }
};

/// Values of every integrand the projection needs at one node: f*B_n and B_n^2.
using Integrands = std::function<void(double t, std::vector<double>& out)>;

/// Bisect panels until the Kronrod/Gauss gap of each integrand is below
/// tol * (its global L1 mass) * (panel width). Deterministic ordering.
CompositeRule adaptive_rule(const Integrands& g, std::size_t n_integrands, double tol) {
  constexpr int kMaxDepth = 40;
  constexpr std::size_t kMaxPanels = 20000;
  std::vector<double> vals(n_integrands);

  // Global L1 scale from a coarse uniform pass.
  std::vector<double> scale(n_integrands, 0.0);
  constexpr int kCoarse = 16;
  for (int p = 0; p < kCoarse; ++p) {
    const Panel panel(static_cast<double>(p) / kCoarse, static_cast<double>(p + 1) / kCoarse);
    for (std::size_t k = 0; k < panel.t.size(); ++k) {
      g(panel.t[k], vals);
      for (std::size_t j = 0; j < n_integrands; ++j) scale[j] += panel.wk[k] * std::abs(vals[j]);
    }
  }
  for (double& s : scale) s = std::max(s, std::numeric_limits<double>::min());

  CompositeRule rule;
  struct Pending {
    double a, b;
    int depth;
  };
  std::vector<Pending> stack{{0.0, 1.0, 0}};
  std::size_t accepted = 0;
  while (!stack.empty()) {
    const Pending cur = stack.back();
    stack.pop_back();
    const Panel panel(cur.a, cur.b);
    std::vector<double> kr(n_integrands, 0.0), ga(n_integrands, 0.0);
    for (std::size_t k = 0; k < panel.t.size(); ++k) {
      g(panel.t[k], vals);
      for (std::size_t j = 0; j < n_integrands; ++j) {
        if (!std::isfinite(vals[j])) {
          throw ProjectionError("integrand is not finite at t = " + std::to_string(panel.t[k]),
                                std::numeric_limits<double>::infinity());
        }
        kr[j] += panel.wk[k] * vals[j];
        ga[j] += panel.wg[k] * vals[j];
      }
    }
    // A panel at the depth limit only has to meet the global budget; this
    // admits integrable endpoint singularities such as 1/log(1-t).
    const bool at_floor = cur.depth >= kMaxDepth;
    bool ok = true;
    for (std::size_t j = 0; j < n_integrands && ok; ++j) {
      const double err = std::abs(kr[j] - ga[j]);
      const double budget = at_floor ? tol * scale[j] : tol * scale[j] * (cur.b - cur.a);
      ok = err <= budget + 4.0 * std::numeric_limits<double>::epsilon() * std::abs(kr[j]);
    }
    if (ok) {
      rule.nodes.insert(rule.nodes.end(), panel.t.begin(), panel.t.end());
      rule.weights.insert(rule.weights.end(), panel.wk.begin(), panel.wk.end());
      ++accepted;
      continue;
    }
    if (at_floor || accepted + stack.size() > kMaxPanels) {
      throw ProjectionError("quadrature did not converge near t = " + std::to_string(cur.a),
                            std::numeric_limits<double>::quiet_NaN());
    }
    const double mid = 0.5 * (cur.a + cur.b);
    // Push right first so panels are accepted left to right.
    stack.push_back({mid, cur.b, cur.depth + 1});
    stack.push_back({cur.a, mid, cur.depth + 1});
  }
  return rule;
}

}  // namespace

double weighted_inner_product(const std::function<double(double)>& u,
                              const std::function<double(double)>& v, const BasisSpec& spec,
                              double quadrature_tol) {
  spec.validate();
  const Integrands g = [&](double t, std::vector<double>& out) {
    const double x = inverse_map(spec, t);
    out[0] = u(x) * v(x);
  };
  const CompositeRule rule = adaptive_rule(g, 1, quadrature_tol);
  double sum = 0.0;
  for (std::size_t q = 0; q < rule.nodes.size(); ++q) {
    const double x = inverse_map(spec, rule.nodes[q]);
    sum += rule.weights[q] * u(x) * v(x);
  }
  return sum;
}

Projection project(const std::function<double(double)>& f, const BasisSpec& spec,
                   const BesselPolyTable& table, double quadrature_tol) {
  spec.validate();
  check_table(spec, table);
  const int size = spec.size();
  const auto n_size = static_cast<std::size_t>(size);

  // Refine on f*B_n and B_n^2 jointly so that the Gram matrix and the
  // right-hand side share one node set.
  const Integrands g = [&](double t, std::vector<double>& out) {
    const double fx = f(inverse_map(spec, t));
    for (int n = 0; n < size; ++n) {
      const double b = table.eval(n, t, 0);
      out[static_cast<std::size_t>(n)] = fx * b;
      out[n_size + static_cast<std::size_t>(n)] = b * b;
    }
  };
  const CompositeRule rule = adaptive_rule(g, 2 * n_size, quadrature_tol);

  // On a shared rule the Gram system <B,B^T> A = <f,B^T> is the normal
  // equation of the weighted least-squares problem below; QR solves it
  // without squaring the condition number.
  const auto q_size = static_cast<Eigen::Index>(rule.nodes.size());
  Eigen::MatrixXd V(q_size, size);
  Eigen::VectorXd rhs(q_size);
  for (Eigen::Index q = 0; q < q_size; ++q) {
    const double t = rule.nodes[static_cast<std::size_t>(q)];
    const double sw = std::sqrt(rule.weights[static_cast<std::size_t>(q)]);
    for (int n = 0; n < size; ++n) V(q, n) = sw * table.eval(n, t, 0);
    rhs(q) = sw * f(inverse_map(spec, t));
  }

  const Eigen::HouseholderQR<Eigen::MatrixXd> qr(V);
  const Eigen::MatrixXd R = qr.matrixQR().topRows(size).triangularView<Eigen::Upper>();

  // Condition of the column-equilibrated Gram matrix is cond(R D)^2.
  Eigen::VectorXd col_scale = V.colwise().norm().transpose();
  for (Eigen::Index n = 0; n < size; ++n) {
    if (!(col_scale(n) > 0.0)) {
      throw ProjectionError("basis member " + std::to_string(n) + " vanishes on the quadrature grid",
                            std::numeric_limits<double>::infinity());
    }
  }
  const Eigen::MatrixXd Rs = R * col_scale.cwiseInverse().asDiagonal();
  const Eigen::JacobiSVD<Eigen::MatrixXd> svd(Rs);
  const auto& sv = svd.singularValues();
  const double cond_r = sv(0) / sv(sv.size() - 1);
  const double condition = cond_r * cond_r;
  if (!std::isfinite(cond_r) || cond_r * std::numeric_limits<double>::epsilon() > 1e-2) {
    throw ProjectionError("Gram matrix is numerically singular (condition estimate " +
                              std::to_string(condition) + ")",
                          condition);
  }

  const Eigen::VectorXd a = qr.solve(rhs);
  Projection out;
  out.coefficients.assign(a.data(), a.data() + size);
  out.condition_estimate = condition;
  return out;
}

}  // namespace besselqlm
