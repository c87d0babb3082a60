#pragma once

#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace besselqlm {

/// Which map carries [0,inf) onto [0,1).
enum class MapKind { Rational, Exponential };

std::string to_string(MapKind kind);
MapKind parse_map_kind(const std::string& name);

/// Truncation order N and map scale L of a basis family.
struct BasisSpec {
  MapKind kind = MapKind::Rational;
  int order_n_max = 0;
  double scale_L = 1.0;

  /// Throws std::invalid_argument unless N >= 0 and L > 0.
  void validate() const;
  int size() const { return order_n_max + 1; }
};

/// phi(x) and its first two derivatives.
struct MapValues {
  double phi;
  double dphi;
  double d2phi;
};

/// phi(x) = x/(x+L) or 1 - exp(-x/L). x = +inf maps to 1.
MapValues domain_map(const BasisSpec& spec, double x);
/// Inverse of domain_map on [0,1); t = 1 maps to +inf.
double inverse_map(const BasisSpec& spec, double t);

/// One term c * (t/2)^exponent of a truncated Bessel polynomial.
struct SeriesTerm {
  double coeff;
  int exponent;
};

/// Series coefficients of B_0..B_N. B_n(t) = sum_r (-1)^r/(r!(n+r)!) (t/2)^(2r+n)
/// with r = 0..floor((N-n)/2).
class BesselPolyTable {
 public:
  explicit BesselPolyTable(int order_n_max);

  int order_n_max() const { return order_n_max_; }
  std::span<const SeriesTerm> terms(int n) const;

  /// d^order/dt^order B_n(t), order in {0,1,2}.
  double eval(int n, double t, int order = 0) const;

 private:
  int order_n_max_;
  std::vector<std::vector<SeriesTerm>> terms_;
};

BesselPolyTable build_bessel_table(int order_n_max);

/// B_n(phi(x)). Throws std::out_of_range for n outside 0..N.
double eval_basis(const BasisSpec& spec, const BesselPolyTable& table, int n, double x);

/// d/dx or d^2/dx^2 of B_n(phi(x)) by the chain rule.
double eval_basis_deriv(const BasisSpec& spec, const BesselPolyTable& table, int n, double x,
                        int order);

/// Value, first and second x-derivative of one basis member at one point.
struct BasisJet {
  double value;
  double d1;
  double d2;
};

BasisJet eval_basis_jet(const BasisSpec& spec, const BesselPolyTable& table, int n, double x);

/// w(x) = phi'(x); L/(x+L)^2 for Rational, exp(-x/L)/L for Exponential.
double weight(const BasisSpec& spec, double x);

class ProjectionError : public std::runtime_error {
 public:
  ProjectionError(const std::string& what, double condition_estimate)
      : std::runtime_error(what), condition_estimate_(condition_estimate) {}
  double condition_estimate() const { return condition_estimate_; }

 private:
  double condition_estimate_;
};

struct Projection {
  std::vector<double> coefficients;
  /// Reciprocal-condition based estimate for the equilibrated Gram matrix.
  double condition_estimate;
};

/// Weighted least-squares expansion of f in B_0(phi)..B_N(phi).
///
/// Inner products are integrated in t = phi(x), where w(x) dx = dt, so every
/// integral becomes a smooth one on [0,1]. The Gram system is symmetrically
/// equilibrated before factorisation. Throws ProjectionError when a quadrature
/// does not reach the requested tolerance or the Gram matrix is singular.
Projection project(const std::function<double(double)>& f, const BasisSpec& spec,
                   const BesselPolyTable& table, double quadrature_tol = 1e-13);

/// <u, v>_w computed with the same quadrature project() uses.
double weighted_inner_product(const std::function<double(double)>& u,
                              const std::function<double(double)>& v, const BasisSpec& spec,
                              double quadrature_tol = 1e-13);

}  // namespace besselqlm
