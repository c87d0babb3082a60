#pragma once

#include <optional>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "besselqlm/bessel_basis.hpp"
#include "besselqlm/lane_emden.hpp"

namespace besselqlm {

/// Thrown when a spectral solution shows no sign change on the scan range.
class NoFirstZeroError : public std::runtime_error {
 public:
  NoFirstZeroError(const std::string& what, double minimum_value)
      : std::runtime_error(what), minimum_value_(minimum_value) {}
  /// Smallest trial value seen on the scan grid.
  double minimum_value() const { return minimum_value_; }

 private:
  double minimum_value_;
};

/// Right end of the first-zero scan, (0, 2 * 20].
inline constexpr double kZeroScanEnd = 40.0;

/// First sign change of the trial function on a 10,000-point scan of
/// (0, kZeroScanEnd], refined by Brent's method to 1e-13.
double spectral_first_zero(const SpectralSolution& sol);
std::optional<double> find_spectral_first_zero(const SpectralSolution& sol);

struct SolutionRow {
  double x;
  double y;
  double yprime;
};

/// 0.1, 0.2, ..., 1.0, then the integers 2, 3, ... below the last point, then
/// the first zero truncated to one decimal.
std::vector<double> paper_abscissae(double first_zero);

std::vector<SolutionRow> emit_solution_table(const SpectralSolution& sol,
                                             std::span<const double> xs);

struct ResidualRow {
  double x;
  double abs_residual;
};

/// |qlm_residual(final, penultimate, x)| at each x.
std::vector<ResidualRow> emit_residual_curve(const SpectralSolution& final_iterate,
                                             const SpectralSolution& penultimate,
                                             std::span<const double> xs);

enum class OutputFormat { Csv, Json };
std::string to_string(OutputFormat f);
OutputFormat parse_output_format(const std::string& name);

struct RunConfig {
  double m = 2.0;
  MapKind basis = MapKind::Rational;
  int N = 40;
  double L = 4.0;
  int iterations = 15;
  double tol = 1e-12;
  std::vector<std::string> outputs;
  OutputFormat format = OutputFormat::Csv;
  /// Fixed collocation interval end; unset means tracked from the zero.
  std::optional<double> interval_end;
  double zero_fraction = 0.95;

  /// Throws std::invalid_argument naming the first offending field.
  void validate() const;
  SolverOptions solver_options() const;
  BasisSpec basis_spec() const { return {basis, N, L}; }
};

/// Per-(m, basis) settings that reach the tolerances of the benchmark suite.
RunConfig tuned_config(double m, MapKind basis);

struct SolveResult {
  RunConfig config;
  LaneEmdenRun run;
  std::optional<double> first_zero;
};

SolveResult run_solve(const RunConfig& config);

enum class ReferenceSource { Horedt, Oracle, Exact };
std::string to_string(ReferenceSource s);

/// Tabulated first zeros for m in {1.5, 2, 2.5, 3, 4}.
std::optional<double> horedt_first_zero(double m);
/// sqrt(6) for m = 0, pi for m = 1.
std::optional<double> exact_first_zero(double m);

/// floor(-log10(abs_diff / |reference|)); unset when abs_diff is zero.
std::optional<int> digits_agreed(double abs_diff, double reference);

struct ComparisonRow {
  double m = 0.0;
  MapKind basis = MapKind::Rational;
  int N = 0;
  double L = 0.0;
  std::optional<double> computed_first_zero;
  std::optional<double> reference_value;
  ReferenceSource source = ReferenceSource::Horedt;
  std::optional<double> abs_diff;
  std::optional<int> digits;
  /// Non-empty when the solve or the reference failed for this row.
  std::string error;
};

struct ComparisonReport {
  std::vector<ComparisonRow> rows;
};

struct ComparisonOptions {
  std::vector<MapKind> bases{MapKind::Rational, MapKind::Exponential};
  /// Use tuned_config per (m, basis) instead of the template's N and L.
  bool tuned = true;
  double oracle_tol = 1e-12;
};

/// Solves each m with each basis and compares the first zero against the
/// Horedt constant, the exact value where one exists, and the oracle.
/// Per-row failures are recorded and the run continues.
ComparisonReport run_comparison(std::span<const double> ms, const RunConfig& config_template,
                                const ComparisonOptions& options = {});

/// Shortest decimal form that reads back to the same double.
std::string format_double(double v);

void write_solve_json(std::ostream& os, const SolveResult& result);
void write_solve_csv(std::ostream& os, const SolveResult& result);
void write_table_csv(std::ostream& os, std::span<const SolutionRow> rows);
void write_table_json(std::ostream& os, std::span<const SolutionRow> rows);
void write_residual_csv(std::ostream& os, std::span<const ResidualRow> rows);
void write_residual_json(std::ostream& os, std::span<const ResidualRow> rows);
void write_comparison_csv(std::ostream& os, const ComparisonReport& report);
void write_comparison_json(std::ostream& os, const ComparisonReport& report);

}  // namespace besselqlm
