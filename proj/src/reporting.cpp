#include "besselqlm/reporting.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include "json.hpp"

#include "besselqlm/oracle.hpp"
#include "besselqlm/roots.hpp"

namespace besselqlm {

std::optional<double> find_spectral_first_zero(const SpectralSolution& sol) {
  constexpr int kSamples = 10000;
  const auto f = [&](double x) { return sol.value(x); };
  double x_prev = 0.0;
  for (int i = 1; i <= kSamples; ++i) {
    const double x = kZeroScanEnd * static_cast<double>(i) / kSamples;
    const double fx = f(x);
    if (fx <= 0.0) return fx == 0.0 ? x : brent_root(f, x_prev, x, 1e-13);
    x_prev = x;
  }
  return std::nullopt;
}

double spectral_first_zero(const SpectralSolution& sol) {
  if (auto z = find_spectral_first_zero(sol)) return *z;
  double lowest = std::numeric_limits<double>::infinity();
  for (int i = 1; i <= 10000; ++i) lowest = std::min(lowest, sol.value(kZeroScanEnd * i / 10000.0));
  std::ostringstream os;
  os << "no sign change of the trial function on (0, " << kZeroScanEnd
     << "]; minimum value " << lowest;
  throw NoFirstZeroError(os.str(), lowest);
}

std::vector<double> paper_abscissae(double first_zero) {
  if (!(first_zero > 1.0)) throw std::invalid_argument("first zero must exceed 1");
  std::vector<double> xs;
  for (int i = 1; i <= 10; ++i) xs.push_back(i / 10.0);
  const double last = std::floor(first_zero * 10.0) / 10.0;
  for (int k = 2; k < last; ++k) xs.push_back(k);
  if (last > xs.back()) xs.push_back(last);
  return xs;
}

std::vector<SolutionRow> emit_solution_table(const SpectralSolution& sol,
                                             std::span<const double> xs) {
  std::vector<SolutionRow> rows;
  rows.reserve(xs.size());
  for (double x : xs) {
    const TrialJet j = sol.jet(x);
    rows.push_back({x, j.value, j.d1});
  }
  return rows;
}

std::vector<ResidualRow> emit_residual_curve(const SpectralSolution& final_iterate,
                                             const SpectralSolution& penultimate,
                                             std::span<const double> xs) {
  std::vector<ResidualRow> rows;
  rows.reserve(xs.size());
  for (double x : xs) rows.push_back({x, std::abs(qlm_residual(final_iterate, penultimate, x))});
  return rows;
}

std::string to_string(OutputFormat f) { return f == OutputFormat::Csv ? "csv" : "json"; }

OutputFormat parse_output_format(const std::string& name) {
  if (name == "csv") return OutputFormat::Csv;
  if (name == "json") return OutputFormat::Json;
  throw std::invalid_argument("unknown output format '" + name + "' (expected csv or json)");
}

void RunConfig::validate() const {
  LaneEmdenParams{m}.validate();
  if (N < 0) throw std::invalid_argument("N must be >= 0");
  if (!(L > 0.0) || !std::isfinite(L)) throw std::invalid_argument("L must be a positive number");
  if (iterations < 1) throw std::invalid_argument("iterations must be >= 1");
  if (!(tol > 0.0)) throw std::invalid_argument("tol must be > 0");
  if (interval_end && !(*interval_end > 0.0 && std::isfinite(*interval_end))) {
    throw std::invalid_argument("interval end must be a positive number");
  }
  if (!(zero_fraction > 0.0 && zero_fraction < 1.0)) {
    throw std::invalid_argument("zero fraction must lie in (0, 1)");
  }
  static const std::vector<std::string> known{"solve", "table", "zeros", "residual", "sweep",
                                              "validate"};
  for (const auto& o : outputs) {
    if (std::find(known.begin(), known.end(), o) == known.end()) {
      throw std::invalid_argument("unknown report '" + o + "'");
    }
  }
}

SolverOptions RunConfig::solver_options() const {
  SolverOptions o;
  o.interval_end = interval_end;
  o.zero_fraction = zero_fraction;
  return o;
}

RunConfig tuned_config(double m, MapKind basis) {
  RunConfig c;
  c.m = m;
  c.basis = basis;
  c.iterations = 15;
  if (m == 5.0) c.interval_end = 10.0;
  if (basis == MapKind::Rational) {
    c.L = 4.0;
    c.N = 40;
    if (m == 1.5 || m == 2.5) c.N = 60;
    if (m == 3.0) {
      c.N = 60;
      c.L = 2.0;
    }
    if (m == 4.0) {
      c.N = 75;
      c.L = 2.0;
    }
  } else {
    c.L = 2.0;
    c.N = 40;
    if (m == 1.5) {
      c.N = 60;
      c.L = 3.0;
    }
    if (m == 2.5) c.N = 60;
    if (m == 3.0) c.N = 75;
    if (m == 4.0) {
      c.N = 75;
      c.L = 3.0;
    }
  }
  return c;
}

SolveResult run_solve(const RunConfig& config) {
  config.validate();
  SolveResult r{config,
                solve_lane_emden({config.m}, config.basis_spec(), config.N + 1, config.iterations,
                                 config.tol, config.solver_options()),
                std::nullopt};
  r.first_zero = find_spectral_first_zero(r.run.solution());
  return r;
}

std::string to_string(ReferenceSource s) {
  switch (s) {
    case ReferenceSource::Horedt:
      return "horedt";
    case ReferenceSource::Oracle:
      return "oracle";
    case ReferenceSource::Exact:
      return "exact";
  }
  return "unknown";
}

std::optional<double> horedt_first_zero(double m) {
  if (m == 1.5) return 3.65375374;
  if (m == 2.0) return 4.35287460;
  if (m == 2.5) return 5.35527546;
  if (m == 3.0) return 6.89684862;
  if (m == 4.0) return 14.9715463;
  return std::nullopt;
}

std::optional<double> exact_first_zero(double m) {
  if (m == 0.0) return std::sqrt(6.0);
  if (m == 1.0) return std::numbers::pi;
  return std::nullopt;
}

std::optional<int> digits_agreed(double abs_diff, double reference) {
  if (!(abs_diff > 0.0)) return std::nullopt;
  return static_cast<int>(std::floor(-std::log10(abs_diff / std::abs(reference))));
}

ComparisonReport run_comparison(std::span<const double> ms, const RunConfig& config_template,
                                const ComparisonOptions& options) {
  ComparisonReport report;
  for (double m : ms) {
    // The oracle does not depend on the basis, so one integration per m.
    std::optional<double> oracle;
    std::string oracle_error;
    try {
      oracle = oracle_first_zero(m, options.oracle_tol);
    } catch (const std::exception& e) {
      oracle_error = e.what();
    }

    for (MapKind basis : options.bases) {
      RunConfig cfg = options.tuned ? tuned_config(m, basis) : config_template;
      cfg.m = m;
      cfg.basis = basis;
      cfg.tol = config_template.tol;
      if (!options.tuned) cfg.iterations = config_template.iterations;

      std::optional<double> computed;
      std::string solve_error;
      try {
        computed = run_solve(cfg).first_zero;
        if (!computed) solve_error = "no first zero found";
      } catch (const std::exception& e) {
        solve_error = e.what();
      }

      auto add_row = [&](ReferenceSource source, std::optional<double> ref,
                         const std::string& ref_error) {
        ComparisonRow row;
        row.m = m;
        row.basis = basis;
        row.N = cfg.N;
        row.L = cfg.L;
        row.source = source;
        row.computed_first_zero = computed;
        row.reference_value = ref;
        if (computed && ref) {
          row.abs_diff = std::abs(*computed - *ref);
          row.digits = digits_agreed(*row.abs_diff, *ref);
        }
        row.error = !solve_error.empty() ? solve_error : ref_error;
        report.rows.push_back(std::move(row));
      };
      if (auto h = horedt_first_zero(m)) add_row(ReferenceSource::Horedt, h, "");
      if (auto e = exact_first_zero(m)) add_row(ReferenceSource::Exact, e, "");
      add_row(ReferenceSource::Oracle, oracle, oracle_error);
    }
  }
  return report;
}

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

namespace {

using nlohmann::json;

json optional_number(const std::optional<double>& v) {
  return v ? json(*v) : json(nullptr);
}

std::string csv_optional(const std::optional<double>& v) { return v ? format_double(*v) : ""; }

std::string csv_quote(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

double final_condition(const SolveResult& r) {
  const auto& c = r.run.condition_estimates;
  return c.empty() ? 0.0 : c.back();
}

}  // namespace

void write_solve_json(std::ostream& os, const SolveResult& r) {
  json j;
  j["m"] = r.config.m;
  j["basis"] = to_string(r.config.basis);
  j["N"] = r.config.N;
  j["L"] = r.config.L;
  j["iterations"] = r.run.qlm.iterations_used;
  j["coefficients"] = r.run.solution().coefficients();
  j["first_zero"] = optional_number(r.first_zero);
  j["q_history"] = r.run.qlm.change_norms;
  j["condition_estimate"] = final_condition(r);
  os << j.dump(2) << '\n';
}

void write_solve_csv(std::ostream& os, const SolveResult& r) {
  os << "field,index,value\n";
  os << "m,0," << format_double(r.config.m) << '\n';
  os << "basis,0," << to_string(r.config.basis) << '\n';
  os << "N,0," << r.config.N << '\n';
  os << "L,0," << format_double(r.config.L) << '\n';
  os << "iterations,0," << r.run.qlm.iterations_used << '\n';
  os << "first_zero,0," << csv_optional(r.first_zero) << '\n';
  os << "condition_estimate,0," << format_double(final_condition(r)) << '\n';
  const auto& c = r.run.solution().coefficients();
  for (std::size_t i = 0; i < c.size(); ++i) {
    os << "coefficient," << i << ',' << format_double(c[i]) << '\n';
  }
  const auto& q = r.run.qlm.change_norms;
  for (std::size_t i = 0; i < q.size(); ++i) os << "q," << i + 1 << ',' << format_double(q[i]) << '\n';
}

void write_table_csv(std::ostream& os, std::span<const SolutionRow> rows) {
  os << "x,y,yprime\n";
  for (const auto& r : rows) {
    os << format_double(r.x) << ',' << format_double(r.y) << ',' << format_double(r.yprime) << '\n';
  }
}

void write_table_json(std::ostream& os, std::span<const SolutionRow> rows) {
  json arr = json::array();
  for (const auto& r : rows) arr.push_back({{"x", r.x}, {"y", r.y}, {"yprime", r.yprime}});
  os << arr.dump(2) << '\n';
}

void write_residual_csv(std::ostream& os, std::span<const ResidualRow> rows) {
  os << "x,abs_residual\n";
  for (const auto& r : rows) os << format_double(r.x) << ',' << format_double(r.abs_residual) << '\n';
}

void write_residual_json(std::ostream& os, std::span<const ResidualRow> rows) {
  json arr = json::array();
  for (const auto& r : rows) arr.push_back({{"x", r.x}, {"abs_residual", r.abs_residual}});
  os << arr.dump(2) << '\n';
}

void write_comparison_csv(std::ostream& os, const ComparisonReport& report) {
  os << "m,basis,N,L,computed_first_zero,reference_value,source,abs_diff,digits_agreed,error\n";
  for (const auto& r : report.rows) {
    os << format_double(r.m) << ',' << to_string(r.basis) << ',' << r.N << ','
       << format_double(r.L) << ',' << csv_optional(r.computed_first_zero) << ','
       << csv_optional(r.reference_value) << ',' << to_string(r.source) << ','
       << csv_optional(r.abs_diff) << ',' << (r.digits ? std::to_string(*r.digits) : "") << ','
       << csv_quote(r.error) << '\n';
  }
}

void write_comparison_json(std::ostream& os, const ComparisonReport& report) {
  json arr = json::array();
  for (const auto& r : report.rows) {
    json row;
    row["m"] = r.m;
    row["basis"] = to_string(r.basis);
    row["N"] = r.N;
    row["L"] = r.L;
    row["computed_first_zero"] = optional_number(r.computed_first_zero);
    row["reference_value"] = optional_number(r.reference_value);
    row["source"] = to_string(r.source);
    row["abs_diff"] = optional_number(r.abs_diff);
    row["digits_agreed"] = r.digits ? json(*r.digits) : json(nullptr);
    row["error"] = r.error;
    arr.push_back(std::move(row));
  }
  os << arr.dump(2) << '\n';
}

}  // namespace besselqlm
