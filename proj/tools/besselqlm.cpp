#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "besselqlm/oracle.hpp"
#include "besselqlm/reporting.hpp"

using namespace besselqlm;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitValidation = 2;
constexpr int kExitNumerical = 3;

struct CommonArgs {
  double m = 2.0;
  std::string basis = "rational";
  int N = 40;
  double L = 4.0;
  int iters = 15;
  double tol = 1e-12;
  std::string format = "csv";
  std::string out;
  std::optional<double> interval_end;
  double zero_fraction = 0.95;
  bool tuned = false;

  RunConfig config() const {
    RunConfig c;
    if (tuned) c = tuned_config(m, parse_map_kind(basis));
    c.m = m;
    c.basis = parse_map_kind(basis);
    if (!tuned) {
      c.N = N;
      c.L = L;
      c.iterations = iters;
      c.zero_fraction = zero_fraction;
    }
    c.tol = tol;
    c.format = parse_output_format(format);
    if (interval_end) c.interval_end = interval_end;
    c.validate();
    return c;
  }
};

void add_common(CLI::App* cmd, CommonArgs& a) {
  cmd->add_option("--m", a.m, "polytropic index in [0, 5]");
  cmd->add_option("--basis", a.basis, "rational or exponential")
      ->check(CLI::IsMember({"rational", "exponential"}));
  cmd->add_option("--N", a.N, "truncation order N (N + 1 basis members)");
  cmd->add_option("--L", a.L, "map scale L");
  cmd->add_option("--iters", a.iters, "QLM iterations");
  cmd->add_option("--tol", a.tol, "QLM stopping tolerance on the sup-norm change");
  cmd->add_option("--format", a.format, "csv or json")->check(CLI::IsMember({"csv", "json"}));
  cmd->add_option("--out", a.out, "output file (default: stdout)")->envname("BESSELQLM_OUT");
  cmd->add_option("--interval-end", a.interval_end,
                  "fix the collocation interval [0, X] instead of tracking the first zero");
  cmd->add_option("--zero-fraction", a.zero_fraction,
                  "tracked interval end as a fraction of the first zero");
  cmd->add_flag("--tuned", a.tuned, "use the built-in N, L and iteration count for this m and basis");
}

/// Writes to --out when given, else stdout.
class Output {
 public:
  explicit Output(const std::string& path) {
    if (!path.empty()) {
      file_ = std::make_unique<std::ofstream>(path, std::ios::trunc);
      if (!*file_) throw std::invalid_argument("cannot open output file '" + path + "'");
      file_->imbue(std::locale::classic());
    }
  }
  std::ostream& stream() { return file_ ? *file_ : std::cout; }

 private:
  std::unique_ptr<std::ofstream> file_;
};

void print_warnings(const LaneEmdenRun& run) {
  for (const auto& w : run.warnings) std::cerr << "warning: " << w << '\n';
}

int cmd_solve(const CommonArgs& a) {
  const RunConfig cfg = a.config();
  const SolveResult r = run_solve(cfg);
  print_warnings(r.run);
  Output out(a.out);
  if (cfg.format == OutputFormat::Json) {
    write_solve_json(out.stream(), r);
  } else {
    write_solve_csv(out.stream(), r);
  }
  return kExitOk;
}

int cmd_table(const CommonArgs& a, const std::vector<double>& xs_arg) {
  const RunConfig cfg = a.config();
  const SolveResult r = run_solve(cfg);
  print_warnings(r.run);
  std::vector<double> xs = xs_arg;
  if (xs.empty()) {
    if (!r.first_zero) throw NoFirstZeroError("no first zero to bound the default table", 0.0);
    xs = paper_abscissae(*r.first_zero);
  }
  const auto rows = emit_solution_table(r.run.solution(), xs);
  Output out(a.out);
  if (cfg.format == OutputFormat::Json) {
    write_table_json(out.stream(), rows);
  } else {
    write_table_csv(out.stream(), rows);
  }
  return kExitOk;
}

int cmd_residual(const CommonArgs& a, int points, std::optional<double> x_end) {
  if (points < 1) throw std::invalid_argument("--points must be >= 1");
  const RunConfig cfg = a.config();
  const SolveResult r = run_solve(cfg);
  print_warnings(r.run);
  const auto& it = r.run.qlm.iterates;
  if (it.size() < 2) throw std::runtime_error("residual needs at least one QLM iteration");
  double end = r.run.grid.interval_end;
  if (x_end) end = *x_end;
  if (!std::isfinite(end)) end = r.first_zero.value_or(10.0);
  std::vector<double> xs;
  for (int i = 1; i <= points; ++i) xs.push_back(end * i / points);
  const auto rows = emit_residual_curve(it.back(), it[it.size() - 2], xs);
  Output out(a.out);
  if (cfg.format == OutputFormat::Json) {
    write_residual_json(out.stream(), rows);
  } else {
    write_residual_csv(out.stream(), rows);
  }
  return kExitOk;
}

int cmd_zeros(const CommonArgs& a, const std::vector<double>& ms,
              const std::vector<std::string>& bases, bool fixed, double oracle_tol) {
  RunConfig tmpl;
  tmpl.basis = parse_map_kind(a.basis);
  tmpl.N = a.N;
  tmpl.L = a.L;
  tmpl.iterations = a.iters;
  tmpl.tol = a.tol;
  tmpl.zero_fraction = a.zero_fraction;
  tmpl.interval_end = a.interval_end;
  tmpl.validate();
  ComparisonOptions opts;
  opts.tuned = !fixed;
  opts.oracle_tol = oracle_tol;
  opts.bases.clear();
  for (const auto& b : bases) opts.bases.push_back(parse_map_kind(b));
  const ComparisonReport report = run_comparison(ms, tmpl, opts);
  Output out(a.out);
  if (parse_output_format(a.format) == OutputFormat::Json) {
    write_comparison_json(out.stream(), report);
  } else {
    write_comparison_csv(out.stream(), report);
  }
  return kExitOk;
}

struct SweepCase {
  double m;
  MapKind basis;
  int N;
  double L;
  int iters;
};

struct SweepResult {
  std::optional<double> first_zero;
  double condition = 0.0;
  int iterations_used = 0;
  std::string error;
};

int cmd_sweep(const CommonArgs& a, const std::vector<double>& ms,
              const std::vector<std::string>& bases, const std::vector<int>& Ns,
              const std::vector<double>& Ls, const std::vector<int>& iters, int workers) {
  std::vector<SweepCase> cases;
  for (double m : ms)
    for (const auto& b : bases)
      for (int N : Ns)
        for (double L : Ls)
          for (int it : iters) cases.push_back({m, parse_map_kind(b), N, L, it});
  for (const auto& c : cases) {
    RunConfig cfg;
    cfg.m = c.m;
    cfg.N = c.N;
    cfg.L = c.L;
    cfg.iterations = c.iters;
    cfg.validate();
  }

  std::vector<SweepResult> results(cases.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < cases.size(); i = next++) {
      const SweepCase& c = cases[i];
      RunConfig cfg;
      cfg.m = c.m;
      cfg.basis = c.basis;
      cfg.N = c.N;
      cfg.L = c.L;
      cfg.iterations = c.iters;
      cfg.tol = a.tol;
      cfg.zero_fraction = a.zero_fraction;
      cfg.interval_end = a.interval_end;
      try {
        const SolveResult r = run_solve(cfg);
        results[i].first_zero = r.first_zero;
        results[i].iterations_used = r.run.qlm.iterations_used;
        if (!r.run.condition_estimates.empty()) results[i].condition = r.run.condition_estimates.back();
      } catch (const std::exception& e) {
        results[i].error = e.what();
      }
    }
  };
  const int n_workers = std::max(1, std::min<int>(workers, static_cast<int>(cases.size())));
  std::vector<std::thread> pool;
  for (int w = 0; w < n_workers; ++w) pool.emplace_back(worker);
  for (auto& t : pool) t.join();

  // Results are stored by case index, so the report order is the config order.
  Output out(a.out);
  std::ostream& os = out.stream();
  if (parse_output_format(a.format) == OutputFormat::Json) {
    nlohmann::json arr = nlohmann::json::array();
    for (std::size_t i = 0; i < cases.size(); ++i) {
      const auto& c = cases[i];
      const auto& r = results[i];
      const auto h = horedt_first_zero(c.m);
      nlohmann::json row;
      row["m"] = c.m;
      row["basis"] = to_string(c.basis);
      row["N"] = c.N;
      row["L"] = c.L;
      row["iterations"] = c.iters;
      row["iterations_used"] = r.iterations_used;
      row["first_zero"] = r.first_zero ? nlohmann::json(*r.first_zero) : nlohmann::json(nullptr);
      row["horedt"] = h ? nlohmann::json(*h) : nlohmann::json(nullptr);
      row["abs_diff"] = (h && r.first_zero) ? nlohmann::json(std::abs(*r.first_zero - *h))
                                            : nlohmann::json(nullptr);
      row["condition_estimate"] = r.condition;
      row["error"] = r.error;
      arr.push_back(std::move(row));
    }
    os << arr.dump(2) << '\n';
  } else {
    os << "m,basis,N,L,iterations,iterations_used,first_zero,horedt,abs_diff,condition_estimate,error\n";
    for (std::size_t i = 0; i < cases.size(); ++i) {
      const auto& c = cases[i];
      const auto& r = results[i];
      const auto h = horedt_first_zero(c.m);
      std::string err = r.error;
      std::replace(err.begin(), err.end(), ',', ';');
      os << format_double(c.m) << ',' << to_string(c.basis) << ',' << c.N << ','
         << format_double(c.L) << ',' << c.iters << ',' << r.iterations_used << ','
         << (r.first_zero ? format_double(*r.first_zero) : "") << ','
         << (h ? format_double(*h) : "") << ','
         << ((h && r.first_zero) ? format_double(std::abs(*r.first_zero - *h)) : "") << ','
         << format_double(r.condition) << ',' << err << '\n';
    }
  }
  return kExitOk;
}

int cmd_validate(const CommonArgs& a, double oracle_tol, double max_diff) {
  const RunConfig cfg = a.config();
  const SolveResult r = run_solve(cfg);
  print_warnings(r.run);

  double x_hi = 10.0;
  std::optional<double> oracle_zero;
  if (cfg.m < 5.0) {
    oracle_zero = oracle_first_zero(cfg.m, oracle_tol);
    x_hi = 0.95 * *oracle_zero;
  }
  std::vector<double> xs;
  constexpr int kPoints = 400;
  for (int i = 0; i <= kPoints; ++i) xs.push_back(kOracleStart + (x_hi - kOracleStart) * i / kPoints);
  const OracleTrajectory traj = integrate(cfg.m, x_hi, oracle_tol, xs);

  double sup = 0.0;
  std::size_t k = 0;
  for (double x : xs) {
    while (k < traj.nodes.size() && traj.nodes[k] < x) ++k;
    if (k == traj.nodes.size() || traj.nodes[k] != x) continue;
    sup = std::max(sup, std::abs(r.run.solution().value(x) - traj.y_values[k]));
  }
  std::optional<double> zero_diff;
  if (oracle_zero && r.first_zero) zero_diff = std::abs(*oracle_zero - *r.first_zero);
  const bool zero_ok = cfg.m >= 5.0 ? !r.first_zero : (zero_diff && *zero_diff <= max_diff);
  const bool ok = sup <= max_diff && zero_ok;

  Output out(a.out);
  std::ostream& os = out.stream();
  if (cfg.format == OutputFormat::Json) {
    nlohmann::json j;
    j["m"] = cfg.m;
    j["basis"] = to_string(cfg.basis);
    j["N"] = cfg.N;
    j["L"] = cfg.L;
    j["sup_difference"] = sup;
    j["interval"] = {kOracleStart, x_hi};
    j["spectral_first_zero"] = r.first_zero ? nlohmann::json(*r.first_zero) : nlohmann::json(nullptr);
    j["oracle_first_zero"] = oracle_zero ? nlohmann::json(*oracle_zero) : nlohmann::json(nullptr);
    j["first_zero_difference"] = zero_diff ? nlohmann::json(*zero_diff) : nlohmann::json(nullptr);
    j["max_difference"] = max_diff;
    j["pass"] = ok;
    os << j.dump(2) << '\n';
  } else {
    os << "m,basis,N,L,sup_difference,spectral_first_zero,oracle_first_zero,first_zero_difference,"
          "max_difference,pass\n";
    os << format_double(cfg.m) << ',' << to_string(cfg.basis) << ',' << cfg.N << ','
       << format_double(cfg.L) << ',' << format_double(sup) << ','
       << (r.first_zero ? format_double(*r.first_zero) : "") << ','
       << (oracle_zero ? format_double(*oracle_zero) : "") << ','
       << (zero_diff ? format_double(*zero_diff) : "") << ',' << format_double(max_diff) << ','
       << (ok ? "true" : "false") << '\n';
  }
  return ok ? kExitOk : kExitValidation;
}

}  // namespace

int main(int argc, char** argv) {
  std::locale::global(std::locale::classic());
  std::cout.imbue(std::locale::classic());

  CLI::App app{"Lane-Emden solver: Bessel-basis collocation with quasilinearization"};
  app.require_subcommand(1);

  CommonArgs solve_args, table_args, zeros_args, residual_args, sweep_args, validate_args;

  auto* solve = app.add_subcommand("solve", "one run: coefficients, first zero, q history");
  add_common(solve, solve_args);

  auto* table = app.add_subcommand("table", "y and y' at tabulation points");
  add_common(table, table_args);
  std::vector<double> table_xs;
  table->add_option("--x", table_xs, "abscissae (default: 0.1..1.0, integers, near-zero point)")
      ->delimiter(',');

  auto* zeros = app.add_subcommand("zeros", "first zeros against Horedt, exact and oracle values");
  add_common(zeros, zeros_args);
  std::vector<double> zero_ms{1.5, 2.0, 2.5, 3.0, 4.0};
  std::vector<std::string> zero_bases{"rational", "exponential"};
  bool zeros_fixed = false;
  double zeros_oracle_tol = 1e-12;
  zeros->add_option("--ms", zero_ms, "polytropic indices")->delimiter(',');
  zeros->add_option("--bases", zero_bases, "bases to run")
      ->delimiter(',')
      ->check(CLI::IsMember({"rational", "exponential"}));
  zeros->add_flag("--fixed", zeros_fixed, "use --N/--L/--iters for every m instead of tuned settings");
  zeros->add_option("--oracle-tol", zeros_oracle_tol, "oracle integration tolerance");

  auto* residual = app.add_subcommand("residual", "|residual| of the last QLM step on a grid");
  add_common(residual, residual_args);
  int residual_points = 200;
  std::optional<double> residual_end;
  residual->add_option("--points", residual_points, "number of sample points");
  residual->add_option("--x-end", residual_end, "right end of the sample grid");

  auto* sweep = app.add_subcommand("sweep", "grid of runs over m, basis, N, L and iterations");
  add_common(sweep, sweep_args);
  std::vector<double> sweep_ms{2.0};
  std::vector<std::string> sweep_bases{"rational"};
  std::vector<int> sweep_Ns{20, 30, 40, 50, 60, 75};
  std::vector<double> sweep_Ls{2.0, 4.0, 8.0};
  std::vector<int> sweep_iters{5, 10, 15, 20};
  int sweep_workers = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  sweep->add_option("--ms", sweep_ms)->delimiter(',');
  sweep->add_option("--bases", sweep_bases)
      ->delimiter(',')
      ->check(CLI::IsMember({"rational", "exponential"}));
  sweep->add_option("--Ns", sweep_Ns)->delimiter(',');
  sweep->add_option("--Ls", sweep_Ls)->delimiter(',');
  sweep->add_option("--iters-list", sweep_iters)->delimiter(',');
  sweep->add_option("--workers", sweep_workers, "parallel solves");

  auto* validate = app.add_subcommand("validate", "cross-check a run against the RK oracle");
  add_common(validate, validate_args);
  double validate_oracle_tol = 1e-12;
  double validate_max_diff = 1e-6;
  validate->add_option("--oracle-tol", validate_oracle_tol, "oracle integration tolerance");
  validate->add_option("--max-diff", validate_max_diff, "allowed sup and first-zero difference");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*solve) return cmd_solve(solve_args);
    if (*table) return cmd_table(table_args, table_xs);
    if (*zeros) return cmd_zeros(zeros_args, zero_ms, zero_bases, zeros_fixed, zeros_oracle_tol);
    if (*residual) return cmd_residual(residual_args, residual_points, residual_end);
    if (*sweep) {
      return cmd_sweep(sweep_args, sweep_ms, sweep_bases, sweep_Ns, sweep_Ls, sweep_iters,
                       sweep_workers);
    }
    if (*validate) return cmd_validate(validate_args, validate_oracle_tol, validate_max_diff);
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return kExitNumerical;
  }
  return kExitUsage;
}
