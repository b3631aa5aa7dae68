#include "commands.hpp"

#include <gmmpower/csv.hpp>
#include <gmmpower/error.hpp>
#include <gmmpower/panel.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

namespace gmmpower::cli {
namespace {

namespace fs = std::filesystem;
using json = nlohmann::json;

// Config-shaped problems exit 2; anything that went wrong while estimating exits 3.
int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const EstimationFailure*>(&e) || dynamic_cast<const IdentificationError*>(&e) ||
      dynamic_cast<const DegenerateMoments*>(&e) || dynamic_cast<const NumericFailure*>(&e) ||
      dynamic_cast<const SingularMatrix*>(&e))
    return kExitEstimation;
  return kExitConfig;
}

fs::path prepare_output(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw ConfigError("cannot create output directory '" + dir + "'");
  return fs::path(dir);
}

void require_file(const std::optional<std::string>& path, const char* key) {
  if (!path) throw ConfigError(std::string(key) + " is required");
  if (!fs::is_regular_file(*path)) throw ConfigError(std::string(key) + ": no such file '" + *path + "'");
}

// Writes through a string so a failed run never leaves a half-written file.
void write_file(const fs::path& path, const std::string& content) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw ConfigError("cannot write '" + path.string() + "'");
  f << content;
  if (!f) throw ConfigError("cannot write '" + path.string() + "'");
}

std::string fixed(double v, int digits) {
  if (!std::isfinite(v)) return "nan";
  std::ostringstream os;
  os << std::fixed << std::setprecision(digits) << v;
  return os.str();
}

json number_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

}  // namespace

int cmd_simulate(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  try {
    const SimulateSection& sim = cfg.simulate;
    for (Eigen::Index n : sim.n_grid) {
      SimConfig c = sim.config;
      c.n = n;
      c.validate();
    }
    if (sim.oracle_size < 1) throw ConfigError("simulate.oracle_size must be a positive integer");
    const fs::path dir = prepare_output(cfg.output_directory);

    const PopulationOracle oracle = population_oracle(sim.config.setting, sim.oracle_size, sim.config.T);
    std::vector<TableRun> runs;
    for (Eigen::Index n : sim.n_grid) {
      SimConfig c = sim.config;
      c.n = n;
      try {
        runs.push_back(run_table_row(c, RunOptions{.threads = sim.threads, .oracle = &oracle}));
      } catch (const ExperimentAborted& e) {
        err << "error: " << to_string(c.setting) << " n=" << n << ": " << e.what() << '\n';
        return kExitEstimation;
      }
    }

    std::vector<TableRow> rows;
    std::vector<const SimReport*> reports;
    for (const auto& r : runs) {
      rows.push_back(r.row);
      reports.push_back(&r.alternative);
      reports.push_back(&r.null);
    }
    std::ostringstream report_csv, stats_csv;
    write_sim_report_csv(report_csv, rows);
    write_statistics_csv(stats_csv, reports);
    write_file(dir / "sim_report.csv", report_csv.str());
    write_file(dir / "statistics.csv", stats_csv.str());

    out << std::left << std::setw(8) << "setting" << std::right << std::setw(7) << "n" << std::setw(10) << "power"
        << std::setw(10) << "power/2" << std::setw(10) << "size" << std::setw(10) << "wald" << std::setw(10)
        << "wald_t1" << std::setw(10) << "dm" << std::setw(10) << "dm_t1" << std::setw(8) << "failed" << '\n';
    for (const auto& r : rows)
      out << std::left << std::setw(8) << to_string(r.setting) << std::right << std::setw(7) << r.n << std::setw(10)
          << fixed(r.theoretical_power, 4) << std::setw(10) << fixed(r.theoretical_power_half, 4) << std::setw(10)
          << fixed(r.theoretical_size, 4) << std::setw(10) << fixed(r.wald_rejection, 4) << std::setw(10)
          << fixed(r.wald_type1, 4) << std::setw(10) << fixed(r.dm_rejection, 4) << std::setw(10)
          << fixed(r.dm_type1, 4) << std::setw(8) << r.failed << '\n';
    return kExitOk;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return exit_code_for(e);
  }
}

namespace {

double variance_from_fit(const std::string& path, const std::string& coefficient) {
  std::ifstream in(path);
  if (!in) throw ConfigError("power.from_fit: cannot open '" + path + "'");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("power.from_fit: '" + path + "' is not valid JSON");
  }
  if (!j.contains("coefficients") || !j["coefficients"].is_array())
    throw ConfigError("power.from_fit: '" + path + "' has no coefficients array");
  for (const auto& c : j["coefficients"])
    if (c.value("term", "") == coefficient) {
      if (!c.contains("variance") || !c["variance"].is_number())
        throw ConfigError("power.from_fit: coefficient '" + coefficient + "' has no variance");
      return c["variance"].get<double>();
    }
  throw ConfigError("power.coefficient: '" + coefficient + "' not found in '" + path + "'");
}

}  // namespace

int cmd_power(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  try {
    const PowerSection& p = cfg.power;
    if (p.grid.empty()) throw ConfigError("power.grid is required");
    ChiSqParams{p.df, 0.0, p.alpha}.validate();
    const bool general = p.beta0 || p.hypothesis || p.G0 || p.S0;
    PowerReport report;
    if (general) {
      if (!(p.beta0 && p.hypothesis && p.G0 && p.S0))
        throw ConfigError("power: a matrix effect needs beta0, hypothesis, G0 and S0 together");
      if (p.effect || p.sigma2 || p.from_fit) throw ConfigError("power: give either a scalar or a matrix effect, not both");
      const GeneralEffect effect{*p.beta0, *p.hypothesis, *p.G0, *p.S0};
      const fs::path dir = prepare_output(cfg.output_directory);
      report = power_curve(effect, p.grid, p.alpha, p.conventions);
      std::ostringstream csv;
      write_power_csv(csv, report);
      write_file(dir / "power.csv", csv.str());
    } else {
      if (!p.effect) throw ConfigError("power.effect is required");
      double sigma2 = 0.0;
      if (p.from_fit) {
        if (p.sigma2) throw ConfigError("power: give sigma2 or from_fit, not both");
        if (!p.coefficient) throw ConfigError("power.coefficient is required with from_fit");
        sigma2 = variance_from_fit(*p.from_fit, *p.coefficient);
      } else {
        if (!p.sigma2) throw ConfigError("power.sigma2 is required");
        sigma2 = *p.sigma2;
      }
      if (!(sigma2 > 0.0)) throw ConfigError("power.sigma2 must be > 0");
      const fs::path dir = prepare_output(cfg.output_directory);
      report = power_curve(ScalarEffect{*p.effect, sigma2}, p.grid, p.alpha, p.df, p.conventions);
      std::ostringstream csv;
      write_power_csv(csv, report);
      write_file(dir / "power.csv", csv.str());
    }
    out << std::setw(8) << "n" << std::setw(12) << "ncp" << std::setw(10) << "power" << "  convention\n";
    for (const auto& row : report.rows)
      out << std::setw(8) << row.n << std::setw(12) << fixed(row.ncp, 3) << std::setw(10) << fixed(row.power, 3) << "  "
          << to_string(row.convention) << '\n';
    return kExitOk;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return exit_code_for(e);
  }
}

namespace {

ModelSpec build_model(const FitSection& f) {
  if (f.regressors.empty()) throw ConfigError("fit.regressors is required");
  ModelSpec spec;
  for (const auto& r : f.regressors) spec.regressors.push_back(Term::parse(r));
  for (const auto& [name, type] : f.types) {
    try {
      spec.covariate_types[name] = covariate_type_from_string(type);
    } catch (const InvalidParameter& e) {
      throw ConfigError("fit.types." + name + ": " + e.what());
    }
  }
  if (f.test_coefficient && f.hypothesis) throw ConfigError("fit: give test or hypothesis, not both");
  if (f.test_coefficient) {
    const auto labels = spec.labels();
    const auto it = std::find(labels.begin(), labels.end(), Term::parse(*f.test_coefficient).label());
    if (it == labels.end()) throw ConfigError("fit.test.coefficient: '" + *f.test_coefficient + "' is not a model term");
    spec.hypothesis = Hypothesis::select(spec.p(), it - labels.begin(), f.test_value);
  } else if (f.hypothesis) {
    spec.hypothesis = *f.hypothesis;
  }
  return spec;
}

json optimizer_json(const MinimizeResult& r) {
  return {{"method", std::string(to_string(r.method))},
          {"converged", r.converged},
          {"iterations", r.iterations},
          {"evaluations", r.evaluations},
          {"restarts", r.restarts_used},
          {"objective", number_or_null(r.objective_value)},
          {"gradient_norm", number_or_null(r.gradient_norm)}};
}

json test_json(const TestResult& t) {
  return {{"statistic", t.statistic}, {"df", t.df}, {"critical_value", t.critical_value}, {"alpha", t.alpha},
          {"reject", t.reject}};
}

}  // namespace

int cmd_fit(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  try {
    const FitSection& f = cfg.fit;
    require_file(f.data, "fit.data");
    if (!(f.alpha > 0.0 && f.alpha < 1.0)) throw ConfigError("fit.alpha must lie in (0, 1)");
    const ModelSpec spec = build_model(f);
    const fs::path dir = prepare_output(cfg.output_directory);
    const PanelData data = read_panel_csv_file(*f.data);
    const MomentSystem ms(data, spec);
    GmmOptions opts;
    opts.method = f.optimizer;
    const GmmFit fit = fit_unrestricted(ms, opts);

    const auto labels = spec.labels();
    json coefficients = json::array();
    for (Eigen::Index j = 0; j < ms.p(); ++j) {
      const double v = fit.V_hat(j, j);
      coefficients.push_back({{"term", labels[static_cast<std::size_t>(j)]},
                              {"estimate", fit.beta_hat(j)},
                              {"variance", v},
                              {"std_error", std::sqrt(v / static_cast<double>(ms.n()))}});
    }
    json doc = {
        {"n", ms.n()},
        {"T", ms.n_times()},
        {"p", ms.p()},
        {"q", ms.q()},
        {"nominal_q", ms.nominal_q()},
        {"Q", fit.Q_value},
        {"beta_hat", std::vector<double>(fit.beta_hat.begin(), fit.beta_hat.end())},
        {"v_diagonal", [&] {
           const Vector d = fit.V_hat.diagonal();
           return std::vector<double>(d.begin(), d.end());
         }()},
        {"coefficients", coefficients},
        {"diagnostics",
         {{"step1", optimizer_json(fit.step1_optimizer)},
          {"step2", optimizer_json(fit.optimizer)},
          {"weight_condition_number", number_or_null(fit.weight_info.condition_number)},
          {"weight_regularized", fit.weight_info.regularized},
          {"weight_ridge", fit.weight_info.ridge},
          {"few_subjects", fit.weight_info.few_subjects},
          {"information_condition_number", number_or_null(fit.information_condition)},
          {"exact_fit", fit.exact_fit}}},
    };
    if (spec.hypothesis) {
      const GmmFit restricted = fit_restricted(ms, *spec.hypothesis, fit, opts);
      const TestResult wald = wald_statistic(fit, *spec.hypothesis, ms.n(), f.alpha);
      const TestResult dm = dm_statistic(restricted, fit, ms.n(), f.alpha);
      doc["tests"] = {{"wald", test_json(wald)}, {"dm", test_json(dm)}};
      doc["restricted"] = {{"beta", std::vector<double>(restricted.beta_hat.begin(), restricted.beta_hat.end())},
                           {"Q", restricted.Q_value},
                           {"optimizer", optimizer_json(restricted.optimizer)}};
    }
    write_file(dir / "fit.json", doc.dump(2) + "\n");

    constexpr int kLabel = 14, kCol = 13;
    out << std::left << std::setw(kLabel) << "Parameters" << std::right;
    for (const auto& l : labels) out << std::setw(kCol) << l;
    out << '\n' << std::left << std::setw(kLabel) << "Coefficients" << std::right;
    for (Eigen::Index j = 0; j < ms.p(); ++j) out << std::setw(kCol) << fixed(fit.beta_hat(j), 5);
    out << '\n' << std::left << std::setw(kLabel) << "Variance" << std::right;
    for (Eigen::Index j = 0; j < ms.p(); ++j) out << std::setw(kCol) << fixed(fit.V_hat(j, j), 5);
    out << '\n' << std::left << std::setw(kLabel) << "Std. error" << std::right;
    for (Eigen::Index j = 0; j < ms.p(); ++j)
      out << std::setw(kCol) << fixed(std::sqrt(fit.V_hat(j, j) / static_cast<double>(ms.n())), 5);
    out << "\n\nn = " << ms.n() << ", T = " << ms.n_times() << ", q = " << ms.q() << ", Q = " << format_double(fit.Q_value)
        << '\n';
    if (doc.contains("tests"))
      out << "Wald = " << fixed(doc["tests"]["wald"]["statistic"].get<double>(), 4)
          << ", DM = " << fixed(doc["tests"]["dm"]["statistic"].get<double>(), 4) << '\n';
    return kExitOk;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return exit_code_for(e);
  }
}

namespace {

std::vector<double> read_statistics(const QQSection& q) {
  std::ifstream in(*q.statistics);
  if (!in) throw ConfigError("qq.statistics: cannot open '" + *q.statistics + "'");
  std::string line;
  if (!std::getline(in, line)) throw DataFormatError("empty statistics file", 0);
  const auto header = split_csv_line(line);
  auto column = [&](const std::string& name) -> std::optional<std::size_t> {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) return std::nullopt;
    return static_cast<std::size_t>(it - header.begin());
  };
  const auto value_col = column(q.column);
  if (!value_col) throw DataFormatError("no column '" + q.column + "' in header", 1);
  const auto n_col = column("n");
  const auto variant_col = column("variant");
  if (q.n && !n_col) throw DataFormatError("--n filter given but the file has no 'n' column", 1);
  if (q.variant && !variant_col) throw DataFormatError("--variant filter given but the file has no 'variant' column", 1);

  std::vector<double> stats;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const auto fields = split_csv_line(line);
    if (fields.size() != header.size())
      throw DataFormatError("expected " + std::to_string(header.size()) + " fields", line_no);
    if (q.n) {
      long long n = 0;
      if (!parse_int(fields[*n_col], n)) throw DataFormatError("'n' is not an integer", line_no);
      if (n != *q.n) continue;
    }
    if (q.variant && fields[*variant_col] != *q.variant) continue;
    const std::string& f = fields[*value_col];
    if (f.empty()) continue;  // replication that failed to estimate
    double v = 0.0;
    if (!parse_double(f, v) || !std::isfinite(v))
      throw DataFormatError("column '" + q.column + "' is not a finite number", line_no);
    stats.push_back(v);
  }
  return stats;
}

}  // namespace

int cmd_qq(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  try {
    const QQSection& q = cfg.qq;
    require_file(q.statistics, "qq.statistics");
    ChiSqParams{q.df, q.ncp, 0.05}.validate();
    if (q.variant && *q.variant != "alternative" && *q.variant != "null")
      throw ConfigError("qq.variant must be 'alternative' or 'null'");
    const fs::path dir = prepare_output(cfg.output_directory);
    const std::vector<double> stats = read_statistics(q);
    if (stats.size() < 10)
      throw ConfigError("qq: need at least 10 statistics, found " + std::to_string(stats.size()));
    const auto points = qq_points(stats, q.df, q.ncp);
    std::ostringstream csv;
    write_qq_csv(csv, points);
    write_file(dir / "qq.csv", csv.str());
    out << "points = " << points.size() << ", correlation = " << fixed(qq_correlation(points), 4) << '\n';
    return kExitOk;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return exit_code_for(e);
  }
}

namespace {

std::vector<Eigen::Index> to_index(const std::vector<long long>& v, const char* flag) {
  std::vector<Eigen::Index> out;
  for (long long x : v) {
    if (x < 1) throw ConfigError(std::string(flag) + " values must be positive integers");
    out.push_back(static_cast<Eigen::Index>(x));
  }
  return out;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"GMM estimation and power analysis for longitudinal data with time-dependent covariates", "gmmpower"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "gmmpower 0.1.0");

  struct Common {
    std::optional<std::string> config;
    std::optional<std::string> output;
  };
  auto add_common = [](CLI::App* sub, Common& c) {
    sub->add_option("--config", c.config, "JSON config file; flags given on the command line take precedence");
    sub->add_option("-o,--output", c.output, "Output directory (default: current directory)");
  };

  Common sim_c, pow_c, fit_c, qq_c;

  CLI::App* sim = app.add_subcommand("simulate", "Monte Carlo rejection rates (writes sim_report.csv, statistics.csv)");
  add_common(sim, sim_c);
  std::optional<std::string> s_setting, s_optimizer;
  std::vector<long long> s_n;
  std::optional<long long> s_T, s_reps, s_oracle;
  std::optional<double> s_alpha;
  std::optional<std::uint64_t> s_seed;
  std::optional<unsigned> s_threads;
  sim->add_option("--setting", s_setting, "Type2 or Type3");
  sim->add_option("--n", s_n, "Sample size(s), comma separated; one report row each")->delimiter(',');
  sim->add_option("--T", s_T, "Time points per subject (>= 2, default 3)");
  sim->add_option("--replications", s_reps, "Datasets per sample size and variant (default 500)");
  sim->add_option("--optimizer", s_optimizer, "BFGS or NelderMead");
  sim->add_option("--alpha", s_alpha, "Test level (default 0.05)");
  sim->add_option("--seed", s_seed, "Master seed");
  sim->add_option("--threads", s_threads, "Worker threads (0 = all cores); results do not depend on it");
  sim->add_option("--oracle-size", s_oracle, "Subjects in the population oracle dataset (default 200000)");

  CLI::App* pow = app.add_subcommand("power", "Theoretical power over a sample-size grid (writes power.csv)");
  add_common(pow, pow_c);
  std::optional<int> p_df;
  std::optional<double> p_alpha, p_effect, p_sigma2;
  std::vector<long long> p_grid;
  std::optional<std::string> p_conv, p_from_fit, p_coef;
  pow->add_option("--df", p_df, "Degrees of freedom (default 1)");
  pow->add_option("--alpha", p_alpha, "Test level (default 0.05)");
  pow->add_option("--grid", p_grid, "Sample sizes n1,n2,... (strictly increasing)")->delimiter(',');
  pow->add_option("--effect", p_effect, "Effect size: alternative minus null coefficient");
  pow->add_option("--sigma2", p_sigma2, "Asymptotic variance of sqrt(n) times the coefficient estimate");
  pow->add_option("--from-fit", p_from_fit, "Take sigma2 from the variance column of a fit.json");
  pow->add_option("--coefficient", p_coef, "Term whose variance --from-fit reads");
  pow->add_option("--convention", p_conv, "Noncentrality convention: standard, half or both");

  CLI::App* fitc = app.add_subcommand("fit", "Two-step GMM fit of a long-format panel CSV (writes fit.json)");
  add_common(fitc, fit_c);
  std::optional<std::string> f_data, f_test, f_optimizer;
  std::vector<std::string> f_regressors, f_types;
  std::optional<double> f_value, f_alpha;
  fitc->add_option("--data", f_data, "Panel CSV: subject,time,<covariates...>,y with time 0 for pre-sample values");
  fitc->add_option("--regressors", f_regressors, "Terms, e.g. intercept,x,lag(x,1)");
  fitc->add_option("--type", f_types, "Covariate type, name=TimeIndependent|TypeI|TypeII|TypeIII|Predetermined (repeatable)");
  fitc->add_option("--test", f_test, "Test that this term's coefficient equals --test-value");
  fitc->add_option("--test-value", f_value, "Null value for --test (default 0)");
  fitc->add_option("--optimizer", f_optimizer, "BFGS or NelderMead");
  fitc->add_option("--alpha", f_alpha, "Test level (default 0.05)");

  CLI::App* qqc = app.add_subcommand("qq", "QQ data against a noncentral chi-square (writes qq.csv)");
  add_common(qqc, qq_c);
  std::optional<std::string> q_stats, q_column, q_variant;
  std::optional<int> q_df;
  std::optional<double> q_ncp;
  std::optional<long long> q_n;
  qqc->add_option("--statistics", q_stats, "CSV with a header row, e.g. statistics.csv from simulate");
  qqc->add_option("--column", q_column, "Column holding the statistics (default wald)");
  qqc->add_option("--df", q_df, "Degrees of freedom (default 1)");
  qqc->add_option("--ncp", q_ncp, "Noncentrality, standard convention (default 0)");
  qqc->add_option("--n", q_n, "Keep rows whose n column equals this value");
  qqc->add_option("--variant", q_variant, "Keep rows whose variant column is alternative or null");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  if (!reversed.empty()) reversed.pop_back();
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return kExitConfig;
  }

  auto load = [&](const Common& c) {
    RunConfig cfg = c.config ? load_config_file(*c.config) : RunConfig{};
    if (c.output) cfg.output_directory = *c.output;
    return cfg;
  };

  try {
    if (sim->parsed()) {
      RunConfig cfg = load(sim_c);
      auto& s = cfg.simulate;
      if (s_setting) s.config.setting = setting_from_string(*s_setting);
      if (!s_n.empty()) s.n_grid = to_index(s_n, "--n");
      if (s_T) s.config.T = *s_T;
      if (s_reps) {
        if (*s_reps < 1) throw ConfigError("--replications must be a positive integer");
        s.config.replications = static_cast<int>(*s_reps);
      }
      if (s_optimizer) s.config.optimizer = method_from_string(*s_optimizer);
      if (s_alpha) s.config.alpha = *s_alpha;
      if (s_seed) s.config.master_seed = *s_seed;
      if (s_threads) s.threads = *s_threads;
      if (s_oracle) s.oracle_size = *s_oracle;
      return cmd_simulate(cfg, out, err);
    }
    if (pow->parsed()) {
      RunConfig cfg = load(pow_c);
      auto& p = cfg.power;
      if (p_df) p.df = *p_df;
      if (p_alpha) p.alpha = *p_alpha;
      if (!p_grid.empty()) p.grid = to_index(p_grid, "--grid");
      if (p_effect) p.effect = *p_effect;
      if (p_sigma2) {
        p.sigma2 = *p_sigma2;
        p.from_fit.reset();
      }
      if (p_from_fit) {
        p.from_fit = *p_from_fit;
        p.sigma2.reset();
      }
      if (p_coef) p.coefficient = *p_coef;
      if (p_conv) p.conventions = *p_conv == "both" ? std::vector{NcpConvention::Standard, NcpConvention::Half}
                                                    : std::vector{convention_from_string(*p_conv)};
      return cmd_power(cfg, out, err);
    }
    if (fitc->parsed()) {
      RunConfig cfg = load(fit_c);
      auto& f = cfg.fit;
      if (f_data) f.data = *f_data;
      if (!f_regressors.empty()) {
        // Split on commas outside parentheses so lag(x,1) stays whole.
        f.regressors.clear();
        for (const auto& group : f_regressors) {
          std::string cur;
          int depth = 0;
          for (char ch : group) {
            if (ch == '(') ++depth;
            if (ch == ')') --depth;
            if (ch == ',' && depth == 0) {
              f.regressors.push_back(cur);
              cur.clear();
            } else {
              cur += ch;
            }
          }
          f.regressors.push_back(cur);
        }
      }
      for (const auto& t : f_types) {
        const auto eq = t.find('=');
        if (eq == std::string::npos || eq == 0) throw ConfigError("--type expects name=Type, got '" + t + "'");
        f.types[t.substr(0, eq)] = t.substr(eq + 1);
      }
      if (f_test) {
        f.test_coefficient = *f_test;
        f.hypothesis.reset();
      }
      if (f_value) f.test_value = *f_value;
      if (f_optimizer) f.optimizer = method_from_string(*f_optimizer);
      if (f_alpha) f.alpha = *f_alpha;
      return cmd_fit(cfg, out, err);
    }
    RunConfig cfg = load(qq_c);
    auto& q = cfg.qq;
    if (q_stats) q.statistics = *q_stats;
    if (q_column) q.column = *q_column;
    if (q_df) q.df = *q_df;
    if (q_ncp) q.ncp = *q_ncp;
    if (q_n) {
      if (*q_n < 1) throw ConfigError("--n must be a positive integer");
      q.n = *q_n;
    }
    if (q_variant) q.variant = *q_variant;
    return cmd_qq(cfg, out, err);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return exit_code_for(e);
  }
}

}  // namespace gmmpower::cli
