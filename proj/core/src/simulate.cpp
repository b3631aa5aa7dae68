#include "gmmpower/simulate.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <ostream>
#include <thread>

#include "gmmpower/csv.hpp"
#include "gmmpower/error.hpp"

namespace gmmpower {
namespace {

constexpr std::uint64_t kNullStreamOffset = std::uint64_t{1} << 40;

void check_panel_size(Eigen::Index n, Eigen::Index T) {
  if (n < 1) throw InvalidParameter("number of subjects must be >= 1");
  if (T < 1) throw InvalidParameter("number of time points must be >= 1");
}

double sd_of(double variance, const char* name) {
  if (!(variance >= 0.0) || !std::isfinite(variance))
    throw InvalidParameter(std::string(name) + " must be a finite non-negative variance");
  return std::sqrt(variance);
}

}  // namespace

std::string_view to_string(Setting s) { return s == Setting::Type2 ? "Type2" : "Type3"; }

Setting setting_from_string(std::string_view name) {
  if (name == "Type2" || name == "TypeII" || name == "type2") return Setting::Type2;
  if (name == "Type3" || name == "TypeIII" || name == "type3") return Setting::Type3;
  throw InvalidParameter("unknown setting '" + std::string(name) + "' (expected Type2 or Type3)");
}

PanelData generate_type2(Eigen::Index n, Eigen::Index T, const Type2Params& params, RngStream& stream) {
  check_panel_size(n, T);
  if (!(params.rho * params.rho < 1.0)) throw InvalidParameter("nonstationary covariate process: |rho| must be < 1");
  for (double v : {params.gamma0, params.gamma1, params.gamma2, params.rho})
    if (!std::isfinite(v)) throw InvalidParameter("Setting 1 parameters must be finite");
  const double sd_b = sd_of(params.sigma_b2, "sigma_b2");
  const double sd_e = sd_of(params.sigma_e2, "sigma_e2");
  const double sd_eps = sd_of(params.sigma_eps2, "sigma_eps2");
  const double sd_x0 = std::sqrt(params.sigma_eps2 / (1.0 - params.rho * params.rho));

  Matrix x(n, T), y(n, T);
  Vector x0(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    double prev = normal_sample(stream, 0.0, sd_x0);
    x0(i) = prev;
    const double b = normal_sample(stream, 0.0, sd_b);
    for (Eigen::Index t = 0; t < T; ++t) {
      const double cur = params.rho * prev + normal_sample(stream, 0.0, sd_eps);
      x(i, t) = cur;
      y(i, t) = params.gamma0 + params.gamma1 * cur + params.gamma2 * prev + b + normal_sample(stream, 0.0, sd_e);
      prev = cur;
    }
  }
  PanelData data(n, T);
  data.add_covariate("x", std::move(x));
  data.set_outcome(std::move(y));
  data.set_pre_sample("x", std::move(x0));
  return data;
}

PanelData generate_type3(Eigen::Index n, Eigen::Index T, const Type3Params& params, RngStream& stream) {
  check_panel_size(n, T);
  const double phi = params.beta * params.gamma + params.kappa;
  if (!(std::abs(phi) < 1.0)) throw InvalidParameter("nonstationary feedback process: |beta*gamma + kappa| must be < 1");
  const double sd_u = sd_of(params.sigma_u2, "sigma_u2");
  const double sd_v = sd_of(params.sigma_v2, "sigma_v2");
  const double var_y = (params.beta * params.beta * params.sigma_v2 + params.sigma_u2) / (1.0 - phi * phi);

  Matrix x(n, T), y(n, T);
  Vector y0(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    double prev = normal_sample(stream, 0.0, std::sqrt(var_y));
    y0(i) = prev;
    for (Eigen::Index t = 0; t < T; ++t) {
      const double xt = params.gamma * prev + normal_sample(stream, 0.0, sd_v);
      const double yt = params.beta * xt + params.kappa * prev + normal_sample(stream, 0.0, sd_u);
      x(i, t) = xt;
      y(i, t) = yt;
      prev = yt;
    }
  }
  PanelData data(n, T);
  data.add_covariate("x", std::move(x));
  data.set_outcome(std::move(y));
  data.set_pre_sample(std::string(kOutcomeName), std::move(y0));
  return data;
}

ModelSpec setting_model(Setting setting) {
  ModelSpec spec;
  if (setting == Setting::Type2) {
    spec.regressors = {Term::intercept(), Term::series("x"), Term::lagged("x", 1)};
    spec.covariate_types = {{"x", CovariateType::TypeII}};
    spec.hypothesis = Hypothesis::select(3, 1);
  } else {
    spec.regressors = {Term::series("x"), Term::lagged(std::string(kOutcomeName), 1)};
    spec.covariate_types = {{"x", CovariateType::TypeIII}, {std::string(kOutcomeName), CovariateType::Predetermined}};
    spec.hypothesis = Hypothesis::select(2, 0);
  }
  return spec;
}

Vector setting_true_beta(Setting setting, bool null_variant) {
  if (setting == Setting::Type2) {
    const Type2Params p;
    return Vector{{p.gamma0, null_variant ? 0.0 : p.gamma1, p.gamma2}};
  }
  const Type3Params p;
  return Vector{{null_variant ? 0.0 : p.beta, p.kappa}};
}

void SimConfig::validate() const {
  if (n < 1) throw InvalidParameter("simulate.n must be a positive integer");
  if (T < 2) throw InvalidParameter("simulate.T must be >= 2");
  if (replications < 1) throw InvalidParameter("simulate.replications must be >= 1");
  if (!(alpha > 0.0 && alpha < 1.0)) throw InvalidParameter("simulate.alpha must lie in (0, 1)");
}

RngStream replication_stream(const SimConfig& config, std::uint64_t replication) {
  return RngStream(config.master_seed, replication + (config.null_variant ? kNullStreamOffset : 0));
}

PanelData generate_replication(const SimConfig& config, std::uint64_t replication) {
  RngStream stream = replication_stream(config, replication);
  if (config.setting == Setting::Type2) {
    Type2Params p;
    if (config.null_variant) p.gamma1 = 0.0;
    return generate_type2(config.n, config.T, p, stream);
  }
  Type3Params p;
  if (config.null_variant) p.beta = 0.0;
  return generate_type3(config.n, config.T, p, stream);
}

double PopulationOracle::ncp(Eigen::Index n, NcpConvention convention) const {
  return noncentrality_general(beta_true, hypothesis, G0, S0, n, convention);
}

PopulationOracle population_oracle(Setting setting, Eigen::Index n_oracle, Eigen::Index T, std::uint64_t seed) {
  SimConfig cfg;
  cfg.setting = setting;
  cfg.n = n_oracle;
  cfg.T = T;
  cfg.master_seed = seed;
  const PanelData data = generate_replication(cfg, 0);
  const ModelSpec spec = setting_model(setting);
  const MomentSystem ms(data, spec);

  PopulationOracle oracle;
  oracle.setting = setting;
  oracle.beta_true = setting_true_beta(setting, false);
  oracle.hypothesis = *spec.hypothesis;
  oracle.G0 = ms.jacobian(oracle.beta_true);
  oracle.S0 = ms.weight_target(oracle.beta_true).S;
  oracle.n_oracle = n_oracle;
  return oracle;
}

ExperimentAborted::ExperimentAborted(SimReport report)
    : EstimationFailure("more than 20% of replications failed (" + std::to_string(report.failed) + " of " +
                        std::to_string(report.config.replications) + ")"),
      report_(std::move(report)) {}

namespace {

ReplicationRecord run_replication(const SimConfig& config, const ModelSpec& spec, const GmmOptions& opts, int r) {
  ReplicationRecord rec;
  rec.replication = r;
  try {
    const PanelData data = generate_replication(config, static_cast<std::uint64_t>(r));
    const MomentSystem ms(data, spec);
    const GmmFit unres = fit_unrestricted(ms, opts);
    const GmmFit res = fit_restricted(ms, *spec.hypothesis, unres, opts);
    const TestResult wald = wald_statistic(unres, *spec.hypothesis, ms.n(), config.alpha);
    const TestResult dm = dm_statistic(res, unres, ms.n(), config.alpha);
    rec.converged = true;
    rec.wald = wald.statistic;
    rec.dm = dm.statistic;
    rec.wald_reject = wald.reject;
    rec.dm_reject = dm.reject;
    rec.beta_hat = unres.beta_hat;
    rec.v_diagonal = unres.V_hat.diagonal();
  } catch (const Error& e) {
    rec.converged = false;
    rec.failure = e.what();
  }
  return rec;
}

}  // namespace

SimReport run_experiment(const SimConfig& config, const RunOptions& options) {
  config.validate();
  const ModelSpec spec = setting_model(config.setting);
  GmmOptions opts;
  opts.method = config.optimizer;

  std::optional<PopulationOracle> owned;
  const PopulationOracle* oracle = options.oracle;
  if (oracle && (oracle->setting != config.setting))
    throw InvalidParameter("population oracle was built for a different setting");
  if (!config.null_variant && !oracle) {
    owned = population_oracle(config.setting, kDefaultOracleSize, config.T);
    oracle = &*owned;
  }

  SimReport report;
  report.config = config;
  report.records.resize(static_cast<std::size_t>(config.replications));

  unsigned workers = options.threads ? options.threads : std::max(1u, std::thread::hardware_concurrency());
  workers = std::min<unsigned>(workers, static_cast<unsigned>(config.replications));
  std::atomic<int> next{0};
  auto work = [&]() {
    for (int r = next.fetch_add(1); r < config.replications; r = next.fetch_add(1))
      report.records[static_cast<std::size_t>(r)] = run_replication(config, spec, opts, r);
  };
  if (workers <= 1) {
    work();
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (unsigned w = 0; w < workers; ++w) pool.emplace_back(work);
  }

  int wald_hits = 0;
  int dm_hits = 0;
  for (const auto& rec : report.records) {
    if (!rec.converged) {
      ++report.failed;
      continue;
    }
    ++report.converged;
    wald_hits += rec.wald_reject;
    dm_hits += rec.dm_reject;
  }
  if (report.converged > 0) {
    report.wald_rate = static_cast<double>(wald_hits) / report.converged;
    report.dm_rate = static_cast<double>(dm_hits) / report.converged;
  }
  report.theoretical_size = config.alpha;
  if (config.null_variant) {
    report.theoretical_power = config.alpha;
    report.theoretical_power_half = config.alpha;
  } else {
    report.theoretical_power = theoretical_power(1, oracle->ncp(config.n, NcpConvention::Standard), config.alpha);
    report.theoretical_power_half = theoretical_power(1, oracle->ncp(config.n, NcpConvention::Half), config.alpha);
  }
  if (5 * report.failed > config.replications) throw ExperimentAborted(std::move(report));
  return report;
}

TableRun run_table_row(const SimConfig& config, const RunOptions& options) {
  SimConfig alt = config;
  alt.null_variant = false;
  SimConfig null = config;
  null.null_variant = true;

  std::optional<PopulationOracle> owned;
  RunOptions opts = options;
  if (!opts.oracle) {
    owned = population_oracle(config.setting, kDefaultOracleSize, config.T);
    opts.oracle = &*owned;
  }
  TableRun run;
  run.alternative = run_experiment(alt, opts);
  run.null = run_experiment(null, opts);
  run.row.setting = config.setting;
  run.row.n = config.n;
  run.row.theoretical_power = run.alternative.theoretical_power;
  run.row.theoretical_power_half = run.alternative.theoretical_power_half;
  run.row.theoretical_size = config.alpha;
  run.row.wald_rejection = run.alternative.wald_rate;
  run.row.dm_rejection = run.alternative.dm_rate;
  run.row.wald_type1 = run.null.wald_rate;
  run.row.dm_type1 = run.null.dm_rate;
  run.row.failed = run.alternative.failed + run.null.failed;
  return run;
}

void write_sim_report_csv(std::ostream& out, const std::vector<TableRow>& rows) {
  out << "setting,n,theoretical_power,theoretical_size,wald_rejection,wald_type1,dm_rejection,dm_type1,failed\n";
  for (const auto& r : rows)
    out << to_string(r.setting) << ',' << r.n << ',' << format_double(r.theoretical_power) << ','
        << format_double(r.theoretical_size) << ',' << format_double(r.wald_rejection) << ','
        << format_double(r.wald_type1) << ',' << format_double(r.dm_rejection) << ',' << format_double(r.dm_type1)
        << ',' << r.failed << '\n';
}

void write_statistics_csv(std::ostream& out, const std::vector<const SimReport*>& reports) {
  out << "setting,n,variant,replication,converged,wald,dm\n";
  for (const SimReport* rep : reports) {
    for (const auto& rec : rep->records) {
      out << to_string(rep->config.setting) << ',' << rep->config.n << ','
          << (rep->config.null_variant ? "null" : "alternative") << ',' << rec.replication << ','
          << (rec.converged ? 1 : 0) << ',';
      if (rec.converged)
        out << format_double(rec.wald) << ',' << format_double(rec.dm);
      else
        out << ',';
      out << '\n';
    }
  }
}

std::vector<QQPoint> qq_points(std::vector<double> statistics, int df, double ncp) {
  if (statistics.size() < 10) throw InvalidParameter("QQ data needs at least 10 statistics");
  for (double s : statistics)
    if (!std::isfinite(s)) throw InvalidParameter("QQ statistics must be finite");
  std::sort(statistics.begin(), statistics.end());
  const auto m = static_cast<double>(statistics.size());
  std::vector<QQPoint> out;
  out.reserve(statistics.size());
  for (std::size_t i = 0; i < statistics.size(); ++i) {
    const double prob = (static_cast<double>(i) + 0.5) / m;
    out.push_back({prob, noncentral_chisq_quantile(df, ncp, prob, 1e-8), statistics[i]});
  }
  return out;
}

double qq_correlation(const std::vector<QQPoint>& points) {
  const auto m = static_cast<double>(points.size());
  double mx = 0.0, my = 0.0;
  for (const auto& p : points) {
    mx += p.theoretical;
    my += p.empirical;
  }
  mx /= m;
  my /= m;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (const auto& p : points) {
    sxy += (p.theoretical - mx) * (p.empirical - my);
    sxx += (p.theoretical - mx) * (p.theoretical - mx);
    syy += (p.empirical - my) * (p.empirical - my);
  }
  if (sxx == 0.0 || syy == 0.0) return std::numeric_limits<double>::quiet_NaN();
  return sxy / std::sqrt(sxx * syy);
}

void write_qq_csv(std::ostream& out, const std::vector<QQPoint>& points) {
  out << "prob,theoretical,empirical\n";
  for (const auto& p : points)
    out << format_double(p.prob) << ',' << format_double(p.theoretical) << ',' << format_double(p.empirical) << '\n';
}

}  // namespace gmmpower
