#include <benchmark/benchmark.h>
#include <gmmpower/simulate.hpp>

namespace {

using namespace gmmpower;

void BM_NoncentralCdf(benchmark::State& state) {
  const double ncp = static_cast<double>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(noncentral_chisq_cdf(1, ncp, ncp + 1.0));
}
BENCHMARK(BM_NoncentralCdf)->Arg(1)->Arg(10)->Arg(100)->Arg(1000);

void BM_PowerFromNcp(benchmark::State& state) {
  for (auto _ : state) benchmark::DoNotOptimize(theoretical_power(1, 10.097, 0.05));
}
BENCHMARK(BM_PowerFromNcp);

void BM_Fit(benchmark::State& state, Setting setting, Method method) {
  SimConfig cfg;
  cfg.setting = setting;
  cfg.n = state.range(0);
  const MomentSystem ms(generate_replication(cfg, 0), setting_model(setting));
  GmmOptions opts;
  opts.method = method;
  for (auto _ : state) benchmark::DoNotOptimize(fit_unrestricted(ms, opts).beta_hat);
}
BENCHMARK_CAPTURE(BM_Fit, type2_bfgs, Setting::Type2, Method::BFGS)->Arg(100)->Arg(2000);
BENCHMARK_CAPTURE(BM_Fit, type3_bfgs, Setting::Type3, Method::BFGS)->Arg(100)->Arg(2000);
BENCHMARK_CAPTURE(BM_Fit, type2_nelder_mead, Setting::Type2, Method::NelderMead)->Arg(100);

void BM_MomentSystem(benchmark::State& state) {
  SimConfig cfg;
  cfg.n = state.range(0);
  const PanelData data = generate_replication(cfg, 0);
  const ModelSpec spec = setting_model(Setting::Type2);
  for (auto _ : state) benchmark::DoNotOptimize(MomentSystem(data, spec).q());
}
BENCHMARK(BM_MomentSystem)->Arg(100)->Arg(2000);

void BM_Replications(benchmark::State& state) {
  SimConfig cfg;
  cfg.setting = Setting::Type3;
  cfg.n = 100;
  cfg.replications = 50;
  const PopulationOracle oracle = population_oracle(Setting::Type3, 20000);
  RunOptions opts;
  opts.threads = 1;
  opts.oracle = &oracle;
  for (auto _ : state) benchmark::DoNotOptimize(run_experiment(cfg, opts).wald_rate);
}
BENCHMARK(BM_Replications)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
