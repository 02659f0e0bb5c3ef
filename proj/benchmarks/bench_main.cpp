#include <benchmark/benchmark.h>

#include "mdpstat/baselines.hpp"
#include "mdpstat/estimation.hpp"
#include "mdpstat/inference.hpp"
#include "mdpstat/mdp.hpp"
#include "mdpstat/qocba.hpp"
#include "mdpstat/riverswim.hpp"

namespace {

mdpstat::TabularMdp river(int m_s) {
  mdpstat::RiverSwimSpec spec;
  spec.m_s = m_s;
  return build_riverswim(spec);
}

void bm_solve_q(benchmark::State& state) {
  const auto env = river(static_cast<int>(state.range(0)));
  for (auto _ : state) {
    benchmark::DoNotOptimize(mdpstat::solve_q(env));
  }
}
BENCHMARK(bm_solve_q)->Arg(6)->Arg(13)->Arg(50);

void bm_q_covariance(benchmark::State& state) {
  const auto env = river(static_cast<int>(state.range(0)));
  const auto pi = mdpstat::random_explore_policy(env.m_s, 0.8);
  const auto w = mdpstat::stationary_distribution(mdpstat::extended_transition(env, pi));
  const auto params = mdpstat::ModelParams::from_model(env, w);
  for (auto _ : state) {
    benchmark::DoNotOptimize(mdpstat::q_covariance(params));
  }
}
BENCHMARK(bm_q_covariance)->Arg(6)->Arg(13)->Arg(50);

void bm_allocation_solver(benchmark::State& state) {
  const auto env = river(static_cast<int>(state.range(0)));
  const auto q = mdpstat::solve_q(env);
  const auto coeffs = mdpstat::compute_cost_coefficients(
      env.transition, env.reward_variances(), env.gamma, q,
      mdpstat::ValueVector{q.state_max(), mdpstat::ValueRole::Optimal});
  for (auto _ : state) {
    benchmark::DoNotOptimize(mdpstat::solve_qocba_allocation(coeffs, q, env.transition));
  }
}
BENCHMARK(bm_allocation_solver)->Arg(6)->Arg(13);

void bm_collect_trajectory(benchmark::State& state) {
  const auto env = river(6);
  const auto pi = mdpstat::random_explore_policy(env.m_s, 0.8);
  std::uint64_t stream = 0;
  for (auto _ : state) {
    mdpstat::RngStream rng(42, stream++);
    benchmark::DoNotOptimize(
        mdpstat::collect_trajectory(env, pi, state.range(0), rng));
  }
}
BENCHMARK(bm_collect_trajectory)->Arg(10000)->Arg(100000);

void bm_empirical_model(benchmark::State& state) {
  const auto env = river(6);
  const auto pi = mdpstat::random_explore_policy(env.m_s, 0.8);
  mdpstat::RngStream rng(42, 0);
  const auto data = mdpstat::collect_trajectory(env, pi, state.range(0), rng);
  for (auto _ : state) {
    benchmark::DoNotOptimize(mdpstat::empirical_model(data));
  }
}
BENCHMARK(bm_empirical_model)->Arg(100000);

}  // namespace

BENCHMARK_MAIN();
