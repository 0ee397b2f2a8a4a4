// Serial reference kernels against their OpenMP counterparts.
#include <benchmark/benchmark.h>

#include <memory>
#include <vector>

#include "rbto/fem.hpp"
#include "rbto/kernels.hpp"
#include "rbto/mesh.hpp"
#include "rbto/performance.hpp"
#include "rbto/reliability.hpp"

namespace {

using rbto::kernels::Exec;

const rbto::FemSystem& system_for(int resolution) {
  static std::vector<std::pair<int, std::unique_ptr<rbto::FemSystem>>> cache;
  for (auto& [r, s] : cache)
    if (r == resolution) return *s;
  cache.emplace_back(resolution, std::make_unique<rbto::FemSystem>(rbto::build_l_beam(120.0, resolution)));
  return *cache.back().second;
}

Exec exec_of(const benchmark::State& state) { return state.range(1) ? Exec::Parallel : Exec::Serial; }

void BM_Assemble(benchmark::State& state) {
  const auto& sys = system_for(static_cast<int>(state.range(0)));
  const int ne = sys.table().num_elements;
  std::vector<double> a(ne, 0.7), b(ne, 0.3), values(sys.plan().inner.size());
  for (auto _ : state) {
    rbto::kernels::assemble_values(sys.table(), sys.plan(), a, b, values, exec_of(state));
    benchmark::DoNotOptimize(values.data());
  }
  state.SetItemsProcessed(state.iterations() * ne);
}

void BM_Strains(benchmark::State& state) {
  const auto& sys = system_for(static_cast<int>(state.range(0)));
  const Eigen::VectorXd u = Eigen::VectorXd::Random(sys.mesh().num_dofs());
  Eigen::MatrixXd strain;
  for (auto _ : state) {
    rbto::kernels::element_strains(sys.table(), u, strain, exec_of(state));
    benchmark::DoNotOptimize(strain.data());
  }
  state.SetItemsProcessed(state.iterations() * sys.table().num_elements);
}

void BM_Bilinear(benchmark::State& state) {
  const auto& sys = system_for(static_cast<int>(state.range(0)));
  const Eigen::VectorXd u = Eigen::VectorXd::Random(sys.mesh().num_dofs());
  std::vector<double> out(sys.table().num_elements);
  const auto split = rbto::kernels::material_split(2, 0.3);
  for (auto _ : state) {
    rbto::kernels::element_bilinear(sys.table(), u, u, split, out, exec_of(state));
    benchmark::DoNotOptimize(out.data());
  }
  state.SetItemsProcessed(state.iterations() * sys.table().num_elements);
}

// Crude Monte Carlo over full FEM solves: the outer sample loop is the parallel axis.
void BM_MonteCarloSolves(benchmark::State& state) {
  const auto& sys = system_for(static_cast<int>(state.range(0)));
  const std::vector<double> rho(sys.table().num_elements, 1.0);
  const rbto::UncertainModel model({rbto::Family::Gaussian, 55.0, 20.0}, {rbto::Family::Lognormal, 207.0, 20.7},
                                   {rbto::Family::Uniform, 0.3, 0.115});
  const rbto::PerformanceSpec spec{rbto::PerformanceKind::PNormStress, 370.0, 30.0};
  const rbto::LimitState g = [&](const rbto::UncertainSample& xi) {
    return rbto::evaluate(sys, rho, rbto::SimpLaw{}, spec, xi, {false, false}).g;
  };
  for (auto _ : state) {
    const auto r = rbto::monte_carlo_pf(g, model, 370.0, 16, 7, exec_of(state));
    benchmark::DoNotOptimize(r.p_f);
  }
  state.SetItemsProcessed(state.iterations() * 16);
}

void Args(benchmark::internal::Benchmark* b) {
  for (int res : {42, 129})
    for (int par : {0, 1}) b->Args({res, par});
  b->ArgNames({"res", "parallel"});
}

BENCHMARK(BM_Assemble)->Apply(Args);
BENCHMARK(BM_Strains)->Apply(Args);
BENCHMARK(BM_Bilinear)->Apply(Args);
BENCHMARK(BM_MonteCarloSolves)->Apply(Args)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
