#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "rbto/density.hpp"
#include "rbto/fem.hpp"
#include "rbto/ldt.hpp"
#include "rbto/performance.hpp"
#include "rbto/reliability.hpp"
#include "rbto/uncertainty.hpp"

namespace rbto {

struct RunConfig {
  double omega_c = 1.0;
  double omega_v = 0.2;
  double kappa_f = 1500.0;
  double p_a = 1e-2;
  bool conservative_target = true;  // penalise against p_a / 2
  PerformanceSpec performance;
  UncertainModel uncertainty;

  int batch_size = 10;         // n
  int history_period = 20;     // n_s
  int correction_period = 20;  // m
  double learning_rate = 0.075;
  double learning_rate_decay = 0.0;  // eta_k = eta / (1 + decay (k - 1))
  int max_iterations = 2000;
  bool gradient_mean = true;         // mean or sum of compliance gradients over the batch

  SimpLaw simp;
  Projection projection;
  double filter_radius = 0.0;  // <= 0 selects the mesh default
  double initial_density = 1.0;

  SubsetOptions subset;
  TiltOptions tilt;
  std::uint64_t seed = 1;

  bool early_stop = true;
  int stop_window = 200;
  double stop_tolerance = 1e-4;

  bool deterministic = false;  // evaluate batch samples sequentially

  void validate() const;
  double target_ln_pf() const;
};

enum class PfSource { Initial, Ldt, Complement, NotRare, Previous, SubsetSim };
enum class Fallback { None, History, LastGradient, NotRare };

const char* pf_source_name(PfSource s);
const char* fallback_name(Fallback f);

struct LogRow {
  int k = 0;
  double J = 0.0;
  double mean_compliance = 0.0;
  double volume_fraction = 0.0;
  double pf = 0.0;
  double ln_pf = 0.0;
  PfSource pf_source = PfSource::Initial;
  double t_star = 0.0;
  Fallback fallback = Fallback::None;
  int n_failures = 0;
  double g_max = 0.0;
  double g_mean = 0.0;
  double pnorm_overshoot = 0.0;  // max over the batch of g / max von Mises (stress mode)
  int skipped = 0;
  bool penalty_active = false;
};

// J = omega_c E[C] + omega_v V + kappa_f / 2 [(ln P_f - target)^+]^2
double penalized_objective(double mean_compliance, double volume, double ln_pf, const RunConfig& config);

// Raw-rho gradient of J. Compliance gradients and grad_ln_pf are in rho_t space.
std::vector<double> objective_gradient(const DensityChain& chain, const DensityField& state,
                                       std::span<const double> measures,
                                       std::span<const std::vector<double>* const> compliance_grads,
                                       std::span<const double> grad_ln_pf, double ln_pf, const RunConfig& config);

// rho <- clamp(rho - lr grad, 0, 1)
void sgd_step(std::vector<double>& rho, std::span<const double> grad, double learning_rate);

struct RunResult {
  DensityField design;
  std::vector<LogRow> log;
  bool stopped_early = false;
  double last_subset_pf = -1.0;
};

struct RunCallbacks {
  std::function<void(const LogRow&)> on_row;
  std::function<void(int k, const DensityField&)> on_snapshot;
  int snapshot_every = 0;
};

RunResult run_optimization(const FemSystem& system, const RunConfig& config, const RunCallbacks& callbacks = {});

// g(xi) on a fixed design, for the reliability estimators.
LimitState design_limit_state(const FemSystem& system, std::vector<double> rho_t, const SimpLaw& simp,
                              const PerformanceSpec& spec);

}  // namespace rbto
