#include "rbto/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <limits>
#include <memory>
#include <numeric>
#include <optional>

#include "rbto/error.hpp"

namespace rbto {

void RunConfig::validate() const {
  if (omega_c < 0.0 || omega_v < 0.0 || kappa_f < 0.0) throw InvalidArgument("objective weights must be non-negative");
  if (!(p_a > 0.0 && p_a < 1.0)) throw InvalidArgument("target failure probability must lie in (0, 1)");
  performance.validate();
  if (batch_size < 1) throw InvalidArgument("batch size must be at least 1");
  if (history_period < 1 || correction_period < 1) throw InvalidArgument("periods must be at least 1");
  if (!(learning_rate > 0.0)) throw InvalidArgument("learning rate must be positive");
  if (learning_rate_decay < 0.0) throw InvalidArgument("learning rate decay must be non-negative");
  if (max_iterations < 0) throw InvalidArgument("iteration count must be non-negative");
  if (!(simp.q >= 1.0)) throw InvalidArgument("penalization exponent must be at least 1");
  if (!(simp.eta_e > 0.0 && simp.eta_e < 1.0)) throw InvalidArgument("void stiffness ratio must lie in (0, 1)");
  if (!(projection.beta > 0.0)) throw InvalidArgument("projection sharpness must be positive");
  if (!(projection.threshold > 0.0 && projection.threshold < 1.0))
    throw InvalidArgument("projection threshold must lie in (0, 1)");
  if (!(initial_density >= 0.0 && initial_density <= 1.0)) throw InvalidArgument("initial density must lie in [0, 1]");
  if (!(subset.p0 > 0.0 && subset.p0 < 1.0)) throw InvalidArgument("p0 must lie in (0, 1)");
  if (subset.samples_per_level * subset.p0 < 1.0) throw InvalidArgument("samples_per_level * p0 must be at least 1");
  if (stop_window < 1 || !(stop_tolerance > 0.0)) throw InvalidArgument("stopping window and tolerance must be positive");
}

double RunConfig::target_ln_pf() const { return std::log(conservative_target ? 0.5 * p_a : p_a); }

const char* pf_source_name(PfSource s) {
  switch (s) {
    case PfSource::Initial: return "initial";
    case PfSource::Ldt: return "ldt";
    case PfSource::Complement: return "ldt_complement";
    case PfSource::NotRare: return "not_rare";
    case PfSource::Previous: return "previous";
    case PfSource::SubsetSim: return "subset_sim";
  }
  return "?";
}

const char* fallback_name(Fallback f) {
  switch (f) {
    case Fallback::None: return "none";
    case Fallback::History: return "history";
    case Fallback::LastGradient: return "last_gradient";
    case Fallback::NotRare: return "not_rare";
  }
  return "?";
}

double penalized_objective(double mean_compliance, double volume, double ln_pf, const RunConfig& config) {
  const double viol = std::max(ln_pf - config.target_ln_pf(), 0.0);
  return config.omega_c * mean_compliance + config.omega_v * volume + 0.5 * config.kappa_f * viol * viol;
}

std::vector<double> objective_gradient(const DensityChain& chain, const DensityField& state,
                                       std::span<const double> measures,
                                       std::span<const std::vector<double>* const> compliance_grads,
                                       std::span<const double> grad_ln_pf, double ln_pf, const RunConfig& config) {
  const std::size_t ne = measures.size();
  std::vector<double> g(ne, 0.0);
  if (!compliance_grads.empty() && config.omega_c != 0.0) {
    const double w = config.omega_c / (config.gradient_mean ? static_cast<double>(compliance_grads.size()) : 1.0);
    for (const auto* cg : compliance_grads)
      for (std::size_t e = 0; e < ne; ++e) g[e] += w * (*cg)[e];
  }
  for (std::size_t e = 0; e < ne; ++e) g[e] += config.omega_v * measures[e];
  const double viol = std::max(ln_pf - config.target_ln_pf(), 0.0);
  if (viol > 0.0 && config.kappa_f != 0.0 && !grad_ln_pf.empty())
    for (std::size_t e = 0; e < ne; ++e) g[e] += config.kappa_f * viol * grad_ln_pf[e];
  return chain.backprop(state, g);
}

void sgd_step(std::vector<double>& rho, std::span<const double> grad, double learning_rate) {
  if (grad.size() != rho.size()) throw InvalidArgument("gradient length does not match the design");
  for (std::size_t e = 0; e < rho.size(); ++e) rho[e] -= learning_rate * grad[e];
  clamp_unit(rho);
}

LimitState design_limit_state(const FemSystem& system, std::vector<double> rho_t, const SimpLaw& simp,
                              const PerformanceSpec& spec) {
  auto design = std::make_shared<const std::vector<double>>(std::move(rho_t));
  return [&system, design, simp, spec](const UncertainSample& xi) {
    return evaluate(system, *design, simp, spec, xi, {false, false}).g;
  };
}

namespace {

struct LdtEstimate {
  double ln_pf;
  PfSource source;
  std::vector<double> grad;
};

// ln P_f and its gradient from a solved tilt. Below the sample mean the tilt
// describes the safe side, so the failure probability is taken as the
// complement and floored at 1/2.
LdtEstimate from_tilt(const TiltSolution& tilt, std::span<const std::vector<double>* const> grads) {
  std::vector<double> grad = grad_ln_pf(tilt, grads);
  if (tilt.t_star >= 0.0) return {-tilt.rate, PfSource::Ldt, std::move(grad)};
  const double pf = std::max(-std::expm1(-tilt.rate), 0.5);
  const double scale = -(1.0 - pf) / pf;
  for (double& v : grad) v *= scale;
  return {std::log(pf), PfSource::Complement, std::move(grad)};
}

std::optional<TiltSolution> try_tilt(std::span<const double> g, double z, const TiltOptions& opt) {
  try {
    TiltSolution t = solve_tilt(g, z, opt);
    return t;
  } catch (const SolverError&) {
    return std::nullopt;
  }
}

}  // namespace

RunResult run_optimization(const FemSystem& system, const RunConfig& config, const RunCallbacks& callbacks) {
  config.validate();
  const Mesh& mesh = system.mesh();
  const int ne = mesh.num_elements();
  const double radius = config.filter_radius > 0.0 ? config.filter_radius : default_filter_radius(mesh);
  const DensityChain chain(mesh, radius, config.projection);
  const std::vector<double> measures = mesh.measures();
  const double z = config.performance.threshold;
  const double target = config.target_ln_pf();
  const kernels::Exec exec = config.deterministic ? kernels::Exec::Serial : kernels::Exec::Parallel;

  RunResult result;
  std::vector<double> rho(ne, config.initial_density);
  FailureHistory history(config.history_period);

  std::vector<double> last_grad;
  std::optional<double> last_ln_pf;
  std::vector<double> window_sums{0.0};  // prefix sums of J

  int k = 1;
  for (; k <= config.max_iterations; ++k) {
    const DensityField state = chain.forward(rho);
    history.begin_iteration(k);
    const auto xi = draw(config.uncertainty, config.seed, StreamTag::Batch, static_cast<std::uint64_t>(k),
                         config.batch_size);

    std::vector<std::optional<PerformanceSample>> evals(config.batch_size);
    std::vector<std::exception_ptr> errors(config.batch_size);
    auto eval_one = [&](int i) {
      try {
        evals[i] = evaluate(system, state.rho_t, config.simp, config.performance, xi[i], {true, true});
        evals[i]->iteration = k;
      } catch (const SolverError&) {
        evals[i].reset();
      } catch (...) {
        errors[i] = std::current_exception();
      }
    };
    if (exec == kernels::Exec::Serial) {
      for (int i = 0; i < config.batch_size; ++i) eval_one(i);
    } else {
#pragma omp parallel for schedule(dynamic)
      for (int i = 0; i < config.batch_size; ++i) eval_one(i);
    }
    for (auto& e : errors)
      if (e) std::rethrow_exception(e);

    std::vector<PerformanceSample> batch;
    for (auto& e : evals)
      if (e) batch.push_back(std::move(*e));
    LogRow row;
    row.k = k;
    row.skipped = config.batch_size - static_cast<int>(batch.size());
    if (batch.empty()) throw SolverError("every sample of iteration " + std::to_string(k) + " failed to solve");

    std::vector<double> g(batch.size());
    std::vector<const std::vector<double>*> g_grads(batch.size()), c_grads(batch.size());
    for (std::size_t i = 0; i < batch.size(); ++i) {
      g[i] = batch[i].g;
      g_grads[i] = &batch[i].grad;
      c_grads[i] = &batch[i].compliance_grad;
      row.mean_compliance += batch[i].compliance;
      row.n_failures += batch[i].is_failure;
      if (config.performance.kind == PerformanceKind::PNormStress && batch[i].max_von_mises > 0.0)
        row.pnorm_overshoot = std::max(row.pnorm_overshoot, batch[i].g / batch[i].max_von_mises);
    }
    row.mean_compliance /= static_cast<double>(batch.size());
    row.g_max = *std::max_element(g.begin(), g.end());
    row.g_mean = std::accumulate(g.begin(), g.end(), 0.0) / static_cast<double>(g.size());

    // Tilt on the batch, then on batch + history, then reuse the last gradient.
    std::optional<LdtEstimate> est;
    auto batch_tilt = try_tilt(g, z, config.tilt);
    if (batch_tilt && batch_tilt->solved()) {
      row.t_star = batch_tilt->t_star;
      est = from_tilt(*batch_tilt, g_grads);
    } else if (batch_tilt && batch_tilt->status == TiltStatus::NotRare) {
      row.fallback = Fallback::NotRare;
      std::vector<double> grad = last_grad;
      if (grad.empty()) {
        // d ln E[g]
        grad.assign(ne, 0.0);
        const double scale = 1.0 / (row.g_mean * static_cast<double>(batch.size()));
        for (const auto* gg : g_grads)
          for (int e = 0; e < ne; ++e) grad[e] += scale * (*gg)[e];
      }
      est = LdtEstimate{0.0, PfSource::NotRare, std::move(grad)};
    } else {
      const auto merged = history.merged_view(batch);
      std::optional<TiltSolution> merged_tilt;
      if (merged.size() > batch.size()) {
        std::vector<double> mg(merged.size());
        std::vector<const std::vector<double>*> mgrad(merged.size());
        for (std::size_t i = 0; i < merged.size(); ++i) {
          mg[i] = merged[i]->g;
          mgrad[i] = &merged[i]->grad;
        }
        merged_tilt = try_tilt(mg, z, config.tilt);
        if (merged_tilt && merged_tilt->solved()) {
          row.fallback = Fallback::History;
          row.t_star = merged_tilt->t_star;
          est = from_tilt(*merged_tilt, mgrad);
        }
      }
      if (!est) row.fallback = Fallback::LastGradient;
    }

    double ln_pf;
    std::vector<double> grad_ln;
    if (est) {
      ln_pf = est->ln_pf;
      row.pf_source = est->source;
      grad_ln = est->grad;
      last_grad = std::move(est->grad);
      last_ln_pf = ln_pf;
    } else {
      grad_ln = last_grad;
      // Before any estimate exists: the allowable level, capped at the target so no penalty applies.
      ln_pf = last_ln_pf.value_or(std::min(std::log(config.p_a), target));
      row.pf_source = last_ln_pf ? PfSource::Previous : PfSource::Initial;
    }

    for (const auto& s : batch) {
      if (!s.is_failure) continue;
      PerformanceSample kept = s;
      kept.compliance_grad.clear();
      history.record(kept);
    }

    if (k % config.correction_period == 0) {
      const LimitState ls = design_limit_state(system, state.rho_t, config.simp, config.performance);
      const auto ss = subset_simulation(ls, config.uncertainty, z, config.subset,
                                        stream_key(config.seed, StreamTag::Subset, static_cast<std::uint64_t>(k), 0),
                                        exec);
      result.last_subset_pf = ss.p_f;
      ln_pf = ss.p_f > 0.0 ? std::log(ss.p_f) : -std::numeric_limits<double>::infinity();
      row.pf_source = PfSource::SubsetSim;
      last_ln_pf = ln_pf;
    }

    const VolumeResult vol = volume_and_gradient(mesh, state.rho_t);
    row.volume_fraction = vol.fraction;
    row.ln_pf = ln_pf;
    row.pf = std::exp(ln_pf);
    row.penalty_active = ln_pf > target && config.kappa_f > 0.0;
    row.J = penalized_objective(row.mean_compliance, vol.volume, ln_pf, config);

    const auto grad = objective_gradient(chain, state, measures, c_grads, grad_ln, ln_pf, config);
    const double lr = config.learning_rate / (1.0 + config.learning_rate_decay * (k - 1));
    sgd_step(rho, grad, lr);

    result.log.push_back(row);
    if (callbacks.on_row) callbacks.on_row(row);
    if (callbacks.on_snapshot && callbacks.snapshot_every > 0 && k % callbacks.snapshot_every == 0)
      callbacks.on_snapshot(k, chain.forward(rho));

    window_sums.push_back(window_sums.back() + row.J);
    const int w = config.stop_window;
    if (config.early_stop && k >= 2 * w && result.last_subset_pf >= 0.0 && result.last_subset_pf <= config.p_a) {
      const double now = (window_sums[k] - window_sums[k - w]) / w;
      const double before = (window_sums[k - w] - window_sums[k - 2 * w]) / w;
      if (std::abs(now - before) < config.stop_tolerance * std::abs(before)) {
        result.stopped_early = true;
        break;
      }
    }
  }
  result.design = chain.forward(rho);
  return result;
}

}  // namespace rbto
