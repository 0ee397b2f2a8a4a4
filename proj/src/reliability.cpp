#include "rbto/reliability.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <numeric>

#include "rbto/error.hpp"

namespace rbto {

namespace {

// Runs body(i) for i in [0, n), serially or with OpenMP, and rethrows the
// exception of the lowest failing index.
template <class F>
void for_each_index(long n, kernels::Exec exec, F&& body) {
  std::vector<std::exception_ptr> errors(n);
  if (exec == kernels::Exec::Serial) {
    for (long i = 0; i < n; ++i) try {
        body(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
  } else {
#pragma omp parallel for schedule(dynamic)
    for (long i = 0; i < n; ++i) try {
        body(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

struct State {
  NormalPoint u;
  double g;
};

}  // namespace

const char* method_name(Method m) { return m == Method::SubsetSim ? "subset_sim" : "monte_carlo"; }

ReliabilityEstimate monte_carlo_pf(const LimitState& g, const UncertainModel& model, double z, long n_samples,
                                   std::uint64_t seed, kernels::Exec exec) {
  if (n_samples < 1) throw InvalidArgument("Monte Carlo needs at least one sample");
  std::vector<char> fail(n_samples);
  for_each_index(n_samples, exec, [&](long i) {
    Substream s(seed, StreamTag::MonteCarlo, 0, static_cast<std::uint64_t>(i));
    fail[i] = g(model.from_normal(draw_normal(s))) >= z;
  });
  ReliabilityEstimate r;
  r.method = Method::MonteCarlo;
  r.seed = seed;
  r.samples_per_level = static_cast<int>(n_samples);
  r.evaluations = n_samples;
  r.failures = static_cast<int>(std::count(fail.begin(), fail.end(), 1));
  r.p_f = static_cast<double>(r.failures) / static_cast<double>(n_samples);
  r.std_error = std::sqrt(r.p_f * (1.0 - r.p_f) / static_cast<double>(n_samples));
  return r;
}

ReliabilityEstimate subset_simulation(const LimitState& g, const UncertainModel& model, double z,
                                      const SubsetOptions& options, std::uint64_t seed, kernels::Exec exec) {
  const double p0 = options.p0;
  if (!(p0 > 0.0 && p0 < 1.0)) throw InvalidArgument("conditional probability must lie in (0, 1)");
  if (options.samples_per_level < 2) throw InvalidArgument("subset simulation needs at least 2 samples per level");
  if (!(options.proposal_width > 0.0)) throw InvalidArgument("proposal width must be positive");
  const int n0 = options.samples_per_level;
  const int seeds = static_cast<int>(std::floor(n0 * p0 + 1e-9));
  if (seeds < 1) throw InvalidArgument("samples_per_level * p0 must be at least 1");
  const int chain_len = static_cast<int>(std::ceil(1.0 / p0 - 1e-9));

  ReliabilityEstimate r;
  r.method = Method::SubsetSim;
  r.seed = seed;
  r.samples_per_level = n0;

  std::vector<State> pop(n0);
  for_each_index(n0, exec, [&](long i) {
    Substream s(seed, StreamTag::MonteCarlo, 0, static_cast<std::uint64_t>(i));
    pop[i].u = draw_normal(s);
    pop[i].g = g(model.from_normal(pop[i].u));
  });
  r.evaluations = n0;

  auto by_g_desc = [](const State& a, const State& b) { return a.g > b.g; };
  int level = 0;
  for (;;) {
    std::stable_sort(pop.begin(), pop.end(), by_g_desc);
    const double b = pop[seeds - 1].g;
    r.thresholds.push_back(b);
    const bool stalled = level > 0 && !(b > r.thresholds[r.thresholds.size() - 2]);
    if (b >= z || stalled || level >= options.max_levels) {
      r.truncated = b < z;
      break;
    }

    // Grow one chain per seed; the seed is the first state of its chain.
    const int n_next = seeds * chain_len;
    std::vector<State> next(n_next);
    std::vector<long> accepted(seeds, 0), evals(seeds, 0);
    const int lvl = level + 1;
    for_each_index(seeds, exec, [&](long c) {
      Substream s(seed, StreamTag::Subset, static_cast<std::uint64_t>(lvl), static_cast<std::uint64_t>(c));
      State cur = pop[c];
      next[c * chain_len] = cur;
      for (int k = 1; k < chain_len; ++k) {
        NormalPoint cand = cur.u;
        bool moved = false;
        for (int d = 0; d < 3; ++d) {
          const double x = cur.u[d] + options.proposal_width * s.normal();
          const double ratio = std::exp(0.5 * (cur.u[d] * cur.u[d] - x * x));
          if (s.uniform() < ratio) {
            cand[d] = x;
            moved = true;
          }
        }
        if (moved) {
          const double gc = g(model.from_normal(cand));
          ++evals[c];
          if (gc >= b) {
            cur = {cand, gc};
            ++accepted[c];
          }
        }
        next[c * chain_len + k] = cur;
      }
    });
    const long acc = std::accumulate(accepted.begin(), accepted.end(), 0L);
    r.evaluations += std::accumulate(evals.begin(), evals.end(), 0L);
    r.acceptance.push_back(static_cast<double>(acc) / static_cast<double>(seeds * (chain_len - 1)));
    if (acc == 0 && chain_len > 1)
      throw StagnationError("subset simulation chains did not move at level " + std::to_string(lvl) +
                            "; retune the proposal width");
    pop = std::move(next);
    ++level;
  }

  const int n = static_cast<int>(pop.size());
  r.failures = static_cast<int>(std::count_if(pop.begin(), pop.end(), [&](const State& s) { return s.g >= z; }));
  r.levels = level;
  r.p_f = static_cast<double>(r.failures) / n * std::pow(p0, level);
  return r;
}

}  // namespace rbto
