#pragma once

#include <cstdint>
#include <functional>
#include <stdexcept>
#include <vector>

#include "rbto/kernels.hpp"
#include "rbto/uncertainty.hpp"

namespace rbto {

// g(xi); must be safe to call concurrently when used with Exec::Parallel.
using LimitState = std::function<double(const UncertainSample&)>;

// Every Markov chain of a level rejected every move.
class StagnationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Method { SubsetSim, MonteCarlo };

const char* method_name(Method m);

struct ReliabilityEstimate {
  double p_f = 0.0;
  Method method = Method::MonteCarlo;
  double std_error = 0.0;          // crude MC only
  int levels = 0;                  // j
  std::vector<double> thresholds;  // b_0 < b_1 < ... in g
  std::vector<double> acceptance;  // per conditional level
  int samples_per_level = 0;
  long evaluations = 0;
  int failures = 0;                // N_f at the last level
  int clipped = 0;
  bool truncated = false;          // stopped by max_levels or a stalled threshold
  std::uint64_t seed = 0;
};

struct SubsetOptions {
  double p0 = 0.1;
  int samples_per_level = 200;
  double proposal_width = 1.0;
  int max_levels = 30;
};

// Failure is g >= z. Level 0 uses the same substreams as monte_carlo_pf with
// the same seed, so both agree whenever the first level already crosses z.
ReliabilityEstimate subset_simulation(const LimitState& g, const UncertainModel& model, double z,
                                      const SubsetOptions& options, std::uint64_t seed,
                                      kernels::Exec exec = kernels::Exec::Serial);

ReliabilityEstimate monte_carlo_pf(const LimitState& g, const UncertainModel& model, double z, long n_samples,
                                   std::uint64_t seed, kernels::Exec exec = kernels::Exec::Serial);

}  // namespace rbto
