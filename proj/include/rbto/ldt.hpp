#pragma once

#include <span>
#include <vector>

#include "rbto/performance.hpp"

namespace rbto {

// log(mean exp(t g_i)), shift-stabilised.
double empirical_cgf(std::span<const double> g, double t);

// Softmax weights exp(t g_i) / sum_j exp(t g_j).
std::vector<double> tilted_weights(std::span<const double> g, double t);

double tilted_mean(std::span<const double> g, double t);

enum class TiltStatus {
  Solved,
  NoSolution,  // z >= max g: no sample reaches the threshold
  NotRare,     // z <= min g: every sample fails
};

const char* tilt_status_name(TiltStatus s);

struct TiltOptions {
  double tolerance = 1e-8;  // relative to |z|
  int max_iterations = 100;
};

struct TiltSolution {
  TiltStatus status = TiltStatus::NoSolution;
  double z = 0.0;
  double t_star = 0.0;
  double cgf = 0.0;   // Lambda(t*)
  double rate = 0.0;  // I(z) = t* z - Lambda(t*)
  std::vector<double> weights;
  bool converged = false;
  int iterations = 0;
  double residual = 0.0;

  bool solved() const { return status == TiltStatus::Solved; }
};

// Safeguarded Newton on tilted_mean(t) = z starting from t = 0. Throws
// SolverError if the iteration limit is reached.
TiltSolution solve_tilt(std::span<const double> g, double z, TiltOptions options = {});

// t* sum_i w_i grad_i.
std::vector<double> grad_ln_pf(const TiltSolution& tilt, std::span<const std::vector<double>* const> grads);
std::vector<double> grad_ln_pf(const TiltSolution& tilt, std::span<const std::vector<double>> grads);

// Failure samples of the last few iterations, cleared every `reset_period`
// iterations.
class FailureHistory {
 public:
  explicit FailureHistory(int reset_period);

  // Call at the top of iteration k (k >= 1); clears when (k - 1) % reset_period == 0.
  void begin_iteration(int k);
  void record(const PerformanceSample& s);
  void clear() { samples_.clear(); }

  int reset_period() const { return reset_period_; }
  std::size_t size() const { return samples_.size(); }
  const std::vector<PerformanceSample>& samples() const { return samples_; }

  // The batch followed by the stored failures.
  std::vector<const PerformanceSample*> merged_view(std::span<const PerformanceSample> batch) const;

 private:
  int reset_period_;
  std::vector<PerformanceSample> samples_;
};

}  // namespace rbto
