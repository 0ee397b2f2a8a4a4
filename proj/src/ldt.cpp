#include "rbto/ldt.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "rbto/error.hpp"

namespace rbto {

namespace {

struct Moments {
  double mean;
  double var;
};

double shift_for(std::span<const double> g, double t) {
  const auto [lo, hi] = std::minmax_element(g.begin(), g.end());
  return t >= 0.0 ? *hi : *lo;
}

Moments tilted_moments(std::span<const double> g, double t) {
  const double c = shift_for(g, t);
  double sw = 0.0, sg = 0.0;
  for (double v : g) {
    const double w = std::exp(t * (v - c));
    sw += w;
    sg += w * (v - c);
  }
  const double m = sg / sw;
  double sv = 0.0;
  for (double v : g) sv += std::exp(t * (v - c)) * (v - c - m) * (v - c - m);
  return {m + c, sv / sw};
}

}  // namespace

double empirical_cgf(std::span<const double> g, double t) {
  if (g.empty()) throw InvalidArgument("empirical CGF needs at least one sample");
  if (t == 0.0) return 0.0;
  const double c = shift_for(g, t);
  double s = 0.0;
  for (double v : g) s += std::exp(t * (v - c));
  return std::log(s / static_cast<double>(g.size())) + t * c;
}

std::vector<double> tilted_weights(std::span<const double> g, double t) {
  if (g.empty()) throw InvalidArgument("tilted weights need at least one sample");
  const double c = shift_for(g, t);
  std::vector<double> w(g.size());
  double s = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i) s += w[i] = std::exp(t * (g[i] - c));
  for (double& v : w) v /= s;
  return w;
}

double tilted_mean(std::span<const double> g, double t) {
  if (g.empty()) throw InvalidArgument("tilted mean needs at least one sample");
  return tilted_moments(g, t).mean;
}

const char* tilt_status_name(TiltStatus s) {
  switch (s) {
    case TiltStatus::Solved: return "solved";
    case TiltStatus::NoSolution: return "no_solution";
    case TiltStatus::NotRare: return "not_rare";
  }
  return "?";
}

TiltSolution solve_tilt(std::span<const double> g, double z, TiltOptions options) {
  if (g.empty()) throw InvalidArgument("tilt solve needs at least one sample");
  TiltSolution sol;
  sol.z = z;
  const auto [lo_it, hi_it] = std::minmax_element(g.begin(), g.end());
  if (z <= *lo_it) {
    sol.status = TiltStatus::NotRare;
    return sol;
  }
  if (z >= *hi_it) {
    sol.status = TiltStatus::NoSolution;
    return sol;
  }

  const double n = static_cast<double>(g.size());
  const double mean = std::accumulate(g.begin(), g.end(), 0.0) / n;
  double var = 0.0;
  for (double v : g) var += (v - mean) * (v - mean);
  const double unit = 1.0 / std::sqrt(var / n);
  const double tol = options.tolerance * (z != 0.0 ? std::abs(z) : 1.0 / unit);
  constexpr double inf = std::numeric_limits<double>::infinity();

  double lo = -inf, hi = inf, t = 0.0;
  double h = 0.0;
  for (int it = 0; it <= options.max_iterations; ++it) {
    const Moments m = tilted_moments(g, t);
    h = m.mean - z;
    sol.iterations = it;
    if (std::abs(h) <= tol) {
      sol.converged = true;
      break;
    }
    if (h < 0.0) lo = t;
    else hi = t;
    double next = m.var > 0.0 ? t - h / m.var : std::numeric_limits<double>::quiet_NaN();
    if (!(next > lo && next < hi)) {
      if (std::isfinite(lo) && std::isfinite(hi)) next = 0.5 * (lo + hi);
      else if (std::isfinite(lo)) next = lo + std::max(std::abs(lo), unit);
      else next = hi - std::max(std::abs(hi), unit);
    }
    if (next == t) {
      // Bracket collapsed to adjacent doubles.
      sol.converged = std::abs(h) <= 1e3 * tol;
      break;
    }
    t = next;
  }
  sol.residual = std::abs(h);
  if (!sol.converged)
    throw SolverError("tilt solve did not converge", sol.residual / (z != 0.0 ? std::abs(z) : 1.0));
  sol.status = TiltStatus::Solved;
  sol.t_star = t;
  sol.cgf = empirical_cgf(g, t);
  sol.rate = t * z - sol.cgf;
  sol.weights = tilted_weights(g, t);
  return sol;
}

std::vector<double> grad_ln_pf(const TiltSolution& tilt, std::span<const std::vector<double>* const> grads) {
  if (grads.size() != tilt.weights.size()) throw InvalidArgument("weights and gradients are not index-aligned");
  if (grads.empty()) return {};
  const std::size_t ne = grads[0]->size();
  std::vector<double> out(ne, 0.0);
  for (std::size_t i = 0; i < grads.size(); ++i) {
    if (grads[i]->size() != ne) throw InvalidArgument("gradient lengths differ");
    const double w = tilt.t_star * tilt.weights[i];
    for (std::size_t e = 0; e < ne; ++e) out[e] += w * (*grads[i])[e];
  }
  return out;
}

std::vector<double> grad_ln_pf(const TiltSolution& tilt, std::span<const std::vector<double>> grads) {
  std::vector<const std::vector<double>*> ptr;
  ptr.reserve(grads.size());
  for (const auto& g : grads) ptr.push_back(&g);
  return grad_ln_pf(tilt, ptr);
}

FailureHistory::FailureHistory(int reset_period) : reset_period_(reset_period) {
  if (reset_period < 1) throw InvalidArgument("history reset period must be at least 1");
}

void FailureHistory::begin_iteration(int k) {
  if ((k - 1) % reset_period_ == 0) samples_.clear();
}

void FailureHistory::record(const PerformanceSample& s) {
  if (s.is_failure) samples_.push_back(s);
}

std::vector<const PerformanceSample*> FailureHistory::merged_view(std::span<const PerformanceSample> batch) const {
  std::vector<const PerformanceSample*> out;
  out.reserve(batch.size() + samples_.size());
  for (const auto& s : batch) out.push_back(&s);
  for (const auto& s : samples_) out.push_back(&s);
  return out;
}

}  // namespace rbto
