#pragma once

#include <span>
#include <string>
#include <vector>

#include "rbto/density.hpp"
#include "rbto/fem.hpp"
#include "rbto/uncertainty.hpp"

namespace rbto {

enum class PerformanceKind { Compliance, PNormStress };

PerformanceKind parse_performance_kind(const std::string& name);
const char* performance_kind_name(PerformanceKind k);

// Failure when g >= threshold.
struct PerformanceSpec {
  PerformanceKind kind = PerformanceKind::Compliance;
  double threshold = 1.0;
  double p = 30.0;

  void validate() const;
};

struct PerformanceSample {
  double g = 0.0;
  bool is_failure = false;
  std::vector<double> grad;             // dg/drho_t, empty unless requested
  double compliance = 0.0;
  std::vector<double> compliance_grad;  // dC/drho_t, empty unless requested
  double max_von_mises = 0.0;
  UncertainSample xi;
  int iteration = 0;
};

struct GradientRequest {
  bool g = true;
  bool compliance = true;
};

// (sum_e s_e^p)^(1/p), evaluated with max scaling.
double pnorm(std::span<const double> values, double p);

PerformanceSample eval_compliance_g(const FemSystem& system, std::span<const double> rho_t, const SimpLaw& simp,
                                    const UncertainSample& xi, double threshold, bool with_grad = true,
                                    kernels::Exec exec = kernels::Exec::Serial);

// g = p-norm of the element von Mises stresses. The gradient is the explicit
// modulus term minus lambda^T dK/drho_t u with K lambda = dg/dU. Zero stresses
// are replaced by eps_guard inside derivative denominators.
PerformanceSample eval_pnorm_stress_g(const FemSystem& system, std::span<const double> rho_t, const SimpLaw& simp,
                                      const UncertainSample& xi, double threshold, double p, GradientRequest request,
                                      kernels::Exec exec = kernels::Exec::Serial);

PerformanceSample evaluate(const FemSystem& system, std::span<const double> rho_t, const SimpLaw& simp,
                           const PerformanceSpec& spec, const UncertainSample& xi, GradientRequest request,
                           kernels::Exec exec = kernels::Exec::Serial);

}  // namespace rbto
