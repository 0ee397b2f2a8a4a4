#include "rbto/performance.hpp"

#include <algorithm>
#include <cmath>

#include "rbto/error.hpp"

namespace rbto {

PerformanceKind parse_performance_kind(const std::string& name) {
  if (name == "compliance") return PerformanceKind::Compliance;
  if (name == "pnorm_stress") return PerformanceKind::PNormStress;
  throw InvalidArgument("unknown performance kind '" + name + "'");
}

const char* performance_kind_name(PerformanceKind k) {
  return k == PerformanceKind::Compliance ? "compliance" : "pnorm_stress";
}

void PerformanceSpec::validate() const {
  if (!(threshold > 0.0)) throw InvalidArgument("failure threshold must be positive");
  if (!(p >= 1.0)) throw InvalidArgument("p-norm exponent must be at least 1");
}

double pnorm(std::span<const double> values, double p) {
  double mx = 0.0;
  for (double v : values) mx = std::max(mx, std::abs(v));
  if (mx == 0.0) return 0.0;
  double s = 0.0;
  for (double v : values) s += std::pow(std::abs(v) / mx, p);
  return mx * std::pow(s, 1.0 / p);
}

PerformanceSample eval_compliance_g(const FemSystem& system, std::span<const double> rho_t, const SimpLaw& simp,
                                    const UncertainSample& xi, double threshold, bool with_grad,
                                    kernels::Exec exec) {
  const FemSolution sol = system.solve(rho_t, simp, {xi.E0, xi.nu}, xi.F, exec);
  PerformanceSample out;
  out.xi = xi;
  out.g = out.compliance = sol.compliance;
  out.is_failure = out.g >= threshold;
  out.max_von_mises = *std::max_element(sol.von_mises.begin(), sol.von_mises.end());
  if (with_grad) {
    out.grad = compliance_sensitivity(system, sol, rho_t, simp, exec);
    out.compliance_grad = out.grad;
  }
  return out;
}

PerformanceSample eval_pnorm_stress_g(const FemSystem& system, std::span<const double> rho_t, const SimpLaw& simp,
                                      const UncertainSample& xi, double threshold, double p, GradientRequest request,
                                      kernels::Exec exec) {
  if (!(p >= 1.0)) throw InvalidArgument("p-norm exponent must be at least 1");
  const FemSolution sol = system.solve(rho_t, simp, {xi.E0, xi.nu}, xi.F, exec);
  const auto& table = system.table();
  const int ne = table.num_elements;
  PerformanceSample out;
  out.xi = xi;
  out.compliance = sol.compliance;
  out.g = pnorm(sol.von_mises, p);
  out.is_failure = out.g >= threshold;
  out.max_von_mises = *std::max_element(sol.von_mises.begin(), sol.von_mises.end());
  if (request.compliance) out.compliance_grad = compliance_sensitivity(system, sol, rho_t, simp, exec);
  if (!request.g) return out;

  out.grad.assign(ne, 0.0);
  const double smax = out.max_von_mises;
  if (smax == 0.0) return out;

  // a_e = d sigma_PN / d sigma_vm,e = r_e^(p-1) S^(1/p - 1), r = sigma_vm / max, S = sum r^p
  double s = 0.0;
  for (double v : sol.von_mises) s += std::pow(v / smax, p);
  const double sfac = std::pow(s, 1.0 / p - 1.0);
  const double eps = 1e-12 * threshold;
  const auto split = kernels::material_split(table.dim, xi.nu);
  const Eigen::MatrixXd d_unit = split.c1 * table.DA + split.c2 * table.DB;
  const Eigen::MatrixXd vform = von_mises_form(table.dim);

  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(system.mesh().num_dofs());
  for (int e = 0; e < ne; ++e) {
    const double vm = sol.von_mises[e];
    const double a = std::pow(vm / smax, p - 1.0) * sfac;
    if (a == 0.0) continue;
    const double E = sol.modulus[e];
    // explicit: d sigma_e / d rho_t = (E'/E) sigma_e, so d sigma_vm,e = (E'/E) sigma_vm,e
    out.grad[e] += a * simp.slope(rho_t[e], xi.E0) * (vm / E);
    // d sigma_vm / d u_e = (E D B_e)^T V sigma_e / sigma_vm
    const Eigen::VectorXd dsig = (a / std::max(vm, eps)) * (vform * sol.stress.col(e));
    const Eigen::VectorXd dstrain = E * (d_unit * dsig);
    const double* B = table.B_of(e);
    const int* dofs = table.dofs_of(e);
    for (int c = 0; c < table.ndpe; ++c) {
      double v = 0.0;
      for (int r = 0; r < table.nvoigt; ++r) v += B[r * table.ndpe + c] * dstrain[r];
      rhs[dofs[c]] += v;
    }
  }
  const Eigen::VectorXd lambda = sol.factor->solve(rhs);
  std::vector<double> lku(ne);
  kernels::element_bilinear(table, lambda, sol.displacement, split, lku, exec);
  for (int e = 0; e < ne; ++e) out.grad[e] -= simp.slope(rho_t[e], xi.E0) * lku[e];
  return out;
}

PerformanceSample evaluate(const FemSystem& system, std::span<const double> rho_t, const SimpLaw& simp,
                           const PerformanceSpec& spec, const UncertainSample& xi, GradientRequest request,
                           kernels::Exec exec) {
  if (spec.kind == PerformanceKind::Compliance)
    return eval_compliance_g(system, rho_t, simp, xi, spec.threshold, request.g || request.compliance, exec);
  return eval_pnorm_stress_g(system, rho_t, simp, xi, spec.threshold, spec.p, request, exec);
}

}  // namespace rbto
