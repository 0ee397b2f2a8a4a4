#include "rbto/fem.hpp"

#include <cmath>
#include <string>

#include <Eigen/Dense>
#include <Eigen/IterativeLinearSolvers>
#include <Eigen/OrderingMethods>
#include <Eigen/SparseCholesky>
#include <Eigen/SparseCore>

#include "rbto/error.hpp"

namespace rbto {

namespace {

using SparseMatrix = Eigen::SparseMatrix<double, Eigen::ColMajor, int>;

constexpr int kDenseLimit = 48;
constexpr int kRefinementSteps = 3;
// Refinement targets SolverOptions::tolerance; anything above this is treated as a singular system.
constexpr double kResidualLimit = 1e-6;

SparseMatrix pattern_matrix(const kernels::AssemblyPlan& plan) {
  SparseMatrix k(plan.size, plan.size);
  k.resizeNonZeros(static_cast<Eigen::Index>(plan.inner.size()));
  std::copy(plan.outer.begin(), plan.outer.end(), k.outerIndexPtr());
  std::copy(plan.inner.begin(), plan.inner.end(), k.innerIndexPtr());
  std::fill(k.valuePtr(), k.valuePtr() + plan.inner.size(), 1.0);
  return k;
}

// Shared gather/scatter between full dof vectors and the reduced system.
class ReducedFactor : public StiffnessFactor {
 public:
  ReducedFactor(SparseMatrix k, std::shared_ptr<const std::vector<int>> reduced_index)
      : k_(std::move(k)), reduced_index_(std::move(reduced_index)) {}

  Eigen::VectorXd solve(const Eigen::VectorXd& rhs_full) const final {
    const Eigen::VectorXd b = gather(rhs_full);
    Eigen::VectorXd x = solve_reduced(b);
    const double bnorm = b.norm();
    if (bnorm > 0.0 && refine_) {
      for (int step = 0; step < kRefinementSteps; ++step) {
        const Eigen::VectorXd r = b - k_ * x;
        if (r.norm() <= tolerance_ * bnorm) break;
        x += solve_reduced(r);
      }
    }
    return scatter(x);
  }

  double relative_residual(const Eigen::VectorXd& x_full, const Eigen::VectorXd& rhs_full) const final {
    const Eigen::VectorXd b = gather(rhs_full);
    const double bnorm = b.norm();
    const Eigen::VectorXd r = b - k_ * gather(x_full);
    return bnorm > 0.0 ? r.norm() / bnorm : r.norm();
  }

  void set_refinement(bool refine, double tol) {
    refine_ = refine;
    tolerance_ = tol;
  }

 protected:
  virtual Eigen::VectorXd solve_reduced(const Eigen::VectorXd& b) const = 0;

  Eigen::VectorXd gather(const Eigen::VectorXd& full) const {
    Eigen::VectorXd out(k_.rows());
    const auto& idx = *reduced_index_;
    for (std::size_t d = 0; d < idx.size(); ++d)
      if (idx[d] >= 0) out[idx[d]] = full[static_cast<Eigen::Index>(d)];
    return out;
  }

  Eigen::VectorXd scatter(const Eigen::VectorXd& reduced) const {
    const auto& idx = *reduced_index_;
    Eigen::VectorXd out = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(idx.size()));
    for (std::size_t d = 0; d < idx.size(); ++d)
      if (idx[d] >= 0) out[static_cast<Eigen::Index>(d)] = reduced[idx[d]];
    return out;
  }

  SparseMatrix k_;
  std::shared_ptr<const std::vector<int>> reduced_index_;
  bool refine_ = false;
  double tolerance_ = 1e-10;
};

class DirectFactor final : public ReducedFactor {
 public:
  DirectFactor(SparseMatrix k, std::shared_ptr<const std::vector<int>> reduced_index, double tol)
      : ReducedFactor(std::move(k), std::move(reduced_index)) {
    llt_.compute(k_);
    if (llt_.info() != Eigen::Success)
      throw SolverError("stiffness matrix is singular or not positive definite");
    set_refinement(true, tol);
  }

 private:
  Eigen::VectorXd solve_reduced(const Eigen::VectorXd& b) const override { return llt_.solve(b); }
  // Rows are already in fill-reducing order, see FemSystem.
  Eigen::SimplicialLLT<SparseMatrix, Eigen::Lower, Eigen::NaturalOrdering<int>> llt_;
};

class DenseFactor final : public ReducedFactor {
 public:
  DenseFactor(SparseMatrix k, std::shared_ptr<const std::vector<int>> reduced_index, double tol)
      : ReducedFactor(std::move(k), std::move(reduced_index)), llt_(Eigen::MatrixXd(k_)) {
    if (llt_.info() != Eigen::Success)
      throw SolverError("stiffness matrix is singular or not positive definite");
    set_refinement(true, tol);
  }

 private:
  Eigen::VectorXd solve_reduced(const Eigen::VectorXd& b) const override { return llt_.solve(b); }
  Eigen::LLT<Eigen::MatrixXd> llt_;
};

class IterativeFactor final : public ReducedFactor {
 public:
  IterativeFactor(SparseMatrix k, std::shared_ptr<const std::vector<int>> reduced_index, double tol, int max_iter)
      : ReducedFactor(std::move(k), std::move(reduced_index)) {
    cg_.setTolerance(tol);
    cg_.setMaxIterations(max_iter);
    cg_.compute(k_);
    if (cg_.info() != Eigen::Success) throw SolverError("incomplete Cholesky preconditioner failed");
  }

 private:
  Eigen::VectorXd solve_reduced(const Eigen::VectorXd& b) const override {
    Eigen::VectorXd x = cg_.solve(b);
    if (cg_.info() != Eigen::Success)
      throw SolverError("conjugate gradients did not converge after " + std::to_string(cg_.iterations()) +
                            " iterations (relative residual " + std::to_string(cg_.error()) + ")",
                        cg_.error());
    return x;
  }
  Eigen::ConjugateGradient<SparseMatrix, Eigen::Lower | Eigen::Upper, Eigen::IncompleteCholesky<double>> cg_;
};

}  // namespace

void ElasticityParams::validate() const {
  if (!(E0 > 0.0) || !std::isfinite(E0)) throw InvalidArgument("Young's modulus must be positive");
  if (!(nu > -1.0 && nu < 0.5)) throw InvalidArgument("Poisson's ratio must lie in (-1, 0.5)");
}

FemSystem::FemSystem(Mesh mesh, SolverOptions options) : mesh_(std::move(mesh)), options_(options) {
  mesh_.validate();
  table_ = kernels::build_element_table(mesh_);
  std::vector<char> fixed(static_cast<std::size_t>(mesh_.num_dofs()), 0);
  for (int d : mesh_.fixed_dofs) fixed[d] = 1;
  std::vector<int> reduced(fixed.size(), -1);
  int n = 0;
  for (std::size_t d = 0; d < fixed.size(); ++d)
    if (!fixed[d]) reduced[d] = n++;
  if (n == 0) throw InvalidArgument("every degree of freedom is fixed");

  // Renumber the free dofs once with a fill-reducing ordering; every later
  // factorization then runs in natural order on the permuted pattern.
  const SparseMatrix pattern = pattern_matrix(kernels::build_assembly_plan(table_, reduced));
  Eigen::PermutationMatrix<Eigen::Dynamic, Eigen::Dynamic, int> pinv;
  Eigen::AMDOrdering<int> amd;
  amd(pattern, pinv);
  const Eigen::PermutationMatrix<Eigen::Dynamic, Eigen::Dynamic, int> perm = pinv.inverse();
  for (int& r : reduced)
    if (r >= 0) r = perm.indices()[r];
  plan_ = kernels::build_assembly_plan(table_, reduced);
  reduced_index_ = std::make_shared<const std::vector<int>>(std::move(reduced));
}

Eigen::MatrixXd FemSystem::unit_stiffness(int e, double nu) const {
  const auto split = kernels::material_split(table_.dim, nu);
  const int n = table_.ndpe;
  Eigen::MatrixXd k(n, n);
  for (int r = 0; r < n; ++r)
    for (int c = 0; c < n; ++c) k(r, c) = split.c1 * table_.KA_of(e)[r * n + c] + split.c2 * table_.KB_of(e)[r * n + c];
  return k;
}

Eigen::VectorXd FemSystem::load_pattern() const {
  Eigen::VectorXd f = Eigen::VectorXd::Zero(mesh_.num_dofs());
  for (const auto& lp : mesh_.load_dofs) f[lp.dof] += mesh_.load_sign * lp.weight;
  return f;
}

FemSolution FemSystem::solve(std::span<const double> rho_t, const SimpLaw& simp, const ElasticityParams& params,
                             double load, kernels::Exec exec) const {
  if (static_cast<int>(rho_t.size()) != mesh_.num_elements())
    throw InvalidArgument("density field length does not match the element count");
  params.validate();
  const int ne = mesh_.num_elements();
  FemSolution sol;
  sol.params = params;
  sol.modulus.resize(ne);
  const auto split = kernels::material_split(table_.dim, params.nu);
  std::vector<double> scale_a(ne), scale_b(ne);
  for (int e = 0; e < ne; ++e) {
    sol.modulus[e] = simp.modulus(rho_t[e], params.E0);
    scale_a[e] = sol.modulus[e] * split.c1;
    scale_b[e] = sol.modulus[e] * split.c2;
  }

  SparseMatrix k = pattern_matrix(plan_);
  kernels::assemble_values(table_, plan_, scale_a, scale_b, std::span<double>(k.valuePtr(), plan_.inner.size()),
                           exec);

  std::shared_ptr<StiffnessFactor> factor;
  const bool iterative = options_.kind == SolverOptions::Kind::Iterative ||
                         (options_.kind == SolverOptions::Kind::Auto && plan_.size > options_.direct_limit);
  if (iterative)
    factor = std::make_shared<IterativeFactor>(std::move(k), reduced_index_, options_.tolerance,
                                               options_.max_iterations);
  else if (plan_.size <= kDenseLimit)
    factor = std::make_shared<DenseFactor>(std::move(k), reduced_index_, options_.tolerance);
  else
    factor = std::make_shared<DirectFactor>(std::move(k), reduced_index_, options_.tolerance);

  sol.load = load * load_pattern();
  sol.displacement = factor->solve(sol.load);
  sol.residual = factor->relative_residual(sol.displacement, sol.load);
  if (!std::isfinite(sol.residual) || !sol.displacement.allFinite())
    throw SolverError("linear solve produced non-finite values", sol.residual);
  if (sol.residual > kResidualLimit)
    throw SolverError("stiffness matrix is singular (relative residual " + std::to_string(sol.residual) + ")",
                      sol.residual);
  sol.compliance = sol.load.dot(sol.displacement);
  sol.factor = std::move(factor);

  Eigen::MatrixXd strain;
  kernels::element_strains(table_, sol.displacement, strain, exec);
  const Eigen::MatrixXd d_unit = split.c1 * table_.DA + split.c2 * table_.DB;
  sol.stress = d_unit * strain;
  sol.von_mises.resize(ne);
  for (int e = 0; e < ne; ++e) {
    sol.stress.col(e) *= sol.modulus[e];
    sol.von_mises[e] = von_mises(table_.dim, std::span<const double>(sol.stress.col(e).data(), table_.nvoigt));
  }
  return sol;
}

Eigen::MatrixXd element_stiffness(const Mesh& mesh, int e, const ElasticityParams& params) {
  params.validate();
  const Eigen::MatrixXd B = kernels::strain_displacement(mesh, e);
  const int dim = mesh.dimension;
  const auto split = kernels::material_split(dim, params.nu);
  Eigen::MatrixXd D;
  if (dim == 2) {
    D = Eigen::MatrixXd::Zero(3, 3);
    D << split.c1, split.c2, 0, split.c2, split.c1, 0, 0, 0, 0.5 * (split.c1 - split.c2);
  } else {
    const double lambda = split.c1, mu = split.c2;
    D = Eigen::MatrixXd::Zero(6, 6);
    D.topLeftCorner(3, 3).setConstant(lambda);
    for (int i = 0; i < 3; ++i) D(i, i) += 2.0 * mu;
    for (int i = 3; i < 6; ++i) D(i, i) = mu;
  }
  return params.E0 * mesh.measure(e) * B.transpose() * D * B;
}

FemSolution assemble_and_solve(const FemSystem& system, std::span<const double> rho_t, const SimpLaw& simp,
                               const ElasticityParams& params, double load, kernels::Exec exec) {
  return system.solve(rho_t, simp, params, load, exec);
}

std::vector<double> compliance_sensitivity(const FemSystem& system, const FemSolution& solution,
                                           std::span<const double> rho_t, const SimpLaw& simp,
                                           kernels::Exec exec) {
  const auto& table = system.table();
  std::vector<double> energy(table.num_elements);
  kernels::element_bilinear(table, solution.displacement, solution.displacement,
                            kernels::material_split(table.dim, solution.params.nu), energy, exec);
  for (int e = 0; e < table.num_elements; ++e) energy[e] *= -simp.slope(rho_t[e], solution.params.E0);
  return energy;
}

double von_mises(int dim, std::span<const double> s) {
  if (dim == 2) return std::sqrt(std::max(0.0, s[0] * s[0] + s[1] * s[1] - s[0] * s[1] + 3.0 * s[2] * s[2]));
  const double a = s[0] - s[1], b = s[1] - s[2], c = s[2] - s[0];
  return std::sqrt(std::max(0.0, 0.5 * (a * a + b * b + c * c) + 3.0 * (s[3] * s[3] + s[4] * s[4] + s[5] * s[5])));
}

Eigen::MatrixXd von_mises_form(int dim) {
  if (dim == 2) {
    Eigen::MatrixXd v(3, 3);
    v << 1.0, -0.5, 0.0, -0.5, 1.0, 0.0, 0.0, 0.0, 3.0;
    return v;
  }
  Eigen::MatrixXd v = Eigen::MatrixXd::Zero(6, 6);
  v.topLeftCorner(3, 3).setConstant(-0.5);
  for (int i = 0; i < 3; ++i) v(i, i) = 1.0;
  for (int i = 3; i < 6; ++i) v(i, i) = 3.0;
  return v;
}

}  // namespace rbto
