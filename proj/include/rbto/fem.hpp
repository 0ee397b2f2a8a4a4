#pragma once

#include <memory>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "rbto/density.hpp"
#include "rbto/kernels.hpp"
#include "rbto/mesh.hpp"

namespace rbto {

// Linear isotropic elasticity; 2D problems are plane stress.
struct ElasticityParams {
  double E0 = 1.0;
  double nu = 0.3;

  void validate() const;
};

struct SolverOptions {
  enum class Kind { Auto, Direct, Iterative };
  Kind kind = Kind::Auto;
  int direct_limit = 200000;  // Auto switches to PCG above this many free dofs
  double tolerance = 1e-10;   // relative residual
  int max_iterations = 20000;
};

// Factorized reduced stiffness of one (densities, sample) pair. Operates on
// full-length dof vectors; fixed dofs are returned as zero.
class StiffnessFactor {
 public:
  virtual ~StiffnessFactor() = default;
  virtual Eigen::VectorXd solve(const Eigen::VectorXd& rhs_full) const = 0;
  virtual double relative_residual(const Eigen::VectorXd& x_full, const Eigen::VectorXd& rhs_full) const = 0;
};

struct FemSolution {
  Eigen::VectorXd displacement;  // all dofs
  Eigen::VectorXd load;          // all dofs
  double compliance = 0.0;       // F^T U
  Eigen::MatrixXd stress;        // Voigt components x elements, at centroids
  std::vector<double> von_mises;
  std::vector<double> modulus;   // E(rho_t) per element
  ElasticityParams params;
  double residual = 0.0;
  std::shared_ptr<const StiffnessFactor> factor;
};

// Per-mesh precomputation shared read-only by every solve on that mesh.
class FemSystem {
 public:
  explicit FemSystem(Mesh mesh, SolverOptions options = {});

  const Mesh& mesh() const { return mesh_; }
  const kernels::ElementTable& table() const { return table_; }
  const kernels::AssemblyPlan& plan() const { return plan_; }
  const SolverOptions& options() const { return options_; }
  int num_free() const { return plan_.size; }

  // Unit-modulus element stiffness at the given Poisson ratio.
  Eigen::MatrixXd unit_stiffness(int e, double nu) const;

  // Unit load pattern (weights times load sign).
  Eigen::VectorXd load_pattern() const;

  FemSolution solve(std::span<const double> rho_t, const SimpLaw& simp, const ElasticityParams& params,
                    double load, kernels::Exec exec = kernels::Exec::Serial) const;

 private:
  Mesh mesh_;
  SolverOptions options_;
  kernels::ElementTable table_;
  std::shared_ptr<const std::vector<int>> reduced_index_;
  kernels::AssemblyPlan plan_;
};

// Element stiffness k_e at the given material.
Eigen::MatrixXd element_stiffness(const Mesh& mesh, int e, const ElasticityParams& params);

FemSolution assemble_and_solve(const FemSystem& system, std::span<const double> rho_t, const SimpLaw& simp,
                               const ElasticityParams& params, double load,
                               kernels::Exec exec = kernels::Exec::Serial);

// dC/drho_t,e = -E'(rho_t,e) u_e^T k0_e u_e
std::vector<double> compliance_sensitivity(const FemSystem& system, const FemSolution& solution,
                                           std::span<const double> rho_t, const SimpLaw& simp,
                                           kernels::Exec exec = kernels::Exec::Serial);

double von_mises(int dim, std::span<const double> voigt_stress);

// Symmetric V with von_mises^2 = s^T V s.
Eigen::MatrixXd von_mises_form(int dim);

}  // namespace rbto
