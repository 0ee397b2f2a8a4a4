#pragma once

// Element-loop kernels shared by the FEM solver. Each kernel has a serial
// reference path and an OpenMP path; the two are kept bitwise identical so
// the parallel path can be checked against the reference in tests.

#include <span>
#include <vector>

#include <Eigen/Core>

#include "rbto/mesh.hpp"

namespace rbto::kernels {

enum class Exec { Serial, Parallel };

// Geometry-only element data for linear simplices at unit modulus.
// The constitutive matrix at Poisson ratio nu is c1(nu) * DA + c2(nu) * DB, so
// the unit-modulus element stiffness is c1 * KA_e + c2 * KB_e.
struct ElementTable {
  int dim = 2;
  int npe = 3;     // nodes per element
  int ndpe = 6;    // dofs per element
  int nvoigt = 3;  // stress components
  int num_elements = 0;
  std::vector<int> dofs;        // ne * ndpe
  std::vector<double> B;        // ne * nvoigt * ndpe, row-major per element
  std::vector<double> KA, KB;   // ne * ndpe * ndpe, row-major per element
  std::vector<double> measure;  // ne
  Eigen::MatrixXd DA, DB;

  const double* B_of(int e) const { return B.data() + static_cast<std::size_t>(e) * nvoigt * ndpe; }
  const double* KA_of(int e) const { return KA.data() + static_cast<std::size_t>(e) * ndpe * ndpe; }
  const double* KB_of(int e) const { return KB.data() + static_cast<std::size_t>(e) * ndpe * ndpe; }
  const int* dofs_of(int e) const { return dofs.data() + static_cast<std::size_t>(e) * ndpe; }
};

// Coefficients (c1, c2) of the constitutive split for a given Poisson ratio.
struct MaterialSplit {
  double c1;
  double c2;
};
MaterialSplit material_split(int dim, double nu);

// Gradients of the barycentric shape functions, one row per node (npe x dim).
// Throws SingularElement.
Eigen::MatrixXd barycentric_gradients(const Mesh& mesh, int e);

// Constant strain-displacement matrix (nvoigt x ndpe). Throws SingularElement.
Eigen::MatrixXd strain_displacement(const Mesh& mesh, int e);

ElementTable build_element_table(const Mesh& mesh);

// Global sparse pattern of the reduced (free-dof) stiffness with, for every
// stored nonzero, the list of element entries that contribute to it.
struct AssemblyPlan {
  int size = 0;                    // reduced system size
  std::vector<int> outer;          // CSC column starts, size + 1
  std::vector<int> inner;          // row index per nonzero
  std::vector<int> contrib_begin;  // per nonzero, into contrib_*; nnz + 1
  std::vector<int> contrib_elem;
  std::vector<int> contrib_local;  // a * ndpe + b within the element matrix
  std::vector<int> scatter;        // ne * ndpe^2 -> nonzero index or -1
};

// `reduced_index[dof]` is the row of a free dof in the reduced system or -1.
AssemblyPlan build_assembly_plan(const ElementTable& table, const std::vector<int>& reduced_index);

// values[nz] = sum over contributors of scaleA[e] * KA_e + scaleB[e] * KB_e.
// Serial scatters element by element; Parallel gathers per nonzero.
void assemble_values(const ElementTable& table, const AssemblyPlan& plan,
                     std::span<const double> scaleA, std::span<const double> scaleB,
                     std::span<double> values, Exec exec);

// strain(:, e) = B_e u_e
void element_strains(const ElementTable& table, const Eigen::VectorXd& u, Eigen::MatrixXd& strain,
                     Exec exec);

// out[e] = a_e^T (c1 KA_e + c2 KB_e) b_e
void element_bilinear(const ElementTable& table, const Eigen::VectorXd& a, const Eigen::VectorXd& b,
                      MaterialSplit split, std::span<double> out, Exec exec);

}  // namespace rbto::kernels
