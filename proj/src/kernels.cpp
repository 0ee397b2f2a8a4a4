#include "rbto/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <tuple>

#include <Eigen/Dense>

#include "rbto/error.hpp"

namespace rbto::kernels {

namespace {

Eigen::MatrixXd constitutive_a(int dim) {
  if (dim == 2) {
    Eigen::MatrixXd d = Eigen::MatrixXd::Zero(3, 3);
    d(0, 0) = d(1, 1) = 1.0;
    d(2, 2) = 0.5;
    return d;
  }
  Eigen::MatrixXd d = Eigen::MatrixXd::Zero(6, 6);
  d.topLeftCorner(3, 3).setOnes();
  return d;
}

Eigen::MatrixXd constitutive_b(int dim) {
  if (dim == 2) {
    Eigen::MatrixXd d = Eigen::MatrixXd::Zero(3, 3);
    d(0, 1) = d(1, 0) = 1.0;
    d(2, 2) = -0.5;
    return d;
  }
  Eigen::VectorXd diag(6);
  diag << 2, 2, 2, 1, 1, 1;
  return diag.asDiagonal();
}

}  // namespace

MaterialSplit material_split(int dim, double nu) {
  if (dim == 2) {
    const double s = 1.0 / (1.0 - nu * nu);
    return {s, nu * s};
  }
  return {nu / ((1.0 + nu) * (1.0 - 2.0 * nu)), 1.0 / (2.0 * (1.0 + nu))};
}

Eigen::MatrixXd barycentric_gradients(const Mesh& mesh, int e) {
  const int d = mesh.dimension;
  const int npe = d + 1;
  const auto& en = mesh.elements[e];
  Eigen::MatrixXd X(d, d);
  for (int a = 1; a < npe; ++a)
    for (int k = 0; k < d; ++k) X(k, a - 1) = mesh.nodes[en[a]][k] - mesh.nodes[en[0]][k];
  const double det = X.determinant();
  double scale = 0.0;
  for (int a = 1; a < npe; ++a) scale = std::max(scale, X.col(a - 1).norm());
  if (!(std::abs(det) > 1e-12 * std::pow(scale, d))) throw SingularElement(e);
  const Eigen::MatrixXd Xinv = X.inverse();
  // grad[a] = d lambda_a / dx
  Eigen::MatrixXd grad(npe, d);
  for (int a = 1; a < npe; ++a) grad.row(a) = Xinv.row(a - 1);
  grad.row(0) = -grad.bottomRows(d).colwise().sum();
  return grad;
}

Eigen::MatrixXd strain_displacement(const Mesh& mesh, int e) {
  const int d = mesh.dimension;
  const int npe = d + 1;
  const Eigen::MatrixXd grad = barycentric_gradients(mesh, e);
  const int nvoigt = d == 2 ? 3 : 6;
  Eigen::MatrixXd B = Eigen::MatrixXd::Zero(nvoigt, npe * d);
  for (int a = 0; a < npe; ++a) {
    const double gx = grad(a, 0), gy = grad(a, 1);
    if (d == 2) {
      B(0, 2 * a) = gx;
      B(1, 2 * a + 1) = gy;
      B(2, 2 * a) = gy;
      B(2, 2 * a + 1) = gx;
    } else {
      const double gz = grad(a, 2);
      const int c = 3 * a;
      B(0, c) = gx;
      B(1, c + 1) = gy;
      B(2, c + 2) = gz;
      B(3, c + 1) = gz;
      B(3, c + 2) = gy;
      B(4, c) = gz;
      B(4, c + 2) = gx;
      B(5, c) = gy;
      B(5, c + 1) = gx;
    }
  }
  return B;
}

ElementTable build_element_table(const Mesh& mesh) {
  ElementTable t;
  t.dim = mesh.dimension;
  t.npe = mesh.nodes_per_element();
  t.ndpe = mesh.dofs_per_element();
  t.nvoigt = t.dim == 2 ? 3 : 6;
  t.num_elements = mesh.num_elements();
  t.DA = constitutive_a(t.dim);
  t.DB = constitutive_b(t.dim);
  const std::size_t ne = static_cast<std::size_t>(t.num_elements);
  t.dofs.resize(ne * t.ndpe);
  t.B.resize(ne * t.nvoigt * t.ndpe);
  t.KA.resize(ne * t.ndpe * t.ndpe);
  t.KB.resize(ne * t.ndpe * t.ndpe);
  t.measure.resize(ne);
  for (int e = 0; e < t.num_elements; ++e) {
    for (int a = 0; a < t.npe; ++a)
      for (int k = 0; k < t.dim; ++k) t.dofs[e * t.ndpe + a * t.dim + k] = mesh.elements[e][a] * t.dim + k;
    const Eigen::MatrixXd B = strain_displacement(mesh, e);
    const double vol = mesh.measure(e);
    t.measure[e] = vol;
    Eigen::MatrixXd ka = vol * B.transpose() * t.DA * B;
    Eigen::MatrixXd kb = vol * B.transpose() * t.DB * B;
    ka = 0.5 * (ka + ka.transpose()).eval();
    kb = 0.5 * (kb + kb.transpose()).eval();
    for (int r = 0; r < t.nvoigt; ++r)
      for (int c = 0; c < t.ndpe; ++c) t.B[(e * t.nvoigt + r) * t.ndpe + c] = B(r, c);
    for (int r = 0; r < t.ndpe; ++r)
      for (int c = 0; c < t.ndpe; ++c) {
        t.KA[(static_cast<std::size_t>(e) * t.ndpe + r) * t.ndpe + c] = ka(r, c);
        t.KB[(static_cast<std::size_t>(e) * t.ndpe + r) * t.ndpe + c] = kb(r, c);
      }
  }
  return t;
}

AssemblyPlan build_assembly_plan(const ElementTable& table, const std::vector<int>& reduced_index) {
  AssemblyPlan plan;
  plan.size = static_cast<int>(std::count_if(reduced_index.begin(), reduced_index.end(), [](int i) { return i >= 0; }));
  const int ndpe = table.ndpe;
  // (col, row, elem, local), sorted so contributors to one nonzero are in element order.
  std::vector<std::tuple<int, int, int, int>> entries;
  entries.reserve(static_cast<std::size_t>(table.num_elements) * ndpe * ndpe);
  for (int e = 0; e < table.num_elements; ++e) {
    const int* dofs = table.dofs_of(e);
    for (int a = 0; a < ndpe; ++a) {
      const int r = reduced_index[dofs[a]];
      if (r < 0) continue;
      for (int b = 0; b < ndpe; ++b) {
        const int c = reduced_index[dofs[b]];
        if (c < 0) continue;
        entries.emplace_back(c, r, e, a * ndpe + b);
      }
    }
  }
  std::sort(entries.begin(), entries.end());
  plan.outer.assign(plan.size + 1, 0);
  plan.scatter.assign(static_cast<std::size_t>(table.num_elements) * ndpe * ndpe, -1);
  int prev_col = -1, prev_row = -1;
  for (const auto& [c, r, e, l] : entries) {
    if (c != prev_col || r != prev_row) {
      plan.inner.push_back(r);
      plan.contrib_begin.push_back(static_cast<int>(plan.contrib_elem.size()));
      ++plan.outer[c + 1];
      prev_col = c;
      prev_row = r;
    }
    plan.scatter[static_cast<std::size_t>(e) * ndpe * ndpe + l] = static_cast<int>(plan.inner.size()) - 1;
    plan.contrib_elem.push_back(e);
    plan.contrib_local.push_back(l);
  }
  plan.contrib_begin.push_back(static_cast<int>(plan.contrib_elem.size()));
  for (int c = 0; c < plan.size; ++c) plan.outer[c + 1] += plan.outer[c];
  return plan;
}

void assemble_values(const ElementTable& table, const AssemblyPlan& plan, std::span<const double> scaleA,
                     std::span<const double> scaleB, std::span<double> values, Exec exec) {
  const int nnz = static_cast<int>(plan.inner.size());
  const int nn = table.ndpe * table.ndpe;
  if (exec == Exec::Serial) {
    std::fill(values.begin(), values.end(), 0.0);
    for (int e = 0; e < table.num_elements; ++e) {
      const double* ka = table.KA_of(e);
      const double* kb = table.KB_of(e);
      const int* map = plan.scatter.data() + static_cast<std::size_t>(e) * nn;
      for (int l = 0; l < nn; ++l)
        if (map[l] >= 0) values[map[l]] += scaleA[e] * ka[l] + scaleB[e] * kb[l];
    }
    return;
  }
#pragma omp parallel for schedule(static)
  for (int nz = 0; nz < nnz; ++nz) {
    double v = 0.0;
    for (int c = plan.contrib_begin[nz]; c < plan.contrib_begin[nz + 1]; ++c) {
      const int e = plan.contrib_elem[c];
      const int l = plan.contrib_local[c];
      v += scaleA[e] * table.KA_of(e)[l] + scaleB[e] * table.KB_of(e)[l];
    }
    values[nz] = v;
  }
}

namespace {

inline void strain_of(const ElementTable& t, const Eigen::VectorXd& u, int e, double* out) {
  const double* B = t.B_of(e);
  const int* dofs = t.dofs_of(e);
  for (int r = 0; r < t.nvoigt; ++r) {
    double s = 0.0;
    for (int c = 0; c < t.ndpe; ++c) s += B[r * t.ndpe + c] * u[dofs[c]];
    out[r] = s;
  }
}

inline double bilinear_of(const ElementTable& t, const Eigen::VectorXd& a, const Eigen::VectorXd& b,
                          MaterialSplit split, int e) {
  const double* ka = t.KA_of(e);
  const double* kb = t.KB_of(e);
  const int* dofs = t.dofs_of(e);
  double s = 0.0;
  for (int r = 0; r < t.ndpe; ++r) {
    double row = 0.0;
    for (int c = 0; c < t.ndpe; ++c) {
      const int l = r * t.ndpe + c;
      row += (split.c1 * ka[l] + split.c2 * kb[l]) * b[dofs[c]];
    }
    s += a[dofs[r]] * row;
  }
  return s;
}

}  // namespace

void element_strains(const ElementTable& table, const Eigen::VectorXd& u, Eigen::MatrixXd& strain, Exec exec) {
  strain.resize(table.nvoigt, table.num_elements);
  if (exec == Exec::Serial) {
    for (int e = 0; e < table.num_elements; ++e) strain_of(table, u, e, strain.col(e).data());
    return;
  }
#pragma omp parallel for schedule(static)
  for (int e = 0; e < table.num_elements; ++e) strain_of(table, u, e, strain.col(e).data());
}

void element_bilinear(const ElementTable& table, const Eigen::VectorXd& a, const Eigen::VectorXd& b,
                      MaterialSplit split, std::span<double> out, Exec exec) {
  if (exec == Exec::Serial) {
    for (int e = 0; e < table.num_elements; ++e) out[e] = bilinear_of(table, a, b, split, e);
    return;
  }
#pragma omp parallel for schedule(static)
  for (int e = 0; e < table.num_elements; ++e) out[e] = bilinear_of(table, a, b, split, e);
}

}  // namespace rbto::kernels
