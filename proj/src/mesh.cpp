#include "rbto/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <ostream>
#include <set>
#include <string>

#include "rbto/error.hpp"

namespace rbto {

namespace {

double det3(const Point& a, const Point& b, const Point& c) {
  return a[0] * (b[1] * c[2] - b[2] * c[1]) - a[1] * (b[0] * c[2] - b[2] * c[0]) +
         a[2] * (b[0] * c[1] - b[1] * c[0]);
}

Point diff(const Point& a, const Point& b) { return {a[0] - b[0], a[1] - b[1], a[2] - b[2]}; }

void require_positive(double v, const char* what) {
  if (!(v > 0.0)) throw InvalidArgument(std::string(what) + " must be positive");
}

// Node ids on the structured grid are (i, j[, k]) in x-fastest order.
int grid_node(int i, int j, int nx) { return j * (nx + 1) + i; }
int grid_node(int i, int j, int k, int nx, int ny) { return (k * (ny + 1) + j) * (nx + 1) + i; }

// Nodes whose coordinate `axis` is nearest to `target`; ties are all returned.
std::vector<int> nearest_nodes(const Mesh& m, const std::vector<int>& candidates, int axis,
                               double target) {
  double best = std::numeric_limits<double>::infinity();
  for (int n : candidates) best = std::min(best, std::abs(m.nodes[n][axis] - target));
  const double tol = 1e-9 * std::max(1.0, m.characteristic_size);
  std::vector<int> out;
  for (int n : candidates)
    if (std::abs(m.nodes[n][axis] - target) <= best + tol) out.push_back(n);
  return out;
}

void set_equal_load(Mesh& m, const std::vector<int>& nodes, int axis) {
  m.load_dofs.clear();
  const double w = 1.0 / static_cast<double>(nodes.size());
  for (int n : nodes) m.load_dofs.push_back({n * m.dimension + axis, w});
}

void finalize_fixed(Mesh& m) {
  std::sort(m.fixed_dofs.begin(), m.fixed_dofs.end());
  m.fixed_dofs.erase(std::unique(m.fixed_dofs.begin(), m.fixed_dofs.end()), m.fixed_dofs.end());
}

}  // namespace

double Mesh::signed_measure(int e) const {
  const auto& en = elements[e];
  if (dimension == 2) {
    const Point& a = nodes[en[0]];
    const Point& b = nodes[en[1]];
    const Point& c = nodes[en[2]];
    return 0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]));
  }
  const Point& a = nodes[en[0]];
  return det3(diff(nodes[en[1]], a), diff(nodes[en[2]], a), diff(nodes[en[3]], a)) / 6.0;
}

double Mesh::measure(int e) const { return std::abs(signed_measure(e)); }

std::vector<double> Mesh::measures() const {
  std::vector<double> out(elements.size());
  for (int e = 0; e < num_elements(); ++e) out[e] = measure(e);
  return out;
}

double Mesh::total_measure() const {
  double s = 0.0;
  for (int e = 0; e < num_elements(); ++e) s += measure(e);
  return s;
}

Point Mesh::centroid(int e) const {
  Point c{0.0, 0.0, 0.0};
  const int npe = nodes_per_element();
  for (int a = 0; a < npe; ++a)
    for (int d = 0; d < 3; ++d) c[d] += nodes[elements[e][a]][d] / npe;
  return c;
}

void Mesh::validate() const {
  if (dimension != 2 && dimension != 3) throw InvalidArgument("mesh dimension must be 2 or 3");
  if (!(characteristic_size > 0.0)) throw InvalidArgument("characteristic size must be positive");
  const int npe = nodes_per_element();
  for (int e = 0; e < num_elements(); ++e) {
    const auto& en = elements[e];
    for (int a = 0; a < npe; ++a) {
      if (en[a] < 0 || en[a] >= num_nodes())
        throw InvalidArgument("element " + std::to_string(e) + " references a missing node");
      for (int b = 0; b < a; ++b)
        if (en[a] == en[b])
          throw InvalidArgument("element " + std::to_string(e) + " repeats a node");
    }
    if (!(signed_measure(e) > 0.0))
      throw InvalidArgument("element " + std::to_string(e) + " has non-positive measure");
  }
  std::set<int> fixed(fixed_dofs.begin(), fixed_dofs.end());
  for (int d : fixed_dofs)
    if (d < 0 || d >= num_dofs()) throw InvalidArgument("fixed dof out of range");
  double wsum = 0.0;
  for (const auto& lp : load_dofs) {
    if (lp.dof < 0 || lp.dof >= num_dofs()) throw InvalidArgument("load dof out of range");
    if (fixed.count(lp.dof)) throw InvalidArgument("load dof " + std::to_string(lp.dof) + " is fixed");
    wsum += lp.weight;
  }
  if (!load_dofs.empty() && std::abs(wsum - 1.0) > 1e-12)
    throw InvalidArgument("load weights must sum to 1");
}

Mesh structured_rectangle(double lx, double ly, int nx, int ny) {
  require_positive(lx, "length");
  require_positive(ly, "height");
  if (nx < 1 || ny < 1) throw InvalidArgument("cell counts must be at least 1");
  Mesh m;
  m.dimension = 2;
  m.nodes.reserve(static_cast<std::size_t>(nx + 1) * (ny + 1));
  for (int j = 0; j <= ny; ++j)
    for (int i = 0; i <= nx; ++i) m.nodes.push_back({lx * i / nx, ly * j / ny, 0.0});
  m.elements.reserve(static_cast<std::size_t>(2) * nx * ny);
  for (int j = 0; j < ny; ++j)
    for (int i = 0; i < nx; ++i) {
      const int n00 = grid_node(i, j, nx), n10 = grid_node(i + 1, j, nx);
      const int n01 = grid_node(i, j + 1, nx), n11 = grid_node(i + 1, j + 1, nx);
      m.elements.push_back({n00, n10, n11, -1});
      m.elements.push_back({n00, n11, n01, -1});
    }
  m.characteristic_size = std::max(lx / nx, ly / ny);
  return m;
}

Mesh structured_box(double lx, double ly, double lz, int nx, int ny, int nz) {
  require_positive(lx, "length");
  require_positive(ly, "height");
  require_positive(lz, "width");
  if (nx < 1 || ny < 1 || nz < 1) throw InvalidArgument("cell counts must be at least 1");
  Mesh m;
  m.dimension = 3;
  for (int k = 0; k <= nz; ++k)
    for (int j = 0; j <= ny; ++j)
      for (int i = 0; i <= nx; ++i) m.nodes.push_back({lx * i / nx, ly * j / ny, lz * k / nz});
  // Kuhn split: one tet per axis permutation, all sharing the (0,0,0)-(1,1,1) diagonal.
  static constexpr int perms[6][3] = {{0, 1, 2}, {0, 2, 1}, {1, 0, 2},
                                      {1, 2, 0}, {2, 0, 1}, {2, 1, 0}};
  for (int k = 0; k < nz; ++k)
    for (int j = 0; j < ny; ++j)
      for (int i = 0; i < nx; ++i)
        for (const auto& p : perms) {
          int c[3] = {i, j, k};
          ElementNodes tet{};
          tet[0] = grid_node(c[0], c[1], c[2], nx, ny);
          for (int s = 0; s < 3; ++s) {
            ++c[p[s]];
            tet[s + 1] = grid_node(c[0], c[1], c[2], nx, ny);
          }
          m.elements.push_back(tet);
          if (m.signed_measure(m.num_elements() - 1) < 0.0) std::swap(m.elements.back()[1], m.elements.back()[2]);
        }
  m.characteristic_size = std::max({lx / nx, ly / ny, lz / nz});
  return m;
}

Mesh build_rect_half_beam(double length, int nx, int ny) {
  require_positive(length, "length");
  if (nx < 2 || ny < 2) throw InvalidArgument("half beam needs nx >= 2 and ny >= 2");
  const double lx = length / 2.0, ly = length / 6.0;
  Mesh m = structured_rectangle(lx, ly, nx, ny);
  m.characteristic_size = lx / nx;
  for (int j = 0; j <= ny; ++j) m.fixed_dofs.push_back(2 * grid_node(0, j, nx));
  m.fixed_dofs.push_back(2 * grid_node(nx, 0, nx) + 1);
  finalize_fixed(m);
  m.load_dofs = {{2 * grid_node(0, ny, nx) + 1, 1.0}};
  m.validate();
  return m;
}

Mesh build_l_beam(double length, int resolution) {
  require_positive(length, "length");
  if (resolution < 3 || resolution % 3 != 0)
    throw InvalidArgument("L-beam resolution must be a positive multiple of 3");
  const int r = resolution, limb = r / 3;
  const double h = length / r;
  Mesh m;
  m.dimension = 2;
  m.characteristic_size = h;
  // Grid nodes are kept only when they touch a cell inside the L.
  auto inside_cell = [&](int i, int j) { return i >= 0 && j >= 0 && i < r && j < r && (i < limb || j < limb); };
  std::vector<int> id(static_cast<std::size_t>(r + 1) * (r + 1), -1);
  for (int j = 0; j <= r; ++j)
    for (int i = 0; i <= r; ++i) {
      const bool used = inside_cell(i, j) || inside_cell(i - 1, j) || inside_cell(i, j - 1) ||
                        inside_cell(i - 1, j - 1);
      if (!used) continue;
      id[grid_node(i, j, r)] = m.num_nodes();
      m.nodes.push_back({h * i, h * j, 0.0});
    }
  for (int j = 0; j < r; ++j)
    for (int i = 0; i < r; ++i) {
      if (!inside_cell(i, j)) continue;
      const int n00 = id[grid_node(i, j, r)], n10 = id[grid_node(i + 1, j, r)];
      const int n01 = id[grid_node(i, j + 1, r)], n11 = id[grid_node(i + 1, j + 1, r)];
      m.elements.push_back({n00, n10, n11, -1});
      m.elements.push_back({n00, n11, n01, -1});
    }
  std::vector<int> right_edge;
  for (int n = 0; n < m.num_nodes(); ++n) {
    const Point& p = m.nodes[n];
    if (std::abs(p[1] - length) < 1e-9 * length) {
      m.fixed_dofs.push_back(2 * n);
      m.fixed_dofs.push_back(2 * n + 1);
    }
    if (std::abs(p[0] - length) < 1e-9 * length) right_edge.push_back(n);
  }
  finalize_fixed(m);
  set_equal_load(m, nearest_nodes(m, right_edge, 1, length / 6.0), 1);
  m.validate();
  return m;
}

Mesh build_box_cantilever(double length, int nx, int ny, int nz) {
  require_positive(length, "length");
  const double lx = length, ly = length / 3.0, lz = length / 5.0;
  Mesh m = structured_box(lx, ly, lz, nx, ny, nz);
  std::vector<int> right_face, patch;
  for (int n = 0; n < m.num_nodes(); ++n) {
    const Point& p = m.nodes[n];
    if (std::abs(p[0]) < 1e-9 * length)
      for (int d = 0; d < 3; ++d) m.fixed_dofs.push_back(3 * n + d);
    if (std::abs(p[0] - lx) < 1e-9 * length) right_face.push_back(n);
  }
  finalize_fixed(m);
  const double half_patch = length / 12.0;
  for (int n : right_face)
    if (std::abs(m.nodes[n][1] - ly / 2.0) <= half_patch + 1e-9 * length) patch.push_back(n);
  if (patch.empty()) patch = nearest_nodes(m, right_face, 1, ly / 2.0);
  set_equal_load(m, patch, 1);
  m.validate();
  return m;
}

void write_vtk(std::ostream& out, const Mesh& mesh, const std::vector<CellField>& fields) {
  out.precision(17);
  out << "# vtk DataFile Version 3.0\nrbto mesh\nASCII\nDATASET UNSTRUCTURED_GRID\n";
  out << "POINTS " << mesh.num_nodes() << " double\n";
  for (const auto& p : mesh.nodes) out << p[0] << ' ' << p[1] << ' ' << p[2] << '\n';
  const int npe = mesh.nodes_per_element();
  out << "CELLS " << mesh.num_elements() << ' ' << mesh.num_elements() * (npe + 1) << '\n';
  for (const auto& en : mesh.elements) {
    out << npe;
    for (int a = 0; a < npe; ++a) out << ' ' << en[a];
    out << '\n';
  }
  out << "CELL_TYPES " << mesh.num_elements() << '\n';
  const int vtk_type = mesh.dimension == 2 ? 5 : 10;
  for (int e = 0; e < mesh.num_elements(); ++e) out << vtk_type << '\n';
  if (fields.empty()) return;
  out << "CELL_DATA " << mesh.num_elements() << '\n';
  for (const auto& f : fields) {
    out << "SCALARS " << f.name << " double 1\nLOOKUP_TABLE default\n";
    for (double v : *f.values) out << v << '\n';
  }
}

}  // namespace rbto
