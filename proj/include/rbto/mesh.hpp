#pragma once

#include <array>
#include <cstddef>
#include <iosfwd>
#include <vector>

namespace rbto {

using Point = std::array<double, 3>;

// Nodes of one simplex. Triangles use the first three slots; the last is -1.
using ElementNodes = std::array<int, 4>;

struct LoadPoint {
  int dof;
  double weight;
};

// Linear simplex mesh (3-node triangles in 2D, 4-node tets in 3D) together
// with its boundary conditions. Dof numbering is node * dimension + axis.
struct Mesh {
  int dimension = 2;
  std::vector<Point> nodes;
  std::vector<ElementNodes> elements;
  std::vector<int> fixed_dofs;         // sorted, unique
  std::vector<LoadPoint> load_dofs;    // weights sum to 1
  double load_sign = -1.0;             // loads act along -axis (downward)
  double characteristic_size = 0.0;    // typical element edge length h_c

  int num_nodes() const { return static_cast<int>(nodes.size()); }
  int num_elements() const { return static_cast<int>(elements.size()); }
  int nodes_per_element() const { return dimension + 1; }
  int num_dofs() const { return num_nodes() * dimension; }
  int dofs_per_element() const { return nodes_per_element() * dimension; }

  // Signed area (2D) or volume (3D) of an element.
  double signed_measure(int e) const;
  double measure(int e) const;
  std::vector<double> measures() const;
  double total_measure() const;
  Point centroid(int e) const;

  // Throws InvalidArgument when an invariant is violated.
  void validate() const;
};

// Structured rectangle [0,lx]x[0,ly]; each cell split along the same diagonal.
// No boundary conditions are attached.
Mesh structured_rectangle(double lx, double ly, int nx, int ny);

// Structured box split into 6 tetrahedra per cell (Kuhn split).
Mesh structured_box(double lx, double ly, double lz, int nx, int ny, int nz);

// Half of a simply supported L x L/6 beam: symmetry on x = 0, roller at the
// bottom-right corner, point load at the top of the symmetry edge.
Mesh build_rect_half_beam(double length, int nx, int ny);

// L-shaped domain [0,L]^2 minus (L/3,L]x(L/3,L]; top edge clamped, point load
// on the right edge at y = L/6. `resolution` is the cell count along L.
Mesh build_l_beam(double length, int resolution);

// Cantilever L x L/3 x L/5 (x, y, z) clamped at x = 0 with a vertical load patch
// of height L/6 centred on the right face.
Mesh build_box_cantilever(double length, int nx, int ny, int nz);

// Legacy ASCII VTK unstructured grid with optional cell scalar fields.
struct CellField {
  const char* name;
  const std::vector<double>* values;
};
void write_vtk(std::ostream& out, const Mesh& mesh, const std::vector<CellField>& fields = {});

}  // namespace rbto
