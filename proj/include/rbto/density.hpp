#pragma once

#include <memory>
#include <span>
#include <vector>

#include "rbto/mesh.hpp"

namespace rbto {

inline constexpr double kDefaultVoidStiffness = 1e-15;

// Power-law material interpolation E(rho) = (eta_e + (1 - eta_e) rho^q) E0.
struct SimpLaw {
  double q = 3.0;
  double eta_e = kDefaultVoidStiffness;

  double modulus(double rho, double E0) const;
  // dE/drho
  double slope(double rho, double E0) const;
};

double simp_modulus(double rho_t, double q, double E0, double eta_e = kDefaultVoidStiffness);

// Smooth tanh threshold projection. Inputs are clamped to [0, 1] first, so the
// range is exactly [0, 1] and the slope is zero outside the unit interval.
struct Projection {
  double beta = 8.0;
  double threshold = 0.5;

  double value(double rho_f) const;
  double slope(double rho_f) const;
};

std::vector<double> project(std::span<const double> rho_f, double beta, double threshold);

// Default filter radius 3 h_c / (2 sqrt 3).
double default_filter_radius(const Mesh& mesh);

// PDE filter -r^2 lap(rho_f) + rho_f = rho with zero-flux boundaries, solved with
// linear nodal elements. Element values enter through their integral against the
// nodal basis and leave as element averages of the nodal solution. The nodal mass
// is lumped, which keeps the discrete operator monotone on non-obtuse meshes.
class HelmholtzFilter {
 public:
  HelmholtzFilter(const Mesh& mesh, double radius);
  ~HelmholtzFilter();
  HelmholtzFilter(HelmholtzFilter&&) noexcept;
  HelmholtzFilter& operator=(HelmholtzFilter&&) noexcept;

  double radius() const { return radius_; }
  std::vector<double> apply(std::span<const double> rho) const;
  // Transpose in the Euclidean inner product, used for gradient backpropagation.
  std::vector<double> apply_transpose(std::span<const double> grad) const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
  double radius_;
};

std::vector<double> helmholtz_filter(const Mesh& mesh, std::span<const double> rho);

struct DensityField {
  std::vector<double> rho;    // raw design variables
  std::vector<double> rho_f;  // filtered
  std::vector<double> rho_t;  // projected
};

// rho -> rho_f -> rho_t and the adjoint of that map.
class DensityChain {
 public:
  DensityChain(const Mesh& mesh, double filter_radius, Projection projection);

  const HelmholtzFilter& filter() const { return filter_; }
  const Projection& projection() const { return projection_; }

  DensityField forward(std::vector<double> rho) const;
  std::vector<double> backprop(const DensityField& state, std::span<const double> grad_rho_t) const;

 private:
  HelmholtzFilter filter_;
  Projection projection_;
};

struct VolumeResult {
  double volume = 0.0;
  double fraction = 0.0;
  std::vector<double> gradient;  // dV/drho_t (element measures)
};

VolumeResult volume_and_gradient(const Mesh& mesh, std::span<const double> rho_t);

// Clamp every entry to [0, 1].
void clamp_unit(std::span<double> values);

}  // namespace rbto
