#include "rbto/density.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/SparseCholesky>
#include <Eigen/SparseCore>

#include "rbto/error.hpp"
#include "rbto/kernels.hpp"

namespace rbto {

double SimpLaw::modulus(double rho, double E0) const {
  return (eta_e + (1.0 - eta_e) * std::pow(rho, q)) * E0;
}

double SimpLaw::slope(double rho, double E0) const {
  return q * std::pow(rho, q - 1.0) * (1.0 - eta_e) * E0;
}

double simp_modulus(double rho_t, double q, double E0, double eta_e) {
  return SimpLaw{q, eta_e}.modulus(rho_t, E0);
}

double Projection::value(double rho_f) const {
  const double x = std::clamp(rho_f, 0.0, 1.0);
  const double den = std::tanh(beta * threshold) + std::tanh(beta * (1.0 - threshold));
  return (std::tanh(beta * threshold) + std::tanh(beta * (x - threshold))) / den;
}

double Projection::slope(double rho_f) const {
  if (rho_f < 0.0 || rho_f > 1.0) return 0.0;
  const double den = std::tanh(beta * threshold) + std::tanh(beta * (1.0 - threshold));
  const double c = std::cosh(beta * (rho_f - threshold));
  return beta / (c * c * den);
}

std::vector<double> project(std::span<const double> rho_f, double beta, double threshold) {
  if (!(beta > 0.0)) throw InvalidArgument("projection sharpness must be positive");
  if (!(threshold > 0.0 && threshold < 1.0)) throw InvalidArgument("projection threshold must lie in (0, 1)");
  const Projection proj{beta, threshold};
  std::vector<double> out(rho_f.size());
  std::transform(rho_f.begin(), rho_f.end(), out.begin(), [&](double x) { return proj.value(x); });
  return out;
}

double default_filter_radius(const Mesh& mesh) {
  return 3.0 * mesh.characteristic_size / (2.0 * std::sqrt(3.0));
}

struct HelmholtzFilter::Impl {
  int npe = 3;
  std::vector<ElementNodes> elements;
  std::vector<double> measure;
  int num_nodes = 0;
  Eigen::SimplicialLLT<Eigen::SparseMatrix<double>> llt;

  // nodal = T x (element integrals of the nodal basis)
  Eigen::VectorXd to_nodes(std::span<const double> x) const {
    Eigen::VectorXd b = Eigen::VectorXd::Zero(num_nodes);
    for (std::size_t e = 0; e < elements.size(); ++e)
      for (int a = 0; a < npe; ++a) b[elements[e][a]] += measure[e] / npe * x[e];
    return b;
  }
};

HelmholtzFilter::HelmholtzFilter(const Mesh& mesh, double radius) : impl_(std::make_unique<Impl>()), radius_(radius) {
  if (!(radius >= 0.0)) throw InvalidArgument("filter radius must be non-negative");
  auto& im = *impl_;
  im.npe = mesh.nodes_per_element();
  im.elements = mesh.elements;
  im.measure = mesh.measures();
  im.num_nodes = mesh.num_nodes();
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(static_cast<std::size_t>(mesh.num_elements()) * im.npe * im.npe);
  for (int e = 0; e < mesh.num_elements(); ++e) {
    const Eigen::MatrixXd g = kernels::barycentric_gradients(mesh, e);
    const Eigen::MatrixXd lap = im.measure[e] * g * g.transpose();
    for (int a = 0; a < im.npe; ++a) {
      const int i = mesh.elements[e][a];
      trip.emplace_back(i, i, im.measure[e] / im.npe);
      for (int b = 0; b < im.npe; ++b) trip.emplace_back(i, mesh.elements[e][b], radius * radius * lap(a, b));
    }
  }
  Eigen::SparseMatrix<double> s(im.num_nodes, im.num_nodes);
  s.setFromTriplets(trip.begin(), trip.end());
  im.llt.compute(s);
  if (im.llt.info() != Eigen::Success) throw SolverError("Helmholtz filter factorization failed");
}

HelmholtzFilter::~HelmholtzFilter() = default;
HelmholtzFilter::HelmholtzFilter(HelmholtzFilter&&) noexcept = default;
HelmholtzFilter& HelmholtzFilter::operator=(HelmholtzFilter&&) noexcept = default;

std::vector<double> HelmholtzFilter::apply(std::span<const double> rho) const {
  const auto& im = *impl_;
  if (rho.size() != im.elements.size()) throw InvalidArgument("filter input length does not match the element count");
  const Eigen::VectorXd nodal = im.llt.solve(im.to_nodes(rho));
  std::vector<double> out(im.elements.size());
  for (std::size_t e = 0; e < im.elements.size(); ++e) {
    double s = 0.0;
    for (int a = 0; a < im.npe; ++a) s += nodal[im.elements[e][a]];
    out[e] = s / im.npe;
  }
  return out;
}

std::vector<double> HelmholtzFilter::apply_transpose(std::span<const double> grad) const {
  const auto& im = *impl_;
  if (grad.size() != im.elements.size()) throw InvalidArgument("filter input length does not match the element count");
  Eigen::VectorXd g = Eigen::VectorXd::Zero(im.num_nodes);
  for (std::size_t e = 0; e < im.elements.size(); ++e)
    for (int a = 0; a < im.npe; ++a) g[im.elements[e][a]] += grad[e] / im.npe;
  const Eigen::VectorXd y = im.llt.solve(g);
  std::vector<double> out(im.elements.size());
  for (std::size_t e = 0; e < im.elements.size(); ++e) {
    double s = 0.0;
    for (int a = 0; a < im.npe; ++a) s += y[im.elements[e][a]];
    out[e] = im.measure[e] / im.npe * s;
  }
  return out;
}

std::vector<double> helmholtz_filter(const Mesh& mesh, std::span<const double> rho) {
  return HelmholtzFilter(mesh, default_filter_radius(mesh)).apply(rho);
}

DensityChain::DensityChain(const Mesh& mesh, double filter_radius, Projection projection)
    : filter_(mesh, filter_radius), projection_(projection) {
  if (!(projection.beta > 0.0)) throw InvalidArgument("projection sharpness must be positive");
  if (!(projection.threshold > 0.0 && projection.threshold < 1.0))
    throw InvalidArgument("projection threshold must lie in (0, 1)");
}

DensityField DensityChain::forward(std::vector<double> rho) const {
  DensityField f;
  f.rho = std::move(rho);
  f.rho_f = filter_.apply(f.rho);
  // The filter preserves [0, 1]; this removes rounding excursions that would
  // otherwise land on the zero-slope side of the projection.
  clamp_unit(f.rho_f);
  f.rho_t.resize(f.rho_f.size());
  for (std::size_t e = 0; e < f.rho_f.size(); ++e) f.rho_t[e] = projection_.value(f.rho_f[e]);
  return f;
}

std::vector<double> DensityChain::backprop(const DensityField& state, std::span<const double> grad_rho_t) const {
  if (grad_rho_t.size() != state.rho_f.size()) throw InvalidArgument("gradient length does not match the element count");
  std::vector<double> g(grad_rho_t.size());
  for (std::size_t e = 0; e < g.size(); ++e) g[e] = projection_.slope(state.rho_f[e]) * grad_rho_t[e];
  return filter_.apply_transpose(g);
}

VolumeResult volume_and_gradient(const Mesh& mesh, std::span<const double> rho_t) {
  VolumeResult r;
  r.gradient = mesh.measures();
  double total = 0.0;
  for (std::size_t e = 0; e < r.gradient.size(); ++e) {
    r.volume += r.gradient[e] * rho_t[e];
    total += r.gradient[e];
  }
  r.fraction = r.volume / total;
  return r;
}

void clamp_unit(std::span<double> values) {
  for (double& v : values) v = std::clamp(v, 0.0, 1.0);
}

}  // namespace rbto
