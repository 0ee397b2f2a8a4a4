#include "rbto/uncertainty.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <boost/math/special_functions/erf.hpp>

#include "rbto/error.hpp"

namespace rbto {

namespace {

// Phi(u) and its complement, each accurate in its own tail.
double normal_cdf(double u) { return 0.5 * std::erfc(-u / std::sqrt(2.0)); }

double normal_quantile(double p) { return -std::sqrt(2.0) * boost::math::erfc_inv(2.0 * p); }

double clip(double u, bool* clipped) {
  if (std::abs(u) > kNormalClip || std::isinf(u)) {
    if (clipped) *clipped = true;
    return std::copysign(kNormalClip, u);
  }
  return u;
}

}  // namespace

Family parse_family(const std::string& name) {
  if (name == "gaussian" || name == "normal") return Family::Gaussian;
  if (name == "lognormal") return Family::Lognormal;
  if (name == "uniform") return Family::Uniform;
  throw InvalidArgument("unknown distribution family '" + name + "'");
}

const char* family_name(Family f) {
  switch (f) {
    case Family::Gaussian: return "gaussian";
    case Family::Lognormal: return "lognormal";
    case Family::Uniform: return "uniform";
  }
  return "?";
}

void DistributionSpec::validate() const {
  if (!std::isfinite(mean) || !std::isfinite(std)) throw InvalidArgument("distribution moments must be finite");
  if (std < 0.0) throw InvalidArgument("standard deviation must be non-negative");
  if (family == Family::Lognormal && mean <= 0.0) throw InvalidArgument("lognormal mean must be positive");
}

Parameterization parameterize(const DistributionSpec& spec) {
  spec.validate();
  switch (spec.family) {
    case Family::Gaussian: return {Family::Gaussian, spec.mean, spec.std};
    case Family::Lognormal: {
      const double m2 = spec.mean * spec.mean;
      const double s2 = std::log1p(spec.std * spec.std / m2);
      return {Family::Lognormal, std::log(m2 / std::sqrt(m2 + spec.std * spec.std)), std::sqrt(s2)};
    }
    case Family::Uniform: {
      const double h = std::sqrt(3.0) * spec.std;
      return {Family::Uniform, spec.mean - h, spec.mean + h};
    }
  }
  throw InvalidArgument("unknown distribution family");
}

double from_standard_normal(const Parameterization& p, double u) {
  switch (p.family) {
    case Family::Gaussian: return p.a + p.b * u;
    case Family::Lognormal: return std::exp(p.a + p.b * u);
    case Family::Uniform: {
      // Evaluate the upper half through the complement to keep relative accuracy near hi.
      if (u > 0.0) return p.b - (p.b - p.a) * normal_cdf(-u);
      return p.a + (p.b - p.a) * normal_cdf(u);
    }
  }
  return std::numeric_limits<double>::quiet_NaN();
}

double to_standard_normal(const Parameterization& p, double x, bool* clipped) {
  if (clipped) *clipped = false;
  switch (p.family) {
    case Family::Gaussian:
      if (p.b == 0.0) return 0.0;
      return clip((x - p.a) / p.b, clipped);
    case Family::Lognormal:
      if (p.b == 0.0) return 0.0;
      if (x <= 0.0) return clip(-std::numeric_limits<double>::infinity(), clipped);
      return clip((std::log(x) - p.a) / p.b, clipped);
    case Family::Uniform: {
      const double w = p.b - p.a;
      if (w == 0.0) return 0.0;
      const double mid = 0.5 * (p.a + p.b);
      if (x > mid) {
        const double q = (p.b - x) / w;
        if (q <= 0.0) return clip(std::numeric_limits<double>::infinity(), clipped);
        return clip(-normal_quantile(q), clipped);
      }
      const double q = (x - p.a) / w;
      if (q <= 0.0) return clip(-std::numeric_limits<double>::infinity(), clipped);
      return clip(normal_quantile(q), clipped);
    }
  }
  return 0.0;
}

UncertainModel::UncertainModel(DistributionSpec force, DistributionSpec modulus, DistributionSpec poisson)
    : specs_{force, modulus, poisson} {
  for (int k = 0; k < 3; ++k) params_[k] = parameterize(specs_[k]);
  if (modulus.mean <= 0.0) throw InvalidArgument("modulus mean must be positive");
  if (!(poisson.mean > -1.0 && poisson.mean < 0.5)) throw InvalidArgument("Poisson ratio mean must lie in (-1, 0.5)");
  if (poisson.family == Family::Uniform && !(params_[2].a > -1.0 && params_[2].b < 0.5))
    throw InvalidArgument("uniform Poisson ratio bounds must lie inside (-1, 0.5)");
}

UncertainSample UncertainModel::from_normal(const NormalPoint& u) const {
  UncertainSample s;
  s.F = from_standard_normal(params_[0], u[0]);
  s.E0 = std::max(from_standard_normal(params_[1], u[1]), 1e-12 * specs_[1].mean);
  s.nu = std::clamp(from_standard_normal(params_[2], u[2]), -0.999, 0.499);
  return s;
}

int UncertainModel::to_normal(const UncertainSample& s, NormalPoint& u) const {
  const double x[3] = {s.F, s.E0, s.nu};
  int count = 0;
  for (int k = 0; k < 3; ++k) {
    bool c = false;
    u[k] = to_standard_normal(params_[k], x[k], &c);
    count += c;
  }
  return count;
}

std::uint64_t stream_key(std::uint64_t seed, StreamTag tag, std::uint64_t iteration, std::uint64_t index) {
  auto mix = [](std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  };
  std::uint64_t h = mix(seed);
  h = mix(h ^ static_cast<std::uint64_t>(tag));
  h = mix(h ^ iteration);
  return mix(h ^ index);
}

NormalPoint draw_normal(Substream& s) {
  NormalPoint u;
  for (double& v : u) v = s.normal();
  return u;
}

std::vector<UncertainSample> draw(const UncertainModel& model, std::uint64_t seed, StreamTag tag,
                                  std::uint64_t iteration, int n) {
  if (n < 1) throw InvalidArgument("sample count must be at least 1");
  std::vector<UncertainSample> out(n);
  for (int i = 0; i < n; ++i) {
    Substream s(seed, tag, iteration, static_cast<std::uint64_t>(i));
    out[i] = model.from_normal(draw_normal(s));
  }
  return out;
}

}  // namespace rbto
