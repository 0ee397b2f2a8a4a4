#pragma once

#include <array>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace rbto {

enum class Family { Gaussian, Lognormal, Uniform };

Family parse_family(const std::string& name);
const char* family_name(Family f);

// A marginal given by family and its first two moments.
struct DistributionSpec {
  Family family = Family::Gaussian;
  double mean = 0.0;
  double std = 0.0;

  void validate() const;
};

// Gaussian: (mu, sigma). Lognormal: parameters of the underlying normal.
// Uniform: bounds (lo, hi) = mean -/+ sqrt(3) std.
struct Parameterization {
  Family family = Family::Gaussian;
  double a = 0.0;
  double b = 0.0;
};

Parameterization parameterize(const DistributionSpec& spec);

inline constexpr double kNormalClip = 8.0;

// Inverse-CDF map from a standard normal coordinate.
double from_standard_normal(const Parameterization& p, double u);

// u = Phi^-1(CDF(x)). Results beyond +-8 are clipped and *clipped is set.
double to_standard_normal(const Parameterization& p, double x, bool* clipped = nullptr);

// One realisation of (F, E0, nu).
struct UncertainSample {
  double F = 0.0;
  double E0 = 1.0;
  double nu = 0.3;
};

using NormalPoint = std::array<double, 3>;

// Independent marginals for load magnitude, modulus and Poisson ratio.
class UncertainModel {
 public:
  UncertainModel() = default;
  UncertainModel(DistributionSpec force, DistributionSpec modulus, DistributionSpec poisson);

  const DistributionSpec& spec(int k) const { return specs_[k]; }
  const Parameterization& param(int k) const { return params_[k]; }

  // Modulus is floored at a tiny positive value and nu kept inside (-1, 0.5),
  // which only matters for Gaussian specs of those components.
  UncertainSample from_normal(const NormalPoint& u) const;
  // Returns the number of clipped components.
  int to_normal(const UncertainSample& s, NormalPoint& u) const;

 private:
  std::array<DistributionSpec, 3> specs_{};
  std::array<Parameterization, 3> params_{};
};

// Counter-based substreams: every (seed, tag, iteration, index) tuple gets its own
// generator, so results do not depend on evaluation order or thread count.
enum class StreamTag : std::uint64_t { Batch = 1, MonteCarlo = 2, Subset = 3, Test = 4 };

std::uint64_t stream_key(std::uint64_t seed, StreamTag tag, std::uint64_t iteration, std::uint64_t index);

class Substream {
 public:
  Substream(std::uint64_t seed, StreamTag tag, std::uint64_t iteration, std::uint64_t index)
      : engine_(stream_key(seed, tag, iteration, index)) {}
  double normal() { return normal_(engine_); }
  double uniform() { return uniform_(engine_); }
  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
  std::uniform_real_distribution<double> uniform_{0.0, 1.0};
};

NormalPoint draw_normal(Substream& s);

// n i.i.d. samples; sample i comes from substream (seed, tag, iteration, i).
std::vector<UncertainSample> draw(const UncertainModel& model, std::uint64_t seed, StreamTag tag,
                                  std::uint64_t iteration, int n);

}  // namespace rbto
