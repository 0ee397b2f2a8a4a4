#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "rbto/density.hpp"
#include "rbto/error.hpp"
#include "rbto/performance.hpp"
#include "support.hpp"

using namespace rbto;

namespace {

Mesh single_triangle() {
  Mesh m;
  m.dimension = 2;
  m.nodes = {{0, 0, 0}, {2, 0, 0}, {0, 1, 0}};
  m.elements = {{0, 1, 2, -1}};
  m.fixed_dofs = {0, 1, 3};
  m.load_dofs = {{4, 1.0}};
  m.load_sign = 1.0;
  m.characteristic_size = 1.0;
  return m;
}

const UncertainSample kXi{0.7, 1.1, 0.28};

}  // namespace

TEST_CASE("kind names") {
  CHECK(parse_performance_kind("compliance") == PerformanceKind::Compliance);
  CHECK(parse_performance_kind("pnorm_stress") == PerformanceKind::PNormStress);
  CHECK(std::string(performance_kind_name(PerformanceKind::PNormStress)) == "pnorm_stress");
  CHECK_THROWS_AS(parse_performance_kind("mises"), InvalidArgument);
  CHECK_THROWS_AS((PerformanceSpec{PerformanceKind::Compliance, 0.0, 30.0}.validate()), InvalidArgument);
  CHECK_THROWS_AS((PerformanceSpec{PerformanceKind::PNormStress, 1.0, 0.5}.validate()), InvalidArgument);
}

TEST_CASE("pnorm") {
  const std::vector<double> v{3.0, 4.0};
  CHECK(pnorm(v, 1.0) == doctest::Approx(7.0));
  CHECK(pnorm(v, 2.0) == doctest::Approx(5.0));
  CHECK(pnorm(std::vector<double>{2.5}, 30.0) == doctest::Approx(2.5));
  CHECK(pnorm(std::vector<double>(4, 0.0), 30.0) == 0.0);
  // No overflow for large values at high p.
  CHECK(pnorm(std::vector<double>{1e200, 1e200}, 30.0) == doctest::Approx(1e200 * std::pow(2.0, 1.0 / 30.0)));

  SUBCASE("norm inequality and monotonicity in p") {
    for (unsigned seed = 1; seed <= 20; ++seed) {
      const auto s = testing::random_field(500, 0.0, 10.0, seed);
      const double mx = *std::max_element(s.begin(), s.end());
      double prev = pnorm(s, 1.0);
      for (double p : {2.0, 4.0, 8.0, 16.0, 30.0, 64.0}) {
        const double v = pnorm(s, p);
        CHECK(v >= mx * (1 - 1e-14));
        CHECK(v <= std::pow(500.0, 1.0 / p) * mx * (1 + 1e-14));
        CHECK(v <= prev * (1 + 1e-14));
        prev = v;
      }
    }
  }
}

TEST_CASE("compliance performance") {
  const FemSystem sys(testing::eight_element_mesh());
  const SimpLaw simp;
  const auto rho = testing::random_field(8, 0.3, 1.0, 51);

  SUBCASE("solid design with a tiny load is safe") {
    const PerformanceSample s = eval_compliance_g(sys, std::vector<double>(8, 1.0), simp, {1e-6, 1.0, 0.3}, 1.0);
    CHECK(s.g < 1e-6);
    CHECK_FALSE(s.is_failure);
  }
  SUBCASE("failure at the threshold") {
    const double g = eval_compliance_g(sys, rho, simp, kXi, 1.0, false).g;
    CHECK(eval_compliance_g(sys, rho, simp, kXi, g, false).is_failure);
    CHECK_FALSE(eval_compliance_g(sys, rho, simp, kXi, std::nextafter(g, 1e300), false).is_failure);
  }
  SUBCASE("doubling the load quadruples g") {
    const double a = eval_compliance_g(sys, rho, simp, kXi, 1.0, false).g;
    const double b = eval_compliance_g(sys, rho, simp, {2 * kXi.F, kXi.E0, kXi.nu}, 1.0, false).g;
    CHECK(b == doctest::Approx(4 * a).epsilon(1e-12));
  }
  SUBCASE("gradient in projected density matches finite differences") {
    const PerformanceSample s = eval_compliance_g(sys, rho, simp, kXi, 1.0);
    CHECK(s.grad.size() == 8u);
    const auto fd = testing::central_diff(
        [&](const std::vector<double>& r) { return eval_compliance_g(sys, r, simp, kXi, 1.0, false).g; }, rho, 1e-6);
    CHECK(testing::rel_inf(s.grad, fd) <= 1e-4);
  }
  SUBCASE("gradient in raw density matches finite differences") {
    const DensityChain chain(sys.mesh(), default_filter_radius(sys.mesh()), Projection{});
    const auto raw = testing::random_field(8, 0.3, 0.9, 52);
    const auto state = chain.forward(raw);
    const auto grad = chain.backprop(state, eval_compliance_g(sys, state.rho_t, simp, kXi, 1.0).grad);
    const auto fd = testing::central_diff(
        [&](const std::vector<double>& r) {
          return eval_compliance_g(sys, chain.forward(r).rho_t, simp, kXi, 1.0, false).g;
        },
        raw, 1e-6);
    CHECK(testing::rel_inf(grad, fd) <= 1e-4);
  }
  SUBCASE("dispatch") {
    const PerformanceSpec spec{PerformanceKind::Compliance, 10.0, 30.0};
    const PerformanceSample s = evaluate(sys, rho, simp, spec, kXi, {});
    CHECK(s.g == eval_compliance_g(sys, rho, simp, kXi, 10.0).g);
    CHECK(s.compliance == s.g);
  }
}

TEST_CASE("p-norm stress performance") {
  const FemSystem sys(testing::eight_element_mesh());
  const SimpLaw simp;
  const auto rho = testing::random_field(8, 0.3, 1.0, 61);

  SUBCASE("single element equals its von Mises stress for any p") {
    const FemSystem one(single_triangle());
    const std::vector<double> r{0.8};
    const double vm = one.solve(r, simp, {kXi.E0, kXi.nu}, kXi.F).von_mises[0];
    for (double p : {1.0, 8.0, 30.0}) CHECK(eval_pnorm_stress_g(one, r, simp, kXi, 1.0, p, {}).g == doctest::Approx(vm));
  }
  SUBCASE("p = 1 sums the element stresses") {
    const FemSolution sol = sys.solve(rho, simp, {kXi.E0, kXi.nu}, kXi.F);
    double sum = 0.0;
    for (double v : sol.von_mises) sum += v;
    CHECK(eval_pnorm_stress_g(sys, rho, simp, kXi, 1.0, 1.0, {}).g == doctest::Approx(sum).epsilon(1e-12));
  }
  for (double p : {8.0, 30.0}) {
    CAPTURE(p);
    SUBCASE("gradient matches finite differences") {
      const PerformanceSample s = eval_pnorm_stress_g(sys, rho, simp, kXi, 1.0, p, {});
      const auto fd = testing::central_diff(
          [&](const std::vector<double>& r) {
            return eval_pnorm_stress_g(sys, r, simp, kXi, 1.0, p, {false, false}).g;
          },
          rho, 1e-6);
      CHECK(testing::rel_inf(s.grad, fd) <= 1e-3);
    }
  }
  SUBCASE("gradient on a larger mesh") {
    const FemSystem big(build_l_beam(120.0, 6));
    const auto r = testing::random_field(big.mesh().num_elements(), 0.4, 1.0, 62);
    const PerformanceSample s = eval_pnorm_stress_g(big, r, simp, kXi, 1.0, 30.0, {});
    const auto fd = testing::central_diff(
        [&](const std::vector<double>& x) {
          return eval_pnorm_stress_g(big, x, simp, kXi, 1.0, 30.0, {false, false}).g;
        },
        r, 1e-6);
    CHECK(testing::rel_inf(s.grad, fd) <= 1e-3);
  }
  SUBCASE("overshoot bound on every evaluation") {
    const FemSystem big(build_l_beam(120.0, 42));
    const double bound = std::pow(static_cast<double>(big.mesh().num_elements()), 1.0 / 30.0);
    for (unsigned seed = 0; seed < 5; ++seed) {
      const auto r = testing::random_field(big.mesh().num_elements(), 0.0, 1.0, 70 + seed);
      const PerformanceSample s = eval_pnorm_stress_g(big, r, simp, kXi, 1.0, 30.0, {false, false});
      CHECK(s.g >= s.max_von_mises);
      CHECK(s.g <= bound * s.max_von_mises * (1 + 1e-12));
      CHECK(s.g / s.max_von_mises <= std::pow(20000.0, 1.0 / 30.0));
    }
  }
  SUBCASE("load scaling is linear") {
    const double a = eval_pnorm_stress_g(sys, rho, simp, kXi, 1.0, 30.0, {false, false}).g;
    for (double alpha : {0.5, 2.0, 7.0}) {
      const double b = eval_pnorm_stress_g(sys, rho, simp, {alpha * kXi.F, kXi.E0, kXi.nu}, 1.0, 30.0, {false, false}).g;
      CHECK(b == doctest::Approx(alpha * a).epsilon(1e-12));
    }
  }
  SUBCASE("zero load gives a finite gradient") {
    const PerformanceSample s = eval_pnorm_stress_g(sys, rho, simp, {0.0, 1.0, 0.3}, 1.0, 30.0, {});
    CHECK(s.g == 0.0);
    for (double v : s.grad) CHECK(std::isfinite(v));
  }
  SUBCASE("void elements do not break the gradient") {
    // Void patch away from the supports and the load.
    const FemSystem big(build_l_beam(120.0, 12));
    auto r = testing::random_field(big.mesh().num_elements(), 0.5, 1.0, 63);
    int voids = 0;
    for (int e = 0; e < big.mesh().num_elements(); ++e) {
      const Point c = big.mesh().centroid(e);
      if (c[0] < 25.0 && c[1] > 50.0 && c[1] < 90.0) {
        r[e] = 0.0;
        ++voids;
      }
    }
    REQUIRE(voids > 10);
    const PerformanceSample s = eval_pnorm_stress_g(big, r, simp, kXi, 1.0, 30.0, {});
    for (double v : s.grad) CHECK(std::isfinite(v));
  }
  SUBCASE("compliance gradient is reported alongside") {
    const PerformanceSample s = eval_pnorm_stress_g(sys, rho, simp, kXi, 1.0, 30.0, {});
    const PerformanceSample c = eval_compliance_g(sys, rho, simp, kXi, 1.0);
    CHECK(s.compliance == doctest::Approx(c.g));
    CHECK(testing::rel_inf(s.compliance_grad, c.grad) <= 1e-14);
  }
  SUBCASE("invalid exponent") { CHECK_THROWS_AS(eval_pnorm_stress_g(sys, rho, simp, kXi, 1.0, 0.5, {}), InvalidArgument); }
}

TEST_CASE("3D stress gradient") {
  const FemSystem sys(build_box_cantilever(60.0, 2, 1, 1));
  const auto rho = testing::random_field(sys.mesh().num_elements(), 0.4, 1.0, 81);
  const PerformanceSample s = eval_pnorm_stress_g(sys, rho, SimpLaw{}, kXi, 1.0, 8.0, {});
  const auto fd = testing::central_diff(
      [&](const std::vector<double>& r) {
        return eval_pnorm_stress_g(sys, r, SimpLaw{}, kXi, 1.0, 8.0, {false, false}).g;
      },
      rho, 1e-6);
  CHECK(testing::rel_inf(s.grad, fd) <= 1e-3);
}
