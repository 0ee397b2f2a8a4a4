#include <doctest.h>

#include <cmath>
#include <vector>

#include "rbto/error.hpp"
#include "rbto/optimizer.hpp"
#include "support.hpp"

using namespace rbto;

namespace {

UncertainModel table_model() {
  return UncertainModel({Family::Gaussian, 0.5, 0.25}, {Family::Lognormal, 1.0, 0.1}, {Family::Uniform, 0.3, 0.115});
}

UncertainModel fixed_model(double F) {
  return UncertainModel({Family::Gaussian, F, 0.0}, {Family::Lognormal, 1.0, 0.0}, {Family::Uniform, 0.3, 0.0});
}

// Compliance threshold giving a failure rate of a few percent on the solid 2 x 2 half beam.
double small_threshold(const FemSystem& sys) {
  const std::vector<double> solid(sys.mesh().num_elements(), 1.0);
  const double c_mean = sys.solve(solid, SimpLaw{}, {1.0, 0.3}, 0.5).compliance;
  return c_mean * std::pow(0.95 / 0.5, 2);
}

RunConfig small_config(const FemSystem& sys) {
  RunConfig c;
  c.uncertainty = table_model();
  c.performance = {PerformanceKind::Compliance, small_threshold(sys), 30.0};
  c.conservative_target = false;
  c.max_iterations = 40;
  c.correction_period = 5;
  c.history_period = 10;
  c.learning_rate = 1e-3;
  c.subset.samples_per_level = 100;
  c.seed = 77;
  c.early_stop = false;
  c.deterministic = true;
  return c;
}

void check_same_log(const std::vector<LogRow>& a, const std::vector<LogRow>& b) {
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CAPTURE(i);
    CHECK(a[i].J == b[i].J);
    CHECK(a[i].mean_compliance == b[i].mean_compliance);
    CHECK(a[i].volume_fraction == b[i].volume_fraction);
    CHECK(a[i].ln_pf == b[i].ln_pf);
    CHECK(a[i].t_star == b[i].t_star);
    CHECK(a[i].pf_source == b[i].pf_source);
    CHECK(a[i].fallback == b[i].fallback);
    CHECK(a[i].n_failures == b[i].n_failures);
  }
}

}  // namespace

TEST_CASE("penalized objective") {
  RunConfig c;
  c.conservative_target = false;
  c.omega_c = 1.0;
  c.omega_v = 0.2;
  c.kappa_f = 1500.0;
  c.p_a = 1e-2;
  CHECK(penalized_objective(10.0, 50.0, std::log(c.p_a), c) == doctest::Approx(10.0 + 0.2 * 50.0));
  CHECK(penalized_objective(10.0, 50.0, std::log(M_E * c.p_a), c) == doctest::Approx(20.0 + 750.0));
  CHECK(penalized_objective(10.0, 50.0, -std::numeric_limits<double>::infinity(), c) == doctest::Approx(20.0));
  c.omega_c = c.omega_v = 0.0;
  CHECK(penalized_objective(10.0, 50.0, std::log(0.5 * c.p_a), c) == 0.0);
  c.conservative_target = true;
  CHECK(c.target_ln_pf() == doctest::Approx(std::log(0.5e-2)));
  CHECK(penalized_objective(0.0, 0.0, std::log(c.p_a), c) == doctest::Approx(750.0 * std::log(2.0) * std::log(2.0)));
}

TEST_CASE("objective gradient") {
  const FemSystem sys(testing::eight_element_mesh());
  const Mesh& m = sys.mesh();
  const auto A = m.measures();
  const DensityChain chain(m, default_filter_radius(m), Projection{});
  const auto rho = testing::random_field(8, 0.3, 0.9, 111);
  const auto state = chain.forward(rho);
  const std::vector<UncertainSample> batch{{0.4, 1.0, 0.3}, {0.7, 0.9, 0.2}, {0.55, 1.1, 0.35}};
  RunConfig c;
  c.kappa_f = 0.0;

  const auto sample_grads = [&](const DensityField& s, std::vector<std::vector<double>>& out) {
    double mean = 0.0;
    out.clear();
    for (const auto& xi : batch) {
      const auto r = eval_compliance_g(sys, s.rho_t, c.simp, xi, 1e9);
      mean += r.g / batch.size();
      out.push_back(r.grad);
    }
    return mean;
  };
  std::vector<std::vector<double>> grads;
  sample_grads(state, grads);
  std::vector<const std::vector<double>*> ptrs;
  for (const auto& g : grads) ptrs.push_back(&g);

  SUBCASE("compliance and volume terms match finite differences") {
    const auto grad = objective_gradient(chain, state, A, ptrs, {}, 0.0, c);
    const auto J = [&](const std::vector<double>& r) {
      const auto s = chain.forward(r);
      std::vector<std::vector<double>> tmp;
      const double mc = sample_grads(s, tmp);
      return penalized_objective(mc, volume_and_gradient(m, s.rho_t).volume, 0.0, c);
    };
    CHECK(testing::rel_inf(grad, testing::central_diff(J, rho, 1e-6)) <= 1e-4);
  }
  SUBCASE("sum convention scales the compliance term by n") {
    RunConfig s = c;
    s.gradient_mean = false;
    s.omega_v = 0.0;
    RunConfig mean = c;
    mean.omega_v = 0.0;
    const auto a = objective_gradient(chain, state, A, ptrs, {}, 0.0, mean);
    const auto b = objective_gradient(chain, state, A, ptrs, {}, 0.0, s);
    for (int e = 0; e < 8; ++e) CHECK(b[e] == doctest::Approx(3.0 * a[e]));
  }
  SUBCASE("reliability term vanishes when the constraint holds") {
    RunConfig r = c;
    r.kappa_f = 1500.0;
    const std::vector<double> huge(8, 1e6);
    const auto a = objective_gradient(chain, state, A, ptrs, {}, 0.0, c);
    const auto b = objective_gradient(chain, state, A, ptrs, huge, r.target_ln_pf(), r);
    const auto d = objective_gradient(chain, state, A, ptrs, huge, r.target_ln_pf() - 3.0, r);
    CHECK(a == b);
    CHECK(a == d);
  }
  SUBCASE("active reliability term") {
    RunConfig r = c;
    r.kappa_f = 100.0;
    const auto dir = testing::random_field(8, -1.0, 1.0, 112);
    const double ln_pf = r.target_ln_pf() + 0.5;
    const auto base = objective_gradient(chain, state, A, ptrs, {}, ln_pf, c);
    const auto full = objective_gradient(chain, state, A, ptrs, dir, ln_pf, r);
    const auto extra = chain.backprop(state, dir);
    for (int e = 0; e < 8; ++e) CHECK(full[e] - base[e] == doctest::Approx(100.0 * 0.5 * extra[e]).epsilon(1e-9));
  }
}

TEST_CASE("SGD step") {
  std::vector<double> rho{0.5, 0.2, 0.9};
  sgd_step(rho, std::vector<double>(3, 0.0), 0.075);
  CHECK(rho == std::vector<double>{0.5, 0.2, 0.9});
  sgd_step(rho, std::vector<double>{1.0, 0.0, 0.0}, 0.075);
  CHECK(rho[0] == doctest::Approx(0.425).epsilon(1e-15));
  sgd_step(rho, std::vector<double>{0.0, 10.0, -10.0}, 0.075);
  CHECK(rho[1] == 0.0);
  CHECK(rho[2] == 1.0);
  CHECK_THROWS_AS(sgd_step(rho, std::vector<double>(2, 0.0), 0.1), InvalidArgument);
}

TEST_CASE("zero iterations return the solid start") {
  const FemSystem sys(testing::eight_element_mesh());
  RunConfig c = small_config(sys);
  c.max_iterations = 0;
  const RunResult r = run_optimization(sys, c);
  CHECK(r.log.empty());
  for (double v : r.design.rho_t) CHECK(v == 1.0);
  CHECK(volume_and_gradient(sys.mesh(), r.design.rho_t).fraction == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("deterministic single sample reduces to monotone gradient descent") {
  const FemSystem sys(testing::eight_element_mesh());
  RunConfig c;
  c.uncertainty = fixed_model(1.0);
  c.performance = {PerformanceKind::Compliance, 1e9, 30.0};
  c.kappa_f = 0.0;
  c.batch_size = 1;
  c.learning_rate = 1e-3;
  c.max_iterations = 300;
  c.correction_period = 1000;
  c.early_stop = false;
  c.deterministic = true;
  const RunResult r = run_optimization(sys, c);
  REQUIRE(r.log.size() == 300u);
  for (std::size_t i = 1; i < r.log.size(); ++i) {
    CAPTURE(i);
    CHECK(r.log[i].J <= r.log[i - 1].J * (1 + 1e-12));
  }
  CHECK(r.log.back().J < r.log.front().J);
}

TEST_CASE("optimization loop") {
  const FemSystem sys(testing::eight_element_mesh());
  const RunConfig c = small_config(sys);
  const RunResult r = run_optimization(sys, c);
  REQUIRE(r.log.size() == 40u);

  SUBCASE("every m-th row is corrected by subset simulation") {
    for (const auto& row : r.log) {
      CAPTURE(row.k);
      CHECK((row.pf_source == PfSource::SubsetSim) == (row.k % c.correction_period == 0));
    }
    CHECK(r.last_subset_pf >= 0.0);
  }
  SUBCASE("penalty is active only above the target") {
    for (const auto& row : r.log) {
      CHECK(row.ln_pf <= 0.0);
      CHECK(row.penalty_active == (row.ln_pf > c.target_ln_pf()));
      CHECK(row.skipped == 0);
    }
  }
  SUBCASE("fallback flags follow the batch outcome") {
    bool history_used = false;
    for (const auto& row : r.log) {
      CAPTURE(row.k);
      if (row.n_failures == c.batch_size) CHECK(row.fallback == Fallback::NotRare);
      else if (row.n_failures == 0) CHECK((row.fallback == Fallback::History || row.fallback == Fallback::LastGradient));
      else CHECK(row.fallback == Fallback::None);
      history_used |= row.fallback == Fallback::History;
    }
    CHECK(history_used);
  }
  SUBCASE("identical configuration gives a bitwise identical log") {
    check_same_log(r.log, run_optimization(sys, c).log);
  }
  SUBCASE("parallel evaluation gives the same log") {
    RunConfig p = c;
    p.deterministic = false;
    check_same_log(r.log, run_optimization(sys, p).log);
  }
  SUBCASE("a different seed changes the log") {
    RunConfig p = c;
    p.seed = 78;
    CHECK(run_optimization(sys, p).log[0].mean_compliance != r.log[0].mean_compliance);
  }
}

TEST_CASE("callbacks") {
  const FemSystem sys(testing::eight_element_mesh());
  RunConfig c = small_config(sys);
  c.max_iterations = 12;
  int rows = 0;
  std::vector<int> snaps;
  RunCallbacks cb;
  cb.on_row = [&](const LogRow&) { ++rows; };
  cb.on_snapshot = [&](int k, const DensityField& f) {
    snaps.push_back(k);
    CHECK(f.rho_t.size() == 8u);
  };
  cb.snapshot_every = 5;
  run_optimization(sys, c, cb);
  CHECK(rows == 12);
  CHECK(snaps == std::vector<int>{5, 10});
}

TEST_CASE("early stop once the objective settles and the estimate is feasible") {
  const FemSystem sys(testing::eight_element_mesh());
  RunConfig c;
  c.uncertainty = fixed_model(0.5);
  c.performance = {PerformanceKind::Compliance, 1e9, 30.0};
  c.learning_rate = 1e-4;
  c.max_iterations = 1000;
  c.correction_period = 5;
  c.stop_window = 10;
  c.stop_tolerance = 1e-2;
  c.deterministic = true;
  const RunResult r = run_optimization(sys, c);
  CHECK(r.stopped_early);
  CHECK(r.log.size() < 1000u);
  CHECK(r.last_subset_pf == 0.0);
}

TEST_CASE("configuration validation") {
  RunConfig c;
  c.uncertainty = table_model();
  CHECK_NOTHROW(c.validate());
  RunConfig bad = c;
  bad.p_a = 1.0;
  CHECK_THROWS_AS(bad.validate(), InvalidArgument);
  bad = c;
  bad.batch_size = 0;
  CHECK_THROWS_AS(bad.validate(), InvalidArgument);
  bad = c;
  bad.correction_period = 0;
  CHECK_THROWS_AS(bad.validate(), InvalidArgument);
  bad = c;
  bad.learning_rate = 0.0;
  CHECK_THROWS_AS(bad.validate(), InvalidArgument);
}
