#include <doctest.h>

#include <cmath>
#include <algorithm>
#include <cstdlib>
#include <sys/wait.h>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "rbto/config.hpp"
#include "rbto/error.hpp"
#include "rbto/io.hpp"
#include "rbto/runner.hpp"

using namespace rbto;
namespace fs = std::filesystem;

namespace {

const char* kMinimal = R"(benchmark = "rect_half_beam"

[performance]
kind = "compliance"
threshold = 100.0
)";

// Tiny deterministic run used by the end-to-end checks.
const char* kTiny = R"(benchmark = "rect_half_beam"
mode = "rbto"
output_dir = "tiny"
seed = 5

[mesh]
nx = 6
ny = 2

[performance]
kind = "compliance"
threshold = 60.0

[optimizer]
max_iterations = 25
correction_period = 10
learning_rate = 0.01
deterministic = true
snapshot_every = 10

[reliability]
samples_per_level = 100
mc_samples = 500
)";

RunManifest parse(const std::string& text) {
  std::istringstream in(text);
  return parse_config(in, "test.toml");
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("rbto_cli_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

void write_file(const fs::path& p, const std::string& text) {
  std::ofstream out(p);
  out << text;
}

int cli(const std::string& args, const fs::path& root) {
  const std::string cmd = "RBTO_OUTPUT_ROOT='" + root.string() + "' '" RBTO_CLI_PATH "' " + args + " > '" +
                          (root / "stdout.txt").string() + "' 2> '" + (root / "stderr.txt").string() + "'";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

struct ScopedEnv {
  explicit ScopedEnv(const char* value) { setenv(kOutputRootEnv, value, 1); }
  ~ScopedEnv() { unsetenv(kOutputRootEnv); }
};

}  // namespace

TEST_CASE("defaults are filled in") {
  const RunManifest m = parse(kMinimal);
  const RunConfig& c = m.config;
  CHECK(m.benchmark == Benchmark::RectHalfBeam);
  CHECK(m.mode == Mode::Rbto);
  CHECK(c.simp.q == 3.0);
  CHECK(c.simp.eta_e == 1e-15);
  CHECK(c.performance.p == 30.0);
  CHECK(c.performance.threshold == 100.0);
  CHECK(c.projection.threshold == 0.5);
  CHECK(c.projection.beta == 8.0);
  CHECK(c.subset.p0 == 0.1);
  CHECK(c.subset.samples_per_level == 200);
  CHECK(c.correction_period == 20);
  CHECK(c.history_period == 20);
  CHECK(c.batch_size == 10);
  CHECK(c.learning_rate == 0.075);
  CHECK(c.uncertainty.spec(0).family == Family::Gaussian);
  CHECK(c.uncertainty.spec(0).mean == 0.5);
  CHECK(c.uncertainty.spec(1).family == Family::Lognormal);
  CHECK(c.uncertainty.spec(2).family == Family::Uniform);
  CHECK(m.mc_samples == 10000);
}

TEST_CASE("strict parsing") {
  SUBCASE("unknown key names the key and line") {
    try {
      parse(std::string(kMinimal) + "\n[optimizer]\nlearning_rte = 0.1\n");
      FAIL("expected a config error");
    } catch (const ConfigError& e) {
      const std::string msg = e.what();
      CHECK(msg.find("learning_rte") != std::string::npos);
      CHECK(msg.find("test.toml:8") != std::string::npos);
    }
  }
  SUBCASE("override") {
    const RunManifest m = parse(std::string(kMinimal) + "\n[optimizer]\ncorrection_period = 40\n");
    CHECK(m.config.correction_period == 40);
  }
  SUBCASE("type errors") {
    CHECK_THROWS_AS(parse(std::string(kMinimal) + "\n[optimizer]\nbatch_size = \"ten\"\n"), ConfigError);
    CHECK_THROWS_AS(parse(std::string(kMinimal) + "\n[optimizer]\nbatch_size = 2.5\n"), ConfigError);
    CHECK_THROWS_AS(parse(std::string(kMinimal) + "\n[optimizer]\nearly_stop = 1\n"), ConfigError);
  }
  SUBCASE("duplicate keys") {
    CHECK_THROWS_AS(parse(std::string(kMinimal) + "threshold = 50.0\n"), ConfigError);
  }
  SUBCASE("syntax errors") {
    CHECK_THROWS_AS(parse("benchmark = \n"), ConfigError);
    CHECK_THROWS_AS(parse("[mesh\nnx = 3\n"), ConfigError);
    CHECK_THROWS_AS(parse("benchmark = \"rect_half_beam\" extra\n"), ConfigError);
  }
  SUBCASE("constraint violations") {
    CHECK_THROWS_AS(parse(std::string(kMinimal) + "\n[optimizer]\np_a = 1.5\n"), ConfigError);
    CHECK_THROWS_AS(parse(std::string(kMinimal) + "\n[uncertainty.modulus]\nfamily = \"lognormal\"\nmean = -1.0\n"),
                    ConfigError);
    CHECK_THROWS_AS(parse("benchmark = \"truss\"\n"), ConfigError);
    CHECK_THROWS_AS(parse("mode = \"sweep\"\n"), ConfigError);
  }
  SUBCASE("robust mode drops the reliability penalty") {
    const RunManifest m = parse(std::string("mode = \"robust\"\n") + kMinimal);
    CHECK(m.mode == Mode::Robust);
    CHECK(m.config.kappa_f == 0.0);
  }
  SUBCASE("comments and dotted sections") {
    const RunManifest m = parse(std::string(kMinimal) +
                                "# comment\n[uncertainty.force]  # trailing\nfamily = \"gaussian\"\nmean = 1.0\nstd = 0.5\n");
    CHECK(m.config.uncertainty.spec(0).mean == 1.0);
    CHECK(m.config.uncertainty.spec(0).std == 0.5);
  }
  SUBCASE("missing file") { CHECK_THROWS_AS(load_config("/nonexistent/rbto.toml"), ConfigError); }
}

TEST_CASE("shipped configs parse") {
  for (const char* name : {"example1_rbto.toml", "example1_robust.toml", "example2_rbto.toml", "example2_robust.toml"}) {
    CAPTURE(name);
    const RunManifest m = load_config(fs::path(RBTO_CONFIG_DIR) / name);
    CHECK_NOTHROW(m.config.validate());
    CHECK(build_mesh(m).num_elements() > 900);
  }
}

TEST_CASE("design CSV round trip") {
  DensityField f;
  f.rho = {0.1, 1.0 / 3.0, 0.999999999999, 0.0};
  f.rho_f = {0.2, 0.3, 0.4, 0.5};
  f.rho_t = {0.0, 0.25, 0.5, 1.0};
  std::stringstream s;
  write_design_csv(s, f);
  CHECK(s.str().rfind("element_id,rho,rho_f,rho_t\n", 0) == 0);
  CHECK(read_design_csv(s) == f.rho);

  std::istringstream bad_header("id,rho\n0,1\n");
  CHECK_THROWS_AS(read_design_csv(bad_header), InvalidArgument);
  std::istringstream bad_ids("element_id,rho\n0,1\n2,1\n");
  CHECK_THROWS_AS(read_design_csv(bad_ids), InvalidArgument);
  std::istringstream bad_value("element_id,rho\n0,abc\n");
  CHECK_THROWS_AS(read_design_csv(bad_value), InvalidArgument);
}

TEST_CASE("output root override") {
  RunManifest m = parse(kMinimal);
  m.output_dir = "runs/a";
  {
    ScopedEnv env("/tmp/rbto_root");
    CHECK(resolve_output_dir(m) == fs::path("/tmp/rbto_root/runs/a"));
    m.output_dir = "/abs/dir";
    CHECK(resolve_output_dir(m) == fs::path("/abs/dir"));
  }
  m.output_dir = "runs/a";
  CHECK(resolve_output_dir(m) == fs::path("runs/a"));
}

TEST_CASE("command line exit codes") {
  const fs::path root = scratch("codes");
  write_file(root / "tiny.toml", kTiny);
  write_file(root / "typo.toml", std::string(kTiny) + "learning_rte = 0.1\n");

  CHECK(cli("export-mesh '" + (root / "tiny.toml").string() + "'", root) == 0);
  CHECK(fs::exists(root / "tiny" / "mesh.vtk"));
  CHECK(cli("", root) == 1);
  CHECK(cli("frobnicate", root) == 1);
  CHECK(cli("run '" + (root / "missing.toml").string() + "'", root) == 1);
  CHECK(cli("run '" + (root / "typo.toml").string() + "'", root) == 1);
  CHECK(slurp(root / "stderr.txt").find("learning_rte") != std::string::npos);

  write_file(root / "short.csv", "element_id,rho\n0,1\n1,1\n");
  CHECK(cli("validate '" + (root / "short.csv").string() + "' '" + (root / "tiny.toml").string() + "'", root) == 2);
  CHECK(cli("validate '" + (root / "absent.csv").string() + "' '" + (root / "tiny.toml").string() + "'", root) == 1);
}

TEST_CASE("runs are reproducible and validate recomputes the summary") {
  const fs::path root = scratch("run");
  write_file(root / "tiny.toml", kTiny);
  const std::string cfg = "'" + (root / "tiny.toml").string() + "'";

  REQUIRE(cli("run " + cfg, root) == 0);
  const fs::path out = root / "tiny";
  for (const char* f : {"convergence.csv", "final_design.csv", "final_design.vtk", "summary.json",
                        "density_0010.csv", "density_0020.vtk"})
    CHECK(fs::exists(out / f));
  const std::string first = slurp(out / "convergence.csv");
  CHECK(std::count(first.begin(), first.end(), '\n') == 26);

  REQUIRE(cli("run " + cfg, root) == 0);
  CHECK(slurp(out / "convergence.csv") == first);

  const auto summary = nlohmann::json::parse(slurp(out / "summary.json"));
  REQUIRE(cli("validate '" + (out / "final_design.csv").string() + "' " + cfg, root) == 0);
  const auto check = nlohmann::json::parse(slurp(out / "validation.json"));
  CHECK(check["monte_carlo"]["p_f"] == summary["final"]["monte_carlo"]["p_f"]);
  CHECK(check["subset_sim"]["p_f"] == summary["final"]["subset_sim"]["p_f"]);
  CHECK(check["volume_fraction"] == summary["final"]["volume_fraction"]);
}

TEST_CASE("validate on the solid Example I design reports a failure probability near zero" *
          doctest::should_fail()) {
  // The solid design already fails about 5% of the time at this threshold; the
  // statement does not hold for this geometry. See the companion test below.
  const RunManifest m = load_config(fs::path(RBTO_CONFIG_DIR) / "example1_rbto.toml");
  const FemSystem sys(build_mesh(m), m.solver);
  RunManifest only_mc = m;
  only_mc.final_subset = false;
  const DesignReport r = assess_design(sys, only_mc, std::vector<double>(sys.mesh().num_elements(), 1.0));
  CHECK(r.monte_carlo.p_f <= m.config.p_a);
}

TEST_CASE("the solid design bounds every other design's failure probability") {
  RunManifest m = load_config(fs::path(RBTO_CONFIG_DIR) / "example1_rbto.toml");
  m.final_subset = false;
  m.mc_samples = 2000;
  const FemSystem sys(build_mesh(m), m.solver);
  const int ne = sys.mesh().num_elements();
  const double solid = assess_design(sys, m, std::vector<double>(ne, 1.0)).monte_carlo.p_f;
  CHECK(solid > 0.0);
  std::vector<double> thinned(ne);
  for (int e = 0; e < ne; ++e) thinned[e] = 0.6 + 0.4 * ((e * 7919) % 101) / 100.0;
  CHECK(assess_design(sys, m, thinned).monte_carlo.p_f >= solid);
}
