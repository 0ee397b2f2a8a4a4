#include "rbto/runner.hpp"

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <ostream>

#include <json.hpp>

#include "rbto/error.hpp"
#include "rbto/io.hpp"

namespace rbto {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::ofstream open_out(const fs::path& p) {
  std::ofstream out(p);
  if (!out) throw std::runtime_error("cannot write " + p.string());
  return out;
}

fs::path prepare_dir(const RunManifest& m) {
  const fs::path dir = resolve_output_dir(m);
  fs::create_directories(dir);
  return dir;
}

void write_fields(const fs::path& stem, const Mesh& mesh, const DensityField& f) {
  {
    auto out = open_out(stem.string() + ".csv");
    write_design_csv(out, f);
  }
  auto out = open_out(stem.string() + ".vtk");
  write_vtk(out, mesh, {{"rho", &f.rho}, {"rho_f", &f.rho_f}, {"rho_t", &f.rho_t}});
}

json estimate_json(const ReliabilityEstimate& r) {
  json j = {{"method", method_name(r.method)},
            {"p_f", r.p_f},
            {"seed", r.seed},
            {"evaluations", r.evaluations},
            {"failures", r.failures},
            {"samples_per_level", r.samples_per_level}};
  if (r.method == Method::MonteCarlo) j["std_error"] = r.std_error;
  else {
    j["levels"] = r.levels;
    j["thresholds"] = r.thresholds;
    j["acceptance"] = r.acceptance;
    j["truncated"] = r.truncated;
  }
  return j;
}

json report_json(const DesignReport& r) {
  json j = {{"volume_fraction", r.volume_fraction}};
  if (r.has_subset) j["subset_sim"] = estimate_json(r.subset);
  if (r.has_monte_carlo) j["monte_carlo"] = estimate_json(r.monte_carlo);
  return j;
}

kernels::Exec exec_of(const RunManifest& m) {
  return m.config.deterministic ? kernels::Exec::Serial : kernels::Exec::Parallel;
}

}  // namespace

fs::path resolve_output_dir(const RunManifest& m) {
  const fs::path dir(m.output_dir);
  const char* root = std::getenv(kOutputRootEnv);
  if (root && *root && dir.is_relative()) return fs::path(root) / dir;
  return dir;
}

DesignReport assess_design(const FemSystem& system, const RunManifest& m, std::vector<double> rho) {
  const RunConfig& c = m.config;
  const Mesh& mesh = system.mesh();
  if (static_cast<int>(rho.size()) != mesh.num_elements())
    throw InvalidArgument("design has " + std::to_string(rho.size()) + " elements, mesh has " +
                          std::to_string(mesh.num_elements()));
  const double radius = c.filter_radius > 0.0 ? c.filter_radius : default_filter_radius(mesh);
  const DensityChain chain(mesh, radius, c.projection);
  const DensityField f = chain.forward(std::move(rho));
  DesignReport r;
  r.volume_fraction = volume_and_gradient(mesh, f.rho_t).fraction;
  const LimitState ls = design_limit_state(system, f.rho_t, c.simp, c.performance);
  const double z = c.performance.threshold;
  if (m.final_subset) {
    r.has_subset = true;
    r.subset = subset_simulation(ls, c.uncertainty, z, c.subset, stream_key(c.seed, StreamTag::Subset, 0, 1),
                                 exec_of(m));
  }
  if (m.final_monte_carlo) {
    r.has_monte_carlo = true;
    r.monte_carlo = monte_carlo_pf(ls, c.uncertainty, z, m.mc_samples, stream_key(c.seed, StreamTag::MonteCarlo, 0, 1),
                                   exec_of(m));
  }
  return r;
}

fs::path run(const RunManifest& m, std::ostream& log) {
  if (m.mode == Mode::Validate) {
    if (m.design.empty()) throw ConfigError("mode = \"validate\" needs a design file");
    return validate(m.design, m, log);
  }
  const auto t0 = std::chrono::steady_clock::now();
  const fs::path dir = prepare_dir(m);
  const FemSystem system(build_mesh(m), m.solver);
  const Mesh& mesh = system.mesh();
  log << benchmark_name(m.benchmark) << " (" << mode_name(m.mode) << "): " << mesh.num_elements() << " elements, "
      << system.num_free() << " free dofs\n";

  auto conv = open_out(dir / "convergence.csv");
  write_log_header(conv);
  RunCallbacks cb;
  cb.on_row = [&](const LogRow& row) {
    write_log_row(conv, row);
    if (row.k % 100 == 0) {
      char buf[160];
      std::snprintf(buf, sizeof buf, "k=%d J=%.4g E[C]=%.4g vol=%.3f pf=%.3g (%s)\n", row.k, row.J,
                    row.mean_compliance, row.volume_fraction, row.pf, pf_source_name(row.pf_source));
      log << buf << std::flush;
    }
  };
  cb.snapshot_every = m.snapshot_every;
  cb.on_snapshot = [&](int k, const DensityField& f) {
    char name[32];
    std::snprintf(name, sizeof name, "density_%04d", k);
    write_fields(dir / name, mesh, f);
  };
  const RunResult result = run_optimization(system, m.config, cb);
  conv.close();
  write_fields(dir / "final_design", mesh, result.design);

  const DesignReport report = assess_design(system, m, result.design.rho);
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  json summary = {{"benchmark", benchmark_name(m.benchmark)},
                  {"mode", mode_name(m.mode)},
                  {"seed", m.config.seed},
                  {"elements", mesh.num_elements()},
                  {"iterations", result.log.size()},
                  {"stopped_early", result.stopped_early},
                  {"kappa_f", m.config.kappa_f},
                  {"final", report_json(report)},
                  {"runtime_seconds", seconds}};
  if (!result.log.empty()) summary["last_mean_compliance"] = result.log.back().mean_compliance;
  auto out = open_out(dir / "summary.json");
  out << summary.dump(2) << '\n';
  log << "volume fraction " << report.volume_fraction;
  if (report.has_subset) log << ", subset-sim P_f " << report.subset.p_f;
  if (report.has_monte_carlo) log << ", MC P_f " << report.monte_carlo.p_f << " +- " << report.monte_carlo.std_error;
  log << "\nwrote " << dir.string() << '\n';
  return dir;
}

fs::path validate(const fs::path& design, const RunManifest& m, std::ostream& log) {
  std::ifstream in(design);
  if (!in) throw ConfigError("cannot open design file " + design.string());
  std::vector<double> rho = read_design_csv(in);
  const fs::path dir = prepare_dir(m);
  const FemSystem system(build_mesh(m), m.solver);
  const DesignReport report = assess_design(system, m, std::move(rho));
  json j = report_json(report);
  j["design"] = design.string();
  j["seed"] = m.config.seed;
  auto out = open_out(dir / "validation.json");
  out << j.dump(2) << '\n';
  log << j.dump(2) << '\n';
  return dir;
}

fs::path export_mesh(const RunManifest& m, std::ostream& log) {
  const fs::path dir = prepare_dir(m);
  const Mesh mesh = build_mesh(m);
  auto out = open_out(dir / "mesh.vtk");
  write_vtk(out, mesh);
  log << mesh.num_elements() << " elements, " << mesh.num_nodes() << " nodes -> " << (dir / "mesh.vtk").string()
      << '\n';
  return dir;
}

}  // namespace rbto
