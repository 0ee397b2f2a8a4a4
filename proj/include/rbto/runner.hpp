#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "rbto/config.hpp"

namespace rbto {

inline constexpr const char* kOutputRootEnv = "RBTO_OUTPUT_ROOT";

// output_dir resolved against $RBTO_OUTPUT_ROOT when that is set.
std::filesystem::path resolve_output_dir(const RunManifest& manifest);

struct DesignReport {
  double volume_fraction = 0.0;
  bool has_subset = false;
  ReliabilityEstimate subset;
  bool has_monte_carlo = false;
  ReliabilityEstimate monte_carlo;
};

// Reliability of a raw design: subset simulation and crude Monte Carlo with
// seeds derived from the manifest seed.
DesignReport assess_design(const FemSystem& system, const RunManifest& manifest, std::vector<double> rho);

// Runs the optimization and writes convergence.csv, snapshots, final_design.*
// and summary.json. Progress lines go to `log`. Returns the output directory.
std::filesystem::path run(const RunManifest& manifest, std::ostream& log);

// Assesses a stored design and writes validation.json.
std::filesystem::path validate(const std::filesystem::path& design, const RunManifest& manifest, std::ostream& log);

// Writes mesh.vtk.
std::filesystem::path export_mesh(const RunManifest& manifest, std::ostream& log);

}  // namespace rbto
