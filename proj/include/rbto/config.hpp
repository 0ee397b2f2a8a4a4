#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>

#include "rbto/fem.hpp"
#include "rbto/mesh.hpp"
#include "rbto/optimizer.hpp"

namespace rbto {

enum class Benchmark { RectHalfBeam, LBeam, BoxCantilever };
enum class Mode { Rbto, Robust, Validate };

const char* benchmark_name(Benchmark b);
const char* mode_name(Mode m);

struct MeshSpec {
  double length = 120.0;
  int nx = 39;
  int ny = 13;
  int nz = 3;
  int resolution = 42;  // l_beam cells along L
};

struct RunManifest {
  Benchmark benchmark = Benchmark::RectHalfBeam;
  Mode mode = Mode::Rbto;
  MeshSpec mesh;
  RunConfig config;
  SolverOptions solver;
  std::string output_dir = "output";
  std::string design;  // design file for mode = "validate"
  long mc_samples = 10000;
  bool final_subset = true;
  bool final_monte_carlo = true;
  int snapshot_every = 0;
};

// Strict TOML-style parser: `key = value` lines, `[section]` headers, `#`
// comments; values are numbers, booleans or double-quoted strings. Unknown
// keys and invalid values raise ConfigError naming the line and key.
RunManifest parse_config(std::istream& in, const std::string& source = "<config>");
RunManifest load_config(const std::filesystem::path& path);

Mesh build_mesh(const RunManifest& manifest);

}  // namespace rbto
