#include <exception>
#include <iostream>

#include <CLI11.hpp>

#include "rbto/config.hpp"
#include "rbto/error.hpp"
#include "rbto/runner.hpp"

namespace {

enum Exit { kOk = 0, kConfigError = 1, kRuntimeError = 2 };

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Reliability-based topology optimization"};
  app.require_subcommand(1);
  std::string config, design;

  auto* run = app.add_subcommand("run", "optimize the benchmark described by a config file");
  run->add_option("config", config, "run configuration")->required();
  auto* validate = app.add_subcommand("validate", "estimate the failure probability of a stored design");
  validate->add_option("design", design, "design CSV (element_id,rho,...)")->required();
  validate->add_option("config", config, "run configuration")->required();
  auto* mesh = app.add_subcommand("export-mesh", "write the benchmark mesh as legacy VTK");
  mesh->add_option("config", config, "run configuration")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfigError;
  }

  rbto::RunManifest manifest;
  try {
    manifest = rbto::load_config(config);
  } catch (const std::exception& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfigError;
  }

  try {
    if (*run) rbto::run(manifest, std::cout);
    else if (*validate) rbto::validate(design, manifest, std::cout);
    else rbto::export_mesh(manifest, std::cout);
  } catch (const rbto::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfigError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kRuntimeError;
  }
  return kOk;
}
