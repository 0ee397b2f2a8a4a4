#include "rbto/config.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <variant>

#include "rbto/error.hpp"

namespace rbto {

const char* benchmark_name(Benchmark b) {
  switch (b) {
    case Benchmark::RectHalfBeam: return "rect_half_beam";
    case Benchmark::LBeam: return "l_beam";
    case Benchmark::BoxCantilever: return "box_cantilever";
  }
  return "?";
}

const char* mode_name(Mode m) {
  switch (m) {
    case Mode::Rbto: return "rbto";
    case Mode::Robust: return "robust";
    case Mode::Validate: return "validate";
  }
  return "?";
}

namespace {

struct Value {
  std::variant<double, bool, std::string> v;
  int line = 0;
};

class Table {
 public:
  Table(std::map<std::string, Value> entries, std::string source)
      : entries_(std::move(entries)), source_(std::move(source)) {}

  [[noreturn]] void fail(const std::string& key, const std::string& what) const {
    const auto it = entries_.find(key);
    const std::string where = it != entries_.end() ? ":" + std::to_string(it->second.line) : "";
    throw ConfigError(source_ + where + ": key '" + key + "': " + what);
  }

  const Value* find(const std::string& key) {
    const auto it = entries_.find(key);
    if (it == entries_.end()) return nullptr;
    used_.insert(key);
    return &it->second;
  }

  void get(const std::string& key, double& out) {
    if (const Value* v = find(key)) {
      if (!std::holds_alternative<double>(v->v)) fail(key, "expected a number");
      out = std::get<double>(v->v);
    }
  }

  template <class Int>
    requires std::is_integral_v<Int>
  void get(const std::string& key, Int& out) {
    if (const Value* v = find(key)) {
      if (!std::holds_alternative<double>(v->v)) fail(key, "expected an integer");
      const double d = std::get<double>(v->v);
      if (d != std::floor(d) || std::abs(d) > 9.0e15) fail(key, "expected an integer");
      out = static_cast<Int>(d);
    }
  }

  void get(const std::string& key, bool& out) {
    if (const Value* v = find(key)) {
      if (!std::holds_alternative<bool>(v->v)) fail(key, "expected true or false");
      out = std::get<bool>(v->v);
    }
  }

  void get(const std::string& key, std::string& out) {
    if (const Value* v = find(key)) {
      if (!std::holds_alternative<std::string>(v->v)) fail(key, "expected a quoted string");
      out = std::get<std::string>(v->v);
    }
  }

  void reject_unused() const {
    for (const auto& [key, v] : entries_)
      if (!used_.count(key)) throw ConfigError(source_ + ":" + std::to_string(v.line) + ": unknown key '" + key + "'");
  }

 private:
  std::map<std::string, Value> entries_;
  std::set<std::string> used_;
  std::string source_;
};

std::string trim(const std::string& s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

bool valid_name(const std::string& s) {
  if (s.empty()) return false;
  for (char c : s)
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '.')) return false;
  return s.front() != '.' && s.back() != '.';
}

Table tokenize(std::istream& in, const std::string& source) {
  std::map<std::string, Value> entries;
  std::string section, raw;
  int lineno = 0;
  auto err = [&](const std::string& what) {
    throw ConfigError(source + ":" + std::to_string(lineno) + ": " + what);
  };
  while (std::getline(in, raw)) {
    ++lineno;
    // Strip comments outside strings.
    std::string line;
    bool in_str = false;
    for (char c : raw) {
      if (c == '"') in_str = !in_str;
      if (c == '#' && !in_str) break;
      line += c;
    }
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') err("unterminated section header");
      section = trim(line.substr(1, line.size() - 2));
      if (!valid_name(section)) err("invalid section name '" + section + "'");
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) err("expected 'key = value'");
    const std::string key = trim(line.substr(0, eq));
    const std::string text = trim(line.substr(eq + 1));
    if (!valid_name(key)) err("invalid key '" + key + "'");
    const std::string full = section.empty() ? key : section + "." + key;
    if (entries.count(full)) err("duplicate key '" + full + "'");
    Value v;
    v.line = lineno;
    if (text.empty()) err("missing value for '" + full + "'");
    if (text.front() == '"') {
      if (text.size() < 2 || text.back() != '"' || text.find('"', 1) != text.size() - 1)
        err("bad string value for '" + full + "'");
      v.v = text.substr(1, text.size() - 2);
    } else if (text == "true" || text == "false") {
      v.v = text == "true";
    } else {
      std::string num;
      for (char c : text)
        if (c != '_') num += c;
      double d = 0.0;
      const auto [ptr, ec] = std::from_chars(num.data(), num.data() + num.size(), d);
      if (ec != std::errc() || ptr != num.data() + num.size() || !std::isfinite(d))
        err("bad value '" + text + "' for '" + full + "'");
      v.v = d;
    }
    entries.emplace(full, std::move(v));
  }
  return Table(std::move(entries), source);
}

DistributionSpec read_distribution(Table& t, const std::string& prefix, DistributionSpec d) {
  std::string family = family_name(d.family);
  t.get(prefix + ".family", family);
  try {
    d.family = parse_family(family);
  } catch (const InvalidArgument& e) {
    t.fail(prefix + ".family", e.what());
  }
  t.get(prefix + ".mean", d.mean);
  t.get(prefix + ".std", d.std);
  return d;
}

}  // namespace

RunManifest parse_config(std::istream& in, const std::string& source) {
  Table t = tokenize(in, source);
  RunManifest m;
  RunConfig& c = m.config;

  std::string benchmark = benchmark_name(m.benchmark), mode = mode_name(m.mode);
  t.get("benchmark", benchmark);
  if (benchmark == "rect_half_beam") m.benchmark = Benchmark::RectHalfBeam;
  else if (benchmark == "l_beam") m.benchmark = Benchmark::LBeam;
  else if (benchmark == "box_cantilever") m.benchmark = Benchmark::BoxCantilever;
  else t.fail("benchmark", "expected rect_half_beam, l_beam or box_cantilever");
  t.get("mode", mode);
  if (mode == "rbto") m.mode = Mode::Rbto;
  else if (mode == "robust") m.mode = Mode::Robust;
  else if (mode == "validate") m.mode = Mode::Validate;
  else t.fail("mode", "expected rbto, robust or validate");
  t.get("output_dir", m.output_dir);
  t.get("design", m.design);
  t.get("seed", c.seed);

  t.get("mesh.length", m.mesh.length);
  t.get("mesh.nx", m.mesh.nx);
  t.get("mesh.ny", m.mesh.ny);
  t.get("mesh.nz", m.mesh.nz);
  t.get("mesh.resolution", m.mesh.resolution);

  std::string kind = performance_kind_name(c.performance.kind);
  t.get("performance.kind", kind);
  try {
    c.performance.kind = parse_performance_kind(kind);
  } catch (const InvalidArgument& e) {
    t.fail("performance.kind", e.what());
  }
  t.get("performance.threshold", c.performance.threshold);
  t.get("performance.p", c.performance.p);

  const DistributionSpec force = read_distribution(t, "uncertainty.force", {Family::Gaussian, 0.5, 0.25});
  const DistributionSpec modulus = read_distribution(t, "uncertainty.modulus", {Family::Lognormal, 1.0, 0.1});
  const DistributionSpec poisson = read_distribution(t, "uncertainty.poisson", {Family::Uniform, 0.3, 0.115});
  try {
    c.uncertainty = UncertainModel(force, modulus, poisson);
  } catch (const InvalidArgument& e) {
    throw ConfigError(source + ": [uncertainty]: " + e.what());
  }

  t.get("optimizer.omega_c", c.omega_c);
  t.get("optimizer.omega_v", c.omega_v);
  t.get("optimizer.kappa_f", c.kappa_f);
  t.get("optimizer.p_a", c.p_a);
  t.get("optimizer.conservative_target", c.conservative_target);
  t.get("optimizer.batch_size", c.batch_size);
  t.get("optimizer.history_period", c.history_period);
  t.get("optimizer.correction_period", c.correction_period);
  t.get("optimizer.learning_rate", c.learning_rate);
  t.get("optimizer.learning_rate_decay", c.learning_rate_decay);
  t.get("optimizer.max_iterations", c.max_iterations);
  std::string average = c.gradient_mean ? "mean" : "sum";
  t.get("optimizer.gradient_average", average);
  if (average != "mean" && average != "sum") t.fail("optimizer.gradient_average", "expected \"mean\" or \"sum\"");
  c.gradient_mean = average == "mean";
  t.get("optimizer.initial_density", c.initial_density);
  t.get("optimizer.early_stop", c.early_stop);
  t.get("optimizer.stop_window", c.stop_window);
  t.get("optimizer.stop_tolerance", c.stop_tolerance);
  t.get("optimizer.deterministic", c.deterministic);
  t.get("optimizer.snapshot_every", m.snapshot_every);
  t.get("optimizer.tilt_tolerance", c.tilt.tolerance);
  t.get("optimizer.tilt_max_iterations", c.tilt.max_iterations);

  t.get("density.q", c.simp.q);
  t.get("density.eta_e", c.simp.eta_e);
  t.get("density.beta", c.projection.beta);
  t.get("density.threshold", c.projection.threshold);
  t.get("density.filter_radius", c.filter_radius);

  t.get("reliability.p0", c.subset.p0);
  t.get("reliability.samples_per_level", c.subset.samples_per_level);
  t.get("reliability.proposal_width", c.subset.proposal_width);
  t.get("reliability.max_levels", c.subset.max_levels);
  t.get("reliability.mc_samples", m.mc_samples);
  t.get("reliability.final_subset", m.final_subset);
  t.get("reliability.final_monte_carlo", m.final_monte_carlo);

  std::string solver = "auto";
  t.get("solver.kind", solver);
  if (solver == "auto") m.solver.kind = SolverOptions::Kind::Auto;
  else if (solver == "direct") m.solver.kind = SolverOptions::Kind::Direct;
  else if (solver == "iterative") m.solver.kind = SolverOptions::Kind::Iterative;
  else t.fail("solver.kind", "expected auto, direct or iterative");
  t.get("solver.direct_limit", m.solver.direct_limit);
  t.get("solver.tolerance", m.solver.tolerance);
  t.get("solver.max_iterations", m.solver.max_iterations);

  t.reject_unused();

  if (m.mode == Mode::Robust) c.kappa_f = 0.0;
  try {
    c.validate();
  } catch (const InvalidArgument& e) {
    throw ConfigError(source + ": " + e.what());
  }
  if (!(m.mesh.length > 0.0)) throw ConfigError(source + ": mesh.length must be positive");
  if (m.mc_samples < 1) throw ConfigError(source + ": reliability.mc_samples must be at least 1");
  if (m.snapshot_every < 0) throw ConfigError(source + ": optimizer.snapshot_every must be non-negative");
  if (m.output_dir.empty()) throw ConfigError(source + ": output_dir must not be empty");
  return m;
}

RunManifest load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  return parse_config(in, path.string());
}

Mesh build_mesh(const RunManifest& m) {
  try {
    switch (m.benchmark) {
      case Benchmark::RectHalfBeam: return build_rect_half_beam(m.mesh.length, m.mesh.nx, m.mesh.ny);
      case Benchmark::LBeam: return build_l_beam(m.mesh.length, m.mesh.resolution);
      case Benchmark::BoxCantilever: return build_box_cantilever(m.mesh.length, m.mesh.nx, m.mesh.ny, m.mesh.nz);
    }
  } catch (const InvalidArgument& e) {
    throw ConfigError(std::string("[mesh]: ") + e.what());
  }
  throw ConfigError("unknown benchmark");
}

}  // namespace rbto
