#include "rbto/io.hpp"

#include <charconv>
#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>

#include "rbto/error.hpp"

namespace rbto {

namespace {

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

void write_design_csv(std::ostream& out, const DensityField& f) {
  out << "element_id,rho,rho_f,rho_t\n";
  for (std::size_t e = 0; e < f.rho.size(); ++e)
    out << e << ',' << fmt(f.rho[e]) << ',' << fmt(f.rho_f[e]) << ',' << fmt(f.rho_t[e]) << '\n';
}

std::vector<double> read_design_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line.rfind("element_id,rho", 0) != 0)
    throw InvalidArgument("design file must start with an 'element_id,rho,...' header");
  std::vector<double> rho;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line == "\r") continue;
    std::istringstream ls(line);
    std::string id, value;
    if (!std::getline(ls, id, ',') || !std::getline(ls, value, ','))
      throw InvalidArgument("design file line " + std::to_string(lineno) + ": expected element_id,rho");
    if (std::stoul(id) != rho.size())
      throw InvalidArgument("design file line " + std::to_string(lineno) + ": element ids must be 0, 1, 2, ...");
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), v);
    if (ec != std::errc() || ptr != value.data() + value.size())
      throw InvalidArgument("design file line " + std::to_string(lineno) + ": bad density '" + value + "'");
    rho.push_back(v);
  }
  if (rho.empty()) throw InvalidArgument("design file has no elements");
  return rho;
}

void write_log_header(std::ostream& out) {
  out << "k,J,mean_C,vol_frac,pf,ln_pf,pf_source,t_star,fallback,n_failures,g_max,g_mean,pnorm_overshoot,"
         "skipped,penalty_active\n";
}

void write_log_row(std::ostream& out, const LogRow& r) {
  out << r.k << ',' << fmt(r.J) << ',' << fmt(r.mean_compliance) << ',' << fmt(r.volume_fraction) << ','
      << fmt(r.pf) << ',' << fmt(r.ln_pf) << ',' << pf_source_name(r.pf_source) << ',' << fmt(r.t_star) << ','
      << fallback_name(r.fallback) << ',' << r.n_failures << ',' << fmt(r.g_max) << ',' << fmt(r.g_mean) << ','
      << fmt(r.pnorm_overshoot) << ',' << r.skipped << ',' << (r.penalty_active ? 1 : 0) << '\n';
}

}  // namespace rbto
