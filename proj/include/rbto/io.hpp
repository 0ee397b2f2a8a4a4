#pragma once

#include <iosfwd>
#include <vector>

#include "rbto/density.hpp"
#include "rbto/optimizer.hpp"

namespace rbto {

// element_id,rho,rho_f,rho_t with round-trip precision.
void write_design_csv(std::ostream& out, const DensityField& field);

// Reads the rho column of a design file. Throws InvalidArgument on malformed input.
std::vector<double> read_design_csv(std::istream& in);

void write_log_header(std::ostream& out);
void write_log_row(std::ostream& out, const LogRow& row);

}  // namespace rbto
