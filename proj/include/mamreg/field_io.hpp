#pragma once

#include <string>

#include "mamreg/image.hpp"

namespace mamreg {

// Displacement field file format "MREGF1": the 7-byte magic "MREGF1\n",
// width and height as little-endian uint32, spacing_x and spacing_y as
// little-endian float32, then the dx plane and the dy plane as row-major
// little-endian float32.
void save_field(const DisplacementField& field, const std::string& path);
DisplacementField load_field(const std::string& path);

} // namespace mamreg
