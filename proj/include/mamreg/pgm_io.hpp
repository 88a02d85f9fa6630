#pragma once

#include <string>

#include "mamreg/image.hpp"

namespace mamreg {

// Binary PGM ("P5") reader. maxval up to 65535; samples above 255 are two
// bytes, big-endian. Intensities are divided by maxval into [0,1]. Pixel
// spacing comes from an optional sidecar file "<path>.meta" with lines
// "spacing_x=<mm>" and "spacing_y=<mm>"; without it both default to 0.05.
Image load_pgm(const std::string& path);

// Writes binary PGM at bit depth 8 or 16 (maxval 255 / 65535, 16-bit
// big-endian) plus the "<path>.meta" spacing sidecar. Values are quantized
// with round-half-away, so a load/save round trip is within 0.5/maxval.
void save_pgm(const Image& image, const std::string& path, int bit_depth = 16);

// Masks are exchanged as 8-bit PGM with values 0 / 255.
Mask load_mask_pgm(const std::string& path);
void save_mask_pgm(const Mask& mask, const std::string& path);

} // namespace mamreg
