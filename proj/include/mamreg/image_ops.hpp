#pragma once

#include "mamreg/image.hpp"

namespace mamreg {

// Bilinear interpolation at a physical point. Coordinates outside the pixel
// center span [0,(w-1)*sx] x [0,(h-1)*sy] return 0 (dark background).
double sample_bilinear(const Image& image, double x_mm, double y_mm);

// Bilinear interpolation in index space with clamping (no background); used
// where the sample point is known to lie inside the grid.
double sample_index_clamped(const Image& image, double u, double v);

// Resize to new pixel dimensions. The output spacing is scaled so the
// physical extent (width*spacing) is preserved; values come from bilinear
// interpolation with output index i mapped to source index i*(w-1)/(nw-1)
// (endpoints aligned), so resampling to identical dimensions is exact.
Image resample(const Image& image, int new_width, int new_height);

// Same index mapping applied to each component; physical-unit vectors keep
// their magnitudes, and constant fields are preserved exactly.
DisplacementField resample_field(const DisplacementField& field, int new_width, int new_height);

// Nearest-foreground resampling of a mask (bilinear on 0/1 then > 0.5).
Mask resample_mask(const Mask& mask, int new_width, int new_height);

// Central differences in the interior, one-sided at the borders, divided by
// spacing (intensity per mm). Requires width and height >= 2.
VectorField gradient(const Image& image);

// Backward warping: out[p] = image sampled at p + field(p). Zero field is
// the exact identity.
Image warp(const Image& image, const DisplacementField& field);

// Separable convolution of each component with a truncated discrete
// Gaussian (radius ceil(3*sigma), renormalized over in-bounds taps).
// sigma is in pixels; sigma 0 is the identity.
DisplacementField gaussian_smooth(const DisplacementField& field, double sigma_px);

// Piecewise-linear quantile mapping of the moving image's intensities onto
// the reference image's, computed over pixels above each image's mean so the
// dark background does not dominate. Quantiles come from a histogram with
// `levels` bins; `landmarks` interior quantiles plus the foreground min/max
// anchor the transfer function. Degenerate foregrounds (either image
// constant above its mean) return the moving image unchanged.
Image histogram_match(const Image& moving, const Image& reference,
                      int levels = 1024, int landmarks = 7);

Image flip_horizontal(const Image& image);
Mask flip_horizontal(const Mask& mask);
DisplacementField flip_horizontal(const DisplacementField& field);

} // namespace mamreg
