#pragma once

#include "mamreg/image.hpp"

namespace mamreg {

enum class DemonsVariant { Classic, Symmetric };

struct DemonsParams {
    DemonsVariant variant = DemonsVariant::Classic;
    int max_iterations = 500;
    double smoothing_sigma = 1.0; // pixels, at working resolution
    // Normalization of the intensity term in the symmetric denominator;
    // values <= 0 select the mean squared pixel spacing of the working grid.
    double k_factor = 0.0;
    double convergence_tol = 1e-3; // mean per-pixel update, mm
    int working_width = 219;
    int working_height = 136;
};

struct DemonsResult {
    DisplacementField field; // at the fixed image's full resolution
    int iterations = 0;
    bool converged = false;
    double final_mean_update = 0.0; // mm
    long clamp_events = 0;          // component clamps against half the extent
};

// One unsmoothed update of the classic per-pixel force:
//   diff  = moving(p + D(p)) - fixed(p)
//   g     = grad fixed(p)
//   D'    = D - diff * g / (|g|^2 + diff^2),  0 where the denominator < 1e-12
DisplacementField demons_step_classic(const Image& fixed, const Image& moving,
                                      const DisplacementField& field);

// Symmetric-force variant: g is the sum of the fixed gradient and the
// gradient of the warped moving image, the numerator doubles, and the
// intensity term is divided by k:
//   D' = D - 2 diff * g / (|g|^2 + diff^2 / k)
DisplacementField demons_step_symmetric(const Image& fixed, const Image& moving,
                                        const DisplacementField& field, double k);

// Full pipeline: resample both images to the working resolution, histogram
// match moving onto fixed, iterate step + Gaussian field smoothing until the
// mean update over the mask drops below tol or max_iterations is reached,
// then resample the field back to the fixed image's resolution. Field
// components are clamped to half the image extent so a diverging force can
// never run away silently; clamp events are counted in the result.
DemonsResult register_demons(const Image& fixed, const Image& moving,
                             const Mask& fixed_mask, const DemonsParams& params);

} // namespace mamreg
