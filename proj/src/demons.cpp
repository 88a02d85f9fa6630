#include "mamreg/demons.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "mamreg/errors.hpp"
#include "mamreg/image_ops.hpp"

namespace mamreg {

namespace {

constexpr double kDenomEps = 1e-12;

inline void classic_update(double diff, double gx, double gy, double& ux, double& uy) {
    const double denom = gx * gx + gy * gy + diff * diff;
    if (denom < kDenomEps) {
        ux = uy = 0.0;
        return;
    }
    ux = -diff * gx / denom;
    uy = -diff * gy / denom;
}

inline void symmetric_update(double diff, double gx, double gy, double k,
                             double& ux, double& uy) {
    const double denom = gx * gx + gy * gy + diff * diff / k;
    if (denom < kDenomEps) {
        ux = uy = 0.0;
        return;
    }
    ux = -2.0 * diff * gx / denom;
    uy = -2.0 * diff * gy / denom;
}

void check_step_args(const Image& fixed, const Image& moving, const DisplacementField& field) {
    if (!fixed.same_dims(moving) || !field.same_dims(fixed))
        throw std::invalid_argument("demons step: image and field dimensions must match");
}

void check_finite(const Image& img, const char* name) {
    for (double v : img.data)
        if (!std::isfinite(v)) throw DataError(std::string("register_demons: non-finite intensity in ") + name);
}

} // namespace

DisplacementField demons_step_classic(const Image& fixed, const Image& moving,
                                      const DisplacementField& field) {
    check_step_args(fixed, moving, field);
    const VectorField grad_f = gradient(fixed);
    const Image warped = warp(moving, field);
    DisplacementField out = field;
    for (size_t i = 0; i < out.size(); ++i) {
        const double diff = warped.data[i] - fixed.data[i];
        double ux, uy;
        classic_update(diff, grad_f.dx[i], grad_f.dy[i], ux, uy);
        out.dx[i] += ux;
        out.dy[i] += uy;
    }
    return out;
}

DisplacementField demons_step_symmetric(const Image& fixed, const Image& moving,
                                        const DisplacementField& field, double k) {
    check_step_args(fixed, moving, field);
    if (k <= 0.0) throw std::invalid_argument("demons step: k must be > 0");
    const VectorField grad_f = gradient(fixed);
    const Image warped = warp(moving, field);
    const VectorField grad_w = gradient(warped);
    DisplacementField out = field;
    for (size_t i = 0; i < out.size(); ++i) {
        const double diff = warped.data[i] - fixed.data[i];
        double ux, uy;
        symmetric_update(diff, grad_f.dx[i] + grad_w.dx[i], grad_f.dy[i] + grad_w.dy[i],
                         k, ux, uy);
        out.dx[i] += ux;
        out.dy[i] += uy;
    }
    return out;
}

DemonsResult register_demons(const Image& fixed, const Image& moving,
                             const Mask& fixed_mask, const DemonsParams& params) {
    if (params.max_iterations < 1)
        throw std::invalid_argument("register_demons: max_iterations must be >= 1");
    if (params.smoothing_sigma < 0.0)
        throw std::invalid_argument("register_demons: smoothing sigma must be >= 0");
    if (params.convergence_tol < 0.0)
        throw std::invalid_argument("register_demons: convergence tol must be >= 0");
    if (params.working_width < 2 || params.working_height < 2)
        throw std::invalid_argument("register_demons: working resolution too small");
    if (fixed_mask.width != fixed.width || fixed_mask.height != fixed.height)
        throw std::invalid_argument("register_demons: mask must align with the fixed image");
    check_finite(fixed, "fixed");
    check_finite(moving, "moving");

    const int wl = params.working_width, hl = params.working_height;
    const Image fixed_w = resample(fixed, wl, hl);
    Image moving_w = resample(moving, wl, hl);
    Mask mask_w = resample_mask(fixed_mask, wl, hl);
    if (mask_w.count() == 0) mask_w = Mask(wl, hl, true); // degenerate ROI: use all pixels

    moving_w = histogram_match(moving_w, fixed_w);
    const VectorField grad_f = gradient(fixed_w);

    const double k = params.k_factor > 0.0
                         ? params.k_factor
                         : 0.5 * (fixed_w.spacing_x * fixed_w.spacing_x +
                                  fixed_w.spacing_y * fixed_w.spacing_y);
    const double clamp_x = fixed_w.phys_width() / 2.0;
    const double clamp_y = fixed_w.phys_height() / 2.0;
    const bool symmetric = params.variant == DemonsVariant::Symmetric;

    DemonsResult result;
    DisplacementField field(wl, hl, fixed_w.spacing_x, fixed_w.spacing_y);

    for (int it = 1; it <= params.max_iterations; ++it) {
        const Image warped = warp(moving_w, field);
        VectorField grad_w;
        if (symmetric) grad_w = gradient(warped);

        double update_sum = 0.0;
        size_t update_n = 0;
        for (size_t i = 0; i < field.size(); ++i) {
            const double diff = warped.data[i] - fixed_w.data[i];
            double ux, uy;
            if (symmetric)
                symmetric_update(diff, grad_f.dx[i] + grad_w.dx[i],
                                 grad_f.dy[i] + grad_w.dy[i], k, ux, uy);
            else
                classic_update(diff, grad_f.dx[i], grad_f.dy[i], ux, uy);
            field.dx[i] += ux;
            field.dy[i] += uy;
            if (mask_w.data[i]) {
                update_sum += std::sqrt(ux * ux + uy * uy);
                ++update_n;
            }
        }

        field = gaussian_smooth(field, params.smoothing_sigma);
        for (size_t i = 0; i < field.size(); ++i) {
            if (std::abs(field.dx[i]) > clamp_x) {
                field.dx[i] = std::copysign(clamp_x, field.dx[i]);
                ++result.clamp_events;
            }
            if (std::abs(field.dy[i]) > clamp_y) {
                field.dy[i] = std::copysign(clamp_y, field.dy[i]);
                ++result.clamp_events;
            }
        }

        result.iterations = it;
        result.final_mean_update = update_sum / static_cast<double>(update_n);
        if (result.final_mean_update < params.convergence_tol) {
            result.converged = true;
            break;
        }
    }

    result.field = resample_field(field, fixed.width, fixed.height);
    return result;
}

} // namespace mamreg
