#pragma once

#include <string>
#include <utility>
#include <vector>

#include "mamreg/image.hpp"

namespace mamreg {

// Lattice of control-point displacement coefficients for a uniform cubic
// free-form deformation. Control point (i,j) sits at origin + (i*hx, j*hy);
// with nx control points and origin -hx the spline fully covers
// [0, (nx-3)*hx] with one knot span of margin on each side.
struct BSplineGrid {
    int nx = 0, ny = 0;           // control points per axis, >= 4
    double spacing_x = 0.0;       // knot span, mm
    double spacing_y = 0.0;
    double origin_x = 0.0;        // physical position of control point (0,0)
    double origin_y = 0.0;
    std::vector<double> dx, dy;   // coefficients, row-major, mm

    size_t size() const { return dx.size(); }
    double coverage_min_x() const { return origin_x + spacing_x; }
    double coverage_min_y() const { return origin_y + spacing_y; }
    double coverage_max_x() const { return origin_x + (nx - 2) * spacing_x; }
    double coverage_max_y() const { return origin_y + (ny - 2) * spacing_y; }
};

// Grid with the given control-point counts covering [0, extent] per axis.
BSplineGrid make_grid(double extent_x_mm, double extent_y_mm, int nx, int ny);

// Tensor-product cubic B-spline displacement at a physical point inside the
// covered extent (argument error outside).
std::pair<double, double> bspline_displacement(const BSplineGrid& grid, double x_mm, double y_mm);

// Dense evaluation at every pixel center of a width x height grid with the
// given pixel spacing.
DisplacementField grid_to_field(const BSplineGrid& grid, int width, int height,
                                double pixel_spacing_x, double pixel_spacing_y);

// Doubles the knot density; the new coefficients are a least-squares fit of
// the coarse displacement on a dense lattice, so the refined grid reproduces
// the coarse deformation (exactly, up to conditioning, since the coarse
// spline space is nested in the fine one).
BSplineGrid refine_grid(const BSplineGrid& grid);

// Least-squares fit of an arbitrary source grid's deformation onto new
// control-point counts over a new extent; used between pyramid levels.
BSplineGrid fit_grid(const BSplineGrid& source, double extent_x_mm, double extent_y_mm,
                     int nx, int ny);

void save_grid_json(const BSplineGrid& grid, const std::string& path);
BSplineGrid load_grid_json(const std::string& path);

struct BSplineParams {
    int levels = 3;
    // Control points per pyramid level, coarse to fine.
    std::vector<std::pair<int, int>> grid_schedule = {{6, 5}, {10, 8}, {18, 14}};
    int max_iterations_per_level = 100;
    double initial_step = 2.0; // mm
    double min_step = 0.01;    // mm
    int mi_bins = 64;
    int working_width = 219;
    int working_height = 136;
};

struct BSplineLevelInfo {
    int width = 0, height = 0;
    int nx = 0, ny = 0;
    int iterations = 0;
    double initial_mi = 0.0;
    double final_mi = 0.0;
    std::vector<double> accepted_mi; // objective after each accepted step
};

struct BSplineResult {
    BSplineGrid grid; // covers the fixed image's physical extent
    std::vector<BSplineLevelInfo> levels;
    int iterations_total = 0;
    double final_mi = 0.0;
};

// Multiresolution registration maximizing mutual information over the fixed
// mask. Per level: finite-difference MI gradient over the coefficients
// (perturbation = current_step/10), normalized gradient-ascent proposals,
// step halving on non-improvement, stop at the iteration cap or once the
// step falls below min_step; the solution is refitted onto the next level's
// control grid. The caller turns the returned grid into a full-resolution
// field with grid_to_field and warps the original moving image.
BSplineResult register_bspline(const Image& fixed, const Image& moving,
                               const Mask& fixed_mask, const BSplineParams& params);

} // namespace mamreg
