#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

namespace mamreg {

inline constexpr double kDefaultSpacingMm = 0.05;

// 2D scalar image, row-major, intensities normalized to [0,1].
//
// Grid convention used throughout: pixel centers sit at (i*spacing_x,
// j*spacing_y) in physical millimetres, i.e. the grid is corner-anchored
// with pixel (0,0) at the physical origin.
struct Image {
    int width = 0;
    int height = 0;
    double spacing_x = kDefaultSpacingMm; // mm per pixel
    double spacing_y = kDefaultSpacingMm;
    std::vector<double> data;

    Image() = default;
    Image(int w, int h, double fill = 0.0,
          double sx = kDefaultSpacingMm, double sy = kDefaultSpacingMm)
        : width(w), height(h), spacing_x(sx), spacing_y(sy),
          data(static_cast<size_t>(w) * static_cast<size_t>(h), fill) {}

    size_t size() const { return data.size(); }
    double& at(int x, int y) { return data[static_cast<size_t>(y) * width + x]; }
    double at(int x, int y) const { return data[static_cast<size_t>(y) * width + x]; }

    // Physical span of the pixel area (width*spacing) and of the pixel centers.
    double phys_width() const { return width * spacing_x; }
    double phys_height() const { return height * spacing_y; }
    double domain_x() const { return (width - 1) * spacing_x; }
    double domain_y() const { return (height - 1) * spacing_y; }

    bool same_dims(const Image& o) const { return width == o.width && height == o.height; }
};

// Binary region-of-interest mask aligned to an Image.
struct Mask {
    int width = 0;
    int height = 0;
    std::vector<uint8_t> data; // 0 or 1

    Mask() = default;
    Mask(int w, int h, bool fill = false)
        : width(w), height(h),
          data(static_cast<size_t>(w) * static_cast<size_t>(h), fill ? 1 : 0) {}

    size_t size() const { return data.size(); }
    uint8_t& at(int x, int y) { return data[static_cast<size_t>(y) * width + x]; }
    uint8_t at(int x, int y) const { return data[static_cast<size_t>(y) * width + x]; }

    size_t count() const {
        size_t n = 0;
        for (uint8_t v : data) n += (v != 0);
        return n;
    }
    bool same_dims(const Mask& o) const { return width == o.width && height == o.height; }
};

// Per-pixel 2-vector field stored as separate planes. Vectors are kept in
// physical millimetres so resampling the field to another grid size never
// rescales magnitudes.
struct DisplacementField {
    int width = 0;
    int height = 0;
    double spacing_x = kDefaultSpacingMm;
    double spacing_y = kDefaultSpacingMm;
    std::vector<double> dx, dy;

    DisplacementField() = default;
    DisplacementField(int w, int h,
                      double sx = kDefaultSpacingMm, double sy = kDefaultSpacingMm)
        : width(w), height(h), spacing_x(sx), spacing_y(sy),
          dx(static_cast<size_t>(w) * static_cast<size_t>(h), 0.0),
          dy(static_cast<size_t>(w) * static_cast<size_t>(h), 0.0) {}

    size_t size() const { return dx.size(); }
    double phys_width() const { return width * spacing_x; }
    double phys_height() const { return height * spacing_y; }
    bool same_dims(const Image& o) const { return width == o.width && height == o.height; }
};

// Same layout; holds per-pixel intensity gradients in intensity per mm.
using VectorField = DisplacementField;

} // namespace mamreg
