#include "mamreg/image_ops.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace mamreg {

namespace {

// a + t*(b-a): exact for a == b, exact at t == 0.
inline double lerp_val(double a, double b, double t) { return a + t * (b - a); }

inline double bilinear_at(const std::vector<double>& data, int w, int h, double u, double v) {
    int i0, j0;
    double fu, fv;
    if (w == 1) {
        i0 = 0;
        fu = 0.0;
    } else {
        i0 = std::min(static_cast<int>(std::floor(u)), w - 2);
        i0 = std::max(i0, 0);
        fu = u - i0;
    }
    if (h == 1) {
        j0 = 0;
        fv = 0.0;
    } else {
        j0 = std::min(static_cast<int>(std::floor(v)), h - 2);
        j0 = std::max(j0, 0);
        fv = v - j0;
    }
    const size_t idx = static_cast<size_t>(j0) * w + i0;
    const double p00 = data[idx];
    const double p10 = (w == 1) ? p00 : data[idx + 1];
    const double p01 = (h == 1) ? p00 : data[idx + w];
    const double p11 = (w == 1) ? p01 : ((h == 1) ? p10 : data[idx + w + 1]);
    return lerp_val(lerp_val(p00, p10, fu), lerp_val(p01, p11, fu), fv);
}

// Index-space sample with the dark-background rule applied in index units.
inline double bilinear_bg(const std::vector<double>& data, int w, int h, double u, double v) {
    if (u < 0.0 || v < 0.0 || u > w - 1 || v > h - 1) return 0.0;
    return bilinear_at(data, w, h, u, v);
}

// Endpoint-aligned index mapping for resampling; degenerate single-pixel
// outputs take the source center.
inline double map_index(int i, int n_out, int n_in) {
    if (n_out == 1) return (n_in - 1) / 2.0;
    return static_cast<double>(i) * (n_in - 1) / (n_out - 1);
}

} // namespace

double sample_bilinear(const Image& image, double x_mm, double y_mm) {
    // Points within 1e-9 mm of the domain are treated as on it; this guards
    // against float round-off in coordinate chains, not against real
    // out-of-domain samples, which return dark background.
    constexpr double eps = 1e-9;
    const double dx = image.domain_x(), dy = image.domain_y();
    if (x_mm < -eps || y_mm < -eps || x_mm > dx + eps || y_mm > dy + eps)
        return 0.0;
    x_mm = std::clamp(x_mm, 0.0, dx);
    y_mm = std::clamp(y_mm, 0.0, dy);
    return bilinear_at(image.data, image.width, image.height,
                       x_mm / image.spacing_x, y_mm / image.spacing_y);
}

double sample_index_clamped(const Image& image, double u, double v) {
    u = std::clamp(u, 0.0, static_cast<double>(image.width - 1));
    v = std::clamp(v, 0.0, static_cast<double>(image.height - 1));
    return bilinear_at(image.data, image.width, image.height, u, v);
}

Image resample(const Image& image, int new_width, int new_height) {
    if (new_width < 1 || new_height < 1)
        throw std::invalid_argument("resample: output dimensions must be >= 1");
    Image out(new_width, new_height, 0.0,
              image.spacing_x * image.width / new_width,
              image.spacing_y * image.height / new_height);
    for (int j = 0; j < new_height; ++j) {
        const double v = map_index(j, new_height, image.height);
        for (int i = 0; i < new_width; ++i) {
            const double u = map_index(i, new_width, image.width);
            out.at(i, j) = bilinear_at(image.data, image.width, image.height, u, v);
        }
    }
    return out;
}

DisplacementField resample_field(const DisplacementField& field, int new_width, int new_height) {
    if (new_width < 1 || new_height < 1)
        throw std::invalid_argument("resample_field: output dimensions must be >= 1");
    DisplacementField out(new_width, new_height,
                          field.spacing_x * field.width / new_width,
                          field.spacing_y * field.height / new_height);
    for (int j = 0; j < new_height; ++j) {
        const double v = map_index(j, new_height, field.height);
        for (int i = 0; i < new_width; ++i) {
            const double u = map_index(i, new_width, field.width);
            const size_t o = static_cast<size_t>(j) * new_width + i;
            out.dx[o] = bilinear_at(field.dx, field.width, field.height, u, v);
            out.dy[o] = bilinear_at(field.dy, field.width, field.height, u, v);
        }
    }
    return out;
}

Mask resample_mask(const Mask& mask, int new_width, int new_height) {
    if (new_width < 1 || new_height < 1)
        throw std::invalid_argument("resample_mask: output dimensions must be >= 1");
    std::vector<double> tmp(mask.size());
    for (size_t i = 0; i < mask.size(); ++i) tmp[i] = mask.data[i] ? 1.0 : 0.0;
    Mask out(new_width, new_height);
    for (int j = 0; j < new_height; ++j) {
        const double v = map_index(j, new_height, mask.height);
        for (int i = 0; i < new_width; ++i) {
            const double u = map_index(i, new_width, mask.width);
            out.at(i, j) = bilinear_at(tmp, mask.width, mask.height, u, v) > 0.5 ? 1 : 0;
        }
    }
    return out;
}

VectorField gradient(const Image& image) {
    if (image.width < 2 || image.height < 2)
        throw std::invalid_argument("gradient: image must be at least 2x2");
    VectorField g(image.width, image.height, image.spacing_x, image.spacing_y);
    const int w = image.width, h = image.height;
    for (int j = 0; j < h; ++j) {
        for (int i = 0; i < w; ++i) {
            const size_t o = static_cast<size_t>(j) * w + i;
            double gx;
            if (i == 0)
                gx = (image.at(1, j) - image.at(0, j)) / image.spacing_x;
            else if (i == w - 1)
                gx = (image.at(w - 1, j) - image.at(w - 2, j)) / image.spacing_x;
            else
                gx = (image.at(i + 1, j) - image.at(i - 1, j)) / (2.0 * image.spacing_x);
            double gy;
            if (j == 0)
                gy = (image.at(i, 1) - image.at(i, 0)) / image.spacing_y;
            else if (j == h - 1)
                gy = (image.at(i, h - 1) - image.at(i, h - 2)) / image.spacing_y;
            else
                gy = (image.at(i, j + 1) - image.at(i, j - 1)) / (2.0 * image.spacing_y);
            g.dx[o] = gx;
            g.dy[o] = gy;
        }
    }
    return g;
}

Image warp(const Image& image, const DisplacementField& field) {
    if (!field.same_dims(image))
        throw std::invalid_argument("warp: field dimensions must match the image");
    Image out(image.width, image.height, 0.0, image.spacing_x, image.spacing_y);
    for (int j = 0; j < image.height; ++j) {
        for (int i = 0; i < image.width; ++i) {
            const size_t o = static_cast<size_t>(j) * image.width + i;
            // Index-space arithmetic keeps the zero-field warp exact.
            const double u = i + field.dx[o] / image.spacing_x;
            const double v = j + field.dy[o] / image.spacing_y;
            out.data[o] = bilinear_bg(image.data, image.width, image.height, u, v);
        }
    }
    return out;
}

namespace {

std::vector<double> gaussian_kernel(double sigma) {
    const int radius = static_cast<int>(std::ceil(3.0 * sigma));
    std::vector<double> k(2 * radius + 1);
    double sum = 0.0;
    for (int i = -radius; i <= radius; ++i) {
        k[i + radius] = std::exp(-(static_cast<double>(i) * i) / (2.0 * sigma * sigma));
        sum += k[i + radius];
    }
    for (double& v : k) v /= sum;
    return k;
}

void convolve_sep(std::vector<double>& plane, int w, int h, const std::vector<double>& kernel) {
    const int radius = (static_cast<int>(kernel.size()) - 1) / 2;
    std::vector<double> tmp(plane.size());
    // horizontal
    for (int j = 0; j < h; ++j) {
        const double* row = &plane[static_cast<size_t>(j) * w];
        double* dst = &tmp[static_cast<size_t>(j) * w];
        for (int i = 0; i < w; ++i) {
            double acc = 0.0, norm = 0.0;
            const int lo = std::max(-radius, -i), hi = std::min(radius, w - 1 - i);
            for (int k = lo; k <= hi; ++k) {
                acc += kernel[k + radius] * row[i + k];
                norm += kernel[k + radius];
            }
            dst[i] = acc / norm;
        }
    }
    // vertical
    for (int i = 0; i < w; ++i) {
        for (int j = 0; j < h; ++j) {
            double acc = 0.0, norm = 0.0;
            const int lo = std::max(-radius, -j), hi = std::min(radius, h - 1 - j);
            for (int k = lo; k <= hi; ++k) {
                acc += kernel[k + radius] * tmp[static_cast<size_t>(j + k) * w + i];
                norm += kernel[k + radius];
            }
            plane[static_cast<size_t>(j) * w + i] = acc / norm;
        }
    }
}

} // namespace

DisplacementField gaussian_smooth(const DisplacementField& field, double sigma_px) {
    if (sigma_px < 0.0)
        throw std::invalid_argument("gaussian_smooth: sigma must be >= 0");
    DisplacementField out = field;
    if (sigma_px == 0.0) return out;
    const std::vector<double> kernel = gaussian_kernel(sigma_px);
    convolve_sep(out.dx, out.width, out.height, kernel);
    convolve_sep(out.dy, out.width, out.height, kernel);
    return out;
}

namespace {

struct ForegroundStats {
    std::vector<double> values; // pixels strictly above the image mean
    double lo = 0.0, hi = 0.0;
    bool usable = false;
};

ForegroundStats foreground_of(const Image& img) {
    ForegroundStats fg;
    double mean = 0.0;
    for (double v : img.data) mean += v;
    mean /= static_cast<double>(img.size());
    for (double v : img.data)
        if (v > mean) fg.values.push_back(v);
    if (fg.values.empty()) return fg;
    auto [mn, mx] = std::minmax_element(fg.values.begin(), fg.values.end());
    fg.lo = *mn;
    fg.hi = *mx;
    fg.usable = (fg.hi - fg.lo) > 1e-12;
    return fg;
}

// Quantile values at levels k/(landmarks+1), k=1..landmarks, read off a
// cumulative histogram with linear interpolation inside the hit bin.
std::vector<double> histogram_quantiles(const ForegroundStats& fg, int levels, int landmarks) {
    const double width = (fg.hi - fg.lo) / levels;
    std::vector<double> counts(levels, 0.0);
    for (double v : fg.values) {
        int b = static_cast<int>((v - fg.lo) / width);
        b = std::clamp(b, 0, levels - 1);
        counts[b] += 1.0;
    }
    const double n = static_cast<double>(fg.values.size());
    std::vector<double> q(landmarks);
    for (int k = 1; k <= landmarks; ++k) {
        const double target = n * k / (landmarks + 1.0);
        double cum = 0.0;
        double value = fg.hi;
        for (int b = 0; b < levels; ++b) {
            if (cum + counts[b] >= target) {
                const double frac = (counts[b] > 0.0) ? (target - cum) / counts[b] : 0.0;
                value = fg.lo + (b + frac) * width;
                break;
            }
            cum += counts[b];
        }
        q[k - 1] = value;
    }
    return q;
}

} // namespace

Image histogram_match(const Image& moving, const Image& reference, int levels, int landmarks) {
    if (levels < 2)
        throw std::invalid_argument("histogram_match: levels must be >= 2");
    if (landmarks < 1 || landmarks > levels)
        throw std::invalid_argument("histogram_match: landmarks must be in [1, levels]");

    const ForegroundStats fg_m = foreground_of(moving);
    const ForegroundStats fg_r = foreground_of(reference);
    if (!fg_m.usable || !fg_r.usable) return moving; // no mapping defined

    std::vector<double> qm = histogram_quantiles(fg_m, levels, landmarks);
    std::vector<double> qr = histogram_quantiles(fg_r, levels, landmarks);

    // Anchor with the foreground min/max so the transfer covers the range.
    std::vector<double> xs, ys;
    xs.push_back(fg_m.lo);
    ys.push_back(fg_r.lo);
    for (int k = 0; k < landmarks; ++k) {
        if (qm[k] > xs.back() + 1e-15) {
            xs.push_back(qm[k]);
            ys.push_back(qr[k]);
        }
    }
    if (fg_m.hi > xs.back() + 1e-15) {
        xs.push_back(fg_m.hi);
        ys.push_back(fg_r.hi);
    }
    if (xs.size() < 2) return moving;

    auto transfer = [&](double v) {
        size_t seg = 0;
        if (v >= xs.back())
            seg = xs.size() - 2;
        else {
            while (seg + 2 < xs.size() && v >= xs[seg + 1]) ++seg;
        }
        const double t = (v - xs[seg]) / (xs[seg + 1] - xs[seg]);
        return std::clamp(ys[seg] + t * (ys[seg + 1] - ys[seg]), 0.0, 1.0);
    };

    Image out = moving;
    for (double& v : out.data) v = transfer(v);
    return out;
}

Image flip_horizontal(const Image& image) {
    Image out = image;
    for (int j = 0; j < image.height; ++j)
        for (int i = 0; i < image.width; ++i)
            out.at(i, j) = image.at(image.width - 1 - i, j);
    return out;
}

Mask flip_horizontal(const Mask& mask) {
    Mask out = mask;
    for (int j = 0; j < mask.height; ++j)
        for (int i = 0; i < mask.width; ++i)
            out.at(i, j) = mask.at(mask.width - 1 - i, j);
    return out;
}

DisplacementField flip_horizontal(const DisplacementField& field) {
    DisplacementField out = field;
    for (int j = 0; j < field.height; ++j) {
        for (int i = 0; i < field.width; ++i) {
            const size_t o = static_cast<size_t>(j) * field.width + i;
            const size_t s = static_cast<size_t>(j) * field.width + (field.width - 1 - i);
            out.dx[o] = -field.dx[s]; // x-components mirror with a sign flip
            out.dy[o] = field.dy[s];
        }
    }
    return out;
}

} // namespace mamreg
