#include "mamreg/bspline.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "mamreg/errors.hpp"
#include "mamreg/image_ops.hpp"

using json = nlohmann::ordered_json;

namespace mamreg {

namespace {

inline void cubic_weights(double u, double w[4]) {
    const double u2 = u * u;
    const double u3 = u2 * u;
    w[0] = (1.0 - 3.0 * u + 3.0 * u2 - u3) / 6.0;
    w[1] = (4.0 - 6.0 * u2 + 3.0 * u3) / 6.0;
    w[2] = (1.0 + 3.0 * u + 3.0 * u2 - 3.0 * u3) / 6.0;
    w[3] = u3 / 6.0;
}

struct GridCell {
    int ix = 0, iy = 0; // cell indices, in [1, n-3]
    double wx[4], wy[4];
};

// Span-space coordinate; coverage is s in [1, n-2] per axis.
inline bool locate(const BSplineGrid& g, double x, double y, bool clamp, GridCell& cell) {
    double sx = (x - g.origin_x) / g.spacing_x;
    double sy = (y - g.origin_y) / g.spacing_y;
    constexpr double tol = 1e-9;
    if (!clamp && (sx < 1.0 - tol || sx > g.nx - 2 + tol || sy < 1.0 - tol || sy > g.ny - 2 + tol))
        return false;
    sx = std::clamp(sx, 1.0, static_cast<double>(g.nx - 2));
    sy = std::clamp(sy, 1.0, static_cast<double>(g.ny - 2));
    cell.ix = std::min(static_cast<int>(sx), g.nx - 3);
    cell.iy = std::min(static_cast<int>(sy), g.ny - 3);
    cubic_weights(sx - cell.ix, cell.wx);
    cubic_weights(sy - cell.iy, cell.wy);
    return true;
}

inline std::pair<double, double> eval_cell(const BSplineGrid& g, const GridCell& cell) {
    double ax = 0.0, ay = 0.0;
    for (int b = 0; b < 4; ++b) {
        const int row = cell.iy - 1 + b;
        const size_t base = static_cast<size_t>(row) * g.nx + (cell.ix - 1);
        double rx = 0.0, ry = 0.0;
        for (int a = 0; a < 4; ++a) {
            rx += cell.wx[a] * g.dx[base + a];
            ry += cell.wx[a] * g.dy[base + a];
        }
        ax += cell.wy[b] * rx;
        ay += cell.wy[b] * ry;
    }
    return {ax, ay};
}

void check_grid(const BSplineGrid& g, const char* what) {
    if (g.nx < 4 || g.ny < 4)
        throw std::invalid_argument(std::string(what) + ": grid needs at least 4x4 control points");
    if (g.spacing_x <= 0.0 || g.spacing_y <= 0.0)
        throw std::invalid_argument(std::string(what) + ": knot spacing must be > 0");
    if (g.dx.size() != static_cast<size_t>(g.nx) * g.ny || g.dy.size() != g.dx.size())
        throw std::invalid_argument(std::string(what) + ": coefficient count mismatch");
}

} // namespace

BSplineGrid make_grid(double extent_x_mm, double extent_y_mm, int nx, int ny) {
    if (nx < 4 || ny < 4)
        throw std::invalid_argument("make_grid: need at least 4x4 control points");
    if (extent_x_mm <= 0.0 || extent_y_mm <= 0.0)
        throw std::invalid_argument("make_grid: extent must be > 0");
    BSplineGrid g;
    g.nx = nx;
    g.ny = ny;
    g.spacing_x = extent_x_mm / (nx - 3);
    g.spacing_y = extent_y_mm / (ny - 3);
    g.origin_x = -g.spacing_x;
    g.origin_y = -g.spacing_y;
    g.dx.assign(static_cast<size_t>(nx) * ny, 0.0);
    g.dy.assign(static_cast<size_t>(nx) * ny, 0.0);
    return g;
}

std::pair<double, double> bspline_displacement(const BSplineGrid& grid, double x_mm, double y_mm) {
    check_grid(grid, "bspline_displacement");
    GridCell cell;
    if (!locate(grid, x_mm, y_mm, false, cell))
        throw std::invalid_argument("bspline_displacement: point outside covered extent");
    return eval_cell(grid, cell);
}

DisplacementField grid_to_field(const BSplineGrid& grid, int width, int height,
                                double pixel_spacing_x, double pixel_spacing_y) {
    check_grid(grid, "grid_to_field");
    if (width < 1 || height < 1 || pixel_spacing_x <= 0.0 || pixel_spacing_y <= 0.0)
        throw std::invalid_argument("grid_to_field: bad output grid");
    const double tol_x = 1e-6 * grid.spacing_x, tol_y = 1e-6 * grid.spacing_y;
    if (0.0 < grid.coverage_min_x() - tol_x ||
        (width - 1) * pixel_spacing_x > grid.coverage_max_x() + tol_x ||
        0.0 < grid.coverage_min_y() - tol_y ||
        (height - 1) * pixel_spacing_y > grid.coverage_max_y() + tol_y)
        throw std::invalid_argument("grid_to_field: image extent outside grid coverage");
    DisplacementField field(width, height, pixel_spacing_x, pixel_spacing_y);
    GridCell cell;
    for (int j = 0; j < height; ++j) {
        for (int i = 0; i < width; ++i) {
            locate(grid, i * pixel_spacing_x, j * pixel_spacing_y, true, cell);
            const auto [vx, vy] = eval_cell(grid, cell);
            const size_t o = static_cast<size_t>(j) * width + i;
            field.dx[o] = vx;
            field.dy[o] = vy;
        }
    }
    return field;
}

namespace {

// Least-squares fit of an arbitrary displacement function onto a target
// grid, sampled on a dense uniform lattice over the covered extent.
template <typename EvalFn>
BSplineGrid fit_grid_lsq(double extent_x, double extent_y, int nx, int ny, EvalFn&& eval) {
    BSplineGrid out = make_grid(extent_x, extent_y, nx, ny);
    const int n = nx * ny;
    const int samples_x = 4 * (nx - 3) + 1;
    const int samples_y = 4 * (ny - 3) + 1;

    Eigen::MatrixXd ata = Eigen::MatrixXd::Zero(n, n);
    Eigen::VectorXd atb_x = Eigen::VectorXd::Zero(n);
    Eigen::VectorXd atb_y = Eigen::VectorXd::Zero(n);

    GridCell cell;
    int idx16[16];
    double w16[16];
    for (int sj = 0; sj < samples_y; ++sj) {
        const double y = extent_y * sj / (samples_y - 1);
        for (int si = 0; si < samples_x; ++si) {
            const double x = extent_x * si / (samples_x - 1);
            locate(out, x, y, true, cell);
            int k = 0;
            for (int b = 0; b < 4; ++b)
                for (int a = 0; a < 4; ++a, ++k) {
                    idx16[k] = (cell.iy - 1 + b) * nx + (cell.ix - 1 + a);
                    w16[k] = cell.wx[a] * cell.wy[b];
                }
            const auto [vx, vy] = eval(x, y);
            for (int p = 0; p < 16; ++p) {
                atb_x[idx16[p]] += w16[p] * vx;
                atb_y[idx16[p]] += w16[p] * vy;
                for (int q = 0; q < 16; ++q)
                    ata(idx16[p], idx16[q]) += w16[p] * w16[q];
            }
        }
    }

    const Eigen::LDLT<Eigen::MatrixXd> solver(ata);
    const Eigen::VectorXd cx = solver.solve(atb_x);
    const Eigen::VectorXd cy = solver.solve(atb_y);
    for (int i = 0; i < n; ++i) {
        out.dx[static_cast<size_t>(i)] = cx[i];
        out.dy[static_cast<size_t>(i)] = cy[i];
    }
    return out;
}

} // namespace

BSplineGrid fit_grid(const BSplineGrid& source, double extent_x_mm, double extent_y_mm,
                     int nx, int ny) {
    check_grid(source, "fit_grid");
    return fit_grid_lsq(extent_x_mm, extent_y_mm, nx, ny, [&](double x, double y) {
        GridCell cell;
        locate(source, x, y, true, cell);
        return eval_cell(source, cell);
    });
}

BSplineGrid refine_grid(const BSplineGrid& grid) {
    check_grid(grid, "refine_grid");
    const double extent_x = (grid.nx - 3) * grid.spacing_x;
    const double extent_y = (grid.ny - 3) * grid.spacing_y;
    return fit_grid(grid, extent_x, extent_y, 2 * grid.nx - 3, 2 * grid.ny - 3);
}

void save_grid_json(const BSplineGrid& grid, const std::string& path) {
    json j;
    j["nx"] = grid.nx;
    j["ny"] = grid.ny;
    j["grid_spacing"] = {grid.spacing_x, grid.spacing_y};
    j["origin"] = {grid.origin_x, grid.origin_y};
    json coeffs = json::array();
    for (size_t i = 0; i < grid.size(); ++i) {
        coeffs.push_back(grid.dx[i]);
        coeffs.push_back(grid.dy[i]);
    }
    j["coefficients"] = std::move(coeffs);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("grid: cannot write '" + path + "'");
    out << j.dump(2) << "\n";
}

BSplineGrid load_grid_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("grid: cannot open '" + path + "'");
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw FormatError("grid: " + std::string(e.what()));
    }
    BSplineGrid g;
    try {
        g.nx = j.at("nx").get<int>();
        g.ny = j.at("ny").get<int>();
        g.spacing_x = j.at("grid_spacing").at(0).get<double>();
        g.spacing_y = j.at("grid_spacing").at(1).get<double>();
        g.origin_x = j.at("origin").at(0).get<double>();
        g.origin_y = j.at("origin").at(1).get<double>();
        const json& coeffs = j.at("coefficients");
        if (coeffs.size() != static_cast<size_t>(g.nx) * g.ny * 2)
            throw FormatError("grid: coefficient count mismatch in '" + path + "'");
        g.dx.resize(coeffs.size() / 2);
        g.dy.resize(coeffs.size() / 2);
        for (size_t i = 0; i < g.dx.size(); ++i) {
            g.dx[i] = coeffs.at(2 * i).get<double>();
            g.dy[i] = coeffs.at(2 * i + 1).get<double>();
        }
    } catch (const json::exception& e) {
        throw FormatError("grid: " + std::string(e.what()));
    }
    check_grid(g, "load_grid_json");
    return g;
}

// ---------------------------------------------------------------------------
// MI-driven optimization

namespace {

inline int bin_of(double v, int bins) {
    const int b = static_cast<int>(v * bins);
    return std::clamp(b, 0, bins - 1);
}

// Histogram state with O(1) entropy updates: keeps S = sum c*log2(c) per
// distribution, so H = log2(n) - S/n.
struct MiState {
    const Image* fixed = nullptr;
    const Image* moving = nullptr;
    const Mask* mask = nullptr;
    int w = 0, h = 0, bins = 0;

    // static per-pixel data
    std::vector<int> cell_ix, cell_iy;
    std::vector<double> wx4, wy4;
    std::vector<int> bin_f;
    std::vector<std::vector<int>> cell_pixels; // (iy-1)*spans_x + (ix-1)
    int spans_x = 0, spans_y = 0;
    std::vector<double> xlog2; // c*log2(c) for c in [0, n_mask]

    // dynamic state, rebuilt from the grid coefficients
    std::vector<double> disp_x, disp_y;
    std::vector<int> bin_m;
    std::vector<int64_t> counts, marg_f, marg_m;
    int64_t n = 0;
    double sj = 0.0, sf = 0.0, sm = 0.0;
    double mi = 0.0;

    double mi_from_sums() const {
        const double dn = static_cast<double>(n);
        const double lg = std::log2(dn);
        const double hf = lg - sf / dn;
        const double hm = lg - sm / dn;
        const double hj = lg - sj / dn;
        return hf + hm - hj;
    }

    // Background-0 bilinear sample of the moving image in index space.
    double sample_moving(int i, int j, double dx_mm, double dy_mm) const {
        const double u = i + dx_mm / moving->spacing_x;
        const double v = j + dy_mm / moving->spacing_y;
        if (u < 0.0 || v < 0.0 || u > w - 1 || v > h - 1) return 0.0;
        const int i0 = std::min(static_cast<int>(u), w - 2);
        const int j0 = std::min(static_cast<int>(v), h - 2);
        const double fu = u - i0, fv = v - j0;
        const size_t o = static_cast<size_t>(j0) * w + i0;
        const double* d = moving->data.data();
        const double top = d[o] + fu * (d[o + 1] - d[o]);
        const double bot = d[o + w] + fu * (d[o + w + 1] - d[o + w]);
        return top + fv * (bot - top);
    }
};

void init_state(MiState& st, const Image& fixed, const Image& moving, const Mask& mask,
                const BSplineGrid& grid, int bins) {
    st.fixed = &fixed;
    st.moving = &moving;
    st.mask = &mask;
    st.w = fixed.width;
    st.h = fixed.height;
    st.bins = bins;
    st.spans_x = grid.nx - 3;
    st.spans_y = grid.ny - 3;

    const size_t npix = fixed.size();
    st.cell_ix.resize(npix);
    st.cell_iy.resize(npix);
    st.wx4.resize(npix * 4);
    st.wy4.resize(npix * 4);
    st.bin_f.resize(npix);
    st.cell_pixels.assign(static_cast<size_t>(st.spans_x) * st.spans_y, {});
    st.disp_x.assign(npix, 0.0);
    st.disp_y.assign(npix, 0.0);
    st.bin_m.assign(npix, -1);

    GridCell cell;
    for (int j = 0; j < st.h; ++j) {
        for (int i = 0; i < st.w; ++i) {
            const size_t p = static_cast<size_t>(j) * st.w + i;
            locate(grid, i * fixed.spacing_x, j * fixed.spacing_y, true, cell);
            st.cell_ix[p] = cell.ix;
            st.cell_iy[p] = cell.iy;
            for (int a = 0; a < 4; ++a) {
                st.wx4[p * 4 + a] = cell.wx[a];
                st.wy4[p * 4 + a] = cell.wy[a];
            }
            st.bin_f[p] = bin_of(fixed.data[p], bins);
            if (mask.data[p])
                st.cell_pixels[static_cast<size_t>(cell.iy - 1) * st.spans_x + (cell.ix - 1)]
                    .push_back(static_cast<int>(p));
        }
    }

    const size_t n_mask = mask.count();
    st.xlog2.resize(n_mask + 1);
    st.xlog2[0] = 0.0;
    for (size_t c = 1; c <= n_mask; ++c)
        st.xlog2[c] = static_cast<double>(c) * std::log2(static_cast<double>(c));
}

// Recomputes displacements, warped bins, histogram and entropy sums from the
// grid coefficients.
void rebuild(MiState& st, const BSplineGrid& grid) {
    st.counts.assign(static_cast<size_t>(st.bins) * st.bins, 0);
    st.marg_f.assign(st.bins, 0);
    st.marg_m.assign(st.bins, 0);
    st.n = 0;
    for (int j = 0; j < st.h; ++j) {
        for (int i = 0; i < st.w; ++i) {
            const size_t p = static_cast<size_t>(j) * st.w + i;
            double ax = 0.0, ay = 0.0;
            const int ix = st.cell_ix[p], iy = st.cell_iy[p];
            for (int b = 0; b < 4; ++b) {
                const size_t base = static_cast<size_t>(iy - 1 + b) * grid.nx + (ix - 1);
                double rx = 0.0, ry = 0.0;
                for (int a = 0; a < 4; ++a) {
                    rx += st.wx4[p * 4 + a] * grid.dx[base + a];
                    ry += st.wx4[p * 4 + a] * grid.dy[base + a];
                }
                ax += st.wy4[p * 4 + b] * rx;
                ay += st.wy4[p * 4 + b] * ry;
            }
            st.disp_x[p] = ax;
            st.disp_y[p] = ay;
            if (!st.mask->data[p]) continue;
            const int bm = bin_of(st.sample_moving(i, j, ax, ay), st.bins);
            st.bin_m[p] = bm;
            ++st.counts[static_cast<size_t>(st.bin_f[p]) * st.bins + bm];
            ++st.marg_f[st.bin_f[p]];
            ++st.marg_m[bm];
            ++st.n;
        }
    }
    st.sj = st.sf = st.sm = 0.0;
    for (int64_t c : st.counts) st.sj += st.xlog2[static_cast<size_t>(c)];
    for (int64_t c : st.marg_f) st.sf += st.xlog2[static_cast<size_t>(c)];
    for (int64_t c : st.marg_m) st.sm += st.xlog2[static_cast<size_t>(c)];
    st.mi = st.mi_from_sums();
}

// MI after perturbing one coefficient by delta, evaluated incrementally over
// the control point's support and rolled back before returning.
double perturbed_mi(MiState& st, int cp_x, int cp_y, bool x_component, double delta,
                    std::vector<std::pair<int, int64_t>>& journal_counts,
                    std::vector<std::pair<int, int64_t>>& journal_marg) {
    const double sj0 = st.sj, sm0 = st.sm;
    journal_counts.clear();
    journal_marg.clear();

    const int cx0 = std::max(cp_x - 2, 1), cx1 = std::min(cp_x + 1, st.spans_x);
    const int cy0 = std::max(cp_y - 2, 1), cy1 = std::min(cp_y + 1, st.spans_y);
    for (int cy = cy0; cy <= cy1; ++cy) {
        const int wy_pos = cp_y - cy + 1;
        for (int cx = cx0; cx <= cx1; ++cx) {
            const int wx_pos = cp_x - cx + 1;
            const auto& pixels =
                st.cell_pixels[static_cast<size_t>(cy - 1) * st.spans_x + (cx - 1)];
            for (int p : pixels) {
                const double wgt = st.wx4[static_cast<size_t>(p) * 4 + wx_pos] *
                                   st.wy4[static_cast<size_t>(p) * 4 + wy_pos];
                const double ndx = st.disp_x[p] + (x_component ? delta * wgt : 0.0);
                const double ndy = st.disp_y[p] + (x_component ? 0.0 : delta * wgt);
                const int i = p % st.w, j = p / st.w;
                const int nb = bin_of(st.sample_moving(i, j, ndx, ndy), st.bins);
                const int ob = st.bin_m[p];
                if (nb == ob) continue;
                const int bf = st.bin_f[p];
                const int io = bf * st.bins + ob;
                const int in = bf * st.bins + nb;
                journal_counts.emplace_back(io, st.counts[io]);
                st.sj -= st.xlog2[static_cast<size_t>(st.counts[io])];
                --st.counts[io];
                st.sj += st.xlog2[static_cast<size_t>(st.counts[io])];
                journal_counts.emplace_back(in, st.counts[in]);
                st.sj -= st.xlog2[static_cast<size_t>(st.counts[in])];
                ++st.counts[in];
                st.sj += st.xlog2[static_cast<size_t>(st.counts[in])];
                journal_marg.emplace_back(ob, st.marg_m[ob]);
                st.sm -= st.xlog2[static_cast<size_t>(st.marg_m[ob])];
                --st.marg_m[ob];
                st.sm += st.xlog2[static_cast<size_t>(st.marg_m[ob])];
                journal_marg.emplace_back(nb, st.marg_m[nb]);
                st.sm -= st.xlog2[static_cast<size_t>(st.marg_m[nb])];
                ++st.marg_m[nb];
                st.sm += st.xlog2[static_cast<size_t>(st.marg_m[nb])];
            }
        }
    }
    const double mi = st.mi_from_sums();
    for (auto it = journal_counts.rbegin(); it != journal_counts.rend(); ++it)
        st.counts[it->first] = it->second;
    for (auto it = journal_marg.rbegin(); it != journal_marg.rend(); ++it)
        st.marg_m[it->first] = it->second;
    st.sj = sj0;
    st.sm = sm0;
    return mi;
}

} // namespace

BSplineResult register_bspline(const Image& fixed, const Image& moving,
                               const Mask& fixed_mask, const BSplineParams& params) {
    if (params.levels < 1)
        throw std::invalid_argument("register_bspline: levels must be >= 1");
    if (params.grid_schedule.size() != static_cast<size_t>(params.levels))
        throw std::invalid_argument("register_bspline: grid schedule must list one grid per level");
    for (size_t l = 0; l < params.grid_schedule.size(); ++l) {
        const auto [gx, gy] = params.grid_schedule[l];
        if (gx < 4 || gy < 4)
            throw std::invalid_argument("register_bspline: grids need at least 4x4 control points");
        if (l > 0 && (gx < params.grid_schedule[l - 1].first || gy < params.grid_schedule[l - 1].second))
            throw std::invalid_argument("register_bspline: grid schedule must be non-decreasing");
    }
    if (params.initial_step <= 0.0 || params.min_step <= 0.0)
        throw std::invalid_argument("register_bspline: steps must be > 0");
    if (params.mi_bins < 2)
        throw std::invalid_argument("register_bspline: mi_bins must be >= 2");
    if (params.max_iterations_per_level < 1)
        throw std::invalid_argument("register_bspline: max_iterations_per_level must be >= 1");
    if (fixed_mask.width != fixed.width || fixed_mask.height != fixed.height)
        throw std::invalid_argument("register_bspline: mask must align with the fixed image");
    for (double v : fixed.data)
        if (!std::isfinite(v)) throw DataError("register_bspline: non-finite intensity in fixed");
    for (double v : moving.data)
        if (!std::isfinite(v)) throw DataError("register_bspline: non-finite intensity in moving");

    const Image fixed_w = resample(fixed, params.working_width, params.working_height);
    Image moving_w = resample(moving, params.working_width, params.working_height);
    Mask mask_w = resample_mask(fixed_mask, params.working_width, params.working_height);
    if (mask_w.count() == 0) mask_w = Mask(fixed_w.width, fixed_w.height, true);
    moving_w = histogram_match(moving_w, fixed_w);

    // All pyramid levels share the working physical extent, so one grid
    // geometry transfers across levels and out to the full-resolution image.
    const double extent_x = fixed_w.phys_width();
    const double extent_y = fixed_w.phys_height();

    BSplineResult result;
    BSplineGrid grid = make_grid(extent_x, extent_y,
                                 params.grid_schedule[0].first, params.grid_schedule[0].second);

    std::vector<std::pair<int, int64_t>> journal_counts, journal_marg;
    journal_counts.reserve(4096);
    journal_marg.reserve(4096);

    for (int level = 0; level < params.levels; ++level) {
        const int factor = 1 << (params.levels - 1 - level);
        const int wl = std::max(4, static_cast<int>(std::lround(
                                       static_cast<double>(params.working_width) / factor)));
        const int hl = std::max(4, static_cast<int>(std::lround(
                                       static_cast<double>(params.working_height) / factor)));
        const Image fixed_l = resample(fixed_w, wl, hl);
        const Image moving_l = resample(moving_w, wl, hl);
        Mask mask_l = resample_mask(mask_w, wl, hl);
        if (mask_l.count() == 0) mask_l = Mask(wl, hl, true);

        BSplineLevelInfo info;
        info.width = wl;
        info.height = hl;
        info.nx = grid.nx;
        info.ny = grid.ny;

        MiState st;
        init_state(st, fixed_l, moving_l, mask_l, grid, params.mi_bins);
        rebuild(st, grid);
        if (st.n == 0)
            throw RegistrationError("register_bspline: empty joint histogram at level " +
                                    std::to_string(level));
        info.initial_mi = st.mi;

        const int n_coeff = grid.nx * grid.ny;
        std::vector<double> grad(static_cast<size_t>(n_coeff) * 2);
        std::vector<double> saved_dx, saved_dy;
        double step = params.initial_step;

        for (int iter = 1; iter <= params.max_iterations_per_level; ++iter) {
            info.iterations = iter;
            const double fd = step / 10.0;
            double norm2 = 0.0;
            for (int cp = 0; cp < n_coeff; ++cp) {
                const int cp_x = cp % grid.nx, cp_y = cp / grid.nx;
                for (int comp = 0; comp < 2; ++comp) {
                    const double mi_p = perturbed_mi(st, cp_x, cp_y, comp == 0, fd,
                                                     journal_counts, journal_marg);
                    const double mi_m = perturbed_mi(st, cp_x, cp_y, comp == 0, -fd,
                                                     journal_counts, journal_marg);
                    const double g = (mi_p - mi_m) / (2.0 * fd);
                    grad[static_cast<size_t>(comp) * n_coeff + cp] = g;
                    norm2 += g * g;
                }
            }
            const double norm = std::sqrt(norm2);
            if (norm < 1e-14) {
                step /= 2.0;
                if (step < params.min_step) break;
                continue;
            }

            saved_dx = grid.dx;
            saved_dy = grid.dy;
            const double scale = step / norm;
            for (int cp = 0; cp < n_coeff; ++cp) {
                grid.dx[static_cast<size_t>(cp)] += scale * grad[static_cast<size_t>(cp)];
                grid.dy[static_cast<size_t>(cp)] += scale * grad[static_cast<size_t>(n_coeff) + cp];
            }
            const double mi_before = st.mi;
            rebuild(st, grid);
            if (st.mi > mi_before) {
                info.accepted_mi.push_back(st.mi);
            } else {
                grid.dx = saved_dx;
                grid.dy = saved_dy;
                rebuild(st, grid);
                step /= 2.0;
                if (step < params.min_step) break;
            }
        }

        info.final_mi = st.mi;
        result.final_mi = st.mi;
        result.iterations_total += info.iterations;
        result.levels.push_back(std::move(info));

        if (level + 1 < params.levels)
            grid = fit_grid(grid, extent_x, extent_y,
                            params.grid_schedule[static_cast<size_t>(level) + 1].first,
                            params.grid_schedule[static_cast<size_t>(level) + 1].second);
    }

    result.grid = std::move(grid);
    return result;
}

} // namespace mamreg
