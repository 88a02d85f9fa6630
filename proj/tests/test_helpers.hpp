#pragma once

// Shared generators and independent oracles for the test suites. The oracles
// deliberately re-derive every quantity with plain loops so they share no
// code with the library paths they check.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "mamreg/image.hpp"
#include "mamreg/rng.hpp"

namespace testutil {

using mamreg::Image;
using mamreg::Mask;
using mamreg::Rng;

inline Image random_image(int w, int h, uint64_t seed, double sx = 1.0, double sy = 1.0) {
    Image img(w, h, 0.0, sx, sy);
    Rng rng(seed);
    for (double& v : img.data) v = rng.uniform();
    return img;
}

inline double smoothstep01(double e0, double e1, double x) {
    const double t = std::clamp((x - e0) / (e1 - e0), 0.0, 1.0);
    return t * t * (3.0 - 2.0 * t);
}

// Smooth multi-blob image, windowed to fade out at the borders so that a
// globally transformed copy stays recoverable (shifted-in background matches
// the dark frame). Suits the registration tests better than white noise.
inline Image blob_image(int w, int h, uint64_t seed, double sx = 1.0, double sy = 1.0,
                        int blobs = 12) {
    Image img(w, h, 0.0, sx, sy);
    Rng rng(seed);
    const double W = (w - 1) * sx, H = (h - 1) * sy;
    for (int k = 0; k < blobs; ++k) {
        const double cx = rng.uniform(0.2 * W, 0.8 * W);
        const double cy = rng.uniform(0.2 * H, 0.8 * H);
        const double sigma = rng.uniform(0.08, 0.22) * std::min(W, H);
        const double amp = rng.uniform(0.15, 0.4);
        for (int j = 0; j < h; ++j) {
            for (int i = 0; i < w; ++i) {
                const double dx = i * sx - cx, dy = j * sy - cy;
                img.at(i, j) += amp * std::exp(-(dx * dx + dy * dy) / (2.0 * sigma * sigma));
            }
        }
    }
    for (int j = 0; j < h; ++j) {
        for (int i = 0; i < w; ++i) {
            const double win = smoothstep01(0.0, 0.15 * W, i * sx) *
                               smoothstep01(0.0, 0.15 * W, W - i * sx) *
                               smoothstep01(0.0, 0.15 * H, j * sy) *
                               smoothstep01(0.0, 0.15 * H, H - j * sy);
            img.at(i, j) = std::clamp(img.at(i, j) * win, 0.0, 1.0);
        }
    }
    return img;
}

inline Mask random_mask(int w, int h, uint64_t seed, double density = 0.6, size_t min_count = 4) {
    Rng rng(seed);
    for (;;) {
        Mask m(w, h);
        for (auto& v : m.data) v = rng.uniform() < density ? 1 : 0;
        if (m.count() >= min_count) return m;
    }
}

inline Mask full_mask(int w, int h) { return Mask(w, h, true); }

// --- independent metric oracles -------------------------------------------

inline double oracle_ssd(const Image& f, const Image& m, const Mask& k) {
    double s = 0.0;
    long n = 0;
    for (size_t i = 0; i < k.size(); ++i) {
        if (!k.data[i]) continue;
        s += (f.data[i] - m.data[i]) * (f.data[i] - m.data[i]);
        ++n;
    }
    return s / n;
}

inline double oracle_cc(const Image& f, const Image& m, const Mask& k) {
    double sf = 0.0, sm = 0.0;
    long n = 0;
    for (size_t i = 0; i < k.size(); ++i) {
        if (!k.data[i]) continue;
        sf += f.data[i];
        sm += m.data[i];
        ++n;
    }
    const double mf = sf / n, mm = sm / n;
    double num = 0.0, df2 = 0.0, dm2 = 0.0;
    for (size_t i = 0; i < k.size(); ++i) {
        if (!k.data[i]) continue;
        num += (f.data[i] - mf) * (m.data[i] - mm);
        df2 += (f.data[i] - mf) * (f.data[i] - mf);
        dm2 += (m.data[i] - mm) * (m.data[i] - mm);
    }
    if (df2 == 0.0 || dm2 == 0.0) return 0.0;
    return num / std::sqrt(df2 * dm2);
}

// Entropies computed from probability tables built with plain nested loops.
struct OracleEntropies {
    double hf = 0.0, hm = 0.0, hj = 0.0;
};

inline OracleEntropies oracle_entropies(const Image& f, const Image& m, const Mask& k, int bins) {
    std::vector<double> pj(static_cast<size_t>(bins) * bins, 0.0);
    std::vector<double> pf(bins, 0.0), pm(bins, 0.0);
    long n = 0;
    for (size_t i = 0; i < k.size(); ++i) {
        if (!k.data[i]) continue;
        int bf = static_cast<int>(f.data[i] * bins);
        int bm = static_cast<int>(m.data[i] * bins);
        bf = std::min(std::max(bf, 0), bins - 1);
        bm = std::min(std::max(bm, 0), bins - 1);
        pj[static_cast<size_t>(bf) * bins + bm] += 1.0;
        pf[bf] += 1.0;
        pm[bm] += 1.0;
        ++n;
    }
    OracleEntropies e;
    auto h = [&](const std::vector<double>& p) {
        double acc = 0.0;
        for (double c : p)
            if (c > 0.0) acc -= (c / n) * std::log2(c / n);
        return acc;
    };
    e.hf = h(pf);
    e.hm = h(pm);
    e.hj = h(pj);
    return e;
}

inline double oracle_mi(const Image& f, const Image& m, const Mask& k, int bins) {
    const OracleEntropies e = oracle_entropies(f, m, k, bins);
    return e.hf + e.hm - e.hj;
}

// --- brute-force connected components (disc adjacency) ---------------------

inline std::vector<int> oracle_components(const Mask& mask, int radius) {
    std::vector<int> labels(mask.size(), 0);
    std::vector<size_t> fg;
    for (size_t i = 0; i < mask.size(); ++i)
        if (mask.data[i]) fg.push_back(i);
    int next = 0;
    std::vector<size_t> stack;
    for (size_t seed : fg) {
        if (labels[seed]) continue;
        labels[seed] = ++next;
        stack.push_back(seed);
        while (!stack.empty()) {
            const size_t cur = stack.back();
            stack.pop_back();
            const long cx = static_cast<long>(cur % mask.width);
            const long cy = static_cast<long>(cur / mask.width);
            for (size_t other : fg) {
                if (labels[other]) continue;
                const long ox = static_cast<long>(other % mask.width);
                const long oy = static_cast<long>(other / mask.width);
                const long d2 = (cx - ox) * (cx - ox) + (cy - oy) * (cy - oy);
                if (d2 <= static_cast<long>(radius) * radius) {
                    labels[other] = next;
                    stack.push_back(other);
                }
            }
        }
    }
    return labels;
}

// Fresh per-test scratch directory under the current working directory.
inline std::string scratch_dir(const std::string& name) {
    const std::filesystem::path p = std::filesystem::path("test_scratch") / name;
    std::filesystem::remove_all(p);
    std::filesystem::create_directories(p);
    return p.string();
}

inline std::vector<char> read_file_bytes(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    return std::vector<char>((std::istreambuf_iterator<char>(in)),
                             std::istreambuf_iterator<char>());
}

} // namespace testutil
