#include "mamreg/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace mamreg {

namespace {

void check_aligned(const Image& fixed, const Image& moving, const Mask& mask) {
    if (!fixed.same_dims(moving) || mask.width != fixed.width || mask.height != fixed.height)
        throw std::invalid_argument("metrics: image and mask dimensions must match");
}

inline int bin_of(double v, int bins) {
    const int b = static_cast<int>(v * bins);
    return std::clamp(b, 0, bins - 1);
}

double entropy_of_counts(const int64_t* counts, size_t len, int64_t n) {
    double h = 0.0;
    const double dn = static_cast<double>(n);
    for (size_t i = 0; i < len; ++i) {
        if (counts[i] <= 0) continue;
        const double p = static_cast<double>(counts[i]) / dn;
        h -= p * std::log2(p);
    }
    return h;
}

} // namespace

double ssd(const Image& fixed, const Image& moving, const Mask& mask) {
    check_aligned(fixed, moving, mask);
    double sum = 0.0;
    int64_t n = 0;
    for (size_t i = 0; i < mask.size(); ++i) {
        if (!mask.data[i]) continue;
        const double d = fixed.data[i] - moving.data[i];
        sum += d * d;
        ++n;
    }
    if (n == 0) throw std::invalid_argument("ssd: empty mask");
    return sum / static_cast<double>(n);
}

double correlation(const Image& fixed, const Image& moving, const Mask& mask, bool* degenerate) {
    check_aligned(fixed, moving, mask);
    if (degenerate) *degenerate = false;
    double sf = 0.0, sm = 0.0;
    int64_t n = 0;
    for (size_t i = 0; i < mask.size(); ++i) {
        if (!mask.data[i]) continue;
        sf += fixed.data[i];
        sm += moving.data[i];
        ++n;
    }
    if (n < 2) throw std::invalid_argument("correlation: mask must hold at least 2 pixels");
    const double mf = sf / static_cast<double>(n);
    const double mm = sm / static_cast<double>(n);
    double cov = 0.0, vf = 0.0, vm = 0.0;
    for (size_t i = 0; i < mask.size(); ++i) {
        if (!mask.data[i]) continue;
        const double df = fixed.data[i] - mf;
        const double dm = moving.data[i] - mm;
        cov += df * dm;
        vf += df * df;
        vm += dm * dm;
    }
    if (vf <= 0.0 || vm <= 0.0) {
        if (degenerate) *degenerate = true;
        return 0.0;
    }
    return cov / std::sqrt(vf * vm);
}

JointHistogram joint_histogram(const Image& fixed, const Image& moving,
                               const Mask& mask, int bins) {
    check_aligned(fixed, moving, mask);
    if (bins < 2) throw std::invalid_argument("joint_histogram: bins must be >= 2");
    JointHistogram hist;
    hist.bins = bins;
    hist.counts.assign(static_cast<size_t>(bins) * bins, 0);
    hist.marginal_f.assign(bins, 0);
    hist.marginal_m.assign(bins, 0);
    for (size_t i = 0; i < mask.size(); ++i) {
        if (!mask.data[i]) continue;
        const int bf = bin_of(fixed.data[i], bins);
        const int bm = bin_of(moving.data[i], bins);
        ++hist.counts[static_cast<size_t>(bf) * bins + bm];
        ++hist.marginal_f[bf];
        ++hist.marginal_m[bm];
        ++hist.n;
    }
    if (hist.n == 0) throw std::invalid_argument("joint_histogram: empty mask");
    return hist;
}

double entropy(const JointHistogram& hist, EntropyKind kind) {
    if (hist.n < 1) throw std::invalid_argument("entropy: histogram holds no samples");
    switch (kind) {
        case EntropyKind::Joint:
            return entropy_of_counts(hist.counts.data(), hist.counts.size(), hist.n);
        case EntropyKind::MarginalF:
            return entropy_of_counts(hist.marginal_f.data(), hist.marginal_f.size(), hist.n);
        case EntropyKind::MarginalM:
        default:
            return entropy_of_counts(hist.marginal_m.data(), hist.marginal_m.size(), hist.n);
    }
}

double mutual_information(const Image& fixed, const Image& moving,
                          const Mask& mask, int bins) {
    const JointHistogram hist = joint_histogram(fixed, moving, mask, bins);
    return entropy(hist, EntropyKind::MarginalF) + entropy(hist, EntropyKind::MarginalM) -
           entropy(hist, EntropyKind::Joint);
}

Image jeh_image(const JointHistogram& hist, int size) {
    if (size < hist.bins)
        throw std::invalid_argument("jeh_image: size must be >= bins");
    const int64_t max_count = *std::max_element(hist.counts.begin(), hist.counts.end());
    if (max_count <= 0)
        throw std::invalid_argument("jeh_image: all-zero histogram");
    const double denom = std::log1p(static_cast<double>(max_count));
    Image out(size, size, 0.0, 1.0, 1.0);
    for (int y = 0; y < size; ++y) {
        const int bm = static_cast<int>(static_cast<int64_t>(y) * hist.bins / size);
        for (int x = 0; x < size; ++x) {
            const int bf = static_cast<int>(static_cast<int64_t>(x) * hist.bins / size);
            const int64_t c = hist.at(bf, bm);
            out.at(x, y) = c > 0 ? std::log1p(static_cast<double>(c)) / denom : 0.0;
        }
    }
    return out;
}

MetricReport compute_metrics(const Image& fixed, const Image& moving,
                             const Mask& mask, int bins) {
    MetricReport r;
    r.ssd = ssd(fixed, moving, mask);
    r.cc = correlation(fixed, moving, mask, &r.cc_degenerate);
    const JointHistogram hist = joint_histogram(fixed, moving, mask, bins);
    const double hf = entropy(hist, EntropyKind::MarginalF);
    const double hm = entropy(hist, EntropyKind::MarginalM);
    r.h_joint = entropy(hist, EntropyKind::Joint);
    r.mi = hf + hm - r.h_joint;
    r.n_pixels = hist.n;
    return r;
}

} // namespace mamreg
