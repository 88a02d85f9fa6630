#pragma once

#include <cstdint>
#include <vector>

#include "mamreg/image.hpp"

namespace mamreg {

// B x B joint intensity histogram over an ROI. Bin index for a value v in
// [0,1] is min(floor(v*B), B-1); counts[f_bin*B + m_bin].
struct JointHistogram {
    int bins = 0;
    std::vector<int64_t> counts;
    std::vector<int64_t> marginal_f, marginal_m;
    int64_t n = 0;

    int64_t at(int f_bin, int m_bin) const {
        return counts[static_cast<size_t>(f_bin) * bins + m_bin];
    }
};

enum class EntropyKind { Joint, MarginalF, MarginalM };

// Mean of squared intensity differences over the mask.
double ssd(const Image& fixed, const Image& moving, const Mask& mask);

// Pearson correlation coefficient over the mask. If either image has zero
// variance inside the mask the result is 0 and *degenerate (when provided)
// is set.
double correlation(const Image& fixed, const Image& moving, const Mask& mask,
                   bool* degenerate = nullptr);

JointHistogram joint_histogram(const Image& fixed, const Image& moving,
                               const Mask& mask, int bins);

// Shannon entropy in bits, 0*log(0) taken as 0.
double entropy(const JointHistogram& hist, EntropyKind kind);

// H(f) + H(m) - H(f,m), in bits; >= -1e-12 up to rounding.
double mutual_information(const Image& fixed, const Image& moving,
                          const Mask& mask, int bins);

// Log-scaled histogram rendering: v = log(1+count)/log(1+max_count),
// nearest-neighbor upscaled to size x size. Columns follow the fixed-image
// bins and rows the moving-image bins, both ascending from the origin pixel.
Image jeh_image(const JointHistogram& hist, int size);

struct MetricReport {
    double ssd = 0.0;
    double cc = 0.0;
    double mi = 0.0;      // bits
    double h_joint = 0.0; // bits
    int64_t n_pixels = 0;
    bool cc_degenerate = false;
};

MetricReport compute_metrics(const Image& fixed, const Image& moving,
                             const Mask& mask, int bins = 64);

} // namespace mamreg
