#pragma once

#include <utility>
#include <vector>

#include "mamreg/image.hpp"

namespace mamreg {

// Connected-component labels, 0 = background, components numbered 1..K in
// first-encounter raster order.
struct LabelMap {
    int width = 0;
    int height = 0;
    std::vector<int32_t> labels;
    int num_labels = 0;

    LabelMap() = default;
    LabelMap(int w, int h)
        : width(w), height(h), labels(static_cast<size_t>(w) * static_cast<size_t>(h), 0) {}
    int32_t at(int x, int y) const { return labels[static_cast<size_t>(y) * width + x]; }
};

// Mean and population standard deviation of the frame of width `border`
// around the image edge; the scanner background lives there.
std::pair<double, double> estimate_background_stats(const Image& image, int border);

// mask[p] = image[p] > threshold.
Mask threshold_mask(const Image& image, double threshold);

// Connected components under Euclidean disc adjacency: two foreground
// pixels are neighbors iff their center distance is <= radius.
LabelMap connected_components(const Mask& mask, int radius);

struct SegmentOptions {
    int border = 10;               // background frame width, pixels
    double sigma_multiplier = 12.0; // threshold = mean + multiplier * std
    int radius = 3;                // component adjacency radius, pixels
};

// Breast-tissue mask: background statistics from the border frame, threshold
// at mean + multiplier*std (floored at mean + 1e-3 when the frame is flat),
// largest disc-adjacency component kept, enclosed holes filled. Scanner
// artifacts such as name tags come out as smaller components and are
// dropped. Throws SegmentationError when nothing survives the threshold.
Mask segment_breast(const Image& image, const SegmentOptions& opts = {});

} // namespace mamreg
