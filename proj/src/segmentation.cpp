#include "mamreg/segmentation.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "mamreg/errors.hpp"

namespace mamreg {

std::pair<double, double> estimate_background_stats(const Image& image, int border) {
    if (border < 1 || 2 * border >= image.width || 2 * border >= image.height)
        throw std::invalid_argument("estimate_background_stats: border too large for image");
    double sum = 0.0, sum2 = 0.0;
    size_t n = 0;
    for (int j = 0; j < image.height; ++j) {
        for (int i = 0; i < image.width; ++i) {
            const bool frame = i < border || i >= image.width - border ||
                               j < border || j >= image.height - border;
            if (!frame) continue;
            const double v = image.at(i, j);
            sum += v;
            sum2 += v * v;
            ++n;
        }
    }
    const double mean = sum / static_cast<double>(n);
    const double var = std::max(0.0, sum2 / static_cast<double>(n) - mean * mean);
    return {mean, std::sqrt(var)};
}

Mask threshold_mask(const Image& image, double threshold) {
    Mask mask(image.width, image.height);
    for (size_t i = 0; i < image.size(); ++i) mask.data[i] = image.data[i] > threshold ? 1 : 0;
    return mask;
}

namespace {

std::vector<std::pair<int, int>> disc_offsets(int radius) {
    std::vector<std::pair<int, int>> offsets;
    for (int dy = -radius; dy <= radius; ++dy)
        for (int dx = -radius; dx <= radius; ++dx)
            if ((dx || dy) && dx * dx + dy * dy <= radius * radius)
                offsets.emplace_back(dx, dy);
    return offsets;
}

} // namespace

LabelMap connected_components(const Mask& mask, int radius) {
    if (radius < 1)
        throw std::invalid_argument("connected_components: radius must be >= 1");
    const auto offsets = disc_offsets(radius);
    LabelMap lm(mask.width, mask.height);
    std::vector<size_t> stack;
    int next_label = 0;
    for (int j = 0; j < mask.height; ++j) {
        for (int i = 0; i < mask.width; ++i) {
            const size_t idx = static_cast<size_t>(j) * mask.width + i;
            if (!mask.data[idx] || lm.labels[idx] != 0) continue;
            ++next_label;
            lm.labels[idx] = next_label;
            stack.push_back(idx);
            while (!stack.empty()) {
                const size_t cur = stack.back();
                stack.pop_back();
                const int cx = static_cast<int>(cur % mask.width);
                const int cy = static_cast<int>(cur / mask.width);
                for (const auto& [dx, dy] : offsets) {
                    const int nx = cx + dx, ny = cy + dy;
                    if (nx < 0 || ny < 0 || nx >= mask.width || ny >= mask.height) continue;
                    const size_t nidx = static_cast<size_t>(ny) * mask.width + nx;
                    if (mask.data[nidx] && lm.labels[nidx] == 0) {
                        lm.labels[nidx] = next_label;
                        stack.push_back(nidx);
                    }
                }
            }
        }
    }
    lm.num_labels = next_label;
    return lm;
}

namespace {

// Flood the background from the border (4-connectivity); enclosed background
// pockets are never reached and get merged into the foreground.
void fill_holes(Mask& mask) {
    const int w = mask.width, h = mask.height;
    std::vector<uint8_t> reached(mask.size(), 0);
    std::vector<size_t> stack;
    auto push = [&](int x, int y) {
        const size_t idx = static_cast<size_t>(y) * w + x;
        if (!mask.data[idx] && !reached[idx]) {
            reached[idx] = 1;
            stack.push_back(idx);
        }
    };
    for (int i = 0; i < w; ++i) {
        push(i, 0);
        push(i, h - 1);
    }
    for (int j = 0; j < h; ++j) {
        push(0, j);
        push(w - 1, j);
    }
    while (!stack.empty()) {
        const size_t cur = stack.back();
        stack.pop_back();
        const int cx = static_cast<int>(cur % w);
        const int cy = static_cast<int>(cur / w);
        if (cx > 0) push(cx - 1, cy);
        if (cx < w - 1) push(cx + 1, cy);
        if (cy > 0) push(cx, cy - 1);
        if (cy < h - 1) push(cx, cy + 1);
    }
    for (size_t i = 0; i < mask.size(); ++i)
        if (!mask.data[i] && !reached[i]) mask.data[i] = 1;
}

} // namespace

Mask segment_breast(const Image& image, const SegmentOptions& opts) {
    if (image.width < 32 || image.height < 32)
        throw std::invalid_argument("segment_breast: image must be at least 32x32");

    const auto [mean, stddev] = estimate_background_stats(image, opts.border);
    const double threshold = mean + std::max(opts.sigma_multiplier * stddev, 1e-3);
    const Mask thresholded = threshold_mask(image, threshold);

    const LabelMap lm = connected_components(thresholded, opts.radius);
    if (lm.num_labels == 0)
        throw SegmentationError("segment_breast: no foreground above threshold");

    std::vector<size_t> areas(static_cast<size_t>(lm.num_labels) + 1, 0);
    for (int32_t l : lm.labels)
        if (l > 0) ++areas[static_cast<size_t>(l)];
    int32_t best = 1;
    for (int32_t l = 2; l <= lm.num_labels; ++l)
        if (areas[static_cast<size_t>(l)] > areas[static_cast<size_t>(best)]) best = l;

    Mask mask(image.width, image.height);
    for (size_t i = 0; i < mask.size(); ++i) mask.data[i] = lm.labels[i] == best ? 1 : 0;
    fill_holes(mask);
    return mask;
}

} // namespace mamreg
