#pragma once

#include <vector>

#include "unisod/common.hpp"

namespace unisod::img {

// Planar C,H,W image with double values, normalized to [0,1] after loading.
struct ImageF {
    int channels = 0, height = 0, width = 0;
    std::vector<double> v;

    ImageF() = default;
    ImageF(int c, int h, int w) : channels(c), height(h), width(w), v(size_t(c) * h * w, 0.0) {}

    double& at(int c, int y, int x) { return v[(size_t(c) * height + y) * width + x]; }
    double at(int c, int y, int x) const { return v[(size_t(c) * height + y) * width + x]; }
    bool empty() const { return v.empty(); }
    size_t plane_size() const { return size_t(height) * width; }
};

// Single-channel H,W map; saliency maps in [0,1], ground truth masks in {0,1}.
struct GrayF {
    int height = 0, width = 0;
    std::vector<double> v;

    GrayF() = default;
    GrayF(int h, int w, double fill = 0.0) : height(h), width(w), v(size_t(h) * w, fill) {}

    double& at(int y, int x) { return v[size_t(y) * width + x]; }
    double at(int y, int x) const { return v[size_t(y) * width + x]; }
    bool empty() const { return v.empty(); }
    size_t size() const { return v.size(); }
};

inline GrayF channel(const ImageF& im, int c) {
    GrayF out(im.height, im.width);
    for (int y = 0; y < im.height; ++y)
        for (int x = 0; x < im.width; ++x) out.at(y, x) = im.at(c, y, x);
    return out;
}

// Nearest-neighbor resize; keeps binary masks binary.
inline GrayF resize_nearest(const GrayF& in, int oh, int ow) {
    require(in.height > 0 && in.width > 0, "resize_nearest: empty input");
    GrayF out(oh, ow);
    for (int y = 0; y < oh; ++y) {
        int sy = std::min(in.height - 1, static_cast<int>((y + 0.5) * in.height / oh));
        for (int x = 0; x < ow; ++x) {
            int sx = std::min(in.width - 1, static_cast<int>((x + 0.5) * in.width / ow));
            out.at(y, x) = in.at(sy, sx);
        }
    }
    return out;
}

}  // namespace unisod::img
