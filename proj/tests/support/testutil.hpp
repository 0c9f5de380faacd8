#pragma once

#include <filesystem>
#include <random>
#include <unistd.h>
#include <string>

#include "unisod/image.hpp"
#include "unisod/tensor.hpp"

namespace testutil {

using unisod::Rng;

inline unisod::img::GrayF random_gray(Rng& rng, int h, int w, double lo = 0.0, double hi = 1.0) {
    unisod::img::GrayF out(h, w);
    for (double& v : out.v) v = unisod::uniform(rng, lo, hi);
    return out;
}

// values from the 8-bit quantization grid k/255
inline unisod::img::GrayF random_gray_q8(Rng& rng, int h, int w) {
    unisod::img::GrayF out(h, w);
    for (double& v : out.v) v = static_cast<double>(rng() % 256) / 255.0;
    return out;
}

inline unisod::img::GrayF random_mask(Rng& rng, int h, int w, double fg_prob = 0.4) {
    unisod::img::GrayF out(h, w);
    for (double& v : out.v) v = unisod::uniform(rng, 0.0, 1.0) < fg_prob ? 1.0 : 0.0;
    return out;
}

// guaranteed at least one foreground and one background pixel
inline unisod::img::GrayF random_mask_nondegenerate(Rng& rng, int h, int w, double fg_prob = 0.4) {
    while (true) {
        unisod::img::GrayF m = random_mask(rng, h, w, fg_prob);
        double s = 0.0;
        for (double v : m.v) s += v;
        if (s > 0.0 && s < static_cast<double>(m.v.size())) return m;
    }
}

inline unisod::img::ImageF random_image(Rng& rng, int c, int h, int w) {
    unisod::img::ImageF out(c, h, w);
    for (double& v : out.v) v = unisod::uniform(rng, 0.0, 1.0);
    return out;
}

inline unisod::nn::Tensor random_tensor(Rng& rng, std::vector<int> shape, double lo = -1.0,
                                        double hi = 1.0, bool requires_grad = false) {
    unisod::nn::Tensor t = unisod::nn::make_tensor(std::move(shape), requires_grad);
    for (double& v : t.v) v = unisod::uniform(rng, lo, hi);
    return t;
}

inline double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
    double m = 0.0;
    for (size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

struct TempDir {
    std::filesystem::path path;
    explicit TempDir(const std::string& tag) {
        path = std::filesystem::temp_directory_path() /
               ("unisod_" + tag + "_" + std::to_string(::getpid()) + "_" +
                std::to_string(counter()++));
        std::filesystem::create_directories(path);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path, ec);
    }
    static int& counter() {
        static int c = 0;
        return c;
    }
};

}  // namespace testutil
