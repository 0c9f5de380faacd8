#pragma once

#include <cmath>

#include "unisod/image.hpp"
#include "unisod/tensor.hpp"

namespace unisod {

struct LossConfig {
    double alpha_smooth = 10.0;  // edge weighting in the smoothness term
    double w_bce = 1.0;
    double w_smooth = 1.0;
    double w_dice = 1.0;
    double bce_eps = 1e-7;   // prediction clamp
    double dice_eps = 1.0;   // numerator/denominator smoothing
};

struct LossReport {
    double bce = 0.0;
    double smooth = 0.0;
    double dice = 0.0;
    double total = 0.0;
};

namespace detail {
inline void check_pair(const img::GrayF& s, const img::GrayF& t, const char* who) {
    require(s.height == t.height && s.width == t.width && s.height > 0,
            std::string(who) + ": shape mismatch");
}
}  // namespace detail

// Mean over pixels of -[g*log(s) + (1-g)*log(1-s)], s clamped to [eps, 1-eps].
inline double bce_loss(const img::GrayF& s, const img::GrayF& g, double eps = 1e-7) {
    detail::check_pair(s, g, "bce_loss");
    double acc = 0.0;
    for (size_t i = 0; i < s.v.size(); ++i) {
        double p = std::clamp(s.v[i], eps, 1.0 - eps);
        acc += -(g.v[i] * std::log(p) + (1.0 - g.v[i]) * std::log(1.0 - p));
    }
    return acc / static_cast<double>(s.v.size());
}

inline void bce_loss_grad(const img::GrayF& s, const img::GrayF& g, img::GrayF& ds,
                          double weight, double eps = 1e-7) {
    double inv_n = 1.0 / static_cast<double>(s.v.size());
    for (size_t i = 0; i < s.v.size(); ++i) {
        if (s.v[i] <= eps || s.v[i] >= 1.0 - eps) continue;  // clamped: locally constant
        double p = s.v[i];
        ds.v[i] += weight * inv_n * (-g.v[i] / p + (1.0 - g.v[i]) / (1.0 - p));
    }
}

// First-order edge-aware smoothness: forward differences of the prediction,
// each direction damped by exp(-alpha * mean-channel image gradient).
inline double smoothness_loss(const img::GrayF& s, const img::ImageF& rgb, double alpha = 10.0) {
    require(s.height == rgb.height && s.width == rgb.width, "smoothness_loss: shape mismatch");
    const int h = s.height, w = s.width;
    double acc = 0.0;
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            if (x + 1 < w) {
                double ig = 0.0;
                for (int c = 0; c < rgb.channels; ++c)
                    ig += std::abs(rgb.at(c, y, x + 1) - rgb.at(c, y, x));
                ig /= rgb.channels;
                acc += std::abs(s.at(y, x + 1) - s.at(y, x)) * std::exp(-alpha * ig);
            }
            if (y + 1 < h) {
                double ig = 0.0;
                for (int c = 0; c < rgb.channels; ++c)
                    ig += std::abs(rgb.at(c, y + 1, x) - rgb.at(c, y, x));
                ig /= rgb.channels;
                acc += std::abs(s.at(y + 1, x) - s.at(y, x)) * std::exp(-alpha * ig);
            }
        }
    return acc / static_cast<double>(h * w);
}

inline void smoothness_loss_grad(const img::GrayF& s, const img::ImageF& rgb, img::GrayF& ds,
                                 double weight, double alpha = 10.0) {
    const int h = s.height, w = s.width;
    double inv_n = 1.0 / static_cast<double>(h * w);
    auto sgn = [](double t) { return t > 0.0 ? 1.0 : (t < 0.0 ? -1.0 : 0.0); };
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            if (x + 1 < w) {
                double ig = 0.0;
                for (int c = 0; c < rgb.channels; ++c)
                    ig += std::abs(rgb.at(c, y, x + 1) - rgb.at(c, y, x));
                ig /= rgb.channels;
                double d = weight * inv_n * sgn(s.at(y, x + 1) - s.at(y, x)) * std::exp(-alpha * ig);
                ds.at(y, x + 1) += d;
                ds.at(y, x) -= d;
            }
            if (y + 1 < h) {
                double ig = 0.0;
                for (int c = 0; c < rgb.channels; ++c)
                    ig += std::abs(rgb.at(c, y + 1, x) - rgb.at(c, y, x));
                ig /= rgb.channels;
                double d = weight * inv_n * sgn(s.at(y + 1, x) - s.at(y, x)) * std::exp(-alpha * ig);
                ds.at(y + 1, x) += d;
                ds.at(y, x) -= d;
            }
        }
}

// 1 - (2*sum(s*g) + eps) / (sum(s) + sum(g) + eps)
inline double dice_loss(const img::GrayF& s, const img::GrayF& g, double eps = 1.0) {
    detail::check_pair(s, g, "dice_loss");
    double inter = 0.0, sum_s = 0.0, sum_g = 0.0;
    for (size_t i = 0; i < s.v.size(); ++i) {
        inter += s.v[i] * g.v[i];
        sum_s += s.v[i];
        sum_g += g.v[i];
    }
    return 1.0 - (2.0 * inter + eps) / (sum_s + sum_g + eps);
}

inline void dice_loss_grad(const img::GrayF& s, const img::GrayF& g, img::GrayF& ds,
                           double weight, double eps = 1.0) {
    double inter = 0.0, sum_s = 0.0, sum_g = 0.0;
    for (size_t i = 0; i < s.v.size(); ++i) {
        inter += s.v[i] * g.v[i];
        sum_s += s.v[i];
        sum_g += g.v[i];
    }
    double num = 2.0 * inter + eps;
    double den = sum_s + sum_g + eps;
    for (size_t i = 0; i < s.v.size(); ++i)
        ds.v[i] += weight * (num - 2.0 * g.v[i] * den) / (den * den);
}

inline LossReport total_loss(const img::GrayF& s, const img::GrayF& g, const img::ImageF& rgb,
                             const LossConfig& cfg = {}) {
    LossReport r;
    r.bce = bce_loss(s, g, cfg.bce_eps);
    r.smooth = smoothness_loss(s, rgb, cfg.alpha_smooth);
    r.dice = dice_loss(s, g, cfg.dice_eps);
    r.total = cfg.w_bce * r.bce + cfg.w_smooth * r.smooth + cfg.w_dice * r.dice;
    return r;
}

inline void total_loss_grad(const img::GrayF& s, const img::GrayF& g, const img::ImageF& rgb,
                            img::GrayF& ds, const LossConfig& cfg = {}) {
    if (ds.height != s.height || ds.width != s.width) ds = img::GrayF(s.height, s.width);
    bce_loss_grad(s, g, ds, cfg.w_bce, cfg.bce_eps);
    smoothness_loss_grad(s, rgb, ds, cfg.w_smooth, cfg.alpha_smooth);
    dice_loss_grad(s, g, ds, cfg.w_dice, cfg.dice_eps);
}

// Graph node: scalar loss over a {1,H,W} prediction, with the analytic
// gradient routed back into the prediction on the tape.
inline nn::Tensor& saliency_loss_node(nn::Graph& graph, const nn::Tensor& smap,
                                      const img::GrayF& gt, const img::ImageF& rgb,
                                      const LossConfig& cfg, LossReport* report = nullptr) {
    require(smap.ndim() == 3 && smap.dim(0) == 1, "saliency_loss_node: expected {1,H,W}");
    const int h = smap.dim(1), w = smap.dim(2);
    require(gt.height == h && gt.width == w, "saliency_loss_node: gt shape mismatch");

    img::GrayF s(h, w);
    std::copy(smap.v.begin(), smap.v.end(), s.v.begin());
    LossReport r = total_loss(s, gt, rgb, cfg);
    if (report) *report = r;

    nn::Tensor& out = graph.make({1}, smap.requires_grad);
    out.v[0] = r.total;
    if (out.requires_grad) {
        nn::Tensor* ps = const_cast<nn::Tensor*>(&smap);
        nn::Tensor* po = &out;
        img::GrayF gt_copy = gt;
        img::ImageF rgb_copy = rgb;
        img::GrayF s_copy = std::move(s);
        graph.record([ps, po, gt_copy, rgb_copy, s_copy, cfg] {
            img::GrayF ds(s_copy.height, s_copy.width);
            total_loss_grad(s_copy, gt_copy, rgb_copy, ds, cfg);
            for (size_t i = 0; i < ds.v.size(); ++i) ps->g[i] += po->g[0] * ds.v[i];
        });
    }
    return out;
}

}  // namespace unisod
