#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <utility>
#include <vector>

#include "unisod/image.hpp"

// Saliency evaluation: MAE, S-measure, E-measure (mean-over-thresholds and
// adaptive variants), and the weighted F-measure. All computations are double
// precision and single-threaded; tests compare them against straight-line
// reference implementations.

namespace unisod::metrics {

constexpr double kEps = 2.2204e-16;

namespace detail {
inline void check_pair(const img::GrayF& s, const img::GrayF& g, const char* who) {
    require(s.height == g.height && s.width == g.width && s.height > 0,
            std::string(who) + ": shape mismatch");
}
}  // namespace detail

inline double mae(const img::GrayF& s, const img::GrayF& g) {
    detail::check_pair(s, g, "mae");
    double acc = 0.0;
    for (size_t i = 0; i < s.v.size(); ++i) acc += std::abs(s.v[i] - g.v[i]);
    return acc / static_cast<double>(s.v.size());
}

// --- S-measure ---------------------------------------------------------------

namespace detail {

inline double object_score(const img::GrayF& pred, const img::GrayF& mask) {
    // mean/std of pred restricted to mask; sample std (n-1), scalar region -> 0
    int64_t n = 0;
    double sum = 0.0;
    for (size_t i = 0; i < pred.v.size(); ++i)
        if (mask.v[i] > 0.5) {
            sum += pred.v[i];
            ++n;
        }
    if (n == 0) return 0.0;
    double x = sum / n;
    double var = 0.0;
    for (size_t i = 0; i < pred.v.size(); ++i)
        if (mask.v[i] > 0.5) {
            double c = pred.v[i] - x;
            var += c * c;
        }
    double sigma = n > 1 ? std::sqrt(var / (n - 1)) : 0.0;
    return 2.0 * x / (x * x + 1.0 + sigma);
}

inline double s_object(const img::GrayF& s, const img::GrayF& g) {
    img::GrayF fg_pred(s.height, s.width), bg_pred(s.height, s.width), not_g(s.height, s.width);
    for (size_t i = 0; i < s.v.size(); ++i) {
        fg_pred.v[i] = g.v[i] > 0.5 ? s.v[i] : 0.0;
        bg_pred.v[i] = g.v[i] > 0.5 ? 0.0 : 1.0 - s.v[i];
        not_g.v[i] = g.v[i] > 0.5 ? 0.0 : 1.0;
    }
    double mu = 0.0;
    for (double v : g.v) mu += v;
    mu /= static_cast<double>(g.v.size());
    double o_fg = object_score(fg_pred, g);
    double o_bg = object_score(bg_pred, not_g);
    return mu * o_fg + (1.0 - mu) * o_bg;
}

// GT centroid in 1-based coordinates, following the reference convention.
inline void gt_centroid(const img::GrayF& g, int& cx, int& cy) {
    double total = 0.0;
    for (double v : g.v) total += v;
    if (total <= 0.0) {
        cx = static_cast<int>(std::round(g.width / 2.0));
        cy = static_cast<int>(std::round(g.height / 2.0));
        return;
    }
    double sx = 0.0, sy = 0.0;
    for (int y = 0; y < g.height; ++y)
        for (int x = 0; x < g.width; ++x) {
            sx += g.at(y, x) * (x + 1);
            sy += g.at(y, x) * (y + 1);
        }
    cx = static_cast<int>(std::round(sx / total));
    cy = static_cast<int>(std::round(sy / total));
}

// SSIM-style similarity of one block pair; empty blocks score 0 (their
// weight is 0 as well).
inline double block_ssim(const img::GrayF& s, const img::GrayF& g, int y0, int y1, int x0,
                         int x1) {
    int64_t n = static_cast<int64_t>(y1 - y0) * (x1 - x0);
    if (n <= 0) return 0.0;
    double xm = 0.0, ym = 0.0;
    for (int y = y0; y < y1; ++y)
        for (int x = x0; x < x1; ++x) {
            xm += s.at(y, x);
            ym += g.at(y, x);
        }
    xm /= n;
    ym /= n;
    double sx = 0.0, sy = 0.0, sxy = 0.0;
    for (int y = y0; y < y1; ++y)
        for (int x = x0; x < x1; ++x) {
            double a = s.at(y, x) - xm;
            double b = g.at(y, x) - ym;
            sx += a * a;
            sy += b * b;
            sxy += a * b;
        }
    double denom_n = static_cast<double>(n) - 1.0 + kEps;
    sx /= denom_n;
    sy /= denom_n;
    sxy /= denom_n;
    double alpha = 4.0 * xm * ym * sxy;
    double beta = (xm * xm + ym * ym) * (sx + sy);
    if (alpha != 0.0) return alpha / beta;  // alpha != 0 implies beta > 0
    return beta == 0.0 ? 1.0 : 0.0;
}

inline double s_region(const img::GrayF& s, const img::GrayF& g) {
    int cx = 0, cy = 0;
    gt_centroid(g, cx, cy);
    const int h = g.height, w = g.width;
    double area = static_cast<double>(h) * w;
    double w1 = cx * cy / area;
    double w2 = (w - cx) * cy / area;
    double w3 = cx * (h - cy) / area;
    double w4 = 1.0 - (w1 + w2 + w3);  // grouped to match the blend order below
    double q1 = block_ssim(s, g, 0, cy, 0, cx);
    double q2 = block_ssim(s, g, 0, cy, cx, w);
    double q3 = block_ssim(s, g, cy, h, 0, cx);
    double q4 = block_ssim(s, g, cy, h, cx, w);
    return ((q1 * w1 + q2 * w2) + q3 * w3) + q4 * w4;
}

}  // namespace detail

// alpha-blend of object- and region-level structural similarity, with the
// published fallbacks for degenerate ground truth.
inline double s_measure(const img::GrayF& s, const img::GrayF& g, double alpha = 0.5) {
    detail::check_pair(s, g, "s_measure");
    double gmean = 0.0, smean = 0.0;
    for (size_t i = 0; i < g.v.size(); ++i) {
        gmean += g.v[i];
        smean += s.v[i];
    }
    gmean /= static_cast<double>(g.v.size());
    smean /= static_cast<double>(s.v.size());
    if (gmean == 0.0) return 1.0 - smean;
    if (gmean == 1.0) return smean;
    return alpha * detail::s_object(s, g) + (1.0 - alpha) * detail::s_region(s, g);
}

// --- E-measure ---------------------------------------------------------------

struct EMeasureResult {
    double mean_thresholds = 0.0;           // primary value
    double adaptive = 0.0;                  // threshold = min(2*mean(S), 1)
    std::vector<double> curve;              // one value per threshold k/255
};

namespace detail {

// Enhanced-alignment score of the binarized map (S >= t) against binary G.
// For binary maps the alignment map takes at most four values, one per
// (fm, gt) cell, so the per-pixel formula reduces to class counting.
inline double e_score_binary(int64_t n, int64_t n_fg_gt, int64_t n_fm, int64_t n_both) {
    if (n_fg_gt == 0) return static_cast<double>(n - n_fm) / n;  // GT all background
    if (n_fg_gt == n) return static_cast<double>(n_fm) / n;      // GT all foreground
    double mu_f = static_cast<double>(n_fm) / n;
    double mu_g = static_cast<double>(n_fg_gt) / n;
    double af[2] = {-mu_f, 1.0 - mu_f};
    double ag[2] = {-mu_g, 1.0 - mu_g};
    int64_t counts[2][2];
    counts[1][1] = n_both;
    counts[1][0] = n_fm - n_both;
    counts[0][1] = n_fg_gt - n_both;
    counts[0][0] = n - n_fm - n_fg_gt + n_both;
    double acc = 0.0;
    for (int fm = 0; fm < 2; ++fm)
        for (int gt = 0; gt < 2; ++gt) {
            if (counts[fm][gt] == 0) continue;
            double den = af[fm] * af[fm] + ag[gt] * ag[gt];
            double phi = den == 0.0 ? 0.0 : 2.0 * (af[fm] * ag[gt]) / den;
            double enhanced = (1.0 + phi) * (1.0 + phi) / 4.0;
            acc += static_cast<double>(counts[fm][gt]) * enhanced;
        }
    return acc / static_cast<double>(n);
}

}  // namespace detail

inline EMeasureResult e_measure(const img::GrayF& s, const img::GrayF& g) {
    detail::check_pair(s, g, "e_measure");
    const int64_t n = static_cast<int64_t>(s.v.size());
    int64_t n_fg_gt = 0;
    double s_sum = 0.0;
    for (size_t i = 0; i < g.v.size(); ++i) {
        if (g.v[i] > 0.5) ++n_fg_gt;
        s_sum += s.v[i];
    }

    // One descending sort, then a single sweep over the thresholds k/255 from
    // high to low keeps the (S >= t) counts incremental.
    std::vector<std::pair<double, bool>> px(s.v.size());
    for (size_t i = 0; i < s.v.size(); ++i) px[i] = {s.v[i], g.v[i] > 0.5};
    std::sort(px.begin(), px.end(),
              [](const auto& a, const auto& b) { return a.first > b.first; });

    EMeasureResult r;
    r.curve.resize(256);
    int64_t n_fm = 0, n_both = 0;
    size_t ptr = 0;
    for (int k = 255; k >= 0; --k) {
        double t = k / 255.0;
        while (ptr < px.size() && px[ptr].first >= t) {
            ++n_fm;
            if (px[ptr].second) ++n_both;
            ++ptr;
        }
        r.curve[k] = detail::e_score_binary(n, n_fg_gt, n_fm, n_both);
    }
    double acc = 0.0;
    for (int k = 0; k < 256; ++k) acc += r.curve[k];
    r.mean_thresholds = acc / 256.0;

    double t_adp = std::min(2.0 * (s_sum / static_cast<double>(n)), 1.0);
    int64_t adp_fm = 0, adp_both = 0;
    for (size_t i = 0; i < s.v.size(); ++i)
        if (s.v[i] >= t_adp) {
            ++adp_fm;
            if (g.v[i] > 0.5) ++adp_both;
        }
    r.adaptive = detail::e_score_binary(n, n_fg_gt, adp_fm, adp_both);
    return r;
}

// --- weighted F-measure --------------------------------------------------------

namespace detail {

// Large finite sentinel: keeps the envelope arithmetic ordinary for empty
// columns (true infinities would make the intersection tests ill-defined).
constexpr double kFar = 1e20;

// 1-D squared distance transform (Felzenszwalb-Huttenlocher lower envelope).
inline void edt_1d(const std::vector<double>& f, std::vector<double>& d) {
    const int n = static_cast<int>(f.size());
    d.assign(n, 0.0);
    std::vector<int> v(n, 0);
    std::vector<double> z(n + 1, 0.0);
    int k = 0;
    v[0] = 0;
    z[0] = -kFar;
    z[1] = kFar;
    auto intersect = [&f](int p, int q) {
        return ((f[q] + q * static_cast<double>(q)) - (f[p] + p * static_cast<double>(p))) /
               (2.0 * q - 2.0 * p);
    };
    for (int q = 1; q < n; ++q) {
        double sv = intersect(v[k], q);
        while (sv <= z[k]) {
            --k;
            sv = intersect(v[k], q);
        }
        ++k;
        v[k] = q;
        z[k] = sv;
        z[k + 1] = kFar;
    }
    k = 0;
    for (int q = 0; q < n; ++q) {
        while (z[k + 1] < q) ++k;
        double dq = q - static_cast<double>(v[k]);
        d[q] = dq * dq + f[v[k]];
    }
}

// Exact squared Euclidean distance to the nearest foreground pixel of g.
inline std::vector<double> squared_edt(const img::GrayF& g) {
    const int h = g.height, w = g.width;
    std::vector<double> col(h), tmp(h), out(size_t(h) * w);
    std::vector<double> rowbuf(w), rowd(w);
    std::vector<double> stage(size_t(h) * w);
    for (int x = 0; x < w; ++x) {
        for (int y = 0; y < h; ++y) col[y] = g.at(y, x) > 0.5 ? 0.0 : kFar;
        edt_1d(col, tmp);
        for (int y = 0; y < h; ++y) stage[size_t(y) * w + x] = tmp[y];
    }
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) rowbuf[x] = stage[size_t(y) * w + x];
        edt_1d(rowbuf, rowd);
        for (int x = 0; x < w; ++x) out[size_t(y) * w + x] = rowd[x];
    }
    return out;
}

// 7x7 Gaussian, sigma 5, normalized so the row-major floating-point sum of
// the taps is exactly 1 (so filtering a constant-1 map returns exactly 1).
inline std::array<double, 49> dependency_kernel() {
    std::array<double, 49> k{};
    double s = 0.0;
    for (int dy = -3; dy <= 3; ++dy)
        for (int dx = -3; dx <= 3; ++dx) {
            double v = std::exp(-(dy * dy + dx * dx) / (2.0 * 5.0 * 5.0));
            k[(dy + 3) * 7 + (dx + 3)] = v;
            s += v;
        }
    for (double& v : k) v /= s;
    for (int iter = 0; iter < 16; ++iter) {
        double acc = 0.0;
        for (double v : k) acc += v;
        if (acc == 1.0) break;
        k[24] += 1.0 - acc;
    }
    return k;
}

}  // namespace detail

// Weighted F-beta of Margolin et al.: errors are re-weighted by a
// foreground-dependency Gaussian and an exponential distance decay before
// computing precision/recall. Empty ground truth is defined as 0 and flagged.
inline double weighted_f(const img::GrayF& s, const img::GrayF& g, double beta2 = 1.0,
                         bool* empty_gt = nullptr) {
    detail::check_pair(s, g, "weighted_f");
    const int h = s.height, w = s.width;
    const int64_t n = static_cast<int64_t>(s.v.size());
    int64_t n_fg = 0;
    for (double v : g.v)
        if (v > 0.5) ++n_fg;
    if (empty_gt) *empty_gt = (n_fg == 0);
    if (n_fg == 0) return 0.0;

    std::vector<double> err(n);
    for (int64_t i = 0; i < n; ++i) err[i] = std::abs(s.v[i] - g.v[i]);

    std::vector<double> d2 = detail::squared_edt(g);

    // Background errors near the foreground take the error of their nearest
    // foreground pixel (row-major first minimum as tie-break). Only pixels
    // within the 7x7 dependency window of some foreground pixel (d^2 <= 18)
    // can influence the result; farther pixels keep their own error.
    std::vector<double> err_dep = err;
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            size_t i = size_t(y) * w + x;
            if (g.v[i] > 0.5 || d2[i] > 18.0) continue;
            int64_t best = std::numeric_limits<int64_t>::max();
            int by = -1, bx = -1;
            for (int yy = std::max(0, y - 4); yy <= std::min(h - 1, y + 4); ++yy)
                for (int xx = std::max(0, x - 4); xx <= std::min(w - 1, x + 4); ++xx) {
                    if (g.at(yy, xx) <= 0.5) continue;
                    int64_t dd = int64_t(yy - y) * (yy - y) + int64_t(xx - x) * (xx - x);
                    if (dd < best) {
                        best = dd;
                        by = yy;
                        bx = xx;
                    }
                }
            if (by >= 0) err_dep[i] = err[size_t(by) * w + bx];
        }

    // 7x7 Gaussian with replicate borders (separable would do; direct is fine
    // at evaluation sizes).
    static const std::array<double, 49> kernel = detail::dependency_kernel();
    std::vector<double> ea(n);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            double acc = 0.0;
            for (int dy = -3; dy <= 3; ++dy) {
                int yy = std::clamp(y + dy, 0, h - 1);
                for (int dx = -3; dx <= 3; ++dx) {
                    int xx = std::clamp(x + dx, 0, w - 1);
                    acc += kernel[(dy + 3) * 7 + (dx + 3)] * err_dep[size_t(yy) * w + xx];
                }
            }
            ea[size_t(y) * w + x] = acc;
        }

    double sum_ew_fg = 0.0, sum_ew_bg = 0.0;
    static const double decay = std::log(0.5) / 5.0;
    for (int64_t i = 0; i < n; ++i) {
        if (g.v[i] > 0.5) {
            double e = ea[i] < err[i] ? ea[i] : err[i];
            sum_ew_fg += e;  // importance weight is 1 on the foreground
        } else {
            double b = 2.0 - std::exp(decay * std::sqrt(d2[i]));
            sum_ew_bg += err[i] * b;
        }
    }

    double tpw = static_cast<double>(n_fg) - sum_ew_fg;
    double fpw = sum_ew_bg;
    double recall = 1.0 - sum_ew_fg / static_cast<double>(n_fg);
    double precision = (tpw + fpw) == 0.0 ? 0.0 : tpw / (tpw + fpw);
    double den = beta2 * precision + recall;
    if (den == 0.0) return 0.0;
    return (1.0 + beta2) * precision * recall / den;
}

struct ImageMetrics {
    double mae = 0.0;
    double s = 0.0;
    double e_mean = 0.0;
    double e_adaptive = 0.0;
    double fw = 0.0;
    bool empty_gt = false;
};

inline ImageMetrics evaluate_pair(const img::GrayF& s, const img::GrayF& g) {
    ImageMetrics m;
    m.mae = mae(s, g);
    m.s = s_measure(s, g);
    EMeasureResult e = e_measure(s, g);
    m.e_mean = e.mean_thresholds;
    m.e_adaptive = e.adaptive;
    m.fw = weighted_f(s, g, 1.0, &m.empty_gt);
    return m;
}

}  // namespace unisod::metrics
