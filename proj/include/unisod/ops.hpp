#pragma once

#include <algorithm>
#include <cmath>
#include <string>

#include "unisod/tensor.hpp"

// Differentiable ops over Graph/Tensor. Every op runs single-threaded with a
// fixed accumulation order so repeated runs are bitwise identical.

namespace unisod::nn {

inline void check_chw(const Tensor& x, const char* who) {
    require(x.ndim() == 3, std::string(who) + ": expected a C,H,W tensor");
}

// --- elementwise -----------------------------------------------------------

inline Tensor& add(Graph& g, const Tensor& a, const Tensor& b) {
    require(a.same_shape(b), "add: shape mismatch");
    Tensor& out = g.make(a.shape, a.requires_grad || b.requires_grad);
    for (size_t i = 0; i < out.v.size(); ++i) out.v[i] = a.v[i] + b.v[i];
    if (out.requires_grad) {
        Tensor *pa = const_cast<Tensor*>(&a), *pb = const_cast<Tensor*>(&b), *po = &out;
        g.record([pa, pb, po] {
            if (pa->requires_grad)
                for (size_t i = 0; i < po->g.size(); ++i) pa->g[i] += po->g[i];
            if (pb->requires_grad)
                for (size_t i = 0; i < po->g.size(); ++i) pb->g[i] += po->g[i];
        });
    }
    return out;
}

inline Tensor& mul(Graph& g, const Tensor& a, const Tensor& b) {
    require(a.same_shape(b), "mul: shape mismatch");
    Tensor& out = g.make(a.shape, a.requires_grad || b.requires_grad);
    for (size_t i = 0; i < out.v.size(); ++i) out.v[i] = a.v[i] * b.v[i];
    if (out.requires_grad) {
        Tensor *pa = const_cast<Tensor*>(&a), *pb = const_cast<Tensor*>(&b), *po = &out;
        g.record([pa, pb, po] {
            if (pa->requires_grad)
                for (size_t i = 0; i < po->g.size(); ++i) pa->g[i] += po->g[i] * pb->v[i];
            if (pb->requires_grad)
                for (size_t i = 0; i < po->g.size(); ++i) pb->g[i] += po->g[i] * pa->v[i];
        });
    }
    return out;
}

inline Tensor& scale(Graph& g, const Tensor& a, double c) {
    Tensor& out = g.make(a.shape, a.requires_grad);
    for (size_t i = 0; i < out.v.size(); ++i) out.v[i] = a.v[i] * c;
    if (out.requires_grad) {
        Tensor* pa = const_cast<Tensor*>(&a);
        Tensor* po = &out;
        g.record([pa, po, c] {
            for (size_t i = 0; i < po->g.size(); ++i) pa->g[i] += po->g[i] * c;
        });
    }
    return out;
}

inline Tensor& relu(Graph& g, const Tensor& a) {
    Tensor& out = g.make(a.shape, a.requires_grad);
    for (size_t i = 0; i < out.v.size(); ++i) out.v[i] = a.v[i] > 0.0 ? a.v[i] : 0.0;
    if (out.requires_grad) {
        Tensor* pa = const_cast<Tensor*>(&a);
        Tensor* po = &out;
        g.record([pa, po] {
            for (size_t i = 0; i < po->g.size(); ++i)
                if (pa->v[i] > 0.0) pa->g[i] += po->g[i];
        });
    }
    return out;
}

inline Tensor& sigmoid(Graph& g, const Tensor& a) {
    Tensor& out = g.make(a.shape, a.requires_grad);
    for (size_t i = 0; i < out.v.size(); ++i) out.v[i] = 1.0 / (1.0 + std::exp(-a.v[i]));
    if (out.requires_grad) {
        Tensor* pa = const_cast<Tensor*>(&a);
        Tensor* po = &out;
        g.record([pa, po] {
            for (size_t i = 0; i < po->g.size(); ++i)
                pa->g[i] += po->g[i] * po->v[i] * (1.0 - po->v[i]);
        });
    }
    return out;
}

inline Tensor& gelu(Graph& g, const Tensor& a) {
    static constexpr double inv_sqrt2 = 0.7071067811865475244;
    static constexpr double inv_sqrt2pi = 0.3989422804014326779;
    Tensor& out = g.make(a.shape, a.requires_grad);
    for (size_t i = 0; i < out.v.size(); ++i)
        out.v[i] = 0.5 * a.v[i] * (1.0 + std::erf(a.v[i] * inv_sqrt2));
    if (out.requires_grad) {
        Tensor* pa = const_cast<Tensor*>(&a);
        Tensor* po = &out;
        g.record([pa, po] {
            for (size_t i = 0; i < po->g.size(); ++i) {
                double x = pa->v[i];
                double cdf = 0.5 * (1.0 + std::erf(x * inv_sqrt2));
                double pdf = inv_sqrt2pi * std::exp(-0.5 * x * x);
                pa->g[i] += po->g[i] * (cdf + x * pdf);
            }
        });
    }
    return out;
}

// --- convolution ------------------------------------------------------------

// x: {Ci,H,W}, w: {Co,Ci,k,k}, b: {Co} (optional). The inner accumulation
// order is (ci, ky, kx) ascending; tests that compare against straight-line
// re-implementations rely on this order for bit-exact agreement.
inline Tensor& conv2d(Graph& g, const Tensor& x, const Tensor& w, const Tensor* b,
                      int stride = 1, int pad = 1) {
    check_chw(x, "conv2d");
    require(w.ndim() == 4, "conv2d: weight must be Co,Ci,k,k");
    const int ci = x.dim(0), h = x.dim(1), wd = x.dim(2);
    const int co = w.dim(0), k = w.dim(2);
    require(w.dim(1) == ci && w.dim(3) == k, "conv2d: weight/input channel mismatch");
    if (b) require(b->ndim() == 1 && b->dim(0) == co, "conv2d: bias shape mismatch");
    const int oh = (h + 2 * pad - k) / stride + 1;
    const int ow = (wd + 2 * pad - k) / stride + 1;

    bool rg = x.requires_grad || w.requires_grad || (b && b->requires_grad);
    Tensor& out = g.make({co, oh, ow}, rg);

    for (int oc = 0; oc < co; ++oc) {
        for (int oy = 0; oy < oh; ++oy) {
            for (int ox = 0; ox < ow; ++ox) {
                double acc = b ? b->v[oc] : 0.0;
                for (int c = 0; c < ci; ++c) {
                    for (int ky = 0; ky < k; ++ky) {
                        int iy = oy * stride - pad + ky;
                        if (iy < 0 || iy >= h) continue;
                        for (int kx = 0; kx < k; ++kx) {
                            int ix = ox * stride - pad + kx;
                            if (ix < 0 || ix >= wd) continue;
                            acc += w.v[((oc * ci + c) * k + ky) * k + kx] *
                                   x.v[(c * h + iy) * wd + ix];
                        }
                    }
                }
                out.v[(oc * oh + oy) * ow + ox] = acc;
            }
        }
    }

    if (rg) {
        Tensor* px = const_cast<Tensor*>(&x);
        Tensor* pw = const_cast<Tensor*>(&w);
        Tensor* pb = const_cast<Tensor*>(b);
        Tensor* po = &out;
        g.record([px, pw, pb, po, ci, h, wd, co, k, oh, ow, stride, pad] {
            for (int oc = 0; oc < co; ++oc) {
                for (int oy = 0; oy < oh; ++oy) {
                    for (int ox = 0; ox < ow; ++ox) {
                        double go = po->g[(oc * oh + oy) * ow + ox];
                        if (go == 0.0) continue;
                        if (pb && pb->requires_grad) pb->g[oc] += go;
                        for (int c = 0; c < ci; ++c) {
                            for (int ky = 0; ky < k; ++ky) {
                                int iy = oy * stride - pad + ky;
                                if (iy < 0 || iy >= h) continue;
                                for (int kx = 0; kx < k; ++kx) {
                                    int ix = ox * stride - pad + kx;
                                    if (ix < 0 || ix >= wd) continue;
                                    size_t wi = ((oc * ci + c) * k + ky) * k + kx;
                                    size_t xi = (c * h + iy) * wd + ix;
                                    if (pw->requires_grad) pw->g[wi] += go * px->v[xi];
                                    if (px->requires_grad) px->g[xi] += go * pw->v[wi];
                                }
                            }
                        }
                    }
                }
            }
        });
    }
    return out;
}

// --- matrix ops -------------------------------------------------------------

inline Tensor& matmul(Graph& g, const Tensor& a, const Tensor& b) {
    require(a.ndim() == 2 && b.ndim() == 2 && a.dim(1) == b.dim(0), "matmul: shape mismatch");
    const int m = a.dim(0), kk = a.dim(1), n = b.dim(1);
    Tensor& out = g.make({m, n}, a.requires_grad || b.requires_grad);
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j) {
            double acc = 0.0;
            for (int t = 0; t < kk; ++t) acc += a.v[i * kk + t] * b.v[t * n + j];
            out.v[i * n + j] = acc;
        }
    if (out.requires_grad) {
        Tensor* pa = const_cast<Tensor*>(&a);
        Tensor* pb = const_cast<Tensor*>(&b);
        Tensor* po = &out;
        g.record([pa, pb, po, m, kk, n] {
            if (pa->requires_grad)
                for (int i = 0; i < m; ++i)
                    for (int t = 0; t < kk; ++t) {
                        double acc = 0.0;
                        for (int j = 0; j < n; ++j) acc += po->g[i * n + j] * pb->v[t * n + j];
                        pa->g[i * kk + t] += acc;
                    }
            if (pb->requires_grad)
                for (int t = 0; t < kk; ++t)
                    for (int j = 0; j < n; ++j) {
                        double acc = 0.0;
                        for (int i = 0; i < m; ++i) acc += pa->v[i * kk + t] * po->g[i * n + j];
                        pb->g[t * n + j] += acc;
                    }
        });
    }
    return out;
}

// a: {M,K}, b: {N,K}; returns a * b^T, shape {M,N}.
inline Tensor& matmul_nt(Graph& g, const Tensor& a, const Tensor& b) {
    require(a.ndim() == 2 && b.ndim() == 2 && a.dim(1) == b.dim(1), "matmul_nt: shape mismatch");
    const int m = a.dim(0), kk = a.dim(1), n = b.dim(0);
    Tensor& out = g.make({m, n}, a.requires_grad || b.requires_grad);
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j) {
            double acc = 0.0;
            for (int t = 0; t < kk; ++t) acc += a.v[i * kk + t] * b.v[j * kk + t];
            out.v[i * n + j] = acc;
        }
    if (out.requires_grad) {
        Tensor* pa = const_cast<Tensor*>(&a);
        Tensor* pb = const_cast<Tensor*>(&b);
        Tensor* po = &out;
        g.record([pa, pb, po, m, kk, n] {
            if (pa->requires_grad)
                for (int i = 0; i < m; ++i)
                    for (int t = 0; t < kk; ++t) {
                        double acc = 0.0;
                        for (int j = 0; j < n; ++j) acc += po->g[i * n + j] * pb->v[j * kk + t];
                        pa->g[i * kk + t] += acc;
                    }
            if (pb->requires_grad)
                for (int j = 0; j < n; ++j)
                    for (int t = 0; t < kk; ++t) {
                        double acc = 0.0;
                        for (int i = 0; i < m; ++i) acc += po->g[i * n + j] * pa->v[i * kk + t];
                        pb->g[j * kk + t] += acc;
                    }
        });
    }
    return out;
}

// x: {N,Din}, w: {Dout,Din}, b: {Dout}; returns x * w^T + b.
inline Tensor& linear(Graph& g, const Tensor& x, const Tensor& w, const Tensor& b) {
    require(x.ndim() == 2 && w.ndim() == 2 && x.dim(1) == w.dim(1), "linear: shape mismatch");
    require(b.ndim() == 1 && b.dim(0) == w.dim(0), "linear: bias shape mismatch");
    const int n = x.dim(0), din = x.dim(1), dout = w.dim(0);
    bool rg = x.requires_grad || w.requires_grad || b.requires_grad;
    Tensor& out = g.make({n, dout}, rg);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < dout; ++j) {
            double acc = b.v[j];
            for (int t = 0; t < din; ++t) acc += x.v[i * din + t] * w.v[j * din + t];
            out.v[i * dout + j] = acc;
        }
    if (rg) {
        Tensor* px = const_cast<Tensor*>(&x);
        Tensor* pw = const_cast<Tensor*>(&w);
        Tensor* pb = const_cast<Tensor*>(&b);
        Tensor* po = &out;
        g.record([px, pw, pb, po, n, din, dout] {
            if (pb->requires_grad)
                for (int j = 0; j < dout; ++j) {
                    double acc = 0.0;
                    for (int i = 0; i < n; ++i) acc += po->g[i * dout + j];
                    pb->g[j] += acc;
                }
            if (pw->requires_grad)
                for (int j = 0; j < dout; ++j)
                    for (int t = 0; t < din; ++t) {
                        double acc = 0.0;
                        for (int i = 0; i < n; ++i) acc += po->g[i * dout + j] * px->v[i * din + t];
                        pw->g[j * din + t] += acc;
                    }
            if (px->requires_grad)
                for (int i = 0; i < n; ++i)
                    for (int t = 0; t < din; ++t) {
                        double acc = 0.0;
                        for (int j = 0; j < dout; ++j) acc += po->g[i * dout + j] * pw->v[j * din + t];
                        px->g[i * din + t] += acc;
                    }
        });
    }
    return out;
}

// --- normalization / softmax -------------------------------------------------

inline Tensor& layer_norm(Graph& g, const Tensor& x, const Tensor& gamma, const Tensor& beta,
                          double eps = 1e-5) {
    require(x.ndim() == 2, "layer_norm: expected N,D");
    const int n = x.dim(0), d = x.dim(1);
    require(gamma.ndim() == 1 && gamma.dim(0) == d && beta.ndim() == 1 && beta.dim(0) == d,
            "layer_norm: affine shape mismatch");
    bool rg = x.requires_grad || gamma.requires_grad || beta.requires_grad;
    Tensor& out = g.make({n, d}, rg);
    std::vector<double> inv_std(n), mean(n);
    for (int i = 0; i < n; ++i) {
        double mu = 0.0;
        for (int j = 0; j < d; ++j) mu += x.v[i * d + j];
        mu /= d;
        double var = 0.0;
        for (int j = 0; j < d; ++j) {
            double c = x.v[i * d + j] - mu;
            var += c * c;
        }
        var /= d;
        double is = 1.0 / std::sqrt(var + eps);
        mean[i] = mu;
        inv_std[i] = is;
        for (int j = 0; j < d; ++j)
            out.v[i * d + j] = (x.v[i * d + j] - mu) * is * gamma.v[j] + beta.v[j];
    }
    if (rg) {
        Tensor* px = const_cast<Tensor*>(&x);
        Tensor* pg = const_cast<Tensor*>(&gamma);
        Tensor* pbeta = const_cast<Tensor*>(&beta);
        Tensor* po = &out;
        g.record([px, pg, pbeta, po, n, d, mean, inv_std] {
            for (int i = 0; i < n; ++i) {
                double sum_dyg = 0.0, sum_dyg_xhat = 0.0;
                for (int j = 0; j < d; ++j) {
                    double xhat = (px->v[i * d + j] - mean[i]) * inv_std[i];
                    double dyg = po->g[i * d + j] * pg->v[j];
                    sum_dyg += dyg;
                    sum_dyg_xhat += dyg * xhat;
                    if (pg->requires_grad) pg->g[j] += po->g[i * d + j] * xhat;
                    if (pbeta->requires_grad) pbeta->g[j] += po->g[i * d + j];
                }
                if (px->requires_grad) {
                    for (int j = 0; j < d; ++j) {
                        double xhat = (px->v[i * d + j] - mean[i]) * inv_std[i];
                        double dyg = po->g[i * d + j] * pg->v[j];
                        px->g[i * d + j] +=
                            inv_std[i] * (dyg - sum_dyg / d - xhat * sum_dyg_xhat / d);
                    }
                }
            }
        });
    }
    return out;
}

inline Tensor& softmax_rows(Graph& g, const Tensor& x) {
    require(x.ndim() == 2, "softmax_rows: expected N,D");
    const int n = x.dim(0), d = x.dim(1);
    Tensor& out = g.make({n, d}, x.requires_grad);
    for (int i = 0; i < n; ++i) {
        double mx = x.v[i * d];
        for (int j = 1; j < d; ++j) mx = std::max(mx, x.v[i * d + j]);
        double z = 0.0;
        for (int j = 0; j < d; ++j) {
            double e = std::exp(x.v[i * d + j] - mx);
            out.v[i * d + j] = e;
            z += e;
        }
        for (int j = 0; j < d; ++j) out.v[i * d + j] /= z;
    }
    if (out.requires_grad) {
        Tensor* px = const_cast<Tensor*>(&x);
        Tensor* po = &out;
        g.record([px, po, n, d] {
            for (int i = 0; i < n; ++i) {
                double dot = 0.0;
                for (int j = 0; j < d; ++j) dot += po->g[i * d + j] * po->v[i * d + j];
                for (int j = 0; j < d; ++j)
                    px->g[i * d + j] += po->v[i * d + j] * (po->g[i * d + j] - dot);
            }
        });
    }
    return out;
}

// --- reshaping / slicing ------------------------------------------------------

// {C,H,W} -> {H*W, C} token sequence (row-major spatial order).
inline Tensor& chw_to_tokens(Graph& g, const Tensor& x) {
    check_chw(x, "chw_to_tokens");
    const int c = x.dim(0), h = x.dim(1), w = x.dim(2);
    Tensor& out = g.make({h * w, c}, x.requires_grad);
    for (int ch = 0; ch < c; ++ch)
        for (int p = 0; p < h * w; ++p) out.v[p * c + ch] = x.v[ch * h * w + p];
    if (out.requires_grad) {
        Tensor* px = const_cast<Tensor*>(&x);
        Tensor* po = &out;
        g.record([px, po, c, h, w] {
            for (int ch = 0; ch < c; ++ch)
                for (int p = 0; p < h * w; ++p) px->g[ch * h * w + p] += po->g[p * c + ch];
        });
    }
    return out;
}

inline Tensor& tokens_to_chw(Graph& g, const Tensor& t, int c, int h, int w) {
    require(t.ndim() == 2 && t.dim(0) == h * w && t.dim(1) == c,
            "tokens_to_chw: token count/shape mismatch");
    Tensor& out = g.make({c, h, w}, t.requires_grad);
    for (int ch = 0; ch < c; ++ch)
        for (int p = 0; p < h * w; ++p) out.v[ch * h * w + p] = t.v[p * c + ch];
    if (out.requires_grad) {
        Tensor* pt = const_cast<Tensor*>(&t);
        Tensor* po = &out;
        g.record([pt, po, c, h, w] {
            for (int ch = 0; ch < c; ++ch)
                for (int p = 0; p < h * w; ++p) pt->g[p * c + ch] += po->g[ch * h * w + p];
        });
    }
    return out;
}

inline Tensor& slice_rows(Graph& g, const Tensor& x, int r0, int r1) {
    require(x.ndim() == 2 && 0 <= r0 && r0 < r1 && r1 <= x.dim(0), "slice_rows: bad range");
    const int d = x.dim(1);
    Tensor& out = g.make({r1 - r0, d}, x.requires_grad);
    std::copy(x.v.begin() + r0 * d, x.v.begin() + r1 * d, out.v.begin());
    if (out.requires_grad) {
        Tensor* px = const_cast<Tensor*>(&x);
        Tensor* po = &out;
        g.record([px, po, r0, d] {
            for (size_t i = 0; i < po->g.size(); ++i) px->g[r0 * d + i] += po->g[i];
        });
    }
    return out;
}

inline Tensor& concat_rows(Graph& g, const Tensor& a, const Tensor& b) {
    require(a.ndim() == 2 && b.ndim() == 2 && a.dim(1) == b.dim(1), "concat_rows: width mismatch");
    const int d = a.dim(1);
    Tensor& out = g.make({a.dim(0) + b.dim(0), d}, a.requires_grad || b.requires_grad);
    std::copy(a.v.begin(), a.v.end(), out.v.begin());
    std::copy(b.v.begin(), b.v.end(), out.v.begin() + a.v.size());
    if (out.requires_grad) {
        Tensor* pa = const_cast<Tensor*>(&a);
        Tensor* pb = const_cast<Tensor*>(&b);
        Tensor* po = &out;
        g.record([pa, pb, po] {
            if (pa->requires_grad)
                for (size_t i = 0; i < pa->g.size(); ++i) pa->g[i] += po->g[i];
            if (pb->requires_grad)
                for (size_t i = 0; i < pb->g.size(); ++i) pb->g[i] += po->g[pa->v.size() + i];
        });
    }
    return out;
}

inline Tensor& slice_cols(Graph& g, const Tensor& x, int c0, int c1) {
    require(x.ndim() == 2 && 0 <= c0 && c0 < c1 && c1 <= x.dim(1), "slice_cols: bad range");
    const int n = x.dim(0), d = x.dim(1), w = c1 - c0;
    Tensor& out = g.make({n, w}, x.requires_grad);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < w; ++j) out.v[i * w + j] = x.v[i * d + c0 + j];
    if (out.requires_grad) {
        Tensor* px = const_cast<Tensor*>(&x);
        Tensor* po = &out;
        g.record([px, po, n, d, w, c0] {
            for (int i = 0; i < n; ++i)
                for (int j = 0; j < w; ++j) px->g[i * d + c0 + j] += po->g[i * w + j];
        });
    }
    return out;
}

inline Tensor& concat_cols(Graph& g, const std::vector<const Tensor*>& parts) {
    require(!parts.empty(), "concat_cols: empty input");
    const int n = parts[0]->dim(0);
    int d = 0;
    bool rg = false;
    for (const Tensor* p : parts) {
        require(p->ndim() == 2 && p->dim(0) == n, "concat_cols: row mismatch");
        d += p->dim(1);
        rg = rg || p->requires_grad;
    }
    Tensor& out = g.make({n, d}, rg);
    int off = 0;
    for (const Tensor* p : parts) {
        int w = p->dim(1);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < w; ++j) out.v[i * d + off + j] = p->v[i * w + j];
        off += w;
    }
    if (rg) {
        std::vector<Tensor*> ps;
        ps.reserve(parts.size());
        for (const Tensor* p : parts) ps.push_back(const_cast<Tensor*>(p));
        Tensor* po = &out;
        g.record([ps, po, n, d] {
            int off = 0;
            for (Tensor* p : ps) {
                int w = p->dim(1);
                if (p->requires_grad)
                    for (int i = 0; i < n; ++i)
                        for (int j = 0; j < w; ++j) p->g[i * w + j] += po->g[i * d + off + j];
                off += w;
            }
        });
    }
    return out;
}

// Spatial mean of a {C,H,W} map as a single {1,C} token.
inline Tensor& spatial_mean_token(Graph& g, const Tensor& x) {
    check_chw(x, "spatial_mean_token");
    const int c = x.dim(0), hw = x.dim(1) * x.dim(2);
    Tensor& out = g.make({1, c}, x.requires_grad);
    for (int ch = 0; ch < c; ++ch) {
        double acc = 0.0;
        for (int p = 0; p < hw; ++p) acc += x.v[ch * hw + p];
        out.v[ch] = acc / hw;
    }
    if (out.requires_grad) {
        Tensor* px = const_cast<Tensor*>(&x);
        Tensor* po = &out;
        g.record([px, po, c, hw] {
            for (int ch = 0; ch < c; ++ch)
                for (int p = 0; p < hw; ++p) px->g[ch * hw + p] += po->g[ch] / hw;
        });
    }
    return out;
}

// --- bilinear upsampling -------------------------------------------------------

// Half-pixel-center bilinear interpolation with edge clamping. A constant map
// upsamples to the same constant.
inline Tensor& upsample_bilinear(Graph& g, const Tensor& x, int factor) {
    check_chw(x, "upsample_bilinear");
    require(factor == 2 || factor == 4, "upsample_bilinear: factor must be 2 or 4");
    const int c = x.dim(0), h = x.dim(1), w = x.dim(2);
    const int oh = h * factor, ow = w * factor;
    Tensor& out = g.make({c, oh, ow}, x.requires_grad);

    struct Tap {
        int i0, i1;
        double w0, w1;
    };
    auto taps = [](int o, int n, int f) {
        double s = (o + 0.5) / f - 0.5;
        double fl = std::floor(s);
        double frac = s - fl;
        int i0 = static_cast<int>(fl);
        int i1 = i0 + 1;
        i0 = std::clamp(i0, 0, n - 1);
        i1 = std::clamp(i1, 0, n - 1);
        return Tap{i0, i1, 1.0 - frac, frac};
    };
    std::vector<Tap> ty(oh), tx(ow);
    for (int oy = 0; oy < oh; ++oy) ty[oy] = taps(oy, h, factor);
    for (int ox = 0; ox < ow; ++ox) tx[ox] = taps(ox, w, factor);

    for (int ch = 0; ch < c; ++ch)
        for (int oy = 0; oy < oh; ++oy)
            for (int ox = 0; ox < ow; ++ox) {
                const Tap &a = ty[oy], &b = tx[ox];
                double val = a.w0 * (b.w0 * x.v[(ch * h + a.i0) * w + b.i0] +
                                     b.w1 * x.v[(ch * h + a.i0) * w + b.i1]) +
                             a.w1 * (b.w0 * x.v[(ch * h + a.i1) * w + b.i0] +
                                     b.w1 * x.v[(ch * h + a.i1) * w + b.i1]);
                out.v[(ch * oh + oy) * ow + ox] = val;
            }

    if (out.requires_grad) {
        Tensor* px = const_cast<Tensor*>(&x);
        Tensor* po = &out;
        g.record([px, po, c, h, w, oh, ow, ty, tx] {
            for (int ch = 0; ch < c; ++ch)
                for (int oy = 0; oy < oh; ++oy)
                    for (int ox = 0; ox < ow; ++ox) {
                        double go = po->g[(ch * oh + oy) * ow + ox];
                        if (go == 0.0) continue;
                        const Tap &a = ty[oy], &b = tx[ox];
                        px->g[(ch * h + a.i0) * w + b.i0] += go * a.w0 * b.w0;
                        px->g[(ch * h + a.i0) * w + b.i1] += go * a.w0 * b.w1;
                        px->g[(ch * h + a.i1) * w + b.i0] += go * a.w1 * b.w0;
                        px->g[(ch * h + a.i1) * w + b.i1] += go * a.w1 * b.w1;
                    }
        });
    }
    return out;
}

}  // namespace unisod::nn
