#pragma once

#include <string>

#include "unisod/backbone.hpp"
#include "unisod/ops.hpp"
#include "unisod/params.hpp"

// Per-level token-space encoders TE2..TE4. Level 1 stays out of the
// transformer; its features pass through untouched. Each level has its own
// stack (widths differ) with L pre-norm layers and a learned, zero-initialized
// positional embedding, so an L=0 stack is exactly the identity.

namespace unisod {

struct TransformerConfig {
    int layers = 4;
    std::array<int, 4> channels{16, 32, 64, 128};
    int input_h = 384, input_w = 384;  // fixes the positional-embedding grids
};

enum class PromptMode { none, sum, concat };

inline int attention_heads(int width) {
    int h = std::max(1, width / 32);
    require(width % h == 0, "transformer: width " + std::to_string(width) +
                                " is not divisible into " + std::to_string(h) + " heads");
    return h;
}

inline void transformer_param_plan(const TransformerConfig& cfg, std::vector<nn::ParamSpec>& out) {
    using nn::InitKind;
    static constexpr int strides[4] = {4, 8, 16, 32};
    for (int level = 2; level <= 4; ++level) {
        int d = cfg.channels[level - 1];
        int tokens = (cfg.input_h / strides[level - 1]) * (cfg.input_w / strides[level - 1]);
        std::string te = "transformer.TE" + std::to_string(level);
        out.push_back({te + ".pos", {tokens, d}, InitKind::zeros});
        for (int l = 0; l < cfg.layers; ++l) {
            std::string ly = te + ".layer" + std::to_string(l);
            out.push_back({ly + ".ln1.gamma", {d}, InitKind::ones});
            out.push_back({ly + ".ln1.beta", {d}, InitKind::zeros});
            for (const char* m : {"wq", "wk", "wv", "wo"}) {
                out.push_back({ly + ".attn." + std::string(m) + ".weight",
                               {d, d},
                               InitKind::fan_in_uniform});
                out.push_back({ly + ".attn." + std::string(m) + ".bias", {d}, InitKind::zeros});
            }
            out.push_back({ly + ".ln2.gamma", {d}, InitKind::ones});
            out.push_back({ly + ".ln2.beta", {d}, InitKind::zeros});
            out.push_back({ly + ".ffn.w1.weight", {4 * d, d}, InitKind::fan_in_uniform});
            out.push_back({ly + ".ffn.w1.bias", {4 * d}, InitKind::zeros});
            out.push_back({ly + ".ffn.w2.weight", {d, 4 * d}, InitKind::fan_in_uniform});
            out.push_back({ly + ".ffn.w2.bias", {d}, InitKind::zeros});
        }
    }
}

namespace detail {

inline nn::Tensor& transformer_layer(nn::Graph& g, const nn::ParamStore& ps,
                                     const std::string& ly, const nn::Tensor& x) {
    const int d = x.dim(1);
    const int heads = attention_heads(d);
    const int hd = d / heads;

    nn::Tensor& a = nn::layer_norm(g, x, ps.at(ly + ".ln1.gamma"), ps.at(ly + ".ln1.beta"));
    nn::Tensor& q = nn::linear(g, a, ps.at(ly + ".attn.wq.weight"), ps.at(ly + ".attn.wq.bias"));
    nn::Tensor& k = nn::linear(g, a, ps.at(ly + ".attn.wk.weight"), ps.at(ly + ".attn.wk.bias"));
    nn::Tensor& v = nn::linear(g, a, ps.at(ly + ".attn.wv.weight"), ps.at(ly + ".attn.wv.bias"));

    std::vector<const nn::Tensor*> per_head;
    per_head.reserve(heads);
    for (int hh = 0; hh < heads; ++hh) {
        nn::Tensor& qh = nn::slice_cols(g, q, hh * hd, (hh + 1) * hd);
        nn::Tensor& kh = nn::slice_cols(g, k, hh * hd, (hh + 1) * hd);
        nn::Tensor& vh = nn::slice_cols(g, v, hh * hd, (hh + 1) * hd);
        nn::Tensor& scores = nn::scale(g, nn::matmul_nt(g, qh, kh), 1.0 / std::sqrt(double(hd)));
        nn::Tensor& attn = nn::softmax_rows(g, scores);
        per_head.push_back(&nn::matmul(g, attn, vh));
    }
    nn::Tensor& merged = heads == 1 ? const_cast<nn::Tensor&>(*per_head[0])
                                    : nn::concat_cols(g, per_head);
    nn::Tensor& proj =
        nn::linear(g, merged, ps.at(ly + ".attn.wo.weight"), ps.at(ly + ".attn.wo.bias"));
    nn::Tensor& x1 = nn::add(g, x, proj);

    nn::Tensor& b = nn::layer_norm(g, x1, ps.at(ly + ".ln2.gamma"), ps.at(ly + ".ln2.beta"));
    nn::Tensor& f1 = nn::gelu(g, nn::linear(g, b, ps.at(ly + ".ffn.w1.weight"),
                                            ps.at(ly + ".ffn.w1.bias")));
    nn::Tensor& f2 = nn::linear(g, f1, ps.at(ly + ".ffn.w2.weight"), ps.at(ly + ".ffn.w2.bias"));
    return nn::add(g, x1, f2);
}

inline nn::Tensor& run_stack(nn::Graph& g, const nn::ParamStore& ps, const TransformerConfig& cfg,
                             const nn::Tensor& tokens, int level) {
    const nn::Tensor* x = &tokens;
    std::string te = "transformer.TE" + std::to_string(level);
    for (int l = 0; l < cfg.layers; ++l)
        x = &transformer_layer(g, ps, te + ".layer" + std::to_string(l), *x);
    return const_cast<nn::Tensor&>(*x);
}

}  // namespace detail

// Per-level encoding: reshape(TE_i(flatten(f))). `prompt` is folded into the
// input space first: summed onto the feature map, or appended as one pooled
// token that is stripped again after the stack.
inline nn::Tensor& encode_level(nn::Graph& g, const nn::ParamStore& ps,
                                const TransformerConfig& cfg, const nn::Tensor& f, int level,
                                const nn::Tensor* prompt = nullptr,
                                PromptMode mode = PromptMode::none) {
    if (level < 2 || level > 4)
        throw ContractViolation("encode_level: level " + std::to_string(level) +
                                " is not fed into the transformer encoder");
    require(f.ndim() == 3, "encode_level: expected C,H,W");
    const int c = f.dim(0), h = f.dim(1), w = f.dim(2);
    require(c == cfg.channels[level - 1], "encode_level: channel/width mismatch");
    const nn::Tensor& pos = ps.at("transformer.TE" + std::to_string(level) + ".pos");
    require(pos.dim(0) == h * w, "encode_level: feature grid does not match this config");
    if (prompt) require(prompt->same_shape(f), "encode_level: prompt/feature shape mismatch");

    const nn::Tensor* fin = &f;
    if (prompt && mode == PromptMode::sum) fin = &nn::add(g, f, *prompt);

    nn::Tensor& tokens = nn::add(g, nn::chw_to_tokens(g, *fin), pos);
    const nn::Tensor* seq = &tokens;
    if (prompt && mode == PromptMode::concat)
        seq = &nn::concat_rows(g, tokens, nn::spatial_mean_token(g, *prompt));

    nn::Tensor& encoded = detail::run_stack(g, ps, cfg, *seq, level);
    const nn::Tensor* trimmed = &encoded;
    if (prompt && mode == PromptMode::concat) trimmed = &nn::slice_rows(g, encoded, 0, h * w);
    return nn::tokens_to_chw(g, *trimmed, c, h, w);
}

struct EncodedLevels {
    nn::Tensor* f1 = nullptr;  // pass-through, never touched by the stacks
    std::array<nn::Tensor*, 3> f = {};  // transformed levels 2..4
    nn::Tensor* at(int level) const { return level == 1 ? f1 : f[level - 2]; }
};

inline EncodedLevels encode_pyramid(nn::Graph& g, const nn::ParamStore& ps,
                                    const TransformerConfig& cfg, const FeaturePyramid& pyr,
                                    const std::array<nn::Tensor*, 4>* prompts = nullptr,
                                    PromptMode mode = PromptMode::sum) {
    EncodedLevels out;
    out.f1 = pyr.level[0];
    for (int level = 2; level <= 4; ++level) {
        const nn::Tensor* prompt = prompts ? (*prompts)[level - 1] : nullptr;
        out.f[level - 2] = &encode_level(g, ps, cfg, *pyr.level[level - 1], level, prompt,
                                         prompt ? mode : PromptMode::none);
    }
    return out;
}

}  // namespace unisod
