#pragma once

#include <string>

#include "unisod/backbone.hpp"
#include "unisod/ops.hpp"
#include "unisod/params.hpp"

// Switchable prompt generation. One block per pyramid level:
//
//   mask   = sigmoid(mask_conv(f_a))
//   prompt = out_conv(f_r * mask + f_a)
//
// There is no single-modal branch: feeding the same features for f_r and f_a
// reduces this to the single-modal refinement formula, so the structural
// switch is carried entirely by the inputs. out_conv starts at zero, which
// makes freshly attached prompts a no-op on the pre-trained model.

namespace unisod {

using PromptSet = std::array<nn::Tensor*, 4>;

inline void spg_param_plan(const std::array<int, 4>& channels, std::vector<nn::ParamSpec>& out) {
    using nn::InitKind;
    for (int level = 1; level <= 4; ++level) {
        int c = channels[level - 1];
        std::string base = "spg.level" + std::to_string(level);
        out.push_back({base + ".mask_conv.weight", {c, c, 3, 3}, InitKind::fan_in_uniform});
        out.push_back({base + ".mask_conv.bias", {c}, InitKind::zeros});
        out.push_back({base + ".out_conv.weight", {c, c, 3, 3}, InitKind::zeros});
        out.push_back({base + ".out_conv.bias", {c}, InitKind::zeros});
    }
}

// Closed-form weight count of one block: mask_conv + out_conv, each 9*C^2 + C.
inline int64_t spg_block_param_count(int64_t c) { return 2 * (9 * c * c + c); }

inline nn::Tensor& generate_prompt(nn::Graph& g, const nn::ParamStore& ps, int level,
                                   const nn::Tensor& f_r, const nn::Tensor& f_a) {
    require(level >= 1 && level <= 4, "generate_prompt: level out of range");
    require(f_r.same_shape(f_a), "generate_prompt: feature shape mismatch");
    std::string base = "spg.level" + std::to_string(level);
    nn::Tensor& mask = nn::sigmoid(
        g, nn::conv2d(g, f_a, ps.at(base + ".mask_conv.weight"), &ps.at(base + ".mask_conv.bias")));
    nn::Tensor& fused = nn::add(g, nn::mul(g, f_r, mask), f_a);
    return nn::conv2d(g, fused, ps.at(base + ".out_conv.weight"), &ps.at(base + ".out_conv.bias"));
}

inline PromptSet generate_all(nn::Graph& g, const nn::ParamStore& ps, const FeaturePyramid& pyr_r,
                              const FeaturePyramid& pyr_a) {
    PromptSet prompts{};
    for (int level = 1; level <= 4; ++level) {
        nn::Tensor* fr = pyr_r.level[level - 1];
        nn::Tensor* fa = pyr_a.level[level - 1];
        require(fr != nullptr && fa != nullptr, "generate_all: pyramid level count mismatch");
        prompts[level - 1] = &generate_prompt(g, ps, level, *fr, *fa);
    }
    return prompts;
}

}  // namespace unisod
