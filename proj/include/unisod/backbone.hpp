#pragma once

#include <array>

#include "unisod/ops.hpp"
#include "unisod/params.hpp"

// Convolutional pyramid encoder: four stages at strides 4/8/16/32. Stage 1
// reaches stride 4 through two stride-2 convolutions; every stage ends in
// residual blocks. A heavier pretrained encoder can replace this through the
// external-variant hook in model.hpp without touching anything downstream.

namespace unisod {

struct BackboneConfig {
    std::array<int, 4> channels{16, 32, 64, 128};
    std::array<int, 4> depths{1, 1, 1, 1};  // residual blocks per stage
};

// levels[i] has spatial size (H/s, W/s) with s = 4,8,16,32 and channels[i] maps.
struct FeaturePyramid {
    std::array<nn::Tensor*, 4> level{};
};

inline void backbone_param_plan(const BackboneConfig& cfg, std::vector<nn::ParamSpec>& out) {
    using nn::InitKind;
    auto conv = [&out](const std::string& name, int co, int ci) {
        out.push_back({name + ".weight", {co, ci, 3, 3}, InitKind::fan_in_uniform});
        out.push_back({name + ".bias", {co}, InitKind::zeros});
    };
    for (int s = 0; s < 4; ++s) {
        require(cfg.channels[s] >= 1, "backbone: channels must be >= 1");
        std::string stage = "backbone.stage" + std::to_string(s + 1);
        if (s == 0) {
            conv(stage + ".down1", cfg.channels[0], 3);
            conv(stage + ".down2", cfg.channels[0], cfg.channels[0]);
        } else {
            conv(stage + ".down", cfg.channels[s], cfg.channels[s - 1]);
        }
        for (int r = 0; r < cfg.depths[s]; ++r) {
            std::string res = stage + ".res" + std::to_string(r + 1);
            conv(res + ".conv1", cfg.channels[s], cfg.channels[s]);
            conv(res + ".conv2", cfg.channels[s], cfg.channels[s]);
        }
    }
}

namespace detail {

inline nn::Tensor& conv_block(nn::Graph& g, const nn::ParamStore& ps, const std::string& name,
                              const nn::Tensor& x, int stride) {
    return nn::conv2d(g, x, ps.at(name + ".weight"), &ps.at(name + ".bias"), stride, 1);
}

inline nn::Tensor& residual_block(nn::Graph& g, const nn::ParamStore& ps, const std::string& name,
                                  const nn::Tensor& x) {
    nn::Tensor& a = nn::relu(g, conv_block(g, ps, name + ".conv1", x, 1));
    nn::Tensor& b = conv_block(g, ps, name + ".conv2", a, 1);
    return nn::relu(g, nn::add(g, x, b));
}

}  // namespace detail

inline FeaturePyramid backbone_extract(nn::Graph& g, const nn::ParamStore& ps,
                                       const BackboneConfig& cfg, const nn::Tensor& image) {
    require(image.ndim() == 3 && image.dim(0) == 3, "backbone_extract: expected a 3,H,W image");
    const int h = image.dim(1), w = image.dim(2);
    if (h % 32 != 0 || w % 32 != 0)
        throw ContractViolation("backbone_extract: input " + std::to_string(h) + "x" +
                                std::to_string(w) +
                                " not divisible by 32; pad to the next multiple of 32");

    FeaturePyramid pyr;
    const nn::Tensor* x = &image;
    for (int s = 0; s < 4; ++s) {
        std::string stage = "backbone.stage" + std::to_string(s + 1);
        nn::Tensor* y;
        if (s == 0) {
            nn::Tensor& d1 = nn::relu(g, detail::conv_block(g, ps, stage + ".down1", *x, 2));
            y = &nn::relu(g, detail::conv_block(g, ps, stage + ".down2", d1, 2));
        } else {
            y = &nn::relu(g, detail::conv_block(g, ps, stage + ".down", *x, 2));
        }
        for (int r = 0; r < cfg.depths[s]; ++r)
            y = &detail::residual_block(g, ps, stage + ".res" + std::to_string(r + 1), *y);
        pyr.level[s] = y;
        x = y;
    }
    return pyr;
}

// Both pyramids come from the one shared parameter set; identical inputs give
// identical pyramids, which is what the prompt-generation switching relies on.
inline std::pair<FeaturePyramid, FeaturePyramid> shared_extract(nn::Graph& g,
                                                                const nn::ParamStore& ps,
                                                                const BackboneConfig& cfg,
                                                                const nn::Tensor& rgb,
                                                                const nn::Tensor& aux) {
    require(rgb.same_shape(aux), "shared_extract: rgb/aux shape mismatch");
    return {backbone_extract(g, ps, cfg, rgb), backbone_extract(g, ps, cfg, aux)};
}

}  // namespace unisod
