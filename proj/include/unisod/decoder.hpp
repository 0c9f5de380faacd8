#pragma once

#include <string>

#include "unisod/ops.hpp"
#include "unisod/params.hpp"

// Top-down decoder. Each transformed level is first projected to a common
// width, then aggregated coarse-to-fine with x2 bilinear upsampling; the
// level-1 feature joins at the end for detail before the final x4 upsampling
// and sigmoid:
//
//   fs4 = relu(conv(up2(proj4(f4))))
//   fs3 = relu(conv(up2(proj3(f3) + fs4)))
//   fs2 = relu(conv(up2(proj2(f2) + fs3)))
//   S   = sigmoid(conv_out(up4(relu(conv_fuse(fs2 + proj1(f1))))))

namespace unisod {

struct DecoderConfig {
    int width = 64;
    std::array<int, 4> channels{16, 32, 64, 128};  // pyramid widths feeding the projections
};

// Spatial extents of the intermediate maps, for stride auditing in tests.
struct DecoderTrace {
    int fs4_h = 0, fs4_w = 0;
    int fs3_h = 0, fs3_w = 0;
    int fs2_h = 0, fs2_w = 0;
    int out_h = 0, out_w = 0;
};

inline void decoder_param_plan(const DecoderConfig& cfg, std::vector<nn::ParamSpec>& out) {
    using nn::InitKind;
    auto conv = [&out](const std::string& name, int co, int ci) {
        out.push_back({name + ".weight", {co, ci, 3, 3}, InitKind::fan_in_uniform});
        out.push_back({name + ".bias", {co}, InitKind::zeros});
    };
    for (int level = 1; level <= 4; ++level)
        conv("decoder.proj" + std::to_string(level), cfg.width, cfg.channels[level - 1]);
    conv("decoder.conv4", cfg.width, cfg.width);
    conv("decoder.conv3", cfg.width, cfg.width);
    conv("decoder.conv2", cfg.width, cfg.width);
    conv("decoder.fuse", cfg.width, cfg.width);
    conv("decoder.out", 1, cfg.width);
}

// x2/x4 bilinear upsampling used throughout the decoder.
inline nn::Tensor& upsample(nn::Graph& g, const nn::Tensor& x, int factor) {
    return nn::upsample_bilinear(g, x, factor);
}

inline nn::Tensor& decode(nn::Graph& g, const nn::ParamStore& ps, const DecoderConfig& cfg,
                          const nn::Tensor& f2, const nn::Tensor& f3, const nn::Tensor& f4,
                          const nn::Tensor& f1, DecoderTrace* trace = nullptr) {
    require(f1.dim(0) == cfg.channels[0] && f2.dim(0) == cfg.channels[1] &&
                f3.dim(0) == cfg.channels[2] && f4.dim(0) == cfg.channels[3],
            "decode: level widths do not match the decoder config");
    auto conv = [&](const std::string& name, const nn::Tensor& x) -> nn::Tensor& {
        return nn::conv2d(g, x, ps.at(name + ".weight"), &ps.at(name + ".bias"));
    };

    nn::Tensor& fs4 = nn::relu(g, conv("decoder.conv4", upsample(g, conv("decoder.proj4", f4), 2)));
    nn::Tensor& sum3 = nn::add(g, conv("decoder.proj3", f3), fs4);
    nn::Tensor& fs3 = nn::relu(g, conv("decoder.conv3", upsample(g, sum3, 2)));
    nn::Tensor& sum2 = nn::add(g, conv("decoder.proj2", f2), fs3);
    nn::Tensor& fs2 = nn::relu(g, conv("decoder.conv2", upsample(g, sum2, 2)));

    nn::Tensor& detail = nn::add(g, fs2, conv("decoder.proj1", f1));
    nn::Tensor& fused = nn::relu(g, conv("decoder.fuse", detail));
    nn::Tensor& smap = nn::sigmoid(g, conv("decoder.out", upsample(g, fused, 4)));

    if (trace) {
        trace->fs4_h = fs4.dim(1);
        trace->fs4_w = fs4.dim(2);
        trace->fs3_h = fs3.dim(1);
        trace->fs3_w = fs3.dim(2);
        trace->fs2_h = fs2.dim(1);
        trace->fs2_w = fs2.dim(2);
        trace->out_h = smap.dim(1);
        trace->out_w = smap.dim(2);
    }
    return smap;
}

}  // namespace unisod
