#include <gtest/gtest.h>

#include "support/testutil.hpp"
#include "unisod/decoder.hpp"

using namespace unisod;

namespace {

nn::ParamStore decoder_store(const DecoderConfig& cfg, uint64_t seed) {
    std::vector<nn::ParamSpec> plan;
    decoder_param_plan(cfg, plan);
    nn::ParamStore ps;
    Rng rng(seed);
    nn::init_params(ps, plan, rng);
    return ps;
}

struct PyramidInputs {
    nn::Tensor *f1, *f2, *f3, *f4;
};

PyramidInputs make_levels(nn::Graph& g, const std::array<int, 4>& ch, int input, Rng& rng,
                          double lo = -1.0, double hi = 1.0) {
    PyramidInputs p{};
    const int strides[4] = {4, 8, 16, 32};
    nn::Tensor* out[4];
    for (int i = 0; i < 4; ++i) {
        out[i] = &g.make({ch[i], input / strides[i], input / strides[i]}, false);
        for (double& v : out[i]->v) v = uniform(rng, lo, hi);
    }
    p.f1 = out[0];
    p.f2 = out[1];
    p.f3 = out[2];
    p.f4 = out[3];
    return p;
}

}  // namespace

TEST(Decoder, FullResolutionOutputAt384) {
    DecoderConfig cfg{8, {4, 8, 8, 8}};
    nn::ParamStore ps = decoder_store(cfg, 1);
    Rng rng(2);
    nn::Graph g;
    PyramidInputs p = make_levels(g, cfg.channels, 384, rng);
    nn::Tensor& s = decode(g, ps, cfg, *p.f2, *p.f3, *p.f4, *p.f1);
    EXPECT_EQ(s.dim(0), 1);
    EXPECT_EQ(s.dim(1), 384);
    EXPECT_EQ(s.dim(2), 384);
}

TEST(Decoder, ZeroFeaturesBiasFreeGiveHalfEverywhere) {
    DecoderConfig cfg{16, {8, 16, 32, 64}};
    nn::ParamStore ps = decoder_store(cfg, 3);
    for (auto& [name, t] : ps)
        if (name.find(".bias") != std::string::npos) std::fill(t.v.begin(), t.v.end(), 0.0);
    nn::Graph g;
    const int strides[4] = {4, 8, 16, 32};
    nn::Tensor* levels[4];
    for (int i = 0; i < 4; ++i)
        levels[i] = &g.make({cfg.channels[i], 64 / strides[i], 64 / strides[i]}, false);
    nn::Tensor& s = decode(g, ps, cfg, *levels[1], *levels[2], *levels[3], *levels[0]);
    for (double v : s.v) ASSERT_DOUBLE_EQ(v, 0.5);  // sigmoid(0)
}

TEST(Decoder, StrideChainOnToyRun) {
    DecoderConfig cfg{8, {4, 8, 8, 8}};
    nn::ParamStore ps = decoder_store(cfg, 4);
    Rng rng(5);
    nn::Graph g;
    PyramidInputs p = make_levels(g, cfg.channels, 64, rng);
    DecoderTrace trace;
    nn::Tensor& s = decode(g, ps, cfg, *p.f2, *p.f3, *p.f4, *p.f1, &trace);
    // 64-px input: stride 32 -> 16 -> 8 -> 4 -> x4 -> 1
    EXPECT_EQ(trace.fs4_h, 4);   // stride 16
    EXPECT_EQ(trace.fs3_h, 8);   // stride 8
    EXPECT_EQ(trace.fs2_h, 16);  // stride 4
    EXPECT_EQ(trace.out_h, 64);  // full resolution
    EXPECT_EQ(s.dim(1), 64);
}

TEST(Decoder, OutputStaysInUnitInterval) {
    DecoderConfig cfg{8, {4, 8, 8, 8}};
    nn::ParamStore ps = decoder_store(cfg, 6);
    Rng rng(7);
    for (int trial = 0; trial < 3; ++trial) {
        nn::Graph g;
        PyramidInputs p = make_levels(g, cfg.channels, 64, rng, -25.0, 25.0);
        nn::Tensor& s = decode(g, ps, cfg, *p.f2, *p.f3, *p.f4, *p.f1);
        for (double v : s.v) {
            ASSERT_GE(v, 0.0);
            ASSERT_LE(v, 1.0);
        }
    }
}

TEST(Decoder, DetailBranchIsLive) {
    DecoderConfig cfg{8, {4, 8, 8, 8}};
    nn::ParamStore ps = decoder_store(cfg, 8);
    Rng rng(9);
    nn::Graph g;
    PyramidInputs p = make_levels(g, cfg.channels, 64, rng);
    nn::Tensor& with_f1 = decode(g, ps, cfg, *p.f2, *p.f3, *p.f4, *p.f1);
    nn::Tensor& zero_f1 = g.make(p.f1->shape, false);
    nn::Tensor& without_f1 = decode(g, ps, cfg, *p.f2, *p.f3, *p.f4, zero_f1);
    EXPECT_GT(testutil::max_abs_diff(with_f1.v, without_f1.v), 0.0);
}

TEST(Decoder, StrideMismatchIsContractViolation) {
    DecoderConfig cfg{8, {4, 8, 8, 8}};
    nn::ParamStore ps = decoder_store(cfg, 10);
    Rng rng(11);
    nn::Graph g;
    PyramidInputs p = make_levels(g, cfg.channels, 64, rng);
    nn::Tensor& bad_f3 = g.make({8, 2, 2}, false);  // stride 32 shape, not 16
    EXPECT_THROW(decode(g, ps, cfg, *p.f2, bad_f3, *p.f4, *p.f1), ContractViolation);
}

TEST(Upsample, FactorTwoSizes) {
    nn::Graph g;
    Rng rng(12);
    nn::Tensor& x = g.make({2, 12, 12}, false);
    for (double& v : x.v) v = uniform(rng, 0.0, 1.0);
    nn::Tensor& up = upsample(g, x, 2);
    EXPECT_EQ(up.dim(0), 2);
    EXPECT_EQ(up.dim(1), 24);
    EXPECT_EQ(up.dim(2), 24);
}

TEST(Upsample, RampMatchesClosedFormBilinear) {
    // 4x4 ramp r(y,x) = 0.1 + 0.2*x + 0.05*y, x2 upsampling with half-pixel
    // centers: out(oy,ox) interpolates at (oy+0.5)/2-0.5, clamped at borders.
    nn::Graph g;
    nn::Tensor& x = g.make({1, 4, 4}, false);
    for (int y = 0; y < 4; ++y)
        for (int xx = 0; xx < 4; ++xx) x.v[y * 4 + xx] = 0.1 + 0.2 * xx + 0.05 * y;
    nn::Tensor& up = upsample(g, x, 2);

    auto sample = [&](double sy, double sx) {
        auto tap = [](double s, int n, int& i0, int& i1, double& w1) {
            double fl = std::floor(s);
            w1 = s - fl;
            i0 = std::clamp(static_cast<int>(fl), 0, n - 1);
            i1 = std::clamp(static_cast<int>(fl) + 1, 0, n - 1);
        };
        int y0, y1, x0, x1;
        double wy, wx;
        tap(sy, 4, y0, y1, wy);
        tap(sx, 4, x0, x1, wx);
        auto at = [&](int y, int xx) { return x.v[y * 4 + xx]; };
        return (1 - wy) * ((1 - wx) * at(y0, x0) + wx * at(y0, x1)) +
               wy * ((1 - wx) * at(y1, x0) + wx * at(y1, x1));
    };
    for (int oy = 0; oy < 8; ++oy)
        for (int ox = 0; ox < 8; ++ox) {
            double expected = sample((oy + 0.5) / 2.0 - 0.5, (ox + 0.5) / 2.0 - 0.5);
            EXPECT_NEAR(up.v[oy * 8 + ox], expected, 1e-6) << oy << "," << ox;
        }
}
