#pragma once

#include <filesystem>

#include "unisod/data.hpp"
#include "unisod/image_io.hpp"

// Synthetic blob scenes for desk-scale runs. The RGB view shows the true
// object and look-alike distractors over textured background, so single-modal
// prediction cannot tell them apart. The auxiliary view encodes the true
// object as a dark region on a bright field: useful once a fusion block has
// learned to read it, disruptive when summed into frozen RGB features raw.

namespace unisod::synth {

namespace fs = std::filesystem;

struct SceneConfig {
    int size = 64;
    int n_distractors = 2;
    double object_level = 0.75;  // blob intensity in the RGB view
    double bg_noise = 0.25;      // background texture amplitude
    double aux_noise = 0.03;
};

struct Scene {
    img::ImageF rgb;
    img::ImageF aux;  // 3 identical channels, [0,1]
    img::GrayF gt;
};

namespace detail {

struct Blob {
    int cy, cx, r;
    bool disc;
};

inline Blob random_blob(Rng& rng, int size) {
    Blob b;
    b.r = 6 + static_cast<int>(rng() % static_cast<uint64_t>(std::max(2, size / 8)));
    b.cy = b.r + 1 + static_cast<int>(rng() % static_cast<uint64_t>(std::max(1, size - 2 * b.r - 2)));
    b.cx = b.r + 1 + static_cast<int>(rng() % static_cast<uint64_t>(std::max(1, size - 2 * b.r - 2)));
    b.disc = (rng() % 2) == 0;
    return b;
}

inline bool inside(const Blob& b, int y, int x) {
    if (b.disc) {
        int dy = y - b.cy, dx = x - b.cx;
        return dy * dy + dx * dx <= b.r * b.r;
    }
    return std::abs(y - b.cy) <= b.r && std::abs(x - b.cx) <= b.r;
}

}  // namespace detail

inline Scene make_scene(Rng& rng, const SceneConfig& cfg) {
    const int n = cfg.size;
    Scene s;
    s.rgb = img::ImageF(3, n, n);
    s.aux = img::ImageF(3, n, n);
    s.gt = img::GrayF(n, n);

    detail::Blob target = detail::random_blob(rng, n);
    std::vector<detail::Blob> distractors;
    for (int i = 0; i < cfg.n_distractors; ++i) distractors.push_back(detail::random_blob(rng, n));

    for (int y = 0; y < n; ++y)
        for (int x = 0; x < n; ++x) {
            bool on_target = detail::inside(target, y, x);
            bool on_distractor = false;
            for (const auto& d : distractors) on_distractor = on_distractor || detail::inside(d, y, x);

            double base = uniform(rng, 0.05, 0.05 + cfg.bg_noise);
            double level = (on_target || on_distractor)
                               ? cfg.object_level + uniform(rng, -0.05, 0.05)
                               : base;
            for (int c = 0; c < 3; ++c)
                s.rgb.at(c, y, x) = std::clamp(level + uniform(rng, -0.02, 0.02), 0.0, 1.0);

            s.gt.at(y, x) = on_target ? 1.0 : 0.0;
            double aux_level = on_target ? 0.08 : 0.85;  // inverted encoding
            double a = std::clamp(aux_level + uniform(rng, -cfg.aux_noise, cfg.aux_noise), 0.0, 1.0);
            for (int c = 0; c < 3; ++c) s.aux.at(c, y, x) = a;
        }
    return s;
}

// In-memory samples; aux carried only for multi-modal modalities.
inline std::vector<data::Sample> make_samples(int count, uint64_t seed, const SceneConfig& cfg,
                                              data::Modality modality) {
    Rng rng(seed);
    std::vector<data::Sample> out;
    for (int i = 0; i < count; ++i) {
        Scene sc = make_scene(rng, cfg);
        data::Sample s;
        s.id = "synth_" + std::to_string(i);
        s.modality = modality;
        s.rgb = std::move(sc.rgb);
        s.gt = std::move(sc.gt);
        if (modality != data::Modality::rgb) s.aux = std::move(sc.aux);
        out.push_back(std::move(s));
    }
    return out;
}

// On-disk dataset in the standard layout; aux stored as 8-bit grayscale PNG.
inline void write_dataset(const fs::path& root, int count, uint64_t seed, const SceneConfig& cfg,
                          bool with_aux) {
    fs::create_directories(root / "RGB");
    fs::create_directories(root / "GT");
    if (with_aux) fs::create_directories(root / "Aux");
    Rng rng(seed);
    for (int i = 0; i < count; ++i) {
        Scene sc = make_scene(rng, cfg);
        char name[32];
        std::snprintf(name, sizeof(name), "synth_%03d.png", i);
        img::save_rgb_u8(root / "RGB" / name, sc.rgb);
        img::save_gray_u8(root / "GT" / name, sc.gt);
        if (with_aux) img::save_gray_u8(root / "Aux" / name, img::channel(sc.aux, 0));
    }
}

}  // namespace unisod::synth
