#pragma once

#include <algorithm>
#include <cctype>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "unisod/image_io.hpp"
#include "unisod/tensor.hpp"

// Dataset layout: root/{RGB,GT[,Aux]}/<stem>.{png,jpg,jpeg}. Stems are matched
// across the required subdirectories; anything unmatched lands in a rejects
// report instead of being dropped silently.

namespace unisod::data {

namespace fs = std::filesystem;

enum class Modality { rgb, rgbd, rgbt };

inline const char* modality_name(Modality m) {
    switch (m) {
        case Modality::rgb: return "rgb";
        case Modality::rgbd: return "rgbd";
        case Modality::rgbt: return "rgbt";
    }
    return "?";
}

inline Modality modality_from_string(const std::string& s) {
    if (s == "rgb") return Modality::rgb;
    if (s == "rgbd") return Modality::rgbd;
    if (s == "rgbt") return Modality::rgbt;
    throw ConfigError("unknown modality: " + s + " (expected rgb, rgbd, or rgbt)");
}

struct DatasetSpec {
    fs::path root;
    std::string rgb_dir = "RGB";
    std::string gt_dir = "GT";
    std::string aux_dir = "Aux";
    Modality modality = Modality::rgb;
    int target_h = 384, target_w = 384;
};

struct SampleDesc {
    std::string id;
    fs::path rgb, gt, aux;  // aux empty for single-modal data
};

struct Reject {
    std::string id;
    std::string reason;
};

struct ScanResult {
    std::vector<SampleDesc> samples;
    std::vector<Reject> rejects;
};

namespace detail {

inline std::string lower_ext(const fs::path& p) {
    std::string e = p.extension().string();
    std::transform(e.begin(), e.end(), e.begin(), [](unsigned char c) { return std::tolower(c); });
    return e;
}

inline bool image_ext(const fs::path& p) {
    std::string e = lower_ext(p);
    return e == ".png" || e == ".jpg" || e == ".jpeg";
}

// stem -> path; when a stem exists with several extensions, .png wins.
inline std::map<std::string, fs::path> index_dir(const fs::path& dir) {
    if (!fs::is_directory(dir)) throw ConfigError("dataset directory missing: " + dir.string());
    std::map<std::string, fs::path> out;
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(dir))
        if (entry.is_regular_file() && image_ext(entry.path())) files.push_back(entry.path());
    std::sort(files.begin(), files.end());
    for (const auto& p : files) {
        std::string stem = p.stem().string();
        auto it = out.find(stem);
        if (it == out.end() || lower_ext(p) == ".png") out[stem] = p;
    }
    return out;
}

}  // namespace detail

inline ScanResult scan_dataset(const DatasetSpec& spec) {
    if (!fs::is_directory(spec.root))
        throw ConfigError("dataset root missing: " + spec.root.string());
    auto rgb = detail::index_dir(spec.root / spec.rgb_dir);
    auto gt = detail::index_dir(spec.root / spec.gt_dir);
    std::map<std::string, fs::path> aux;
    bool need_aux = spec.modality != Modality::rgb;
    if (need_aux) aux = detail::index_dir(spec.root / spec.aux_dir);

    std::map<std::string, int> stems;  // union of ids across directories
    for (const auto& [k, v] : rgb) stems[k] |= 1;
    for (const auto& [k, v] : gt) stems[k] |= 2;
    for (const auto& [k, v] : aux) stems[k] |= 4;

    ScanResult out;
    for (const auto& [stem, mask] : stems) {
        std::string missing;
        if (!(mask & 1)) missing += spec.rgb_dir + " ";
        if (!(mask & 2)) missing += spec.gt_dir + " ";
        if (need_aux && !(mask & 4)) missing += spec.aux_dir + " ";
        if (!missing.empty()) {
            out.rejects.push_back({stem, "missing in: " + missing});
            continue;
        }
        SampleDesc d;
        d.id = stem;
        d.rgb = rgb[stem];
        d.gt = gt[stem];
        if (need_aux) d.aux = aux[stem];
        out.samples.push_back(std::move(d));
    }
    // map iteration is already id-sorted; keep the contract explicit
    std::sort(out.samples.begin(), out.samples.end(),
              [](const SampleDesc& a, const SampleDesc& b) { return a.id < b.id; });
    return out;
}

struct Sample {
    img::ImageF rgb;                 // 3,H,W in [0,1]
    std::optional<img::ImageF> aux;  // present iff modality != rgb
    img::GrayF gt;                   // values in {0,1}
    Modality modality = Modality::rgb;
    std::string id;
};

inline img::GrayF binarize_mask(const img::GrayF& in) {
    img::GrayF out(in.height, in.width);
    for (size_t i = 0; i < in.v.size(); ++i) out.v[i] = in.v[i] > 0.5 ? 1.0 : 0.0;
    return out;
}

inline Sample load_sample(const SampleDesc& desc, Modality modality, int target_h, int target_w) {
    Sample s;
    s.id = desc.id;
    s.modality = modality;

    s.rgb = img::resize_bilinear(img::load_rgb(desc.rgb), target_h, target_w);
    // binarize before the nearest resize so the mask stays exactly {0,1}
    s.gt = img::resize_nearest(binarize_mask(img::load_gray(desc.gt)), target_h, target_w);

    if (modality != Modality::rgb) {
        img::GrayF raw = img::load_gray(desc.aux);
        double lo = raw.v[0], hi = raw.v[0];
        for (double v : raw.v) {
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
        img::GrayF norm(raw.height, raw.width);
        if (hi > lo)
            for (size_t i = 0; i < raw.v.size(); ++i) norm.v[i] = (raw.v[i] - lo) / (hi - lo);
        img::ImageF rep(3, raw.height, raw.width);
        for (int c = 0; c < 3; ++c)
            for (int y = 0; y < raw.height; ++y)
                for (int x = 0; x < raw.width; ++x) rep.at(c, y, x) = norm.at(y, x);
        s.aux = img::resize_bilinear(rep, target_h, target_w);
    }
    return s;
}

struct Batch {
    nn::Tensor rgb;  // {B,3,H,W}
    nn::Tensor aux;  // {B,3,H,W}; for modality rgb this is a copy of rgb
    nn::Tensor gt;   // {B,1,H,W}
    std::vector<std::string> ids;
    Modality modality = Modality::rgb;

    int size() const { return rgb.shape.empty() ? 0 : rgb.dim(0); }
    int height() const { return rgb.dim(2); }
    int width() const { return rgb.dim(3); }
};

inline Batch make_batch(const std::vector<Sample>& samples) {
    require(!samples.empty(), "make_batch: empty sample list");
    const Sample& first = samples[0];
    const int h = first.rgb.height, w = first.rgb.width;
    for (const Sample& s : samples) {
        require(s.modality == first.modality, "make_batch: mixed modalities in one batch");
        require(s.rgb.height == h && s.rgb.width == w && s.gt.height == h && s.gt.width == w,
                "make_batch: mixed sample sizes in one batch");
        require((s.modality == Modality::rgb) == !s.aux.has_value(),
                "make_batch: aux presence inconsistent with modality");
    }
    const int b = static_cast<int>(samples.size());
    Batch out;
    out.modality = first.modality;
    out.rgb = nn::make_tensor({b, 3, h, w});
    out.gt = nn::make_tensor({b, 1, h, w});
    for (int i = 0; i < b; ++i) {
        std::copy(samples[i].rgb.v.begin(), samples[i].rgb.v.end(),
                  out.rgb.v.begin() + size_t(i) * 3 * h * w);
        std::copy(samples[i].gt.v.begin(), samples[i].gt.v.end(),
                  out.gt.v.begin() + size_t(i) * h * w);
        out.ids.push_back(samples[i].id);
    }
    if (first.modality == Modality::rgb) {
        out.aux = out.rgb;  // the two model inputs become the same visible image
    } else {
        out.aux = nn::make_tensor({b, 3, h, w});
        for (int i = 0; i < b; ++i)
            std::copy(samples[i].aux->v.begin(), samples[i].aux->v.end(),
                      out.aux.v.begin() + size_t(i) * 3 * h * w);
    }
    return out;
}

// Copies one batch entry into a standalone {C,H,W} tensor.
inline nn::Tensor batch_slice(const nn::Tensor& stacked, int index) {
    require(stacked.ndim() == 4 && index >= 0 && index < stacked.dim(0),
            "batch_slice: index out of range");
    const int c = stacked.dim(1), h = stacked.dim(2), w = stacked.dim(3);
    nn::Tensor out = nn::make_tensor({c, h, w});
    size_t n = size_t(c) * h * w;
    std::copy(stacked.v.begin() + index * n, stacked.v.begin() + (index + 1) * n, out.v.begin());
    return out;
}

}  // namespace unisod::data
