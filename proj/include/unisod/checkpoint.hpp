#pragma once

#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "unisod/tensor.hpp"

// Checkpoint archive: a JSON manifest followed by raw little-endian f64
// tensor payloads. Raw doubles round-trip bit-exactly, which the
// determinism/resume guarantees depend on.
//
//   magic "USODCKP1" | u64 manifest_len | manifest JSON
//   u64 tensor_count | { u32 name_len, name, u32 ndim, i32 dims[], f64 data[] }*

namespace unisod {

constexpr char kCheckpointMagic[9] = "USODCKP1";
constexpr int kCheckpointVersion = 1;

struct CheckpointMeta {
    std::string kind = "full";  // "full" or "prompts"
    std::string mode;
    int64_t step = 0;
    int64_t optim_step = 0;
    uint64_t seed = 0;
    std::string rng_state;            // serialized shuffle RNG
    std::vector<int> epoch_order;     // sample permutation of the current epoch
    int64_t epoch_pos = 0;            // batches already consumed in that epoch
    std::map<std::string, std::string> config;
    std::vector<std::string> frozen, trainable;
    int format_version = kCheckpointVersion;
};

namespace detail {

inline nlohmann::json meta_to_json(const CheckpointMeta& m) {
    nlohmann::json j;
    j["kind"] = m.kind;
    j["mode"] = m.mode;
    j["step"] = m.step;
    j["optim_step"] = m.optim_step;
    j["seed"] = m.seed;
    j["rng_state"] = m.rng_state;
    j["epoch_order"] = m.epoch_order;
    j["epoch_pos"] = m.epoch_pos;
    j["config"] = m.config;
    j["partition"] = {{"frozen", m.frozen}, {"trainable", m.trainable}};
    j["format_version"] = m.format_version;
    return j;
}

inline CheckpointMeta meta_from_json(const nlohmann::json& j) {
    CheckpointMeta m;
    m.kind = j.value("kind", "full");
    m.mode = j.value("mode", "");
    m.step = j.value("step", int64_t{0});
    m.optim_step = j.value("optim_step", int64_t{0});
    m.seed = j.value("seed", uint64_t{0});
    m.rng_state = j.value("rng_state", "");
    if (j.contains("epoch_order")) m.epoch_order = j["epoch_order"].get<std::vector<int>>();
    m.epoch_pos = j.value("epoch_pos", int64_t{0});
    if (j.contains("config"))
        m.config = j["config"].get<std::map<std::string, std::string>>();
    if (j.contains("partition")) {
        m.frozen = j["partition"].value("frozen", std::vector<std::string>{});
        m.trainable = j["partition"].value("trainable", std::vector<std::string>{});
    }
    m.format_version = j.value("format_version", 1);
    return m;
}

template <typename T>
void write_pod(std::ofstream& out, T v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::ifstream& in) {
    T v{};
    in.read(reinterpret_cast<char*>(&v), sizeof(T));
    return v;
}

}  // namespace detail

inline void save_checkpoint(const std::filesystem::path& path, const CheckpointMeta& meta,
                            const std::map<std::string, const nn::Tensor*>& tensors) {
    std::filesystem::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw DataError("cannot write checkpoint: " + path.string());
        out.write(kCheckpointMagic, 8);
        std::string manifest = detail::meta_to_json(meta).dump();
        detail::write_pod<uint64_t>(out, manifest.size());
        out.write(manifest.data(), static_cast<std::streamsize>(manifest.size()));
        detail::write_pod<uint64_t>(out, tensors.size());
        for (const auto& [name, t] : tensors) {
            detail::write_pod<uint32_t>(out, static_cast<uint32_t>(name.size()));
            out.write(name.data(), static_cast<std::streamsize>(name.size()));
            detail::write_pod<uint32_t>(out, static_cast<uint32_t>(t->shape.size()));
            for (int d : t->shape) detail::write_pod<int32_t>(out, d);
            out.write(reinterpret_cast<const char*>(t->v.data()),
                      static_cast<std::streamsize>(t->v.size() * sizeof(double)));
        }
        if (!out) throw DataError("short write for checkpoint: " + path.string());
    }
    std::filesystem::rename(tmp, path);
}

struct LoadedCheckpoint {
    CheckpointMeta meta;
    std::map<std::string, nn::Tensor> tensors;
};

inline LoadedCheckpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open checkpoint: " + path.string());
    char magic[8];
    in.read(magic, 8);
    if (!in || std::memcmp(magic, kCheckpointMagic, 8) != 0)
        throw DataError("not a checkpoint file (bad magic): " + path.string());
    uint64_t mlen = detail::read_pod<uint64_t>(in);
    std::string manifest(mlen, '\0');
    in.read(manifest.data(), static_cast<std::streamsize>(mlen));
    LoadedCheckpoint ck;
    try {
        ck.meta = detail::meta_from_json(nlohmann::json::parse(manifest));
    } catch (const nlohmann::json::exception& e) {
        throw DataError("corrupt checkpoint manifest in " + path.string() + ": " + e.what());
    }
    if (ck.meta.format_version != kCheckpointVersion)
        throw DataError("checkpoint format v" + std::to_string(ck.meta.format_version) +
                        " not supported (this build reads v" +
                        std::to_string(kCheckpointVersion) + "): " + path.string());
    uint64_t count = detail::read_pod<uint64_t>(in);
    for (uint64_t i = 0; i < count; ++i) {
        uint32_t nlen = detail::read_pod<uint32_t>(in);
        std::string name(nlen, '\0');
        in.read(name.data(), nlen);
        uint32_t ndim = detail::read_pod<uint32_t>(in);
        std::vector<int> shape(ndim);
        for (uint32_t d = 0; d < ndim; ++d) shape[d] = detail::read_pod<int32_t>(in);
        nn::Tensor t = nn::make_tensor(shape, false);
        in.read(reinterpret_cast<char*>(t.v.data()),
                static_cast<std::streamsize>(t.v.size() * sizeof(double)));
        if (!in) throw DataError("truncated checkpoint: " + path.string());
        ck.tensors.emplace(std::move(name), std::move(t));
    }
    return ck;
}

}  // namespace unisod
