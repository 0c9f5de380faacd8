#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "unisod/common.hpp"

// Run manifests: every CLI command records what it ran with (resolved config,
// content hashes of its file inputs, output paths, wall time) and writes the
// JSON atomically at the end of the run.

namespace unisod {

namespace detail {

// Compact SHA-1, enough for content-addressing manifest inputs.
class Sha1 {
public:
    void update(const uint8_t* data, size_t len) {
        for (size_t i = 0; i < len; ++i) {
            buf_[buflen_++] = data[i];
            ++total_;
            if (buflen_ == 64) {
                block();
                buflen_ = 0;
            }
        }
    }
    std::string hex() {
        uint64_t bits = total_ * 8;
        uint8_t pad = 0x80;
        update(&pad, 1);
        uint8_t zero = 0;
        while (buflen_ != 56) update(&zero, 1);
        for (int i = 7; i >= 0; --i) {
            uint8_t b = static_cast<uint8_t>(bits >> (8 * i));
            buf_[buflen_++] = b;
            if (buflen_ == 64) {
                block();
                buflen_ = 0;
            }
        }
        static const char* d = "0123456789abcdef";
        std::string out;
        for (uint32_t h : h_) {
            for (int i = 7; i >= 0; --i) out += d[(h >> (4 * i)) & 0xF];
        }
        return out;
    }

private:
    void block() {
        uint32_t w[80];
        for (int i = 0; i < 16; ++i)
            w[i] = (uint32_t(buf_[i * 4]) << 24) | (uint32_t(buf_[i * 4 + 1]) << 16) |
                   (uint32_t(buf_[i * 4 + 2]) << 8) | uint32_t(buf_[i * 4 + 3]);
        auto rol = [](uint32_t v, int s) { return (v << s) | (v >> (32 - s)); };
        for (int i = 16; i < 80; ++i) w[i] = rol(w[i - 3] ^ w[i - 8] ^ w[i - 14] ^ w[i - 16], 1);
        uint32_t a = h_[0], b = h_[1], c = h_[2], d = h_[3], e = h_[4];
        for (int i = 0; i < 80; ++i) {
            uint32_t f, k;
            if (i < 20) {
                f = (b & c) | (~b & d);
                k = 0x5A827999;
            } else if (i < 40) {
                f = b ^ c ^ d;
                k = 0x6ED9EBA1;
            } else if (i < 60) {
                f = (b & c) | (b & d) | (c & d);
                k = 0x8F1BBCDC;
            } else {
                f = b ^ c ^ d;
                k = 0xCA62C1D6;
            }
            uint32_t tmp = rol(a, 5) + f + e + k + w[i];
            e = d;
            d = c;
            c = rol(b, 30);
            b = a;
            a = tmp;
        }
        h_[0] += a;
        h_[1] += b;
        h_[2] += c;
        h_[3] += d;
        h_[4] += e;
    }

    std::array<uint32_t, 5> h_ = {0x67452301, 0xEFCDAB89, 0x98BADCFE, 0x10325476, 0xC3D2E1F0};
    uint8_t buf_[64];
    size_t buflen_ = 0;
    uint64_t total_ = 0;
};

}  // namespace detail

// git-style blob hash: sha1("blob <size>\0" + content).
inline std::string git_blob_sha1(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot hash input: " + path.string());
    std::vector<char> content((std::istreambuf_iterator<char>(in)),
                              std::istreambuf_iterator<char>());
    detail::Sha1 sha;
    std::string header = "blob " + std::to_string(content.size());
    sha.update(reinterpret_cast<const uint8_t*>(header.data()), header.size() + 1);  // incl. NUL
    sha.update(reinterpret_cast<const uint8_t*>(content.data()), content.size());
    return sha.hex();
}

struct RunManifest {
    std::string command;
    std::map<std::string, std::string> config;
    std::map<std::string, std::string> input_hashes;
    std::vector<std::string> outputs;
    double wall_time_s = 0.0;
};

inline void write_manifest_atomic(const std::filesystem::path& path, const RunManifest& m) {
    nlohmann::json j;
    j["command"] = m.command;
    j["config"] = m.config;
    j["inputs"] = m.input_hashes;
    j["outputs"] = m.outputs;
    j["wall_time_s"] = m.wall_time_s;
    std::filesystem::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::trunc);
        if (!out) throw DataError("cannot write manifest: " + path.string());
        out << j.dump(2) << "\n";
    }
    std::filesystem::rename(tmp, path);
}

}  // namespace unisod
