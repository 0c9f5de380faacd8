#pragma once

#include <array>
#include <cstdlib>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>

#include "unisod/common.hpp"

// Flat dotted-key configuration ("transformer.layers=4"). Values stay strings
// until a typed getter pulls them out; unknown keys are rejected so typos in
// config files or --set flags fail loudly.

namespace unisod {

inline const std::set<std::string>& known_config_keys() {
    static const std::set<std::string> keys = {
        "model.channels",    "model.depths",     "model.input_h",   "model.input_w",
        "model.variant",     "transformer.layers", "decoder.width",
        "loss.alpha_smooth", "loss.w_bce",       "loss.w_smooth",   "loss.w_dice",
        "train.mode",        "train.task",       "train.lr",        "train.weight_decay",
        "train.batch_size",  "train.epochs",     "train.max_steps", "train.seed",
        "train.checkpoint_every",
        "data.root",         "data.rgb_dir",     "data.gt_dir",     "data.aux_dir",
        "out.dir",
    };
    return keys;
}

struct Config {
    std::map<std::string, std::string> kv;

    void set(const std::string& key, const std::string& value) {
        if (!known_config_keys().count(key)) throw ConfigError("unknown config key: " + key);
        kv[key] = value;
    }
    bool has(const std::string& key) const { return kv.count(key) > 0; }

    std::string get_string(const std::string& key, const std::string& fallback = "") const {
        auto it = kv.find(key);
        return it == kv.end() ? fallback : it->second;
    }
    int get_int(const std::string& key, int fallback) const {
        auto it = kv.find(key);
        if (it == kv.end()) return fallback;
        try {
            return std::stoi(it->second);
        } catch (const std::exception&) {
            throw ConfigError("config key " + key + ": not an integer: " + it->second);
        }
    }
    double get_double(const std::string& key, double fallback) const {
        auto it = kv.find(key);
        if (it == kv.end()) return fallback;
        try {
            return std::stod(it->second);
        } catch (const std::exception&) {
            throw ConfigError("config key " + key + ": not a number: " + it->second);
        }
    }
    std::array<int, 4> get_int4(const std::string& key, std::array<int, 4> fallback) const {
        auto it = kv.find(key);
        if (it == kv.end()) return fallback;
        std::array<int, 4> out{};
        std::stringstream ss(it->second);
        std::string tok;
        int n = 0;
        while (std::getline(ss, tok, ',')) {
            if (n >= 4) break;
            try {
                out[n++] = std::stoi(tok);
            } catch (const std::exception&) {
                throw ConfigError("config key " + key + ": bad list element: " + tok);
            }
        }
        if (n != 4) throw ConfigError("config key " + key + ": expected 4 comma-separated ints");
        return out;
    }
};

// Built-in profiles. `paper` carries the published protocol (384x384 inputs,
// SwinB-shaped widths and depths, lr 1e-5, batch 4/8, epochs 200/300 —
// batch/epochs resolve per mode in the trainer); `toy` is the desk-scale
// profile every test runs on.
inline Config profile_defaults(const std::string& profile) {
    Config c;
    if (profile == "paper") {
        c.kv["model.channels"] = "128,256,512,1024";
        c.kv["model.depths"] = "2,2,18,2";
        c.kv["model.input_h"] = "384";
        c.kv["model.input_w"] = "384";
        c.kv["transformer.layers"] = "4";
        c.kv["decoder.width"] = "64";
        c.kv["train.lr"] = "1e-5";
    } else if (profile == "toy") {
        c.kv["model.channels"] = "8,16,32,64";
        c.kv["model.depths"] = "1,1,1,1";
        c.kv["model.input_h"] = "64";
        c.kv["model.input_w"] = "64";
        c.kv["transformer.layers"] = "2";
        c.kv["decoder.width"] = "32";
        c.kv["train.lr"] = "1e-3";
        c.kv["train.batch_size"] = "4";
        c.kv["train.epochs"] = "5";
    } else {
        throw ConfigError("unknown profile: " + profile + " (expected toy or paper)");
    }
    return c;
}

inline std::string env_profile() {
    const char* p = std::getenv("UNISOD_PROFILE");
    if (!p || !*p) return "toy";
    std::string s(p);
    if (s != "toy" && s != "paper")
        throw ConfigError("UNISOD_PROFILE must be toy or paper, got: " + s);
    return s;
}

// `key = value` lines, '#' comments, blank lines ignored.
inline void apply_config_file(Config& c, const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        size_t hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        auto trim = [](std::string s) {
            size_t a = s.find_first_not_of(" \t\r\n");
            size_t b = s.find_last_not_of(" \t\r\n");
            return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
        };
        std::string t = trim(line);
        if (t.empty()) continue;
        size_t eq = t.find('=');
        if (eq == std::string::npos)
            throw ConfigError(path + ":" + std::to_string(lineno) + ": expected key=value");
        c.set(trim(t.substr(0, eq)), trim(t.substr(eq + 1)));
    }
}

// --set key=value override.
inline void apply_set_flag(Config& c, const std::string& kvpair) {
    size_t eq = kvpair.find('=');
    if (eq == std::string::npos) throw ConfigError("--set expects key=value, got: " + kvpair);
    c.set(kvpair.substr(0, eq), kvpair.substr(eq + 1));
}

}  // namespace unisod
