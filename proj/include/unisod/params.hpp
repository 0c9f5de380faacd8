#pragma once

#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "unisod/tensor.hpp"

namespace unisod::nn {

enum class InitKind { fan_in_uniform, zeros, ones };

// One named parameter tensor in the model inventory. The plan is the single
// source of truth for parameter names, shapes and init rules; parameter
// counting uses it without allocating anything.
struct ParamSpec {
    std::string name;
    std::vector<int> shape;
    InitKind init = InitKind::zeros;

    int64_t numel() const {
        int64_t n = 1;
        for (int d : shape) n *= d;
        return n;
    }
};

class ParamStore {
public:
    Tensor& at(const std::string& name) {
        auto it = p_.find(name);
        require(it != p_.end(), "unknown parameter: " + name);
        return it->second;
    }
    const Tensor& at(const std::string& name) const {
        auto it = p_.find(name);
        require(it != p_.end(), "unknown parameter: " + name);
        return it->second;
    }
    bool has(const std::string& name) const { return p_.count(name) > 0; }
    void insert(const std::string& name, Tensor t) {
        require(p_.emplace(name, std::move(t)).second, "duplicate parameter: " + name);
    }

    std::vector<std::string> names() const {
        std::vector<std::string> out;
        out.reserve(p_.size());
        for (const auto& [k, v] : p_) out.push_back(k);
        return out;
    }
    size_t size() const { return p_.size(); }
    auto begin() { return p_.begin(); }
    auto end() { return p_.end(); }
    auto begin() const { return p_.begin(); }
    auto end() const { return p_.end(); }

private:
    std::map<std::string, Tensor> p_;
};

// Materializes the plan in order, consuming the RNG deterministically.
inline void init_params(ParamStore& store, const std::vector<ParamSpec>& plan, Rng& rng) {
    for (const ParamSpec& spec : plan) {
        Tensor t = make_tensor(spec.shape, false);
        switch (spec.init) {
            case InitKind::zeros:
                break;
            case InitKind::ones:
                std::fill(t.v.begin(), t.v.end(), 1.0);
                break;
            case InitKind::fan_in_uniform: {
                int64_t fan_in = 1;
                for (size_t i = 1; i < spec.shape.size(); ++i) fan_in *= spec.shape[i];
                double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
                for (double& v : t.v) v = uniform(rng, -bound, bound);
                break;
            }
        }
        store.insert(spec.name, std::move(t));
    }
}

}  // namespace unisod::nn
