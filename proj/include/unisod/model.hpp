#pragma once

#include <functional>
#include <optional>

#include "unisod/backbone.hpp"
#include "unisod/decoder.hpp"
#include "unisod/spg.hpp"
#include "unisod/transformer.hpp"

namespace unisod {

enum class BackboneVariant { toy_conv, external };

struct ModelConfig {
    BackboneConfig backbone;
    int tf_layers = 4;
    int decoder_width = 64;
    int input_h = 384, input_w = 384;
    BackboneVariant variant = BackboneVariant::toy_conv;

    TransformerConfig transformer() const {
        return {tf_layers, backbone.channels, input_h, input_w};
    }
    DecoderConfig decoder() const { return {decoder_width, backbone.channels}; }
};

// Every parameter the model owns, in canonical order. The SPG blocks come
// last so a pre-trained model and a prompt-tuned one share the same RNG
// stream for the common part.
inline std::vector<nn::ParamSpec> parameter_plan(const ModelConfig& cfg, bool with_spg) {
    std::vector<nn::ParamSpec> plan;
    if (cfg.variant == BackboneVariant::toy_conv) backbone_param_plan(cfg.backbone, plan);
    transformer_param_plan(cfg.transformer(), plan);
    decoder_param_plan(cfg.decoder(), plan);
    if (with_spg) spg_param_plan(cfg.backbone.channels, plan);
    return plan;
}

inline int64_t plan_count(const std::vector<nn::ParamSpec>& plan) {
    int64_t n = 0;
    for (const auto& p : plan) n += p.numel();
    return n;
}

struct Model {
    ModelConfig cfg;
    bool has_spg = false;
    nn::ParamStore params;
    // Slot for an external pyramid encoder honoring the FeaturePyramid contract.
    std::function<FeaturePyramid(nn::Graph&, const nn::Tensor&)> external_backbone;

    FeaturePyramid extract(nn::Graph& g, const nn::Tensor& image) const {
        if (cfg.variant == BackboneVariant::external) {
            require(static_cast<bool>(external_backbone),
                    "model: external backbone variant without a callable");
            return external_backbone(g, image);
        }
        return backbone_extract(g, params, cfg.backbone, image);
    }
};

inline Model build_model(const ModelConfig& cfg, bool with_spg, uint64_t seed) {
    Model m;
    m.cfg = cfg;
    m.has_spg = with_spg;
    Rng rng(seed);
    nn::init_params(m.params, parameter_plan(cfg, with_spg), rng);
    return m;
}

// --- forward -----------------------------------------------------------------

// How the auxiliary stream enters the frozen computation.
enum class Injection {
    none,        // plain single-stream forward (pre-training / pre-trained eval)
    spg_sum,     // prompts summed onto the RGB features
    spg_concat,  // prompts appended as pooled tokens
    aux_sum      // auxiliary features summed in directly, no prompts
};

struct ForwardResult {
    nn::Tensor* smap = nullptr;
    FeaturePyramid pyr_r{}, pyr_a{};
    PromptSet prompts{};
};

inline ForwardResult model_forward(nn::Graph& g, const Model& m, const nn::Tensor& rgb,
                                   const nn::Tensor* aux, Injection inj,
                                   DecoderTrace* trace = nullptr) {
    TransformerConfig tcfg = m.cfg.transformer();
    ForwardResult out;

    if (inj == Injection::none) {
        out.pyr_r = m.extract(g, rgb);
        EncodedLevels enc = encode_pyramid(g, m.params, tcfg, out.pyr_r, nullptr);
        out.smap = &decode(g, m.params, m.cfg.decoder(), *enc.at(2), *enc.at(3), *enc.at(4),
                           *enc.f1, trace);
        return out;
    }

    require(aux != nullptr, "model_forward: this injection mode needs an aux stream");
    out.pyr_r = m.extract(g, rgb);
    out.pyr_a = m.extract(g, *aux);

    if (inj == Injection::aux_sum) {
        FeaturePyramid summed;
        for (int i = 0; i < 4; ++i)
            summed.level[i] = &nn::add(g, *out.pyr_r.level[i], *out.pyr_a.level[i]);
        EncodedLevels enc = encode_pyramid(g, m.params, tcfg, summed, nullptr);
        out.smap = &decode(g, m.params, m.cfg.decoder(), *enc.at(2), *enc.at(3), *enc.at(4),
                           *enc.f1, trace);
        return out;
    }

    require(m.has_spg, "model_forward: prompt injection requires SPG blocks");
    out.prompts = generate_all(g, m.params, out.pyr_r, out.pyr_a);
    PromptMode mode = inj == Injection::spg_sum ? PromptMode::sum : PromptMode::concat;
    EncodedLevels enc = encode_pyramid(g, m.params, tcfg, out.pyr_r, &out.prompts, mode);
    // The level-1 prompt joins right before the detail branch of the decoder.
    nn::Tensor& f1 = nn::add(g, *enc.f1, *out.prompts[0]);
    out.smap =
        &decode(g, m.params, m.cfg.decoder(), *enc.at(2), *enc.at(3), *enc.at(4), f1, trace);
    return out;
}

// --- parameter partition --------------------------------------------------------

enum class TrainMode { pretrain, prompt_tune, full_finetune, no_spg, prompt_concat };

inline const char* train_mode_name(TrainMode m) {
    switch (m) {
        case TrainMode::pretrain: return "pretrain";
        case TrainMode::prompt_tune: return "prompt_tune";
        case TrainMode::full_finetune: return "full_finetune";
        case TrainMode::no_spg: return "no_spg";
        case TrainMode::prompt_concat: return "prompt_concat";
    }
    return "?";
}

struct ParameterPartition {
    std::vector<std::string> frozen, trainable;
    int64_t frozen_count = 0, trainable_count = 0;
};

inline bool is_known_namespace(const std::string& name) {
    for (const char* ns : {"backbone.", "transformer.", "decoder.", "spg."})
        if (name.rfind(ns, 0) == 0) return true;
    return false;
}

inline bool namespace_trainable(const std::string& name, TrainMode mode) {
    if (!is_known_namespace(name))
        throw ContractViolation("partition: parameter in unknown namespace: " + name);
    switch (mode) {
        case TrainMode::pretrain:
        case TrainMode::full_finetune:
            return true;
        case TrainMode::prompt_tune:
        case TrainMode::prompt_concat:
            return name.rfind("spg.", 0) == 0;
        case TrainMode::no_spg:
            return false;
    }
    return false;
}

inline ParameterPartition partition_parameters(const Model& m, TrainMode mode) {
    ParameterPartition part;
    for (const auto& [name, tensor] : m.params) {
        if (namespace_trainable(name, mode)) {
            part.trainable.push_back(name);
            part.trainable_count += tensor.numel();
        } else {
            part.frozen.push_back(name);
            part.frozen_count += tensor.numel();
        }
    }
    return part;
}

inline double count_trainable_fraction(const ParameterPartition& part) {
    int64_t total = part.frozen_count + part.trainable_count;
    require(total > 0, "count_trainable_fraction: empty partition");
    return static_cast<double>(part.trainable_count) / static_cast<double>(total);
}

// Same split computed from the plan alone, so parameter accounting never has
// to materialize the (possibly paper-sized) tensors.
inline ParameterPartition partition_plan(const std::vector<nn::ParamSpec>& plan, TrainMode mode) {
    ParameterPartition part;
    for (const auto& spec : plan) {
        if (namespace_trainable(spec.name, mode)) {
            part.trainable.push_back(spec.name);
            part.trainable_count += spec.numel();
        } else {
            part.frozen.push_back(spec.name);
            part.frozen_count += spec.numel();
        }
    }
    return part;
}

// Flags requires_grad on the store according to the partition.
inline void apply_partition(Model& m, const ParameterPartition& part) {
    for (const auto& name : part.frozen) m.params.at(name).requires_grad = false;
    for (const auto& name : part.trainable) {
        nn::Tensor& t = m.params.at(name);
        t.requires_grad = true;
        t.alloc_grad();
    }
}

}  // namespace unisod
