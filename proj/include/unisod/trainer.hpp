#pragma once

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <optional>
#include <sstream>

#include <json.hpp>

#include "unisod/checkpoint.hpp"
#include "unisod/data.hpp"
#include "unisod/losses.hpp"
#include "unisod/model.hpp"

// Two-phase optimization harness: full training of the baseline model, and
// prompt tuning where the pre-trained part is frozen and only spg.* learns.
// Frozen parameters have no optimizer slots at all, so a prompt-tuning step
// cannot drift them even by rounding.

namespace unisod {

struct TrainingError : std::runtime_error {
    explicit TrainingError(const std::string& msg) : std::runtime_error(msg) {}
};

struct TrainConfig {
    TrainMode mode = TrainMode::pretrain;
    data::Modality task = data::Modality::rgb;
    double lr = 1e-5;
    double weight_decay = 0.0;
    int batch_size = 0;  // 0: mode default (pretrain 4, prompt tuning 8)
    int epochs = 0;      // 0: mode default (pretrain 200, prompt tuning 300)
    int max_steps = 0;   // 0: no cap
    int checkpoint_every = 0;
    uint64_t seed = 0;
    LossConfig loss;

    int resolved_batch_size() const {
        if (batch_size > 0) return batch_size;
        return mode == TrainMode::pretrain ? 4 : 8;
    }
    int resolved_epochs() const {
        if (epochs > 0) return epochs;
        return mode == TrainMode::pretrain ? 200 : 300;
    }
};

inline Injection injection_for(TrainMode mode) {
    switch (mode) {
        case TrainMode::pretrain: return Injection::none;
        case TrainMode::prompt_tune: return Injection::spg_sum;
        case TrainMode::full_finetune: return Injection::spg_sum;
        case TrainMode::prompt_concat: return Injection::spg_concat;
        case TrainMode::no_spg: return Injection::aux_sum;
    }
    return Injection::none;
}

inline bool mode_uses_spg(TrainMode mode) {
    return mode == TrainMode::prompt_tune || mode == TrainMode::full_finetune ||
           mode == TrainMode::prompt_concat;
}

// Decoupled-weight-decay Adam over the trainable subset only.
struct AdamW {
    double lr = 1e-5, beta1 = 0.9, beta2 = 0.999, eps = 1e-8, weight_decay = 0.0;
    int64_t t = 0;
    std::map<std::string, std::vector<double>> m, v;

    void ensure_slots(const nn::ParamStore& params, const std::vector<std::string>& trainable) {
        for (const auto& name : trainable) {
            size_t n = params.at(name).v.size();
            if (!m.count(name)) m[name].assign(n, 0.0);
            if (!v.count(name)) v[name].assign(n, 0.0);
        }
    }

    void step(nn::ParamStore& params, const std::vector<std::string>& trainable) {
        ++t;
        double bc1 = 1.0 - std::pow(beta1, static_cast<double>(t));
        double bc2 = 1.0 - std::pow(beta2, static_cast<double>(t));
        for (const auto& name : trainable) {
            nn::Tensor& p = params.at(name);
            auto& mm = m[name];
            auto& vv = v[name];
            for (size_t i = 0; i < p.v.size(); ++i) {
                double gr = p.g[i];
                mm[i] = beta1 * mm[i] + (1.0 - beta1) * gr;
                vv[i] = beta2 * vv[i] + (1.0 - beta2) * gr * gr;
                double mhat = mm[i] / bc1;
                double vhat = vv[i] / bc2;
                p.v[i] -= lr * (mhat / (std::sqrt(vhat) + eps) + weight_decay * p.v[i]);
            }
        }
    }
};

struct TrainState {
    Model model;
    TrainConfig cfg;
    ParameterPartition partition;
    AdamW optim;
    Rng shuffle_rng;
    int64_t step = 0;
    std::vector<int> epoch_order;
    int64_t epoch_pos = 0;  // batches consumed in the current epoch

    std::vector<LossReport> log;
};

inline std::map<std::string, const nn::Tensor*> all_param_ptrs(const Model& m) {
    std::map<std::string, const nn::Tensor*> out;
    for (const auto& [name, t] : m.params) out[name] = &t;
    return out;
}

// Builds a ready-to-train state. `init` restores tensors from a checkpoint:
// a pre-trained checkpoint seeds the frozen part before prompt tuning, and a
// same-mode checkpoint (with optimizer slots) resumes training bit-exactly.
inline TrainState make_train_state(const ModelConfig& mcfg, const TrainConfig& tcfg,
                                   const LoadedCheckpoint* init = nullptr, bool resume = false) {
    TrainState st;
    st.cfg = tcfg;
    st.model = build_model(mcfg, mode_uses_spg(tcfg.mode), tcfg.seed);
    st.partition = partition_parameters(st.model, tcfg.mode);
    apply_partition(st.model, st.partition);
    st.optim.lr = tcfg.lr;
    st.optim.weight_decay = tcfg.weight_decay;
    st.optim.ensure_slots(st.model.params, st.partition.trainable);
    st.shuffle_rng.seed(tcfg.seed);

    if (init) {
        for (const auto& [name, tensor] : init->tensors) {
            if (name.rfind("optim.", 0) == 0) {
                if (!resume) continue;
                std::string base = name.substr(8);  // strip "optim.m." / "optim.v."
                bool is_m = name.rfind("optim.m.", 0) == 0;
                auto& slot = is_m ? st.optim.m : st.optim.v;
                auto it = slot.find(base);
                if (it != slot.end() && it->second.size() == tensor.v.size())
                    it->second = tensor.v;
                continue;
            }
            if (!st.model.params.has(name)) continue;
            nn::Tensor& dst = st.model.params.at(name);
            if (dst.shape != tensor.shape) {
                std::ostringstream os;
                os << "checkpoint tensor " << name << " has incompatible shape (format v"
                   << init->meta.format_version << ")";
                throw DataError(os.str());
            }
            dst.v = tensor.v;
        }
        if (resume) {
            st.step = init->meta.step;
            st.optim.t = init->meta.optim_step;
            st.epoch_order = init->meta.epoch_order;
            st.epoch_pos = init->meta.epoch_pos;
            if (!init->meta.rng_state.empty()) {
                std::istringstream is(init->meta.rng_state);
                is >> st.shuffle_rng;
            }
        }
    }
    return st;
}

// One optimization step over a batch: mean loss over the samples, gradients
// only into trainable parameters, AdamW update. With an empty trainable set
// the step reduces to loss evaluation.
inline LossReport train_step(TrainState& st, const data::Batch& batch) {
    const TrainConfig& cfg = st.cfg;
    const int b = batch.size();
    require(b > 0, "train_step: empty batch");

    for (const auto& name : st.partition.trainable) st.model.params.at(name).zero_grad();

    Injection inj = injection_for(cfg.mode);
    bool learn = !st.partition.trainable.empty();
    LossReport mean;
    for (int i = 0; i < b; ++i) {
        nn::Graph graph;
        nn::Tensor& rgb = graph.make({3, batch.height(), batch.width()}, false);
        rgb.v = data::batch_slice(batch.rgb, i).v;
        nn::Tensor* aux = nullptr;
        if (inj != Injection::none) {
            aux = &graph.make({3, batch.height(), batch.width()}, false);
            aux->v = data::batch_slice(batch.aux, i).v;
        }
        ForwardResult fwd = model_forward(graph, st.model, rgb, aux, inj);

        img::GrayF gt(batch.height(), batch.width());
        nn::Tensor gt_slice = data::batch_slice(batch.gt, i);
        gt.v = gt_slice.v;
        img::ImageF rgb_img(3, batch.height(), batch.width());
        rgb_img.v = rgb.v;

        LossReport r;
        nn::Tensor& loss = saliency_loss_node(graph, *fwd.smap, gt, rgb_img, cfg.loss, &r);
        if (!std::isfinite(r.total)) {
            std::ostringstream os;
            os << "NaN/inf loss at step " << st.step << " (lr " << cfg.lr << ", batch ids:";
            for (const auto& id : batch.ids) os << " " << id;
            os << ")";
            throw TrainingError(os.str());
        }
        mean.bce += r.bce / b;
        mean.smooth += r.smooth / b;
        mean.dice += r.dice / b;
        mean.total += r.total / b;

        if (learn) graph.backward(loss, 1.0 / b);
    }

    if (learn) st.optim.step(st.model.params, st.partition.trainable);
    ++st.step;
    st.log.push_back(mean);
    return mean;
}

inline CheckpointMeta snapshot_meta(const TrainState& st,
                                    const std::map<std::string, std::string>& config_kv) {
    CheckpointMeta meta;
    meta.kind = "full";
    meta.mode = train_mode_name(st.cfg.mode);
    meta.step = st.step;
    meta.optim_step = st.optim.t;
    meta.seed = st.cfg.seed;
    std::ostringstream os;
    os << st.shuffle_rng;
    meta.rng_state = os.str();
    meta.epoch_order = st.epoch_order;
    meta.epoch_pos = st.epoch_pos;
    meta.config = config_kv;
    meta.frozen = st.partition.frozen;
    meta.trainable = st.partition.trainable;
    return meta;
}

inline void save_train_checkpoint(const std::filesystem::path& path, const TrainState& st,
                                  const std::map<std::string, std::string>& config_kv) {
    std::map<std::string, const nn::Tensor*> tensors = all_param_ptrs(st.model);
    // optimizer slots ride along (trainable subset only)
    std::map<std::string, nn::Tensor> slot_storage;
    for (const auto& [name, mv] : st.optim.m) {
        nn::Tensor t = nn::make_tensor({static_cast<int>(mv.size())}, false);
        t.v = mv;
        slot_storage.emplace("optim.m." + name, std::move(t));
    }
    for (const auto& [name, vv] : st.optim.v) {
        nn::Tensor t = nn::make_tensor({static_cast<int>(vv.size())}, false);
        t.v = vv;
        slot_storage.emplace("optim.v." + name, std::move(t));
    }
    for (const auto& [name, t] : slot_storage) tensors[name] = &t;
    save_checkpoint(path, snapshot_meta(st, config_kv), tensors);
}

// Prompt-only artifact: just the spg.* tensors.
inline void save_prompt_checkpoint(const std::filesystem::path& path, const TrainState& st,
                                   const std::map<std::string, std::string>& config_kv) {
    CheckpointMeta meta = snapshot_meta(st, config_kv);
    meta.kind = "prompts";
    std::map<std::string, const nn::Tensor*> tensors;
    for (const auto& [name, t] : st.model.params)
        if (name.rfind("spg.", 0) == 0) tensors[name] = &t;
    save_checkpoint(path, meta, tensors);
}

struct RunResult {
    std::filesystem::path last_checkpoint;
    std::filesystem::path best_checkpoint;
    std::filesystem::path prompt_checkpoint;  // prompt-tuning modes only
    double first_loss = 0.0, last_loss = 0.0, best_loss = 0.0;
    int64_t steps = 0;
};

// Epoch loop: seeded in-place Fisher-Yates shuffle, contiguous batches,
// JSON-lines log, last + best-train-loss checkpoints.
inline RunResult run_training(TrainState& st, const std::vector<data::Sample>& samples,
                              const std::filesystem::path& out_dir,
                              const std::map<std::string, std::string>& config_kv,
                              std::ostream* log_stream = nullptr) {
    require(!samples.empty(), "run_training: empty dataset");
    for (const auto& s : samples)
        if (s.modality != st.cfg.task)
            throw ConfigError(std::string("dataset modality ") + data::modality_name(s.modality) +
                              " does not match task " + data::modality_name(st.cfg.task));

    std::filesystem::create_directories(out_dir);
    std::ofstream jsonl(out_dir / "train_log.jsonl", std::ios::app);

    const int n = static_cast<int>(samples.size());
    const int bs = st.cfg.resolved_batch_size();
    const int64_t steps_per_epoch = (n + bs - 1) / bs;
    const int64_t total_epochs = st.cfg.resolved_epochs();

    RunResult result;
    result.best_loss = std::numeric_limits<double>::infinity();
    bool first_recorded = false;

    auto shuffle_epoch = [&] {
        st.epoch_order.resize(n);
        for (int i = 0; i < n; ++i) st.epoch_order[i] = i;
        for (int i = n - 1; i > 0; --i) {
            int j = static_cast<int>(st.shuffle_rng() % static_cast<uint64_t>(i + 1));
            std::swap(st.epoch_order[i], st.epoch_order[j]);
        }
        st.epoch_pos = 0;
    };

    const int64_t total_steps = total_epochs * steps_per_epoch;
    while (st.step < total_steps && (st.cfg.max_steps == 0 || st.step < st.cfg.max_steps)) {
        if (st.epoch_order.empty() || st.epoch_pos >= steps_per_epoch) shuffle_epoch();

        int64_t lo = st.epoch_pos * bs;
        int64_t hi = std::min<int64_t>(lo + bs, n);
        std::vector<data::Sample> chunk;
        chunk.reserve(hi - lo);
        for (int64_t k = lo; k < hi; ++k) chunk.push_back(samples[st.epoch_order[k]]);
        data::Batch batch = data::make_batch(chunk);
        LossReport r = train_step(st, batch);
        ++st.epoch_pos;  // batch consumed; checkpoints below must see this

        if (!first_recorded) {
            result.first_loss = r.total;
            first_recorded = true;
        }
        result.last_loss = r.total;
        if (jsonl) {
            nlohmann::json j = {{"step", st.step},  {"bce", r.bce},     {"smooth", r.smooth},
                                {"dice", r.dice},   {"total", r.total}, {"lr", st.cfg.lr}};
            jsonl << j.dump() << "\n";
        }
        if (log_stream && st.step % 50 == 0)
            (*log_stream) << "step " << st.step << " total " << r.total << "\n";

        if (r.total < result.best_loss) {
            result.best_loss = r.total;
            save_train_checkpoint(out_dir / "best.uckpt", st, config_kv);
        }
        if (st.cfg.checkpoint_every > 0 && st.step % st.cfg.checkpoint_every == 0)
            save_train_checkpoint(out_dir / "last.uckpt", st, config_kv);
    }

    result.last_checkpoint = out_dir / "last.uckpt";
    result.best_checkpoint = out_dir / "best.uckpt";
    save_train_checkpoint(result.last_checkpoint, st, config_kv);
    if (mode_uses_spg(st.cfg.mode) && st.cfg.mode != TrainMode::full_finetune) {
        result.prompt_checkpoint =
            out_dir / ("prompts_" + std::string(data::modality_name(st.cfg.task)) + ".uckpt");
        save_prompt_checkpoint(result.prompt_checkpoint, st, config_kv);
    }
    result.steps = st.step;
    return result;
}

// Plain evaluation forward for one sample (no gradients).
inline img::GrayF predict_sample(const Model& m, const img::ImageF& rgb,
                                 const img::ImageF* aux, Injection inj) {
    nn::Graph graph;
    nn::Tensor& rt = graph.make({3, rgb.height, rgb.width}, false);
    rt.v = rgb.v;
    nn::Tensor* at = nullptr;
    if (inj != Injection::none) {
        at = &graph.make({3, rgb.height, rgb.width}, false);
        at->v = aux ? aux->v : rgb.v;
    }
    ForwardResult fwd = model_forward(graph, m, rt, at, inj);
    img::GrayF out(fwd.smap->dim(1), fwd.smap->dim(2));
    out.v = fwd.smap->v;
    return out;
}

}  // namespace unisod
