// unisod: pre-train the baseline saliency model, prompt-tune it for a task,
// predict saliency maps, evaluate predictions, and inspect the parameter
// partition. Exit codes: 0 ok, 1 internal error, 2 usage/config error,
// 3 data error.

#include <chrono>
#include <filesystem>
#include <iostream>

#include <CLI11.hpp>
#include <json.hpp>

#include "unisod/config.hpp"
#include "unisod/evaluation.hpp"
#include "unisod/manifest.hpp"
#include "unisod/synth.hpp"
#include "unisod/trainer.hpp"

namespace fs = std::filesystem;
using namespace unisod;

namespace {

struct CommonOpts {
    std::string config_file;
    std::vector<std::string> sets;
    std::string out_dir;
    int64_t seed = -1;
};

void add_common(CLI::App* cmd, CommonOpts& o, const std::string& default_out) {
    cmd->add_option("--config", o.config_file, "config file with key=value lines");
    cmd->add_option("--set", o.sets, "override a config key, e.g. --set transformer.layers=2");
    cmd->add_option("--out", o.out_dir, "output directory")->default_val(default_out);
    cmd->add_option("--seed", o.seed, "override train.seed");
}

Config resolve_config(const CommonOpts& o) {
    Config c = profile_defaults(env_profile());
    if (!o.config_file.empty()) apply_config_file(c, o.config_file);
    for (const auto& s : o.sets) apply_set_flag(c, s);
    if (o.seed >= 0) c.set("train.seed", std::to_string(o.seed));
    if (!o.out_dir.empty()) c.set("out.dir", o.out_dir);
    return c;
}

ModelConfig model_config_from(const Config& c) {
    ModelConfig m;
    m.backbone.channels = c.get_int4("model.channels", {16, 32, 64, 128});
    m.backbone.depths = c.get_int4("model.depths", {1, 1, 1, 1});
    m.tf_layers = c.get_int("transformer.layers", 4);
    m.decoder_width = c.get_int("decoder.width", 64);
    m.input_h = c.get_int("model.input_h", 384);
    m.input_w = c.get_int("model.input_w", 384);
    std::string variant = c.get_string("model.variant", "toy_conv");
    if (variant != "toy_conv")
        throw ConfigError("model.variant: only toy_conv is runnable from the CLI, got " + variant);
    return m;
}

TrainConfig train_config_from(const Config& c, TrainMode mode) {
    TrainConfig t;
    t.mode = mode;
    t.task = data::modality_from_string(c.get_string("train.task", "rgb"));
    t.lr = c.get_double("train.lr", 1e-5);
    t.weight_decay = c.get_double("train.weight_decay", 0.0);
    t.batch_size = c.get_int("train.batch_size", 0);
    t.epochs = c.get_int("train.epochs", 0);
    t.max_steps = c.get_int("train.max_steps", 0);
    t.checkpoint_every = c.get_int("train.checkpoint_every", 0);
    t.seed = static_cast<uint64_t>(c.get_int("train.seed", 0));
    t.loss.alpha_smooth = c.get_double("loss.alpha_smooth", 10.0);
    t.loss.w_bce = c.get_double("loss.w_bce", 1.0);
    t.loss.w_smooth = c.get_double("loss.w_smooth", 1.0);
    t.loss.w_dice = c.get_double("loss.w_dice", 1.0);
    return t;
}

data::DatasetSpec dataset_from(const Config& c, data::Modality modality, const ModelConfig& m) {
    data::DatasetSpec spec;
    std::string root = c.get_string("data.root");
    if (root.empty()) throw ConfigError("config key data.root is required for this command");
    spec.root = root;
    spec.rgb_dir = c.get_string("data.rgb_dir", "RGB");
    spec.gt_dir = c.get_string("data.gt_dir", "GT");
    spec.aux_dir = c.get_string("data.aux_dir", "Aux");
    spec.modality = modality;
    spec.target_h = m.input_h;
    spec.target_w = m.input_w;
    return spec;
}

std::vector<data::Sample> load_all(const data::DatasetSpec& spec, std::ostream& log) {
    data::ScanResult scan = data::scan_dataset(spec);
    if (!scan.rejects.empty()) {
        log << scan.rejects.size() << " unmatched stem(s):\n";
        for (const auto& r : scan.rejects) log << "  " << r.id << ": " << r.reason << "\n";
    }
    if (scan.samples.empty()) throw DataError("no usable samples under " + spec.root.string());
    std::vector<data::Sample> samples;
    samples.reserve(scan.samples.size());
    for (const auto& d : scan.samples)
        samples.push_back(data::load_sample(d, spec.modality, spec.target_h, spec.target_w));
    return samples;
}

std::string dir_listing_hash(const fs::path& root) {
    std::vector<std::string> lines;
    for (const auto& entry : fs::recursive_directory_iterator(root))
        if (entry.is_regular_file())
            lines.push_back(fs::relative(entry.path(), root).string() + ":" +
                            std::to_string(entry.file_size()));
    std::sort(lines.begin(), lines.end());
    detail::Sha1 sha;
    for (const auto& l : lines) sha.update(reinterpret_cast<const uint8_t*>(l.data()), l.size());
    return "list:" + sha.hex();
}

struct ManifestClock {
    std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    }
};

void print_partition(const ParameterPartition& part, std::ostream& os) {
    os << "parameters: trainable " << part.trainable_count << ", frozen " << part.frozen_count
       << ", trainable fraction " << count_trainable_fraction(part) << "\n";
}

int cmd_pretrain(const CommonOpts& opts) {
    ManifestClock clock;
    Config cfg = resolve_config(opts);
    ModelConfig mcfg = model_config_from(cfg);
    TrainConfig tcfg = train_config_from(cfg, TrainMode::pretrain);
    tcfg.task = data::Modality::rgb;

    data::DatasetSpec spec = dataset_from(cfg, data::Modality::rgb, mcfg);
    std::vector<data::Sample> samples = load_all(spec, std::cerr);

    TrainState st = make_train_state(mcfg, tcfg);
    print_partition(st.partition, std::cout);

    fs::path out_dir = cfg.get_string("out.dir", "runs/pretrain");
    RunResult res = run_training(st, samples, out_dir, cfg.kv, &std::cout);
    std::cout << "steps " << res.steps << ", first loss " << res.first_loss << ", last loss "
              << res.last_loss << "\n";
    std::cout << "checkpoint: " << res.last_checkpoint.string() << "\n";

    RunManifest man;
    man.command = "pretrain";
    man.config = cfg.kv;
    if (!opts.config_file.empty()) man.input_hashes[opts.config_file] = git_blob_sha1(opts.config_file);
    man.input_hashes[spec.root.string()] = dir_listing_hash(spec.root);
    man.outputs = {res.last_checkpoint.string(), res.best_checkpoint.string(),
                   (out_dir / "train_log.jsonl").string()};
    man.wall_time_s = clock.seconds();
    write_manifest_atomic(out_dir / "manifest.json", man);
    return 0;
}

int cmd_prompt_tune(const CommonOpts& opts, const std::string& task, const std::string& init_path,
                    const std::string& resume_path) {
    ManifestClock clock;
    Config cfg = resolve_config(opts);
    Config task_cfg = cfg;
    task_cfg.set("train.task", task);
    ModelConfig mcfg = model_config_from(task_cfg);

    std::string mode_str = task_cfg.get_string("train.mode", "prompt_tune");
    TrainMode mode;
    if (mode_str == "prompt_tune") mode = TrainMode::prompt_tune;
    else if (mode_str == "full_finetune") mode = TrainMode::full_finetune;
    else if (mode_str == "no_spg") mode = TrainMode::no_spg;
    else if (mode_str == "prompt_concat") mode = TrainMode::prompt_concat;
    else throw ConfigError("train.mode: expected prompt_tune, full_finetune, no_spg or "
                           "prompt_concat for this command, got " + mode_str);
    TrainConfig tcfg = train_config_from(task_cfg, mode);

    data::DatasetSpec spec = dataset_from(task_cfg, tcfg.task, mcfg);
    std::vector<data::Sample> samples = load_all(spec, std::cerr);

    LoadedCheckpoint init;
    bool resuming = !resume_path.empty();
    if (resuming) init = load_checkpoint(resume_path);
    else if (!init_path.empty()) init = load_checkpoint(init_path);
    else throw ConfigError("--init checkpoint is required (or --resume)");

    TrainState st = make_train_state(mcfg, tcfg, &init, resuming);
    print_partition(st.partition, std::cout);

    fs::path out_dir = task_cfg.get_string("out.dir", "runs/prompt_tune_" + task);
    RunResult res = run_training(st, samples, out_dir, task_cfg.kv, &std::cout);
    std::cout << "steps " << res.steps << ", first loss " << res.first_loss << ", last loss "
              << res.last_loss << "\n";
    if (!res.prompt_checkpoint.empty())
        std::cout << "prompt checkpoint: " << res.prompt_checkpoint.string() << "\n";

    RunManifest man;
    man.command = "prompt-tune";
    man.config = task_cfg.kv;
    if (!opts.config_file.empty()) man.input_hashes[opts.config_file] = git_blob_sha1(opts.config_file);
    std::string loaded = resuming ? resume_path : init_path;
    man.input_hashes[loaded] = git_blob_sha1(loaded);
    man.input_hashes[spec.root.string()] = dir_listing_hash(spec.root);
    man.outputs = {res.last_checkpoint.string()};
    if (!res.prompt_checkpoint.empty()) man.outputs.push_back(res.prompt_checkpoint.string());
    man.wall_time_s = clock.seconds();
    write_manifest_atomic(out_dir / "manifest.json", man);
    return 0;
}

Config config_from_meta(const CheckpointMeta& meta) {
    Config c = profile_defaults(env_profile());
    for (const auto& [k, v] : meta.config)
        if (known_config_keys().count(k)) c.kv[k] = v;
    return c;
}

int cmd_predict(const std::string& ckpt_path, const std::string& prompts_path,
                const std::string& input_dir, const std::string& aux_dir,
                const std::string& out_dir) {
    ManifestClock clock;
    LoadedCheckpoint ckpt = load_checkpoint(ckpt_path);
    Config cfg = config_from_meta(ckpt.meta);
    ModelConfig mcfg = model_config_from(cfg);

    bool with_prompts = !prompts_path.empty();
    if (!aux_dir.empty() && !with_prompts)
        throw ConfigError("--aux needs --prompts; the pre-trained model is single-stream");

    Injection inj = Injection::none;
    LoadedCheckpoint prompts;
    if (with_prompts) {
        prompts = load_checkpoint(prompts_path);
        inj = prompts.meta.mode == "prompt_concat" ? Injection::spg_concat : Injection::spg_sum;
    }

    Model model = build_model(mcfg, with_prompts, 0);
    auto restore = [&](const LoadedCheckpoint& ck) {
        for (const auto& [name, tensor] : ck.tensors) {
            if (name.rfind("optim.", 0) == 0) continue;
            if (!model.params.has(name)) continue;
            nn::Tensor& dst = model.params.at(name);
            if (dst.shape != tensor.shape)
                throw DataError("checkpoint tensor " + name + " has incompatible shape (format v" +
                                std::to_string(ck.meta.format_version) + ")");
            dst.v = tensor.v;
        }
    };
    restore(ckpt);
    if (with_prompts) restore(prompts);

    auto inputs = data::detail::index_dir(input_dir);
    if (inputs.empty()) throw DataError("no images found under " + input_dir);
    std::map<std::string, fs::path> aux_index;
    if (!aux_dir.empty()) aux_index = data::detail::index_dir(aux_dir);

    fs::create_directories(out_dir);
    RunManifest man;
    man.command = "predict";
    for (const auto& [stem, path] : inputs) {
        img::ImageF rgb_full = img::load_rgb(path);
        img::ImageF rgb = img::resize_bilinear(rgb_full, mcfg.input_h, mcfg.input_w);
        img::ImageF aux;
        const img::ImageF* aux_ptr = nullptr;
        if (!aux_dir.empty()) {
            auto it = aux_index.find(stem);
            if (it == aux_index.end())
                throw DataError("no aux image for stem " + stem + " under " + aux_dir);
            img::GrayF raw = img::load_gray(it->second);
            double lo = raw.v[0], hi = raw.v[0];
            for (double v : raw.v) {
                lo = std::min(lo, v);
                hi = std::max(hi, v);
            }
            img::ImageF rep(3, raw.height, raw.width);
            for (int c = 0; c < 3; ++c)
                for (int y = 0; y < raw.height; ++y)
                    for (int x = 0; x < raw.width; ++x)
                        rep.at(c, y, x) = hi > lo ? (raw.at(y, x) - lo) / (hi - lo) : 0.0;
            aux = img::resize_bilinear(rep, mcfg.input_h, mcfg.input_w);
            aux_ptr = &aux;
        }
        img::GrayF smap = predict_sample(model, rgb, aux_ptr, inj);
        img::GrayF restored = img::resize_bilinear(smap, rgb_full.height, rgb_full.width);
        fs::path out_path = fs::path(out_dir) / (stem + ".png");
        img::save_gray_u8(out_path, restored);
        man.outputs.push_back(out_path.string());
    }
    std::cout << "wrote " << man.outputs.size() << " map(s) to " << out_dir << "\n";

    man.config["checkpoint"] = ckpt_path;
    if (with_prompts) man.config["prompts"] = prompts_path;
    man.input_hashes[ckpt_path] = git_blob_sha1(ckpt_path);
    if (with_prompts) man.input_hashes[prompts_path] = git_blob_sha1(prompts_path);
    man.input_hashes[input_dir] = dir_listing_hash(input_dir);
    man.wall_time_s = clock.seconds();
    write_manifest_atomic(fs::path(out_dir) / "manifest.json", man);
    return 0;
}

int cmd_evaluate(const std::string& pred_dir, const std::string& gt_dir, const std::string& out_csv,
                 std::string json_path, std::string dataset_name) {
    ManifestClock clock;
    if (dataset_name.empty()) dataset_name = fs::path(pred_dir).filename().string();
    if (json_path.empty()) json_path = fs::path(out_csv).replace_extension(".json").string();

    metrics::MetricReport report = metrics::evaluate_dataset(pred_dir, gt_dir);
    if (report.rows.empty()) throw DataError("no matched prediction/ground-truth pairs");
    for (const auto& r : report.rejects)
        std::cerr << "unmatched: " << r.id << " (" << r.reason << ")\n";

    if (fs::path(out_csv).has_parent_path()) fs::create_directories(fs::path(out_csv).parent_path());
    metrics::write_metrics_csv(out_csv, dataset_name, report);
    metrics::write_metrics_json(json_path, dataset_name, report);
    std::cout << "images " << report.rows.size() << "  MAE " << report.means.mae << "  S "
              << report.means.s << "  E(mean) " << report.means.e_mean << "  E(adp) "
              << report.means.e_adaptive << "  Fw " << report.means.fw << "\n";

    RunManifest man;
    man.command = "evaluate";
    man.config = {{"pred", pred_dir}, {"gt", gt_dir}, {"dataset", dataset_name}};
    man.input_hashes[pred_dir] = dir_listing_hash(pred_dir);
    man.input_hashes[gt_dir] = dir_listing_hash(gt_dir);
    man.outputs = {out_csv, json_path};
    man.wall_time_s = clock.seconds();
    write_manifest_atomic(fs::path(out_csv).string() + ".manifest.json", man);
    return 0;
}

int cmd_params(const CommonOpts& opts, const std::string& mode_str, bool as_json) {
    ManifestClock clock;
    Config cfg = resolve_config(opts);
    ModelConfig mcfg = model_config_from(cfg);

    TrainMode mode;
    if (mode_str == "pretrain") mode = TrainMode::pretrain;
    else if (mode_str == "prompt_tune") mode = TrainMode::prompt_tune;
    else if (mode_str == "full_finetune") mode = TrainMode::full_finetune;
    else if (mode_str == "no_spg") mode = TrainMode::no_spg;
    else if (mode_str == "prompt_concat") mode = TrainMode::prompt_concat;
    else throw ConfigError("--mode: unknown training mode " + mode_str);

    bool with_spg = mode_uses_spg(mode);
    std::vector<nn::ParamSpec> plan = parameter_plan(mcfg, with_spg);
    ParameterPartition part = partition_plan(plan, mode);

    std::map<std::string, int64_t> by_ns;
    for (const auto& spec : plan) {
        std::string ns = spec.name.substr(0, spec.name.find('.'));
        by_ns[ns] += spec.numel();
    }

    if (as_json) {
        nlohmann::json j;
        j["mode"] = mode_str;
        j["namespaces"] = by_ns;
        j["total"] = part.frozen_count + part.trainable_count;
        j["trainable"] = part.trainable_count;
        j["frozen"] = part.frozen_count;
        j["trainable_fraction"] = count_trainable_fraction(part);
        std::cout << j.dump(2) << "\n";
    } else {
        std::cout << "mode: " << mode_str << "\n";
        for (const auto& [ns, n] : by_ns) std::cout << "  " << ns << ": " << n << "\n";
        std::cout << "  total: " << part.frozen_count + part.trainable_count << "\n";
        print_partition(part, std::cout);
    }

    fs::path out_dir = cfg.get_string("out.dir", "runs/params");
    fs::create_directories(out_dir);
    RunManifest man;
    man.command = "params";
    man.config = cfg.kv;
    man.config["mode"] = mode_str;
    man.wall_time_s = clock.seconds();
    write_manifest_atomic(out_dir / "manifest.json", man);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"unified salient-object-detection pipeline"};
    app.require_subcommand(1);

    CommonOpts pre_opts;
    CLI::App* pre = app.add_subcommand("pretrain", "train the baseline model on an RGB dataset");
    add_common(pre, pre_opts, "runs/pretrain");

    CommonOpts pt_opts;
    std::string pt_task = "rgb", pt_init, pt_resume;
    CLI::App* pt = app.add_subcommand("prompt-tune",
                                      "tune task prompts against a frozen pre-trained model");
    add_common(pt, pt_opts, "");
    pt->add_option("--task", pt_task, "target task: rgb, rgbd or rgbt")->required();
    pt->add_option("--init", pt_init, "pre-trained checkpoint to freeze");
    pt->add_option("--resume", pt_resume, "resume from a same-mode checkpoint");

    std::string pr_ckpt, pr_prompts, pr_input, pr_aux, pr_out = "runs/predict";
    CLI::App* pr = app.add_subcommand("predict", "write saliency maps for a directory of images");
    pr->add_option("--checkpoint", pr_ckpt, "pre-trained checkpoint")->required();
    pr->add_option("--prompts", pr_prompts, "task prompt checkpoint (omit for the pre-trained-only model)");
    pr->add_option("--input", pr_input, "directory of input images")->required();
    pr->add_option("--aux", pr_aux, "directory of auxiliary (depth/thermal) images");
    pr->add_option("--out", pr_out, "output directory")->capture_default_str();

    std::string ev_pred, ev_gt, ev_csv = "metrics.csv", ev_json, ev_name;
    CLI::App* ev = app.add_subcommand("evaluate", "score predictions against ground truth");
    ev->add_option("--pred", ev_pred, "prediction directory")->required();
    ev->add_option("--gt", ev_gt, "ground-truth directory")->required();
    ev->add_option("--out", ev_csv, "CSV output path")->capture_default_str();
    ev->add_option("--json", ev_json, "JSON summary path (default: CSV path with .json)");
    ev->add_option("--dataset", ev_name, "dataset name for the CSV rows");

    CommonOpts pa_opts;
    std::string pa_mode = "prompt_tune";
    bool pa_json = false;
    CLI::App* pa = app.add_subcommand("params", "report parameter counts and the frozen/trainable split");
    add_common(pa, pa_opts, "runs/params");
    pa->add_option("--mode", pa_mode, "training mode for the partition")->capture_default_str();
    pa->add_flag("--json", pa_json, "machine-readable output");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (pre->parsed()) return cmd_pretrain(pre_opts);
        if (pt->parsed()) return cmd_prompt_tune(pt_opts, pt_task, pt_init, pt_resume);
        if (pr->parsed()) return cmd_predict(pr_ckpt, pr_prompts, pr_input, pr_aux, pr_out);
        if (ev->parsed()) return cmd_evaluate(ev_pred, ev_gt, ev_csv, ev_json, ev_name);
        if (pa->parsed()) return cmd_params(pa_opts, pa_mode, pa_json);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}
