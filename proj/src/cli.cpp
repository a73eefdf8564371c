#include "foval/cli.hpp"

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include "foval/dataset.hpp"
#include "foval/error.hpp"
#include "foval/eval.hpp"
#include "foval/features.hpp"
#include "foval/hash.hpp"
#include "foval/preprocess.hpp"
#include "foval/synth.hpp"
#include "foval/train.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

namespace foval {

namespace {

std::string fmt17(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

void require_input_file(const std::string& path) {
    if (!std::filesystem::exists(path)) throw ConfigError("input file '" + path + "' does not exist");
}

// Flat key=value experiment config; '#' starts a comment. Flags win over file
// values, so the file is applied first as defaults.
std::map<std::string, std::string> read_kv_config(const std::string& path) {
    require_input_file(path);
    std::ifstream in(path);
    if (!in) throw IoFailure("cannot open '" + path + "'");
    std::map<std::string, std::string> kv;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        const auto first = line.find_first_not_of(" \t\r");
        if (first == std::string::npos) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError(path + ":" + std::to_string(line_no) + ": expected key=value");
        auto trim = [](std::string s) {
            const auto b = s.find_first_not_of(" \t\r");
            const auto e = s.find_last_not_of(" \t\r");
            return (b == std::string::npos) ? std::string() : s.substr(b, e - b + 1);
        };
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty()) throw ConfigError(path + ":" + std::to_string(line_no) + ": empty key");
        kv[key] = value;
    }
    return kv;
}

double kv_double(const std::map<std::string, std::string>& kv, const std::string& key, double fallback) {
    auto it = kv.find(key);
    if (it == kv.end()) return fallback;
    try {
        return std::stod(it->second);
    } catch (...) {
        throw ConfigError("config key '" + key + "' is not numeric: '" + it->second + "'");
    }
}

std::int64_t kv_int(const std::map<std::string, std::string>& kv, const std::string& key,
                    std::int64_t fallback) {
    auto it = kv.find(key);
    if (it == kv.end()) return fallback;
    try {
        return std::stoll(it->second);
    } catch (...) {
        throw ConfigError("config key '" + key + "' is not an integer: '" + it->second + "'");
    }
}

std::uint64_t default_seed() {
    if (const char* env = std::getenv("FOVAL_SEED")) {
        try {
            return std::stoull(env);
        } catch (...) {
            throw ConfigError("FOVAL_SEED is not an integer");
        }
    }
    return 42;
}

std::string config_fingerprint(const TrainConfig& cfg) {
    nlohmann::ordered_json j;
    j["preset"] = cfg.preset_name;
    j["hidden_dim"] = cfg.model.hidden_dim;
    j["fc1_dim"] = cfg.model.fc1_dim;
    j["fc2_dim"] = cfg.model.fc2_dim;
    j["dropout_p"] = cfg.model.dropout_p;
    j["epochs"] = cfg.epochs;
    j["batch_size"] = cfg.batch_size;
    j["lr"] = cfg.lr;
    j["weight_decay"] = cfg.weight_decay;
    j["loss_beta"] = cfg.loss_beta;
    j["seed"] = cfg.seed;
    j["patience"] = cfg.patience;
    j["seq_len"] = cfg.seq_len;
    return fnv1a64_hex(j.dump());
}

std::string iso_timestamp() {
    const auto now = std::chrono::system_clock::now();
    const std::time_t t = std::chrono::system_clock::to_time_t(now);
    char buf[32];
    std::tm tm_utc{};
    gmtime_r(&t, &tm_utc);
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm_utc);
    return buf;
}

// ---- subcommand payloads ----

struct SynthArgs {
    SynthConfig cfg;
    std::string out;
    std::string config_path;
};

int cmd_synth(SynthArgs& a) {
    const auto recordings = generate_dataset(a.cfg);
    save_csv(recordings, a.out);
    std::size_t rows = 0;
    for (const auto& r : recordings) rows += r.samples.size();
    std::cout << "wrote " << rows << " rows (" << recordings.size() << " subjects) to " << a.out << "\n";
    return 0;
}

int cmd_features(const std::string& data, const std::string& out) {
    require_input_file(data);
    const auto recordings = load_csv(data);
    std::ofstream os(out, std::ios::binary);
    if (!os) throw IoFailure("cannot open '" + out + "' for writing");
    os << "subject_id,frame_index";
    for (const auto& info : feature_table()) os << ',' << info.name;
    os << ",gt_depth_cm\n";
    std::size_t rows = 0;
    for (const auto& rec : recordings) {
        for (const auto& frame : compute_feature_frames(rec)) {
            os << rec.subject_id << ',' << frame.frame_index;
            for (double v : frame.x) os << ',' << fmt17(v);
            os << ',' << fmt17(frame.gt_depth) << '\n';
            ++rows;
        }
    }
    if (!os) throw IoFailure("write to '" + out + "' failed");
    std::cout << "wrote " << rows << " feature frames to " << out << "\n";
    return 0;
}

struct PreprocessArgs {
    std::string data;
    std::string out_dir;
    std::uint64_t seed = 42;
};

int cmd_preprocess(PreprocessArgs& a) {
    require_input_file(a.data);
    const auto recordings = load_csv(a.data);

    CleaningConfig cleaning;
    BalanceConfig balance;
    balance.seed = a.seed;

    std::vector<FeatureFrame> frames;
    std::vector<std::string> subject_names;
    for (const auto& rec : recordings) {
        auto prepared = prepare_subject(rec, cleaning);
        for (auto& f : prepared.frames) f.subject = static_cast<int>(subject_names.size());
        subject_names.push_back(rec.subject_id);
        frames.insert(frames.end(), prepared.frames.begin(), prepared.frames.end());
    }
    frames = balance_by_bins(frames, balance);
    const PipelineParams pipeline = fit_pipeline(frames, cleaning, balance);

    std::error_code ec;
    std::filesystem::create_directories(a.out_dir, ec);
    if (ec) throw IoFailure("cannot create '" + a.out_dir + "': " + ec.message());
    {
        std::ofstream os(a.out_dir + "/pipeline_manifest.json", std::ios::binary);
        os << pipeline_to_json(pipeline) << "\n";
        if (!os) throw IoFailure("write of pipeline manifest failed");
    }
    {
        std::ofstream os(a.out_dir + "/frames.csv", std::ios::binary);
        if (!os) throw IoFailure("cannot open frames.csv for writing");
        os << "subject_id,frame_index";
        for (const auto& info : feature_table()) os << ',' << info.name;
        os << ",gt_depth_cm,gt_depth_scaled\n";
        for (const auto& f : frames) {
            os << subject_names[static_cast<std::size_t>(f.subject)] << ',' << f.frame_index;
            for (double v : f.x) os << ',' << fmt17(v);
            os << ',' << fmt17(f.gt_depth) << ',' << fmt17(pipeline.target.scale(f.gt_depth)) << '\n';
        }
        if (!os) throw IoFailure("write to frames.csv failed");
    }
    std::cout << "wrote pipeline manifest and " << frames.size() << " processed frames to " << a.out_dir
              << "\n";
    return 0;
}

struct TrainArgs {
    std::string data;
    std::string out_dir;
    std::string preset = "toy";
    std::string config_path;
    TrainConfig cfg;
    int jobs = 1;
};

int cmd_train(TrainArgs& a) {
    require_input_file(a.data);
    const std::string started = iso_timestamp();
    const auto recordings = load_csv(a.data);

    const auto result = run_loocv(recordings, a.cfg, a.out_dir, a.jobs);

    nlohmann::ordered_json manifest;
    manifest["toolkit_version"] = kToolkitVersion;
    manifest["config_hash"] = config_fingerprint(a.cfg);
    manifest["seed"] = a.cfg.seed;
    manifest["data_path"] = a.data;
    manifest["data_hash"] = fnv1a64_file_hex(a.data);
    manifest["started_utc"] = started;
    manifest["finished_utc"] = iso_timestamp();
    std::ofstream os(a.out_dir + "/run_manifest.json", std::ios::binary);
    os << manifest.dump(2) << "\n";
    if (!os) throw IoFailure("write of run manifest failed");

    std::printf("loocv: %zu folds, mean MAE %.3f cm (min %.3f, max %.3f), baseline %.3f cm\n",
                result.folds.size(), result.mean_mae_cm, result.min_mae_cm, result.max_mae_cm,
                result.baseline_mean_mae_cm);
    return 0;
}

struct EvalArgs {
    std::string data;
    std::string out_dir;
    std::string checkpoint;
    std::string manifest;
};

int cmd_eval(EvalArgs& a) {
    require_input_file(a.data);
    const auto recordings = load_csv(a.data);

    std::vector<double> preds, truths;
    std::vector<std::string> subjects;
    double baseline_mae_pooled = 0.0;
    std::size_t baseline_n = 0;

    CleaningConfig cleaning;
    std::vector<PreparedSubject> prepared;
    prepared.reserve(recordings.size());
    for (const auto& rec : recordings) prepared.push_back(prepare_subject(rec, cleaning));

    for (const auto& p : prepared) {
        const auto base = geometric_baseline(p.cleaned);
        for (std::size_t i = 0; i < base.size(); ++i) {
            baseline_mae_pooled += std::abs(base[i] - p.cleaned.samples[i].gt_depth);
            ++baseline_n;
        }
    }
    baseline_mae_pooled /= static_cast<double>(baseline_n);

    if (a.checkpoint.empty()) {
        // Baseline-only evaluation: the geometric estimate is the prediction.
        for (const auto& p : prepared) {
            const auto base = geometric_baseline(p.cleaned);
            for (std::size_t i = 0; i < base.size(); ++i) {
                preds.push_back(base[i]);
                truths.push_back(p.cleaned.samples[i].gt_depth);
                subjects.push_back(p.cleaned.subject_id);
            }
        }
    } else {
        require_input_file(a.checkpoint);
        if (a.manifest.empty()) throw ConfigError("--manifest is required with --checkpoint");
        require_input_file(a.manifest);

        std::ifstream mf(a.manifest);
        std::stringstream ss;
        ss << mf.rdbuf();
        std::string manifest_text = ss.str();
        // The recorded hash covers the canonical JSON text, not the trailing
        // newline the file carries.
        while (!manifest_text.empty() && (manifest_text.back() == '\n' || manifest_text.back() == '\r'))
            manifest_text.pop_back();
        const PipelineParams pipeline = pipeline_from_json(manifest_text);

        std::string expected_hash;
        ModelParams params = load_checkpoint(a.checkpoint, &expected_hash);
        const std::string got_hash = fnv1a64_hex(manifest_text);
        if (!expected_hash.empty() && expected_hash != got_hash)
            throw ConfigError("pipeline manifest hash " + got_hash +
                              " does not match checkpoint's " + expected_hash);

        for (std::size_t s = 0; s < prepared.size(); ++s) {
            auto frames = prepared[s].frames;
            for (auto& f : frames) f.subject = static_cast<int>(s);
            apply_pipeline(frames, pipeline);
            const auto batch = make_sequences(frames, pipeline.target, pipeline.seq_len);
            const std::size_t stride =
                static_cast<std::size_t>(batch.seq_len) * static_cast<std::size_t>(kFeatureCount);
            constexpr std::size_t kChunk = 512;
            for (std::size_t begin = 0; begin < batch.count; begin += kChunk) {
                const std::size_t end = std::min(begin + kChunk, batch.count);
                std::vector<double> chunk(batch.inputs.begin() + static_cast<std::ptrdiff_t>(begin * stride),
                                          batch.inputs.begin() + static_cast<std::ptrdiff_t>(end * stride));
                const auto out = forward(params, chunk, static_cast<int>(end - begin), Mode::infer);
                for (double v : out) preds.push_back(pipeline.target.inverse(v));
            }
            for (std::size_t i = 0; i < batch.count; ++i) {
                truths.push_back(batch.targets_cm[i]);
                subjects.push_back(prepared[s].cleaned.subject_id);
            }
        }
    }

    const EvalReport report = build_report(preds, truths, subjects, baseline_mae_pooled);
    emit_report(report, preds, truths, a.out_dir);
    std::printf("eval: %zu predictions, MAE %.3f cm, baseline %.3f cm -> %s\n", preds.size(), report.mae,
                report.baseline_mae, a.out_dir.c_str());
    return 0;
}

struct ReportArgs {
    std::string run_dir;
    std::string out_dir;
};

int cmd_report(ReportArgs& a) {
    const std::string folds_dir = a.run_dir + "/folds";
    if (!std::filesystem::is_directory(folds_dir))
        throw ConfigError("'" + folds_dir + "' is not a directory (expected a train run)");

    std::vector<std::string> fold_names;
    for (const auto& entry : std::filesystem::directory_iterator(folds_dir))
        if (entry.is_directory()) fold_names.push_back(entry.path().filename().string());
    std::sort(fold_names.begin(), fold_names.end());
    if (fold_names.empty()) throw ConfigError("no folds found under '" + folds_dir + "'");

    std::vector<double> preds, truths;
    std::vector<std::string> subjects;
    double baseline_sum = 0.0;
    std::size_t baseline_count = 0;
    for (const auto& name : fold_names) {
        const std::string preds_path = folds_dir + "/" + name + "/predictions.csv";
        require_input_file(preds_path);
        std::ifstream in(preds_path);
        std::string line;
        std::getline(in, line); // header
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            const auto comma = line.find(',');
            if (comma == std::string::npos) throw Error("malformed line in " + preds_path);
            preds.push_back(std::stod(line.substr(0, comma)));
            truths.push_back(std::stod(line.substr(comma + 1)));
            subjects.push_back(name);
        }
        const std::string fold_json = folds_dir + "/" + name + "/fold.json";
        if (std::filesystem::exists(fold_json)) {
            std::ifstream fj(fold_json);
            const auto j = nlohmann::json::parse(fj);
            baseline_sum += j.value("baseline_mae_cm", 0.0);
            ++baseline_count;
        }
    }
    const double baseline = baseline_count ? baseline_sum / static_cast<double>(baseline_count) : 0.0;
    const EvalReport report = build_report(preds, truths, subjects, baseline);
    emit_report(report, preds, truths, a.out_dir);
    std::printf("report: %zu predictions over %zu folds -> %s\n", preds.size(), fold_names.size(),
                a.out_dir.c_str());
    return 0;
}

void apply_synth_config(SynthArgs& a) {
    if (a.config_path.empty()) return;
    const auto kv = read_kv_config(a.config_path);
    a.cfg.n_subjects = static_cast<int>(kv_int(kv, "subjects", a.cfg.n_subjects));
    a.cfg.frames_per_subject = static_cast<int>(kv_int(kv, "frames", a.cfg.frames_per_subject));
    a.cfg.depth_min_cm = kv_double(kv, "depth_min", a.cfg.depth_min_cm);
    a.cfg.depth_max_cm = kv_double(kv, "depth_max", a.cfg.depth_max_cm);
    a.cfg.spiral_cycles = static_cast<int>(kv_int(kv, "spiral_cycles", a.cfg.spiral_cycles));
    a.cfg.spiral_radius_cm = kv_double(kv, "spiral_radius", a.cfg.spiral_radius_cm);
    a.cfg.noise_sigma_deg = kv_double(kv, "noise_sigma_deg", a.cfg.noise_sigma_deg);
    a.cfg.bias_sigma_deg = kv_double(kv, "bias_sigma_deg", a.cfg.bias_sigma_deg);
    a.cfg.ipd_min_cm = kv_double(kv, "ipd_min", a.cfg.ipd_min_cm);
    a.cfg.ipd_max_cm = kv_double(kv, "ipd_max", a.cfg.ipd_max_cm);
    a.cfg.seed = static_cast<std::uint64_t>(kv_int(kv, "seed", static_cast<std::int64_t>(a.cfg.seed)));
}

void apply_train_config(TrainArgs& a, std::uint64_t fallback_seed) {
    if (!a.config_path.empty()) {
        const auto kv = read_kv_config(a.config_path);
        if (auto it = kv.find("preset"); it != kv.end()) a.preset = it->second;
        a.cfg = (a.preset == "paper") ? TrainConfig::paper() : TrainConfig::toy();
        a.cfg.preset_name = a.preset;
        a.cfg.seed = fallback_seed;
        a.cfg.epochs = static_cast<int>(kv_int(kv, "epochs", a.cfg.epochs));
        a.cfg.batch_size = static_cast<int>(kv_int(kv, "batch_size", a.cfg.batch_size));
        a.cfg.lr = kv_double(kv, "lr", a.cfg.lr);
        a.cfg.weight_decay = kv_double(kv, "weight_decay", a.cfg.weight_decay);
        a.cfg.loss_beta = kv_double(kv, "loss_beta", a.cfg.loss_beta);
        a.cfg.patience = static_cast<int>(kv_int(kv, "patience", a.cfg.patience));
        a.cfg.seed = static_cast<std::uint64_t>(kv_int(kv, "seed", static_cast<std::int64_t>(a.cfg.seed)));
        a.jobs = static_cast<int>(kv_int(kv, "jobs", a.jobs));
    } else {
        const std::string name = a.preset;
        a.cfg = (name == "paper") ? TrainConfig::paper() : TrainConfig::toy();
        a.cfg.preset_name = name;
        a.cfg.seed = fallback_seed;
    }
    if (a.preset != "toy" && a.preset != "paper")
        throw ConfigError("unknown preset '" + a.preset + "' (expected toy or paper)");
}

} // namespace

int run_cli(const std::vector<std::string>& args) {
    CLI::App app{"foval: calibration-free focal-depth estimation toolkit"};
    app.require_subcommand(1);

    SynthArgs synth_args;
    SynthConfig synth_flags; // holds flag values; config file fills the gaps
    auto* synth_cmd = app.add_subcommand("synth", "generate a synthetic binocular gaze dataset");
    auto* o_subjects = synth_cmd->add_option("--subjects", synth_flags.n_subjects, "number of subjects");
    auto* o_frames = synth_cmd->add_option("--frames", synth_flags.frames_per_subject, "frames per subject");
    auto* o_dmin = synth_cmd->add_option("--depth-min", synth_flags.depth_min_cm, "nearest target depth, cm");
    auto* o_dmax = synth_cmd->add_option("--depth-max", synth_flags.depth_max_cm, "farthest target depth, cm");
    auto* o_cycles = synth_cmd->add_option("--spiral-cycles", synth_flags.spiral_cycles, "lateral weave cycles");
    auto* o_radius = synth_cmd->add_option("--spiral-radius", synth_flags.spiral_radius_cm, "lateral weave radius, cm");
    auto* o_noise = synth_cmd->add_option("--noise-sigma-deg", synth_flags.noise_sigma_deg, "per-frame angular noise");
    auto* o_bias = synth_cmd->add_option("--bias-sigma-deg", synth_flags.bias_sigma_deg, "per-subject bias sd");
    auto* o_ipd_min = synth_cmd->add_option("--ipd-min", synth_flags.ipd_min_cm, "minimum IPD, cm");
    auto* o_ipd_max = synth_cmd->add_option("--ipd-max", synth_flags.ipd_max_cm, "maximum IPD, cm");
    auto* o_seed = synth_cmd->add_option("--seed", synth_flags.seed, "PRNG seed");
    synth_cmd->add_option("--config", synth_args.config_path, "key=value config file");
    synth_cmd->add_option("--out", synth_args.out, "output CSV path")->required();

    std::string features_data, features_out;
    bool features_describe = false;
    auto* features_cmd = app.add_subcommand("features", "compute feature frames from a dataset CSV");
    features_cmd->add_option("--data", features_data, "input dataset CSV");
    features_cmd->add_option("--out", features_out, "output feature CSV");
    features_cmd->add_flag("--describe", features_describe, "print the feature table as JSON and exit");

    auto* describe_cmd = app.add_subcommand("describe", "print the canonical feature table as JSON");

    PreprocessArgs pre_args;
    pre_args.seed = default_seed();
    auto* pre_cmd = app.add_subcommand("preprocess", "fit the preprocessing pipeline on a dataset");
    pre_cmd->add_option("--data", pre_args.data, "input dataset CSV")->required();
    pre_cmd->add_option("--out", pre_args.out_dir, "output directory")->required();
    pre_cmd->add_option("--seed", pre_args.seed, "PRNG seed (balancing)");

    TrainArgs train_args;
    std::uint64_t train_seed = default_seed();
    int train_epochs = -1, train_batch = -1, train_patience = -1, train_jobs = 1;
    double train_lr = -1.0, train_wd = -1.0, train_beta = -1.0;
    auto* train_cmd = app.add_subcommand("train", "run leave-one-subject-out training");
    train_cmd->add_option("--data", train_args.data, "input dataset CSV")->required();
    train_cmd->add_option("--out", train_args.out_dir, "run output directory")->required();
    train_cmd->add_option("--preset", train_args.preset, "model preset: toy or paper");
    train_cmd->add_option("--config", train_args.config_path, "key=value config file");
    train_cmd->add_option("--epochs", train_epochs, "override epochs");
    train_cmd->add_option("--batch-size", train_batch, "override batch size");
    train_cmd->add_option("--lr", train_lr, "override learning rate");
    train_cmd->add_option("--weight-decay", train_wd, "override weight decay");
    train_cmd->add_option("--loss-beta", train_beta, "override smooth-L1 beta");
    train_cmd->add_option("--patience", train_patience, "early-stop patience (0 = off)");
    train_cmd->add_option("--seed", train_seed, "PRNG seed");
    train_cmd->add_option("--jobs", train_jobs, "parallel folds");

    EvalArgs eval_args;
    auto* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint or the geometric baseline");
    eval_cmd->add_option("--data", eval_args.data, "input dataset CSV")->required();
    eval_cmd->add_option("--out", eval_args.out_dir, "output directory")->required();
    eval_cmd->add_option("--checkpoint", eval_args.checkpoint, "model checkpoint (baseline-only if absent)");
    eval_cmd->add_option("--manifest", eval_args.manifest, "pipeline manifest matching the checkpoint");

    ReportArgs report_args;
    auto* report_cmd = app.add_subcommand("report", "rebuild aggregate metrics from a train run");
    report_cmd->add_option("--run", report_args.run_dir, "train run directory")->required();
    report_cmd->add_option("--out", report_args.out_dir, "output directory")->required();

    std::vector<char*> argv;
    std::vector<std::string> storage = args;
    std::string prog = "foval";
    argv.push_back(prog.data());
    for (auto& s : storage) argv.push_back(s.data());

    try {
        app.parse(static_cast<int>(argv.size()), argv.data());

        if (*synth_cmd) {
            // Defaults, then the config file, then explicit flags on top.
            synth_args.cfg.seed = default_seed();
            apply_synth_config(synth_args);
            if (o_subjects->count()) synth_args.cfg.n_subjects = synth_flags.n_subjects;
            if (o_frames->count()) synth_args.cfg.frames_per_subject = synth_flags.frames_per_subject;
            if (o_dmin->count()) synth_args.cfg.depth_min_cm = synth_flags.depth_min_cm;
            if (o_dmax->count()) synth_args.cfg.depth_max_cm = synth_flags.depth_max_cm;
            if (o_cycles->count()) synth_args.cfg.spiral_cycles = synth_flags.spiral_cycles;
            if (o_radius->count()) synth_args.cfg.spiral_radius_cm = synth_flags.spiral_radius_cm;
            if (o_noise->count()) synth_args.cfg.noise_sigma_deg = synth_flags.noise_sigma_deg;
            if (o_bias->count()) synth_args.cfg.bias_sigma_deg = synth_flags.bias_sigma_deg;
            if (o_ipd_min->count()) synth_args.cfg.ipd_min_cm = synth_flags.ipd_min_cm;
            if (o_ipd_max->count()) synth_args.cfg.ipd_max_cm = synth_flags.ipd_max_cm;
            if (o_seed->count()) synth_args.cfg.seed = synth_flags.seed;
            synth_args.cfg.validate();
            return cmd_synth(synth_args);
        }
        if (*features_cmd) {
            if (features_describe) {
                std::cout << feature_table_json() << "\n";
                return 0;
            }
            if (features_data.empty() || features_out.empty())
                throw ConfigError("features requires --data and --out (or --describe)");
            return cmd_features(features_data, features_out);
        }
        if (*describe_cmd) {
            std::cout << feature_table_json() << "\n";
            return 0;
        }
        if (*pre_cmd) return cmd_preprocess(pre_args);
        if (*train_cmd) {
            apply_train_config(train_args, default_seed());
            if (train_cmd->count("--seed")) train_args.cfg.seed = train_seed;
            if (train_epochs >= 0) train_args.cfg.epochs = train_epochs;
            if (train_batch >= 0) train_args.cfg.batch_size = train_batch;
            if (train_lr >= 0.0) train_args.cfg.lr = train_lr;
            if (train_wd >= 0.0) train_args.cfg.weight_decay = train_wd;
            if (train_beta >= 0.0) train_args.cfg.loss_beta = train_beta;
            if (train_patience >= 0) train_args.cfg.patience = train_patience;
            if (train_cmd->count("--jobs")) train_args.jobs = train_jobs;
            train_args.cfg.validate();
            return cmd_train(train_args);
        }
        if (*eval_cmd) return cmd_eval(eval_args);
        if (*report_cmd) return cmd_report(report_args);
        throw ConfigError("no subcommand given");
    } catch (const CLI::CallForHelp& e) {
        app.exit(e);
        return 0;
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        std::cerr << app.help() << "\n";
        return 1;
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const MissingColumn& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const NonNumericCell& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}

} // namespace foval
