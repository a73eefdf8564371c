#include "foval/train.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <thread>

#include "foval/error.hpp"
#include "foval/features.hpp"
#include "foval/hash.hpp"

#include <nlohmann/json.hpp>

namespace foval {

namespace {

constexpr std::uint64_t kTagBalanceSeed = 0x42414c32u;
constexpr std::uint64_t kTagModelInit = 0x494e4954u;
constexpr std::uint64_t kTagEpoch = 0x45504f43u;

const SubjectRecording& find_recording(const std::vector<SubjectRecording>& recordings,
                                        const std::string& id) {
    for (const auto& rec : recordings)
        if (rec.subject_id == id) return rec;
    throw Error("subject '" + id + "' not found in dataset");
}

void write_text(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoFailure("cannot open '" + path + "' for writing");
    out << content;
    if (!out) throw IoFailure("write to '" + path + "' failed");
}

std::string fmt17(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

} // namespace

TrainConfig TrainConfig::toy() { return TrainConfig{}; }

TrainConfig TrainConfig::paper() {
    TrainConfig c;
    c.preset_name = "paper";
    c.model = ModelConfig::paper();
    c.epochs = 2000;
    c.batch_size = 460;
    c.lr = 0.033;
    c.weight_decay = 0.0906;
    return c;
}

void TrainConfig::validate() const {
    model.validate();
    cleaning.validate();
    if (epochs < 1) throw ConfigError("epochs must be >= 1");
    if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
    if (!(lr > 0.0)) throw ConfigError("lr must be > 0");
    if (weight_decay < 0.0) throw ConfigError("weight_decay must be >= 0");
    if (!(loss_beta > 0.0)) throw ConfigError("loss_beta must be > 0");
    if (patience < 0) throw ConfigError("patience must be >= 0");
    if (seq_len != model.seq_len) throw ConfigError("seq_len must match model.seq_len");
}

FoldResult train_fold(const std::vector<SubjectRecording>& recordings, const Fold& fold,
                      const TrainConfig& cfg, const std::string& out_dir) {
    cfg.validate();
    const std::uint64_t fold_tag = fnv1a64(fold.test_id);

    // Per-subject cleaning and feature engineering; both use only that
    // subject's own data, so doing it before the split leaks nothing.
    std::vector<FeatureFrame> train_frames;
    for (std::size_t k = 0; k < fold.train_ids.size(); ++k) {
        auto prepared = prepare_subject(find_recording(recordings, fold.train_ids[k]), cfg.cleaning);
        for (auto& f : prepared.frames) f.subject = static_cast<int>(k);
        train_frames.insert(train_frames.end(), prepared.frames.begin(), prepared.frames.end());
    }
    auto test_prepared = prepare_subject(find_recording(recordings, fold.test_id), cfg.cleaning);
    const int test_subject_index = static_cast<int>(fold.train_ids.size());
    for (auto& f : test_prepared.frames) f.subject = test_subject_index;

    // Balance the training folds only; fitted statistics must be a pure
    // function of training data.
    BalanceConfig balance = cfg.balance;
    balance.seed = Rng::mix({cfg.seed, kTagBalanceSeed, fold_tag});
    train_frames = balance_by_bins(train_frames, balance);

    PipelineParams pipeline = fit_pipeline(train_frames, cfg.cleaning, balance, cfg.seq_len);
    apply_pipeline(test_prepared.frames, pipeline);

    const SequenceBatch train_batch = make_sequences(train_frames, pipeline.target, cfg.seq_len);
    const SequenceBatch test_batch = make_sequences(test_prepared.frames, pipeline.target, cfg.seq_len);

    // ---- training loop ----
    Rng init_rng(Rng::mix({cfg.seed, kTagModelInit, fold_tag}));
    ModelParams params = ModelParams::init(cfg.model, init_rng);
    OptimState optim = OptimState::init(params, cfg.lr, cfg.weight_decay);

    const int D = cfg.model.input_dim;
    const int L = cfg.model.seq_len;
    const std::size_t stride = static_cast<std::size_t>(L) * static_cast<std::size_t>(D);
    const std::size_t n_train = train_batch.count;

    FoldResult result;
    result.test_subject = fold.test_id;

    std::vector<std::size_t> order(n_train);
    std::iota(order.begin(), order.end(), 0);
    std::vector<double> batch_inputs;
    std::vector<double> batch_targets;

    double best_loss = std::numeric_limits<double>::infinity();
    int stale_epochs = 0;

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        Rng epoch_rng(Rng::mix({cfg.seed, kTagEpoch, fold_tag, static_cast<std::uint64_t>(epoch)}));
        epoch_rng.shuffle(order);

        double loss_sum = 0.0;
        for (std::size_t begin = 0; begin < n_train; begin += static_cast<std::size_t>(cfg.batch_size)) {
            const std::size_t end = std::min(begin + static_cast<std::size_t>(cfg.batch_size), n_train);
            const auto bsz = static_cast<int>(end - begin);
            batch_inputs.resize(static_cast<std::size_t>(bsz) * stride);
            batch_targets.resize(static_cast<std::size_t>(bsz));
            for (std::size_t i = begin; i < end; ++i) {
                const auto seq = train_batch.sequence(order[i]);
                std::copy(seq.begin(), seq.end(), batch_inputs.begin() + (i - begin) * stride);
                batch_targets[i - begin] = train_batch.targets[order[i]];
            }

            ForwardCache cache;
            const auto preds = forward(params, batch_inputs, bsz, Mode::train, &cache, &epoch_rng);
            const double loss = smooth_l1(preds, batch_targets, cfg.loss_beta);
            if (!std::isfinite(loss)) throw DivergedLoss(fold.test_id, epoch);
            loss_sum += loss * static_cast<double>(bsz);

            const auto dpreds = smooth_l1_grad(preds, batch_targets, cfg.loss_beta);
            ModelParams grads = backward(params, cache, dpreds);
            adamw_step(params, grads, optim);
            update_running_stats(params, cache);
        }
        const double epoch_loss = loss_sum / static_cast<double>(n_train);
        result.train_loss.push_back(epoch_loss);

        if (cfg.patience > 0) {
            if (epoch_loss < best_loss) {
                best_loss = epoch_loss;
                stale_epochs = 0;
            } else if (++stale_epochs >= cfg.patience) {
                break;
            }
        }
    }

    // ---- held-out evaluation ----
    constexpr std::size_t kInferChunk = 512; // running-stat batch norm makes chunking irrelevant
    result.preds_cm.reserve(test_batch.count);
    result.truths_cm = test_batch.targets_cm;
    std::vector<double> chunk_inputs;
    for (std::size_t begin = 0; begin < test_batch.count; begin += kInferChunk) {
        const std::size_t end = std::min(begin + kInferChunk, test_batch.count);
        const auto bsz = static_cast<int>(end - begin);
        chunk_inputs.assign(test_batch.inputs.begin() + static_cast<std::ptrdiff_t>(begin * stride),
                            test_batch.inputs.begin() + static_cast<std::ptrdiff_t>(end * stride));
        const auto preds = forward(params, chunk_inputs, bsz, Mode::infer);
        for (double p : preds) result.preds_cm.push_back(pipeline.target.inverse(p));
    }
    result.mae_cm = mae(result.preds_cm, result.truths_cm);

    {
        const auto baseline = geometric_baseline(test_prepared.cleaned);
        std::vector<double> truths;
        truths.reserve(baseline.size());
        for (const auto& s : test_prepared.cleaned.samples) truths.push_back(s.gt_depth);
        result.baseline_mae_cm = mae(baseline, truths);
    }

    const std::string manifest_json = pipeline_to_json(pipeline);
    result.manifest_hash = fnv1a64_hex(manifest_json);

    if (!out_dir.empty()) {
        const std::string fold_dir = out_dir + "/folds/" + fold.test_id;
        std::error_code ec;
        std::filesystem::create_directories(fold_dir, ec);
        if (ec) throw IoFailure("cannot create '" + fold_dir + "': " + ec.message());

        write_text(fold_dir + "/pipeline_manifest.json", manifest_json + "\n");
        result.checkpoint_path = fold_dir + "/checkpoint.bin";
        save_checkpoint(result.checkpoint_path, params, result.manifest_hash);

        std::string preds_csv = "prediction_cm,truth_cm\n";
        for (std::size_t i = 0; i < result.preds_cm.size(); ++i)
            preds_csv += fmt17(result.preds_cm[i]) + "," + fmt17(result.truths_cm[i]) + "\n";
        write_text(fold_dir + "/predictions.csv", preds_csv);

        nlohmann::ordered_json fj;
        fj["subject"] = fold.test_id;
        fj["mae_cm"] = result.mae_cm;
        fj["baseline_mae_cm"] = result.baseline_mae_cm;
        fj["n_sequences"] = test_batch.count;
        fj["epochs_run"] = result.train_loss.size();
        fj["train_loss"] = result.train_loss;
        fj["manifest_hash"] = result.manifest_hash;
        write_text(fold_dir + "/fold.json", fj.dump(2) + "\n");
    }
    return result;
}

LoocvResult run_loocv(const std::vector<SubjectRecording>& recordings, const TrainConfig& cfg,
                      const std::string& out_dir, int jobs) {
    cfg.validate();
    if (jobs < 1) throw ConfigError("jobs must be >= 1");

    std::vector<std::string> ids;
    ids.reserve(recordings.size());
    for (const auto& rec : recordings) ids.push_back(rec.subject_id);
    const auto folds = loso_splits(ids);

    LoocvResult result;
    result.folds.resize(folds.size());

    const int workers = std::min<int>(jobs, static_cast<int>(folds.size()));
    if (workers <= 1) {
        for (std::size_t i = 0; i < folds.size(); ++i)
            result.folds[i] = train_fold(recordings, folds[i], cfg, out_dir);
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::thread> pool;
        std::vector<std::exception_ptr> errors(static_cast<std::size_t>(workers));
        for (int w = 0; w < workers; ++w) {
            pool.emplace_back([&, w]() {
                try {
                    for (;;) {
                        const std::size_t i = next.fetch_add(1);
                        if (i >= folds.size()) return;
                        result.folds[i] = train_fold(recordings, folds[i], cfg, out_dir);
                    }
                } catch (...) {
                    errors[static_cast<std::size_t>(w)] = std::current_exception();
                }
            });
        }
        for (auto& t : pool) t.join();
        for (const auto& e : errors)
            if (e) std::rethrow_exception(e);
    }

    // ---- aggregation (fold order, independent of completion order) ----
    double sum = 0.0;
    result.min_mae_cm = std::numeric_limits<double>::infinity();
    result.max_mae_cm = -std::numeric_limits<double>::infinity();
    double baseline_sum = 0.0;
    std::vector<double> pooled_preds, pooled_truths;
    std::vector<std::string> pooled_subjects;
    for (const auto& fr : result.folds) {
        sum += fr.mae_cm;
        baseline_sum += fr.baseline_mae_cm;
        result.min_mae_cm = std::min(result.min_mae_cm, fr.mae_cm);
        result.max_mae_cm = std::max(result.max_mae_cm, fr.mae_cm);
        pooled_preds.insert(pooled_preds.end(), fr.preds_cm.begin(), fr.preds_cm.end());
        pooled_truths.insert(pooled_truths.end(), fr.truths_cm.begin(), fr.truths_cm.end());
        pooled_subjects.insert(pooled_subjects.end(), fr.preds_cm.size(), fr.test_subject);
    }
    result.mean_mae_cm = sum / static_cast<double>(result.folds.size());
    result.baseline_mean_mae_cm = baseline_sum / static_cast<double>(result.folds.size());
    result.pooled = build_report(pooled_preds, pooled_truths, pooled_subjects, result.baseline_mean_mae_cm);

    if (!out_dir.empty()) {
        std::error_code ec;
        std::filesystem::create_directories(out_dir, ec);
        if (ec) throw IoFailure("cannot create '" + out_dir + "': " + ec.message());
        // The run-level report.json (written second) embeds the pooled
        // metrics that emit_report also drops alongside the CSV/SVG files.
        emit_report(result.pooled, pooled_preds, pooled_truths, out_dir);
        write_text(out_dir + "/report.json", loocv_report_json(result, cfg) + "\n");
    }
    return result;
}

std::string loocv_report_json(const LoocvResult& result, const TrainConfig& cfg) {
    nlohmann::ordered_json j;
    j["schema_version"] = 1;
    j["preset"] = cfg.preset_name;
    j["seed"] = cfg.seed;
    j["n_folds"] = result.folds.size();
    auto folds = nlohmann::ordered_json::array();
    for (const auto& fr : result.folds) {
        folds.push_back({{"subject", fr.test_subject},
                         {"mae_cm", fr.mae_cm},
                         {"baseline_mae_cm", fr.baseline_mae_cm},
                         {"n_predictions", fr.preds_cm.size()},
                         {"epochs_run", fr.train_loss.size()},
                         {"final_train_loss", fr.train_loss.empty() ? 0.0 : fr.train_loss.back()},
                         {"manifest_hash", fr.manifest_hash}});
    }
    j["folds"] = folds;
    j["aggregate"] = {{"mean_mae_cm", result.mean_mae_cm},
                      {"min_mae_cm", result.min_mae_cm},
                      {"max_mae_cm", result.max_mae_cm},
                      {"baseline_mean_mae_cm", result.baseline_mean_mae_cm}};
    j["metrics"] = nlohmann::ordered_json::parse(report_to_json(result.pooled));
    return j.dump(2);
}

} // namespace foval
