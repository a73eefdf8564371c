#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "foval/dataset.hpp"
#include "foval/eval.hpp"
#include "foval/nn.hpp"
#include "foval/preprocess.hpp"

namespace foval {

struct TrainConfig {
    std::string preset_name = "toy";
    ModelConfig model = ModelConfig::toy();
    int epochs = 25;
    int batch_size = 32;
    double lr = 1e-3;
    double weight_decay = 0.01;
    double loss_beta = 0.75; // in scaled-target units
    std::uint64_t seed = 42;
    int patience = 0; // early stop on the train loss; 0 disables
    CleaningConfig cleaning;
    BalanceConfig balance;
    int seq_len = kSequenceLen;

    static TrainConfig toy();
    static TrainConfig paper(); // 2000 epochs, batch 460, lr 0.033, wd 0.0906
    void validate() const;      // throws ConfigError
};

struct FoldResult {
    std::string test_subject;
    std::vector<double> train_loss;  // per epoch
    std::vector<double> preds_cm;    // inverse-scaled test predictions
    std::vector<double> truths_cm;   // matching targets
    double mae_cm = 0.0;
    double baseline_mae_cm = 0.0; // geometric vergence on the cleaned test recording
    std::string checkpoint_path;  // empty when no out_dir was given
    std::string manifest_hash;
};

// Trains one leave-one-subject-out fold. Every statistic (scaler, transforms,
// target range) is fitted on the training subjects only; balancing resamples
// training frames only. Deterministic given cfg.seed and the fold.
// When out_dir is non-empty, writes out_dir/folds/<subject>/{checkpoint.bin,
// pipeline_manifest.json, fold.json, predictions.csv}.
FoldResult train_fold(const std::vector<SubjectRecording>& recordings, const Fold& fold,
                      const TrainConfig& cfg, const std::string& out_dir = "");

struct LoocvResult {
    std::vector<FoldResult> folds;
    double mean_mae_cm = 0.0;
    double min_mae_cm = 0.0;
    double max_mae_cm = 0.0;
    double baseline_mean_mae_cm = 0.0;
    EvalReport pooled; // over all held-out predictions
};

// One fold per subject (LOSO order seeded at 42), optionally `jobs` folds in
// parallel; results are identical for any jobs value. Writes report.json and
// the evaluation artifacts under out_dir when given.
LoocvResult run_loocv(const std::vector<SubjectRecording>& recordings, const TrainConfig& cfg,
                      const std::string& out_dir = "", int jobs = 1);

std::string loocv_report_json(const LoocvResult& result, const TrainConfig& cfg);

} // namespace foval
