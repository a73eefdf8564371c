#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "foval/dataset.hpp"
#include "foval/features.hpp"

namespace foval {

// ---- configuration ----

struct CleaningConfig {
    int window_size = 5;      // rolling-mean window over the target series
    double threshold_cm = 10; // anomaly cutoff on |value - window mean|
    double iqr_factor = 1.5;  // Tukey fence factor for feature columns

    void validate() const; // throws ConfigError
};

struct BalanceConfig {
    double bin_width_cm = 10.0;
    double range_min_cm = 0.0;
    double range_max_cm = 600.0; // 60 bins with the defaults
    std::uint64_t seed = 0;
};

// ---- cleaning ----

// Flags element i when |series[i] - mean(W_i)| > threshold, where W_i is the
// clamped centered window series[max(i-w/2,0) .. min(i+w/2+1, n)). All
// decisions are made against the original series; removal happens afterward.
std::vector<bool> target_anomaly_flags(std::span<const double> series, const CleaningConfig& cfg);

// Keep-mask of the Tukey fences [Q1 - k*IQR, Q3 + k*IQR] applied to every
// column independently; a row survives only if every column accepts it.
// `columns[c][i]` is column c's value in row i. Throws TooFewFrames if fewer
// than 4 rows.
std::vector<bool> iqr_keep_mask(const std::vector<std::vector<double>>& columns, double iqr_factor);

std::vector<FeatureFrame> remove_target_anomalies(const std::vector<FeatureFrame>& frames,
                                                  const CleaningConfig& cfg);
std::vector<FeatureFrame> remove_feature_outliers_iqr(const std::vector<FeatureFrame>& frames,
                                                      const CleaningConfig& cfg);

// Applies both cleaning passes to one subject's raw samples: the anomaly rule
// on the ground-truth depth series, then Tukey fences over the 12 raw input
// columns. Samples without ground truth are kept as-is by the anomaly rule.
SubjectRecording clean_recording(const SubjectRecording& recording, const CleaningConfig& cfg);

// Full per-subject preparation: raw cleaning, feature engineering, then the
// Tukey-fence pass over the 54 engineered columns (ratio features have heavy
// tails that would otherwise saturate the network). `cleaned` keeps exactly
// the samples whose frames survive, so frame i describes sample i.
struct PreparedSubject {
    SubjectRecording cleaned;
    std::vector<FeatureFrame> frames;
};

PreparedSubject prepare_subject(const SubjectRecording& recording, const CleaningConfig& cfg);

// ---- balancing ----

// Quantizes targets into fixed-width bins over [range_min, range_max] and
// resamples every non-empty bin to ceil(mean non-empty bin count): short bins
// draw with replacement, long bins without, exact-size bins pass through.
// Output is the concatenation of bins in bin order.
std::vector<FeatureFrame> balance_by_bins(const std::vector<FeatureFrame>& frames,
                                          const BalanceConfig& cfg);

// ---- splitting ----

struct Fold {
    std::vector<std::string> train_ids;
    std::string test_id;
};

// One fold per subject; fold order is a seeded Fisher-Yates shuffle of the
// sorted unique ids (seed 42 by default). Throws TooFewSubjects.
std::vector<Fold> loso_splits(std::vector<std::string> subject_ids, std::uint64_t seed = 42);

// ---- normalization ----

struct ScalerParams {
    std::array<double, kFeatureCount> median{};
    std::array<double, kFeatureCount> iqr{}; // zero IQR replaced by 1
};

ScalerParams fit_global_scaler(const std::vector<FeatureFrame>& train_frames);
void apply_global_scaler(std::vector<FeatureFrame>& frames, const ScalerParams& params);

// Per subject, per feature: (x - median_s) / IQR_s from that subject's own
// frames (zero IQR replaced by 1). Needs no fitted state.
void subject_normalize(std::vector<FeatureFrame>& frames);

// ---- distribution transforms ----

enum class TransformKind { identity, log, sqrt, box_cox };

struct FeatureTransform {
    TransformKind kind = TransformKind::identity;
    double shift = 0.0;    // additive positivity shift, 0 when the training
                           // minimum already admits the transform
    double lambda = 0.0;   // Box-Cox exponent
    double distance = 0.0; // sqrt(skew^2 + (kurtosis-3)^2) achieved on train
};

struct TransformChoice {
    std::array<FeatureTransform, kFeatureCount> per_feature{};
};

// Evaluates {identity, log(x+s), sqrt(x+s), box-cox(x+s, lambda in [-2,2]
// step 0.1)} per feature on training data, where s is a positivity shift
// derived from the training minimum and applied only when that minimum
// requires one. Keeps the candidate with the smallest distance to (skew 0,
// kurtosis 3); degenerate/undefined candidates score infinity and earlier
// candidates win ties.
TransformChoice select_transforms(const std::vector<FeatureFrame>& train_frames);
void apply_transforms(std::vector<FeatureFrame>& frames, const TransformChoice& choice);

double apply_transform_value(double x, const FeatureTransform& t);

// ---- target scaling ----

struct TargetScaler {
    double y_min = 0.0;
    double y_max = 0.0;
    double lo = 0.0;
    double hi = 1000.0;

    double scale(double y) const;
    double inverse(double scaled) const;
};

// Throws DegenerateRange when the training targets are constant.
TargetScaler fit_target_scaler(const std::vector<FeatureFrame>& train_frames);

// ---- sequences ----

inline constexpr int kSequenceLen = 10;

struct SequenceBatch {
    int seq_len = kSequenceLen;
    std::size_t count = 0;
    std::vector<double> inputs;     // [count][seq_len][kFeatureCount], row-major
    std::vector<double> targets;    // scaled target of the frame after each window
    std::vector<double> targets_cm; // same target in original cm (for reports)
    std::vector<int> subject;       // per sequence

    std::span<const double> sequence(std::size_t i) const {
        const std::size_t stride = static_cast<std::size_t>(seq_len) * kFeatureCount;
        return {inputs.data() + i * stride, stride};
    }
};

// Slides a length-L window one frame at a time within each subject; the
// target is the scaled depth of the frame that follows the window, so each
// subject with N frames yields N - L sequences. Frames must already carry
// scaled targets via `scaler`. Throws SubjectTooShort.
SequenceBatch make_sequences(const std::vector<FeatureFrame>& frames, const TargetScaler& scaler,
                             int seq_len = kSequenceLen);

// ---- fitted-pipeline manifest ----

struct PipelineParams {
    CleaningConfig cleaning;
    BalanceConfig balance;
    ScalerParams scaler;
    TransformChoice transforms;
    TargetScaler target;
    int seq_len = kSequenceLen;
};

std::string pipeline_to_json(const PipelineParams& p);
PipelineParams pipeline_from_json(const std::string& text);

// Fits every trainable statistic on `train` (already cleaned, balanced
// feature frames) and returns the manifest; `train` is modified in place to
// the fully normalized/transformed representation.
PipelineParams fit_pipeline(std::vector<FeatureFrame>& train, const CleaningConfig& cleaning,
                            const BalanceConfig& balance, int seq_len = kSequenceLen);

// Applies fitted statistics to held-out frames (global scaling with train
// stats, per-subject normalization, train-selected transforms).
void apply_pipeline(std::vector<FeatureFrame>& frames, const PipelineParams& params);

} // namespace foval
