#include "foval/preprocess.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include "foval/error.hpp"
#include "foval/rng.hpp"
#include "foval/stats.hpp"

#include <nlohmann/json.hpp>

namespace foval {

namespace {

constexpr std::uint64_t kTagBalance = 0x42414c31u;
constexpr std::uint64_t kTagLoso = 0x4c4f534fu;
constexpr double kInf = std::numeric_limits<double>::infinity();

double skew_kurt_distance(std::span<const double> v) {
    const double s = stats::skewness(v);
    const double k = stats::kurtosis(v);
    if (!std::isfinite(s) || !std::isfinite(k)) return kInf;
    return std::sqrt(s * s + (k - 3.0) * (k - 3.0));
}

template <typename T>
std::vector<T> filter_by_mask(const std::vector<T>& items, const std::vector<bool>& keep) {
    std::vector<T> out;
    out.reserve(items.size());
    for (std::size_t i = 0; i < items.size(); ++i)
        if (keep[i]) out.push_back(items[i]);
    return out;
}

// Group frame indices by subject, groups ordered by first appearance and
// indices kept in input order.
std::vector<std::pair<int, std::vector<std::size_t>>> group_by_subject(
    const std::vector<FeatureFrame>& frames) {
    std::vector<std::pair<int, std::vector<std::size_t>>> groups;
    std::map<int, std::size_t> slot;
    for (std::size_t i = 0; i < frames.size(); ++i) {
        auto [it, inserted] = slot.try_emplace(frames[i].subject, groups.size());
        if (inserted) groups.push_back({frames[i].subject, {}});
        groups[it->second].second.push_back(i);
    }
    return groups;
}

} // namespace

void CleaningConfig::validate() const {
    if (window_size < 1) throw ConfigError("window_size must be >= 1");
    if (!(threshold_cm > 0.0)) throw ConfigError("threshold_cm must be > 0");
    if (!(iqr_factor > 0.0)) throw ConfigError("iqr_factor must be > 0");
}

std::vector<bool> target_anomaly_flags(std::span<const double> series, const CleaningConfig& cfg) {
    cfg.validate();
    const std::size_t n = series.size();
    const std::size_t half = static_cast<std::size_t>(cfg.window_size) / 2;
    std::vector<bool> flagged(n, false);
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t start = (i >= half) ? i - half : 0;
        const std::size_t end = std::min(i + half + 1, n);
        double sum = 0.0;
        for (std::size_t j = start; j < end; ++j) sum += series[j];
        const double mean = sum / static_cast<double>(end - start);
        flagged[i] = std::abs(series[i] - mean) > cfg.threshold_cm;
    }
    return flagged;
}

std::vector<bool> iqr_keep_mask(const std::vector<std::vector<double>>& columns, double iqr_factor) {
    if (columns.empty()) return {};
    const std::size_t n = columns.front().size();
    if (n < 4) throw TooFewFrames(n, 4);
    std::vector<bool> keep(n, true);
    for (const auto& column : columns) {
        const auto sorted = stats::sorted_copy(column);
        const double q1 = stats::quantile_sorted(sorted, 0.25);
        const double q3 = stats::quantile_sorted(sorted, 0.75);
        const double fence = iqr_factor * (q3 - q1);
        const double lo = q1 - fence;
        const double hi = q3 + fence;
        for (std::size_t i = 0; i < n; ++i)
            if (column[i] < lo || column[i] > hi) keep[i] = false;
    }
    return keep;
}

std::vector<FeatureFrame> remove_target_anomalies(const std::vector<FeatureFrame>& frames,
                                                  const CleaningConfig& cfg) {
    std::vector<double> series(frames.size());
    for (std::size_t i = 0; i < frames.size(); ++i) series[i] = frames[i].gt_depth;
    auto flagged = target_anomaly_flags(series, cfg);
    flagged.flip();
    return filter_by_mask(frames, flagged);
}

std::vector<FeatureFrame> remove_feature_outliers_iqr(const std::vector<FeatureFrame>& frames,
                                                      const CleaningConfig& cfg) {
    cfg.validate();
    std::vector<std::vector<double>> columns(kFeatureCount, std::vector<double>(frames.size()));
    for (std::size_t i = 0; i < frames.size(); ++i)
        for (int f = 0; f < kFeatureCount; ++f)
            columns[static_cast<std::size_t>(f)][i] = frames[i].x[static_cast<std::size_t>(f)];
    return filter_by_mask(frames, iqr_keep_mask(columns, cfg.iqr_factor));
}

SubjectRecording clean_recording(const SubjectRecording& recording, const CleaningConfig& cfg) {
    cfg.validate();
    const auto& samples = recording.samples;

    // Pass 1: rolling-mean anomaly rule on the target series. Skipped when
    // ground truth is absent (inference-time data).
    std::vector<GazeSample> kept;
    const bool all_depths = std::all_of(samples.begin(), samples.end(),
                                        [](const GazeSample& s) { return s.has_depth(); });
    if (all_depths && !samples.empty()) {
        std::vector<double> series(samples.size());
        for (std::size_t i = 0; i < samples.size(); ++i) series[i] = samples[i].gt_depth;
        const auto flagged = target_anomaly_flags(series, cfg);
        for (std::size_t i = 0; i < samples.size(); ++i)
            if (!flagged[i]) kept.push_back(samples[i]);
    } else {
        kept = samples;
    }

    // Pass 2: Tukey fences over the 12 raw input columns of the survivors.
    std::vector<std::vector<double>> columns(12, std::vector<double>(kept.size()));
    for (std::size_t i = 0; i < kept.size(); ++i) {
        const GazeSample& s = kept[i];
        const double raw[12] = {s.origin_l.x, s.origin_l.y, s.origin_l.z, s.origin_r.x,
                                s.origin_r.y, s.origin_r.z, s.dir_l.x,    s.dir_l.y,
                                s.dir_l.z,    s.dir_r.x,    s.dir_r.y,    s.dir_r.z};
        for (int c = 0; c < 12; ++c) columns[static_cast<std::size_t>(c)][i] = raw[c];
    }
    const auto keep = iqr_keep_mask(columns, cfg.iqr_factor);

    SubjectRecording out;
    out.subject_id = recording.subject_id;
    for (std::size_t i = 0; i < kept.size(); ++i)
        if (keep[i]) out.samples.push_back(kept[i]);
    return out;
}

PreparedSubject prepare_subject(const SubjectRecording& recording, const CleaningConfig& cfg) {
    cfg.validate();
    PreparedSubject p;

    // Anomaly pass on the target series (skipped when depth is absent).
    p.cleaned.subject_id = recording.subject_id;
    const bool all_depths = std::all_of(recording.samples.begin(), recording.samples.end(),
                                        [](const GazeSample& s) { return s.has_depth(); });
    if (all_depths && !recording.samples.empty()) {
        std::vector<double> series(recording.samples.size());
        for (std::size_t i = 0; i < series.size(); ++i) series[i] = recording.samples[i].gt_depth;
        const auto flagged = target_anomaly_flags(series, cfg);
        for (std::size_t i = 0; i < series.size(); ++i)
            if (!flagged[i]) p.cleaned.samples.push_back(recording.samples[i]);
    } else {
        p.cleaned.samples = recording.samples;
    }

    // Tukey fences over the engineered feature columns; ratio features have
    // heavy tails that would otherwise saturate the network.
    auto frames = compute_feature_frames(p.cleaned);

    std::vector<std::vector<double>> columns(kFeatureCount, std::vector<double>(frames.size()));
    for (std::size_t i = 0; i < frames.size(); ++i)
        for (int f = 0; f < kFeatureCount; ++f)
            columns[static_cast<std::size_t>(f)][i] = frames[i].x[static_cast<std::size_t>(f)];
    const auto keep = iqr_keep_mask(columns, cfg.iqr_factor);

    std::vector<GazeSample> kept_samples;
    for (std::size_t i = 0; i < frames.size(); ++i) {
        if (!keep[i]) continue;
        kept_samples.push_back(p.cleaned.samples[i]);
        p.frames.push_back(frames[i]);
    }
    p.cleaned.samples = std::move(kept_samples);
    return p;
}

std::vector<FeatureFrame> balance_by_bins(const std::vector<FeatureFrame>& frames,
                                          const BalanceConfig& cfg) {
    if (frames.empty()) throw EmptyInput("balance_by_bins");
    if (!(cfg.bin_width_cm > 0.0) || !(cfg.range_max_cm > cfg.range_min_cm))
        throw ConfigError("bad balance bin configuration");

    const auto n_bins = static_cast<std::size_t>(
        std::llround((cfg.range_max_cm - cfg.range_min_cm) / cfg.bin_width_cm));
    std::vector<std::vector<std::size_t>> bins(n_bins);
    for (std::size_t i = 0; i < frames.size(); ++i) {
        double pos = (frames[i].gt_depth - cfg.range_min_cm) / cfg.bin_width_cm;
        auto b = static_cast<std::int64_t>(std::floor(pos));
        b = std::clamp<std::int64_t>(b, 0, static_cast<std::int64_t>(n_bins) - 1);
        bins[static_cast<std::size_t>(b)].push_back(i);
    }

    std::size_t non_empty = 0;
    for (const auto& b : bins) non_empty += b.empty() ? 0 : 1;
    const auto target_count = static_cast<std::size_t>(
        std::ceil(static_cast<double>(frames.size()) / static_cast<double>(non_empty)));

    std::vector<FeatureFrame> out;
    out.reserve(non_empty * target_count);
    for (std::size_t b = 0; b < n_bins; ++b) {
        auto& members = bins[b];
        if (members.empty()) continue;
        Rng rng(Rng::mix({cfg.seed, kTagBalance, static_cast<std::uint64_t>(b)}));
        std::vector<std::size_t> chosen;
        if (members.size() == target_count) {
            chosen = members;
        } else if (members.size() < target_count) {
            chosen.reserve(target_count);
            for (std::size_t k = 0; k < target_count; ++k)
                chosen.push_back(members[rng.bounded(members.size())]);
        } else {
            rng.shuffle(members);
            chosen.assign(members.begin(), members.begin() + static_cast<std::ptrdiff_t>(target_count));
        }
        // Ascending original order keeps resampled frames temporally coherent
        // inside the bin, which sequence windows rely on downstream.
        std::sort(chosen.begin(), chosen.end());
        for (std::size_t idx : chosen) out.push_back(frames[idx]);
    }
    return out;
}

std::vector<Fold> loso_splits(std::vector<std::string> subject_ids, std::uint64_t seed) {
    std::sort(subject_ids.begin(), subject_ids.end());
    subject_ids.erase(std::unique(subject_ids.begin(), subject_ids.end()), subject_ids.end());
    if (subject_ids.size() < 2) throw TooFewSubjects(subject_ids.size());

    Rng rng(Rng::mix({seed, kTagLoso}));
    rng.shuffle(subject_ids);

    std::vector<Fold> folds;
    folds.reserve(subject_ids.size());
    for (std::size_t i = 0; i < subject_ids.size(); ++i) {
        Fold fold;
        fold.test_id = subject_ids[i];
        for (std::size_t j = 0; j < subject_ids.size(); ++j)
            if (j != i) fold.train_ids.push_back(subject_ids[j]);
        folds.push_back(std::move(fold));
    }
    return folds;
}

ScalerParams fit_global_scaler(const std::vector<FeatureFrame>& train_frames) {
    if (train_frames.empty()) throw EmptyInput("fit_global_scaler");
    ScalerParams p;
    std::vector<double> column(train_frames.size());
    for (int f = 0; f < kFeatureCount; ++f) {
        for (std::size_t i = 0; i < train_frames.size(); ++i)
            column[i] = train_frames[i].x[static_cast<std::size_t>(f)];
        const auto sorted = stats::sorted_copy(column);
        p.median[static_cast<std::size_t>(f)] = stats::quantile_sorted(sorted, 0.5);
        const double iqr = stats::quantile_sorted(sorted, 0.75) - stats::quantile_sorted(sorted, 0.25);
        p.iqr[static_cast<std::size_t>(f)] = (iqr > 0.0) ? iqr : 1.0;
    }
    return p;
}

void apply_global_scaler(std::vector<FeatureFrame>& frames, const ScalerParams& params) {
    for (auto& frame : frames)
        for (int f = 0; f < kFeatureCount; ++f) {
            auto& v = frame.x[static_cast<std::size_t>(f)];
            v = (v - params.median[static_cast<std::size_t>(f)]) / params.iqr[static_cast<std::size_t>(f)];
        }
}

void subject_normalize(std::vector<FeatureFrame>& frames) {
    for (const auto& [subject, indices] : group_by_subject(frames)) {
        std::vector<double> column(indices.size());
        for (int f = 0; f < kFeatureCount; ++f) {
            for (std::size_t k = 0; k < indices.size(); ++k)
                column[k] = frames[indices[k]].x[static_cast<std::size_t>(f)];
            const auto sorted = stats::sorted_copy(column);
            const double median = stats::quantile_sorted(sorted, 0.5);
            double iqr = stats::quantile_sorted(sorted, 0.75) - stats::quantile_sorted(sorted, 0.25);
            if (!(iqr > 0.0)) iqr = 1.0;
            for (std::size_t k : indices) {
                auto& v = frames[k].x[static_cast<std::size_t>(f)];
                v = (v - median) / iqr;
            }
        }
    }
}

double apply_transform_value(double x, const FeatureTransform& t) {
    constexpr double kFloor = 1e-12;
    switch (t.kind) {
    case TransformKind::identity:
        return x;
    case TransformKind::log:
        return std::log(std::max(x + t.shift, kFloor));
    case TransformKind::sqrt:
        return std::sqrt(std::max(x + t.shift, 0.0));
    case TransformKind::box_cox: {
        const double w = std::max(x + t.shift, kFloor);
        if (t.lambda == 0.0) return std::log(w);
        return (std::pow(w, t.lambda) - 1.0) / t.lambda;
    }
    }
    return x;
}

TransformChoice select_transforms(const std::vector<FeatureFrame>& train_frames) {
    if (train_frames.empty()) throw EmptyInput("select_transforms");
    TransformChoice choice;
    const std::size_t n = train_frames.size();

    std::vector<double> column(n), log_shifted(n), candidate(n);
    for (int f = 0; f < kFeatureCount; ++f) {
        for (std::size_t i = 0; i < n; ++i) column[i] = train_frames[i].x[static_cast<std::size_t>(f)];
        const auto [min_it, max_it] = std::minmax_element(column.begin(), column.end());
        const double min_v = *min_it;

        // A constant column stays constant under every candidate; skewness
        // and kurtosis are undefined, so identity wins by the degenerate
        // policy. (Checked exactly: rounding fuzz in the transformed values
        // must not manufacture a fake distribution.)
        if (*min_it == *max_it) {
            choice.per_feature[static_cast<std::size_t>(f)] = {TransformKind::identity, 0.0, 0.0, kInf};
            continue;
        }

        // Positivity shifts kick in only when the training minimum needs one;
        // already-valid features are transformed as-is.
        const double pos_shift = (min_v > 0.0) ? 0.0 : 1.0 - min_v;  // for log and Box-Cox
        const double sqrt_shift = (min_v >= 0.0) ? 0.0 : -min_v;

        FeatureTransform best{TransformKind::identity, 0.0, 0.0, skew_kurt_distance(column)};

        for (std::size_t i = 0; i < n; ++i) {
            log_shifted[i] = std::log(column[i] + pos_shift);
            candidate[i] = log_shifted[i];
        }
        if (const double d = skew_kurt_distance(candidate); d < best.distance)
            best = {TransformKind::log, pos_shift, 0.0, d};

        for (std::size_t i = 0; i < n; ++i) candidate[i] = std::sqrt(column[i] + sqrt_shift);
        if (const double d = skew_kurt_distance(candidate); d < best.distance)
            best = {TransformKind::sqrt, sqrt_shift, 0.0, d};

        // Box-Cox over the lambda grid; pow(w, lambda) = exp(lambda * log w)
        // reuses the shifted logs computed above.
        for (int k = -20; k <= 20; ++k) {
            const double lambda = static_cast<double>(k) / 10.0;
            if (lambda == 0.0) continue; // identical to the log candidate
            for (std::size_t i = 0; i < n; ++i)
                candidate[i] = (std::exp(lambda * log_shifted[i]) - 1.0) / lambda;
            if (const double d = skew_kurt_distance(candidate); d < best.distance)
                best = {TransformKind::box_cox, pos_shift, lambda, d};
        }
        choice.per_feature[static_cast<std::size_t>(f)] = best;
    }
    return choice;
}

void apply_transforms(std::vector<FeatureFrame>& frames, const TransformChoice& choice) {
    for (auto& frame : frames)
        for (int f = 0; f < kFeatureCount; ++f) {
            auto& v = frame.x[static_cast<std::size_t>(f)];
            v = apply_transform_value(v, choice.per_feature[static_cast<std::size_t>(f)]);
        }
}

double TargetScaler::scale(double y) const {
    return lo + (y - y_min) * (hi - lo) / (y_max - y_min);
}

double TargetScaler::inverse(double scaled) const {
    return y_min + (scaled - lo) * (y_max - y_min) / (hi - lo);
}

TargetScaler fit_target_scaler(const std::vector<FeatureFrame>& train_frames) {
    if (train_frames.empty()) throw EmptyInput("fit_target_scaler");
    TargetScaler s;
    s.y_min = kInf;
    s.y_max = -kInf;
    for (const auto& f : train_frames) {
        s.y_min = std::min(s.y_min, f.gt_depth);
        s.y_max = std::max(s.y_max, f.gt_depth);
    }
    if (!(s.y_min < s.y_max)) throw DegenerateRange("target min equals max");
    return s;
}

SequenceBatch make_sequences(const std::vector<FeatureFrame>& frames, const TargetScaler& scaler,
                             int seq_len) {
    if (seq_len < 1) throw ConfigError("seq_len must be >= 1");
    SequenceBatch batch;
    batch.seq_len = seq_len;
    const auto L = static_cast<std::size_t>(seq_len);

    for (const auto& [subject, indices] : group_by_subject(frames)) {
        if (indices.size() <= L)
            throw SubjectTooShort("subject#" + std::to_string(subject), indices.size(), L);
        for (std::size_t n = 0; n + L < indices.size(); ++n) {
            for (std::size_t j = 0; j < L; ++j) {
                const auto& x = frames[indices[n + j]].x;
                batch.inputs.insert(batch.inputs.end(), x.begin(), x.end());
            }
            const double y_cm = frames[indices[n + L]].gt_depth;
            batch.targets.push_back(scaler.scale(y_cm));
            batch.targets_cm.push_back(y_cm);
            batch.subject.push_back(subject);
            ++batch.count;
        }
    }
    return batch;
}

// ---- manifest ----

namespace {

const char* kind_name(TransformKind k) {
    switch (k) {
    case TransformKind::identity: return "identity";
    case TransformKind::log: return "log";
    case TransformKind::sqrt: return "sqrt";
    case TransformKind::box_cox: return "box_cox";
    }
    return "identity";
}

TransformKind kind_from_name(const std::string& s) {
    if (s == "identity") return TransformKind::identity;
    if (s == "log") return TransformKind::log;
    if (s == "sqrt") return TransformKind::sqrt;
    if (s == "box_cox") return TransformKind::box_cox;
    throw Error("unknown transform kind '" + s + "'");
}

} // namespace

std::string pipeline_to_json(const PipelineParams& p) {
    nlohmann::ordered_json j;
    j["version"] = 1;
    j["feature_count"] = kFeatureCount;
    j["cleaning"] = {{"window_size", p.cleaning.window_size},
                     {"threshold_cm", p.cleaning.threshold_cm},
                     {"iqr_factor", p.cleaning.iqr_factor}};
    j["balance"] = {{"bin_width_cm", p.balance.bin_width_cm},
                    {"range_min_cm", p.balance.range_min_cm},
                    {"range_max_cm", p.balance.range_max_cm},
                    {"seed", p.balance.seed}};
    j["global_scaler"] = {{"median", p.scaler.median}, {"iqr", p.scaler.iqr}};
    auto transforms = nlohmann::ordered_json::array();
    for (int f = 0; f < kFeatureCount; ++f) {
        const auto& t = p.transforms.per_feature[static_cast<std::size_t>(f)];
        transforms.push_back({{"feature", feature_table()[static_cast<std::size_t>(f)].name},
                              {"kind", kind_name(t.kind)},
                              {"shift", t.shift},
                              {"lambda", t.lambda},
                              {"distance", t.distance}});
    }
    j["transforms"] = transforms;
    j["target_scaler"] = {{"y_min", p.target.y_min}, {"y_max", p.target.y_max},
                          {"lo", p.target.lo},       {"hi", p.target.hi}};
    j["sequence_len"] = p.seq_len;
    return j.dump(2);
}

PipelineParams pipeline_from_json(const std::string& text) {
    const auto j = nlohmann::json::parse(text);
    if (j.at("feature_count").get<int>() != kFeatureCount)
        throw Error("manifest feature_count mismatch");
    PipelineParams p;
    p.cleaning.window_size = j.at("cleaning").at("window_size").get<int>();
    p.cleaning.threshold_cm = j.at("cleaning").at("threshold_cm").get<double>();
    p.cleaning.iqr_factor = j.at("cleaning").at("iqr_factor").get<double>();
    p.balance.bin_width_cm = j.at("balance").at("bin_width_cm").get<double>();
    p.balance.range_min_cm = j.at("balance").at("range_min_cm").get<double>();
    p.balance.range_max_cm = j.at("balance").at("range_max_cm").get<double>();
    p.balance.seed = j.at("balance").at("seed").get<std::uint64_t>();
    const auto& medians = j.at("global_scaler").at("median");
    const auto& iqrs = j.at("global_scaler").at("iqr");
    for (int f = 0; f < kFeatureCount; ++f) {
        p.scaler.median[static_cast<std::size_t>(f)] = medians.at(static_cast<std::size_t>(f)).get<double>();
        p.scaler.iqr[static_cast<std::size_t>(f)] = iqrs.at(static_cast<std::size_t>(f)).get<double>();
    }
    const auto& transforms = j.at("transforms");
    if (transforms.size() != kFeatureCount) throw Error("manifest transform count mismatch");
    for (int f = 0; f < kFeatureCount; ++f) {
        const auto& t = transforms.at(static_cast<std::size_t>(f));
        auto& out = p.transforms.per_feature[static_cast<std::size_t>(f)];
        out.kind = kind_from_name(t.at("kind").get<std::string>());
        out.shift = t.at("shift").get<double>();
        out.lambda = t.at("lambda").get<double>();
        // Undefined distances (constant features) serialize as null.
        out.distance = t.at("distance").is_null() ? std::numeric_limits<double>::infinity()
                                                  : t.at("distance").get<double>();
    }
    p.target.y_min = j.at("target_scaler").at("y_min").get<double>();
    p.target.y_max = j.at("target_scaler").at("y_max").get<double>();
    p.target.lo = j.at("target_scaler").at("lo").get<double>();
    p.target.hi = j.at("target_scaler").at("hi").get<double>();
    p.seq_len = j.at("sequence_len").get<int>();
    return p;
}

PipelineParams fit_pipeline(std::vector<FeatureFrame>& train, const CleaningConfig& cleaning,
                            const BalanceConfig& balance, int seq_len) {
    PipelineParams params;
    params.cleaning = cleaning;
    params.balance = balance;
    params.seq_len = seq_len;
    params.scaler = fit_global_scaler(train);
    apply_global_scaler(train, params.scaler);
    subject_normalize(train);
    params.transforms = select_transforms(train);
    apply_transforms(train, params.transforms);
    params.target = fit_target_scaler(train);
    return params;
}

void apply_pipeline(std::vector<FeatureFrame>& frames, const PipelineParams& params) {
    apply_global_scaler(frames, params.scaler);
    subject_normalize(frames);
    apply_transforms(frames, params.transforms);
}

} // namespace foval
