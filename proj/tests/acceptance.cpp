// Acceptance suite: runs every gate criterion at its stated tolerance and
// prints one PASS/FAIL line each. Exit code 0 only if all pass.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "foval/error.hpp"
#include "foval/eval.hpp"
#include "foval/features.hpp"
#include "foval/nn.hpp"
#include "foval/preprocess.hpp"
#include "foval/rng.hpp"
#include "foval/stats.hpp"
#include "foval/synth.hpp"
#include "foval/train.hpp"

#include "test_support.hpp"

using namespace foval;

namespace {

struct Harness {
    int failures = 0;
    int index = 0;
    int total = 0;

    void run(const std::string& name, double budget_s, const std::function<std::string()>& body) {
        ++index;
        const auto start = std::chrono::steady_clock::now();
        std::string detail;
        bool ok = true;
        try {
            detail = body();
        } catch (const std::exception& e) {
            ok = false;
            detail = e.what();
        }
        const double elapsed =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        if (ok && budget_s > 0.0 && elapsed > budget_s) {
            ok = false;
            detail += " [exceeded " + std::to_string(budget_s) + " s budget]";
        }
        std::printf("[%d/%d] %s %s (%.2f s)%s%s\n", index, total, ok ? "PASS" : "FAIL", name.c_str(),
                    elapsed, detail.empty() ? "" : " -- ", detail.c_str());
        std::fflush(stdout);
        if (!ok) ++failures;
    }
};

void require(bool cond, const std::string& what) {
    if (!cond) throw std::runtime_error(what);
}

std::string fmt(const char* spec, double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), spec, v);
    return buf;
}

// ---- criterion 1 ----
std::string geometric_oracle() {
    SynthConfig cfg;
    cfg.n_subjects = 6;
    cfg.frames_per_subject = 3000;
    cfg.noise_sigma_deg = 0.0;
    cfg.bias_sigma_deg = 0.0;
    cfg.seed = 2027;
    const auto vd_index = static_cast<std::size_t>(feature_index("vergence_depth"));
    double max_rel = 0.0;
    for (int s = 0; s < cfg.n_subjects; ++s) {
        const auto rec = generate_subject(cfg, s);
        const auto frames = compute_feature_frames(rec);
        for (std::size_t i = 0; i < frames.size(); ++i) {
            const double rel =
                std::abs(frames[i].x[vd_index] - rec.samples[i].gt_depth) / rec.samples[i].gt_depth;
            max_rel = std::max(max_rel, rel);
        }
    }
    require(max_rel < 1e-9, "max relative error " + fmt("%.3e", max_rel) + " >= 1e-9");
    return "max rel err " + fmt("%.3e", max_rel) + " over 18000 frames";
}

// ---- criterion 2 ----
std::string gradient_check() {
    ModelConfig cfg;
    cfg.hidden_dim = 4;
    cfg.fc1_dim = 5;
    cfg.fc2_dim = 3;
    cfg.seq_len = 3;
    cfg.dropout_p = 0.245;

    Rng rng(42);
    ModelParams params = ModelParams::init(cfg, rng);
    const int B = 2;
    std::vector<double> batch(static_cast<std::size_t>(B) * 3 * static_cast<std::size_t>(cfg.input_dim));
    for (auto& v : batch) v = rng.normal();
    std::vector<double> targets(B);
    for (auto& t : targets) t = rng.normal(0.0, 2.0);
    const double beta = 0.75;
    constexpr std::uint64_t kDropSeed = 4242;

    auto loss_at = [&](ModelParams& p) {
        Rng drop(kDropSeed);
        const auto preds = forward(p, batch, B, Mode::train, nullptr, &drop);
        return smooth_l1(preds, targets, beta);
    };

    ForwardCache cache;
    Rng drop(kDropSeed);
    const auto preds = forward(params, batch, B, Mode::train, &cache, &drop);
    ModelParams analytic = backward(params, cache, smooth_l1_grad(preds, targets, beta));

    const double h = 1e-5;
    double max_rel = 0.0;
    std::size_t n_params = 0;
    auto prefs = params.trainable();
    auto grefs = analytic.trainable();
    for (std::size_t t = 0; t < prefs.size(); ++t) {
        for (std::size_t i = 0; i < prefs[t].size; ++i) {
            const double saved = prefs[t].data[i];
            prefs[t].data[i] = saved + h;
            const double up = loss_at(params);
            prefs[t].data[i] = saved - h;
            const double down = loss_at(params);
            prefs[t].data[i] = saved;
            const double fd = (up - down) / (2.0 * h);
            const double an = grefs[t].data[i];
            const double denom = std::max({std::abs(fd), std::abs(an), 1e-3});
            max_rel = std::max(max_rel, std::abs(fd - an) / denom);
            ++n_params;
        }
    }
    require(max_rel < 1e-4, "max relative error " + fmt("%.3e", max_rel) + " >= 1e-4");
    return "max rel err " + fmt("%.3e", max_rel) + " over " + std::to_string(n_params) + " parameters";
}

// ---- criterion 3 ----
std::string preprocessing_invariants() {
    std::ostringstream note;

    // (a) balancing: non-empty bin counts differ by <= 1.
    {
        Rng rng(5);
        std::vector<FeatureFrame> frames;
        for (int i = 0; i < 4000; ++i) {
            FeatureFrame f;
            f.subject = 0;
            f.frame_index = i;
            f.gt_depth = std::pow(rng.uniform(), 2.0) * 560.0; // deliberately skewed
            frames.push_back(f);
        }
        BalanceConfig cfg;
        cfg.seed = 31;
        const auto balanced = balance_by_bins(frames, cfg);
        std::map<int, std::size_t> counts;
        for (const auto& f : balanced) ++counts[static_cast<int>(f.gt_depth / cfg.bin_width_cm)];
        std::size_t lo = SIZE_MAX, hi = 0;
        for (const auto& [b, c] : counts) {
            lo = std::min(lo, c);
            hi = std::max(hi, c);
        }
        require(hi - lo <= 1, "(a) bin count spread " + std::to_string(hi - lo) + " > 1");
    }

    // (b) per-subject medians 0 and IQRs 1 after subject-wise normalization.
    {
        Rng rng(6);
        std::vector<FeatureFrame> frames;
        for (int s = 0; s < 4; ++s)
            for (int i = 0; i < 101; ++i) {
                FeatureFrame f;
                f.subject = s;
                f.frame_index = i;
                f.gt_depth = 100;
                for (int k = 0; k < kFeatureCount; ++k)
                    f.x[static_cast<std::size_t>(k)] = rng.normal(5.0 * s, 1.0 + 0.1 * k);
                frames.push_back(f);
            }
        subject_normalize(frames);
        for (int s = 0; s < 4; ++s)
            for (int k = 0; k < kFeatureCount; ++k) {
                std::vector<double> col;
                for (const auto& f : frames)
                    if (f.subject == s) col.push_back(f.x[static_cast<std::size_t>(k)]);
                require(std::abs(stats::median(col)) <= 1e-12, "(b) median off");
                require(std::abs(stats::iqr(col) - 1.0) <= 1e-12, "(b) IQR off");
            }
    }

    // (c) LOSO: n disjoint folds, deterministic at seed 42.
    {
        std::vector<std::string> ids;
        for (int i = 0; i < 25; ++i) ids.push_back("p" + std::to_string(i));
        const auto f1 = loso_splits(ids);
        const auto f2 = loso_splits(ids);
        require(f1.size() == 25, "(c) fold count");
        std::set<std::string> tested;
        for (std::size_t i = 0; i < f1.size(); ++i) {
            tested.insert(f1[i].test_id);
            require(f1[i].test_id == f2[i].test_id, "(c) fold order not deterministic");
            for (const auto& t : f1[i].train_ids) require(t != f1[i].test_id, "(c) overlap");
        }
        require(tested.size() == 25, "(c) not every subject tested");
    }

    // (d) sequence counts N - L per subject, no cross-subject windows.
    {
        std::vector<FeatureFrame> frames;
        const std::vector<int> lengths{64, 23, 11};
        for (int s = 0; s < 3; ++s)
            for (int i = 0; i < lengths[static_cast<std::size_t>(s)]; ++i) {
                FeatureFrame f;
                f.subject = s;
                f.frame_index = i;
                f.gt_depth = 10.0 * s + i;
                frames.push_back(f);
            }
        TargetScaler scaler;
        scaler.y_min = 0;
        scaler.y_max = 1000;
        const auto batch = make_sequences(frames, scaler);
        require(batch.count == static_cast<std::size_t>((64 - 10) + (23 - 10) + (11 - 10)),
                "(d) sequence count");
        std::map<int, std::size_t> per_subject;
        for (std::size_t i = 0; i < batch.count; ++i) ++per_subject[batch.subject[i]];
        require(per_subject[0] == 54 && per_subject[1] == 13 && per_subject[2] == 1,
                "(d) per-subject counts");
    }

    // (e) no-leakage: perturbing held-out data leaves fitted statistics
    // bit-identical (compared through the pipeline-manifest hash).
    {
        SynthConfig scfg;
        scfg.n_subjects = 3;
        scfg.frames_per_subject = 200;
        scfg.noise_sigma_deg = 0.6;
        scfg.seed = 404;
        auto recs = generate_dataset(scfg);
        TrainConfig cfg;
        cfg.model.hidden_dim = 8;
        cfg.model.fc1_dim = 8;
        cfg.model.fc2_dim = 4;
        cfg.epochs = 1;
        cfg.batch_size = 64;
        cfg.seed = 9;
        Fold fold;
        fold.train_ids = {recs[0].subject_id, recs[1].subject_id};
        fold.test_id = recs[2].subject_id;
        const auto before = train_fold(recs, fold, cfg);
        for (auto& s : recs[2].samples) {
            s.gt_depth *= 1.21;
            s.dir_l.y += 0.03;
        }
        const auto after = train_fold(recs, fold, cfg);
        require(before.manifest_hash == after.manifest_hash,
                "(e) fitted statistics changed when test data was perturbed");
    }

    return "(a)..(e) all hold";
}

// ---- criterion 4 ----
std::string loss_optimizer_values() {
    const double beta = 0.75;
    require(std::abs(smooth_l1(std::vector<double>{0.3}, std::vector<double>{0.0}, beta) - 0.06) < 1e-12,
            "smooth L1 at d=0.3");
    require(std::abs(smooth_l1(std::vector<double>{2.0}, std::vector<double>{0.0}, beta) - 1.625) < 1e-12,
            "smooth L1 at d=2");
    require(std::abs(smooth_l1(std::vector<double>{beta}, std::vector<double>{0.0}, beta) - 0.375) <
                1e-12,
            "branch continuity at d=beta");
    const double quad_branch = 0.5 * beta * beta / beta;
    const double lin_branch = beta - 0.5 * beta;
    require(std::abs(quad_branch - lin_branch) < 1e-15, "branches disagree at beta");

    ModelConfig cfg;
    cfg.input_dim = 1;
    cfg.hidden_dim = 1;
    cfg.fc1_dim = 1;
    cfg.fc2_dim = 1;
    cfg.seq_len = 1;
    ModelParams p = ModelParams::zeros_like(cfg);
    p.w_head.at(0, 0) = 1.0;
    ModelParams g = ModelParams::zeros_like(cfg);
    g.w_head.at(0, 0) = 1.0;
    OptimState s = OptimState::init(p, 0.1, 0.0);
    adamw_step(p, g, s);
    require(std::abs(p.w_head.at(0, 0) - 0.9) < 1e-6,
            "AdamW first step moved 1.0 to " + fmt("%.9f", p.w_head.at(0, 0)));
    return "smooth-L1 values 0.06 / 1.625 / 0.375; AdamW 1.0 -> " + fmt("%.7f", p.w_head.at(0, 0));
}

// ---- criterion 5 ----
std::string transform_selection() {
    Rng rng(777);
    std::vector<FeatureFrame> frames;
    for (int i = 0; i < 5000; ++i) {
        FeatureFrame f;
        f.subject = 0;
        f.frame_index = i;
        f.gt_depth = 100;
        f.x.fill(0.0);
        f.x[0] = std::exp(rng.normal());
        frames.push_back(f);
    }
    const auto choice = select_transforms(frames);
    require(choice.per_feature[0].kind == TransformKind::log, "log was not selected");

    std::vector<double> col;
    for (const auto& f : frames) col.push_back(f.x[0]);
    const double s = stats::skewness(col);
    const double k = stats::kurtosis(col);
    const double identity_distance = std::sqrt(s * s + (k - 3) * (k - 3));
    require(choice.per_feature[0].distance < identity_distance,
            "log distance not below identity distance");
    return "log selected, distance " + fmt("%.4f", choice.per_feature[0].distance) + " < identity " +
           fmt("%.2f", identity_distance);
}

// ---- criteria 6 and 7 ----
struct DeskScaleResult {
    LoocvResult loocv;
    std::string report_bytes;
};

DeskScaleResult desk_scale_run(const std::string& out_dir) {
    SynthConfig scfg;
    scfg.n_subjects = 6;
    scfg.frames_per_subject = 3000;
    scfg.noise_sigma_deg = 1.0;
    scfg.bias_sigma_deg = 1.0;
    scfg.seed = 7;
    const auto recordings = generate_dataset(scfg);

    TrainConfig cfg = TrainConfig::toy();
    cfg.seed = 7;
    DeskScaleResult r;
    r.loocv = run_loocv(recordings, cfg, out_dir, /*jobs=*/2);
    r.report_bytes = test_support::read_file(out_dir + "/report.json");
    return r;
}

std::string desk_scale_details(const LoocvResult& result) {
    std::ostringstream os;
    os << "mean " << fmt("%.2f", result.mean_mae_cm) << " cm vs baseline "
       << fmt("%.2f", result.baseline_mean_mae_cm) << " cm; folds";
    for (const auto& f : result.folds)
        os << " " << f.test_subject << ":" << fmt("%.1f", f.mae_cm) << "<" << fmt("%.1f", f.baseline_mae_cm);
    return os.str();
}

// ---- criterion 8 ----
std::string evaluation_algebra(const LoocvResult& result) {
    std::vector<double> preds, truths;
    for (const auto& f : result.folds) {
        preds.insert(preds.end(), f.preds_cm.begin(), f.preds_cm.end());
        truths.insert(truths.end(), f.truths_cm.begin(), f.truths_cm.end());
    }
    std::vector<double> residuals(preds.size());
    for (std::size_t i = 0; i < preds.size(); ++i) residuals[i] = preds[i] - truths[i];

    const auto pct = residual_categories(residuals);
    const double sum = pct[0] + pct[1] + pct[2] + pct[3];
    require(std::abs(sum - 100.0) < 1e-9, "category percentages sum to " + fmt("%.12f", sum));

    const double total = mae(preds, truths);
    double weighted = 0.0;
    std::size_t n = 0;
    for (const auto& b : binned_depth_error(preds, truths)) {
        weighted += b.mae * static_cast<double>(b.count);
        n += b.count;
    }
    require(n == preds.size(), "bin counts do not cover every sample");
    require(std::abs(weighted / static_cast<double>(n) - total) < 1e-9,
            "aggregate MAE differs from count-weighted bin mean");

    const auto hist = residual_histogram(residuals);
    require(hist.total() == residuals.size(), "histogram counts do not sum to the sample count");
    return std::to_string(preds.size()) + " residuals: categories sum 100, weighted bins match, histogram complete";
}

} // namespace

int main() {
    Harness h;
    h.total = 8;

    h.run("criterion 1: geometric vergence-depth oracle (< 1e-9 rel, 6x3000 frames)", 5.0,
          geometric_oracle);
    h.run("criterion 2: finite-difference gradient check (< 1e-4 rel)", 10.0, gradient_check);
    h.run("criterion 3: preprocessing invariant suite", 30.0, preprocessing_invariants);
    h.run("criterion 4: loss and optimizer unit values", 0.0, loss_optimizer_values);
    h.run("criterion 5: transform selection on log-normal data", 5.0, transform_selection);

    test_support::TempDir run1("acceptance_run1");
    test_support::TempDir run2("acceptance_run2");
    DeskScaleResult first, second;
    h.run("criterion 6: desk-scale LOSO beats the geometric baseline (mean < 20 cm)", 600.0, [&]() {
        first = desk_scale_run(run1.path());
        for (const auto& f : first.loocv.folds)
            require(f.mae_cm < f.baseline_mae_cm,
                    "fold " + f.test_subject + ": model " + fmt("%.2f", f.mae_cm) +
                        " cm did not beat baseline " + fmt("%.2f", f.baseline_mae_cm) + " cm");
        require(first.loocv.mean_mae_cm < 20.0,
                "mean MAE " + fmt("%.2f", first.loocv.mean_mae_cm) + " cm >= 20 cm");
        return desk_scale_details(first.loocv);
    });
    h.run("criterion 7: byte-identical report.json across reruns", 600.0, [&]() {
        second = desk_scale_run(run2.path());
        require(!first.report_bytes.empty(), "first run produced no report");
        require(first.report_bytes == second.report_bytes, "report.json bytes differ between runs");
        return std::to_string(first.report_bytes.size()) + " bytes identical";
    });
    h.run("criterion 8: evaluation algebra on the desk-scale run", 0.0, [&]() {
        require(!first.loocv.folds.empty(), "criterion 6 run unavailable");
        return evaluation_algebra(first.loocv);
    });

    if (h.failures) {
        std::printf("%d of %d criteria FAILED\n", h.failures, h.total);
        return 1;
    }
    std::printf("all %d criteria passed\n", h.total);
    return 0;
}
