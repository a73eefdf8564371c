#pragma once

#include <array>
#include <span>
#include <string>
#include <vector>

#include "foval/dataset.hpp"

namespace foval {

// Residual convention used everywhere: residual = prediction - truth, so a
// positive mean indicates overestimated depth.

double mae(std::span<const double> preds, std::span<const double> truths);

// Percentages of |residual| in [0,1), [1,10), [10,20), [20,inf). Sums to 100.
std::array<double, 4> residual_categories(std::span<const double> residuals);

struct DepthBin {
    double lo = 0.0; // half-open [lo, hi)
    double hi = 0.0;
    double mae = 0.0;
    std::size_t count = 0;
};

// Bins by truth depth into [k*w, (k+1)*w) and reports per-bin MAE; empty bins
// are omitted.
std::vector<DepthBin> binned_depth_error(std::span<const double> preds, std::span<const double> truths,
                                         double bin_width = 10.0);

// Zero-parameter depth estimate from the vergence triangle, one value per
// frame. Throws ZeroDirectionVector.
std::vector<double> geometric_baseline(const SubjectRecording& recording);

struct Histogram {
    double lo = -50.0;
    double hi = 50.0;
    double bin_width = 2.0;
    std::vector<std::size_t> counts; // tails clipped into the edge bins

    std::size_t total() const;
};

Histogram residual_histogram(std::span<const double> residuals);

struct SubjectStats {
    std::string subject;
    double mae = 0.0;
    std::size_t count = 0;
};

struct EvalReport {
    double mae = 0.0;
    double residual_mean = 0.0;
    double residual_sd = 0.0; // population sd
    Histogram histogram;
    std::array<double, 4> categories{}; // percentages
    std::vector<DepthBin> bins;
    double baseline_mae = 0.0;
    std::vector<SubjectStats> per_subject;
};

// `subjects` labels each prediction; pass an empty span to skip the
// per-subject breakdown.
EvalReport build_report(std::span<const double> preds, std::span<const double> truths,
                        std::span<const std::string> subjects, double baseline_mae);

std::string report_to_json(const EvalReport& report);

// Writes report.json, residuals.csv, binned_errors.csv, histogram.svg and
// binned_mae.svg under out_dir. Identical reports produce byte-identical
// files. Throws IoFailure.
void emit_report(const EvalReport& report, std::span<const double> preds,
                 std::span<const double> truths, const std::string& out_dir);

} // namespace foval
