#include "foval/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>

#include "foval/error.hpp"
#include "foval/features.hpp"
#include "foval/hash.hpp"

#include <nlohmann/json.hpp>

namespace foval {

namespace {

std::string fmt(double v, const char* spec = "%.17g") {
    char buf[64];
    std::snprintf(buf, sizeof(buf), spec, v);
    return buf;
}

void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoFailure("cannot open '" + path + "' for writing");
    out << content;
    if (!out) throw IoFailure("write to '" + path + "' failed");
}

// Minimal deterministic SVG bar chart.
std::string svg_bar_chart(const std::string& title, std::span<const double> values,
                          std::span<const std::string> labels) {
    constexpr int W = 720, H = 400, ml = 60, mr = 20, mt = 40, mb = 60;
    const int plot_w = W - ml - mr, plot_h = H - mt - mb;
    double vmax = 0.0;
    for (double v : values) vmax = std::max(vmax, v);
    if (vmax <= 0.0) vmax = 1.0;

    std::string s;
    s += "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
    s += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + std::to_string(W) + "\" height=\"" +
         std::to_string(H) + "\" viewBox=\"0 0 " + std::to_string(W) + " " + std::to_string(H) + "\">\n";
    s += "<rect x=\"0\" y=\"0\" width=\"" + std::to_string(W) + "\" height=\"" + std::to_string(H) +
         "\" fill=\"white\"/>\n";
    s += "<text x=\"" + std::to_string(W / 2) + "\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"16\">" +
         title + "</text>\n";
    s += "<line x1=\"" + std::to_string(ml) + "\" y1=\"" + std::to_string(mt + plot_h) + "\" x2=\"" +
         std::to_string(ml + plot_w) + "\" y2=\"" + std::to_string(mt + plot_h) +
         "\" stroke=\"black\"/>\n";
    s += "<line x1=\"" + std::to_string(ml) + "\" y1=\"" + std::to_string(mt) + "\" x2=\"" +
         std::to_string(ml) + "\" y2=\"" + std::to_string(mt + plot_h) + "\" stroke=\"black\"/>\n";
    s += "<text x=\"12\" y=\"" + std::to_string(mt + 4) + "\" font-family=\"sans-serif\" font-size=\"11\">" +
         fmt(vmax, "%.4g") + "</text>\n";

    const std::size_t n = values.size();
    if (n > 0) {
        const double bw = static_cast<double>(plot_w) / static_cast<double>(n);
        for (std::size_t i = 0; i < n; ++i) {
            const double frac = std::max(values[i], 0.0) / vmax;
            const double bh = frac * plot_h;
            const double x = ml + bw * static_cast<double>(i);
            const double y = mt + plot_h - bh;
            s += "<rect x=\"" + fmt(x + bw * 0.1, "%.3f") + "\" y=\"" + fmt(y, "%.3f") + "\" width=\"" +
                 fmt(bw * 0.8, "%.3f") + "\" height=\"" + fmt(bh, "%.3f") +
                 "\" fill=\"#4878a8\"/>\n";
            // Label every bar only when few, else every 5th.
            const std::size_t step = (n <= 16) ? 1 : 5;
            if (i < labels.size() && i % step == 0) {
                s += "<text x=\"" + fmt(x + bw * 0.5, "%.3f") + "\" y=\"" + std::to_string(mt + plot_h + 16) +
                     "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"10\">" + labels[i] +
                     "</text>\n";
            }
        }
    }
    s += "</svg>\n";
    return s;
}

} // namespace

double mae(std::span<const double> preds, std::span<const double> truths) {
    if (preds.size() != truths.size()) throw LengthMismatch(preds.size(), truths.size());
    if (preds.empty()) throw EmptyInput("mae");
    double total = 0.0;
    for (std::size_t i = 0; i < preds.size(); ++i) total += std::abs(preds[i] - truths[i]);
    return total / static_cast<double>(preds.size());
}

std::array<double, 4> residual_categories(std::span<const double> residuals) {
    if (residuals.empty()) throw EmptyInput("residual_categories");
    std::array<std::size_t, 4> counts{};
    for (double r : residuals) {
        const double a = std::abs(r);
        if (a < 1.0)
            ++counts[0];
        else if (a < 10.0)
            ++counts[1];
        else if (a < 20.0)
            ++counts[2];
        else
            ++counts[3];
    }
    std::array<double, 4> pct{};
    for (std::size_t i = 0; i < 4; ++i)
        pct[i] = 100.0 * static_cast<double>(counts[i]) / static_cast<double>(residuals.size());
    return pct;
}

std::vector<DepthBin> binned_depth_error(std::span<const double> preds, std::span<const double> truths,
                                         double bin_width) {
    if (preds.size() != truths.size()) throw LengthMismatch(preds.size(), truths.size());
    if (preds.empty()) throw EmptyInput("binned_depth_error");
    if (!(bin_width > 0.0)) throw ConfigError("bin_width must be > 0");

    std::map<std::int64_t, std::pair<double, std::size_t>> acc; // bin -> (sum |err|, count)
    for (std::size_t i = 0; i < preds.size(); ++i) {
        const auto bin = static_cast<std::int64_t>(std::floor(truths[i] / bin_width));
        auto& [sum, count] = acc[bin];
        sum += std::abs(preds[i] - truths[i]);
        ++count;
    }
    std::vector<DepthBin> bins;
    bins.reserve(acc.size());
    for (const auto& [bin, sc] : acc) {
        DepthBin b;
        b.lo = static_cast<double>(bin) * bin_width;
        b.hi = b.lo + bin_width;
        b.mae = sc.first / static_cast<double>(sc.second);
        b.count = sc.second;
        bins.push_back(b);
    }
    return bins;
}

std::vector<double> geometric_baseline(const SubjectRecording& recording) {
    std::vector<double> preds;
    preds.reserve(recording.samples.size());
    for (const auto& s : recording.samples) {
        if (s.dir_l.norm() == 0.0 || s.dir_r.norm() == 0.0) throw ZeroDirectionVector(s.frame_index);
        const double ipd = interpupillary_distance(s.origin_l, s.origin_r);
        preds.push_back(vergence_depth(ipd, vergence_angle(s.dir_l, s.dir_r)));
    }
    return preds;
}

std::size_t Histogram::total() const {
    std::size_t t = 0;
    for (auto c : counts) t += c;
    return t;
}

Histogram residual_histogram(std::span<const double> residuals) {
    if (residuals.empty()) throw EmptyInput("residual_histogram");
    Histogram h;
    const auto n_bins = static_cast<std::size_t>(std::llround((h.hi - h.lo) / h.bin_width));
    h.counts.assign(n_bins, 0);
    for (double r : residuals) {
        auto bin = static_cast<std::int64_t>(std::floor((r - h.lo) / h.bin_width));
        bin = std::clamp<std::int64_t>(bin, 0, static_cast<std::int64_t>(n_bins) - 1);
        ++h.counts[static_cast<std::size_t>(bin)];
    }
    return h;
}

EvalReport build_report(std::span<const double> preds, std::span<const double> truths,
                        std::span<const std::string> subjects, double baseline_mae) {
    if (preds.size() != truths.size()) throw LengthMismatch(preds.size(), truths.size());
    if (preds.empty()) throw EmptyInput("build_report");
    if (!subjects.empty() && subjects.size() != preds.size())
        throw LengthMismatch(subjects.size(), preds.size());

    std::vector<double> residuals(preds.size());
    for (std::size_t i = 0; i < preds.size(); ++i) residuals[i] = preds[i] - truths[i];

    EvalReport r;
    r.mae = mae(preds, truths);
    double mean = 0.0;
    for (double v : residuals) mean += v;
    mean /= static_cast<double>(residuals.size());
    double var = 0.0;
    for (double v : residuals) var += (v - mean) * (v - mean);
    var /= static_cast<double>(residuals.size());
    r.residual_mean = mean;
    r.residual_sd = std::sqrt(var);
    r.histogram = residual_histogram(residuals);
    r.categories = residual_categories(residuals);
    r.bins = binned_depth_error(preds, truths);
    r.baseline_mae = baseline_mae;

    if (!subjects.empty()) {
        std::map<std::string, std::pair<double, std::size_t>> acc;
        for (std::size_t i = 0; i < preds.size(); ++i) {
            auto& [sum, count] = acc[subjects[i]];
            sum += std::abs(preds[i] - truths[i]);
            ++count;
        }
        for (const auto& [subject, sc] : acc)
            r.per_subject.push_back({subject, sc.first / static_cast<double>(sc.second), sc.second});
    }
    return r;
}

std::string report_to_json(const EvalReport& report) {
    nlohmann::ordered_json j;
    j["mae_cm"] = report.mae;
    j["residual_mean_cm"] = report.residual_mean;
    j["residual_sd_cm"] = report.residual_sd;
    j["categories_pct"] = {{"lt_1cm", report.categories[0]},
                           {"1_to_10cm", report.categories[1]},
                           {"10_to_20cm", report.categories[2]},
                           {"ge_20cm", report.categories[3]}};
    j["histogram"] = {{"lo_cm", report.histogram.lo},
                      {"hi_cm", report.histogram.hi},
                      {"bin_width_cm", report.histogram.bin_width},
                      {"counts", report.histogram.counts}};
    auto bins = nlohmann::ordered_json::array();
    for (const auto& b : report.bins)
        bins.push_back({{"lo_cm", b.lo}, {"hi_cm", b.hi}, {"mae_cm", b.mae}, {"count", b.count}});
    j["binned_mae"] = bins;
    j["baseline_mae_cm"] = report.baseline_mae;
    auto subjects = nlohmann::ordered_json::array();
    for (const auto& s : report.per_subject)
        subjects.push_back({{"subject", s.subject}, {"mae_cm", s.mae}, {"count", s.count}});
    j["per_subject"] = subjects;
    return j.dump(2);
}

void emit_report(const EvalReport& report, std::span<const double> preds,
                 std::span<const double> truths, const std::string& out_dir) {
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (ec) throw IoFailure("cannot create directory '" + out_dir + "': " + ec.message());

    write_file(out_dir + "/report.json", report_to_json(report) + "\n");

    std::string residuals = "prediction_cm,truth_cm,residual_cm\n";
    for (std::size_t i = 0; i < preds.size(); ++i)
        residuals += fmt(preds[i]) + "," + fmt(truths[i]) + "," + fmt(preds[i] - truths[i]) + "\n";
    write_file(out_dir + "/residuals.csv", residuals);

    std::string binned = "bin_lo_cm,bin_hi_cm,mae_cm,count\n";
    for (const auto& b : report.bins)
        binned += fmt(b.lo) + "," + fmt(b.hi) + "," + fmt(b.mae) + "," + std::to_string(b.count) + "\n";
    write_file(out_dir + "/binned_errors.csv", binned);

    std::vector<double> hist_vals;
    std::vector<std::string> hist_labels;
    for (std::size_t i = 0; i < report.histogram.counts.size(); ++i) {
        hist_vals.push_back(static_cast<double>(report.histogram.counts[i]));
        hist_labels.push_back(fmt(report.histogram.lo + report.histogram.bin_width * static_cast<double>(i), "%g"));
    }
    write_file(out_dir + "/histogram.svg",
               svg_bar_chart("Residual histogram (cm)", hist_vals, hist_labels));

    std::vector<double> bin_vals;
    std::vector<std::string> bin_labels;
    for (const auto& b : report.bins) {
        bin_vals.push_back(b.mae);
        bin_labels.push_back(fmt(b.lo, "%g"));
    }
    write_file(out_dir + "/binned_mae.svg",
               svg_bar_chart("MAE by depth bin (cm)", bin_vals, bin_labels));
}

} // namespace foval
