#include "foval/features.hpp"

#include <algorithm>
#include <cmath>

#include "foval/error.hpp"

#include <nlohmann/json.hpp>

namespace foval {

namespace {

// Positions 0..53. Raw inputs first (CSV order), then per-frame geometry,
// ratios and differences, then temporal dynamics.
constexpr std::array<FeatureInfo, kFeatureCount> kTable = {{
    {"origin_l_x", "O_L.x", "raw"},
    {"origin_l_y", "O_L.y", "raw"},
    {"origin_l_z", "O_L.z", "raw"},
    {"origin_r_x", "O_R.x", "raw"},
    {"origin_r_y", "O_R.y", "raw"},
    {"origin_r_z", "O_R.z", "raw"},
    {"dir_l_x", "L.x", "raw"},
    {"dir_l_y", "L.y", "raw"},
    {"dir_l_z", "L.z", "raw"},
    {"dir_r_x", "R.x", "raw"},
    {"dir_r_y", "R.y", "raw"},
    {"dir_r_z", "R.z", "raw"},
    {"ipd", "|O_R - O_L|", "geometry"},
    {"vergence_angle", "arccos(clamp(R.L / (|R||L|)))", "geometry"},
    {"vergence_angle_norm", "range_normalize(vergence_angle, -1, 1) per recording", "geometry"},
    {"cos_vergence_angle", "cos(vergence_angle)", "geometry"},
    {"vergence_depth", "ipd / (2 tan(vergence_angle / 2)), capped at 1000 cm", "geometry"},
    {"vergence_depth_norm", "range_normalize(vergence_depth, 0, 1) per recording", "geometry"},
    {"dir_mag_l", "|L|", "geometry"},
    {"dir_mag_r", "|R|", "geometry"},
    {"mag_ratio_rl", "|R| / |L| (guarded)", "ratio_difference"},
    {"gaze_point_distance", "sqrt((L.x-R.x)^2 + (L.y-R.y)^2)", "ratio_difference"},
    {"angular_diff", "arccos(clamp(R.L / (|R||L|)))", "ratio_difference"},
    {"angular_diff_x", "atan2(R.x, R.z) - atan2(L.x, L.z)", "ratio_difference"},
    {"gaze_depth_diff", "R.z - L.z", "ratio_difference"},
    {"world_ratio_x", "R.x / L.x (guarded)", "ratio_difference"},
    {"world_ratio_y", "R.y / L.y (guarded)", "ratio_difference"},
    {"world_ratio_z", "R.z / L.z (guarded)", "ratio_difference"},
    {"delta_gaze_x", "L.x - R.x", "ratio_difference"},
    {"delta_gaze_y", "L.y - R.y", "ratio_difference"},
    {"delta_gaze_z", "L.z - R.z", "ratio_difference"},
    {"delta_gaze_ratio_xy", "delta_gaze_x / delta_gaze_y (guarded)", "ratio_difference"},
    {"rel_change_va", "vergence_angle[t] - vergence_angle[t-1]", "dynamics"},
    {"gaze_depth_diff_norm", "range_normalize(gaze_depth_diff, 0, 1) per recording", "ratio_difference"},
    {"vel_dir_l_x", "diff(L.x)", "dynamics"},
    {"acc_dir_l_x", "diff(diff(L.x))", "dynamics"},
    {"vel_dir_l_y", "diff(L.y)", "dynamics"},
    {"acc_dir_l_y", "diff(diff(L.y))", "dynamics"},
    {"vel_dir_l_z", "diff(L.z)", "dynamics"},
    {"acc_dir_l_z", "diff(diff(L.z))", "dynamics"},
    {"vel_dir_r_x", "diff(R.x)", "dynamics"},
    {"acc_dir_r_x", "diff(diff(R.x))", "dynamics"},
    {"vel_dir_r_y", "diff(R.y)", "dynamics"},
    {"acc_dir_r_y", "diff(diff(R.y))", "dynamics"},
    {"vel_dir_r_z", "diff(R.z)", "dynamics"},
    {"acc_dir_r_z", "diff(diff(R.z))", "dynamics"},
    {"vel_vergence_angle", "diff(vergence_angle)", "dynamics"},
    {"acc_vergence_angle", "diff(diff(vergence_angle))", "dynamics"},
    {"vel_vergence_depth", "diff(vergence_depth)", "dynamics"},
    {"acc_vergence_depth", "diff(diff(vergence_depth))", "dynamics"},
    {"vel_ipd", "diff(ipd)", "dynamics"},
    {"acc_ipd", "diff(diff(ipd))", "dynamics"},
    {"vel_gaze_point_distance", "diff(gaze_point_distance)", "dynamics"},
    {"acc_gaze_point_distance", "diff(diff(gaze_point_distance))", "dynamics"},
}};

static_assert(kTable.size() == kFeatureCount);

enum F : int {
    f_origin_l_x = 0,
    f_origin_l_y,
    f_origin_l_z,
    f_origin_r_x,
    f_origin_r_y,
    f_origin_r_z,
    f_dir_l_x,
    f_dir_l_y,
    f_dir_l_z,
    f_dir_r_x,
    f_dir_r_y,
    f_dir_r_z,
    f_ipd,
    f_va,
    f_va_norm,
    f_cos_va,
    f_vd,
    f_vd_norm,
    f_mag_l,
    f_mag_r,
    f_mag_ratio,
    f_por_dist,
    f_ang_diff,
    f_ang_diff_x,
    f_depth_diff,
    f_world_ratio_x,
    f_world_ratio_y,
    f_world_ratio_z,
    f_delta_x,
    f_delta_y,
    f_delta_z,
    f_delta_ratio_xy,
    f_rel_change_va,
    f_depth_diff_norm,
    f_vel_l_x,
    f_acc_l_x,
    f_vel_l_y,
    f_acc_l_y,
    f_vel_l_z,
    f_acc_l_z,
    f_vel_r_x,
    f_acc_r_x,
    f_vel_r_y,
    f_acc_r_y,
    f_vel_r_z,
    f_acc_r_z,
    f_vel_va,
    f_acc_va,
    f_vel_vd,
    f_acc_vd,
    f_vel_ipd,
    f_acc_ipd,
    f_vel_por,
    f_acc_por,
};

static_assert(f_acc_por == kFeatureCount - 1);

} // namespace

std::span<const FeatureInfo> feature_table() { return kTable; }

int feature_index(const std::string& name) {
    for (int i = 0; i < kFeatureCount; ++i)
        if (name == kTable[static_cast<std::size_t>(i)].name) return i;
    return -1;
}

double interpupillary_distance(const Vec3& origin_l, const Vec3& origin_r) {
    return (origin_r - origin_l).norm();
}

double vergence_angle(const Vec3& dir_l, const Vec3& dir_r) {
    const double nl = dir_l.norm();
    const double nr = dir_r.norm();
    if (nl == 0.0 || nr == 0.0) throw ZeroDirectionVector(-1);
    const double c = std::clamp(dir_l.dot(dir_r) / (nl * nr), -1.0, 1.0);
    return std::acos(c);
}

double vergence_depth(double ipd, double angle, double depth_cap) {
    const double angle_floor = 2.0 * std::atan(ipd / (2.0 * depth_cap));
    if (angle <= angle_floor) return depth_cap;
    return ipd / (2.0 * std::tan(angle / 2.0));
}

std::vector<double> range_normalize(std::span<const double> series, double lo, double hi) {
    const auto [mn, mx] = std::minmax_element(series.begin(), series.end());
    std::vector<double> out(series.size());
    if (*mn == *mx) {
        std::fill(out.begin(), out.end(), 0.5 * (lo + hi));
        return out;
    }
    const double scale = (hi - lo) / (*mx - *mn);
    for (std::size_t i = 0; i < series.size(); ++i) out[i] = lo + (series[i] - *mn) * scale;
    return out;
}

double directional_magnitude(const Vec3& v) { return v.norm(); }

double gaze_point_distance(const Vec3& dir_l, const Vec3& dir_r) {
    const double dx = dir_l.x - dir_r.x;
    const double dy = dir_l.y - dir_r.y;
    return std::sqrt(dx * dx + dy * dy);
}

std::vector<double> finite_difference(std::span<const double> series) {
    std::vector<double> out(series.size(), 0.0);
    for (std::size_t i = 1; i < series.size(); ++i) out[i] = series[i] - series[i - 1];
    return out;
}

double safe_ratio(double a, double b) {
    if (std::abs(b) >= kRatioEpsilon) return a / b;
    const double sign = (b < 0.0) ? -1.0 : 1.0;
    return a / (sign * kRatioEpsilon);
}

std::vector<FeatureFrame> compute_feature_frames(const SubjectRecording& recording) {
    const std::size_t n = recording.samples.size();
    std::vector<FeatureFrame> frames(n);

    // Per-frame series needed for recording-level normalization and dynamics.
    std::vector<double> va(n), vd(n), ipd(n), por(n), depth_diff(n);
    std::vector<std::array<double, 6>> dirs(n); // L.xyz, R.xyz

    for (std::size_t i = 0; i < n; ++i) {
        const GazeSample& s = recording.samples[i];
        if (s.dir_l.norm() == 0.0 || s.dir_r.norm() == 0.0)
            throw ZeroDirectionVector(s.frame_index);
        ipd[i] = interpupillary_distance(s.origin_l, s.origin_r);
        va[i] = vergence_angle(s.dir_l, s.dir_r);
        vd[i] = vergence_depth(ipd[i], va[i]);
        por[i] = gaze_point_distance(s.dir_l, s.dir_r);
        depth_diff[i] = s.dir_r.z - s.dir_l.z;
        dirs[i] = {s.dir_l.x, s.dir_l.y, s.dir_l.z, s.dir_r.x, s.dir_r.y, s.dir_r.z};
    }

    const auto va_norm = range_normalize(va, -1.0, 1.0);
    const auto vd_norm = range_normalize(vd, 0.0, 1.0);
    const auto depth_diff_norm = range_normalize(depth_diff, 0.0, 1.0);

    const auto vel_va = finite_difference(va);
    const auto acc_va = finite_difference(vel_va);
    const auto vel_vd = finite_difference(vd);
    const auto acc_vd = finite_difference(vel_vd);
    const auto vel_ipd = finite_difference(ipd);
    const auto acc_ipd = finite_difference(vel_ipd);
    const auto vel_por = finite_difference(por);
    const auto acc_por = finite_difference(vel_por);

    std::array<std::vector<double>, 6> vel_dir, acc_dir;
    for (int c = 0; c < 6; ++c) {
        std::vector<double> series(n);
        for (std::size_t i = 0; i < n; ++i) series[i] = dirs[i][static_cast<std::size_t>(c)];
        vel_dir[static_cast<std::size_t>(c)] = finite_difference(series);
        acc_dir[static_cast<std::size_t>(c)] = finite_difference(vel_dir[static_cast<std::size_t>(c)]);
    }

    for (std::size_t i = 0; i < n; ++i) {
        const GazeSample& s = recording.samples[i];
        FeatureFrame& f = frames[i];
        f.frame_index = s.frame_index;
        f.gt_depth = s.gt_depth;
        auto& x = f.x;

        x[f_origin_l_x] = s.origin_l.x;
        x[f_origin_l_y] = s.origin_l.y;
        x[f_origin_l_z] = s.origin_l.z;
        x[f_origin_r_x] = s.origin_r.x;
        x[f_origin_r_y] = s.origin_r.y;
        x[f_origin_r_z] = s.origin_r.z;
        x[f_dir_l_x] = s.dir_l.x;
        x[f_dir_l_y] = s.dir_l.y;
        x[f_dir_l_z] = s.dir_l.z;
        x[f_dir_r_x] = s.dir_r.x;
        x[f_dir_r_y] = s.dir_r.y;
        x[f_dir_r_z] = s.dir_r.z;

        x[f_ipd] = ipd[i];
        x[f_va] = va[i];
        x[f_va_norm] = va_norm[i];
        x[f_cos_va] = std::cos(va[i]);
        x[f_vd] = vd[i];
        x[f_vd_norm] = vd_norm[i];
        x[f_mag_l] = directional_magnitude(s.dir_l);
        x[f_mag_r] = directional_magnitude(s.dir_r);
        x[f_mag_ratio] = safe_ratio(x[f_mag_r], x[f_mag_l]);
        x[f_por_dist] = por[i];
        x[f_ang_diff] = va[i]; // the source defines both names with the same arccos form
        x[f_ang_diff_x] = std::atan2(s.dir_r.x, s.dir_r.z) - std::atan2(s.dir_l.x, s.dir_l.z);
        x[f_depth_diff] = depth_diff[i];
        x[f_world_ratio_x] = safe_ratio(s.dir_r.x, s.dir_l.x);
        x[f_world_ratio_y] = safe_ratio(s.dir_r.y, s.dir_l.y);
        x[f_world_ratio_z] = safe_ratio(s.dir_r.z, s.dir_l.z);
        x[f_delta_x] = s.dir_l.x - s.dir_r.x;
        x[f_delta_y] = s.dir_l.y - s.dir_r.y;
        x[f_delta_z] = s.dir_l.z - s.dir_r.z;
        x[f_delta_ratio_xy] = safe_ratio(x[f_delta_x], x[f_delta_y]);
        x[f_rel_change_va] = vel_va[i];
        x[f_depth_diff_norm] = depth_diff_norm[i];

        for (int c = 0; c < 6; ++c) {
            x[static_cast<std::size_t>(f_vel_l_x + 2 * c)] = vel_dir[static_cast<std::size_t>(c)][i];
            x[static_cast<std::size_t>(f_acc_l_x + 2 * c)] = acc_dir[static_cast<std::size_t>(c)][i];
        }
        x[f_vel_va] = vel_va[i];
        x[f_acc_va] = acc_va[i];
        x[f_vel_vd] = vel_vd[i];
        x[f_acc_vd] = acc_vd[i];
        x[f_vel_ipd] = vel_ipd[i];
        x[f_acc_ipd] = acc_ipd[i];
        x[f_vel_por] = vel_por[i];
        x[f_acc_por] = acc_por[i];

        for (double v : x) {
            if (!std::isfinite(v))
                throw Error("non-finite feature at frame " + std::to_string(s.frame_index));
        }
    }
    return frames;
}

std::string feature_table_json() {
    nlohmann::ordered_json arr = nlohmann::ordered_json::array();
    for (int i = 0; i < kFeatureCount; ++i) {
        const auto& info = kTable[static_cast<std::size_t>(i)];
        arr.push_back({{"index", i}, {"name", info.name}, {"formula", info.formula}, {"group", info.group}});
    }
    return arr.dump(2);
}

} // namespace foval
