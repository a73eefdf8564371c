#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "foval/dataset.hpp"
#include "foval/vec3.hpp"

namespace foval {

// Canonical per-timestep feature vector. The order is part of the toolkit's
// contract: tests, scalers and checkpoints all index into it by position.
// See docs/feature_table.md and `feature_table()` for the full listing.
inline constexpr int kFeatureCount = 54;

struct FeatureFrame {
    int subject = 0; // index into the owning dataset's subject_ids
    std::int64_t frame_index = 0;
    std::array<double, kFeatureCount> x{};
    double gt_depth = 0.0;
};

struct FeatureInfo {
    const char* name;
    const char* formula;
    const char* group; // raw | geometry | ratio_difference | dynamics
};

std::span<const FeatureInfo> feature_table();
int feature_index(const std::string& name); // -1 if unknown

// ---- scalar building blocks ----

// Euclidean distance between the two gaze origins, cm.
double interpupillary_distance(const Vec3& origin_l, const Vec3& origin_r);

// Angle between the two gaze directions, radians in [0, pi]. The cosine is
// clamped to [-1, 1] before arccos. Throws ZeroDirectionVector.
double vergence_angle(const Vec3& dir_l, const Vec3& dir_r);

inline constexpr double kDepthCapCm = 1000.0;

// Depth of the symmetric vergence triangle: ipd / (2 tan(angle / 2)).
// Angles at or below the floor angle subtended by `depth_cap` map to the cap,
// so near-parallel gaze cannot blow up the estimate.
double vergence_depth(double ipd, double angle, double depth_cap = kDepthCapCm);

// Affine map of [min(series), max(series)] onto [lo, hi]; a constant series
// maps to the midpoint.
std::vector<double> range_normalize(std::span<const double> series, double lo, double hi);

double directional_magnitude(const Vec3& v);

// Planar distance between the direction endpoints using x and y components.
double gaze_point_distance(const Vec3& dir_l, const Vec3& dir_r);

// Backward difference with out[0] = 0; apply twice for acceleration.
std::vector<double> finite_difference(std::span<const double> series);

// a / b with the denominator clamped to magnitude >= 1e-6 (sign-preserving,
// sign(0) = +1), so ratio features stay finite.
inline constexpr double kRatioEpsilon = 1e-6;
double safe_ratio(double a, double b);

// ---- frame assembly ----

// One FeatureFrame per sample, in sample order. Recording-level features
// (range-normalized angle/depth, velocities, accelerations) are computed over
// this recording only. Throws ZeroDirectionVector with the frame index.
std::vector<FeatureFrame> compute_feature_frames(const SubjectRecording& recording);

// Machine-readable feature table for the `describe` CLI subcommand.
std::string feature_table_json();

} // namespace foval
