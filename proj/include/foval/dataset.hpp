#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "foval/vec3.hpp"

namespace foval {

// One timestamped binocular measurement. Origins and depth are in cm, headset
// coordinates; directions are unitless and must have positive magnitude.
// gt_depth is NaN when absent (inference-time data).
struct GazeSample {
    std::int64_t frame_index = 0;
    Vec3 origin_l;
    Vec3 origin_r;
    Vec3 dir_l;
    Vec3 dir_r;
    double gt_depth = std::numeric_limits<double>::quiet_NaN();

    bool has_depth() const { return std::isfinite(gt_depth); }
};

// All samples of one subject, ordered by strictly increasing frame_index.
// The subject is the atomic unit for splitting and per-subject statistics.
struct SubjectRecording {
    std::string subject_id;
    std::vector<GazeSample> samples;
};

// Column order of the interchange CSV (see docs/data_format.md).
const std::vector<std::string>& csv_columns();

// Parses the CSV at `path`, groups rows by subject_id and sorts each group by
// frame_index. Recordings are returned in order of first appearance.
// Throws IoFailure, MissingColumn, NonNumericCell, ZeroDirectionVector.
std::vector<SubjectRecording> load_csv(const std::string& path);

// Writes recordings in the same schema with 17 significant digits, so that a
// load round-trips to the exact same values. Throws IoFailure.
void save_csv(const std::vector<SubjectRecording>& recordings, const std::string& path);

} // namespace foval
