#pragma once

#include <cstdint>
#include <vector>

#include "foval/dataset.hpp"
#include "foval/vec3.hpp"

namespace foval {

// Parameters of the synthetic fixation protocol: a target sweeping
// depth_min -> depth_max -> depth_min while weaving laterally, watched by two
// eyes whose optical axes carry a fixed per-subject bias plus per-frame noise.
struct SynthConfig {
    int n_subjects = 6;
    int frames_per_subject = 3000;
    double depth_min_cm = 35.0;
    double depth_max_cm = 300.0;
    int spiral_cycles = 12;
    double spiral_radius_cm = 10.0;
    double noise_sigma_deg = 0.5;  // per-frame angular noise, each eye
    double bias_sigma_deg = 1.0;   // per-subject constant rotation, each eye
    double ipd_min_cm = 5.8;
    double ipd_max_cm = 7.0;
    std::uint64_t seed = 0;

    void validate() const; // throws ConfigError
};

// Fixation point at phase t in [0, 1]. Its distance from the cyclopean origin
// is an exact triangle wave depth_min -> depth_max -> depth_min; the lateral
// offset weaves inside the eyes' median plane (x = 0) so the symmetric
// vergence triangle recovers the distance exactly.
Vec3 target_position(double t, const SynthConfig& cfg);

// Deterministic given (cfg.seed, subject_index); subjects draw independent
// substreams, so generation order does not matter.
SubjectRecording generate_subject(const SynthConfig& cfg, int subject_index);

std::vector<SubjectRecording> generate_dataset(const SynthConfig& cfg);

} // namespace foval
