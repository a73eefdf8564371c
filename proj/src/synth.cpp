#include "foval/synth.hpp"

#include <cmath>
#include <string>

#include "foval/error.hpp"
#include "foval/rng.hpp"

namespace foval {

namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr double kDegToRad = kPi / 180.0;

// Stream tags for substream derivation.
constexpr std::uint64_t kTagSubject = 0x53554231u; // per-subject stream

// Unit vector orthogonal to d, at a stream-driven random azimuth.
Vec3 random_perpendicular(const Vec3& d, Rng& rng) {
    // Any vector not parallel to d works as a basis anchor.
    const Vec3 anchor = (std::abs(d.x) < 0.9) ? Vec3{1.0, 0.0, 0.0} : Vec3{0.0, 1.0, 0.0};
    const Vec3 u = d.cross(anchor).normalized();
    const Vec3 v = d.cross(u).normalized();
    const double phi = rng.uniform(0.0, 2.0 * kPi);
    return u * std::cos(phi) + v * std::sin(phi);
}

// Fixed small rotation emulating a per-subject optical-axis offset: a random
// axis with an angle drawn once from N(0, bias_sigma).
struct BiasRotation {
    Vec3 axis{0.0, 0.0, 1.0};
    double angle = 0.0;

    static BiasRotation draw(double sigma_rad, Rng& rng) {
        BiasRotation b;
        // Uniform direction on the sphere via normalized Gaussian triple.
        Vec3 a{rng.normal(), rng.normal(), rng.normal()};
        if (a.norm() == 0.0) a = {0.0, 0.0, 1.0};
        b.axis = a.normalized();
        b.angle = rng.normal(0.0, sigma_rad);
        return b;
    }

    Vec3 apply(const Vec3& v) const { return rotate_about(v, axis, angle); }
};

} // namespace

void SynthConfig::validate() const {
    if (n_subjects < 1) throw ConfigError("n_subjects must be >= 1");
    if (frames_per_subject < 1) throw ConfigError("frames_per_subject must be >= 1");
    if (!(depth_min_cm < depth_max_cm)) throw ConfigError("depth_min_cm must be < depth_max_cm");
    if (depth_min_cm <= 0.0) throw ConfigError("depth_min_cm must be positive");
    if (noise_sigma_deg < 0.0 || bias_sigma_deg < 0.0) throw ConfigError("sigmas must be >= 0");
    if (!(ipd_min_cm <= ipd_max_cm) || ipd_min_cm <= 0.0) throw ConfigError("bad ipd range");
    if (spiral_cycles < 0) throw ConfigError("spiral_cycles must be >= 0");
    if (spiral_radius_cm < 0.0 || spiral_radius_cm >= depth_min_cm)
        throw ConfigError("spiral_radius_cm must be in [0, depth_min_cm)");
}

Vec3 target_position(double t, const SynthConfig& cfg) {
    // Triangle wave in distance: exact at every phase.
    const double span = cfg.depth_max_cm - cfg.depth_min_cm;
    const double depth =
        (t <= 0.5) ? cfg.depth_min_cm + span * (t / 0.5) : cfg.depth_max_cm - span * ((t - 0.5) / 0.5);

    // Lateral weave stays in the median plane (x = 0); the in-plane offset is
    // folded into y with z adjusted so the cyclopean distance equals `depth`.
    const double y = cfg.spiral_radius_cm * std::sin(2.0 * kPi * cfg.spiral_cycles * t);
    const double z = std::sqrt(depth * depth - y * y);
    return {0.0, y, z};
}

SubjectRecording generate_subject(const SynthConfig& cfg, int subject_index) {
    cfg.validate();
    Rng rng(Rng::mix({cfg.seed, kTagSubject, static_cast<std::uint64_t>(subject_index)}));

    const double ipd = rng.uniform(cfg.ipd_min_cm, cfg.ipd_max_cm);
    const double noise_rad = cfg.noise_sigma_deg * kDegToRad;
    const double bias_rad = cfg.bias_sigma_deg * kDegToRad;
    const BiasRotation bias_l = BiasRotation::draw(bias_rad, rng);
    const BiasRotation bias_r = BiasRotation::draw(bias_rad, rng);

    SubjectRecording rec;
    rec.subject_id = "synth" + std::to_string(subject_index);
    rec.samples.reserve(static_cast<std::size_t>(cfg.frames_per_subject));

    const Vec3 origin_l{-ipd / 2.0, 0.0, 0.0};
    const Vec3 origin_r{ipd / 2.0, 0.0, 0.0};

    for (int k = 0; k < cfg.frames_per_subject; ++k) {
        const double t =
            (cfg.frames_per_subject == 1) ? 0.0 : static_cast<double>(k) / (cfg.frames_per_subject - 1);
        const Vec3 target = target_position(t, cfg);

        GazeSample s;
        s.frame_index = k;
        s.origin_l = origin_l;
        s.origin_r = origin_r;
        s.gt_depth = target.norm(); // cyclopean midpoint sits at the origin

        Vec3 dl = (target - origin_l).normalized();
        Vec3 dr = (target - origin_r).normalized();
        dl = bias_l.apply(dl);
        dr = bias_r.apply(dr);
        if (cfg.noise_sigma_deg > 0.0) {
            dl = rotate_about(dl, random_perpendicular(dl, rng), rng.normal(0.0, noise_rad));
            dr = rotate_about(dr, random_perpendicular(dr, rng), rng.normal(0.0, noise_rad));
        }
        s.dir_l = dl.normalized();
        s.dir_r = dr.normalized();
        rec.samples.push_back(s);
    }
    return rec;
}

std::vector<SubjectRecording> generate_dataset(const SynthConfig& cfg) {
    cfg.validate();
    std::vector<SubjectRecording> out;
    out.reserve(static_cast<std::size_t>(cfg.n_subjects));
    for (int i = 0; i < cfg.n_subjects; ++i) out.push_back(generate_subject(cfg, i));
    return out;
}

} // namespace foval
