#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <set>

#include "foval/error.hpp"
#include "foval/features.hpp"
#include "foval/rng.hpp"
#include "foval/synth.hpp"

using namespace foval;

namespace {
constexpr double kPi = 3.14159265358979323846;
}

TEST_CASE("feature table is a 54-entry bijection") {
    static_assert(kFeatureCount == 54);
    const auto table = feature_table();
    REQUIRE(table.size() == 54);
    std::set<std::string> names;
    for (const auto& info : table) names.insert(info.name);
    CHECK(names.size() == 54);
    for (int i = 0; i < kFeatureCount; ++i)
        CHECK(feature_index(table[static_cast<std::size_t>(i)].name) == i);
    CHECK(feature_index("no_such_feature") == -1);
}

TEST_CASE("interpupillary distance") {
    CHECK(interpupillary_distance({-3.2, 0, 0}, {3.2, 0, 0}) == doctest::Approx(6.4));
    CHECK(interpupillary_distance({1, 2, 3}, {1, 2, 3}) == doctest::Approx(0.0));
    CHECK(interpupillary_distance({0, 0, 0}, {3, 4, 0}) == doctest::Approx(5.0));
    // Symmetry.
    CHECK(interpupillary_distance({1, 2, 3}, {-2, 0, 5}) ==
          doctest::Approx(interpupillary_distance({-2, 0, 5}, {1, 2, 3})));
}

TEST_CASE("vergence angle") {
    CHECK(vergence_angle({0, 0, 1}, {0, 0, 1}) == doctest::Approx(0.0));
    CHECK(vergence_angle({1, 0, 0}, {0, 1, 0}) == doctest::Approx(kPi / 2));
    // L rotated +5 deg and R rotated -5 deg about the vertical axis from
    // forward: the angle between them is exactly 10 degrees.
    const double five = 5.0 * kPi / 180.0;
    const Vec3 l{std::sin(five), 0, std::cos(five)};
    const Vec3 r{-std::sin(five), 0, std::cos(five)};
    CHECK(vergence_angle(l, r) == doctest::Approx(10.0 * kPi / 180.0).epsilon(1e-12));
    CHECK_THROWS_AS(vergence_angle({0, 0, 0}, {0, 0, 1}), ZeroDirectionVector);
}

TEST_CASE("vergence angle is symmetric and scale invariant") {
    Rng rng(17);
    for (int i = 0; i < 200; ++i) {
        const Vec3 l{rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(0.2, 1.5)};
        const Vec3 r{rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(0.2, 1.5)};
        const double a = rng.uniform(0.05, 20.0);
        const double b = rng.uniform(0.05, 20.0);
        const double base = vergence_angle(l, r);
        CHECK(vergence_angle(r, l) == doctest::Approx(base).epsilon(1e-12));
        CHECK(vergence_angle(l * a, r * b) == doctest::Approx(base).epsilon(1e-10));
        CHECK(base >= 0.0);
        CHECK(base <= kPi);
    }
}

TEST_CASE("vergence depth inverts the symmetric triangle") {
    CHECK(vergence_depth(6.4, 2.0 * std::atan(3.2 / 100.0)) == doctest::Approx(100.0).epsilon(1e-12));
    CHECK(vergence_depth(6.4, 2.0 * std::atan(3.2 / 35.0)) == doctest::Approx(35.0).epsilon(1e-12));
    // Degenerate angles hit the documented cap.
    CHECK(vergence_depth(6.4, 0.0) == doctest::Approx(kDepthCapCm));
    CHECK(vergence_depth(6.4, 1e-9) == doctest::Approx(kDepthCapCm));
}

TEST_CASE("vergence depth matches the cyclopean distance on a median-plane grid") {
    // Brute-force oracle: place the fixation point on the median plane at a
    // known cyclopean distance and rebuild the depth from IPD and angle alone.
    double max_rel = 0.0;
    for (double depth = 35.0; depth <= 300.0; depth += 5.0) {
        for (double ipd = 5.8; ipd <= 7.01; ipd += 0.2) {
            for (double lateral : {0.0, 0.25, -0.4}) {
                const double y = lateral * 20.0;
                const double z = std::sqrt(depth * depth - y * y);
                const Vec3 target{0.0, y, z};
                const Vec3 origin_l{-ipd / 2.0, 0.0, 0.0};
                const Vec3 origin_r{ipd / 2.0, 0.0, 0.0};
                const Vec3 dl = (target - origin_l).normalized();
                const Vec3 dr = (target - origin_r).normalized();
                const double vd =
                    vergence_depth(interpupillary_distance(origin_l, origin_r), vergence_angle(dl, dr));
                max_rel = std::max(max_rel, std::abs(vd - depth) / depth);
            }
        }
    }
    CHECK(max_rel < 1e-9);
}

TEST_CASE("range normalize") {
    const std::vector<double> a{1, 2, 3};
    const auto na = range_normalize(a, -1, 1);
    CHECK(na[0] == doctest::Approx(-1.0));
    CHECK(na[1] == doctest::Approx(0.0));
    CHECK(na[2] == doctest::Approx(1.0));

    const auto nb = range_normalize(std::vector<double>{5, 5, 5}, 0, 1);
    for (double v : nb) CHECK(v == doctest::Approx(0.5));

    const auto nc = range_normalize(std::vector<double>{0, 10}, 0, 1);
    CHECK(nc[0] == doctest::Approx(0.0));
    CHECK(nc[1] == doctest::Approx(1.0));
}

TEST_CASE("range normalize stays in range and preserves order") {
    Rng rng(23);
    std::vector<double> v(100);
    for (auto& x : v) x = rng.uniform(-50, 50);
    const auto n = range_normalize(v, -1, 1);
    for (std::size_t i = 0; i < v.size(); ++i) {
        CHECK(n[i] >= -1.0);
        CHECK(n[i] <= 1.0);
        for (std::size_t j = i + 1; j < v.size(); ++j)
            if (v[i] < v[j]) CHECK(n[i] <= n[j]);
    }
}

TEST_CASE("directional magnitude") {
    CHECK(directional_magnitude({0, 0, 1}) == doctest::Approx(1.0));
    CHECK(directional_magnitude({3, 4, 0}) == doctest::Approx(5.0));
    CHECK(directional_magnitude({0, 0, 0}) == doctest::Approx(0.0));
}

TEST_CASE("gaze point distance uses x and y components") {
    CHECK(gaze_point_distance({0.5, 0.5, 1}, {0.5, 0.5, 1}) == doctest::Approx(0.0));
    CHECK(gaze_point_distance({0.1, 0, 1}, {-0.1, 0, 1}) == doctest::Approx(0.2));
    CHECK(gaze_point_distance({0.3, 0.4, 1}, {0, 0, 1}) == doctest::Approx(0.5));
}

TEST_CASE("finite difference") {
    const auto d = finite_difference(std::vector<double>{1, 3, 6});
    REQUIRE(d.size() == 3);
    CHECK(d[0] == doctest::Approx(0.0));
    CHECK(d[1] == doctest::Approx(2.0));
    CHECK(d[2] == doctest::Approx(3.0));

    for (double v : finite_difference(std::vector<double>{4, 4, 4, 4})) CHECK(v == doctest::Approx(0.0));

    const auto single = finite_difference(std::vector<double>{9});
    REQUIRE(single.size() == 1);
    CHECK(single[0] == doctest::Approx(0.0));
}

TEST_CASE("safe ratio guards small denominators") {
    CHECK(safe_ratio(4, 2) == doctest::Approx(2.0));
    CHECK(safe_ratio(1, 0) == doctest::Approx(1e6));
    CHECK(safe_ratio(0, 5) == doctest::Approx(0.0));
    CHECK(safe_ratio(1, -1e-9) == doctest::Approx(-1e6));
    CHECK(safe_ratio(2, 1e-3) == doctest::Approx(2000.0));
}

namespace {

SubjectRecording forward_sample_recording(int n) {
    SubjectRecording rec;
    rec.subject_id = "t";
    for (int i = 0; i < n; ++i) {
        GazeSample s;
        s.frame_index = i;
        s.origin_l = {-3.2, 0, 0};
        s.origin_r = {3.2, 0, 0};
        s.dir_l = {0.05, 0.0, 1.0};
        s.dir_r = {-0.05, 0.0, 1.0};
        s.gt_depth = 100.0;
        rec.samples.push_back(s);
    }
    return rec;
}

} // namespace

TEST_CASE("single-sample recording has zero temporal features") {
    const auto frames = compute_feature_frames(forward_sample_recording(1));
    REQUIRE(frames.size() == 1);
    for (const auto& name : {"vel_dir_l_x", "acc_dir_r_z", "vel_vergence_angle", "acc_vergence_depth",
                             "rel_change_va", "vel_ipd", "acc_gaze_point_distance"})
        CHECK(frames[0].x[static_cast<std::size_t>(feature_index(name))] == doctest::Approx(0.0));
}

TEST_CASE("identical consecutive samples zero out velocity and acceleration") {
    const auto frames = compute_feature_frames(forward_sample_recording(2));
    REQUIRE(frames.size() == 2);
    for (const auto& frame : frames)
        for (const auto& name :
             {"vel_dir_l_x", "vel_dir_r_y", "acc_dir_l_z", "vel_vergence_angle", "vel_vergence_depth",
              "acc_vergence_angle", "vel_ipd", "vel_gaze_point_distance"})
            CHECK(frame.x[static_cast<std::size_t>(feature_index(name))] == doctest::Approx(0.0));
}

TEST_CASE("noiseless synthetic recording reproduces depth through the vergence feature") {
    SynthConfig cfg;
    cfg.n_subjects = 1;
    cfg.frames_per_subject = 500;
    cfg.noise_sigma_deg = 0.0;
    cfg.bias_sigma_deg = 0.0;
    cfg.seed = 99;
    const auto rec = generate_subject(cfg, 0);
    const auto frames = compute_feature_frames(rec);
    const auto vd = static_cast<std::size_t>(feature_index("vergence_depth"));
    for (std::size_t i = 0; i < frames.size(); ++i) {
        const double rel = std::abs(frames[i].x[vd] - rec.samples[i].gt_depth) / rec.samples[i].gt_depth;
        CHECK(rel < 1e-9);
    }
}

TEST_CASE("feature frames are deterministic and finite") {
    SynthConfig cfg;
    cfg.n_subjects = 1;
    cfg.frames_per_subject = 200;
    cfg.seed = 5;
    const auto rec = generate_subject(cfg, 0);
    const auto a = compute_feature_frames(rec);
    const auto b = compute_feature_frames(rec);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i)
        for (int f = 0; f < kFeatureCount; ++f) {
            CHECK(a[i].x[static_cast<std::size_t>(f)] == b[i].x[static_cast<std::size_t>(f)]);
            CHECK(std::isfinite(a[i].x[static_cast<std::size_t>(f)]));
        }
}

TEST_CASE("zero direction inside a recording reports the frame index") {
    auto rec = forward_sample_recording(3);
    rec.samples[2].dir_r = {0, 0, 0};
    CHECK_THROWS_AS(compute_feature_frames(rec), ZeroDirectionVector);
    try {
        compute_feature_frames(rec);
    } catch (const ZeroDirectionVector& e) {
        CHECK(e.where() == 2);
    }
}

TEST_CASE("feature table json lists 54 entries") {
    const auto text = feature_table_json();
    CHECK(text.find("\"index\": 53") != std::string::npos);
    CHECK(text.find("vergence_depth") != std::string::npos);
}
