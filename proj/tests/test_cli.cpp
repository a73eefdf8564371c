#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <fstream>
#include <iostream>
#include <sstream>

#include "foval/cli.hpp"
#include "foval/dataset.hpp"

#include "test_support.hpp"

#include <nlohmann/json.hpp>

using namespace foval;
using test_support::TempDir;

namespace {

struct CapturedRun {
    int exit_code = 0;
    std::string out;
};

CapturedRun run(const std::vector<std::string>& args) {
    std::stringstream out, err;
    auto* old_out = std::cout.rdbuf(out.rdbuf());
    auto* old_err = std::cerr.rdbuf(err.rdbuf());
    CapturedRun r;
    r.exit_code = run_cli(args);
    std::cout.rdbuf(old_out);
    std::cerr.rdbuf(old_err);
    r.out = out.str();
    return r;
}

} // namespace

TEST_CASE("no arguments prints usage and exits 1") {
    CHECK(run({}).exit_code == 1);
}

TEST_CASE("unknown flags exit 1") {
    CHECK(run({"synth", "--wat", "3"}).exit_code == 1);
}

TEST_CASE("missing input file exits 1") {
    TempDir dir("cli");
    CHECK(run({"train", "--data", dir.file("missing.csv"), "--out", dir.file("run")}).exit_code == 1);
    CHECK(run({"features", "--data", dir.file("missing.csv"), "--out", dir.file("f.csv")}).exit_code == 1);
}

TEST_CASE("describe emits the 54-entry feature table") {
    const auto r = run({"describe"});
    CHECK(r.exit_code == 0);
    const auto table = nlohmann::json::parse(r.out);
    CHECK(table.size() == 54);
    CHECK(table[0].contains("name"));
    CHECK(table[0].contains("formula"));

    const auto alias = run({"features", "--describe"});
    CHECK(alias.exit_code == 0);
    CHECK(nlohmann::json::parse(alias.out).size() == 54);
}

TEST_CASE("synth writes the requested number of rows") {
    TempDir dir("cli");
    const auto r = run({"synth", "--subjects", "2", "--frames", "50", "--seed", "7", "--out",
                        dir.file("data.csv")});
    CHECK(r.exit_code == 0);
    const auto recs = load_csv(dir.file("data.csv"));
    REQUIRE(recs.size() == 2);
    CHECK(recs[0].samples.size() == 50);
    CHECK(recs[1].samples.size() == 50);
}

TEST_CASE("synth determinism: same argv, same bytes") {
    TempDir dir("cli");
    CHECK(run({"synth", "--subjects", "2", "--frames", "40", "--seed", "9", "--out", dir.file("a.csv")})
              .exit_code == 0);
    CHECK(run({"synth", "--subjects", "2", "--frames", "40", "--seed", "9", "--out", dir.file("b.csv")})
              .exit_code == 0);
    CHECK(test_support::read_file(dir.file("a.csv")) == test_support::read_file(dir.file("b.csv")));
}

TEST_CASE("config file provides defaults and flags win") {
    TempDir dir("cli");
    {
        std::ofstream cfg(dir.file("synth.cfg"));
        cfg << "# experiment config\nsubjects = 4\nframes = 30\nseed = 11\n";
    }
    const auto r = run({"synth", "--config", dir.file("synth.cfg"), "--subjects", "2", "--out",
                        dir.file("c.csv")});
    CHECK(r.exit_code == 0);
    const auto recs = load_csv(dir.file("c.csv"));
    CHECK(recs.size() == 2);            // flag wins
    CHECK(recs[0].samples.size() == 30); // config value survives
}

TEST_CASE("features subcommand writes one row per frame") {
    TempDir dir("cli");
    REQUIRE(run({"synth", "--subjects", "1", "--frames", "25", "--seed", "3", "--out",
                 dir.file("d.csv")})
                .exit_code == 0);
    const auto r = run({"features", "--data", dir.file("d.csv"), "--out", dir.file("f.csv")});
    CHECK(r.exit_code == 0);
    const auto text = test_support::read_file(dir.file("f.csv"));
    CHECK(std::count(text.begin(), text.end(), '\n') == 26); // header + 25 rows
}

TEST_CASE("preprocess emits a manifest and processed frames") {
    TempDir dir("cli");
    REQUIRE(run({"synth", "--subjects", "2", "--frames", "120", "--seed", "4", "--out",
                 dir.file("e.csv")})
                .exit_code == 0);
    const auto r = run({"preprocess", "--data", dir.file("e.csv"), "--out", dir.file("pre")});
    CHECK(r.exit_code == 0);
    const auto manifest = nlohmann::json::parse(test_support::read_file(dir.file("pre/pipeline_manifest.json")));
    CHECK(manifest.at("feature_count").get<int>() == 54);
    CHECK(manifest.at("transforms").size() == 54);
    CHECK(!test_support::read_file(dir.file("pre/frames.csv")).empty());
}

TEST_CASE("end-to-end toy train run produces a deterministic report") {
    TempDir dir("cli");
    REQUIRE(run({"synth", "--subjects", "3", "--frames", "150", "--noise-sigma-deg", "0.5", "--seed",
                 "6", "--out", dir.file("t.csv")})
                .exit_code == 0);

    const std::vector<std::string> train_args = {
        "train", "--data", dir.file("t.csv"), "--out", dir.file("run1"), "--preset", "toy",
        "--epochs", "2", "--seed", "11"};
    CHECK(run(train_args).exit_code == 0);

    const auto report = nlohmann::json::parse(test_support::read_file(dir.file("run1/report.json")));
    CHECK(report.at("n_folds").get<int>() == 3);
    CHECK(report.at("folds").size() == 3);
    CHECK(report.at("metrics").contains("categories_pct"));
    CHECK(!test_support::read_file(dir.file("run1/run_manifest.json")).empty());
    CHECK(!test_support::read_file(dir.file("run1/histogram.svg")).empty());

    // Same seed, second run directory: byte-identical report.json.
    auto second = train_args;
    second[4] = dir.file("run2");
    CHECK(run(second).exit_code == 0);
    CHECK(test_support::read_file(dir.file("run1/report.json")) ==
          test_support::read_file(dir.file("run2/report.json")));

    // The report subcommand rebuilds aggregate artifacts from the run.
    CHECK(run({"report", "--run", dir.file("run1"), "--out", dir.file("rebuilt")}).exit_code == 0);
    const auto rebuilt = nlohmann::json::parse(test_support::read_file(dir.file("rebuilt/report.json")));
    CHECK(rebuilt.at("mae_cm").get<double>() ==
          doctest::Approx(report.at("metrics").at("mae_cm").get<double>()));
}

TEST_CASE("eval subcommand reports the geometric baseline") {
    TempDir dir("cli");
    REQUIRE(run({"synth", "--subjects", "2", "--frames", "120", "--seed", "13", "--out",
                 dir.file("g.csv")})
                .exit_code == 0);
    const auto r = run({"eval", "--data", dir.file("g.csv"), "--out", dir.file("ev")});
    CHECK(r.exit_code == 0);
    const auto report = nlohmann::json::parse(test_support::read_file(dir.file("ev/report.json")));
    CHECK(report.at("per_subject").size() == 2);
}

TEST_CASE("checkpoint-based eval works against a trained fold") {
    TempDir dir("cli");
    REQUIRE(run({"synth", "--subjects", "3", "--frames", "140", "--seed", "15", "--out",
                 dir.file("h.csv")})
                .exit_code == 0);
    REQUIRE(run({"train", "--data", dir.file("h.csv"), "--out", dir.file("run"), "--epochs", "2",
                 "--seed", "21"})
                .exit_code == 0);
    const auto report = nlohmann::json::parse(test_support::read_file(dir.file("run/report.json")));
    const std::string subject = report.at("folds")[0].at("subject").get<std::string>();

    const auto r = run({"eval", "--data", dir.file("h.csv"), "--out", dir.file("ev2"), "--checkpoint",
                        dir.file("run/folds/" + subject + "/checkpoint.bin"), "--manifest",
                        dir.file("run/folds/" + subject + "/pipeline_manifest.json")});
    CHECK(r.exit_code == 0);
    CHECK(!test_support::read_file(dir.file("ev2/report.json")).empty());
}
