#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>

#include "helpers.hpp"
#include "mammopos/mammopos.hpp"

using namespace mammopos;
namespace fs = std::filesystem;

namespace {

int run_cli(const std::string& args) {
    const std::string cmd = std::string(MAMMOPOS_CLI_PATH) + " " + args;
    const int rc = std::system(cmd.c_str());
    return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    REQUIRE(in.good());
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

bool trees_identical(const fs::path& a, const fs::path& b) {
    std::vector<fs::path> rel;
    for (const auto& e : fs::recursive_directory_iterator(a))
        if (e.is_regular_file()) rel.push_back(fs::relative(e.path(), a));
    std::sort(rel.begin(), rel.end());
    std::vector<fs::path> rel_b;
    for (const auto& e : fs::recursive_directory_iterator(b))
        if (e.is_regular_file()) rel_b.push_back(fs::relative(e.path(), b));
    std::sort(rel_b.begin(), rel_b.end());
    if (rel != rel_b) return false;
    for (const auto& r : rel)
        if (slurp(a / r) != slurp(b / r)) return false;
    return true;
}

}  // namespace

TEST_CASE("phantom workflow reproduces scenario labels", "[cli]") {
    testutil::TempDir tmp;
    const fs::path ds = tmp.path() / "ds";
    const fs::path rep = tmp.path() / "rep";
    REQUIRE(run_cli("gen-phantoms --out " + ds.string() + " --n 8 --seed 7 > /dev/null") == 0);
    REQUIRE(fs::exists(ds / "manifest.csv"));
    REQUIRE(fs::exists(ds / "train_mlo.txt"));

    REQUIRE(run_cli("assess --study " + ds.string() + " --out " + rep.string() +
                    " --predictor passthrough > /dev/null") == 0);

    const auto rows = read_manifest(ds / "manifest.csv");
    REQUIRE(rows.size() == 8);
    for (const auto& row : rows) {
        const auto sidecar = rep / (row.subject + ".json");
        REQUIRE(fs::exists(sidecar));
        const StudyReport r = load_report_json(sidecar);
        REQUIRE(r.breasts.size() == 1);
        const auto& b = r.breasts.front();
        const Verdict mlo = b.chosen_mlo ? Verdict::Adequate : Verdict::Inadequate;
        CHECK(mlo == row.mlo_label);
        CHECK(b.verdict == row.cc_label);
        if (row.scenario == Scenario::BbMissing) {
            const std::string text = slurp(rep / (row.subject + ".txt"));
            CHECK(text.find("No conclusion can be made") != std::string::npos);
        }
    }
}

TEST_CASE("report subcommand re-renders the sidecar byte-identically", "[cli]") {
    testutil::TempDir tmp;
    const fs::path ds = tmp.path() / "ds";
    const fs::path rep = tmp.path() / "rep";
    REQUIRE(run_cli("gen-phantoms --out " + ds.string() + " --n 2 --seed 3 > /dev/null") == 0);
    REQUIRE(run_cli("assess --study " + ds.string() + " --out " + rep.string() +
                    " > /dev/null") == 0);
    const fs::path rendered = tmp.path() / "rendered.txt";
    REQUIRE(run_cli("report --json " + (rep / "phantom_0000.json").string() + " --out " +
                    rendered.string() + " > /dev/null") == 0);
    CHECK(slurp(rendered) == slurp(rep / "phantom_0000.txt"));
}

TEST_CASE("one-epoch training writes a loadable checkpoint and one history row", "[cli]") {
    testutil::TempDir tmp;
    const fs::path ds = tmp.path() / "ds";
    REQUIRE(run_cli("gen-phantoms --out " + ds.string() + " --n 12 --seed 5 > /dev/null") == 0);
    const fs::path ckpt = tmp.path() / "model.bin";
    REQUIRE(run_cli("train --data " + (ds / "train_mlo.txt").string() + " --out " + ckpt.string() +
                    " --epochs 1 --batch-size 4 --seed 2 > /dev/null") == 0);

    const Regressor model = load_checkpoint(ckpt);
    CHECK(model.input_size() == 250);

    const std::string history = slurp(fs::path(ckpt.string() + ".history.csv"));
    CHECK(history.rfind("epoch,train_loss,val_loss\n", 0) == 0);
    CHECK(std::count(history.begin(), history.end(), '\n') == 2);  // header + 1 epoch

    // the checkpoint drives trained-mode assessment
    const fs::path rep = tmp.path() / "rep";
    REQUIRE(run_cli("assess --study " + ds.string() + " --out " + rep.string() +
                    " --predictor trained --checkpoint " + ckpt.string() + " > /dev/null") == 0);
    CHECK(fs::exists(rep / "phantom_0011.json"));
}

TEST_CASE("eval scores reports and predictions against the manifest", "[cli]") {
    testutil::TempDir tmp;
    const fs::path ds = tmp.path() / "ds";
    const fs::path rep = tmp.path() / "rep";
    const fs::path metrics = tmp.path() / "metrics";
    REQUIRE(run_cli("gen-phantoms --out " + ds.string() + " --n 8 --seed 7 > /dev/null") == 0);
    REQUIRE(run_cli("assess --study " + ds.string() + " --out " + rep.string() +
                    " > /dev/null") == 0);
    REQUIRE(run_cli("eval --dataset " + ds.string() + " --reports " + rep.string() + " --out " +
                    metrics.string() + " > /dev/null") == 0);

    // 8 cases cycle the scenarios twice: MLO 6 adequate / 2 pec-short,
    // CC 2 adequate / 2 tissue-cut / 4 indeterminate, BB present on 6
    CHECK(slurp(metrics / "confusion_mlo.csv") ==
          "tp,fn,fp,tn,indeterminate,tpr_percent,tnr_percent\n6,0,0,2,0,100.00,100.00\n");
    CHECK(slurp(metrics / "confusion_cc.csv") ==
          "tp,fn,fp,tn,indeterminate,tpr_percent,tnr_percent\n2,0,0,2,4,100.00,100.00\n");
    CHECK(slurp(metrics / "detection.csv") ==
          "population,detected,total,rate_percent\nall,6,8,75.00\nbb_present,6,6,100.00\n");
}

TEST_CASE("config file applies under CLI-flag precedence", "[cli]") {
    testutil::TempDir tmp;
    const fs::path ds = tmp.path() / "ds";
    REQUIRE(run_cli("gen-phantoms --out " + ds.string() + " --n 2 --seed 9 > /dev/null") == 0);
    const fs::path cfg = tmp.path() / "run.cfg";
    std::ofstream(cfg) << "[assess]\nunit-mode = pixel\ndiff-threshold = 25\n";

    const fs::path rep1 = tmp.path() / "rep1";
    REQUIRE(run_cli("--config " + cfg.string() + " assess --study " + ds.string() + " --out " +
                    rep1.string() + " > /dev/null") == 0);
    const StudyReport r1 = load_report_json(rep1 / "phantom_0000.json");
    CHECK(r1.config.unit_mode == UnitMode::Pixel);
    CHECK(r1.config.diff_threshold == 25.0);

    const fs::path rep2 = tmp.path() / "rep2";
    REQUIRE(run_cli("--config " + cfg.string() + " assess --study " + ds.string() + " --out " +
                    rep2.string() + " --diff-threshold 30 > /dev/null") == 0);
    const StudyReport r2 = load_report_json(rep2 / "phantom_0000.json");
    CHECK(r2.config.unit_mode == UnitMode::Pixel);
    CHECK(r2.config.diff_threshold == 30.0);
}

TEST_CASE("failures exit nonzero with a diagnostic", "[cli]") {
    testutil::TempDir tmp;
    const fs::path ds = tmp.path() / "ds";
    REQUIRE(run_cli("gen-phantoms --out " + ds.string() + " --n 2 --seed 1 > /dev/null") == 0);
    const fs::path err = tmp.path() / "err.txt";

    SECTION("missing checkpoint in trained mode") {
        CHECK(run_cli("assess --study " + ds.string() + " --out " + (tmp.path() / "r").string() +
                      " --predictor trained --checkpoint " + (tmp.path() / "no.bin").string() +
                      " 2> " + err.string()) != 0);
        CHECK(slurp(err).find("no.bin") != std::string::npos);
    }
    SECTION("study directory with no recognizable views") {
        fs::create_directories(tmp.path() / "empty");
        CHECK(run_cli("assess --study " + (tmp.path() / "empty").string() + " --out " +
                      (tmp.path() / "r").string() + " 2> " + err.string()) != 0);
        CHECK(!slurp(err).empty());
    }
    SECTION("malformed config value") {
        const fs::path cfg = tmp.path() / "bad.cfg";
        std::ofstream(cfg) << "[train]\nepochs = banana\n";
        CHECK(run_cli("--config " + cfg.string() + " train --data " +
                      (ds / "train_mlo.txt").string() + " --out " +
                      (tmp.path() / "m.bin").string() + " 2> " + err.string()) != 0);
    }
    SECTION("unknown config key") {
        const fs::path cfg = tmp.path() / "bad.cfg";
        std::ofstream(cfg) << "[train]\nbogus = 1\n";
        CHECK(run_cli("--config " + cfg.string() + " train --data " +
                      (ds / "train_mlo.txt").string() + " --out " +
                      (tmp.path() / "m.bin").string() + " 2> " + err.string()) != 0);
    }
}

TEST_CASE("fixed seeds give byte-identical artifacts", "[cli]") {
    testutil::TempDir tmp;
    const fs::path a = tmp.path() / "a", b = tmp.path() / "b";
    REQUIRE(run_cli("gen-phantoms --out " + a.string() + " --n 4 --seed 11 > /dev/null") == 0);
    REQUIRE(run_cli("gen-phantoms --out " + b.string() + " --n 4 --seed 11 > /dev/null") == 0);
    CHECK(trees_identical(a, b));

    const fs::path ra = tmp.path() / "ra", rb = tmp.path() / "rb";
    REQUIRE(run_cli("assess --study " + a.string() + " --out " + ra.string() + " > /dev/null") ==
            0);
    REQUIRE(run_cli("assess --study " + a.string() + " --out " + rb.string() + " > /dev/null") ==
            0);
    CHECK(trees_identical(ra, rb));
}
