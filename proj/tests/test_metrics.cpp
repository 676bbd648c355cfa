#include "adasiam/metrics.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "adasiam/report.hpp"
#include "adasiam/rng.hpp"
#include "doctest.h"

using namespace adasiam;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const std::string& tag) {
    fs::path dir = fs::temp_directory_path() / "adasiam_metrics_test" / tag;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::string slurp(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(bool(in));
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// Per-frame view of the same definition: each frame contributes the number
// of thresholds its overlap strictly exceeds.
double auc_oracle(const std::vector<double>& overlaps) {
    double total = 0.0;
    for (double o : overlaps) {
        int beaten = 0;
        for (int t = 0; t < 21; ++t)
            if (o > t * 0.05) ++beaten;
        total += beaten / 21.0;
    }
    return total / overlaps.size();
}

BBox box_at(double cx, double cy) { return {cx - 10.0, cy - 10.0, 20.0, 20.0}; }

SequenceResult make_result(const std::string& name, int frames, double overlap,
                           int failures = 0) {
    SequenceResult s;
    s.name = name;
    s.overlaps.assign(frames, overlap);
    s.regularity.assign(frames, 1.0);
    s.change.assign(frames, false);
    s.segment_overlaps = {s.overlaps};
    s.failures = failures;
    s.metrics.success_auc = success_auc(s.overlaps);
    s.metrics.precision_at_20 = 1.0;
    RobustnessEao re = robustness_and_eao(s.segment_overlaps, failures, frames);
    s.metrics.robustness = re.robustness;
    s.metrics.eao_lite = re.eao_lite;
    s.metrics.failures = failures;
    return s;
}

}  // namespace

TEST_CASE("success auc threshold boundaries") {
    CHECK(success_auc(std::vector<double>(10, 1.0)) == 20.0 / 21.0);
    CHECK(success_auc(std::vector<double>(10, 0.0)) == 0.0);
    std::vector<double> half(10, 0.0);
    for (int i = 0; i < 5; ++i) half[i] = 1.0;
    CHECK(success_auc(half) == 10.0 / 21.0);
    // Strict inequality: an overlap sitting exactly on a threshold does not
    // count for it.
    CHECK(success_auc({0.5}) == doctest::Approx(10.0 / 21.0).epsilon(1e-12));
    CHECK_THROWS_WITH_AS(success_auc(std::vector<double>{}), doctest::Contains("empty"),
                         std::invalid_argument);
}

TEST_CASE("success auc matches per-frame oracle on random data") {
    Rng rng(402);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<double> overlaps(1 + int(rng.uniform_index(40)));
        for (double& o : overlaps) o = rng.uniform(0.0, 1.0);
        CHECK(success_auc(overlaps) == doctest::Approx(auc_oracle(overlaps)).epsilon(1e-12));
    }
}

TEST_CASE("success auc is monotone in each frame overlap") {
    Rng rng(403);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<double> overlaps(8);
        for (double& o : overlaps) o = rng.uniform(0.0, 1.0);
        double before = success_auc(overlaps);
        std::size_t i = rng.uniform_index(overlaps.size());
        overlaps[i] = overlaps[i] + rng.uniform(0.0, 1.0 - overlaps[i]);
        CHECK(success_auc(overlaps) >= before);
    }
}

TEST_CASE("success auc over boxes matches iou path") {
    std::vector<BBox> gt{{0, 0, 10, 10}, {5, 5, 10, 10}};
    CHECK(success_auc(gt, gt) == 20.0 / 21.0);
    std::vector<BBox> missed{{100, 100, 10, 10}, {200, 200, 10, 10}};
    CHECK(success_auc(missed, gt) == 0.0);
    std::vector<BBox> shorter{{0, 0, 10, 10}};
    CHECK_THROWS_WITH_AS(success_auc(shorter, gt), doctest::Contains("length mismatch"),
                         std::invalid_argument);
}

TEST_CASE("precision counts centers within the radius inclusively") {
    std::vector<BBox> gt{box_at(50, 50), box_at(50, 50), box_at(50, 50)};
    CHECK(precision_at(gt, gt) == 1.0);

    std::vector<BBox> off{box_at(71, 50), box_at(50, 71), box_at(50 + 15, 50 + 15)};
    // 21 px, 21 px, ~21.2 px: all misses.
    CHECK(precision_at(off, gt) == 0.0);

    std::vector<BBox> edge{box_at(70, 50), box_at(50, 30), box_at(71, 50)};
    // exactly 20, exactly 20, 21: two hits of three.
    CHECK(precision_at(edge, gt) == doctest::Approx(2.0 / 3.0));
    CHECK(precision_at(edge, gt, 25.0) == 1.0);

    std::vector<BBox> shorter{box_at(50, 50)};
    CHECK_THROWS_WITH_AS(precision_at(shorter, gt), doctest::Contains("length mismatch"),
                         std::invalid_argument);
    CHECK_THROWS_WITH_AS(precision_at({}, {}), doctest::Contains("empty"),
                         std::invalid_argument);
}

TEST_CASE("robustness and eao-lite definitions") {
    RobustnessEao perfect = robustness_and_eao({std::vector<double>(100, 1.0)}, 0, 100);
    CHECK(perfect.robustness == 0.0);
    CHECK(perfect.eao_lite == 1.0);

    RobustnessEao two = robustness_and_eao({std::vector<double>(1000, 0.5)}, 2, 1000);
    CHECK(two.robustness == 2.0);

    RobustnessEao split = robustness_and_eao({{0.8, 0.8}, {0.4, 0.4}}, 1, 4);
    CHECK(split.eao_lite == doctest::Approx(0.6).epsilon(1e-12));

    CHECK_THROWS_WITH_AS(robustness_and_eao({{1.0}}, 0, 0), doctest::Contains("zero frames"),
                         std::invalid_argument);
    CHECK_THROWS_WITH_AS(robustness_and_eao({}, 0, 10), doctest::Contains("no segments"),
                         std::invalid_argument);
    CHECK_THROWS_WITH_AS(robustness_and_eao({{}}, 0, 10), doctest::Contains("empty segment"),
                         std::invalid_argument);
    CHECK_THROWS_WITH_AS(robustness_and_eao({{1.0}}, -1, 10), doctest::Contains("negative"),
                         std::invalid_argument);
}

TEST_CASE("eao-lite of a constant sequence equals the constant") {
    Rng rng(404);
    for (int trial = 0; trial < 20; ++trial) {
        double c = rng.uniform(0.0, 1.0);
        std::vector<std::vector<double>> segs{std::vector<double>(17, c),
                                              std::vector<double>(5, c)};
        CHECK(robustness_and_eao(segs, 0, 22).eao_lite == doctest::Approx(c).epsilon(1e-12));
    }
}

TEST_CASE("robustness is a pure rate") {
    RobustnessEao a = robustness_and_eao({std::vector<double>(50, 0.5)}, 3, 50);
    RobustnessEao b = robustness_and_eao({std::vector<double>(100, 0.5)}, 6, 100);
    CHECK(a.robustness == b.robustness);
}

TEST_CASE("aggregate pools failures over the pooled frame count") {
    std::vector<SequenceResult> seqs{make_result("a", 500, 1.0, 2),
                                     make_result("b", 500, 0.5, 0)};
    MetricsReport agg = aggregate_metrics(seqs);
    CHECK(agg.failures == 2);
    CHECK(agg.robustness == 2.0);  // 2 failures / 1000 frames
    CHECK(agg.eao_lite == doctest::Approx(0.75));
    CHECK(agg.success_auc ==
          doctest::Approx((seqs[0].metrics.success_auc + seqs[1].metrics.success_auc) / 2));
    CHECK_THROWS_WITH_AS(aggregate_metrics({}), doctest::Contains("empty"),
                         std::invalid_argument);
}

TEST_CASE("emit_report writes parseable, sorted, aligned files") {
    fs::path dir = temp_dir("report");
    EvalReport rep;
    rep.sequences.push_back(make_result("zeta", 4, 1.0));
    rep.sequences.push_back(make_result("alpha", 3, 0.5, 1));
    rep.sequences.back().change = {false, true, false};
    rep.sequences.back().regularity = {1.0, 0.25, 0.75};
    rep.config_echo = {{"tau", "0.5"}, {"update_mode", "generative+blend+change"}};
    emit_report(rep, dir.string());

    std::string text = slurp(dir / "report.json");
    auto parsed = nlohmann::json::parse(text);  // round-trips through a generic parser
    CHECK(parsed["aggregate"]["failures"] == 1);
    CHECK(parsed["sequences"].size() == 2);
    CHECK(parsed["sequences"]["alpha"]["eao_lite"] == doctest::Approx(0.5));
    CHECK(parsed["config"]["tau"] == "0.5");
    CHECK(std::string(parsed["note"]).find("VOT toolkit") != std::string::npos);
    CHECK(text.find("\"alpha\"") < text.find("\"zeta\""));  // sorted regardless of insertion
    CHECK(text.find("\r") == std::string::npos);

    std::string curve = slurp(dir / "curves" / "alpha.csv");
    CHECK(curve == "frame,overlap,regularity,change\n"
                   "0,0.500000,1.000000,0\n"
                   "1,0.500000,0.250000,1\n"
                   "2,0.500000,0.750000,0\n");
    CHECK(fs::exists(dir / "curves" / "zeta.csv"));
}

TEST_CASE("emit_report output is byte-stable under reordering") {
    fs::path d1 = temp_dir("stable1"), d2 = temp_dir("stable2");
    EvalReport a, b;
    a.sequences = {make_result("s1", 5, 0.7), make_result("s2", 6, 0.3, 1)};
    b.sequences = {a.sequences[1], a.sequences[0]};  // reversed evaluation order
    a.config_echo = b.config_echo = {{"seed", "7"}};
    emit_report(a, d1.string());
    emit_report(b, d2.string());
    CHECK(slurp(d1 / "report.json") == slurp(d2 / "report.json"));
    CHECK(slurp(d1 / "curves" / "s1.csv") == slurp(d2 / "curves" / "s1.csv"));
}

TEST_CASE("emit_report rejects malformed result sets") {
    fs::path dir = temp_dir("bad");
    EvalReport empty;
    CHECK_THROWS_WITH_AS(emit_report(empty, dir.string()),
                         doctest::Contains("empty result set"), std::invalid_argument);

    EvalReport misaligned;
    misaligned.sequences.push_back(make_result("a", 4, 1.0));
    misaligned.sequences.back().regularity.pop_back();
    CHECK_THROWS_WITH_AS(emit_report(misaligned, dir.string()),
                         doctest::Contains("misaligned"), std::invalid_argument);

    EvalReport dup;
    dup.sequences = {make_result("a", 4, 1.0), make_result("a", 3, 0.5)};
    CHECK_THROWS_WITH_AS(emit_report(dup, dir.string()), doctest::Contains("duplicate"),
                         std::invalid_argument);
}

TEST_CASE("ablation table bytes") {
    fs::path dir = temp_dir("table");
    std::vector<AblationRow> rows{{"frozen", 0.5, 2.0},
                                  {"generative+blend+change", 0.625, 0.5}};
    std::string path = (dir / "table.csv").string();
    write_table(rows, path);
    CHECK(slurp(path) == "mode,eao_lite,robustness\n"
                         "frozen,0.500000,2.000000\n"
                         "generative+blend+change,0.625000,0.500000\n");
    CHECK_THROWS_WITH_AS(write_table({}, path), doctest::Contains("empty"),
                         std::invalid_argument);
    CHECK_THROWS_WITH_AS(write_table(rows, "/nonexistent_dir_zz/t.csv"),
                         doctest::Contains("cannot write"), std::runtime_error);
}
