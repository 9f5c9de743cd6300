#include <fstream>

#include "checks.hpp"
#include "doctest.h"
#include "helpers.hpp"
#include "pavad/evaluation.hpp"

using namespace pavad;

TEST_CASE("micro AUC agrees with the pairwise oracle") {
    const auto o = checks::auc_oracle_equivalence(100);
    INFO(o.detail);
    CHECK(o.pass);
}

TEST_CASE("known AUC values and ROC shape") {
    const std::vector<double> s = {0.1, 0.4, 0.35, 0.8};
    const std::vector<int> y = {0, 0, 1, 1};
    const EvalResult r = micro_auc(s, y);
    CHECK(r.micro_auc == doctest::Approx(0.75));
    CHECK(r.n_frames == 4);
    CHECK(r.n_positive == 2);
    CHECK(r.roc.front().fpr == 0.0);
    CHECK(r.roc.back().tpr == 1.0);
    CHECK(micro_auc(std::vector<double>{1, 1, 1}, std::vector<int>{0, 1, 0}).micro_auc == 0.5);

    CHECK_THROWS_AS(micro_auc(std::vector<double>{1, 2}, std::vector<int>{1, 1}), Error);
    CHECK_THROWS_AS(micro_auc(std::vector<double>{1, 2}, std::vector<int>{1}), Error);
}

namespace {

void write_run(const testutil::TempDir& dir, const std::map<std::string, std::vector<int>>& labels, bool invert) {
    std::vector<ScoreSeries> series;
    for (const auto& [id, track] : labels) {
        ScoreSeries s;
        s.video_id = id;
        for (int l : track) {
            const double v = invert ? 1.0 - l : l;
            s.w1.push_back(v);
            s.w2.push_back(v);
            s.w3.push_back(0.0);
        }
        s.agg = s.w1;
        series.push_back(s);
        save_labels(dir / ("labels/" + id + ".json"), {id, track});
    }
    export_scores(dir / "run", series, AggWeights{}, nlohmann::json::object());
}

}  // namespace

TEST_CASE("evaluate_run on perfect and inverted detectors") {
    const std::map<std::string, std::vector<int>> labels = {{"b", {0, 1, 1, 0}}, {"a", {0, 0, 1}}};
    {
        testutil::TempDir dir("eval_perfect");
        write_run(dir, labels, false);
        const RunEvaluation r = evaluate_run(dir / "run/scores_index.json", dir / "labels", AggWeights{0.5, 0.5, 0.0});
        CHECK(r.result.micro_auc == 1.0);
        CHECK(r.video_ids == std::vector<std::string>{"a", "b"});
        CHECK(r.result.n_frames == 7);
        write_eval_report(dir / "report", r, nlohmann::json::object());
        CHECK(std::filesystem::exists(dir / "report/eval_report.json"));
        CHECK(std::filesystem::exists(dir / "report/roc.csv"));
        ScoreSeries s;
        s.video_id = "a";
        s.agg = {0.0, 0.5, 1.0};
        write_score_plot(dir / "plot.png", s, labels.at("a"));
        CHECK(std::filesystem::file_size(dir / "plot.png") > 0);
    }
    {
        testutil::TempDir dir("eval_inverted");
        write_run(dir, labels, true);
        CHECK(evaluate_run(dir / "run/scores_index.json", dir / "labels", AggWeights{0.5, 0.5, 0.0}).result.micro_auc ==
              0.0);
    }
}

TEST_CASE("evaluate_run rejects id mismatches") {
    testutil::TempDir dir("eval_mismatch");
    write_run(dir, {{"a", {0, 1}}, {"b", {1, 0}}}, false);
    std::filesystem::remove(dir / "labels/b.json");
    try {
        evaluate_run(dir / "run/scores_index.json", dir / "labels", AggWeights{});
        FAIL("expected an evaluation error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::Evaluation);
        CHECK(std::string(e.what()).find("b") != std::string::npos);
    }
}

TEST_CASE("AUC is invariant to permuting frames") {
    std::mt19937_64 rng(3);
    std::vector<double> s(300);
    std::vector<int> y(300);
    for (int i = 0; i < 300; ++i) {
        y[i] = i % 3 == 0;
        s[i] = std::uniform_int_distribution<int>(0, 9)(rng) + y[i] * 2;
    }
    const double a = micro_auc(s, y).micro_auc;
    std::vector<int> idx(300);
    std::iota(idx.begin(), idx.end(), 0);
    std::shuffle(idx.begin(), idx.end(), rng);
    std::vector<double> s2;
    std::vector<int> y2;
    for (int i : idx) {
        s2.push_back(s[i]);
        y2.push_back(y[i]);
    }
    CHECK(micro_auc(s2, y2).micro_auc == doctest::Approx(a).epsilon(1e-12));
}
