#pragma once

#include <filesystem>
#include <span>
#include <vector>

#include "json.hpp"

#include "pavad/scoring.hpp"

namespace pavad {

struct RocPoint {
    double fpr = 0.0;
    double tpr = 0.0;
};

struct EvalResult {
    double micro_auc = 0.0;
    std::vector<RocPoint> roc;  // (0,0) ... (1,1)
    std::size_t n_frames = 0;
    std::size_t n_positive = 0;
};

// Frame-level AUC over concatenated scores; higher score = more anomalous.
// Equal scores share one threshold step, so the area equals the
// tie-corrected Mann-Whitney statistic.
EvalResult micro_auc(std::span<const double> scores, std::span<const int> labels);

// Pairwise count (pos > neg, ties 0.5) / (n_pos * n_neg). Quadratic.
double auc_oracle(std::span<const double> scores, std::span<const int> labels);

struct RunEvaluation {
    EvalResult result;
    std::vector<std::string> video_ids;  // concatenation order
    AggWeights weights;
};

// Reads the score index and <labels_dir>/<video_id>.json tracks, recomputes
// omega_agg with `weights`, concatenates in sorted id order and evaluates.
RunEvaluation evaluate_run(const std::filesystem::path& score_index, const std::filesystem::path& labels_dir,
                           const AggWeights& weights);

// <out>/eval_report.json and <out>/roc.csv.
void write_eval_report(const std::filesystem::path& out, const RunEvaluation& run, const nlohmann::json& config_echo);

// Score-over-time PNG: omega_agg against frame index with shaded anomalous spans.
void write_score_plot(const std::filesystem::path& file, const ScoreSeries& series, const std::vector<int>& labels);

}  // namespace pavad
