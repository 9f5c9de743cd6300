#include "pavad/evaluation.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <set>

#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "pavad/video.hpp"

namespace pavad {

namespace {

void check_inputs(std::span<const double> scores, std::span<const int> labels, std::size_t& pos, std::size_t& neg) {
    require(scores.size() == labels.size(), ErrorKind::Evaluation,
            "scores (" + std::to_string(scores.size()) + ") and labels (" + std::to_string(labels.size()) +
                ") differ in length");
    pos = neg = 0;
    for (int y : labels) {
        require(y == 0 || y == 1, ErrorKind::Evaluation, "labels must be 0 or 1");
        (y ? pos : neg) += 1;
    }
    require(pos > 0 && neg > 0, ErrorKind::Evaluation, "AUC needs both normal and anomalous frames");
    for (double s : scores) require(!std::isnan(s), ErrorKind::Evaluation, "NaN score");
}

}  // namespace

EvalResult micro_auc(std::span<const double> scores, std::span<const int> labels) {
    std::size_t pos = 0, neg = 0;
    check_inputs(scores, labels, pos, neg);
    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

    EvalResult r;
    r.n_frames = scores.size();
    r.n_positive = pos;
    r.roc.push_back({0.0, 0.0});
    std::size_t tp = 0, fp = 0;
    double area = 0.0;
    for (std::size_t i = 0; i < order.size();) {
        const double s = scores[order[i]];
        std::size_t dtp = 0, dfp = 0;
        for (; i < order.size() && scores[order[i]] == s; ++i) (labels[order[i]] ? dtp : dfp) += 1;
        // Trapezoid in count units; exact in double for realistic sizes.
        area += static_cast<double>(dfp) * (static_cast<double>(tp) + 0.5 * static_cast<double>(dtp));
        tp += dtp;
        fp += dfp;
        r.roc.push_back({static_cast<double>(fp) / neg, static_cast<double>(tp) / pos});
    }
    r.micro_auc = area / (static_cast<double>(pos) * static_cast<double>(neg));
    return r;
}

double auc_oracle(std::span<const double> scores, std::span<const int> labels) {
    std::size_t pos = 0, neg = 0;
    check_inputs(scores, labels, pos, neg);
    require(scores.size() <= 10000, ErrorKind::Evaluation, "oracle limited to 10,000 scores");
    double wins = 0.0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        if (labels[i] != 1) continue;
        for (std::size_t j = 0; j < scores.size(); ++j) {
            if (labels[j] != 0) continue;
            if (scores[i] > scores[j]) wins += 1.0;
            else if (scores[i] == scores[j]) wins += 0.5;
        }
    }
    return wins / (static_cast<double>(pos) * static_cast<double>(neg));
}

RunEvaluation evaluate_run(const std::filesystem::path& score_index, const std::filesystem::path& labels_dir,
                           const AggWeights& weights) {
    weights.validate();
    std::ifstream in(score_index);
    require(in.good(), ErrorKind::Evaluation, "cannot open score index " + score_index.string());
    nlohmann::json index;
    try {
        in >> index;
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorKind::Evaluation, std::string("malformed score index: ") + e.what());
    }
    const auto base = score_index.parent_path();

    std::map<std::string, ScoreSeries> series;
    for (const auto& v : index.at("videos")) {
        std::ifstream f(base / v.at("file").get<std::string>());
        require(f.good(), ErrorKind::Evaluation, "missing score file for " + v.at("video_id").get<std::string>());
        nlohmann::json j;
        f >> j;
        ScoreSeries s = score_series_from_json(j);
        series.emplace(s.video_id, std::move(s));
    }
    std::set<std::string> label_ids;
    if (std::filesystem::is_directory(labels_dir))
        for (const auto& e : std::filesystem::directory_iterator(labels_dir))
            if (e.path().extension() == ".json") label_ids.insert(e.path().stem().string());

    std::string missing;
    for (const auto& [id, s] : series)
        if (!label_ids.count(id)) missing += " " + id + "(labels)";
    for (const auto& id : label_ids)
        if (!series.count(id)) missing += " " + id + "(scores)";
    require(missing.empty(), ErrorKind::Evaluation, "score/label video ids differ; missing:" + missing);

    RunEvaluation run;
    run.weights = weights;
    std::vector<double> scores;
    std::vector<int> labels;
    for (const auto& [id, s] : series) {  // std::map iterates in sorted id order
        const LabelTrack track = load_labels(labels_dir / (id + ".json"), id);
        require(track.labels.size() == s.agg.size(), ErrorKind::Evaluation,
                "video " + id + ": " + std::to_string(s.agg.size()) + " scores vs " +
                    std::to_string(track.labels.size()) + " labels");
        const auto agg = aggregate(s.w1, s.w2, s.w3, weights);
        scores.insert(scores.end(), agg.begin(), agg.end());
        labels.insert(labels.end(), track.labels.begin(), track.labels.end());
        run.video_ids.push_back(id);
    }
    run.result = micro_auc(scores, labels);
    return run;
}

void write_eval_report(const std::filesystem::path& out, const RunEvaluation& run, const nlohmann::json& config_echo) {
    std::filesystem::create_directories(out);
    nlohmann::json j;
    j["micro_auc"] = run.result.micro_auc;
    j["n_frames"] = run.result.n_frames;
    j["n_positive"] = run.result.n_positive;
    j["videos"] = run.video_ids;
    j["weights"] = {run.weights.eta1, run.weights.eta2, run.weights.eta3};
    j["mode"] = run.weights.uses_discriminator() ? "with-discriminator" : "without-discriminator";
    j["config"] = config_echo;
    std::ofstream(out / "eval_report.json") << j.dump(2) << '\n';
    std::ofstream csv(out / "roc.csv");
    csv << "fpr,tpr\n";
    csv.precision(17);
    for (const auto& p : run.result.roc) csv << p.fpr << ',' << p.tpr << '\n';
}

void write_score_plot(const std::filesystem::path& file, const ScoreSeries& series, const std::vector<int>& labels) {
    const int W = 800, H = 300, ml = 50, mr = 20, mt = 30, mb = 40;
    const int pw = W - ml - mr, ph = H - mt - mb;
    cv::Mat img(H, W, CV_8UC3, cv::Scalar(255, 255, 255));
    const std::size_t n = series.agg.size();
    auto px = [&](double t) { return ml + static_cast<int>(std::lround(n > 1 ? t * pw / (n - 1.0) : 0.0)); };
    auto py = [&](double v) { return mt + static_cast<int>(std::lround((1.0 - std::clamp(v, 0.0, 1.0)) * ph)); };

    for (std::size_t t = 0; t < labels.size() && t < n; ++t) {
        if (!labels[t]) continue;
        const int x0 = px(t - 0.5 >= 0 ? t - 0.5 : 0), x1 = px(std::min<double>(t + 0.5, n - 1));
        cv::rectangle(img, {x0, mt}, {std::max(x1, x0 + 1), mt + ph}, cv::Scalar(200, 200, 255), cv::FILLED);
    }
    cv::rectangle(img, {ml, mt}, {ml + pw, mt + ph}, cv::Scalar(0, 0, 0), 1);
    for (double v : {0.0, 0.5, 1.0}) {
        cv::line(img, {ml - 4, py(v)}, {ml, py(v)}, cv::Scalar(0, 0, 0));
        char tick[8];
        std::snprintf(tick, sizeof tick, "%.1f", v);
        cv::putText(img, tick, {8, py(v) + 4}, cv::FONT_HERSHEY_SIMPLEX, 0.4, cv::Scalar(0, 0, 0));
    }
    std::vector<cv::Point> pts;
    for (std::size_t t = 0; t < n; ++t) pts.emplace_back(px(static_cast<double>(t)), py(series.agg[t]));
    if (pts.size() > 1) cv::polylines(img, pts, false, cv::Scalar(160, 60, 0), 2, cv::LINE_AA);
    cv::putText(img, series.video_id + "  anomaly score vs frame", {ml, 20}, cv::FONT_HERSHEY_SIMPLEX, 0.5,
                cv::Scalar(0, 0, 0));
    cv::putText(img, "frame 0", {ml, H - 12}, cv::FONT_HERSHEY_SIMPLEX, 0.4, cv::Scalar(0, 0, 0));
    cv::putText(img, std::to_string(n ? n - 1 : 0), {ml + pw - 24, H - 12}, cv::FONT_HERSHEY_SIMPLEX, 0.4,
                cv::Scalar(0, 0, 0));
    std::filesystem::create_directories(file.parent_path());
    require(cv::imwrite(file.string(), img), ErrorKind::Evaluation, "cannot write plot " + file.string());
}

}  // namespace pavad
