#pragma once

#include <cstddef>
#include <exception>
#include <map>
#include <sstream>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include <json.hpp>

#include "kinshape/data.hpp"
#include "kinshape/errors.hpp"
#include "kinshape/network.hpp"
#include "kinshape/serialize.hpp"

namespace kinshape {

// k-fold cross-validation harness: every fold is held out exactly once, the
// model is retrained from scratch on the remaining folds, and the report is
// assembled in fold order so reruns with one seed are bit-identical.

struct EvalReport {
    std::vector<double> per_fold_accuracy; // fused accuracy on each held-out fold
    double mean_accuracy = 0.0;            // arithmetic mean of the per-fold values
    std::map<std::string, double> per_relation_accuracy; // pooled fused accuracy by tag
    BranchAccuracies branch_accuracies;    // fold-averaged accuracy per branch
    TrainConfig config;
    std::size_t fold_count = 0;
    std::size_t sample_count = 0;
};

struct AblationRow {
    std::string setting;
    double mean_accuracy;
};

struct AblationResult {
    std::vector<AblationRow> rows; // appearance-only, shape-only, fused
    EvalReport report;             // the underlying cross-validation run
};

namespace detail {

struct RelationCount {
    std::size_t correct = 0;
    std::size_t total = 0;
};

struct FoldOutcome {
    BranchAccuracies accuracy;
    std::map<std::string, RelationCount> relations;
};

inline void require_fold_partition(const std::vector<PairSample>& samples, std::size_t k) {
    if (k < 2) throw config_error("fold count must be at least 2");
    if (samples.size() < k)
        throw data_error("fewer samples than folds: " + std::to_string(samples.size()) + " < " +
                         std::to_string(k));
    std::vector<std::size_t> sizes(k, 0);
    for (const PairSample& s : samples) {
        if (s.fold < 0 || static_cast<std::size_t>(s.fold) >= k)
            throw config_error("sample fold " + std::to_string(s.fold) +
                               " does not fit a " + std::to_string(k) + "-fold split");
        sizes[static_cast<std::size_t>(s.fold)]++;
    }
    for (std::size_t f = 0; f < k; ++f)
        if (sizes[f] == 0)
            throw config_error("fold " + std::to_string(f) + " has no samples");
}

inline FoldOutcome run_fold(const std::vector<PairFeatures>& features,
                            const std::vector<int>& folds, int held_out,
                            const TrainConfig& config) {
    std::vector<PairFeatures> train_set;
    std::vector<const PairFeatures*> test_set;
    for (std::size_t i = 0; i < features.size(); ++i) {
        if (folds[i] == held_out)
            test_set.push_back(&features[i]);
        else
            train_set.push_back(features[i]);
    }
    const TrainResult result = train_on_features(train_set, config);

    FoldOutcome out;
    double n = 0.0;
    for (const PairFeatures* f : test_set) {
        const FusedScore s = predict(result.model, *f);
        const bool want = f->label == PairLabel::kin;
        out.accuracy.appearance += decide(s.p_appearance) == want ? 1.0 : 0.0;
        out.accuracy.shape += decide(s.p_shape) == want ? 1.0 : 0.0;
        const bool fused_ok = decide(s.p_fused) == want;
        out.accuracy.fused += fused_ok ? 1.0 : 0.0;
        RelationCount& rc = out.relations[f->relation_tag];
        rc.total++;
        if (fused_ok) rc.correct++;
        n += 1.0;
    }
    out.accuracy.appearance /= n;
    out.accuracy.shape /= n;
    out.accuracy.fused /= n;
    return out;
}

} // namespace detail

inline EvalReport cross_validate(const std::vector<PairSample>& samples,
                                 const TrainConfig& config, std::size_t k,
                                 std::size_t jobs = 1) {
    validate(config);
    if (jobs < 1) throw config_error("jobs must be at least 1");
    detail::require_fold_partition(samples, k);

    // Features are built once and shared read-only across folds.
    const std::vector<PairFeatures> features = build_pair_features(samples, config);
    std::vector<int> folds;
    folds.reserve(samples.size());
    for (const PairSample& s : samples) folds.push_back(s.fold);

    std::vector<detail::FoldOutcome> outcomes(k);
    std::vector<std::exception_ptr> failures(k);
    auto worker = [&](std::size_t first) {
        for (std::size_t f = first; f < k; f += jobs) {
            try {
                outcomes[f] = detail::run_fold(features, folds, static_cast<int>(f), config);
            } catch (...) {
                failures[f] = std::current_exception();
            }
        }
    };
    if (jobs <= 1) {
        worker(0);
    } else {
        std::vector<std::thread> pool;
        for (std::size_t j = 0; j < jobs && j < k; ++j) pool.emplace_back(worker, j);
        for (std::thread& t : pool) t.join();
    }
    for (std::size_t f = 0; f < k; ++f)
        if (failures[f]) std::rethrow_exception(failures[f]);

    EvalReport report;
    report.config = config;
    report.fold_count = k;
    report.sample_count = samples.size();
    std::map<std::string, detail::RelationCount> pooled;
    for (const detail::FoldOutcome& o : outcomes) {
        report.per_fold_accuracy.push_back(o.accuracy.fused);
        report.branch_accuracies.appearance += o.accuracy.appearance;
        report.branch_accuracies.shape += o.accuracy.shape;
        report.branch_accuracies.fused += o.accuracy.fused;
        for (const auto& [tag, rc] : o.relations) {
            pooled[tag].correct += rc.correct;
            pooled[tag].total += rc.total;
        }
    }
    const double kd = static_cast<double>(k);
    report.mean_accuracy = 0.0;
    for (double a : report.per_fold_accuracy) report.mean_accuracy += a;
    report.mean_accuracy /= kd;
    report.branch_accuracies.appearance /= kd;
    report.branch_accuracies.shape /= kd;
    report.branch_accuracies.fused /= kd;
    for (const auto& [tag, rc] : pooled)
        report.per_relation_accuracy[tag] =
            static_cast<double>(rc.correct) / static_cast<double>(rc.total);
    return report;
}

// One cross-validation run read three ways: both branch networks are always
// trained, so the single-cue rows come from the same folds as the fused row.
inline AblationResult ablation(const std::vector<PairSample>& samples,
                               const TrainConfig& config, std::size_t k,
                               std::size_t jobs = 1) {
    AblationResult result;
    result.report = cross_validate(samples, config, k, jobs);
    result.rows = {
        {"appearance_only", result.report.branch_accuracies.appearance},
        {"shape_only", result.report.branch_accuracies.shape},
        {"fused", result.report.branch_accuracies.fused},
    };
    return result;
}

// --- report rendering --------------------------------------------------------

namespace detail {

inline void append_config_section(std::ostringstream& out, const TrainConfig& c) {
    out << "[config]\n";
    out << "learning_rate=" << format_double(c.learning_rate) << "\n";
    out << "epochs=" << c.epochs << "\n";
    out << "batch_size=" << c.batch_size << "\n";
    out << "seed=" << c.seed << "\n";
    out << "l2_penalty=" << format_double(c.l2_penalty) << "\n";
    out << "hidden_dims=";
    for (std::size_t i = 0; i < c.hidden_dims.size(); ++i)
        out << (i ? "," : "") << c.hidden_dims[i];
    out << "\n";
    out << "fusion_weight=" << format_double(c.fusion_weight) << "\n";
    out << "fusion_mode=" << fusion_mode_name(c.fusion_mode) << "\n";
    out << "centering=" << centering_name(c.centering) << "\n";
    out << "appearance_l2_normalize=" << (c.appearance_l2_normalize ? "true" : "false") << "\n";
}

} // namespace detail

inline std::string report_text(const EvalReport& r) {
    std::ostringstream out;
    out << "[summary]\n";
    out << "mean_accuracy=" << detail::format_double(r.mean_accuracy) << "\n";
    out << "fold_count=" << r.fold_count << "\n";
    out << "sample_count=" << r.sample_count << "\n";
    out << "\n[folds]\n";
    for (std::size_t f = 0; f < r.per_fold_accuracy.size(); ++f)
        out << "fold_" << f << "=" << detail::format_double(r.per_fold_accuracy[f]) << "\n";
    out << "\n[branches]\n";
    out << "appearance=" << detail::format_double(r.branch_accuracies.appearance) << "\n";
    out << "shape=" << detail::format_double(r.branch_accuracies.shape) << "\n";
    out << "fused=" << detail::format_double(r.branch_accuracies.fused) << "\n";
    out << "\n[relations]\n";
    for (const auto& [tag, acc] : r.per_relation_accuracy)
        out << tag << "=" << detail::format_double(acc) << "\n";
    out << "\n";
    detail::append_config_section(out, r.config);
    return out.str();
}

inline nlohmann::json report_to_json(const EvalReport& r) {
    nlohmann::json j;
    j["mean_accuracy"] = r.mean_accuracy;
    j["per_fold_accuracy"] = r.per_fold_accuracy;
    j["fold_count"] = r.fold_count;
    j["sample_count"] = r.sample_count;
    j["branch_accuracies"] = {{"appearance", r.branch_accuracies.appearance},
                              {"shape", r.branch_accuracies.shape},
                              {"fused", r.branch_accuracies.fused}};
    j["per_relation_accuracy"] = r.per_relation_accuracy;
    j["config"] = to_json(r.config);
    return j;
}

inline std::string ablation_text(const AblationResult& a) {
    std::ostringstream out;
    out << "[ablation]\n";
    for (const AblationRow& row : a.rows)
        out << row.setting << "=" << detail::format_double(row.mean_accuracy) << "\n";
    out << "\n";
    detail::append_config_section(out, a.report.config);
    return out.str();
}

inline nlohmann::json ablation_to_json(const AblationResult& a) {
    nlohmann::json rows = nlohmann::json::array();
    for (const AblationRow& row : a.rows)
        rows.push_back({{"setting", row.setting}, {"mean_accuracy", row.mean_accuracy}});
    nlohmann::json j;
    j["ablation"] = rows;
    j["report"] = report_to_json(a.report);
    return j;
}

} // namespace kinshape
