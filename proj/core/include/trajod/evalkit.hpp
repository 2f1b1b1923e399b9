#pragma once

#include <string>
#include <vector>

#include "trajod/data.hpp"
#include "trajod/scoring.hpp"

namespace trajod {

/// Labeled outliers among the K highest-ranked users.
int top_k_hits(const std::vector<std::string>& ranked_users, const LabelTable& labels, int k);

/// Rank-based AP without interpolation: mean over positives of the
/// precision at that positive's rank. Ties broken by original index.
double average_precision(const std::vector<double>& scores, const std::vector<int>& labels);

/// Mann-Whitney AUC; tied (positive, negative) pairs count 0.5.
double roc_auc(const std::vector<double>& scores, const std::vector<int>& labels);

/// Hits within the top K partitioned by (type, intensity). Indexing:
/// type hunger/work/social, intensity red/orange/yellow.
struct Breakdown {
    int hits[3][3] = {{0, 0, 0}, {0, 0, 0}, {0, 0, 0}};
    int totals[3][3] = {{0, 0, 0}, {0, 0, 0}, {0, 0, 0}};
    int total_hits = 0;

    int hits_of(OutlierType t) const;
    int totals_of(OutlierType t) const;
};

Breakdown breakdown(const std::vector<std::string>& ranked_users, const LabelTable& labels, int k);

/// Travel-distance shift baseline: |mean test distance - mean train
/// distance| / (train std + eps), ranked descending.
std::vector<std::pair<std::string, double>> distance_baseline(const Dataset& ds);

struct ChannelMetrics {
    std::string channel;
    double ap = 0.0;
    double auc = 0.0;
    int top10 = 0;
    int top_k = 0;
    int k = 0;
};

/// AP/AUC/Top-K for the cross-time, cross-population and fused channels.
/// k == 0 selects ceil(0.1 * users).
std::vector<ChannelMetrics> evaluate_scores(const std::vector<UserScore>& scores,
                                            const LabelTable& labels, int k = 0);

/// Users ranked by one channel (desc, ties by user id).
std::vector<std::string> ranking_of_channel(const std::vector<UserScore>& scores,
                                            const std::string& channel);

struct TransferResult {
    std::vector<UserScore> scores;
    std::vector<ChannelMetrics> metrics;
};

/// Scores a target dataset with an already-trained checkpoint, without any
/// parameter updates, and evaluates against the target labels.
TransferResult transfer_eval(const std::string& checkpoint_path, const Dataset& target,
                             const LabelTable& labels, const ScoreConfig& cfg, int k = 0);

/// Structured-text evaluation report: provenance, per-channel metrics,
/// per-type breakdowns, baseline comparison, optional timing table.
struct EvalReport {
    std::string config_hash;
    std::string config_text;
    int users = 0;
    int outliers = 0;
    int k = 0;
    std::vector<std::pair<std::string, std::vector<ChannelMetrics>>> rows;  // label -> channels
    std::vector<std::pair<std::string, Breakdown>> breakdowns;              // channel -> table
    double baseline_auc = -1.0;  // < 0: absent
    double baseline_ap = -1.0;
    std::vector<std::string> timing_lines;
};

void write_report(const std::string& path, const EvalReport& r);

}  // namespace trajod
