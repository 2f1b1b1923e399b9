#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "trajod/config.hpp"
#include "trajod/data.hpp"
#include "trajod/model.hpp"
#include "trajod/rng.hpp"
#include "trajod/tensor.hpp"

namespace trajod {

enum class ClusterMode { softmin, paper };

std::string to_string(ClusterMode m);
ClusterMode cluster_mode_from(const std::string& s);

struct TrainConfig {
    int epochs = 200;
    int batch = 128;
    double align_temp = 0.1;        // tau
    double consistency_temp = 0.1;  // varsigma
    double beta = 0.1;
    int freq = 7;
    int negatives = 16;
    int max_positives = 4;
    int align_epochs = -1;  // -1: epochs / 4
    int steps_per_epoch = 1;
    int align_steps_per_epoch = 8;
    int micro_batch = 32;
    bool in_batch_negatives = true;
    ClusterMode cluster_mode = ClusterMode::softmin;
    double cluster_temp = 1.0;
    double lr0 = 5e-3;
    double lr_decay = 0.9;
    int lr_step_epochs = 50;
    uint64_t seed = 1;
    bool joint_align = false;
    double lambda_align = 0.1;

    static TrainConfig from(const Config& cfg);
    void validate() const;
    int resolved_align_epochs() const;
};

/// Positive/negative trajectory references for one anchor.
struct PairSample {
    std::vector<std::pair<std::string, int>> positives;  // (user, day_index)
    std::vector<std::pair<std::string, int>> negatives;
    bool skipped = false;  // no same-pattern day available in the train split
};

/// Positives: up to max_positives train days sharing the anchor's weekly
/// pattern. Negatives: `negatives` train trajectories of other users on
/// days outside the anchor's pattern set, sampled uniformly.
PairSample sample_pairs(const Dataset& ds, const std::string& user, int day,
                        const TrainConfig& cfg, SeededRng& rng);

/// -log(s_pos / (s_pos + s_neg)) with exponential cosine-similarity sums at
/// the given temperature; differentiable through every embedding.
Tensor consistency_loss(const Tensor& anchor, const std::vector<Tensor>& positives,
                        const std::vector<Tensor>& negatives, double temp);

/// Soft-clustering objective over a batch of embeddings (rows of z) against
/// the centroid rows; returns the batch mean. paper mode weights each
/// centroid by its share of total squared distance; softmin mode weights by
/// softmax(-distance / temp).
Tensor clustering_loss(const Tensor& z, const Tensor& centroids, ClusterMode mode, double temp);

Tensor total_loss(const Tensor& consistency_mean, const Tensor& clustering_mean, double beta);

struct EpochLog {
    int epoch = 0;
    int phase = 1;
    double mean_align = 0.0;
    double mean_consistency = 0.0;
    double mean_clustering = 0.0;
    double lr = 0.0;
    double wall_seconds = 0.0;  // kept out of the deterministic log file
    int skipped_anchors = 0;
};

struct TrainResult {
    std::vector<EpochLog> log;
};

/// Two-phase training: the first quarter of epochs aligns the mappers with
/// the modality loss, the rest trains encoder, fusion and centroids with
/// the joint consistency + clustering objective (mappers frozen). Centroids
/// start from encoder outputs of seeded random training days.
TrainResult train(TrajModel& model, const Dataset& ds, const TrainConfig& cfg);

/// Deterministic log lines: epoch, phase, mean losses, lr.
void write_training_log(const std::string& path, const std::vector<EpochLog>& log,
                        const std::string& config_hash);

/// Wall-clock seconds per epoch; separate file so primary outputs stay
/// byte-identical across runs.
void write_timings(const std::string& path, const std::vector<EpochLog>& log);

}  // namespace trajod
