#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "trajod/checkpoint.hpp"
#include "trajod/config.hpp"
#include "trajod/data.hpp"
#include "trajod/encoder.hpp"
#include "trajod/modality.hpp"
#include "trajod/tensor.hpp"

namespace trajod {

struct ModelConfig {
    Arch arch = Arch::cnn;
    int dim = 64;
    int layers = 4;
    int cutoff_len = 16;
    int heads = 4;
    uint64_t seed = 1;
    Ablation ablate = Ablation::none;
    SemanticMode sem_mode = SemanticMode::seeded;
    uint64_t sem_seed = 7;
    std::string sem_file;
    int centroids = 10;

    static ModelConfig from(const Config& cfg);
};

/// Full embedding pipeline: per-point fusion, day encoder, learned
/// empty-day vector and the centroid bank.
class TrajModel {
public:
    explicit TrajModel(const ModelConfig& cfg);

    /// Unit-norm day embedding. Empty days resolve to the learned
    /// empty-day vector. frozen_mappers stops gradients through the
    /// spatial/temporal mappers.
    Tensor encode_day(const DailyTrajectory& traj, bool frozen_mappers = true) const;

    /// Inference-only day embedding (no graph).
    std::vector<double> encode_day_values(const DailyTrajectory& traj) const;

    PointEmbedder& embedder() { return embedder_; }
    const PointEmbedder& embedder() const { return embedder_; }
    Encoder& encoder() { return encoder_; }
    const Encoder& encoder() const { return encoder_; }
    Tensor& empty_day() { return empty_day_; }
    Tensor& centroids() { return centroids_; }
    const Tensor& centroids() const { return centroids_; }
    const ModelConfig& config() const { return cfg_; }

    std::vector<Tensor> phase1_params() const;  // mappers + fusion
    std::vector<Tensor> phase2_params() const;  // encoder + fusion + empty day + centroids
    std::vector<std::pair<std::string, Tensor>> all_named_params() const;

    void save(const std::string& path, const std::map<std::string, std::string>& extra_meta) const;
    static TrajModel load(const std::string& path);

private:
    void restore_params(const Checkpoint& ck);

    ModelConfig cfg_;
    PointEmbedder embedder_;
    Encoder encoder_;
    Tensor empty_day_;
    Tensor centroids_;
};

}  // namespace trajod
