#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "trajod/data.hpp"
#include "trajod/rng.hpp"
#include "trajod/tensor.hpp"

namespace trajod {

enum class Ablation { none, no_semantic, no_spatial, no_temporal };
enum class SemanticMode { seeded, external };

std::string to_string(Ablation a);
Ablation ablation_from(const std::string& s);

/// Frozen per-category embedding table. Seeded mode draws one unit-norm
/// vector per category from a stream keyed by the category string, so any
/// category (including ones never seen at training time) resolves to the
/// same vector on every machine. External mode loads precomputed vectors.
class SemanticEmbedder {
public:
    static SemanticEmbedder seeded(int dim, uint64_t seed);
    /// File format: one line per category, "<category> v1 ... v_dim".
    static SemanticEmbedder from_file(const std::string& path, int dim);
    static SemanticEmbedder from_table(int dim, std::map<std::string, std::vector<double>> table);

    /// Unit-norm vector for the category; caches seeded draws.
    const std::vector<double>& embed(const std::string& category) const;

    int dim() const { return dim_; }
    SemanticMode mode() const { return mode_; }
    uint64_t seed() const { return seed_; }
    const std::map<std::string, std::vector<double>>& table() const { return table_; }

private:
    SemanticEmbedder(int dim, SemanticMode mode, uint64_t seed) : dim_(dim), mode_(mode), seed_(seed) {}
    mutable std::map<std::string, std::vector<double>> table_;
    int dim_ = 64;
    SemanticMode mode_ = SemanticMode::seeded;
    uint64_t seed_ = 0;
};

/// Two-layer feed-forward map with tanh hidden activation.
struct Mlp2 {
    Tensor w1, b1, w2, b2;

    static Mlp2 create(int in_dim, int out_dim, SeededRng& rng);
    Tensor forward(const Tensor& x) const;  // [n,in] -> [n,out]
    std::vector<std::pair<std::string, Tensor>> named_params(const std::string& prefix) const;
};

/// 11-dim temporal encoding: weekday one-hot, sin/cos of time-of-day at the
/// 24h period and at the 12h period.
std::array<double, 11> temporal_features(int weekday, int64_t t);

/// One staypoint batch prepared for the alignment loss.
struct StayPointBatch {
    std::vector<std::string> categories;
    Tensor coords;  // [B,2], constant
    Tensor times;   // [B,11], constant
    int size() const { return static_cast<int>(categories.size()); }
};

StayPointBatch make_staypoint_batch(const std::vector<std::pair<const StayPoint*, int>>& pts);

/// In-batch positive/negative index structure: each staypoint is its own
/// positive; negatives are every other batch element (duplicates retained).
struct ModalityPairs {
    std::vector<int> positives;
    std::vector<std::vector<int>> negatives;
};
ModalityPairs build_pairs(int batch_size);

/// Two-term InfoNCE over the batch: for each anchor category, softmax over
/// all batch temporal embeddings plus the analogous spatial term; returned
/// as the mean per anchor. The semantic table receives no gradient.
/// Channel ablations drop the matching term (both, for no-semantic, since
/// the supervision signal itself is semantic).
Tensor align_loss(const SemanticEmbedder& sem, const Mlp2& map_s, const Mlp2& map_t,
                  const StayPointBatch& batch, double tau, Ablation ablate = Ablation::none);

/// Per-staypoint embedding pipeline: frozen semantic channel, learnable
/// spatial/temporal mappers, concat + linear fusion, row l2-normalization.
class PointEmbedder {
public:
    PointEmbedder(SemanticEmbedder sem, int dim, uint64_t seed);

    /// [cutoff_len x dim]; rows at and beyond valid_len are exactly zero.
    /// frozen_mappers stops gradient flow through the mappers.
    Tensor embed_day(const DailyTrajectory& traj, int cutoff_len, bool frozen_mappers,
                     Ablation ablate) const;

    static std::vector<double> mask_for(const DailyTrajectory& traj, int cutoff_len);

    const SemanticEmbedder& semantic() const { return sem_; }
    Mlp2& spatial() { return map_s_; }
    Mlp2& temporal() { return map_t_; }
    const Mlp2& spatial() const { return map_s_; }
    const Mlp2& temporal() const { return map_t_; }
    Tensor& fusion_w() { return fusion_w_; }
    Tensor& fusion_b() { return fusion_b_; }
    int dim() const { return dim_; }

    std::vector<std::pair<std::string, Tensor>> mapper_params() const;
    std::vector<std::pair<std::string, Tensor>> fusion_params() const;

private:
    SemanticEmbedder sem_;
    Mlp2 map_s_, map_t_;
    Tensor fusion_w_, fusion_b_;
    int dim_;
};

}  // namespace trajod
