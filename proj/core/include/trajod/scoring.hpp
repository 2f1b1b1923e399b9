#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "trajod/config.hpp"
#include "trajod/data.hpp"
#include "trajod/model.hpp"

namespace trajod {

enum class Eq11Mode { closest, paper_eq11 };

std::string to_string(Eq11Mode m);
Eq11Mode eq11_mode_from(const std::string& s);

struct ScoreConfig {
    int window_days = 0;  // 0: use the dataset split
    Eq11Mode mode = Eq11Mode::closest;
    double w_time = 0.5;
    double w_pop = 0.5;
    int freq = 7;
    int threads = 1;

    static ScoreConfig from(const Config& cfg);
};

struct UserScore {
    std::string user_id;
    double cross_time = 0.0;
    bool cross_time_defined = false;
    double cross_population = 0.0;
    double fused = 0.0;
    int rank = 0;
};

/// Per-user, per-day embeddings (row per calendar day).
using EmbeddingTable = std::map<std::string, std::vector<std::vector<double>>>;

EmbeddingTable compute_embeddings(const TrajModel& model, const Dataset& ds, int threads = 1);

/// Arithmetic mean of the given embeddings, l2-normalized. Empty input or a
/// degenerate (near-zero) mean yields no value; callers treat the pattern
/// as missing.
std::optional<std::vector<double>> mean_day_embedding(
    const std::vector<const std::vector<double>*>& zs);

/// Inputs decoupled from the model so scores can be computed from any
/// embedding source.
struct ScoreInputs {
    const EmbeddingTable* embeddings = nullptr;
    int total_days = 0;
    int window_start = 0;  // first scored day; history is everything before
    int epoch_weekday = 0;
    int freq = 7;
    std::vector<std::vector<double>> centroids;  // rows
};

/// Cross-time: 1 - mean cosine between per-pattern history means and scored
/// window means, over patterns present on both sides. Cross-population:
/// per-pattern dissimilarity against the centroid bank (closest centroid by
/// default), aggregated by max over patterns. Fused: weighted sum of
/// min-max normalized channels, sorted descending, ties broken by user id.
std::vector<UserScore> score_users(const ScoreInputs& in, Eq11Mode mode, double w_time, double w_pop);

/// Min-max normalizes each channel over the population and combines them;
/// users without a defined cross-time score fall back to the normalized
/// cross-population value. Returns rows sorted by fused score descending,
/// ties broken by user id, ranks assigned from 1.
std::vector<UserScore> fuse(std::vector<UserScore> scores, double w_time, double w_pop);

std::vector<UserScore> score_dataset(const TrajModel& model, const Dataset& ds,
                                     const ScoreConfig& cfg);

void write_scores(const std::string& path, const std::vector<UserScore>& scores,
                  const std::vector<std::string>& comment_lines = {});
std::vector<UserScore> load_scores(const std::string& path);

}  // namespace trajod
