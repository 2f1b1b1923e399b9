#include "trajod/model.hpp"

#include <cmath>

#include "trajod/errors.hpp"
#include "trajod/rng.hpp"

namespace trajod {

ModelConfig ModelConfig::from(const Config& cfg) {
    ModelConfig mc;
    mc.arch = arch_from(cfg.get_str("train.arch"));
    mc.dim = cfg.get_int("train.dim");
    mc.layers = cfg.get_int("train.layers");
    mc.cutoff_len = cfg.get_int("data.cutoff_len");
    mc.heads = cfg.get_int("train.heads");
    mc.seed = cfg.get_u64("train.seed");
    mc.ablate = ablation_from(cfg.get_str("train.ablate"));
    const std::string sm = cfg.get_str("semantic.mode");
    if (sm == "seeded")
        mc.sem_mode = SemanticMode::seeded;
    else if (sm == "file")
        mc.sem_mode = SemanticMode::external;
    else
        throw ConfigError("semantic.mode must be seeded or file");
    mc.sem_seed = cfg.get_u64("semantic.seed");
    mc.sem_file = cfg.get_str("semantic.file");
    mc.centroids = cfg.get_int("train.centroids");
    if (mc.centroids < 1) throw ConfigError("train.centroids must be >= 1");
    return mc;
}

namespace {

SemanticEmbedder make_semantic(const ModelConfig& cfg) {
    if (cfg.sem_mode == SemanticMode::seeded) return SemanticEmbedder::seeded(cfg.dim, cfg.sem_seed);
    if (cfg.sem_file.empty()) throw ConfigError("semantic.mode=file requires semantic.file");
    return SemanticEmbedder::from_file(cfg.sem_file, cfg.dim);
}

Tensor make_empty_day(int dim, uint64_t seed) {
    SeededRng rng(seed, "empty_day");
    std::vector<double> v(static_cast<size_t>(dim));
    for (double& x : v) x = rng.normal() / std::sqrt(static_cast<double>(dim));
    return Tensor::from_values({dim}, std::move(v), true);
}

}  // namespace

TrajModel::TrajModel(const ModelConfig& cfg)
    : cfg_(cfg),
      embedder_(make_semantic(cfg), cfg.dim, cfg.seed),
      encoder_(EncoderConfig{cfg.arch, cfg.layers, cfg.dim, cfg.cutoff_len, cfg.heads, cfg.seed}),
      empty_day_(make_empty_day(cfg.dim, cfg.seed)),
      centroids_(Tensor::zeros({cfg.centroids, cfg.dim}, true)) {}

Tensor TrajModel::encode_day(const DailyTrajectory& traj, bool frozen_mappers) const {
    if (traj.valid_len == 0) return l2_normalize(empty_day_);
    const Tensor x = embedder_.embed_day(traj, cfg_.cutoff_len, frozen_mappers, cfg_.ablate);
    return encoder_.encode(x, PointEmbedder::mask_for(traj, cfg_.cutoff_len));
}

std::vector<double> TrajModel::encode_day_values(const DailyTrajectory& traj) const {
    NoGradGuard ng;
    return encode_day(traj).values();
}

std::vector<Tensor> TrajModel::phase1_params() const {
    std::vector<Tensor> out;
    for (const auto& [n, t] : embedder_.mapper_params()) out.push_back(t);
    for (const auto& [n, t] : embedder_.fusion_params()) out.push_back(t);
    return out;
}

std::vector<Tensor> TrajModel::phase2_params() const {
    std::vector<Tensor> out;
    for (const auto& [n, t] : encoder_.named_params()) out.push_back(t);
    for (const auto& [n, t] : embedder_.fusion_params()) out.push_back(t);
    out.push_back(empty_day_);
    out.push_back(centroids_);
    return out;
}

std::vector<std::pair<std::string, Tensor>> TrajModel::all_named_params() const {
    std::vector<std::pair<std::string, Tensor>> out = embedder_.mapper_params();
    for (const auto& p : embedder_.fusion_params()) out.push_back(p);
    for (const auto& p : encoder_.named_params()) out.push_back(p);
    out.emplace_back("empty_day", empty_day_);
    out.emplace_back("centroids", centroids_);
    return out;
}

void TrajModel::save(const std::string& path, const std::map<std::string, std::string>& extra_meta) const {
    Checkpoint ck;
    ck.set_meta("arch", to_string(cfg_.arch));
    ck.set_meta("dim", std::to_string(cfg_.dim));
    ck.set_meta("layers", std::to_string(cfg_.layers));
    ck.set_meta("cutoff_len", std::to_string(cfg_.cutoff_len));
    ck.set_meta("heads", std::to_string(cfg_.heads));
    ck.set_meta("seed", std::to_string(cfg_.seed));
    ck.set_meta("ablate", to_string(cfg_.ablate));
    ck.set_meta("sem_mode", cfg_.sem_mode == SemanticMode::seeded ? "seeded" : "external");
    ck.set_meta("sem_seed", std::to_string(cfg_.sem_seed));
    ck.set_meta("centroids", std::to_string(cfg_.centroids));
    for (const auto& [k, v] : extra_meta) ck.set_meta(k, v);

    for (const auto& [name, t] : all_named_params()) ck.put(name, t);
    if (cfg_.sem_mode == SemanticMode::external) {
        for (const auto& [cat, vec] : embedder_.semantic().table())
            ck.put("semantic." + cat, Tensor::from_values({cfg_.dim}, vec));
    }
    ck.save(path);
}

TrajModel TrajModel::load(const std::string& path) {
    Checkpoint ck = Checkpoint::load(path);
    ModelConfig cfg;
    cfg.arch = arch_from(ck.meta("arch", "cnn"));
    cfg.dim = std::stoi(ck.meta("dim", "64"));
    cfg.layers = std::stoi(ck.meta("layers", "4"));
    cfg.cutoff_len = std::stoi(ck.meta("cutoff_len", "16"));
    cfg.heads = std::stoi(ck.meta("heads", "4"));
    cfg.seed = std::stoull(ck.meta("seed", "1"));
    cfg.ablate = ablation_from(ck.meta("ablate", "none"));
    cfg.sem_seed = std::stoull(ck.meta("sem_seed", "7"));
    cfg.centroids = std::stoi(ck.meta("centroids", "10"));
    cfg.sem_mode = ck.meta("sem_mode", "seeded") == "seeded" ? SemanticMode::seeded : SemanticMode::external;

    if (cfg.sem_mode == SemanticMode::external) {
        std::map<std::string, std::vector<double>> table;
        for (const auto& name : ck.names()) {
            if (name.rfind("semantic.", 0) == 0)
                table[name.substr(9)] = ck.get(name).values();
        }
        // rebuild via a temporary config pointing at the embedded table
        ModelConfig tmp = cfg;
        tmp.sem_mode = SemanticMode::seeded;  // placeholder ctor path
        TrajModel model(tmp);
        model.cfg_.sem_mode = SemanticMode::external;
        model.embedder_ = PointEmbedder(SemanticEmbedder::from_table(cfg.dim, std::move(table)),
                                        cfg.dim, cfg.seed);
        model.restore_params(ck);
        return model;
    }

    TrajModel model(cfg);
    model.restore_params(ck);
    return model;
}

void TrajModel::restore_params(const Checkpoint& ck) {
    for (auto& [name, t] : all_named_params()) {
        const Tensor stored = ck.get(name);
        if (stored.shape() != t.shape())
            throw DataError("checkpoint: shape mismatch for '" + name + "': " +
                            shape_str(stored.shape()) + " vs " + shape_str(t.shape()));
        t.values() = stored.values();
    }
}

}  // namespace trajod
