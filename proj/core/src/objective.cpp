#include "trajod/objective.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <sstream>

#include "trajod/errors.hpp"
#include "trajod/optim.hpp"

namespace trajod {

std::string to_string(ClusterMode m) { return m == ClusterMode::paper ? "paper" : "softmin"; }

ClusterMode cluster_mode_from(const std::string& s) {
    if (s == "softmin") return ClusterMode::softmin;
    if (s == "paper") return ClusterMode::paper;
    throw ConfigError("unknown cluster mode '" + s + "'");
}

TrainConfig TrainConfig::from(const Config& cfg) {
    TrainConfig tc;
    tc.epochs = cfg.get_int("train.epochs");
    tc.batch = cfg.get_int("train.batch");
    tc.align_temp = cfg.get_double("train.align_temp");
    tc.consistency_temp = cfg.get_double("train.consistency_temp");
    tc.beta = cfg.get_double("train.beta");
    tc.freq = cfg.get_int("train.freq");
    tc.negatives = cfg.get_int("train.negatives");
    tc.max_positives = cfg.get_int("train.max_positives");
    tc.align_epochs = cfg.get_int("train.align_epochs");
    tc.steps_per_epoch = cfg.get_int("train.steps_per_epoch");
    tc.align_steps_per_epoch = cfg.get_int("train.align_steps_per_epoch");
    tc.micro_batch = cfg.get_int("train.micro_batch");
    tc.in_batch_negatives = cfg.get_bool("train.in_batch_negatives");
    tc.cluster_mode = cluster_mode_from(cfg.get_str("train.cluster_mode"));
    tc.cluster_temp = cfg.get_double("train.cluster_temp");
    tc.lr0 = cfg.get_double("train.lr0");
    tc.lr_decay = cfg.get_double("train.lr_decay");
    tc.lr_step_epochs = cfg.get_int("train.lr_step_epochs");
    tc.seed = cfg.get_u64("train.seed");
    tc.joint_align = cfg.get_bool("train.joint_align");
    tc.lambda_align = cfg.get_double("train.lambda_align");
    tc.validate();
    return tc;
}

void TrainConfig::validate() const {
    if (epochs < 1 || batch < 1) throw ConfigError("train.epochs and train.batch must be >= 1");
    if (align_temp <= 0.0 || consistency_temp <= 0.0 || cluster_temp <= 0.0)
        throw ConfigError("temperatures must be > 0");
    if (beta < 0.0) throw ConfigError("train.beta must be >= 0");
    if (freq < 1) throw ConfigError("train.freq must be >= 1");
    if (negatives < 1 || max_positives < 1)
        throw ConfigError("train.negatives and train.max_positives must be >= 1");
    if (steps_per_epoch < 1 || align_steps_per_epoch < 1 || micro_batch < 1)
        throw ConfigError("step counts and micro batch must be >= 1");
    if (lr0 <= 0.0 || lr_decay <= 0.0 || lr_step_epochs < 1) throw ConfigError("invalid lr schedule");
    if (lambda_align < 0.0) throw ConfigError("train.lambda_align must be >= 0");
}

int TrainConfig::resolved_align_epochs() const {
    if (joint_align) return 0;
    const int p1 = align_epochs < 0 ? epochs / 4 : align_epochs;
    return std::clamp(p1, 0, epochs);
}

PairSample sample_pairs(const Dataset& ds, const std::string& user, int day,
                        const TrainConfig& cfg, SeededRng& rng) {
    if (day < 0 || day >= ds.split_day)
        throw ConfigError("sample_pairs: anchor day " + std::to_string(day) + " not in train split");
    PairSample out;

    // pattern days (1-based arithmetic), restricted to the train split
    std::vector<int> pattern_train;
    for (int d1 : day_pattern_set(day + 1, cfg.freq, ds.total_days)) {
        const int d0 = d1 - 1;
        if (d0 < ds.split_day) pattern_train.push_back(d0);
    }
    if (pattern_train.empty()) {
        out.skipped = true;
        return out;
    }

    const int take = std::min<int>(cfg.max_positives, static_cast<int>(pattern_train.size()));
    for (int idx : rng.sample_indices(static_cast<int>(pattern_train.size()), take))
        out.positives.emplace_back(user, pattern_train[static_cast<size_t>(idx)]);

    // negatives: uniform (v, d*) over the train split, v != u, d* outside the pattern
    const auto pattern = day_pattern_set(day + 1, cfg.freq, ds.total_days);
    const int n_users = static_cast<int>(ds.users.size());
    for (int k = 0; k < cfg.negatives; ++k) {
        for (int attempt = 0; attempt < 1000; ++attempt) {
            const int v = static_cast<int>(rng.choice(n_users));
            if (ds.users[static_cast<size_t>(v)] == user) continue;
            const int d = static_cast<int>(rng.choice(ds.split_day));
            if (pattern.count(d + 1)) continue;
            out.negatives.emplace_back(ds.users[static_cast<size_t>(v)], d);
            break;
        }
    }
    return out;
}

Tensor consistency_loss(const Tensor& anchor, const std::vector<Tensor>& positives,
                        const std::vector<Tensor>& negatives, double temp) {
    if (temp <= 0.0) throw ConfigError("consistency temperature must be > 0");
    if (positives.empty() || negatives.empty())
        throw NumericalError("consistency_loss: needs at least one positive and one negative");
    const int d = anchor.shape()[0];
    const Tensor a = reshape(l2_normalize(anchor), {1, d});

    auto stack_normed = [d](const std::vector<Tensor>& zs) {
        std::vector<Tensor> rows;
        rows.reserve(zs.size());
        for (const auto& z : zs) rows.push_back(reshape(l2_normalize(z), {1, d}));
        return rows.size() == 1 ? rows[0] : concat_rows(rows);
    };

    const Tensor sims_pos = scale(matmul_nt(a, stack_normed(positives)), 1.0 / temp);
    const Tensor sims_neg = scale(matmul_nt(a, stack_normed(negatives)), 1.0 / temp);
    const Tensor all = concat_cols({sims_pos, sims_neg});
    // -log(s_pos / (s_pos + s_neg)) = lse(all) - lse(pos)
    return reshape(sub(logsumexp_rows(all), logsumexp_rows(sims_pos)), {});
}

Tensor clustering_loss(const Tensor& z, const Tensor& centroids, ClusterMode mode, double temp) {
    if (z.shape().size() != 2 || centroids.shape().size() != 2 || z.shape()[1] != centroids.shape()[1])
        throw NumericalError("clustering_loss: z " + shape_str(z.shape()) + " vs centroids " +
                             shape_str(centroids.shape()));
    const int b = z.shape()[0], k = centroids.shape()[0];

    // squared distances: |z|^2 - 2 z.c + |c|^2
    const Tensor g = matmul_nt(z, centroids);
    const Tensor zn = row_sums(mul(z, z));
    const Tensor cn = row_sums(mul(centroids, centroids));
    const Tensor dist = add(add_colvec(scale(g, -2.0), zn), cn);

    Tensor delta;
    if (mode == ClusterMode::softmin) {
        delta = softmax_rows(scale(dist, -1.0 / temp));
    } else {
        const Tensor totals = row_sums(dist);
        bool degenerate = false;
        for (int r = 0; r < b; ++r) degenerate = degenerate || totals.at(r) < 1e-12;
        if (!degenerate) {
            delta = div_colvec(dist, totals);
        } else {
            // a row of zeros only happens when z coincides with every centroid
            std::vector<Tensor> rows;
            rows.reserve(static_cast<size_t>(b));
            for (int r = 0; r < b; ++r) {
                const Tensor row = slice_rows(dist, r, r + 1);
                if (totals.at(r) < 1e-12)
                    rows.push_back(Tensor::full({1, k}, 1.0 / static_cast<double>(k)));
                else
                    rows.push_back(div_colvec(row, reshape(slice_rows(reshape(totals, {b, 1}), r, r + 1), {1})));
            }
            delta = b == 1 ? rows[0] : concat_rows(rows);
        }
    }
    return mean(row_sums(mul(delta, dist)));
}

Tensor total_loss(const Tensor& consistency_mean, const Tensor& clustering_mean, double beta) {
    return add(consistency_mean, scale(clustering_mean, beta));
}

namespace {

using Key = std::pair<std::string, int>;

struct AnchorPlan {
    Key key;
    std::vector<Key> positives;
    std::vector<Key> negatives;
};

struct StepPlan {
    std::vector<AnchorPlan> anchors;
    int contributing = 0;
    int skipped = 0;
};

std::string step_stream(const char* tag, int epoch, int step) {
    std::ostringstream os;
    os << tag << '|' << epoch << '|' << step;
    return os.str();
}

/// Pre-samples anchors, positives and negatives for one optimizer step.
StepPlan plan_step(const Dataset& ds, const TrainConfig& cfg,
                   const std::vector<Key>& anchor_pool, int epoch, int step) {
    SeededRng rng(cfg.seed, step_stream("p2", epoch, step));
    StepPlan plan;
    const int pool = static_cast<int>(anchor_pool.size());
    const int take = std::min(cfg.batch, pool);
    for (int idx : rng.sample_indices(pool, take)) {
        AnchorPlan a;
        a.key = anchor_pool[static_cast<size_t>(idx)];
        plan.anchors.push_back(std::move(a));
    }

    for (size_t i = 0; i < plan.anchors.size(); ++i) {
        auto& a = plan.anchors[i];
        PairSample ps = sample_pairs(ds, a.key.first, a.key.second, cfg, rng);
        if (ps.skipped) {
            ++plan.skipped;
            continue;
        }
        a.positives = std::move(ps.positives);
        if (!cfg.in_batch_negatives) {
            a.negatives = std::move(ps.negatives);
        } else {
            // negatives drawn from co-sampled anchors of the same micro batch
            const auto pattern = day_pattern_set(a.key.second + 1, cfg.freq, ds.total_days);
            const size_t micro_begin = (i / static_cast<size_t>(cfg.micro_batch)) * static_cast<size_t>(cfg.micro_batch);
            const size_t micro_end = std::min(plan.anchors.size(), micro_begin + static_cast<size_t>(cfg.micro_batch));
            std::vector<Key> eligible;
            for (size_t j = micro_begin; j < micro_end; ++j) {
                if (j == i) continue;
                const Key& other = plan.anchors[j].key;
                if (other.first == a.key.first) continue;
                if (pattern.count(other.second + 1)) continue;
                eligible.push_back(other);
            }
            if (static_cast<int>(eligible.size()) > cfg.negatives) {
                for (int idx : rng.sample_indices(static_cast<int>(eligible.size()), cfg.negatives))
                    a.negatives.push_back(eligible[static_cast<size_t>(idx)]);
            } else {
                a.negatives = std::move(eligible);
            }
        }
        if (!a.positives.empty() && !a.negatives.empty()) ++plan.contributing;
    }
    return plan;
}

const DailyTrajectory& day_of(const Dataset& ds, const Key& key) {
    return ds.days_of(key.first)[static_cast<size_t>(key.second)];
}

struct StepStats {
    double consistency = 0.0;
    double clustering = 0.0;
    int skipped = 0;
};

/// One optimizer step over `batch` anchors, processed in micro batches with
/// gradient accumulation. Returns the step's mean loss components.
StepStats run_phase2_step(TrajModel& model, const Dataset& ds, const TrainConfig& cfg,
                          const StepPlan& plan, bool frozen_mappers) {
    StepStats stats;
    stats.skipped = plan.skipped;
    const int total_anchors = static_cast<int>(plan.anchors.size());
    const int contributing = std::max(plan.contributing, 1);

    for (size_t begin = 0; begin < plan.anchors.size(); begin += static_cast<size_t>(cfg.micro_batch)) {
        const size_t end = std::min(plan.anchors.size(), begin + static_cast<size_t>(cfg.micro_batch));

        std::map<Key, Tensor> z;
        auto encode = [&](const Key& key) {
            auto it = z.find(key);
            if (it != z.end()) return it->second;
            Tensor t = model.encode_day(day_of(ds, key), frozen_mappers);
            z.emplace(key, t);
            return t;
        };

        std::vector<Tensor> terms;
        std::vector<Tensor> anchor_rows;
        for (size_t i = begin; i < end; ++i) {
            const auto& a = plan.anchors[i];
            const Tensor az = encode(a.key);
            anchor_rows.push_back(reshape(az, {1, model.config().dim}));
            if (a.positives.empty() || a.negatives.empty()) continue;
            std::vector<Tensor> pos, neg;
            for (const auto& k : a.positives) pos.push_back(encode(k));
            for (const auto& k : a.negatives) neg.push_back(encode(k));
            terms.push_back(consistency_loss(az, pos, neg, cfg.consistency_temp));
        }

        Tensor micro_loss = Tensor::scalar(0.0);
        if (!terms.empty()) {
            Tensor s = terms[0];
            for (size_t i = 1; i < terms.size(); ++i) s = add(s, terms[i]);
            micro_loss = add(micro_loss, scale(s, 1.0 / contributing));
            stats.consistency += s.value() / contributing;
        }
        if (cfg.beta > 0.0 && !anchor_rows.empty()) {
            const Tensor zmat = anchor_rows.size() == 1 ? anchor_rows[0] : concat_rows(anchor_rows);
            const Tensor cl = clustering_loss(zmat, model.centroids(), cfg.cluster_mode, cfg.cluster_temp);
            const double w = static_cast<double>(end - begin) / total_anchors;
            micro_loss = add(micro_loss, scale(cl, cfg.beta * w));
            stats.clustering += cl.value() * w;
        }
        if (!std::isfinite(micro_loss.value()))
            throw NumericalError("training diverged (non-finite loss)");
        if (micro_loss.requires_grad()) micro_loss.backward();
    }
    return stats;
}

std::vector<std::pair<const StayPoint*, int>> staypoint_pool(const Dataset& ds) {
    std::vector<std::pair<const StayPoint*, int>> pool;
    for (const auto& user : ds.users) {
        for (const auto& day : ds.days_of(user)) {
            if (day.day_index >= ds.split_day) break;
            for (const auto& p : day.points) pool.emplace_back(&p, day.weekday);
        }
    }
    return pool;
}

double run_align_step(TrajModel& model, const std::vector<std::pair<const StayPoint*, int>>& pool,
                      const TrainConfig& cfg, int epoch, int step) {
    if (model.config().ablate == Ablation::no_semantic) return 0.0;
    SeededRng rng(cfg.seed, step_stream("p1", epoch, step));
    const int take = std::min<int>(cfg.batch, static_cast<int>(pool.size()));
    if (take < 2) return 0.0;
    std::vector<std::pair<const StayPoint*, int>> batch;
    for (int idx : rng.sample_indices(static_cast<int>(pool.size()), take))
        batch.push_back(pool[static_cast<size_t>(idx)]);
    const StayPointBatch sb = make_staypoint_batch(batch);
    const Tensor loss = align_loss(model.embedder().semantic(), model.embedder().spatial(),
                                   model.embedder().temporal(), sb, cfg.align_temp,
                                   model.config().ablate);
    if (!std::isfinite(loss.value())) throw NumericalError("alignment diverged (non-finite loss)");
    loss.backward();
    return loss.value();
}

void init_centroids(TrajModel& model, const Dataset& ds, const std::vector<Key>& anchor_pool,
                    uint64_t seed) {
    NoGradGuard ng;
    const int k = model.centroids().shape()[0];
    const int d = model.centroids().shape()[1];
    SeededRng rng(seed, "centroid-init");
    const int pool = static_cast<int>(anchor_pool.size());
    std::vector<int> picks;
    if (pool >= k) {
        picks = rng.sample_indices(pool, k);
    } else {
        for (int i = 0; i < k; ++i) picks.push_back(static_cast<int>(rng.choice(pool)));
    }
    for (int i = 0; i < k; ++i) {
        const Tensor zi = model.encode_day(day_of(ds, anchor_pool[static_cast<size_t>(picks[static_cast<size_t>(i)])]));
        std::copy(zi.values().begin(), zi.values().end(),
                  model.centroids().values().begin() + static_cast<size_t>(i) * static_cast<size_t>(d));
    }
}

}  // namespace

TrainResult train(TrajModel& model, const Dataset& ds, const TrainConfig& cfg) {
    cfg.validate();
    if (ds.users.empty() || ds.split_day < 1) throw DataError("train: empty train split");
    if (model.config().centroids * 5 > static_cast<int>(ds.users.size()))
        std::cerr << "warning: centroid count " << model.config().centroids
                  << " is large for " << ds.users.size() << " users\n";

    std::vector<Key> anchor_pool;
    for (const auto& user : ds.users)
        for (int d = 0; d < ds.split_day; ++d) anchor_pool.emplace_back(user, d);

    const auto sp_pool = staypoint_pool(ds);
    const int p1_epochs = cfg.resolved_align_epochs();
    TrainResult result;

    if (cfg.joint_align) {
        // single-phase variant: everything trains together
        std::vector<Tensor> params = model.phase1_params();
        for (auto& t : model.phase2_params()) params.push_back(t);
        Adam opt(std::move(params));
        init_centroids(model, ds, anchor_pool, cfg.seed);
        for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
            const auto t0 = std::chrono::steady_clock::now();
            EpochLog log{epoch, 2};
            log.lr = lr_at(epoch, cfg.lr0, cfg.lr_decay, cfg.lr_step_epochs);
            for (int step = 0; step < cfg.steps_per_epoch; ++step) {
                const StepPlan plan = plan_step(ds, cfg, anchor_pool, epoch, step);
                const StepStats st = run_phase2_step(model, ds, cfg, plan, /*frozen_mappers=*/false);
                if (cfg.lambda_align > 0.0) {
                    SeededRng arng(cfg.seed, step_stream("joint-align", epoch, step));
                    const int take = std::min<int>(cfg.batch, static_cast<int>(sp_pool.size()));
                    if (take >= 2) {
                        std::vector<std::pair<const StayPoint*, int>> batch;
                        for (int idx : arng.sample_indices(static_cast<int>(sp_pool.size()), take))
                            batch.push_back(sp_pool[static_cast<size_t>(idx)]);
                        const Tensor al = scale(align_loss(model.embedder().semantic(),
                                                           model.embedder().spatial(),
                                                           model.embedder().temporal(),
                                                           make_staypoint_batch(batch), cfg.align_temp),
                                                cfg.lambda_align);
                        al.backward();
                        log.mean_align += al.value() / cfg.steps_per_epoch;
                    }
                }
                opt.step(log.lr);
                log.mean_consistency += st.consistency / cfg.steps_per_epoch;
                log.mean_clustering += st.clustering / cfg.steps_per_epoch;
                log.skipped_anchors += st.skipped;
            }
            log.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
            result.log.push_back(log);
        }
        return result;
    }

    // phase 1: modality alignment
    {
        Adam opt(model.phase1_params());
        for (int epoch = 0; epoch < p1_epochs; ++epoch) {
            const auto t0 = std::chrono::steady_clock::now();
            EpochLog log{epoch, 1};
            log.lr = lr_at(epoch, cfg.lr0, cfg.lr_decay, cfg.lr_step_epochs);
            for (int step = 0; step < cfg.align_steps_per_epoch; ++step) {
                log.mean_align += run_align_step(model, sp_pool, cfg, epoch, step) / cfg.align_steps_per_epoch;
                opt.step(log.lr);
            }
            log.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
            result.log.push_back(log);
        }
    }

    // phase 2: consistency + clustering with frozen mappers
    init_centroids(model, ds, anchor_pool, cfg.seed);
    Adam opt(model.phase2_params());
    for (int epoch = p1_epochs; epoch < cfg.epochs; ++epoch) {
        const auto t0 = std::chrono::steady_clock::now();
        EpochLog log{epoch, 2};
        log.lr = lr_at(epoch, cfg.lr0, cfg.lr_decay, cfg.lr_step_epochs);
        for (int step = 0; step < cfg.steps_per_epoch; ++step) {
            const StepPlan plan = plan_step(ds, cfg, anchor_pool, epoch, step);
            const StepStats st = run_phase2_step(model, ds, cfg, plan, /*frozen_mappers=*/true);
            opt.step(log.lr);
            log.mean_consistency += st.consistency / cfg.steps_per_epoch;
            log.mean_clustering += st.clustering / cfg.steps_per_epoch;
            log.skipped_anchors += st.skipped;
        }
        log.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        result.log.push_back(log);
    }
    return result;
}

namespace {

std::string fmt(double v) {
    std::ostringstream os;
    os << std::setprecision(17) << v;
    return os.str();
}

}  // namespace

void write_training_log(const std::string& path, const std::vector<EpochLog>& log,
                        const std::string& config_hash) {
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw DataError("cannot write training log " + path);
    os << "# config_hash=" << config_hash << "\n";
    for (const auto& e : log) {
        os << "epoch=" << e.epoch << " phase=" << e.phase << " mean_align=" << fmt(e.mean_align)
           << " mean_consistency=" << fmt(e.mean_consistency)
           << " mean_clustering=" << fmt(e.mean_clustering) << " lr=" << fmt(e.lr) << "\n";
    }
}

void write_timings(const std::string& path, const std::vector<EpochLog>& log) {
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw DataError("cannot write timings " + path);
    for (const auto& e : log)
        os << "epoch=" << e.epoch << " phase=" << e.phase << " wall_seconds=" << fmt(e.wall_seconds) << "\n";
}

}  // namespace trajod
