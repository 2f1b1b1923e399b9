#include "trajod/modality.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "trajod/errors.hpp"

namespace trajod {

std::string to_string(Ablation a) {
    switch (a) {
        case Ablation::no_semantic: return "no-semantic";
        case Ablation::no_spatial: return "no-spatial";
        case Ablation::no_temporal: return "no-temporal";
        default: return "none";
    }
}

Ablation ablation_from(const std::string& s) {
    if (s == "none") return Ablation::none;
    if (s == "no-semantic") return Ablation::no_semantic;
    if (s == "no-spatial") return Ablation::no_spatial;
    if (s == "no-temporal") return Ablation::no_temporal;
    throw ConfigError("unknown ablation '" + s + "'");
}

namespace {

void normalize_in_place(std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    const double norm = std::sqrt(s);
    if (norm < 1e-12) throw NumericalError("semantic embedding with zero norm");
    for (double& x : v) x /= norm;
}

}  // namespace

SemanticEmbedder SemanticEmbedder::seeded(int dim, uint64_t seed) {
    if (dim < 1) throw ConfigError("semantic dim must be >= 1");
    return SemanticEmbedder(dim, SemanticMode::seeded, seed);
}

SemanticEmbedder SemanticEmbedder::from_file(const std::string& path, int dim) {
    std::ifstream is(path);
    if (!is) throw DataError("cannot open semantic embedding file " + path);
    SemanticEmbedder out(dim, SemanticMode::external, 0);
    std::string line;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#') continue;
        std::istringstream ss(line);
        std::string category;
        ss >> category;
        std::vector<double> vec;
        double v;
        while (ss >> v) vec.push_back(v);
        if (static_cast<int>(vec.size()) != dim)
            throw DataError(path + ":" + std::to_string(lineno) + ": expected " +
                            std::to_string(dim) + " values, got " + std::to_string(vec.size()));
        normalize_in_place(vec);
        out.table_[category] = std::move(vec);
    }
    return out;
}

SemanticEmbedder SemanticEmbedder::from_table(int dim, std::map<std::string, std::vector<double>> table) {
    SemanticEmbedder out(dim, SemanticMode::external, 0);
    for (auto& [k, v] : table) {
        if (static_cast<int>(v.size()) != dim)
            throw DataError("semantic table entry '" + k + "' has wrong dimension");
        normalize_in_place(v);
        out.table_[k] = std::move(v);
    }
    return out;
}

const std::vector<double>& SemanticEmbedder::embed(const std::string& category) const {
    if (category.empty()) throw DataError("empty category");
    auto it = table_.find(category);
    if (it != table_.end()) return it->second;
    if (mode_ == SemanticMode::external)
        throw DataError("category '" + category + "' missing from external embedding table");
    SeededRng rng(seed_, fnv1a("sem|" + category));
    std::vector<double> v(static_cast<size_t>(dim_));
    for (double& x : v) x = rng.normal();
    normalize_in_place(v);
    return table_.emplace(category, std::move(v)).first->second;
}

Mlp2 Mlp2::create(int in_dim, int out_dim, SeededRng& rng) {
    auto xavier = [&rng](int fan_in, int fan_out) {
        const double a = std::sqrt(6.0 / (fan_in + fan_out));
        std::vector<double> v(static_cast<size_t>(fan_in) * static_cast<size_t>(fan_out));
        for (double& x : v) x = rng.uniform(-a, a);
        return v;
    };
    Mlp2 m;
    m.w1 = Tensor::from_values({in_dim, out_dim}, xavier(in_dim, out_dim), true);
    m.b1 = Tensor::zeros({out_dim}, true);
    m.w2 = Tensor::from_values({out_dim, out_dim}, xavier(out_dim, out_dim), true);
    m.b2 = Tensor::zeros({out_dim}, true);
    return m;
}

Tensor Mlp2::forward(const Tensor& x) const {
    Tensor h = tanh_op(add(matmul(x, w1), b1));
    return add(matmul(h, w2), b2);
}

std::vector<std::pair<std::string, Tensor>> Mlp2::named_params(const std::string& prefix) const {
    return {{prefix + ".w1", w1}, {prefix + ".b1", b1}, {prefix + ".w2", w2}, {prefix + ".b2", b2}};
}

std::array<double, 11> temporal_features(int weekday, int64_t t) {
    std::array<double, 11> f{};
    f[static_cast<size_t>(((weekday % 7) + 7) % 7)] = 1.0;
    const double tod = static_cast<double>(((t % 86400) + 86400) % 86400) / 86400.0;
    constexpr double two_pi = 6.283185307179586477;
    f[7] = std::sin(two_pi * tod);
    f[8] = std::cos(two_pi * tod);
    f[9] = std::sin(2.0 * two_pi * tod);
    f[10] = std::cos(2.0 * two_pi * tod);
    return f;
}

StayPointBatch make_staypoint_batch(const std::vector<std::pair<const StayPoint*, int>>& pts) {
    StayPointBatch b;
    const int n = static_cast<int>(pts.size());
    std::vector<double> coords(static_cast<size_t>(n) * 2);
    std::vector<double> times(static_cast<size_t>(n) * 11);
    for (int i = 0; i < n; ++i) {
        const StayPoint* p = pts[static_cast<size_t>(i)].first;
        b.categories.push_back(p->category);
        coords[static_cast<size_t>(i) * 2] = p->x;
        coords[static_cast<size_t>(i) * 2 + 1] = p->y;
        const auto tf = temporal_features(pts[static_cast<size_t>(i)].second, p->t);
        for (int j = 0; j < 11; ++j) times[static_cast<size_t>(i) * 11 + static_cast<size_t>(j)] = tf[static_cast<size_t>(j)];
    }
    b.coords = Tensor::from_values({n, 2}, std::move(coords));
    b.times = Tensor::from_values({n, 11}, std::move(times));
    return b;
}

ModalityPairs build_pairs(int batch_size) {
    ModalityPairs p;
    for (int i = 0; i < batch_size; ++i) {
        p.positives.push_back(i);
        std::vector<int> neg;
        for (int j = 0; j < batch_size; ++j)
            if (j != i) neg.push_back(j);
        p.negatives.push_back(std::move(neg));
    }
    return p;
}

Tensor align_loss(const SemanticEmbedder& sem, const Mlp2& map_s, const Mlp2& map_t,
                  const StayPointBatch& batch, double tau, Ablation ablate) {
    if (tau <= 0.0) throw ConfigError("alignment temperature must be > 0");
    if (ablate == Ablation::no_semantic) return Tensor::scalar(0.0);
    const int n = batch.size();
    if (n < 2) throw NumericalError("align_loss: need at least 2 staypoints");
    const int d = sem.dim();
    std::vector<double> dc(static_cast<size_t>(n) * static_cast<size_t>(d));
    for (int i = 0; i < n; ++i) {
        const auto& v = sem.embed(batch.categories[static_cast<size_t>(i)]);
        std::copy(v.begin(), v.end(), dc.begin() + static_cast<size_t>(i) * static_cast<size_t>(d));
    }
    const Tensor dc_t = Tensor::from_values({n, d}, std::move(dc));  // frozen rows, unit norm

    Tensor loss = Tensor::scalar(0.0);
    if (ablate != Ablation::no_temporal) {
        const Tensor dt = l2_normalize(map_t.forward(batch.times));
        const Tensor logits_t = scale(matmul_nt(dc_t, dt), 1.0 / tau);
        loss = add(loss, mean(sub(logsumexp_rows(logits_t), diag(logits_t))));
    }
    if (ablate != Ablation::no_spatial) {
        const Tensor ds = l2_normalize(map_s.forward(batch.coords));
        const Tensor logits_s = scale(matmul_nt(dc_t, ds), 1.0 / tau);
        loss = add(loss, mean(sub(logsumexp_rows(logits_s), diag(logits_s))));
    }
    return loss;
}

PointEmbedder::PointEmbedder(SemanticEmbedder sem, int dim, uint64_t seed)
    : sem_(std::move(sem)), dim_(dim) {
    if (sem_.dim() != dim) throw ConfigError("semantic dim does not match model dim");
    SeededRng rs(seed, "map_s");
    map_s_ = Mlp2::create(2, dim, rs);
    SeededRng rt(seed, "map_t");
    map_t_ = Mlp2::create(11, dim, rt);
    SeededRng rf(seed, "fusion");
    const double a = std::sqrt(6.0 / (3 * dim + dim));
    std::vector<double> w(static_cast<size_t>(3 * dim) * static_cast<size_t>(dim));
    for (double& x : w) x = rf.uniform(-a, a);
    fusion_w_ = Tensor::from_values({3 * dim, dim}, std::move(w), true);
    fusion_b_ = Tensor::zeros({dim}, true);
}

std::vector<double> PointEmbedder::mask_for(const DailyTrajectory& traj, int cutoff_len) {
    std::vector<double> m(static_cast<size_t>(cutoff_len), 0.0);
    for (int i = 0; i < traj.valid_len && i < cutoff_len; ++i) m[static_cast<size_t>(i)] = 1.0;
    return m;
}

Tensor PointEmbedder::embed_day(const DailyTrajectory& traj, int cutoff_len, bool frozen_mappers,
                                Ablation ablate) const {
    const int v = std::min(traj.valid_len, cutoff_len);
    if (v == 0) return Tensor::zeros({cutoff_len, dim_});

    std::vector<double> sem_rows(static_cast<size_t>(v) * static_cast<size_t>(dim_));
    std::vector<double> coords(static_cast<size_t>(v) * 2);
    std::vector<double> times(static_cast<size_t>(v) * 11);
    for (int i = 0; i < v; ++i) {
        const auto& p = traj.points[static_cast<size_t>(i)];
        const auto& c = sem_.embed(p.category);
        std::copy(c.begin(), c.end(), sem_rows.begin() + static_cast<size_t>(i) * static_cast<size_t>(dim_));
        coords[static_cast<size_t>(i) * 2] = p.x;
        coords[static_cast<size_t>(i) * 2 + 1] = p.y;
        const auto tf = temporal_features(traj.weekday, p.t);
        for (int j = 0; j < 11; ++j) times[static_cast<size_t>(i) * 11 + static_cast<size_t>(j)] = tf[static_cast<size_t>(j)];
    }

    Tensor xc = ablate == Ablation::no_semantic
                    ? Tensor::zeros({v, dim_})
                    : Tensor::from_values({v, dim_}, std::move(sem_rows));
    Tensor xs, xt;
    if (frozen_mappers) {
        NoGradGuard ng;
        xs = map_s_.forward(Tensor::from_values({v, 2}, std::move(coords)));
        xt = map_t_.forward(Tensor::from_values({v, 11}, std::move(times)));
    } else {
        xs = map_s_.forward(Tensor::from_values({v, 2}, std::move(coords)));
        xt = map_t_.forward(Tensor::from_values({v, 11}, std::move(times)));
    }
    if (ablate == Ablation::no_spatial) xs = Tensor::zeros({v, dim_});
    if (ablate == Ablation::no_temporal) xt = Tensor::zeros({v, dim_});

    Tensor fused = l2_normalize(add(matmul(concat_cols({xc, xs, xt}), fusion_w_), fusion_b_));
    if (v < cutoff_len) fused = concat_rows({fused, Tensor::zeros({cutoff_len - v, dim_})});
    return fused;
}

std::vector<std::pair<std::string, Tensor>> PointEmbedder::mapper_params() const {
    auto out = map_s_.named_params("map_s");
    for (auto& p : map_t_.named_params("map_t")) out.push_back(p);
    return out;
}

std::vector<std::pair<std::string, Tensor>> PointEmbedder::fusion_params() const {
    return {{"fusion.weight", fusion_w_}, {"fusion.bias", fusion_b_}};
}

}  // namespace trajod
