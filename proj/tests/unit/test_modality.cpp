#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "oracles.hpp"
#include "trajod/errors.hpp"
#include "trajod/modality.hpp"
#include "trajod/optim.hpp"

using namespace trajod;

namespace {

double vec_cos(const std::vector<double>& a, const std::vector<double>& b) {
    return cosine_sim_value(a, b);
}

StayPointBatch batch_from(const std::vector<StayPoint>& pts, int weekday = 2) {
    std::vector<std::pair<const StayPoint*, int>> refs;
    for (const auto& p : pts) refs.emplace_back(&p, weekday);
    return make_staypoint_batch(refs);
}

/// Direct-formula reference for the alignment loss, computed with plain
/// loops from the numeric embedding matrices.
double align_loss_reference(const std::vector<std::vector<double>>& dc,
                            const std::vector<std::vector<double>>& dt,
                            const std::vector<std::vector<double>>& ds, double tau) {
    const size_t n = dc.size();
    auto term = [&](const std::vector<std::vector<double>>& other) {
        double total = 0.0;
        for (size_t i = 0; i < n; ++i) {
            double denom = 0.0;
            for (size_t j = 0; j < n; ++j) denom += std::exp(vec_cos(dc[i], other[j]) / tau);
            total += -std::log(std::exp(vec_cos(dc[i], other[i]) / tau) / denom);
        }
        return total / static_cast<double>(n);
    };
    return term(dt) + term(ds);
}

}  // namespace

TEST_SUITE_BEGIN("modality");

TEST_CASE("seeded embeddings are deterministic and unit norm") {
    const SemanticEmbedder sem = SemanticEmbedder::seeded(64, 7);
    const auto& a = sem.embed("Restaurant");
    const auto& b = sem.embed("Restaurant");
    CHECK(a == b);
    double norm = 0.0;
    for (double v : a) norm += v * v;
    CHECK(std::abs(std::sqrt(norm) - 1.0) < 1e-12);

    const SemanticEmbedder sem2 = SemanticEmbedder::seeded(64, 7);
    CHECK(sem2.embed("Restaurant") == a);  // independent instances agree
}

TEST_CASE("distinct categories stay dissimilar at d=64 across 100 seeds") {
    for (uint64_t seed = 0; seed < 100; ++seed) {
        const SemanticEmbedder sem = SemanticEmbedder::seeded(64, seed);
        CHECK(std::abs(vec_cos(sem.embed("Restaurant"), sem.embed("Workplace"))) < 0.5);
    }
}

TEST_CASE("external embedding files round trip and reject unknown categories") {
    namespace fs = std::filesystem;
    const std::string path = (fs::temp_directory_path() / "trajod_sem.txt").string();
    {
        std::ofstream os(path);
        os << "Restaurant 1 0 0 0\n";
        os << "Home 0 3 0 0\n";  // normalized on load
    }
    const SemanticEmbedder sem = SemanticEmbedder::from_file(path, 4);
    CHECK(sem.embed("Restaurant") == std::vector<double>{1, 0, 0, 0});
    CHECK(sem.embed("Home") == std::vector<double>{0, 1, 0, 0});
    CHECK_THROWS_WITH_AS(sem.embed("Pub"), doctest::Contains("Pub"), DataError);
    std::remove(path.c_str());
}

TEST_CASE("temporal features encode weekday and time of day") {
    const auto f = temporal_features(3, 6 * 3600);  // 06:00
    for (int i = 0; i < 7; ++i) CHECK(f[static_cast<size_t>(i)] == (i == 3 ? 1.0 : 0.0));
    CHECK(f[7] == doctest::Approx(1.0).epsilon(1e-12));   // sin(2pi/4)
    CHECK(f[8] == doctest::Approx(0.0).epsilon(1e-9));    // cos
    CHECK(f[9] == doctest::Approx(0.0).epsilon(1e-9));    // sin(pi)
    CHECK(f[10] == doctest::Approx(-1.0).epsilon(1e-12));
    // day offsets do not leak into time-of-day features
    const auto g = temporal_features(3, 6 * 3600 + 5 * 86400);
    for (int i = 7; i < 11; ++i) CHECK(f[static_cast<size_t>(i)] == doctest::Approx(g[static_cast<size_t>(i)]));
}

TEST_CASE("build_pairs combinatorics") {
    const ModalityPairs p3 = build_pairs(3);
    CHECK(p3.positives == std::vector<int>{0, 1, 2});
    REQUIRE(p3.negatives.size() == 3);
    for (int i = 0; i < 3; ++i) CHECK(p3.negatives[static_cast<size_t>(i)].size() == 2);
    CHECK(p3.negatives[0] == std::vector<int>{1, 2});

    const ModalityPairs p1 = build_pairs(1);
    CHECK(p1.negatives[0].empty());  // no loss contribution possible
}

TEST_CASE("align_loss equals the direct-formula reference") {
    SeededRng rs(3, "ms"), rt(3, "mt");
    const Mlp2 map_s = Mlp2::create(2, 8, rs);
    const Mlp2 map_t = Mlp2::create(11, 8, rt);
    const SemanticEmbedder sem = SemanticEmbedder::seeded(8, 5);
    std::vector<StayPoint> pts;
    for (int i = 0; i < 6; ++i)
        pts.push_back({0.1 * i, 1.0 - 0.1 * i, i * 7200, i % 2 ? "A" : "B"});
    const StayPointBatch batch = batch_from(pts);

    const double tau = 0.2;
    const Tensor loss = align_loss(sem, map_s, map_t, batch, tau);

    std::vector<std::vector<double>> dc, dt, ds;
    {
        NoGradGuard ng;
        const Tensor mt = map_t.forward(batch.times);
        const Tensor ms = map_s.forward(batch.coords);
        for (int i = 0; i < batch.size(); ++i) {
            dc.push_back(sem.embed(batch.categories[static_cast<size_t>(i)]));
            std::vector<double> trow(8), srow(8);
            for (int j = 0; j < 8; ++j) {
                trow[static_cast<size_t>(j)] = mt.at(i, j);
                srow[static_cast<size_t>(j)] = ms.at(i, j);
            }
            dt.push_back(trow);
            ds.push_back(srow);
        }
    }
    CHECK(loss.value() == doctest::Approx(align_loss_reference(dc, dt, ds, tau)).epsilon(1e-10));
}

TEST_CASE("align_loss reduces to log(batch) when every similarity ties") {
    SeededRng rs(3, "ms"), rt(3, "mt");
    Mlp2 map_s = Mlp2::create(2, 8, rs);
    Mlp2 map_t = Mlp2::create(11, 8, rt);
    // zero the output layers: every mapped embedding collapses to the
    // zero vector, every cosine is 0, the softmax is uniform
    std::fill(map_s.w2.values().begin(), map_s.w2.values().end(), 0.0);
    std::fill(map_t.w2.values().begin(), map_t.w2.values().end(), 0.0);
    const SemanticEmbedder sem = SemanticEmbedder::seeded(8, 5);
    std::vector<StayPoint> pts;
    for (int i = 0; i < 5; ++i) pts.push_back({0.2, 0.4, i * 3600, "A"});
    const Tensor loss = align_loss(sem, map_s, map_t, batch_from(pts), 0.5);
    CHECK(loss.value() == doctest::Approx(2.0 * std::log(5.0)).epsilon(1e-12));
    CHECK(loss.value() >= 0.0);
}

TEST_CASE("align_loss decreases with temperature when positives dominate") {
    // property is conditional on every anchor matching its own temporal and
    // spatial embedding best; scan seeds deterministically for an instance
    // where that precondition holds, then check the monotone decrease
    // saturating weights separate the mapped directions enough for the
    // diagonal to dominate
    auto saturated_mlp = [](int in_dim, uint64_t seed, const char* tag) {
        SeededRng rng(seed, tag);
        Mlp2 m = Mlp2::create(in_dim, 6, rng);
        for (double& v : m.w1.values()) v = rng.uniform(-4.0, 4.0);
        for (double& v : m.w2.values()) v = rng.uniform(-1.5, 1.5);
        return m;
    };
    bool found = false;
    for (uint64_t seed = 0; seed < 64 && !found; ++seed) {
        const Mlp2 map_s = saturated_mlp(2, seed, "ms");
        const Mlp2 map_t = saturated_mlp(11, seed, "mt");
        std::vector<StayPoint> pts;
        for (int i = 0; i < 4; ++i)  // corners of the unit square, spread times
            pts.push_back({static_cast<double>(i % 2), static_cast<double>(i / 2),
                           i * 21600, "C" + std::to_string(i)});
        const StayPointBatch batch = batch_from(pts);

        std::map<std::string, std::vector<double>> table;
        std::vector<std::vector<double>> dt_rows(4), ds_rows(4);
        {
            NoGradGuard ng;
            const Tensor mt = l2_normalize(map_t.forward(batch.times));
            const Tensor ms = l2_normalize(map_s.forward(batch.coords));
            for (int i = 0; i < 4; ++i) {
                std::vector<double> row(6);
                dt_rows[static_cast<size_t>(i)].assign(6, 0.0);
                ds_rows[static_cast<size_t>(i)].assign(6, 0.0);
                for (int j = 0; j < 6; ++j) {
                    row[static_cast<size_t>(j)] = mt.at(i, j) + ms.at(i, j);
                    dt_rows[static_cast<size_t>(i)][static_cast<size_t>(j)] = mt.at(i, j);
                    ds_rows[static_cast<size_t>(i)][static_cast<size_t>(j)] = ms.at(i, j);
                }
                table["C" + std::to_string(i)] = row;
            }
        }
        const SemanticEmbedder sem = SemanticEmbedder::from_table(6, table);
        bool dominant = true;
        for (int i = 0; i < 4 && dominant; ++i) {
            const auto& ci = sem.embed("C" + std::to_string(i));
            for (int j = 0; j < 4 && dominant; ++j) {
                if (i == j) continue;
                dominant = vec_cos(ci, dt_rows[static_cast<size_t>(i)]) >
                               vec_cos(ci, dt_rows[static_cast<size_t>(j)]) + 0.02 &&
                           vec_cos(ci, ds_rows[static_cast<size_t>(i)]) >
                               vec_cos(ci, ds_rows[static_cast<size_t>(j)]) + 0.02;
            }
        }
        if (!dominant) continue;
        found = true;
        const double l1 = align_loss(sem, map_s, map_t, batch, 1.0).value();
        const double l05 = align_loss(sem, map_s, map_t, batch, 0.5).value();
        const double l01 = align_loss(sem, map_s, map_t, batch, 0.1).value();
        INFO("instance seed " << seed);
        CHECK(l05 < l1);
        CHECK(l01 < l05);
    }
    CHECK(found);
}

TEST_CASE("align_loss gradients match finite differences") {
    for (uint64_t seed = 0; seed < 5; ++seed) {
        SeededRng rs(seed, "ms"), rt(seed, "mt");
        const Mlp2 map_s = Mlp2::create(2, 6, rs);
        const Mlp2 map_t = Mlp2::create(11, 6, rt);
        const SemanticEmbedder sem = SemanticEmbedder::seeded(6, seed);
        std::vector<StayPoint> pts;
        SeededRng prng(seed, "pts");
        for (int i = 0; i < 5; ++i)
            pts.push_back({prng.uniform(), prng.uniform(),
                           static_cast<int64_t>(prng.uniform(0, 86400)), i % 2 ? "A" : "B"});
        const StayPointBatch batch = batch_from(pts);
        auto loss_fn = [&]() { return align_loss(sem, map_s, map_t, batch, 0.3); };
        auto params = map_s.named_params("map_s");
        for (auto& p : map_t.named_params("map_t")) params.push_back(p);
        const auto res = oracles::fd_check(loss_fn, params);
        INFO("seed " << seed << " worst " << res.worst);
        CHECK(res.max_rel_err < 1e-5);
    }
}

TEST_CASE("the frozen table never receives gradients") {
    SeededRng rs(1, "ms"), rt(1, "mt");
    Mlp2 map_s = Mlp2::create(2, 8, rs);
    Mlp2 map_t = Mlp2::create(11, 8, rt);
    const SemanticEmbedder sem = SemanticEmbedder::seeded(8, 2);
    const std::vector<double> before = sem.embed("A");

    std::vector<StayPoint> pts;
    for (int i = 0; i < 4; ++i) pts.push_back({0.3, 0.3, i * 4000, i % 2 ? "A" : "B"});
    const StayPointBatch batch = batch_from(pts);
    std::vector<Tensor> params;
    for (auto& [n, t] : map_s.named_params("s")) params.push_back(t);
    for (auto& [n, t] : map_t.named_params("t")) params.push_back(t);
    Adam opt(params);
    for (int step = 0; step < 30; ++step) {
        const Tensor loss = align_loss(sem, map_s, map_t, batch, 0.1);
        loss.backward();
        opt.step(5e-3);
    }
    CHECK(sem.embed("A") == before);
}

TEST_CASE("alignment training separates matched from mismatched pairs") {
    // categories deterministically co-occur with a time slot; after a few
    // hundred steps matched similarity should clearly dominate
    SeededRng rs(4, "ms"), rt(4, "mt");
    Mlp2 map_s = Mlp2::create(2, 16, rs);
    Mlp2 map_t = Mlp2::create(11, 16, rt);
    const SemanticEmbedder sem = SemanticEmbedder::seeded(16, 9);
    const std::vector<std::string> cats = {"C0", "C1", "C2", "C3"};

    std::vector<Tensor> params;
    for (auto& [n, t] : map_s.named_params("s")) params.push_back(t);
    for (auto& [n, t] : map_t.named_params("t")) params.push_back(t);
    Adam opt(params);
    SeededRng data_rng(21, "stream");
    for (int step = 0; step < 200; ++step) {
        std::vector<StayPoint> pts;
        for (int i = 0; i < 32; ++i) {
            const int c = static_cast<int>(data_rng.choice(4));
            const int64_t t = c * 6 * 3600 + static_cast<int64_t>(data_rng.uniform(0, 3600));
            pts.push_back({data_rng.uniform(), data_rng.uniform(), t, cats[static_cast<size_t>(c)]});
        }
        const StayPointBatch batch = batch_from(pts);
        align_loss(sem, map_s, map_t, batch, 0.1).backward();
        opt.step(5e-3);
    }

    NoGradGuard ng;
    double matched = 0.0, mismatched = 0.0;
    int nm = 0, nx = 0;
    for (int c = 0; c < 4; ++c) {
        std::vector<StayPoint> probe = {{0.5, 0.5, c * 6 * 3600 + 1800, cats[static_cast<size_t>(c)]}};
        const StayPointBatch b = batch_from(probe);
        const Tensor dt = l2_normalize(map_t.forward(b.times));
        std::vector<double> trow(16);
        for (int j = 0; j < 16; ++j) trow[static_cast<size_t>(j)] = dt.at(0, j);
        for (int c2 = 0; c2 < 4; ++c2) {
            const double s = vec_cos(sem.embed(cats[static_cast<size_t>(c2)]), trow);
            if (c2 == c) {
                matched += s;
                ++nm;
            } else {
                mismatched += s;
                ++nx;
            }
        }
    }
    CHECK(matched / nm - mismatched / nx >= 0.2);
}

TEST_CASE("point embeddings zero the padding and normalize valid rows") {
    const SemanticEmbedder sem = SemanticEmbedder::seeded(8, 3);
    const PointEmbedder pe(sem, 8, 17);
    DailyTrajectory traj;
    traj.user_id = "u";
    traj.weekday = 2;
    traj.points = {{0.2, 0.3, 3600, "A"}, {0.4, 0.1, 7200, "B"}, {0.9, 0.9, 10800, "A"}};
    traj.valid_len = 3;

    const Tensor x = pe.embed_day(traj, 6, true, Ablation::none);
    REQUIRE(x.shape() == Shape{6, 8});
    for (int r = 0; r < 3; ++r) {
        double norm = 0.0;
        for (int c = 0; c < 8; ++c) norm += x.at(r, c) * x.at(r, c);
        CHECK(std::abs(std::sqrt(norm) - 1.0) < 1e-12);
    }
    for (int r = 3; r < 6; ++r)
        for (int c = 0; c < 8; ++c) CHECK(x.at(r, c) == 0.0);

    const auto mask = PointEmbedder::mask_for(traj, 6);
    CHECK(mask == std::vector<double>{1, 1, 1, 0, 0, 0});
}

TEST_CASE("ablation flags zero exactly one channel before fusion") {
    const SemanticEmbedder sem = SemanticEmbedder::seeded(8, 3);
    PointEmbedder pe(sem, 8, 17);
    // make the fusion weight the identity-ish stack so channel blocks are
    // observable: W = [I_sem; 0; 0] picks out the semantic block
    std::fill(pe.fusion_w().values().begin(), pe.fusion_w().values().end(), 0.0);
    for (int i = 0; i < 8; ++i) pe.fusion_w().values()[static_cast<size_t>(i) * 8 + static_cast<size_t>(i)] = 1.0;

    DailyTrajectory traj;
    traj.weekday = 1;
    traj.points = {{0.5, 0.5, 1800, "A"}};
    traj.valid_len = 1;

    const Tensor with_sem = pe.embed_day(traj, 2, true, Ablation::none);
    const Tensor no_sem = pe.embed_day(traj, 2, true, Ablation::no_semantic);
    // with the semantic block zeroed and this fusion weight, the projection
    // input vanishes and the guard maps the row to zero
    double norm = 0.0;
    for (int c = 0; c < 8; ++c) norm += no_sem.at(0, c) * no_sem.at(0, c);
    CHECK(norm == 0.0);
    double norm_with = 0.0;
    for (int c = 0; c < 8; ++c) norm_with += with_sem.at(0, c) * with_sem.at(0, c);
    CHECK(norm_with == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_SUITE_END();
