#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>

#include "trajod/errors.hpp"
#include "trajod/rng.hpp"
#include "trajod/scoring.hpp"
#include "trajod/tensor.hpp"

using namespace trajod;

namespace {

std::vector<double> unit(std::vector<double> v) {
    double n = 0.0;
    for (double x : v) n += x * x;
    n = std::sqrt(n);
    for (double& x : v) x /= n;
    return v;
}

std::vector<double> random_unit(SeededRng& rng, int d) {
    std::vector<double> v(static_cast<size_t>(d));
    for (double& x : v) x = rng.normal();
    return unit(std::move(v));
}

/// Straight-from-formula evaluation of the two outlier scores, written as
/// plain nested loops independent of the scoring module.
struct OracleScores {
    double cross_time = 0.0;
    bool ct_defined = false;
    double cross_population = 0.0;
};

OracleScores oracle_scores(const std::vector<std::vector<double>>& days, int window_start,
                           int epoch_weekday, int freq,
                           const std::vector<std::vector<double>>& centroids, bool closest) {
    OracleScores out;
    double sum = 0.0;
    int common = 0;
    double cp = -1.0;
    for (int p = 0; p < freq; ++p) {
        std::vector<double> h, c;
        int nh = 0, nc = 0;
        for (int d = 0; d < static_cast<int>(days.size()); ++d) {
            if ((d + epoch_weekday) % freq != p) continue;
            const auto& z = days[static_cast<size_t>(d)];
            auto& target = d < window_start ? h : c;
            int& count = d < window_start ? nh : nc;
            if (target.empty()) target.assign(z.size(), 0.0);
            for (size_t i = 0; i < z.size(); ++i) target[i] += z[i];
            ++count;
        }
        auto finalize = [](std::vector<double>& v, int n) {
            if (n == 0) return false;
            double norm = 0.0;
            for (double& x : v) {
                x /= n;
                norm += x * x;
            }
            norm = std::sqrt(norm);
            if (norm < 1e-9) return false;
            for (double& x : v) x /= norm;
            return true;
        };
        const bool has_h = finalize(h, nh);
        const bool has_c = finalize(c, nc);
        if (has_h && has_c) {
            sum += cosine_sim_value(h, c);
            ++common;
        }
        if (has_c) {
            double best = -2.0, worst = 2.0;
            for (const auto& b : centroids) {
                const double s = cosine_sim_value(c, b);
                best = std::max(best, s);
                worst = std::min(worst, s);
            }
            cp = std::max(cp, closest ? 1.0 - best : 1.0 - worst);
        }
    }
    out.ct_defined = common > 0;
    if (out.ct_defined) out.cross_time = 1.0 - sum / common;
    out.cross_population = cp < 0 ? 0.0 : cp;
    return out;
}

}  // namespace

TEST_SUITE_BEGIN("scoring");

TEST_CASE("mean_day_embedding basics") {
    const std::vector<double> z1 = unit({1, 2, 3});
    const auto one = mean_day_embedding({&z1});
    REQUIRE(one.has_value());  // a single day is its own mean
    for (size_t i = 0; i < 3; ++i) CHECK((*one)[i] == doctest::Approx(z1[i]).epsilon(1e-14));

    const std::vector<double> z2 = z1;
    const auto two = mean_day_embedding({&z1, &z2});
    REQUIRE(two.has_value());
    for (size_t i = 0; i < 3; ++i) CHECK((*two)[i] == doctest::Approx(z1[i]).epsilon(1e-12));

    std::vector<double> neg = z1;
    for (double& v : neg) v = -v;
    CHECK_FALSE(mean_day_embedding({&z1, &neg}).has_value());  // degenerate mean
    CHECK_FALSE(mean_day_embedding({}).has_value());
}

TEST_CASE("cross-time closed forms") {
    // 4 days, patterns of period 2; window starts at day 2
    const std::vector<double> a = unit({1, 0, 0});
    const std::vector<double> b = unit({0, 1, 0});
    const std::vector<double> ab = unit({1, 1, 0});  // cos(a, ab) = 1/sqrt(2)

    EmbeddingTable table;
    table["same"] = {a, b, a, b};          // identical per pattern -> score 0
    table["orth"] = {a, b, {0, 0, 1}, {0, 0, 1}};  // orthogonal -> score 1
    table["half"] = {a, b, a, ab};         // sims (1, 1/sqrt 2)

    ScoreInputs in;
    in.embeddings = &table;
    in.total_days = 4;
    in.window_start = 2;
    in.epoch_weekday = 0;
    in.freq = 2;
    in.centroids = {a};
    const auto scores = score_users(in, Eq11Mode::closest, 0.5, 0.5);
    auto find = [&](const std::string& u) {
        for (const auto& s : scores)
            if (s.user_id == u) return s;
        FAIL("missing user");
        return UserScore{};
    };
    CHECK(find("same").cross_time == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(find("orth").cross_time == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(find("half").cross_time ==
          doctest::Approx(1.0 - 0.5 * (1.0 + 1.0 / std::sqrt(2.0))).epsilon(1e-12));
}

TEST_CASE("cross-population closed forms in both modes") {
    const std::vector<double> c1 = {1, 0, 0};
    const std::vector<double> c2 = {0, 1, 0};
    // unit vector with cosines exactly 0.9 and 0.1 against c1 and c2
    const std::vector<double> h = {0.9, 0.1, std::sqrt(1.0 - 0.81 - 0.01)};

    EmbeddingTable table;
    table["u"] = {c1, h};  // day 0 history, day 1 scored
    ScoreInputs in;
    in.embeddings = &table;
    in.total_days = 2;
    in.window_start = 1;
    in.epoch_weekday = 0;
    in.freq = 1;
    in.centroids = {c1, c2};

    const auto closest = score_users(in, Eq11Mode::closest, 0.5, 0.5);
    CHECK(closest[0].cross_population == doctest::Approx(1.0 - 0.9).epsilon(1e-12));
    const auto paper = score_users(in, Eq11Mode::paper_eq11, 0.5, 0.5);
    CHECK(paper[0].cross_population == doctest::Approx(1.0 - 0.1).epsilon(1e-12));

    // colinear with a centroid: zero in closest mode
    table["u"] = {c1, c1};
    const auto colinear = score_users(in, Eq11Mode::closest, 0.5, 0.5);
    CHECK(colinear[0].cross_population == doctest::Approx(0.0).epsilon(1e-12));

    // orthogonal to every centroid: 1
    table["u"] = {c1, {0, 0, 1}};
    const auto orth = score_users(in, Eq11Mode::closest, 0.5, 0.5);
    CHECK(orth[0].cross_population == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("straight-formula oracle matches the module to 1e-12") {
    SeededRng rng(31, "oracle");
    const int users = 5, days = 14, d = 8, k = 3;
    EmbeddingTable table;
    std::vector<std::vector<double>> centroids;
    for (int i = 0; i < k; ++i) centroids.push_back(random_unit(rng, d));
    for (int u = 0; u < users; ++u) {
        auto& rows = table["user" + std::to_string(u)];
        for (int day = 0; day < days; ++day) rows.push_back(random_unit(rng, d));
    }

    ScoreInputs in;
    in.embeddings = &table;
    in.total_days = days;
    in.window_start = 7;
    in.epoch_weekday = 3;
    in.freq = 7;
    in.centroids = centroids;

    for (const bool closest : {true, false}) {
        const auto scores =
            score_users(in, closest ? Eq11Mode::closest : Eq11Mode::paper_eq11, 0.5, 0.5);
        for (const auto& s : scores) {
            const auto expect =
                oracle_scores(table[s.user_id], in.window_start, in.epoch_weekday, in.freq,
                              centroids, closest);
            REQUIRE(s.cross_time_defined == expect.ct_defined);
            CHECK(std::abs(s.cross_time - expect.cross_time) < 1e-12);
            CHECK(std::abs(s.cross_population - expect.cross_population) < 1e-12);
        }
    }
}

TEST_CASE("scoring the same inputs twice is deterministic") {
    SeededRng rng(5, "det");
    EmbeddingTable table;
    for (int u = 0; u < 4; ++u) {
        auto& rows = table["u" + std::to_string(u)];
        for (int d = 0; d < 14; ++d) rows.push_back(random_unit(rng, 6));
    }
    ScoreInputs in;
    in.embeddings = &table;
    in.total_days = 14;
    in.window_start = 7;
    in.epoch_weekday = 0;
    in.freq = 7;
    in.centroids = {random_unit(rng, 6)};
    const auto a = score_users(in, Eq11Mode::closest, 0.5, 0.5);
    const auto b = score_users(in, Eq11Mode::closest, 0.5, 0.5);
    REQUIRE(a.size() == b.size());
    for (size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].user_id == b[i].user_id);
        CHECK(a[i].fused == b[i].fused);
        CHECK(a[i].rank == b[i].rank);
    }
}

TEST_CASE("fuse weighting, endpoints and tie-breaking") {
    auto row = [](const char* u, double ct, double cp) {
        UserScore s;
        s.user_id = u;
        s.cross_time = ct;
        s.cross_time_defined = true;
        s.cross_population = cp;
        return s;
    };

    // pure cross-time weighting reproduces the cross-time order
    auto by_time = fuse({row("a", 0.9, 0.0), row("b", 0.1, 0.9), row("c", 0.5, 0.5)}, 1.0, 0.0);
    CHECK(by_time[0].user_id == "a");
    CHECK(by_time[1].user_id == "c");
    CHECK(by_time[2].user_id == "b");

    // maximal in both channels fuses to exactly 1 and rank 1
    auto maxed = fuse({row("hi", 0.9, 0.8), row("lo", 0.1, 0.2), row("mid", 0.3, 0.5)}, 0.5, 0.5);
    CHECK(maxed[0].user_id == "hi");
    CHECK(maxed[0].fused == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(maxed[0].rank == 1);
    CHECK(maxed[2].fused == doctest::Approx(0.0).epsilon(1e-15));

    // symmetric scores tie and break lexicographically
    auto tied = fuse({row("zeta", 0.2, 0.4), row("alpha", 0.4, 0.2)}, 0.5, 0.5);
    CHECK(tied[0].fused == doctest::Approx(tied[1].fused).epsilon(1e-12));
    CHECK(tied[0].user_id == "alpha");
    CHECK(tied[1].user_id == "zeta");
}

TEST_CASE("fused ranking is invariant to positive affine channel rescaling") {
    SeededRng rng(9, "affine");
    std::vector<UserScore> base;
    for (int i = 0; i < 12; ++i) {
        UserScore s;
        s.user_id = "u" + std::to_string(i);
        s.cross_time = rng.uniform();
        s.cross_time_defined = true;
        s.cross_population = rng.uniform();
        base.push_back(s);
    }
    auto scaled = base;
    for (auto& s : scaled) {
        s.cross_time = 3.5 * s.cross_time + 2.0;
        s.cross_population = 0.25 * s.cross_population - 7.0;
    }
    const auto ra = fuse(base, 0.7, 0.3);
    const auto rb = fuse(scaled, 0.7, 0.3);
    for (size_t i = 0; i < ra.size(); ++i) {
        CHECK(ra[i].user_id == rb[i].user_id);
        CHECK(ra[i].rank == rb[i].rank);
        CHECK(ra[i].fused == doctest::Approx(rb[i].fused).epsilon(1e-9));
    }
}

TEST_CASE("undefined cross-time falls back to the population channel") {
    UserScore a;
    a.user_id = "a";
    a.cross_time_defined = false;
    a.cross_population = 0.9;
    UserScore b;
    b.user_id = "b";
    b.cross_time = 0.5;
    b.cross_time_defined = true;
    b.cross_population = 0.1;
    const auto fused = fuse({a, b}, 0.5, 0.5);
    CHECK(fused[0].user_id == "a");  // normalized population channel = 1
    CHECK(fused[0].fused == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("score files round trip through write and load") {
    namespace fs = std::filesystem;
    std::vector<UserScore> rows(2);
    rows[0].user_id = "a";
    rows[0].cross_time = 0.123456789012345;
    rows[0].cross_time_defined = true;
    rows[0].cross_population = 0.5;
    rows[0].fused = 0.75;
    rows[0].rank = 1;
    rows[1].user_id = "b";
    rows[1].cross_time_defined = false;
    rows[1].cross_population = 0.25;
    rows[1].fused = 0.1;
    rows[1].rank = 2;
    const std::string path = (fs::temp_directory_path() / "trajod_scores.csv").string();
    write_scores(path, rows, {"config_hash=f00"});
    const auto back = load_scores(path);
    REQUIRE(back.size() == 2);
    CHECK(back[0].user_id == "a");
    CHECK(back[0].cross_time == rows[0].cross_time);
    CHECK(back[0].rank == 1);
    CHECK_FALSE(back[1].cross_time_defined);
    CHECK(back[1].cross_population == 0.25);
    std::remove(path.c_str());
}

TEST_SUITE_END();
