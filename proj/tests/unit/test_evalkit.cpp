#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "oracles.hpp"
#include "testutil.hpp"
#include "trajod/errors.hpp"
#include "trajod/evalkit.hpp"
#include "trajod/rng.hpp"

using namespace trajod;

TEST_SUITE_BEGIN("evalkit");

TEST_CASE("average precision and auc on the worked example") {
    const std::vector<double> scores = {0.9, 0.8, 0.7, 0.6};
    const std::vector<int> labels = {1, 0, 1, 0};
    CHECK(average_precision(scores, labels) == doctest::Approx(0.8333333333333333).epsilon(1e-9));
    CHECK(roc_auc(scores, labels) == doctest::Approx(0.75).epsilon(1e-12));
}

TEST_CASE("perfect separation and all-ties conventions") {
    const std::vector<double> perfect = {0.9, 0.8, 0.2, 0.1};
    const std::vector<int> labels = {1, 1, 0, 0};
    CHECK(average_precision(perfect, labels) == doctest::Approx(1.0));
    CHECK(roc_auc(perfect, labels) == doctest::Approx(1.0));

    const std::vector<double> equal = {0.5, 0.5, 0.5, 0.5};
    CHECK(roc_auc(equal, labels) == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("single-class label vectors are rejected") {
    CHECK_THROWS_AS(average_precision({0.1, 0.2}, {1, 1}), DataError);
    CHECK_THROWS_AS(roc_auc({0.1, 0.2}, {0, 0}), DataError);
}

TEST_CASE("metrics match brute-force oracles on 200 random instances") {
    for (uint64_t seed = 0; seed < 200; ++seed) {
        SeededRng rng(seed, "metric-oracle");
        const int n = 5 + static_cast<int>(rng.choice(46));
        std::vector<double> scores(static_cast<size_t>(n));
        std::vector<int> labels(static_cast<size_t>(n));
        for (double& s : scores) {
            s = rng.uniform();
            // occasional exact ties exercise the 0.5 convention
            if (rng.uniform() < 0.2) s = std::round(s * 8.0) / 8.0;
        }
        int pos = 0;
        for (int& l : labels) {
            l = rng.uniform() < 0.3 ? 1 : 0;
            pos += l;
        }
        if (pos == 0) labels[0] = 1;
        if (pos == n) labels[0] = 0;

        CHECK(std::abs(average_precision(scores, labels) -
                       oracles::brute_average_precision(scores, labels)) < 1e-9);
        CHECK(std::abs(roc_auc(scores, labels) - oracles::brute_roc_auc(scores, labels)) < 1e-9);
    }
}

TEST_CASE("auc is invariant under strictly increasing transforms") {
    SeededRng rng(17, "monotone");
    std::vector<double> scores(30);
    std::vector<int> labels(30);
    for (double& s : scores) s = rng.uniform();
    for (size_t i = 0; i < labels.size(); ++i) labels[i] = i % 3 == 0 ? 1 : 0;
    const double base = roc_auc(scores, labels);
    std::vector<double> warped = scores;
    for (double& s : warped) s = std::exp(3.0 * s) + 10.0;
    CHECK(roc_auc(warped, labels) == doctest::Approx(base).epsilon(1e-12));
}

TEST_CASE("top-k hits on rankings") {
    LabelTable labels;
    labels["out1"] = {true, OutlierType::work, Intensity::red};
    labels["out2"] = {true, OutlierType::hunger, Intensity::yellow};
    labels["in1"] = {false, OutlierType::none, Intensity::none};
    labels["in2"] = {false, OutlierType::none, Intensity::none};

    const std::vector<std::string> perfect = {"out1", "out2", "in1", "in2"};
    CHECK(top_k_hits(perfect, labels, 2) == 2);  // all outliers ranked first
    CHECK(top_k_hits(perfect, labels, 0) == 0);
    CHECK(top_k_hits(perfect, labels, 4) == 2);  // k = everyone counts them all
    CHECK_THROWS_AS(top_k_hits(perfect, labels, 5), ConfigError);
}

TEST_CASE("random rankings hit at the base rate, via seeded replay") {
    // 100 users, 10 outliers, K = 10; replaying the same shuffle is the oracle
    LabelTable labels;
    std::vector<std::string> users;
    for (int i = 0; i < 100; ++i) {
        const std::string u = "u" + std::to_string(i);
        users.push_back(u);
        labels[u] = i < 10 ? LabelRow{true, OutlierType::hunger, Intensity::red}
                           : LabelRow{false, OutlierType::none, Intensity::none};
    }
    double total = 0.0;
    for (uint64_t seed = 0; seed < 30; ++seed) {
        std::vector<std::string> ranking = users;
        SeededRng rng(seed, "shuffle");
        rng.shuffle(ranking);
        const int hits = top_k_hits(ranking, labels, 10);
        // independent replay of the same shuffle
        std::vector<std::string> replay = users;
        SeededRng rng2(seed, "shuffle");
        rng2.shuffle(replay);
        int expected = 0;
        for (int i = 0; i < 10; ++i) expected += labels.at(replay[static_cast<size_t>(i)]).is_outlier;
        CHECK(hits == expected);
        total += hits;
    }
    CHECK(total / 30.0 == doctest::Approx(1.0).epsilon(0.6));  // base rate ~ K * 10%
}

TEST_CASE("breakdown partitions hits by type and intensity") {
    LabelTable labels;
    labels["w1"] = {true, OutlierType::work, Intensity::red};
    labels["w2"] = {true, OutlierType::work, Intensity::red};
    labels["h1"] = {true, OutlierType::hunger, Intensity::orange};
    labels["s1"] = {true, OutlierType::social, Intensity::yellow};
    labels["n1"] = {false, OutlierType::none, Intensity::none};
    labels["n2"] = {false, OutlierType::none, Intensity::none};

    const std::vector<std::string> ranking = {"w1", "w2", "n1", "h1", "s1", "n2"};
    const Breakdown bd = breakdown(ranking, labels, 4);
    CHECK(bd.hits[1][0] == 2);  // both red work outliers in the top 4
    CHECK(bd.hits[0][1] == 1);  // one orange hunger
    CHECK(bd.hits[2][2] == 0);  // the yellow social sits outside the cut
    CHECK(bd.total_hits == 3);
    CHECK(bd.total_hits == top_k_hits(ranking, labels, 4));  // cells sum to top-k
    int cell_sum = 0;
    for (int t = 0; t < 3; ++t)
        for (int i = 0; i < 3; ++i) cell_sum += bd.hits[t][i];
    CHECK(cell_sum == bd.total_hits);
    CHECK(bd.totals[1][0] == 2);
    CHECK(bd.totals[0][0] == 0);  // absent category stays zero
    CHECK(bd.hits_of(OutlierType::work) == 2);
    CHECK(bd.totals_of(OutlierType::social) == 1);
}

TEST_CASE("distance baseline flags a user whose movement stops") {
    SimConfig sim;
    sim.seed = 19;
    sim.n_agents = 10;
    sim.n_normal_days = 28;
    sim.n_outlier_days = 7;
    auto [ds, labels] = testutil::simulated_dataset(sim);

    // freeze one user's test days: remove every point after the split
    const std::string frozen = ds.users[2];
    for (auto& day : ds.daily[frozen]) {
        if (day.day_index >= ds.split_day) {
            day.points.clear();
            day.valid_len = 0;
        }
    }
    const auto ranking = distance_baseline(ds);
    CHECK(ranking.front().first == frozen);
    CHECK(ranking.front().second > 1.0);

    // unchanged behavior scores near zero: every other user is far below
    for (const auto& [user, score] : ranking)
        if (user != frozen) CHECK(score < ranking.front().second * 0.8);

    // deterministic
    const auto again = distance_baseline(ds);
    CHECK(ranking == again);
}

TEST_CASE("evaluate_scores reports all three channels with auto k") {
    std::vector<UserScore> scores;
    LabelTable labels;
    for (int i = 0; i < 25; ++i) {
        UserScore s;
        s.user_id = "u" + std::to_string(i < 10 ? i : i + 10);  // mixed ids
        s.cross_time = i < 5 ? 0.9 - 0.01 * i : 0.1 - 0.001 * i;
        s.cross_time_defined = true;
        s.cross_population = 0.5;
        s.fused = s.cross_time;
        scores.push_back(s);
        labels[s.user_id] = i < 5 ? LabelRow{true, OutlierType::work, Intensity::red}
                                  : LabelRow{false, OutlierType::none, Intensity::none};
    }
    const auto metrics = evaluate_scores(scores, labels, 0);
    REQUIRE(metrics.size() == 3);
    CHECK(metrics[0].channel == "cross_time");
    CHECK(metrics[0].k == 3);  // ceil(0.1 * 25)
    CHECK(metrics[0].auc == doctest::Approx(1.0));
    CHECK(metrics[0].top10 == 5);
    // constant channel collapses to chance with the tie convention
    CHECK(metrics[1].channel == "cross_population");
    CHECK(metrics[1].auc == doctest::Approx(0.5));
}

TEST_SUITE_END();
