#include "trajod/scoring.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <future>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "trajod/errors.hpp"
#include "trajod/tensor.hpp"

namespace trajod {

std::string to_string(Eq11Mode m) { return m == Eq11Mode::closest ? "closest" : "paper-eq11"; }

Eq11Mode eq11_mode_from(const std::string& s) {
    if (s == "closest") return Eq11Mode::closest;
    if (s == "paper-eq11") return Eq11Mode::paper_eq11;
    throw ConfigError("unknown score mode '" + s + "'");
}

ScoreConfig ScoreConfig::from(const Config& cfg) {
    ScoreConfig sc;
    sc.window_days = cfg.get_int("score.window_days");
    sc.mode = eq11_mode_from(cfg.get_str("score.mode"));
    sc.w_time = cfg.get_double("score.w_time");
    sc.w_pop = cfg.get_double("score.w_pop");
    sc.freq = cfg.get_int("train.freq");
    sc.threads = cfg.get_int("threads");
    if (sc.w_time < 0.0 || sc.w_pop < 0.0 || std::abs(sc.w_time + sc.w_pop - 1.0) > 1e-9)
        throw ConfigError("score.w_time and score.w_pop must be nonnegative and sum to 1");
    return sc;
}

EmbeddingTable compute_embeddings(const TrajModel& model, const Dataset& ds, int threads) {
    EmbeddingTable table;
    for (const auto& user : ds.users) table[user] = {};

    auto encode_user = [&](const std::string& user) {
        std::vector<std::vector<double>> rows;
        rows.reserve(static_cast<size_t>(ds.total_days));
        for (const auto& day : ds.days_of(user)) rows.push_back(model.encode_day_values(day));
        return rows;
    };

    if (threads <= 1) {
        for (const auto& user : ds.users) table[user] = encode_user(user);
    } else {
        const int nw = std::min<int>(threads, static_cast<int>(ds.users.size()));
        std::vector<std::future<void>> jobs;
        for (int w = 0; w < nw; ++w) {
            jobs.push_back(std::async(std::launch::async, [&, w]() {
                for (size_t i = static_cast<size_t>(w); i < ds.users.size(); i += static_cast<size_t>(nw))
                    table[ds.users[i]] = encode_user(ds.users[i]);
            }));
        }
        for (auto& j : jobs) j.get();
    }
    return table;
}

std::optional<std::vector<double>> mean_day_embedding(
    const std::vector<const std::vector<double>*>& zs) {
    if (zs.empty()) return std::nullopt;
    std::vector<double> m(zs[0]->size(), 0.0);
    for (const auto* z : zs)
        for (size_t i = 0; i < m.size(); ++i) m[i] += (*z)[i];
    double norm = 0.0;
    for (double& v : m) {
        v /= static_cast<double>(zs.size());
        norm += v * v;
    }
    norm = std::sqrt(norm);
    if (norm < 1e-9) return std::nullopt;
    for (double& v : m) v /= norm;
    return m;
}

namespace {

struct MinMax {
    double lo = 0.0, hi = 0.0;
    bool degenerate = true;

    static MinMax over(const std::vector<double>& xs) {
        MinMax mm;
        if (xs.empty()) return mm;
        mm.lo = mm.hi = xs[0];
        for (double x : xs) {
            mm.lo = std::min(mm.lo, x);
            mm.hi = std::max(mm.hi, x);
        }
        mm.degenerate = (mm.hi - mm.lo) < 1e-15;
        return mm;
    }

    double norm(double x) const { return degenerate ? 0.0 : (x - lo) / (hi - lo); }
};

}  // namespace

std::vector<UserScore> score_users(const ScoreInputs& in, Eq11Mode mode, double w_time, double w_pop) {
    if (!in.embeddings) throw NumericalError("score_users: no embeddings");
    const int f = in.freq;

    std::vector<UserScore> out;
    for (const auto& [user, days] : *in.embeddings) {
        UserScore us;
        us.user_id = user;

        // per-pattern means on both sides of the window start
        std::vector<std::optional<std::vector<double>>> hist(static_cast<size_t>(f)), cur(static_cast<size_t>(f));
        for (int p = 0; p < f; ++p) {
            std::vector<const std::vector<double>*> hs, cs;
            for (int d = 0; d < static_cast<int>(days.size()); ++d) {
                const int pat = (d + in.epoch_weekday) % f;
                if (pat != p) continue;
                if (d < in.window_start)
                    hs.push_back(&days[static_cast<size_t>(d)]);
                else
                    cs.push_back(&days[static_cast<size_t>(d)]);
            }
            hist[static_cast<size_t>(p)] = mean_day_embedding(hs);
            cur[static_cast<size_t>(p)] = mean_day_embedding(cs);
        }

        int common = 0;
        double sim_sum = 0.0;
        double cp = 0.0;
        bool any_cur = false;
        for (int p = 0; p < f; ++p) {
            const auto& h = hist[static_cast<size_t>(p)];
            const auto& c = cur[static_cast<size_t>(p)];
            if (h && c) {
                sim_sum += cosine_sim_value(*h, *c);
                ++common;
            }
            if (c) {
                any_cur = true;
                double best = -2.0, worst = 2.0;
                for (const auto& b : in.centroids) {
                    const double s = cosine_sim_value(*c, b);
                    best = std::max(best, s);
                    worst = std::min(worst, s);
                }
                const double day_score = mode == Eq11Mode::closest ? 1.0 - best : 1.0 - worst;
                cp = std::max(cp, day_score);
            }
        }
        us.cross_time_defined = common > 0;
        if (us.cross_time_defined) us.cross_time = 1.0 - sim_sum / common;
        us.cross_population = any_cur ? cp : 0.0;
        out.push_back(std::move(us));
    }
    return fuse(std::move(out), w_time, w_pop);
}

std::vector<UserScore> fuse(std::vector<UserScore> scores, double w_time, double w_pop) {
    std::vector<double> ct_vals, cp_vals;
    for (const auto& us : scores) {
        if (us.cross_time_defined) ct_vals.push_back(us.cross_time);
        cp_vals.push_back(us.cross_population);
    }
    const MinMax mm_ct = MinMax::over(ct_vals);
    const MinMax mm_cp = MinMax::over(cp_vals);
    if (scores.size() >= 2 && mm_ct.degenerate && mm_cp.degenerate)
        std::cerr << "warning: all scores equal; fused ranking is arbitrary\n";
    for (auto& us : scores) {
        const double np = mm_cp.norm(us.cross_population);
        us.fused = us.cross_time_defined ? w_time * mm_ct.norm(us.cross_time) + w_pop * np : np;
    }
    std::sort(scores.begin(), scores.end(), [](const UserScore& a, const UserScore& b) {
        if (a.fused != b.fused) return a.fused > b.fused;
        return a.user_id < b.user_id;
    });
    for (size_t i = 0; i < scores.size(); ++i) scores[i].rank = static_cast<int>(i) + 1;
    return scores;
}

std::vector<UserScore> score_dataset(const TrajModel& model, const Dataset& ds,
                                     const ScoreConfig& cfg) {
    const int window = cfg.window_days > 0 ? cfg.window_days : ds.total_days - ds.split_day;
    if (window < 1 || window > ds.total_days)
        throw ConfigError("score window of " + std::to_string(window) + " days out of range");

    ScoreInputs in;
    const EmbeddingTable table = compute_embeddings(model, ds, cfg.threads);
    in.embeddings = &table;
    in.total_days = ds.total_days;
    in.window_start = ds.total_days - window;
    in.epoch_weekday = ds.epoch_weekday;
    in.freq = cfg.freq;
    const auto& c = model.centroids();
    for (int k = 0; k < c.shape()[0]; ++k) {
        std::vector<double> row(static_cast<size_t>(c.shape()[1]));
        for (int j = 0; j < c.shape()[1]; ++j) row[static_cast<size_t>(j)] = c.at(k, j);
        in.centroids.push_back(std::move(row));
    }
    return score_users(in, cfg.mode, cfg.w_time, cfg.w_pop);
}

void write_scores(const std::string& path, const std::vector<UserScore>& scores,
                  const std::vector<std::string>& comment_lines) {
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw DataError("cannot write score file " + path);
    for (const auto& c : comment_lines) os << "# " << c << "\n";
    os << std::setprecision(17);
    for (const auto& s : scores) {
        os << s.user_id << ",";
        if (s.cross_time_defined)
            os << s.cross_time;
        else
            os << "nan";
        os << "," << s.cross_population << "," << s.fused << "," << s.rank << "\n";
    }
    if (!os) throw DataError("write failed for " + path);
}

std::vector<UserScore> load_scores(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw DataError("cannot open score file " + path);
    std::vector<UserScore> out;
    std::string line;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#') continue;
        std::stringstream ss(line);
        std::string user, ct, cp, fused, rank;
        if (!std::getline(ss, user, ',') || !std::getline(ss, ct, ',') ||
            !std::getline(ss, cp, ',') || !std::getline(ss, fused, ',') || !std::getline(ss, rank))
            throw DataError(path + ":" + std::to_string(lineno) + ": expected 5 comma-separated fields");
        UserScore s;
        s.user_id = user;
        try {
            s.cross_time_defined = ct != "nan";
            s.cross_time = s.cross_time_defined ? std::stod(ct) : 0.0;
            s.cross_population = std::stod(cp);
            s.fused = std::stod(fused);
            s.rank = std::stoi(rank);
        } catch (const std::exception&) {
            throw DataError(path + ":" + std::to_string(lineno) + ": malformed numeric field");
        }
        out.push_back(std::move(s));
    }
    return out;
}

}  // namespace trajod
