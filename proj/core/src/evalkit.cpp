#include "trajod/evalkit.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <sstream>

#include "trajod/errors.hpp"

namespace trajod {

int top_k_hits(const std::vector<std::string>& ranked_users, const LabelTable& labels, int k) {
    if (k < 0 || k > static_cast<int>(ranked_users.size()))
        throw ConfigError("top_k_hits: k out of range");
    int hits = 0;
    for (int i = 0; i < k; ++i) {
        auto it = labels.find(ranked_users[static_cast<size_t>(i)]);
        if (it != labels.end() && it->second.is_outlier) ++hits;
    }
    return hits;
}

namespace {

std::vector<size_t> order_desc(const std::vector<double>& scores) {
    std::vector<size_t> idx(scores.size());
    std::iota(idx.begin(), idx.end(), size_t{0});
    std::stable_sort(idx.begin(), idx.end(), [&](size_t a, size_t b) {
        if (scores[a] != scores[b]) return scores[a] > scores[b];
        return a < b;
    });
    return idx;
}

void check_two_classes(const std::vector<double>& scores, const std::vector<int>& labels) {
    if (scores.size() != labels.size())
        throw ConfigError("metric: scores and labels differ in length");
    int pos = 0, neg = 0;
    for (int l : labels) (l ? pos : neg) += 1;
    if (pos == 0 || neg == 0)
        throw DataError("metric: needs at least one positive and one negative label");
}

}  // namespace

double average_precision(const std::vector<double>& scores, const std::vector<int>& labels) {
    check_two_classes(scores, labels);
    const auto idx = order_desc(scores);
    double ap = 0.0;
    int tp = 0, pos = 0;
    for (int l : labels) pos += l ? 1 : 0;
    for (size_t r = 0; r < idx.size(); ++r) {
        if (labels[idx[r]]) {
            ++tp;
            ap += static_cast<double>(tp) / static_cast<double>(r + 1);
        }
    }
    return ap / pos;
}

double roc_auc(const std::vector<double>& scores, const std::vector<int>& labels) {
    check_two_classes(scores, labels);
    // average ranks with ties, then the Mann-Whitney statistic
    std::vector<size_t> idx(scores.size());
    std::iota(idx.begin(), idx.end(), size_t{0});
    std::sort(idx.begin(), idx.end(), [&](size_t a, size_t b) { return scores[a] < scores[b]; });
    std::vector<double> rank(scores.size());
    size_t i = 0;
    while (i < idx.size()) {
        size_t j = i;
        while (j + 1 < idx.size() && scores[idx[j + 1]] == scores[idx[i]]) ++j;
        const double avg = 0.5 * (static_cast<double>(i + 1) + static_cast<double>(j + 1));
        for (size_t t = i; t <= j; ++t) rank[idx[t]] = avg;
        i = j + 1;
    }
    double rank_sum = 0.0;
    int64_t pos = 0, neg = 0;
    for (size_t t = 0; t < labels.size(); ++t) {
        if (labels[t]) {
            rank_sum += rank[t];
            ++pos;
        } else {
            ++neg;
        }
    }
    const double u = rank_sum - static_cast<double>(pos) * (static_cast<double>(pos) + 1.0) / 2.0;
    return u / (static_cast<double>(pos) * static_cast<double>(neg));
}

namespace {

int type_row(OutlierType t) {
    switch (t) {
        case OutlierType::hunger: return 0;
        case OutlierType::work: return 1;
        case OutlierType::social: return 2;
        default: return -1;
    }
}

int intensity_col(Intensity i) {
    switch (i) {
        case Intensity::red: return 0;
        case Intensity::orange: return 1;
        case Intensity::yellow: return 2;
        default: return -1;
    }
}

}  // namespace

int Breakdown::hits_of(OutlierType t) const {
    const int r = type_row(t);
    if (r < 0) return 0;
    return hits[r][0] + hits[r][1] + hits[r][2];
}

int Breakdown::totals_of(OutlierType t) const {
    const int r = type_row(t);
    if (r < 0) return 0;
    return totals[r][0] + totals[r][1] + totals[r][2];
}

Breakdown breakdown(const std::vector<std::string>& ranked_users, const LabelTable& labels, int k) {
    if (k < 0 || k > static_cast<int>(ranked_users.size()))
        throw ConfigError("breakdown: k out of range");
    Breakdown out;
    for (const auto& [user, row] : labels) {
        if (!row.is_outlier) continue;
        const int r = type_row(row.type), c = intensity_col(row.intensity);
        if (r >= 0 && c >= 0) ++out.totals[r][c];
    }
    for (int i = 0; i < k; ++i) {
        auto it = labels.find(ranked_users[static_cast<size_t>(i)]);
        if (it == labels.end() || !it->second.is_outlier) continue;
        ++out.total_hits;
        const int r = type_row(it->second.type), c = intensity_col(it->second.intensity);
        if (r >= 0 && c >= 0) ++out.hits[r][c];
    }
    return out;
}

std::vector<std::pair<std::string, double>> distance_baseline(const Dataset& ds) {
    std::vector<std::pair<std::string, double>> out;
    for (const auto& user : ds.users) {
        std::vector<double> train, test;
        for (const auto& day : ds.days_of(user)) {
            const double dist = travel_distance(day);
            (day.day_index < ds.split_day ? train : test).push_back(dist);
        }
        double score = 0.0;
        if (!train.empty() && !test.empty()) {
            const double mt = std::accumulate(train.begin(), train.end(), 0.0) / train.size();
            const double me = std::accumulate(test.begin(), test.end(), 0.0) / test.size();
            double var = 0.0;
            for (double v : train) var += (v - mt) * (v - mt);
            const double sd = std::sqrt(var / train.size());
            score = std::abs(me - mt) / (sd + 1e-9);
        }
        out.emplace_back(user, score);
    }
    std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    });
    return out;
}

std::vector<std::string> ranking_of_channel(const std::vector<UserScore>& scores,
                                            const std::string& channel) {
    std::vector<std::pair<std::string, double>> vals;
    for (const auto& s : scores) {
        double v;
        if (channel == "cross_time")
            v = s.cross_time_defined ? s.cross_time : -1e300;
        else if (channel == "cross_population")
            v = s.cross_population;
        else if (channel == "fused")
            v = s.fused;
        else
            throw ConfigError("unknown score channel '" + channel + "'");
        vals.emplace_back(s.user_id, v);
    }
    std::sort(vals.begin(), vals.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    });
    std::vector<std::string> out;
    out.reserve(vals.size());
    for (auto& [u, v] : vals) out.push_back(std::move(u));
    return out;
}

std::vector<ChannelMetrics> evaluate_scores(const std::vector<UserScore>& scores,
                                            const LabelTable& labels, int k) {
    const int n = static_cast<int>(scores.size());
    if (k <= 0) k = (n + 9) / 10;  // ceil(0.1 * users)
    k = std::min(k, n);

    std::vector<ChannelMetrics> out;
    for (const std::string channel : {"cross_time", "cross_population", "fused"}) {
        std::vector<double> vals;
        std::vector<int> y;
        for (const auto& s : scores) {
            double v;
            if (channel == "cross_time")
                v = s.cross_time_defined ? s.cross_time : -1e300;
            else if (channel == "cross_population")
                v = s.cross_population;
            else
                v = s.fused;
            vals.push_back(v);
            auto it = labels.find(s.user_id);
            y.push_back(it != labels.end() && it->second.is_outlier ? 1 : 0);
        }
        ChannelMetrics m;
        m.channel = channel;
        m.ap = average_precision(vals, y);
        m.auc = roc_auc(vals, y);
        const auto ranked = ranking_of_channel(scores, channel);
        m.top10 = top_k_hits(ranked, labels, std::min(10, n));
        m.top_k = top_k_hits(ranked, labels, k);
        m.k = k;
        out.push_back(std::move(m));
    }
    return out;
}

TransferResult transfer_eval(const std::string& checkpoint_path, const Dataset& target,
                             const LabelTable& labels, const ScoreConfig& cfg, int k) {
    const TrajModel model = TrajModel::load(checkpoint_path);
    TransferResult out;
    out.scores = score_dataset(model, target, cfg);
    out.metrics = evaluate_scores(out.scores, labels, k);
    return out;
}

void write_report(const std::string& path, const EvalReport& r) {
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw DataError("cannot write report " + path);
    os << std::setprecision(17);
    os << "config_hash=" << r.config_hash << "\n";
    if (!r.config_text.empty()) {
        std::istringstream cfg(r.config_text);
        std::string line;
        while (std::getline(cfg, line)) os << "# config: " << line << "\n";
    }
    os << "users=" << r.users << "\n";
    os << "outliers=" << r.outliers << "\n";
    os << "k=" << r.k << "\n";
    for (const auto& [label, channels] : r.rows) {
        for (const auto& m : channels) {
            os << "[" << label << " " << m.channel << "] ap=" << m.ap << " auc=" << m.auc
               << " top10=" << m.top10 << " top" << m.k << "=" << m.top_k << "\n";
        }
    }
    const char* type_names[3] = {"hunger", "work", "social"};
    for (const auto& [channel, bd] : r.breakdowns) {
        os << "[breakdown " << channel << " k=" << r.k << "]\n";
        os << "type,red,red_total,orange,orange_total,yellow,yellow_total,hits,total\n";
        for (int t = 0; t < 3; ++t) {
            os << type_names[t];
            int h = 0, n = 0;
            for (int c = 0; c < 3; ++c) {
                os << "," << bd.hits[t][c] << "," << bd.totals[t][c];
                h += bd.hits[t][c];
                n += bd.totals[t][c];
            }
            os << "," << h << "," << n << "\n";
        }
        os << "total_hits=" << bd.total_hits << "\n";
    }
    if (r.baseline_auc >= 0.0)
        os << "[baseline distance] ap=" << r.baseline_ap << " auc=" << r.baseline_auc << "\n";
    if (!r.timing_lines.empty()) {
        os << "[timings]\n";
        for (const auto& l : r.timing_lines) os << l << "\n";
    }
    if (!os) throw DataError("write failed for " + path);
}

}  // namespace trajod
