#include "trajod/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "trajod/errors.hpp"

namespace trajod {

namespace {

constexpr int64_t kSecondsPerDay = 86400;

int64_t day_number(int64_t t) {
    // floor division for negative timestamps
    return t >= 0 ? t / kSecondsPerDay : -((-t + kSecondsPerDay - 1) / kSecondsPerDay);
}

}  // namespace

std::string to_string(OutlierType t) {
    switch (t) {
        case OutlierType::hunger: return "hunger";
        case OutlierType::social: return "social";
        case OutlierType::work: return "work";
        default: return "none";
    }
}

std::string to_string(Intensity i) {
    switch (i) {
        case Intensity::red: return "red";
        case Intensity::orange: return "orange";
        case Intensity::yellow: return "yellow";
        default: return "none";
    }
}

OutlierType outlier_type_from(const std::string& s) {
    if (s == "hunger") return OutlierType::hunger;
    if (s == "social") return OutlierType::social;
    if (s == "work") return OutlierType::work;
    if (s == "none") return OutlierType::none;
    throw DataError("unknown outlier type '" + s + "'");
}

Intensity intensity_from(const std::string& s) {
    if (s == "red") return Intensity::red;
    if (s == "orange") return Intensity::orange;
    if (s == "yellow") return Intensity::yellow;
    if (s == "none") return Intensity::none;
    throw DataError("unknown intensity '" + s + "'");
}

const std::vector<DailyTrajectory>& Dataset::days_of(const std::string& user) const {
    auto it = daily.find(user);
    if (it == daily.end()) throw DataError("dataset: unknown user '" + user + "'");
    return it->second;
}

std::set<int> day_pattern_set(int d, int f, int du) {
    std::set<int> out;
    if (f < 1 || d < 1 || d > du) return out;
    for (int q = 1;; ++q) {
        const int fwd = d + f * q;
        const int back = d - f * q;
        bool any = false;
        if (fwd <= du) {
            out.insert(fwd);
            any = true;
        }
        if (back >= 1) {
            out.insert(back);
            any = true;
        }
        if (!any) break;
    }
    return out;
}

Dataset segment_daily(const std::map<std::string, std::vector<StayPoint>>& checkins,
                      int cutoff_len, int epoch_weekday) {
    if (cutoff_len < 1) throw ConfigError("segment_daily: cutoff_len must be >= 1");
    Dataset ds;
    ds.cutoff_len = cutoff_len;
    ds.epoch_weekday = ((epoch_weekday % 7) + 7) % 7;
    if (checkins.empty()) return ds;

    bool any_point = false;
    int64_t min_day = 0, max_day = 0;
    for (const auto& [user, pts] : checkins) {
        int64_t prev = INT64_MIN;
        for (const auto& p : pts) {
            if (p.t < prev)
                throw DataError("segment_daily: check-ins for user '" + user +
                                "' not sorted at t=" + std::to_string(p.t));
            prev = p.t;
            const int64_t dn = day_number(p.t);
            if (!any_point) {
                min_day = max_day = dn;
                any_point = true;
            } else {
                min_day = std::min(min_day, dn);
                max_day = std::max(max_day, dn);
            }
        }
    }
    if (!any_point) return ds;

    ds.epoch_day = min_day;
    ds.total_days = static_cast<int>(max_day - min_day + 1);
    for (const auto& [user, pts] : checkins) {
        auto& days = ds.daily[user];
        days.resize(static_cast<size_t>(ds.total_days));
        for (int d = 0; d < ds.total_days; ++d) {
            days[static_cast<size_t>(d)].user_id = user;
            days[static_cast<size_t>(d)].day_index = d;
            days[static_cast<size_t>(d)].weekday = (d + ds.epoch_weekday) % 7;
        }
        for (const auto& p : pts) {
            const int d = static_cast<int>(day_number(p.t) - min_day);
            auto& traj = days[static_cast<size_t>(d)];
            if (static_cast<int>(traj.points.size()) < cutoff_len) traj.points.push_back(p);
            ds.vocabulary.insert(p.category);
        }
        for (auto& traj : days) traj.valid_len = static_cast<int>(traj.points.size());
        ds.users.push_back(user);
    }
    std::sort(ds.users.begin(), ds.users.end());
    ds.split_day = ds.total_days;  // all train until a split is assigned
    return ds;
}

namespace {

double normalize_coord(double v, double lo, double hi, int* clamped) {
    const double w = hi - lo;
    double out = w > 0.0 ? (v - lo) / w : 0.5;
    if (out < 0.0 || out > 1.0) {
        out = std::clamp(out, 0.0, 1.0);
        ++*clamped;
    }
    return out;
}

}  // namespace

CheckinFile load_checkins(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw DataError("cannot open check-in file " + path);
    CheckinFile out;

    std::string line;
    int lineno = 0;
    bool have_header = false;
    std::map<std::string, std::vector<StayPoint>> raw;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.empty()) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception&) {
            throw DataError(path + ":" + std::to_string(lineno) + ": malformed record");
        }
        if (!j.is_object())
            throw DataError(path + ":" + std::to_string(lineno) + ": record is not an object");

        if (!have_header) {
            if (!j.contains("minx") || !j.contains("miny") || !j.contains("maxx") ||
                !j.contains("maxy") || !j.contains("epoch_weekday"))
                throw DataError(path + ":1: first line must be the header record");
            out.bbox = {j["minx"].get<double>(), j["miny"].get<double>(),
                        j["maxx"].get<double>(), j["maxy"].get<double>()};
            out.epoch_weekday = j["epoch_weekday"].get<int>();
            if (out.epoch_weekday < 0 || out.epoch_weekday > 6)
                throw DataError(path + ":1: epoch_weekday out of range");
            for (auto it = j.begin(); it != j.end(); ++it) {
                const std::string& k = it.key();
                if (k == "minx" || k == "miny" || k == "maxx" || k == "maxy" ||
                    k == "epoch_weekday" || k == "type")
                    continue;
                if (it.value().is_string())
                    out.header_extras[k] = it.value().get<std::string>();
                else
                    out.header_extras[k] = it.value().dump();
            }
            have_header = true;
            continue;
        }

        StayPoint p;
        std::string user;
        try {
            user = j.at("user").get<std::string>();
            p.t = j.at("t").get<int64_t>();
            p.x = j.at("x").get<double>();
            p.y = j.at("y").get<double>();
            p.category = j.at("category").get<std::string>();
        } catch (const nlohmann::json::exception&) {
            throw DataError(path + ":" + std::to_string(lineno) + ": missing or mistyped field");
        }
        if (user.empty() || p.category.empty())
            throw DataError(path + ":" + std::to_string(lineno) + ": empty user or category");
        for (auto it = j.begin(); it != j.end(); ++it) {
            const std::string& k = it.key();
            if (k != "user" && k != "t" && k != "x" && k != "y" && k != "category")
                ++out.unknown_field_warnings;
        }
        raw[user].push_back(std::move(p));
    }

    for (auto& [user, pts] : raw) {
        for (auto& p : pts) {
            p.x = normalize_coord(p.x, out.bbox.minx, out.bbox.maxx, &out.clamped_coordinates);
            p.y = normalize_coord(p.y, out.bbox.miny, out.bbox.maxy, &out.clamped_coordinates);
        }
        out.streams[user] = std::move(pts);
    }
    return out;
}

void write_checkin_records(const std::string& path, const BBox& bbox, int epoch_weekday,
                           const std::map<std::string, std::string>& header_extras,
                           std::vector<CheckinRecord> records) {
    std::stable_sort(records.begin(), records.end(), [](const CheckinRecord& a, const CheckinRecord& b) {
        if (a.user != b.user) return a.user < b.user;
        return a.t < b.t;
    });
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw DataError("cannot write check-in file " + path);
    nlohmann::json header = {{"type", "header"},
                             {"minx", bbox.minx},
                             {"miny", bbox.miny},
                             {"maxx", bbox.maxx},
                             {"maxy", bbox.maxy},
                             {"epoch_weekday", epoch_weekday}};
    for (const auto& [k, v] : header_extras) header[k] = v;
    os << header.dump() << "\n";
    for (const auto& r : records) {
        nlohmann::json j = {{"user", r.user}, {"t", r.t}, {"x", r.x}, {"y", r.y}, {"category", r.category}};
        os << j.dump() << "\n";
    }
    if (!os) throw DataError("write failed for " + path);
}

void write_checkins(const Dataset& ds, const std::string& path,
                    const std::map<std::string, std::string>& header_extras) {
    std::vector<CheckinRecord> records;
    for (const auto& user : ds.users) {
        for (const auto& day : ds.days_of(user)) {
            for (const auto& p : day.points)
                records.push_back({user, p.t, p.x, p.y, p.category});
        }
    }
    write_checkin_records(path, BBox{0.0, 0.0, 1.0, 1.0}, ds.epoch_weekday, header_extras,
                          std::move(records));
}

LabelTable load_labels(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw DataError("cannot open label file " + path);
    LabelTable out;
    std::string line;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#') continue;
        std::stringstream ss(line);
        std::string user, flag, type, intensity;
        if (!std::getline(ss, user, ',') || !std::getline(ss, flag, ',') ||
            !std::getline(ss, type, ',') || !std::getline(ss, intensity))
            throw DataError(path + ":" + std::to_string(lineno) + ": expected 4 comma-separated fields");
        if (flag != "0" && flag != "1")
            throw DataError(path + ":" + std::to_string(lineno) + ": is_outlier must be 0 or 1");
        LabelRow row;
        row.is_outlier = flag == "1";
        try {
            row.type = outlier_type_from(type);
            row.intensity = intensity_from(intensity);
        } catch (const DataError& e) {
            throw DataError(path + ":" + std::to_string(lineno) + ": " + e.what());
        }
        if (!row.is_outlier && (row.type != OutlierType::none || row.intensity != Intensity::none))
            throw DataError(path + ":" + std::to_string(lineno) +
                            ": non-outlier rows must carry type=none intensity=none");
        out[user] = row;
    }
    return out;
}

void write_labels(const LabelTable& labels, const std::string& path,
                  const std::vector<std::string>& comment_lines) {
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw DataError("cannot write label file " + path);
    for (const auto& c : comment_lines) os << "# " << c << "\n";
    for (const auto& [user, row] : labels) {
        os << user << "," << (row.is_outlier ? 1 : 0) << "," << to_string(row.type) << ","
           << to_string(row.intensity) << "\n";
    }
    if (!os) throw DataError("write failed for " + path);
}

Dataset load_dataset(const std::string& path, int cutoff_len, int test_days) {
    CheckinFile f = load_checkins(path);
    Dataset ds = segment_daily(f.streams, cutoff_len, f.epoch_weekday);
    if (test_days < 0 || test_days > ds.total_days)
        throw ConfigError("test_days " + std::to_string(test_days) + " out of range for " +
                          std::to_string(ds.total_days) + " days");
    ds.split_day = ds.total_days - test_days;
    return ds;
}

double travel_distance(const DailyTrajectory& day) {
    double dist = 0.0;
    for (size_t i = 1; i < day.points.size(); ++i) {
        const double dx = day.points[i].x - day.points[i - 1].x;
        const double dy = day.points[i].y - day.points[i - 1].y;
        dist += std::sqrt(dx * dx + dy * dy);
    }
    return dist;
}

}  // namespace trajod
