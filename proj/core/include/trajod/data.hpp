#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace trajod {

enum class OutlierType { none, hunger, social, work };
enum class Intensity { none, red, orange, yellow };

std::string to_string(OutlierType t);
std::string to_string(Intensity i);
OutlierType outlier_type_from(const std::string& s);
Intensity intensity_from(const std::string& s);

/// One check-in: normalized map coordinate, epoch-seconds timestamp and a
/// semantic category string.
struct StayPoint {
    double x = 0.0;
    double y = 0.0;
    int64_t t = 0;
    std::string category;

    bool operator==(const StayPoint&) const = default;
};

/// One user's check-ins on one calendar day, truncated to the dataset cutoff.
/// Only valid points are stored; slots in [valid_len, cutoff_len) are padding.
struct DailyTrajectory {
    std::string user_id;
    int day_index = 0;  // days since dataset epoch
    int weekday = 0;    // 0..6
    std::vector<StayPoint> points;
    int valid_len = 0;

    bool empty() const { return valid_len == 0; }
    bool operator==(const DailyTrajectory&) const = default;
};

struct BBox {
    double minx = 0.0, miny = 0.0, maxx = 1.0, maxy = 1.0;
};

struct Dataset {
    std::vector<std::string> users;  // sorted
    std::map<std::string, std::vector<DailyTrajectory>> daily;  // one entry per calendar day
    std::set<std::string> vocabulary;
    int split_day = 0;  // first test day
    int epoch_weekday = 0;
    int cutoff_len = 16;
    int total_days = 0;
    int64_t epoch_day = 0;  // absolute day number (t / 86400) of day_index 0

    const std::vector<DailyTrajectory>& days_of(const std::string& user) const;
    bool is_train_day(int day_index) const { return day_index < split_day; }
    bool operator==(const Dataset&) const = default;
};

struct LabelRow {
    bool is_outlier = false;
    OutlierType type = OutlierType::none;
    Intensity intensity = Intensity::none;

    bool operator==(const LabelRow&) const = default;
};
using LabelTable = std::map<std::string, LabelRow>;

/// Days sharing day d's weekly phase: {d + f*q | q != 0, 1 <= d + f*q <= D_u}.
/// Day indices here are 1-based.
std::set<int> day_pattern_set(int d, int f, int du);

/// Partitions per-user check-in streams (already coordinate-normalized,
/// sorted by t per user) into calendar days. Every user spans the same
/// global day range; days without check-ins become empty masked
/// trajectories. Each day keeps its first cutoff_len points.
Dataset segment_daily(const std::map<std::string, std::vector<StayPoint>>& checkins,
                      int cutoff_len, int epoch_weekday);

struct CheckinFile {
    BBox bbox;
    int epoch_weekday = 0;
    std::map<std::string, std::vector<StayPoint>> streams;  // normalized coords
    std::map<std::string, std::string> header_extras;
    int unknown_field_warnings = 0;
    int clamped_coordinates = 0;
};

/// Parses the line-delimited check-in format (JSON object per line, first
/// line is the header record with the bounding box and epoch weekday) and
/// min-max normalizes coordinates into the unit square.
CheckinFile load_checkins(const std::string& path);

struct CheckinRecord {
    std::string user;
    int64_t t = 0;
    double x = 0.0;
    double y = 0.0;
    std::string category;
};

/// Writes raw records (sorted by user, then t) under the given header.
void write_checkin_records(const std::string& path, const BBox& bbox, int epoch_weekday,
                           const std::map<std::string, std::string>& header_extras,
                           std::vector<CheckinRecord> records);

/// Serializes a dataset back to the check-in format (unit bounding box).
void write_checkins(const Dataset& ds, const std::string& path,
                    const std::map<std::string, std::string>& header_extras = {});

LabelTable load_labels(const std::string& path);
void write_labels(const LabelTable& labels, const std::string& path,
                  const std::vector<std::string>& comment_lines = {});

/// load_checkins + segment_daily + split assignment. test_days counts from
/// the end of the observed day range.
Dataset load_dataset(const std::string& path, int cutoff_len, int test_days);

/// Euclidean length of the day's point-to-point polyline.
double travel_distance(const DailyTrajectory& day);

}  // namespace trajod
