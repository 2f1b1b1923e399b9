#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "trajod/config.hpp"
#include "trajod/data.hpp"
#include "trajod/rng.hpp"

namespace trajod {

enum class PoiCategory { Home, Workplace, Restaurant, Recreation, Pub };

std::string to_string(PoiCategory c);

struct Poi {
    int id = 0;
    double x = 0.0;
    double y = 0.0;
    PoiCategory category = PoiCategory::Home;
};

struct PoiMap {
    std::vector<Poi> pois;
    uint64_t seed = 0;

    std::vector<int> ids_of(PoiCategory c) const;
    /// Recreation venues in the wide sense: Recreation and Pub POIs.
    std::vector<int> recreation_ids() const;
};

struct OutlierSpec {
    OutlierType type = OutlierType::none;
    Intensity intensity = Intensity::none;
    int onset_day = 0;
};

struct AgentProfile {
    std::string user_id;
    int home_poi = 0;
    int work_poi = 0;
    std::vector<int> favorite_restaurants;
    std::vector<int> favorite_recreation;
    double hunger_period_hours = 5.0;
    OutlierSpec outlier;
};

struct SimConfig {
    uint64_t seed = 1;
    int n_agents = 200;
    int n_normal_days = 63;
    int n_outlier_days = 14;
    int homes = 0;  // 0 = one per agent
    int workplaces = 12;
    int restaurants = 15;
    int recreations = 10;
    int pubs = 5;
    // counts[type][intensity]; type: hunger/work/social, intensity: red/orange/yellow
    int counts[3][3] = {{0, 0, 0}, {0, 0, 0}, {0, 0, 0}};
    double hunger_accel = 3.0;
    double recreation_prob = 0.5;
    int favorite_restaurants = 3;
    int favorite_recreations = 2;
    double hunger_hours_min = 4.0;
    double hunger_hours_max = 6.0;
    int threads = 1;

    static SimConfig from(const Config& cfg);
    void validate() const;
    int outlier_count() const;
    int total_days() const { return n_normal_days + n_outlier_days; }
    int split_day() const { return n_normal_days; }
};

/// Uniformly places the configured POIs on the unit square. Deterministic
/// given the config seed.
PoiMap generate_map(const SimConfig& cfg);

enum class VisitPurpose { wake, work, meal, recreation, return_home };

struct PlannedVisit {
    int poi = 0;
    int64_t t = 0;  // absolute epoch seconds
    VisitPurpose purpose = VisitPurpose::wake;
};

struct DayPlan {
    std::vector<PlannedVisit> visits;
};

struct DayContext {
    const PoiMap* map = nullptr;
    const AgentProfile* agent = nullptr;
    const SimConfig* cfg = nullptr;
    int day = 0;
    int weekday = 0;  // 0..6, 0..4 are workdays
};

/// Probability that an outlier behavior triggers on a given day.
double intensity_prob(Intensity i);

/// Builds one agent-day schedule: wake at home, weekday work block, meals
/// whenever the hunger clock elapses, an evening recreation visit on a
/// seeded subset of days, return home.
DayPlan plan_normal_day(const DayContext& ctx, SeededRng& day_rng);

/// Applies one day of outlier behavior with the intensity's trigger
/// probability. Untriggered days and (none, none) pass through unchanged.
DayPlan inject(OutlierType type, Intensity intensity, DayPlan plan, const DayContext& ctx,
               SeededRng& inject_rng);

std::vector<AgentProfile> build_profiles(const SimConfig& cfg, const PoiMap& map);

struct SimOutput {
    std::vector<CheckinRecord> records;
    LabelTable labels;
};

SimOutput simulate(const SimConfig& cfg, const PoiMap& map);

/// simulate + write checkins.jsonl, labels.csv and manifest.txt.
void run_simulation(const SimConfig& cfg, const std::string& out_dir,
                    const std::string& config_hash);

}  // namespace trajod
