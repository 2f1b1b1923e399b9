#include "trajod/polsim.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <future>
#include <sstream>

#include "trajod/errors.hpp"

namespace trajod {

namespace {

constexpr int64_t kDay = 86400;
constexpr int64_t kSlot = 900;  // 15-minute grid

int64_t snap(double nominal_sec, SeededRng& rng) {
    int64_t slot = static_cast<int64_t>(nominal_sec / static_cast<double>(kSlot) + 0.5);
    slot += rng.choice(3) - 1;  // jitter one slot either way
    slot = std::clamp<int64_t>(slot, 0, kDay / kSlot - 1);
    return slot * kSlot;
}

std::string stream_key(const char* tag, const std::string& uid, int day) {
    std::ostringstream os;
    os << tag << '|' << uid << '|' << day;
    return os.str();
}

}  // namespace

std::string to_string(PoiCategory c) {
    switch (c) {
        case PoiCategory::Home: return "Home";
        case PoiCategory::Workplace: return "Workplace";
        case PoiCategory::Restaurant: return "Restaurant";
        case PoiCategory::Recreation: return "Recreation";
        case PoiCategory::Pub: return "Pub";
    }
    return "Home";
}

std::vector<int> PoiMap::ids_of(PoiCategory c) const {
    std::vector<int> out;
    for (const auto& p : pois)
        if (p.category == c) out.push_back(p.id);
    return out;
}

std::vector<int> PoiMap::recreation_ids() const {
    std::vector<int> out;
    for (const auto& p : pois)
        if (p.category == PoiCategory::Recreation || p.category == PoiCategory::Pub)
            out.push_back(p.id);
    return out;
}

SimConfig SimConfig::from(const Config& cfg) {
    SimConfig sc;
    sc.seed = cfg.get_u64("sim.seed");
    sc.n_agents = cfg.get_int("sim.agents");
    sc.n_normal_days = cfg.get_int("sim.normal_days");
    sc.n_outlier_days = cfg.get_int("sim.outlier_days");
    sc.homes = cfg.get_int("sim.homes");
    sc.workplaces = cfg.get_int("sim.workplaces");
    sc.restaurants = cfg.get_int("sim.restaurants");
    sc.recreations = cfg.get_int("sim.recreations");
    sc.pubs = cfg.get_int("sim.pubs");
    const char* types[3] = {"hunger", "work", "social"};
    const char* lvls[3] = {"red", "orange", "yellow"};
    for (int t = 0; t < 3; ++t)
        for (int l = 0; l < 3; ++l)
            sc.counts[t][l] = cfg.get_int(std::string("sim.") + types[t] + "_" + lvls[l]);
    sc.hunger_accel = cfg.get_double("sim.hunger_accel");
    sc.recreation_prob = cfg.get_double("sim.recreation_prob");
    sc.favorite_restaurants = cfg.get_int("sim.favorite_restaurants");
    sc.favorite_recreations = cfg.get_int("sim.favorite_recreations");
    sc.hunger_hours_min = cfg.get_double("sim.hunger_hours_min");
    sc.hunger_hours_max = cfg.get_double("sim.hunger_hours_max");
    sc.threads = cfg.get_int("threads");
    sc.validate();
    return sc;
}

void SimConfig::validate() const {
    if (n_agents < 1) throw ConfigError("sim.agents must be >= 1");
    if (n_normal_days < 1) throw ConfigError("sim.normal_days must be >= 1");
    if (n_outlier_days < 1) throw ConfigError("sim.outlier_days must be >= 1");
    if (homes < 0) throw ConfigError("sim.homes must be >= 0");
    if (workplaces < 1 || restaurants < 1 || recreations < 1 || pubs < 1)
        throw ConfigError("every POI category needs at least one entry");
    for (int t = 0; t < 3; ++t)
        for (int l = 0; l < 3; ++l)
            if (counts[t][l] < 0) throw ConfigError("outlier counts must be >= 0");
    if (outlier_count() > n_agents)
        throw ConfigError("outlier counts (" + std::to_string(outlier_count()) +
                          ") exceed sim.agents (" + std::to_string(n_agents) + ")");
    if (hunger_accel <= 1.0) throw ConfigError("sim.hunger_accel must be > 1");
    if (recreation_prob < 0.0 || recreation_prob > 1.0)
        throw ConfigError("sim.recreation_prob must be in [0, 1]");
    if (favorite_restaurants < 1 || favorite_recreations < 1)
        throw ConfigError("favorite counts must be >= 1");
    if (hunger_hours_min <= 0.0 || hunger_hours_max < hunger_hours_min)
        throw ConfigError("invalid hunger period range");
    if (threads < 1) throw ConfigError("threads must be >= 1");
}

int SimConfig::outlier_count() const {
    int n = 0;
    for (int t = 0; t < 3; ++t)
        for (int l = 0; l < 3; ++l) n += counts[t][l];
    return n;
}

PoiMap generate_map(const SimConfig& cfg) {
    cfg.validate();
    PoiMap map;
    map.seed = cfg.seed;
    SeededRng rng(cfg.seed, "map");
    auto place = [&](int count, PoiCategory cat) {
        for (int i = 0; i < count; ++i) {
            Poi p;
            p.id = static_cast<int>(map.pois.size());
            p.x = rng.uniform();
            p.y = rng.uniform();
            p.category = cat;
            map.pois.push_back(p);
        }
    };
    place(cfg.homes == 0 ? cfg.n_agents : cfg.homes, PoiCategory::Home);
    place(cfg.workplaces, PoiCategory::Workplace);
    place(cfg.restaurants, PoiCategory::Restaurant);
    place(cfg.recreations, PoiCategory::Recreation);
    place(cfg.pubs, PoiCategory::Pub);
    return map;
}

double intensity_prob(Intensity i) {
    switch (i) {
        case Intensity::red: return 1.0;
        case Intensity::orange: return 0.5;
        case Intensity::yellow: return 0.2;
        default: return 0.0;
    }
}

namespace {

void schedule_meals(DayPlan& plan, const DayContext& ctx, SeededRng& rng, double period_hours,
                    int64_t day_start, int64_t wake_t, int64_t return_t) {
    const auto& agent = *ctx.agent;
    const int64_t period = static_cast<int64_t>(period_hours * 3600.0);
    int64_t next = wake_t - day_start + period;
    while (next <= return_t - day_start - 1800) {
        PlannedVisit v;
        v.purpose = VisitPurpose::meal;
        if (next >= 10 * 3600 && next <= 21 * 3600) {
            v.poi = agent.favorite_restaurants[static_cast<size_t>(
                rng.choice(static_cast<int64_t>(agent.favorite_restaurants.size())))];
        } else {
            v.poi = agent.home_poi;
        }
        v.t = day_start + snap(static_cast<double>(next), rng);
        plan.visits.push_back(v);
        next += period;
    }
}

}  // namespace

DayPlan plan_normal_day(const DayContext& ctx, SeededRng& rng) {
    const auto& agent = *ctx.agent;
    const auto& cfg = *ctx.cfg;
    const int64_t day_start = static_cast<int64_t>(ctx.day) * kDay;

    DayPlan plan;
    const int64_t wake_t = day_start + snap(7.0 * 3600.0, rng);
    plan.visits.push_back({agent.home_poi, wake_t, VisitPurpose::wake});

    if (ctx.weekday < 5) {
        const int64_t work_t = day_start + snap(9.0 * 3600.0, rng);
        plan.visits.push_back({agent.work_poi, work_t, VisitPurpose::work});
    }

    const int64_t return_t = day_start + snap(22.0 * 3600.0, rng);
    schedule_meals(plan, ctx, rng, agent.hunger_period_hours, day_start, wake_t, return_t);

    if (rng.uniform() < cfg.recreation_prob) {
        const int venue = agent.favorite_recreation[static_cast<size_t>(
            rng.choice(static_cast<int64_t>(agent.favorite_recreation.size())))];
        plan.visits.push_back({venue, day_start + snap(19.5 * 3600.0, rng), VisitPurpose::recreation});
    }

    plan.visits.push_back({agent.home_poi, return_t, VisitPurpose::return_home});
    std::stable_sort(plan.visits.begin(), plan.visits.end(),
                     [](const PlannedVisit& a, const PlannedVisit& b) { return a.t < b.t; });
    return plan;
}

DayPlan inject(OutlierType type, Intensity intensity, DayPlan plan, const DayContext& ctx,
               SeededRng& rng) {
    if (type == OutlierType::none && intensity == Intensity::none) return plan;
    if (type == OutlierType::none || intensity == Intensity::none)
        throw ConfigError("inject: outlier type and intensity must both be set");

    if (!rng.bernoulli(intensity_prob(intensity))) return plan;

    switch (type) {
        case OutlierType::work: {
            std::erase_if(plan.visits,
                          [](const PlannedVisit& v) { return v.purpose == VisitPurpose::work; });
            break;
        }
        case OutlierType::hunger: {
            // faster hunger clock for the day: drop the planned meals and
            // reschedule at the accelerated period
            int64_t wake_t = 0, return_t = 0;
            for (const auto& v : plan.visits) {
                if (v.purpose == VisitPurpose::wake) wake_t = v.t;
                if (v.purpose == VisitPurpose::return_home) return_t = v.t;
            }
            std::erase_if(plan.visits,
                          [](const PlannedVisit& v) { return v.purpose == VisitPurpose::meal; });
            const int64_t day_start = static_cast<int64_t>(ctx.day) * kDay;
            schedule_meals(plan, ctx, rng, ctx.agent->hunger_period_hours / ctx.cfg->hunger_accel,
                           day_start, wake_t, return_t);
            std::stable_sort(plan.visits.begin(), plan.visits.end(),
                             [](const PlannedVisit& a, const PlannedVisit& b) { return a.t < b.t; });
            break;
        }
        case OutlierType::social: {
            const std::vector<int> all_rec = ctx.map->recreation_ids();
            for (auto& v : plan.visits) {
                if (v.purpose == VisitPurpose::recreation)
                    v.poi = all_rec[static_cast<size_t>(rng.choice(static_cast<int64_t>(all_rec.size())))];
            }
            break;
        }
        default:
            throw ConfigError("inject: unknown outlier type");
    }
    return plan;
}

std::vector<AgentProfile> build_profiles(const SimConfig& cfg, const PoiMap& map) {
    const std::vector<int> homes = map.ids_of(PoiCategory::Home);
    const std::vector<int> works = map.ids_of(PoiCategory::Workplace);
    const std::vector<int> rests = map.ids_of(PoiCategory::Restaurant);
    const std::vector<int> recs = map.recreation_ids();

    std::vector<AgentProfile> agents(static_cast<size_t>(cfg.n_agents));
    int digits = 1;
    for (int v = cfg.n_agents - 1; v >= 10; v /= 10) ++digits;
    for (int i = 0; i < cfg.n_agents; ++i) {
        auto& a = agents[static_cast<size_t>(i)];
        std::ostringstream os;
        os << "a";
        std::string num = std::to_string(i);
        for (int d = static_cast<int>(num.size()); d < digits; ++d) os << '0';
        os << num;
        a.user_id = os.str();

        SeededRng rng(cfg.seed, "agent|" + a.user_id);
        a.home_poi = cfg.homes == 0 ? homes[static_cast<size_t>(i)]
                                    : homes[static_cast<size_t>(rng.choice(static_cast<int64_t>(homes.size())))];
        a.work_poi = works[static_cast<size_t>(rng.choice(static_cast<int64_t>(works.size())))];
        const int kr = std::min<int>(cfg.favorite_restaurants, static_cast<int>(rests.size()));
        for (int idx : rng.sample_indices(static_cast<int>(rests.size()), kr))
            a.favorite_restaurants.push_back(rests[static_cast<size_t>(idx)]);
        const int kc = std::min<int>(cfg.favorite_recreations, static_cast<int>(recs.size()));
        for (int idx : rng.sample_indices(static_cast<int>(recs.size()), kc))
            a.favorite_recreation.push_back(recs[static_cast<size_t>(idx)]);
        a.hunger_period_hours = rng.uniform(cfg.hunger_hours_min, cfg.hunger_hours_max);
    }

    // deterministic outlier assignment: shuffled agent order, fixed spec order
    std::vector<int> order(static_cast<size_t>(cfg.n_agents));
    for (int i = 0; i < cfg.n_agents; ++i) order[static_cast<size_t>(i)] = i;
    SeededRng arng(cfg.seed, "outlier-assign");
    arng.shuffle(order);
    const OutlierType types[3] = {OutlierType::hunger, OutlierType::work, OutlierType::social};
    const Intensity lvls[3] = {Intensity::red, Intensity::orange, Intensity::yellow};
    size_t cursor = 0;
    for (int t = 0; t < 3; ++t) {
        for (int l = 0; l < 3; ++l) {
            for (int c = 0; c < cfg.counts[t][l]; ++c) {
                auto& a = agents[static_cast<size_t>(order[cursor++])];
                a.outlier = {types[t], lvls[l], cfg.split_day()};
            }
        }
    }
    return agents;
}

namespace {

std::vector<CheckinRecord> simulate_agent(const SimConfig& cfg, const PoiMap& map,
                                          const AgentProfile& agent) {
    std::vector<CheckinRecord> out;
    for (int day = 0; day < cfg.total_days(); ++day) {
        DayContext ctx{&map, &agent, &cfg, day, day % 7};
        SeededRng day_rng(cfg.seed, stream_key("plan", agent.user_id, day));
        DayPlan plan = plan_normal_day(ctx, day_rng);
        if (agent.outlier.type != OutlierType::none && day >= agent.outlier.onset_day) {
            SeededRng inj_rng(cfg.seed, stream_key("inject", agent.user_id, day));
            plan = inject(agent.outlier.type, agent.outlier.intensity, std::move(plan), ctx, inj_rng);
        }
        for (const auto& v : plan.visits) {
            const Poi& poi = map.pois[static_cast<size_t>(v.poi)];
            out.push_back({agent.user_id, v.t, poi.x, poi.y, to_string(poi.category)});
        }
    }
    return out;
}

}  // namespace

SimOutput simulate(const SimConfig& cfg, const PoiMap& map) {
    cfg.validate();
    const auto agents = build_profiles(cfg, map);

    std::vector<std::vector<CheckinRecord>> per_agent(agents.size());
    if (cfg.threads <= 1) {
        for (size_t i = 0; i < agents.size(); ++i) per_agent[i] = simulate_agent(cfg, map, agents[i]);
    } else {
        const int nw = std::min<int>(cfg.threads, static_cast<int>(agents.size()));
        std::vector<std::future<void>> jobs;
        for (int w = 0; w < nw; ++w) {
            jobs.push_back(std::async(std::launch::async, [&, w]() {
                for (size_t i = static_cast<size_t>(w); i < agents.size(); i += static_cast<size_t>(nw))
                    per_agent[i] = simulate_agent(cfg, map, agents[i]);
            }));
        }
        for (auto& j : jobs) j.get();
    }

    SimOutput out;
    for (size_t i = 0; i < agents.size(); ++i) {
        out.labels[agents[i].user_id] = {agents[i].outlier.type != OutlierType::none,
                                         agents[i].outlier.type, agents[i].outlier.intensity};
        for (auto& r : per_agent[i]) out.records.push_back(std::move(r));
    }
    return out;
}

void run_simulation(const SimConfig& cfg, const std::string& out_dir,
                    const std::string& config_hash) {
    namespace fs = std::filesystem;
    fs::create_directories(out_dir);
    const PoiMap map = generate_map(cfg);
    SimOutput sim = simulate(cfg, map);

    const std::string checkins = (fs::path(out_dir) / "checkins.jsonl").string();
    const std::string labels = (fs::path(out_dir) / "labels.csv").string();
    const std::string manifest = (fs::path(out_dir) / "manifest.txt").string();

    write_checkin_records(checkins, BBox{0.0, 0.0, 1.0, 1.0}, 0,
                          {{"config_hash", config_hash}}, std::move(sim.records));
    write_labels(sim.labels, labels, {"config_hash=" + config_hash});

    int outliers = 0;
    for (const auto& [u, row] : sim.labels) outliers += row.is_outlier ? 1 : 0;
    std::ofstream mf(manifest, std::ios::trunc);
    if (!mf) throw DataError("cannot write " + manifest);
    mf << "config_hash=" << config_hash << "\n"
       << "users=" << cfg.n_agents << "\n"
       << "total_days=" << cfg.total_days() << "\n"
       << "split_day=" << cfg.split_day() << "\n"
       << "outliers=" << outliers << "\n"
       << "checkins=checkins.jsonl\n"
       << "labels=labels.csv\n";
}

}  // namespace trajod
