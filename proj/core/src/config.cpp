#include "trajod/config.hpp"

#include <algorithm>
#include <fstream>
#include <ostream>
#include <sstream>

#include "trajod/errors.hpp"
#include "trajod/rng.hpp"

namespace trajod {

namespace {

std::string trim(const std::string& s) {
    size_t b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    size_t e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

const std::vector<Config::Entry> kRegistry = {
    // simulation
    {"sim.seed", "1", "master seed for the generator"},
    {"sim.agents", "200", "number of simulated agents"},
    {"sim.normal_days", "63", "days of normal behavior before outlier onset"},
    {"sim.outlier_days", "14", "days after onset during which outlier agents misbehave"},
    {"sim.homes", "0", "home POIs on the map (0 = one per agent)"},
    {"sim.workplaces", "12", "workplace POIs on the map"},
    {"sim.restaurants", "15", "restaurant POIs on the map"},
    {"sim.recreations", "10", "recreation POIs on the map"},
    {"sim.pubs", "5", "pub POIs on the map"},
    {"sim.hunger_red", "0", "hunger outliers at red intensity"},
    {"sim.hunger_orange", "0", "hunger outliers at orange intensity"},
    {"sim.hunger_yellow", "0", "hunger outliers at yellow intensity"},
    {"sim.work_red", "0", "work outliers at red intensity"},
    {"sim.work_orange", "0", "work outliers at orange intensity"},
    {"sim.work_yellow", "0", "work outliers at yellow intensity"},
    {"sim.social_red", "0", "social outliers at red intensity"},
    {"sim.social_orange", "0", "social outliers at orange intensity"},
    {"sim.social_yellow", "0", "social outliers at yellow intensity"},
    {"sim.hunger_accel", "3", "hunger clock speedup on triggered hunger-outlier days"},
    {"sim.recreation_prob", "0.5", "per-evening probability of a recreation visit"},
    {"sim.favorite_restaurants", "3", "restaurants each agent rotates between"},
    {"sim.favorite_recreations", "2", "recreation venues each agent favors"},
    {"sim.hunger_hours_min", "4", "lower bound of per-agent hunger period (hours)"},
    {"sim.hunger_hours_max", "6", "upper bound of per-agent hunger period (hours)"},
    // dataset
    {"data.cutoff_len", "16", "max check-ins kept per day (chronological prefix)"},
    {"data.test_days", "14", "days at the end of the range forming the test split"},
    // model / training
    {"train.arch", "cnn", "encoder architecture: mlp | rnn | cnn | transformer"},
    {"train.dim", "64", "embedding dimension shared by all modalities"},
    {"train.layers", "4", "encoder layers"},
    {"train.heads", "4", "attention heads (transformer only)"},
    {"train.epochs", "200", "total training epochs (first quarter aligns mappers)"},
    {"train.batch", "128", "anchors per optimizer step"},
    {"train.align_temp", "0.1", "temperature of the modality alignment loss"},
    {"train.consistency_temp", "0.1", "temperature of the day-pattern consistency loss"},
    {"train.beta", "0.1", "weight of the clustering term in the joint objective"},
    {"train.centroids", "10", "learnable centroid count"},
    {"train.freq", "7", "day-pattern repetition frequency"},
    {"train.negatives", "16", "negative trajectories per anchor"},
    {"train.max_positives", "4", "positive trajectories sampled per anchor"},
    {"train.align_epochs", "-1", "alignment phase length (-1 = epochs/4)"},
    {"train.steps_per_epoch", "1", "optimizer steps per epoch in the main phase"},
    {"train.align_steps_per_epoch", "8", "optimizer steps per epoch in the alignment phase"},
    {"train.micro_batch", "32", "anchors encoded per backward slice of a step"},
    {"train.in_batch_negatives", "true", "draw negatives from co-sampled batch anchors"},
    {"train.cluster_mode", "softmin", "soft-assignment weighting: softmin | paper"},
    {"train.cluster_temp", "1.0", "softmin assignment temperature"},
    {"train.lr0", "0.005", "initial learning rate"},
    {"train.lr_decay", "0.9", "learning-rate decay factor"},
    {"train.lr_step_epochs", "50", "epochs between learning-rate decays"},
    {"train.seed", "1", "training seed (init, batch sampling)"},
    {"train.ablate", "none", "channel ablation: none | no-semantic | no-spatial | no-temporal"},
    {"train.joint_align", "false", "single-phase training with weighted alignment term"},
    {"train.lambda_align", "0.1", "alignment weight under train.joint_align"},
    // semantic embedder
    {"semantic.mode", "seeded", "category embeddings: seeded | file"},
    {"semantic.seed", "7", "seed of the frozen category embedding table"},
    {"semantic.file", "", "external embedding file (semantic.mode = file)"},
    // scoring
    {"score.mode", "closest", "centroid comparison: closest | paper-eq11"},
    {"score.w_time", "0.5", "fusion weight of the cross-time channel"},
    {"score.w_pop", "0.5", "fusion weight of the cross-population channel"},
    {"score.window_days", "0", "scored window length (0 = dataset test split)"},
    // evaluation
    {"eval.k", "0", "Top-K cutoff (0 = report 10 and ceil(0.1 * users))"},
    // runtime
    {"threads", "1", "worker threads for simulation and scoring"},
};

const Config::Entry* find_entry(const std::string& key) {
    for (const auto& e : kRegistry)
        if (e.key == key) return &e;
    return nullptr;
}

}  // namespace

const std::vector<Config::Entry>& Config::registry() { return kRegistry; }

Config Config::defaults() {
    Config c;
    for (const auto& e : kRegistry) c.values_[e.key] = e.default_value;
    return c;
}

Config Config::load(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw ConfigError("cannot open config file " + path);
    Config c = defaults();
    std::string line;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        const size_t hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError(path + ":" + std::to_string(lineno) + ": expected key = value");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        try {
            c.set(key, value);
        } catch (const ConfigError& e) {
            throw ConfigError(path + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }
    return c;
}

void Config::set(const std::string& key, const std::string& value) {
    if (!find_entry(key)) throw ConfigError("unknown config key '" + key + "'");
    values_[key] = value;
}

std::string Config::get_str(const std::string& key) const {
    auto it = values_.find(key);
    if (it == values_.end()) throw ConfigError("unknown config key '" + key + "'");
    return it->second;
}

int Config::get_int(const std::string& key) const {
    return static_cast<int>(get_i64(key));
}

int64_t Config::get_i64(const std::string& key) const {
    const std::string v = get_str(key);
    try {
        size_t pos = 0;
        int64_t out = std::stoll(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return out;
    } catch (const std::exception&) {
        throw ConfigError("config key '" + key + "': '" + v + "' is not an integer");
    }
}

uint64_t Config::get_u64(const std::string& key) const {
    const std::string v = get_str(key);
    try {
        size_t pos = 0;
        uint64_t out = std::stoull(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return out;
    } catch (const std::exception&) {
        throw ConfigError("config key '" + key + "': '" + v + "' is not an unsigned integer");
    }
}

double Config::get_double(const std::string& key) const {
    const std::string v = get_str(key);
    try {
        size_t pos = 0;
        double out = std::stod(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return out;
    } catch (const std::exception&) {
        throw ConfigError("config key '" + key + "': '" + v + "' is not a number");
    }
}

bool Config::get_bool(const std::string& key) const {
    const std::string v = get_str(key);
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw ConfigError("config key '" + key + "': '" + v + "' is not a boolean");
}

std::string Config::resolved_text() const {
    std::ostringstream os;
    for (const auto& [k, v] : values_) os << k << " = " << v << "\n";
    return os.str();
}

std::string Config::hash_hex() const {
    const uint64_t h = fnv1a(resolved_text());
    std::ostringstream os;
    os << std::hex;
    for (int i = 15; i >= 0; --i) os << ((h >> (4 * i)) & 0xf);
    return os.str();
}

void Config::print_help(std::ostream& os) {
    os << "Configuration keys (key = value per line, # comments):\n";
    for (const auto& e : kRegistry) {
        os << "  " << e.key;
        for (size_t i = e.key.size(); i < 28; ++i) os << ' ';
        os << "default: " << (e.default_value.empty() ? "<empty>" : e.default_value);
        os << "  " << e.description << "\n";
    }
}

}  // namespace trajod
