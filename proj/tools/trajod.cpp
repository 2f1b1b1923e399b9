// trajod: semantic-trajectory outlier detection pipeline.
// Subcommands: simulate, train, score, eval, transfer, help-config.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include "trajod/config.hpp"
#include "trajod/data.hpp"
#include "trajod/errors.hpp"
#include "trajod/evalkit.hpp"
#include "trajod/model.hpp"
#include "trajod/objective.hpp"
#include "trajod/polsim.hpp"
#include "trajod/scoring.hpp"

namespace fs = std::filesystem;
using namespace trajod;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitNumerical = 3;

struct CommonOpts {
    std::string config_path;
    std::optional<uint64_t> seed;
    std::optional<int> threads;
};

Config resolve_config(const CommonOpts& o) {
    Config cfg = o.config_path.empty() ? Config::defaults() : Config::load(o.config_path);
    if (o.seed) {  // --seed overrides every seed in the config
        cfg.set("sim.seed", std::to_string(*o.seed));
        cfg.set("train.seed", std::to_string(*o.seed));
    }
    if (o.threads) cfg.set("threads", std::to_string(*o.threads));
    return cfg;
}

std::string checkins_path(const std::string& data_dir) {
    return (fs::path(data_dir) / "checkins.jsonl").string();
}

std::string labels_path(const std::string& data_dir) {
    return (fs::path(data_dir) / "labels.csv").string();
}

std::vector<std::string> provenance_comments(const Config& cfg) {
    std::vector<std::string> out;
    out.push_back("config_hash=" + cfg.hash_hex());
    std::istringstream text(cfg.resolved_text());
    std::string line;
    while (std::getline(text, line)) out.push_back("config: " + line);
    return out;
}

int cmd_simulate(const CommonOpts& common, const std::string& out_dir) {
    Config cfg = resolve_config(common);
    SimConfig sc = SimConfig::from(cfg);
    run_simulation(sc, out_dir, cfg.hash_hex());
    std::cout << "simulate: wrote " << out_dir << " (hash " << cfg.hash_hex() << ")\n";
    return kExitOk;
}

int cmd_train(const CommonOpts& common, const std::string& data_dir, const std::string& out,
              const std::string& arch_override, const std::string& ablate_override) {
    Config cfg = resolve_config(common);
    if (!arch_override.empty()) cfg.set("train.arch", arch_override);
    if (!ablate_override.empty()) cfg.set("train.ablate", ablate_override);

    Dataset ds = load_dataset(checkins_path(data_dir), cfg.get_int("data.cutoff_len"),
                              cfg.get_int("data.test_days"));
    ModelConfig mc = ModelConfig::from(cfg);
    TrainConfig tc = TrainConfig::from(cfg);

    TrajModel model(mc);
    TrainResult result = train(model, ds, tc);

    model.save(out, {{"config_hash", cfg.hash_hex()},
                     {"config", cfg.resolved_text()},
                     {"epochs", std::to_string(tc.epochs)},
                     {"train_days", std::to_string(ds.split_day)},
                     {"vocabulary", std::to_string(ds.vocabulary.size())}});
    write_training_log(out + ".log", result.log, cfg.hash_hex());
    write_timings(out + ".timings", result.log);
    std::cout << "train: wrote " << out << " (+.log, +.timings)\n";
    return kExitOk;
}

int cmd_score(const CommonOpts& common, const std::string& model_path, const std::string& data_dir,
              const std::string& out, const std::string& mode_override, int window_days) {
    Config cfg = resolve_config(common);
    if (!mode_override.empty()) cfg.set("score.mode", mode_override);
    if (window_days > 0) cfg.set("score.window_days", std::to_string(window_days));

    TrajModel model = TrajModel::load(model_path);
    Dataset ds = load_dataset(checkins_path(data_dir), model.config().cutoff_len,
                              cfg.get_int("data.test_days"));
    ScoreConfig sc = ScoreConfig::from(cfg);
    std::vector<UserScore> scores = score_dataset(model, ds, sc);

    auto comments = provenance_comments(cfg);
    comments.push_back("model=" + model_path);
    comments.push_back("columns=user_id,cross_time,cross_population,fused,rank");
    write_scores(out, scores, comments);
    std::cout << "score: wrote " << out << " (" << scores.size() << " users)\n";
    return kExitOk;
}

int cmd_eval(const CommonOpts& common, const std::string& scores_path, const std::string& labels_file,
             const std::string& report_path, int k, const std::string& data_dir,
             const std::string& timings_path) {
    Config cfg = resolve_config(common);
    if (k > 0) cfg.set("eval.k", std::to_string(k));

    std::vector<UserScore> scores = load_scores(scores_path);
    LabelTable labels = load_labels(labels_file);

    EvalReport report;
    report.config_hash = cfg.hash_hex();
    report.config_text = cfg.resolved_text();
    report.users = static_cast<int>(scores.size());
    for (const auto& [u, row] : labels) report.outliers += row.is_outlier ? 1 : 0;
    const int resolved_k = cfg.get_int("eval.k");
    auto channels = evaluate_scores(scores, labels, resolved_k);
    report.k = channels.empty() ? 0 : channels[0].k;
    report.rows.emplace_back("channel", channels);
    for (const std::string ch : {"cross_time", "cross_population", "fused"})
        report.breakdowns.emplace_back(ch, breakdown(ranking_of_channel(scores, ch), labels, report.k));

    if (!data_dir.empty()) {
        Dataset ds = load_dataset(checkins_path(data_dir), cfg.get_int("data.cutoff_len"),
                                  cfg.get_int("data.test_days"));
        auto base = distance_baseline(ds);
        std::vector<double> vals;
        std::vector<int> y;
        for (const auto& [user, v] : base) {
            vals.push_back(v);
            auto it = labels.find(user);
            y.push_back(it != labels.end() && it->second.is_outlier ? 1 : 0);
        }
        report.baseline_auc = roc_auc(vals, y);
        report.baseline_ap = average_precision(vals, y);
    }
    if (!timings_path.empty()) {
        std::ifstream ts(timings_path);
        if (!ts) throw DataError("cannot open timings file " + timings_path);
        std::string line;
        while (std::getline(ts, line))
            if (!line.empty()) report.timing_lines.push_back(line);
    }

    write_report(report_path, report);
    std::cout << "eval: wrote " << report_path << "\n";
    return kExitOk;
}

int cmd_transfer(const CommonOpts& common, const std::string& model_path, const std::string& data_dir,
                 const std::string& labels_file, const std::string& report_path,
                 const std::string& scratch_model) {
    Config cfg = resolve_config(common);
    Dataset ds = load_dataset(checkins_path(data_dir), cfg.get_int("data.cutoff_len"),
                              cfg.get_int("data.test_days"));
    LabelTable labels = load_labels(labels_file.empty() ? labels_path(data_dir) : labels_file);
    ScoreConfig sc = ScoreConfig::from(cfg);
    const int k = cfg.get_int("eval.k");

    EvalReport report;
    report.config_hash = cfg.hash_hex();
    report.config_text = cfg.resolved_text();
    report.users = static_cast<int>(ds.users.size());
    for (const auto& [u, row] : labels) report.outliers += row.is_outlier ? 1 : 0;

    TransferResult transferred = transfer_eval(model_path, ds, labels, sc, k);
    report.k = transferred.metrics.empty() ? 0 : transferred.metrics[0].k;
    if (!scratch_model.empty()) {
        TransferResult original = transfer_eval(scratch_model, ds, labels, sc, k);
        report.rows.emplace_back("original", original.metrics);
    }
    report.rows.emplace_back("transfer", transferred.metrics);

    write_report(report_path, report);
    std::cout << "transfer: wrote " << report_path << "\n";
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Semantic-trajectory outlier detection toolkit"};
    app.require_subcommand(1);
    app.fallthrough();  // global options may follow the subcommand

    CommonOpts common;
    app.add_option("--config", common.config_path, "flat key = value config file")
        ->check(CLI::ExistingFile);
    uint64_t seed_val = 0;
    auto* seed_opt = app.add_option("--seed", seed_val, "override every config seed");
    int threads_val = 0;
    auto* threads_opt = app.add_option("--threads", threads_val, "worker threads (default 1)");

    // simulate
    auto* sim = app.add_subcommand("simulate", "generate a labeled check-in dataset");
    std::string out_dir;
    sim->add_option("--out-dir", out_dir, "output directory")->required();

    // train
    auto* tr = app.add_subcommand("train", "train the detector on a dataset");
    std::string data_dir, ckpt_out, arch_override, ablate_override;
    tr->add_option("--data", data_dir, "dataset directory (checkins.jsonl)")->required();
    tr->add_option("--out", ckpt_out, "checkpoint output path")->required();
    tr->add_option("--arch", arch_override, "encoder: mlp | rnn | cnn | transformer");
    tr->add_option("--ablate", ablate_override, "none | no-semantic | no-spatial | no-temporal");

    // score
    auto* sco = app.add_subcommand("score", "score users with a trained checkpoint");
    std::string model_path, score_out, mode_override;
    int window_days = 0;
    sco->add_option("--model", model_path, "checkpoint path")->required();
    sco->add_option("--data", data_dir, "dataset directory")->required();
    sco->add_option("--out", score_out, "score csv output")->required();
    sco->add_option("--mode", mode_override, "closest | paper-eq11");
    sco->add_option("--window-days", window_days, "scored window length");

    // eval
    auto* ev = app.add_subcommand("eval", "evaluate a score file against labels");
    std::string scores_path, labels_file, report_path, timings_path;
    int k = 0;
    ev->add_option("--scores", scores_path, "score csv")->required();
    ev->add_option("--labels", labels_file, "label csv")->required();
    ev->add_option("--report", report_path, "report output")->required();
    ev->add_option("--k", k, "Top-K cutoff (default: ceil(0.1 * users))");
    ev->add_option("--data", data_dir, "dataset directory for the distance baseline");
    ev->add_option("--timings", timings_path, "per-epoch timing file to embed");

    // transfer
    auto* tf = app.add_subcommand("transfer", "apply a checkpoint to another dataset");
    std::string scratch_model;
    tf->add_option("--model", model_path, "source-trained checkpoint")->required();
    tf->add_option("--data", data_dir, "target dataset directory")->required();
    tf->add_option("--labels", labels_file, "target labels (default: <data>/labels.csv)");
    tf->add_option("--report", report_path, "report output")->required();
    tf->add_option("--scratch-model", scratch_model, "target-trained checkpoint for original rows");

    auto* hc = app.add_subcommand("help-config", "list all config keys and defaults");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? kExitOk : kExitUsage;
    }

    if (*seed_opt) common.seed = seed_val;
    if (*threads_opt) common.threads = threads_val;

    try {
        if (*sim) return cmd_simulate(common, out_dir);
        if (*tr) return cmd_train(common, data_dir, ckpt_out, arch_override, ablate_override);
        if (*sco) return cmd_score(common, model_path, data_dir, score_out, mode_override, window_days);
        if (*ev) return cmd_eval(common, scores_path, labels_file, report_path, k, data_dir, timings_path);
        if (*tf) return cmd_transfer(common, model_path, data_dir, labels_file, report_path, scratch_model);
        if (*hc) {
            Config::print_help(std::cout);
            return kExitOk;
        }
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return kExitData;
    } catch (const NumericalError& e) {
        std::cerr << "numerical error: " << e.what() << "\n";
        return kExitNumerical;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitNumerical;
    }
    return kExitUsage;
}
