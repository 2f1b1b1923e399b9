#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "trajod/config.hpp"
#include "trajod/errors.hpp"

using namespace trajod;

namespace {

std::string write_tmp(const char* name, const char* content) {
    const std::string path = (std::filesystem::temp_directory_path() / name).string();
    std::ofstream(path) << content;
    return path;
}

}  // namespace

TEST_SUITE_BEGIN("config");

TEST_CASE("defaults carry every registered key") {
    const Config cfg = Config::defaults();
    CHECK(cfg.get_int("train.epochs") == 200);
    CHECK(cfg.get_int("train.batch") == 128);
    CHECK(cfg.get_int("data.cutoff_len") == 16);
    CHECK(cfg.get_double("train.beta") == 0.1);
    CHECK(cfg.get_str("train.arch") == "cnn");
    CHECK(cfg.get_bool("train.in_batch_negatives"));
}

TEST_CASE("file parsing with comments and dotted keys") {
    const std::string path = write_tmp("trajod_cfg.txt",
                                       "# comment line\n"
                                       "sim.agents = 42   # trailing comment\n"
                                       "\n"
                                       "train.beta=0.25\n");
    const Config cfg = Config::load(path);
    CHECK(cfg.get_int("sim.agents") == 42);
    CHECK(cfg.get_double("train.beta") == 0.25);
    CHECK(cfg.get_int("train.epochs") == 200);  // untouched default
    std::remove(path.c_str());
}

TEST_CASE("unknown keys are rejected by name") {
    const std::string path = write_tmp("trajod_cfg_bad.txt", "sim.agnets = 10\n");
    CHECK_THROWS_WITH_AS(Config::load(path), doctest::Contains("sim.agnets"), ConfigError);
    std::remove(path.c_str());
    Config cfg = Config::defaults();
    CHECK_THROWS_AS(cfg.set("nope", "1"), ConfigError);
}

TEST_CASE("typed getters validate values") {
    Config cfg = Config::defaults();
    cfg.set("sim.agents", "ten");
    CHECK_THROWS_AS(cfg.get_int("sim.agents"), ConfigError);
    cfg.set("train.in_batch_negatives", "maybe");
    CHECK_THROWS_AS(cfg.get_bool("train.in_batch_negatives"), ConfigError);
}

TEST_CASE("hash is stable and value-sensitive") {
    Config a = Config::defaults();
    Config b = Config::defaults();
    CHECK(a.hash_hex() == b.hash_hex());
    CHECK(a.hash_hex().size() == 16);
    b.set("sim.seed", "2");
    CHECK(a.hash_hex() != b.hash_hex());
}

TEST_CASE("help lists every key with its default") {
    std::ostringstream os;
    Config::print_help(os);
    const std::string help = os.str();
    for (const auto& e : Config::registry()) {
        CHECK(help.find(e.key) != std::string::npos);
    }
    CHECK(help.find("default: 200") != std::string::npos);  // train.epochs
}

TEST_SUITE_END();
