#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

namespace trajod {

/// Flat key = value configuration with '#' comments and dotted section keys.
/// Only registered keys are accepted; every key has a documented default.
class Config {
public:
    struct Entry {
        std::string key;
        std::string default_value;
        std::string description;
    };

    /// All keys at their defaults.
    static Config defaults();

    /// Parses a config file on top of the defaults.
    static Config load(const std::string& path);

    void set(const std::string& key, const std::string& value);

    std::string get_str(const std::string& key) const;
    int get_int(const std::string& key) const;
    int64_t get_i64(const std::string& key) const;
    uint64_t get_u64(const std::string& key) const;
    double get_double(const std::string& key) const;
    bool get_bool(const std::string& key) const;

    /// Canonical sorted "key = value" listing of the resolved config.
    std::string resolved_text() const;

    /// FNV-1a of the resolved text, hex encoded.
    std::string hash_hex() const;

    static const std::vector<Entry>& registry();
    static void print_help(std::ostream& os);

private:
    std::map<std::string, std::string> values_;
};

}  // namespace trajod
