#pragma once

#include <map>
#include <string>
#include <vector>

#include "trajod/tensor.hpp"

namespace trajod {

/// Versioned container of named parameter tensors plus free-form string
/// metadata. On disk: magic, version, metadata block, then raw 64-bit
/// little-endian values per tensor in listed order.
class Checkpoint {
public:
    void put(const std::string& name, const Tensor& t);
    bool has(const std::string& name) const;
    Tensor get(const std::string& name) const;  // fresh constant leaf

    void set_meta(const std::string& key, const std::string& value);
    std::string meta(const std::string& key, const std::string& fallback = "") const;
    const std::map<std::string, std::string>& metadata() const { return meta_; }

    std::vector<std::string> names() const;

    void save(const std::string& path) const;
    static Checkpoint load(const std::string& path);

private:
    struct Entry {
        Shape shape;
        std::vector<double> values;
    };
    std::vector<std::pair<std::string, Entry>> tensors_;  // insertion order
    std::map<std::string, std::string> meta_;
};

}  // namespace trajod
