#include "trajod/checkpoint.hpp"

#include <cstring>
#include <fstream>

#include <nlohmann/json.hpp>

#include "trajod/errors.hpp"

namespace trajod {

namespace {

constexpr char kMagic[8] = {'T', 'R', 'A', 'J', 'C', 'K', 'P', '1'};
constexpr uint32_t kVersion = 1;

void write_u64_le(std::ostream& os, uint64_t v) {
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xffu);
    os.write(reinterpret_cast<const char*>(b), 8);
}

uint64_t read_u64_le(std::istream& is) {
    unsigned char b[8];
    is.read(reinterpret_cast<char*>(b), 8);
    uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(b[i]) << (8 * i);
    return v;
}

void write_doubles_le(std::ostream& os, const std::vector<double>& xs) {
    for (double x : xs) {
        uint64_t bits;
        std::memcpy(&bits, &x, 8);
        write_u64_le(os, bits);
    }
}

void read_doubles_le(std::istream& is, std::vector<double>& xs) {
    for (double& x : xs) {
        uint64_t bits = read_u64_le(is);
        std::memcpy(&x, &bits, 8);
    }
}

}  // namespace

void Checkpoint::put(const std::string& name, const Tensor& t) {
    for (auto& [n, e] : tensors_) {
        if (n == name) {
            e.shape = t.shape();
            e.values = t.values();
            return;
        }
    }
    tensors_.emplace_back(name, Entry{t.shape(), t.values()});
}

bool Checkpoint::has(const std::string& name) const {
    for (const auto& [n, e] : tensors_)
        if (n == name) return true;
    return false;
}

Tensor Checkpoint::get(const std::string& name) const {
    for (const auto& [n, e] : tensors_)
        if (n == name) return Tensor::from_values(e.shape, e.values);
    throw DataError("checkpoint: no tensor named '" + name + "'");
}

void Checkpoint::set_meta(const std::string& key, const std::string& value) { meta_[key] = value; }

std::string Checkpoint::meta(const std::string& key, const std::string& fallback) const {
    auto it = meta_.find(key);
    return it == meta_.end() ? fallback : it->second;
}

std::vector<std::string> Checkpoint::names() const {
    std::vector<std::string> out;
    out.reserve(tensors_.size());
    for (const auto& [n, e] : tensors_) out.push_back(n);
    return out;
}

void Checkpoint::save(const std::string& path) const {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw DataError("checkpoint: cannot write " + path);

    nlohmann::json meta;
    meta["meta"] = meta_;
    auto& arr = meta["tensors"] = nlohmann::json::array();
    for (const auto& [name, e] : tensors_) {
        arr.push_back({{"name", name}, {"shape", e.shape}});
    }
    const std::string meta_str = meta.dump();

    os.write(kMagic, 8);
    write_u64_le(os, kVersion);
    write_u64_le(os, meta_str.size());
    os.write(meta_str.data(), static_cast<std::streamsize>(meta_str.size()));
    for (const auto& [name, e] : tensors_) write_doubles_le(os, e.values);
    if (!os) throw DataError("checkpoint: write failed for " + path);
}

Checkpoint Checkpoint::load(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw DataError("checkpoint: cannot read " + path);
    char magic[8];
    is.read(magic, 8);
    if (!is || std::memcmp(magic, kMagic, 8) != 0)
        throw DataError("checkpoint: bad magic in " + path);
    const uint64_t version = read_u64_le(is);
    if (version != kVersion)
        throw DataError("checkpoint: unsupported version " + std::to_string(version));
    const uint64_t meta_len = read_u64_le(is);
    std::string meta_str(meta_len, '\0');
    is.read(meta_str.data(), static_cast<std::streamsize>(meta_len));
    if (!is) throw DataError("checkpoint: truncated metadata in " + path);

    nlohmann::json meta;
    try {
        meta = nlohmann::json::parse(meta_str);
    } catch (const nlohmann::json::exception& e) {
        throw DataError("checkpoint: corrupt metadata: " + std::string(e.what()));
    }

    Checkpoint ck;
    for (auto it = meta["meta"].begin(); it != meta["meta"].end(); ++it)
        ck.meta_[it.key()] = it.value().get<std::string>();
    for (const auto& t : meta["tensors"]) {
        Entry e;
        e.shape = t["shape"].get<Shape>();
        int64_t count = 1;
        for (int d : e.shape) count *= d;
        e.values.resize(static_cast<size_t>(count));
        read_doubles_le(is, e.values);
        if (!is) throw DataError("checkpoint: truncated tensor data in " + path);
        ck.tensors_.emplace_back(t["name"].get<std::string>(), std::move(e));
    }
    return ck;
}

}  // namespace trajod
