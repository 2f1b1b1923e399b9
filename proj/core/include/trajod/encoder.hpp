#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "trajod/tensor.hpp"

namespace trajod {

enum class Arch { mlp, rnn, cnn, transformer };

std::string to_string(Arch a);
Arch arch_from(const std::string& s);

struct EncoderConfig {
    Arch arch = Arch::cnn;
    int layers = 4;
    int dim = 64;
    int cutoff_len = 16;
    int heads = 4;  // transformer only
    uint64_t seed = 1;
};

/// Sequence encoder f: point-embedding matrix -> one unit-norm vector.
///
/// mlp:         masked mean of per-point stacked feed-forward outputs
/// rnn:         stacked tanh recurrence, last valid state
/// cnn:         stacked width-3 same-padded 1-D convolutions, masked mean
/// transformer: pre-norm attention blocks with learned positions and a
///              key padding mask, masked mean
///
/// Padding content is zeroed on entry, so values in masked slots never
/// influence the output.
class Encoder {
public:
    explicit Encoder(const EncoderConfig& cfg);

    /// x: [cutoff_len, dim]; mask: cutoff_len entries, nonzero prefix marks
    /// valid slots. Requires at least one valid slot.
    Tensor encode(const Tensor& x, const std::vector<double>& mask) const;

    static std::vector<std::pair<std::string, Shape>> parameter_manifest(const EncoderConfig& cfg);

    std::vector<std::pair<std::string, Tensor>> named_params() const { return params_; }
    Tensor param(const std::string& name) const;
    void set_param(const std::string& name, const Tensor& values);

    const EncoderConfig& config() const { return cfg_; }

private:
    EncoderConfig cfg_;
    std::vector<std::pair<std::string, Tensor>> params_;
};

}  // namespace trajod
