#include "trajod/encoder.hpp"

#include <cmath>

#include "trajod/errors.hpp"
#include "trajod/rng.hpp"

namespace trajod {

std::string to_string(Arch a) {
    switch (a) {
        case Arch::mlp: return "mlp";
        case Arch::rnn: return "rnn";
        case Arch::cnn: return "cnn";
        case Arch::transformer: return "transformer";
    }
    return "cnn";
}

Arch arch_from(const std::string& s) {
    if (s == "mlp") return Arch::mlp;
    if (s == "rnn") return Arch::rnn;
    if (s == "cnn") return Arch::cnn;
    if (s == "transformer") return Arch::transformer;
    throw ConfigError("unknown encoder arch '" + s + "'");
}

namespace {

Tensor xavier(Shape shape, uint64_t seed, const std::string& name) {
    SeededRng rng(seed, "enc|" + name);
    const int fan_in = shape[0];
    const int fan_out = shape.size() > 1 ? shape[1] : shape[0];
    const double a = std::sqrt(6.0 / (fan_in + fan_out));
    std::vector<double> v(static_cast<size_t>(fan_in) * static_cast<size_t>(shape.size() > 1 ? shape[1] : 1));
    for (double& x : v) x = rng.uniform(-a, a);
    return Tensor::from_values(std::move(shape), std::move(v), true);
}

Tensor small_normal(Shape shape, uint64_t seed, const std::string& name, double sigma) {
    SeededRng rng(seed, "enc|" + name);
    int64_t count = 1;
    for (int d : shape) count *= d;
    std::vector<double> v(static_cast<size_t>(count));
    for (double& x : v) x = sigma * rng.normal();
    return Tensor::from_values(std::move(shape), std::move(v), true);
}

/// Declarative parameter table shared by init and the manifest.
std::vector<std::pair<std::string, Shape>> manifest_for(const EncoderConfig& cfg) {
    std::vector<std::pair<std::string, Shape>> out;
    const int d = cfg.dim, L = cfg.layers, T = cfg.cutoff_len;
    switch (cfg.arch) {
        case Arch::mlp:
            for (int l = 0; l < L; ++l) {
                out.push_back({"mlp.l" + std::to_string(l) + ".weight", {d, d}});
                out.push_back({"mlp.l" + std::to_string(l) + ".bias", {d}});
            }
            break;
        case Arch::rnn:
            for (int l = 0; l < L; ++l) {
                out.push_back({"rnn.l" + std::to_string(l) + ".w_in", {d, d}});
                out.push_back({"rnn.l" + std::to_string(l) + ".w_rec", {d, d}});
                out.push_back({"rnn.l" + std::to_string(l) + ".bias", {d}});
            }
            break;
        case Arch::cnn:
            for (int l = 0; l < L; ++l) {
                out.push_back({"cnn.l" + std::to_string(l) + ".weight", {3 * d, d}});
                out.push_back({"cnn.l" + std::to_string(l) + ".bias", {d}});
            }
            break;
        case Arch::transformer: {
            out.push_back({"tr.pos", {T, d}});
            const int ff = 4 * d;
            for (int l = 0; l < L; ++l) {
                const std::string p = "tr.b" + std::to_string(l) + ".";
                out.push_back({p + "ln1.gain", {d}});
                out.push_back({p + "ln1.bias", {d}});
                out.push_back({p + "wq", {d, d}});
                out.push_back({p + "bq", {d}});
                out.push_back({p + "wk", {d, d}});
                out.push_back({p + "bk", {d}});
                out.push_back({p + "wv", {d, d}});
                out.push_back({p + "bv", {d}});
                out.push_back({p + "wo", {d, d}});
                out.push_back({p + "bo", {d}});
                out.push_back({p + "ln2.gain", {d}});
                out.push_back({p + "ln2.bias", {d}});
                out.push_back({p + "ff.w1", {d, ff}});
                out.push_back({p + "ff.b1", {ff}});
                out.push_back({p + "ff.w2", {ff, d}});
                out.push_back({p + "ff.b2", {d}});
            }
            break;
        }
    }
    return out;
}

}  // namespace

Encoder::Encoder(const EncoderConfig& cfg) : cfg_(cfg) {
    if (cfg.layers < 1 || cfg.dim < 1 || cfg.cutoff_len < 1)
        throw ConfigError("encoder: layers, dim and cutoff_len must be >= 1");
    if (cfg.arch == Arch::transformer && cfg.dim % cfg.heads != 0)
        throw ConfigError("encoder: dim must be divisible by heads");
    for (const auto& [name, shape] : manifest_for(cfg)) {
        Tensor t;
        if (name.ends_with(".bias") || name.ends_with(".bq") || name.ends_with(".bk") ||
            name.ends_with(".bv") || name.ends_with(".bo") || name.ends_with(".b1") ||
            name.ends_with(".b2")) {
            t = Tensor::zeros(shape, true);
        } else if (name.ends_with(".gain")) {
            t = Tensor::full(shape, 1.0, true);
        } else if (name == "tr.pos") {
            t = small_normal(shape, cfg.seed, name, 0.1);
        } else {
            t = xavier(shape, cfg.seed, name);
        }
        params_.emplace_back(name, std::move(t));
    }
}

std::vector<std::pair<std::string, Shape>> Encoder::parameter_manifest(const EncoderConfig& cfg) {
    return manifest_for(cfg);
}

Tensor Encoder::param(const std::string& name) const {
    for (const auto& [n, t] : params_)
        if (n == name) return t;
    throw NumericalError("encoder: no parameter '" + name + "'");
}

void Encoder::set_param(const std::string& name, const Tensor& values) {
    for (auto& [n, t] : params_) {
        if (n == name) {
            if (t.shape() != values.shape())
                throw DataError("encoder: shape mismatch loading '" + name + "': " +
                                shape_str(t.shape()) + " vs " + shape_str(values.shape()));
            t.values() = values.values();
            return;
        }
    }
    throw DataError("encoder: no parameter '" + name + "'");
}

namespace {

Tensor mask_matrix(const std::vector<double>& mask, int d) {
    const int T = static_cast<int>(mask.size());
    std::vector<double> m(static_cast<size_t>(T) * static_cast<size_t>(d));
    for (int r = 0; r < T; ++r) {
        const double v = mask[static_cast<size_t>(r)] != 0.0 ? 1.0 : 0.0;
        for (int c = 0; c < d; ++c) m[static_cast<size_t>(r) * static_cast<size_t>(d) + static_cast<size_t>(c)] = v;
    }
    return Tensor::from_values({T, d}, std::move(m));
}

Tensor shift_down(const Tensor& x) {  // row t takes row t-1; first row zero
    const int T = x.shape()[0], d = x.shape()[1];
    if (T == 1) return Tensor::zeros({1, d});
    return concat_rows({Tensor::zeros({1, d}), slice_rows(x, 0, T - 1)});
}

Tensor shift_up(const Tensor& x) {  // row t takes row t+1; last row zero
    const int T = x.shape()[0], d = x.shape()[1];
    if (T == 1) return Tensor::zeros({1, d});
    return concat_rows({slice_rows(x, 1, T), Tensor::zeros({1, d})});
}

}  // namespace

Tensor Encoder::encode(const Tensor& x, const std::vector<double>& mask) const {
    const int T = cfg_.cutoff_len, d = cfg_.dim;
    if (x.shape() != Shape{T, d})
        throw NumericalError("encode: expected input " + shape_str({T, d}) + ", got " + shape_str(x.shape()));
    if (static_cast<int>(mask.size()) != T)
        throw NumericalError("encode: mask length " + std::to_string(mask.size()) + " != " + std::to_string(T));
    int valid = 0;
    for (double v : mask) valid += v != 0.0 ? 1 : 0;
    if (valid == 0) throw NumericalError("encode: empty mask");

    Tensor h = mul(x, mask_matrix(mask, d));
    Tensor z;
    switch (cfg_.arch) {
        case Arch::mlp: {
            for (int l = 0; l < cfg_.layers; ++l) {
                const std::string p = "mlp.l" + std::to_string(l);
                h = tanh_op(add(matmul(h, param(p + ".weight")), param(p + ".bias")));
            }
            z = masked_mean(h, mask);
            break;
        }
        case Arch::rnn: {
            Tensor seq = valid == T ? h : slice_rows(h, 0, valid);
            Tensor last;
            for (int l = 0; l < cfg_.layers; ++l) {
                const std::string p = "rnn.l" + std::to_string(l);
                const Tensor w_in = param(p + ".w_in");
                const Tensor w_rec = param(p + ".w_rec");
                const Tensor bias = param(p + ".bias");
                Tensor state = Tensor::zeros({1, d});
                std::vector<Tensor> outs;
                outs.reserve(static_cast<size_t>(valid));
                for (int t = 0; t < valid; ++t) {
                    const Tensor xt = slice_rows(seq, t, t + 1);
                    state = tanh_op(add(add(matmul(xt, w_in), matmul(state, w_rec)), bias));
                    outs.push_back(state);
                }
                seq = outs.size() == 1 ? outs[0] : concat_rows(outs);
                last = state;
            }
            z = reshape(last, {d});
            break;
        }
        case Arch::cnn: {
            for (int l = 0; l < cfg_.layers; ++l) {
                const std::string p = "cnn.l" + std::to_string(l);
                const Tensor window = concat_cols({shift_down(h), h, shift_up(h)});
                h = relu(add(matmul(window, param(p + ".weight")), param(p + ".bias")));
            }
            z = masked_mean(h, mask);
            break;
        }
        case Arch::transformer: {
            const int heads = cfg_.heads;
            const int hd = d / heads;
            const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(hd));
            h = add(h, param("tr.pos"));
            for (int l = 0; l < cfg_.layers; ++l) {
                const std::string p = "tr.b" + std::to_string(l) + ".";
                Tensor n1 = layer_norm_rows(h, param(p + "ln1.gain"), param(p + "ln1.bias"));
                Tensor q = add(matmul(n1, param(p + "wq")), param(p + "bq"));
                Tensor k = add(matmul(n1, param(p + "wk")), param(p + "bk"));
                Tensor v = add(matmul(n1, param(p + "wv")), param(p + "bv"));
                std::vector<Tensor> head_outs;
                head_outs.reserve(static_cast<size_t>(heads));
                for (int hh = 0; hh < heads; ++hh) {
                    const int c0 = hh * hd, c1 = (hh + 1) * hd;
                    Tensor scores = scale(matmul_nt(slice_cols(q, c0, c1), slice_cols(k, c0, c1)), inv_sqrt);
                    Tensor attn = softmax_rows(scores, &mask);
                    head_outs.push_back(matmul(attn, slice_cols(v, c0, c1)));
                }
                Tensor attn_out = add(matmul(concat_cols(head_outs), param(p + "wo")), param(p + "bo"));
                h = add(h, attn_out);
                Tensor n2 = layer_norm_rows(h, param(p + "ln2.gain"), param(p + "ln2.bias"));
                Tensor ff = add(matmul(relu(add(matmul(n2, param(p + "ff.w1")), param(p + "ff.b1"))),
                                       param(p + "ff.w2")),
                                param(p + "ff.b2"));
                h = add(h, ff);
            }
            z = masked_mean(h, mask);
            break;
        }
    }
    return l2_normalize(z);
}

}  // namespace trajod
