#include "trajod/tensor.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <sstream>
#include <unordered_set>

#include "trajod/errors.hpp"

namespace trajod {

namespace detail {

thread_local bool g_relu_watch = false;
thread_local double g_relu_watch_min = 1e300;

void set_relu_watch(bool enabled) { g_relu_watch = enabled; }
double relu_watch_min() { return g_relu_watch_min; }
void reset_relu_watch() { g_relu_watch_min = 1e300; }

}  // namespace detail

namespace {

thread_local bool g_grad_enabled = true;

using EMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using CMap = Eigen::Map<const EMat>;
using MMap = Eigen::Map<EMat>;

int64_t numel(const Shape& s) {
    int64_t n = 1;
    for (int d : s) n *= d;
    return n;
}

std::shared_ptr<detail::Node> make_node(Shape shape) {
    auto n = std::make_shared<detail::Node>();
    n->shape = std::move(shape);
    n->val.assign(static_cast<size_t>(numel(n->shape)), 0.0);
    return n;
}

/// Wires parents/backward only when taping is on and some parent needs grad.
Tensor finish(std::shared_ptr<detail::Node> n, std::vector<std::shared_ptr<detail::Node>> parents,
              std::function<void(detail::Node&)> backward) {
    bool rg = false;
    if (g_grad_enabled) {
        for (const auto& p : parents) rg = rg || (p && p->requires_grad);
    }
    if (rg) {
        n->requires_grad = true;
        n->parents = std::move(parents);
        n->backward = std::move(backward);
    }
    return Tensor(std::move(n));
}

void check_rank2(const Tensor& a, const char* op) {
    if (a.shape().size() != 2)
        throw NumericalError(std::string(op) + ": expected rank-2, got " + shape_str(a.shape()));
}

[[noreturn]] void shape_fail(const char* op, const Shape& a, const Shape& b) {
    throw NumericalError(std::string(op) + ": shape mismatch " + shape_str(a) + " vs " + shape_str(b));
}

}  // namespace

std::string shape_str(const Shape& s) {
    std::ostringstream os;
    os << "[";
    for (size_t i = 0; i < s.size(); ++i) {
        if (i) os << ",";
        os << s[i];
    }
    os << "]";
    return os.str();
}

bool grad_enabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : prev_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = prev_; }

// ---- Tensor basics --------------------------------------------------------

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
    auto n = make_node(std::move(shape));
    n->requires_grad = requires_grad && g_grad_enabled;
    return Tensor(std::move(n));
}

Tensor Tensor::full(Shape shape, double v, bool requires_grad) {
    Tensor t = zeros(std::move(shape), requires_grad);
    std::fill(t.values().begin(), t.values().end(), v);
    return t;
}

Tensor Tensor::from_values(Shape shape, std::vector<double> vals, bool requires_grad) {
    auto n = std::make_shared<detail::Node>();
    if (numel(shape) != static_cast<int64_t>(vals.size()))
        throw NumericalError("from_values: " + std::to_string(vals.size()) +
                             " values for shape " + shape_str(shape));
    n->shape = std::move(shape);
    n->val = std::move(vals);
    n->requires_grad = requires_grad && g_grad_enabled;
    return Tensor(std::move(n));
}

Tensor Tensor::scalar(double v) { return from_values({}, {v}); }

int Tensor::rows() const {
    if (n_->shape.empty()) return 1;
    return n_->shape[0];
}

int Tensor::cols() const {
    if (n_->shape.size() < 2) return n_->shape.empty() ? 1 : n_->shape[0];
    return n_->shape[1];
}

double Tensor::value() const {
    if (!n_->shape.empty()) throw NumericalError("value(): tensor of shape " + shape_str(n_->shape));
    return n_->val[0];
}

double Tensor::at(int r, int c) const {
    return n_->val[static_cast<size_t>(r) * static_cast<size_t>(n_->shape[1]) + static_cast<size_t>(c)];
}

const std::vector<double>& Tensor::grad() const {
    n_->ensure_grad();
    return n_->grad;
}

void Tensor::zero_grad() {
    if (n_) n_->grad.assign(n_->val.size(), 0.0);
}

Tensor Tensor::detach() const {
    auto n = std::make_shared<detail::Node>();
    n->shape = n_->shape;
    n->val = n_->val;
    return Tensor(std::move(n));
}

void Tensor::backward() const {
    if (!n_) throw NumericalError("backward(): undefined tensor");
    if (!n_->shape.empty()) throw NumericalError("backward(): root must be scalar, got " + shape_str(n_->shape));
    if (!n_->requires_grad) return;

    // Iterative post-order DFS; reverse gives root-first topological order.
    std::vector<detail::Node*> order;
    std::unordered_set<detail::Node*> seen;
    std::vector<std::pair<detail::Node*, size_t>> stack;
    stack.emplace_back(n_.get(), 0);
    seen.insert(n_.get());
    while (!stack.empty()) {
        auto& [node, idx] = stack.back();
        if (idx < node->parents.size()) {
            detail::Node* p = node->parents[idx].get();
            ++idx;
            if (p && p->requires_grad && !seen.count(p)) {
                seen.insert(p);
                stack.emplace_back(p, 0);
            }
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }

    for (detail::Node* node : order) node->ensure_grad();
    n_->grad[0] += 1.0;
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        detail::Node* node = *it;
        if (node->backward) node->backward(*node);
    }
}

// ---- ops ------------------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b) {
    check_rank2(a, "matmul");
    check_rank2(b, "matmul");
    const int m = a.shape()[0], k = a.shape()[1], k2 = b.shape()[0], n = b.shape()[1];
    if (k != k2) shape_fail("matmul", a.shape(), b.shape());
    auto out = make_node({m, n});
    MMap(out->val.data(), m, n) = CMap(a.data(), m, k) * CMap(b.data(), k, n);
    auto pa = a.node(), pb = b.node();
    return finish(out, {pa, pb}, [m, k, n, pa, pb](detail::Node& o) {
        CMap g(o.grad.data(), m, n);
        if (pa->requires_grad) {
            pa->ensure_grad();
            MMap(pa->grad.data(), m, k) += g * CMap(pb->val.data(), k, n).transpose();
        }
        if (pb->requires_grad) {
            pb->ensure_grad();
            MMap(pb->grad.data(), k, n) += CMap(pa->val.data(), m, k).transpose() * g;
        }
    });
}

Tensor matmul_nt(const Tensor& a, const Tensor& b) {
    check_rank2(a, "matmul_nt");
    check_rank2(b, "matmul_nt");
    const int m = a.shape()[0], k = a.shape()[1], n = b.shape()[0];
    if (k != b.shape()[1]) shape_fail("matmul_nt", a.shape(), b.shape());
    auto out = make_node({m, n});
    MMap(out->val.data(), m, n) = CMap(a.data(), m, k) * CMap(b.data(), n, k).transpose();
    auto pa = a.node(), pb = b.node();
    return finish(out, {pa, pb}, [m, k, n, pa, pb](detail::Node& o) {
        CMap g(o.grad.data(), m, n);
        if (pa->requires_grad) {
            pa->ensure_grad();
            MMap(pa->grad.data(), m, k) += g * CMap(pb->val.data(), n, k);
        }
        if (pb->requires_grad) {
            pb->ensure_grad();
            MMap(pb->grad.data(), n, k) += g.transpose() * CMap(pa->val.data(), m, k);
        }
    });
}

Tensor add(const Tensor& a, const Tensor& b) {
    // row-broadcast form: [m,n] + [n]
    if (a.shape().size() == 2 && b.shape().size() == 1 && a.shape()[1] == b.shape()[0]) {
        const int m = a.shape()[0], n = a.shape()[1];
        auto out = make_node(a.shape());
        for (int r = 0; r < m; ++r)
            for (int c = 0; c < n; ++c)
                out->val[static_cast<size_t>(r) * n + c] = a.at(r, c) + b.at(c);
        auto pa = a.node(), pb = b.node();
        return finish(out, {pa, pb}, [m, n, pa, pb](detail::Node& o) {
            if (pa->requires_grad) {
                pa->ensure_grad();
                for (size_t i = 0; i < o.grad.size(); ++i) pa->grad[i] += o.grad[i];
            }
            if (pb->requires_grad) {
                pb->ensure_grad();
                for (int r = 0; r < m; ++r)
                    for (int c = 0; c < n; ++c) pb->grad[static_cast<size_t>(c)] += o.grad[static_cast<size_t>(r) * n + c];
            }
        });
    }
    if (a.shape() != b.shape()) shape_fail("add", a.shape(), b.shape());
    auto out = make_node(a.shape());
    for (size_t i = 0; i < out->val.size(); ++i) out->val[i] = a.values()[i] + b.values()[i];
    auto pa = a.node(), pb = b.node();
    return finish(out, {pa, pb}, [pa, pb](detail::Node& o) {
        if (pa->requires_grad) {
            pa->ensure_grad();
            for (size_t i = 0; i < o.grad.size(); ++i) pa->grad[i] += o.grad[i];
        }
        if (pb->requires_grad) {
            pb->ensure_grad();
            for (size_t i = 0; i < o.grad.size(); ++i) pb->grad[i] += o.grad[i];
        }
    });
}

Tensor sub(const Tensor& a, const Tensor& b) { return add(a, scale(b, -1.0)); }

Tensor mul(const Tensor& a, const Tensor& b) {
    if (a.shape() != b.shape()) shape_fail("mul", a.shape(), b.shape());
    auto out = make_node(a.shape());
    for (size_t i = 0; i < out->val.size(); ++i) out->val[i] = a.values()[i] * b.values()[i];
    auto pa = a.node(), pb = b.node();
    return finish(out, {pa, pb}, [pa, pb](detail::Node& o) {
        if (pa->requires_grad) {
            pa->ensure_grad();
            for (size_t i = 0; i < o.grad.size(); ++i) pa->grad[i] += o.grad[i] * pb->val[i];
        }
        if (pb->requires_grad) {
            pb->ensure_grad();
            for (size_t i = 0; i < o.grad.size(); ++i) pb->grad[i] += o.grad[i] * pa->val[i];
        }
    });
}

Tensor div(const Tensor& a, const Tensor& b) {
    if (a.shape() != b.shape()) shape_fail("div", a.shape(), b.shape());
    auto out = make_node(a.shape());
    for (size_t i = 0; i < out->val.size(); ++i) out->val[i] = a.values()[i] / b.values()[i];
    auto pa = a.node(), pb = b.node();
    return finish(out, {pa, pb}, [pa, pb](detail::Node& o) {
        if (pa->requires_grad) {
            pa->ensure_grad();
            for (size_t i = 0; i < o.grad.size(); ++i) pa->grad[i] += o.grad[i] / pb->val[i];
        }
        if (pb->requires_grad) {
            pb->ensure_grad();
            for (size_t i = 0; i < o.grad.size(); ++i)
                pb->grad[i] -= o.grad[i] * pa->val[i] / (pb->val[i] * pb->val[i]);
        }
    });
}

Tensor scale(const Tensor& a, double s) {
    auto out = make_node(a.shape());
    for (size_t i = 0; i < out->val.size(); ++i) out->val[i] = a.values()[i] * s;
    auto pa = a.node();
    return finish(out, {pa}, [pa, s](detail::Node& o) {
        pa->ensure_grad();
        for (size_t i = 0; i < o.grad.size(); ++i) pa->grad[i] += o.grad[i] * s;
    });
}

Tensor add_const(const Tensor& a, double c) {
    auto out = make_node(a.shape());
    for (size_t i = 0; i < out->val.size(); ++i) out->val[i] = a.values()[i] + c;
    auto pa = a.node();
    return finish(out, {pa}, [pa](detail::Node& o) {
        pa->ensure_grad();
        for (size_t i = 0; i < o.grad.size(); ++i) pa->grad[i] += o.grad[i];
    });
}

Tensor tanh_op(const Tensor& a) {
    auto out = make_node(a.shape());
    for (size_t i = 0; i < out->val.size(); ++i) out->val[i] = std::tanh(a.values()[i]);
    auto pa = a.node();
    return finish(out, {pa}, [pa](detail::Node& o) {
        pa->ensure_grad();
        for (size_t i = 0; i < o.grad.size(); ++i) pa->grad[i] += o.grad[i] * (1.0 - o.val[i] * o.val[i]);
    });
}

Tensor relu(const Tensor& a) {
    auto out = make_node(a.shape());
    for (size_t i = 0; i < out->val.size(); ++i) out->val[i] = a.values()[i] > 0.0 ? a.values()[i] : 0.0;
    if (detail::g_relu_watch) {
        for (double v : a.values())
            detail::g_relu_watch_min = std::min(detail::g_relu_watch_min, std::abs(v));
    }
    auto pa = a.node();
    return finish(out, {pa}, [pa](detail::Node& o) {
        pa->ensure_grad();
        for (size_t i = 0; i < o.grad.size(); ++i)
            if (pa->val[i] > 0.0) pa->grad[i] += o.grad[i];
    });
}

Tensor exp_op(const Tensor& a) {
    auto out = make_node(a.shape());
    for (size_t i = 0; i < out->val.size(); ++i) out->val[i] = std::exp(a.values()[i]);
    auto pa = a.node();
    return finish(out, {pa}, [pa](detail::Node& o) {
        pa->ensure_grad();
        for (size_t i = 0; i < o.grad.size(); ++i) pa->grad[i] += o.grad[i] * o.val[i];
    });
}

Tensor log_op(const Tensor& a) {
    auto out = make_node(a.shape());
    for (size_t i = 0; i < out->val.size(); ++i) out->val[i] = std::log(a.values()[i]);
    auto pa = a.node();
    return finish(out, {pa}, [pa](detail::Node& o) {
        pa->ensure_grad();
        for (size_t i = 0; i < o.grad.size(); ++i) pa->grad[i] += o.grad[i] / pa->val[i];
    });
}

Tensor sum(const Tensor& a) {
    auto out = make_node({});
    double s = 0.0;
    for (double v : a.values()) s += v;
    out->val[0] = s;
    auto pa = a.node();
    return finish(out, {pa}, [pa](detail::Node& o) {
        pa->ensure_grad();
        for (size_t i = 0; i < pa->grad.size(); ++i) pa->grad[i] += o.grad[0];
    });
}

Tensor mean(const Tensor& a) {
    if (a.size() == 0) throw NumericalError("mean: empty tensor");
    return scale(sum(a), 1.0 / static_cast<double>(a.size()));
}

Tensor row_sums(const Tensor& a) {
    check_rank2(a, "row_sums");
    const int m = a.shape()[0], n = a.shape()[1];
    auto out = make_node({m});
    for (int r = 0; r < m; ++r) {
        double s = 0.0;
        for (int c = 0; c < n; ++c) s += a.at(r, c);
        out->val[static_cast<size_t>(r)] = s;
    }
    auto pa = a.node();
    return finish(out, {pa}, [m, n, pa](detail::Node& o) {
        pa->ensure_grad();
        for (int r = 0; r < m; ++r)
            for (int c = 0; c < n; ++c) pa->grad[static_cast<size_t>(r) * n + c] += o.grad[static_cast<size_t>(r)];
    });
}

Tensor concat_rows(const std::vector<Tensor>& parts) {
    if (parts.empty()) throw NumericalError("concat_rows: no parts");
    const int n = parts[0].shape().size() == 2 ? parts[0].shape()[1] : parts[0].shape()[0];
    int m = 0;
    for (const auto& p : parts) {
        check_rank2(p, "concat_rows");
        if (p.shape()[1] != n) shape_fail("concat_rows", parts[0].shape(), p.shape());
        m += p.shape()[0];
    }
    auto out = make_node({m, n});
    std::vector<std::shared_ptr<detail::Node>> parents;
    size_t off = 0;
    for (const auto& p : parts) {
        std::copy(p.values().begin(), p.values().end(), out->val.begin() + off);
        off += p.values().size();
        parents.push_back(p.node());
    }
    auto ps = parents;
    return finish(out, std::move(parents), [ps](detail::Node& o) {
        size_t off = 0;
        for (const auto& p : ps) {
            if (p->requires_grad) {
                p->ensure_grad();
                for (size_t i = 0; i < p->val.size(); ++i) p->grad[i] += o.grad[off + i];
            }
            off += p->val.size();
        }
    });
}

Tensor concat_cols(const std::vector<Tensor>& parts) {
    if (parts.empty()) throw NumericalError("concat_cols: no parts");
    const int m = parts[0].shape().size() == 2 ? parts[0].shape()[0] : 0;
    int n = 0;
    for (const auto& p : parts) {
        check_rank2(p, "concat_cols");
        if (p.shape()[0] != m) shape_fail("concat_cols", parts[0].shape(), p.shape());
        n += p.shape()[1];
    }
    auto out = make_node({m, n});
    std::vector<std::shared_ptr<detail::Node>> parents;
    int coff = 0;
    for (const auto& p : parts) {
        const int pn = p.shape()[1];
        for (int r = 0; r < m; ++r)
            for (int c = 0; c < pn; ++c)
                out->val[static_cast<size_t>(r) * n + coff + c] = p.at(r, c);
        coff += pn;
        parents.push_back(p.node());
    }
    auto ps = parents;
    return finish(out, std::move(parents), [ps, m, n](detail::Node& o) {
        int coff = 0;
        for (const auto& p : ps) {
            const int pn = p->shape[1];
            if (p->requires_grad) {
                p->ensure_grad();
                for (int r = 0; r < m; ++r)
                    for (int c = 0; c < pn; ++c)
                        p->grad[static_cast<size_t>(r) * pn + c] += o.grad[static_cast<size_t>(r) * n + coff + c];
            }
            coff += pn;
        }
    });
}

Tensor slice_rows(const Tensor& a, int r0, int r1) {
    check_rank2(a, "slice_rows");
    const int m = a.shape()[0], n = a.shape()[1];
    if (r0 < 0 || r1 > m || r0 >= r1)
        throw NumericalError("slice_rows: [" + std::to_string(r0) + "," + std::to_string(r1) +
                             ") of " + shape_str(a.shape()));
    auto out = make_node({r1 - r0, n});
    std::copy(a.values().begin() + static_cast<size_t>(r0) * n,
              a.values().begin() + static_cast<size_t>(r1) * n, out->val.begin());
    auto pa = a.node();
    return finish(out, {pa}, [pa, r0, n](detail::Node& o) {
        pa->ensure_grad();
        for (size_t i = 0; i < o.grad.size(); ++i) pa->grad[static_cast<size_t>(r0) * n + i] += o.grad[i];
    });
}

Tensor slice_cols(const Tensor& a, int c0, int c1) {
    check_rank2(a, "slice_cols");
    const int m = a.shape()[0], n = a.shape()[1];
    if (c0 < 0 || c1 > n || c0 >= c1)
        throw NumericalError("slice_cols: [" + std::to_string(c0) + "," + std::to_string(c1) +
                             ") of " + shape_str(a.shape()));
    const int w = c1 - c0;
    auto out = make_node({m, w});
    for (int r = 0; r < m; ++r)
        for (int c = 0; c < w; ++c) out->val[static_cast<size_t>(r) * w + c] = a.at(r, c0 + c);
    auto pa = a.node();
    return finish(out, {pa}, [pa, c0, w, n, m](detail::Node& o) {
        pa->ensure_grad();
        for (int r = 0; r < m; ++r)
            for (int c = 0; c < w; ++c)
                pa->grad[static_cast<size_t>(r) * n + c0 + c] += o.grad[static_cast<size_t>(r) * w + c];
    });
}

Tensor reshape(const Tensor& a, Shape shape) {
    if (numel(shape) != a.size()) shape_fail("reshape", a.shape(), shape);
    auto out = make_node(std::move(shape));
    out->val = a.values();
    auto pa = a.node();
    return finish(out, {pa}, [pa](detail::Node& o) {
        pa->ensure_grad();
        for (size_t i = 0; i < o.grad.size(); ++i) pa->grad[i] += o.grad[i];
    });
}

Tensor add_colvec(const Tensor& a, const Tensor& v) {
    check_rank2(a, "add_colvec");
    const int m = a.shape()[0], n = a.shape()[1];
    if (v.shape().size() != 1 || v.shape()[0] != m) shape_fail("add_colvec", a.shape(), v.shape());
    auto out = make_node(a.shape());
    for (int r = 0; r < m; ++r)
        for (int c = 0; c < n; ++c) out->val[static_cast<size_t>(r) * n + c] = a.at(r, c) + v.at(r);
    auto pa = a.node(), pv = v.node();
    return finish(out, {pa, pv}, [pa, pv, m, n](detail::Node& o) {
        if (pa->requires_grad) {
            pa->ensure_grad();
            for (size_t i = 0; i < o.grad.size(); ++i) pa->grad[i] += o.grad[i];
        }
        if (pv->requires_grad) {
            pv->ensure_grad();
            for (int r = 0; r < m; ++r)
                for (int c = 0; c < n; ++c) pv->grad[static_cast<size_t>(r)] += o.grad[static_cast<size_t>(r) * n + c];
        }
    });
}

Tensor div_colvec(const Tensor& a, const Tensor& v) {
    check_rank2(a, "div_colvec");
    const int m = a.shape()[0], n = a.shape()[1];
    if (v.shape().size() != 1 || v.shape()[0] != m) shape_fail("div_colvec", a.shape(), v.shape());
    auto out = make_node(a.shape());
    for (int r = 0; r < m; ++r)
        for (int c = 0; c < n; ++c) out->val[static_cast<size_t>(r) * n + c] = a.at(r, c) / v.at(r);
    auto pa = a.node(), pv = v.node();
    return finish(out, {pa, pv}, [pa, pv, m, n](detail::Node& o) {
        if (pa->requires_grad) {
            pa->ensure_grad();
            for (int r = 0; r < m; ++r)
                for (int c = 0; c < n; ++c)
                    pa->grad[static_cast<size_t>(r) * n + c] += o.grad[static_cast<size_t>(r) * n + c] / pv->val[static_cast<size_t>(r)];
        }
        if (pv->requires_grad) {
            pv->ensure_grad();
            for (int r = 0; r < m; ++r) {
                const double vr = pv->val[static_cast<size_t>(r)];
                double acc = 0.0;
                for (int c = 0; c < n; ++c)
                    acc -= o.grad[static_cast<size_t>(r) * n + c] * pa->val[static_cast<size_t>(r) * n + c];
                pv->grad[static_cast<size_t>(r)] += acc / (vr * vr);
            }
        }
    });
}

Tensor masked_mean(const Tensor& a, const std::vector<double>& mask) {
    check_rank2(a, "masked_mean");
    const int m = a.shape()[0], n = a.shape()[1];
    if (static_cast<int>(mask.size()) != m)
        throw NumericalError("masked_mean: mask size " + std::to_string(mask.size()) + " for " + shape_str(a.shape()));
    double cnt = 0.0;
    for (double v : mask) cnt += (v != 0.0) ? 1.0 : 0.0;
    auto out = make_node({n});
    if (cnt > 0.0) {
        for (int r = 0; r < m; ++r) {
            if (mask[static_cast<size_t>(r)] == 0.0) continue;
            for (int c = 0; c < n; ++c) out->val[static_cast<size_t>(c)] += a.at(r, c);
        }
        for (int c = 0; c < n; ++c) out->val[static_cast<size_t>(c)] /= cnt;
    }
    auto pa = a.node();
    auto msk = mask;
    return finish(out, {pa}, [pa, msk, m, n, cnt](detail::Node& o) {
        if (cnt == 0.0) return;
        pa->ensure_grad();
        for (int r = 0; r < m; ++r) {
            if (msk[static_cast<size_t>(r)] == 0.0) continue;
            for (int c = 0; c < n; ++c) pa->grad[static_cast<size_t>(r) * n + c] += o.grad[static_cast<size_t>(c)] / cnt;
        }
    });
}

namespace {

constexpr double kNormEps = 1e-9;

void l2n_row(const double* x, double* y, int n, double& norm_out) {
    double s = 0.0;
    for (int i = 0; i < n; ++i) s += x[i] * x[i];
    const double norm = std::sqrt(s);
    norm_out = norm;
    if (norm < kNormEps) {
        for (int i = 0; i < n; ++i) y[i] = 0.0;
    } else {
        for (int i = 0; i < n; ++i) y[i] = x[i] / norm;
    }
}

}  // namespace

Tensor l2_normalize(const Tensor& a) {
    const bool vec = a.shape().size() == 1;
    if (!vec) check_rank2(a, "l2_normalize");
    const int m = vec ? 1 : a.shape()[0];
    const int n = vec ? a.shape()[0] : a.shape()[1];
    auto out = make_node(a.shape());
    std::vector<double> norms(static_cast<size_t>(m));
    for (int r = 0; r < m; ++r)
        l2n_row(a.data() + static_cast<size_t>(r) * n, out->val.data() + static_cast<size_t>(r) * n, n,
                norms[static_cast<size_t>(r)]);
    auto pa = a.node();
    return finish(out, {pa}, [pa, m, n, norms](detail::Node& o) {
        pa->ensure_grad();
        // dx = (dy - y * (y . dy)) / |x|
        for (int r = 0; r < m; ++r) {
            const double norm = norms[static_cast<size_t>(r)];
            if (norm < kNormEps) continue;
            const double* y = o.val.data() + static_cast<size_t>(r) * n;
            const double* gy = o.grad.data() + static_cast<size_t>(r) * n;
            double* gx = pa->grad.data() + static_cast<size_t>(r) * n;
            double d = 0.0;
            for (int c = 0; c < n; ++c) d += y[c] * gy[c];
            for (int c = 0; c < n; ++c) gx[c] += (gy[c] - y[c] * d) / norm;
        }
    });
}

Tensor softmax_rows(const Tensor& a, const std::vector<double>* keep) {
    check_rank2(a, "softmax_rows");
    const int m = a.shape()[0], n = a.shape()[1];
    if (keep && static_cast<int>(keep->size()) != n)
        throw NumericalError("softmax_rows: keep mask size " + std::to_string(keep->size()) + " for " + shape_str(a.shape()));
    auto out = make_node({m, n});
    for (int r = 0; r < m; ++r) {
        double mx = -1e300;
        for (int c = 0; c < n; ++c)
            if ((!keep || (*keep)[static_cast<size_t>(c)] != 0.0) && a.at(r, c) > mx) mx = a.at(r, c);
        double z = 0.0;
        for (int c = 0; c < n; ++c) {
            double e = (!keep || (*keep)[static_cast<size_t>(c)] != 0.0) ? std::exp(a.at(r, c) - mx) : 0.0;
            out->val[static_cast<size_t>(r) * n + c] = e;
            z += e;
        }
        if (z > 0.0)
            for (int c = 0; c < n; ++c) out->val[static_cast<size_t>(r) * n + c] /= z;
    }
    auto pa = a.node();
    return finish(out, {pa}, [pa, m, n](detail::Node& o) {
        pa->ensure_grad();
        for (int r = 0; r < m; ++r) {
            const double* y = o.val.data() + static_cast<size_t>(r) * n;
            const double* gy = o.grad.data() + static_cast<size_t>(r) * n;
            double d = 0.0;
            for (int c = 0; c < n; ++c) d += y[c] * gy[c];
            double* gx = pa->grad.data() + static_cast<size_t>(r) * n;
            for (int c = 0; c < n; ++c) gx[c] += y[c] * (gy[c] - d);
        }
    });
}

Tensor logsumexp_rows(const Tensor& a) {
    check_rank2(a, "logsumexp_rows");
    const int m = a.shape()[0], n = a.shape()[1];
    auto out = make_node({m});
    std::vector<double> w(static_cast<size_t>(m) * n);  // softmax weights for backward
    for (int r = 0; r < m; ++r) {
        double mx = a.at(r, 0);
        for (int c = 1; c < n; ++c) mx = std::max(mx, a.at(r, c));
        double z = 0.0;
        for (int c = 0; c < n; ++c) {
            const double e = std::exp(a.at(r, c) - mx);
            w[static_cast<size_t>(r) * n + c] = e;
            z += e;
        }
        out->val[static_cast<size_t>(r)] = mx + std::log(z);
        for (int c = 0; c < n; ++c) w[static_cast<size_t>(r) * n + c] /= z;
    }
    auto pa = a.node();
    return finish(out, {pa}, [pa, m, n, w = std::move(w)](detail::Node& o) {
        pa->ensure_grad();
        for (int r = 0; r < m; ++r)
            for (int c = 0; c < n; ++c)
                pa->grad[static_cast<size_t>(r) * n + c] += o.grad[static_cast<size_t>(r)] * w[static_cast<size_t>(r) * n + c];
    });
}

Tensor diag(const Tensor& a) {
    check_rank2(a, "diag");
    const int m = a.shape()[0];
    if (a.shape()[1] != m) throw NumericalError("diag: square matrix required, got " + shape_str(a.shape()));
    auto out = make_node({m});
    for (int r = 0; r < m; ++r) out->val[static_cast<size_t>(r)] = a.at(r, r);
    auto pa = a.node();
    return finish(out, {pa}, [pa, m](detail::Node& o) {
        pa->ensure_grad();
        for (int r = 0; r < m; ++r) pa->grad[static_cast<size_t>(r) * m + r] += o.grad[static_cast<size_t>(r)];
    });
}

Tensor layer_norm_rows(const Tensor& a, const Tensor& gain, const Tensor& bias, double eps) {
    check_rank2(a, "layer_norm_rows");
    const int m = a.shape()[0], n = a.shape()[1];
    if (gain.shape() != Shape{n} || bias.shape() != Shape{n})
        shape_fail("layer_norm_rows", a.shape(), gain.shape());
    auto out = make_node({m, n});
    std::vector<double> xhat(static_cast<size_t>(m) * n);
    std::vector<double> inv_std(static_cast<size_t>(m));
    for (int r = 0; r < m; ++r) {
        double mu = 0.0;
        for (int c = 0; c < n; ++c) mu += a.at(r, c);
        mu /= n;
        double var = 0.0;
        for (int c = 0; c < n; ++c) {
            const double d = a.at(r, c) - mu;
            var += d * d;
        }
        var /= n;
        const double is = 1.0 / std::sqrt(var + eps);
        inv_std[static_cast<size_t>(r)] = is;
        for (int c = 0; c < n; ++c) {
            const double xh = (a.at(r, c) - mu) * is;
            xhat[static_cast<size_t>(r) * n + c] = xh;
            out->val[static_cast<size_t>(r) * n + c] = xh * gain.at(c) + bias.at(c);
        }
    }
    auto pa = a.node(), pg = gain.node(), pb = bias.node();
    return finish(out, {pa, pg, pb},
                  [pa, pg, pb, m, n, xhat = std::move(xhat), inv_std = std::move(inv_std)](detail::Node& o) {
        for (int r = 0; r < m; ++r) {
            const double* xh = xhat.data() + static_cast<size_t>(r) * n;
            const double* gy = o.grad.data() + static_cast<size_t>(r) * n;
            if (pg->requires_grad) {
                pg->ensure_grad();
                for (int c = 0; c < n; ++c) pg->grad[static_cast<size_t>(c)] += gy[c] * xh[c];
            }
            if (pb->requires_grad) {
                pb->ensure_grad();
                for (int c = 0; c < n; ++c) pb->grad[static_cast<size_t>(c)] += gy[c];
            }
            if (pa->requires_grad) {
                pa->ensure_grad();
                // d xhat = g * gy; dx = (dxhat - mean(dxhat) - xhat * mean(dxhat*xhat)) * inv_std
                double s1 = 0.0, s2 = 0.0;
                for (int c = 0; c < n; ++c) {
                    const double dxh = gy[c] * pg->val[static_cast<size_t>(c)];
                    s1 += dxh;
                    s2 += dxh * xh[c];
                }
                s1 /= n;
                s2 /= n;
                double* gx = pa->grad.data() + static_cast<size_t>(r) * n;
                for (int c = 0; c < n; ++c) {
                    const double dxh = gy[c] * pg->val[static_cast<size_t>(c)];
                    gx[c] += (dxh - s1 - xh[c] * s2) * inv_std[static_cast<size_t>(r)];
                }
            }
        }
    });
}

Tensor dot(const Tensor& a, const Tensor& b) {
    if (a.shape().size() != 1 || a.shape() != b.shape()) shape_fail("dot", a.shape(), b.shape());
    return sum(mul(a, b));
}

Tensor cosine_sim(const Tensor& a, const Tensor& b) {
    double na = 0.0, nb = 0.0;
    for (double v : a.values()) na += v * v;
    for (double v : b.values()) nb += v * v;
    if (na < 1e-24 || nb < 1e-24) return Tensor::scalar(0.0);
    return dot(l2_normalize(a), l2_normalize(b));
}

double cosine_sim_value(const std::vector<double>& a, const std::vector<double>& b) {
    double na = 0.0, nb = 0.0, d = 0.0;
    for (size_t i = 0; i < a.size(); ++i) {
        na += a[i] * a[i];
        nb += b[i] * b[i];
        d += a[i] * b[i];
    }
    if (na < 1e-24 || nb < 1e-24) return 0.0;
    return d / (std::sqrt(na) * std::sqrt(nb));
}

}  // namespace trajod
