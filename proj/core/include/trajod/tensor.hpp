#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace trajod {

/// Dense row-major tensor shapes; rank 0 (scalar), 1 (vector) or 2 (matrix).
using Shape = std::vector<int>;

std::string shape_str(const Shape& s);

namespace detail {

/// Test support: when enabled, relu() records the smallest |preactivation|
/// seen, so finite-difference harnesses can reject inputs that sit on the
/// kink.
void set_relu_watch(bool enabled);
double relu_watch_min();
void reset_relu_watch();

struct Node {
    Shape shape;
    std::vector<double> val;
    std::vector<double> grad;  // allocated lazily, same length as val
    bool requires_grad = false;
    std::vector<std::shared_ptr<Node>> parents;
    std::function<void(Node&)> backward;  // scatter node.grad into parents

    void ensure_grad() {
        if (grad.size() != val.size()) grad.assign(val.size(), 0.0);
    }
};

}  // namespace detail

/// True while reverse-mode taping is active (default). Ops computed with
/// taping off produce constant leaves regardless of their inputs.
bool grad_enabled();

/// RAII scope that disables taping; used for frozen submodules and inference.
struct NoGradGuard {
    NoGradGuard();
    ~NoGradGuard();

private:
    bool prev_;
};

/// Value-semantics handle to one node of the computation graph. All values
/// are 64-bit floats.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(std::shared_ptr<detail::Node> n) : n_(std::move(n)) {}

    static Tensor zeros(Shape shape, bool requires_grad = false);
    static Tensor full(Shape shape, double v, bool requires_grad = false);
    static Tensor from_values(Shape shape, std::vector<double> vals, bool requires_grad = false);
    static Tensor scalar(double v);

    bool defined() const { return n_ != nullptr; }
    const Shape& shape() const { return n_->shape; }
    int64_t size() const { return static_cast<int64_t>(n_->val.size()); }
    int rows() const;
    int cols() const;

    double value() const;  // rank-0 only
    double at(int64_t i) const { return n_->val[static_cast<size_t>(i)]; }
    double at(int r, int c) const;

    std::vector<double>& values() { return n_->val; }
    const std::vector<double>& values() const { return n_->val; }
    double* data() { return n_->val.data(); }
    const double* data() const { return n_->val.data(); }

    bool requires_grad() const { return n_ && n_->requires_grad; }
    const std::vector<double>& grad() const;
    void zero_grad();

    /// Reverse-mode sweep from a rank-0 root.
    void backward() const;

    /// Copy of the values as a fresh constant leaf.
    Tensor detach() const;

    std::shared_ptr<detail::Node> node() const { return n_; }

private:
    std::shared_ptr<detail::Node> n_;
};

// ---- op set -------------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b);     // [m,k]x[k,n] -> [m,n]
Tensor matmul_nt(const Tensor& a, const Tensor& b);  // [m,k]x[n,k]^T -> [m,n]

Tensor add(const Tensor& a, const Tensor& b);  // same shape, or [m,n] + [n]
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);  // elementwise, same shape
Tensor div(const Tensor& a, const Tensor& b);  // elementwise, same shape
Tensor scale(const Tensor& a, double s);
Tensor add_const(const Tensor& a, double c);

Tensor tanh_op(const Tensor& a);
Tensor relu(const Tensor& a);
Tensor exp_op(const Tensor& a);
Tensor log_op(const Tensor& a);

Tensor sum(const Tensor& a);   // -> scalar
Tensor mean(const Tensor& a);  // -> scalar
Tensor row_sums(const Tensor& a);  // [m,n] -> [m]

Tensor concat_rows(const std::vector<Tensor>& parts);  // [m1,n]+[m2,n]+...
Tensor concat_cols(const std::vector<Tensor>& parts);  // [m,n1]+[m,n2]+...
Tensor slice_rows(const Tensor& a, int r0, int r1);
Tensor slice_cols(const Tensor& a, int c0, int c1);
Tensor reshape(const Tensor& a, Shape shape);

/// Broadcast helpers over rows of a [m,n] matrix.
Tensor add_colvec(const Tensor& a, const Tensor& v);  // a[r,c] + v[r]
Tensor div_colvec(const Tensor& a, const Tensor& v);  // a[r,c] / v[r]

/// Mean over rows with mask[r] != 0; [T,n] -> [n]. All-zero mask -> zeros.
Tensor masked_mean(const Tensor& a, const std::vector<double>& mask);

/// Rank-1: whole vector; rank-2: each row. Inputs with norm < 1e-9 map to
/// the zero vector (guarded branch, zero gradient).
Tensor l2_normalize(const Tensor& a);

/// Row-wise softmax; entries with keep[c] == 0 get weight 0 (masked keys).
Tensor softmax_rows(const Tensor& a, const std::vector<double>* keep = nullptr);

/// Numerically stable row-wise log(sum(exp)); [m,n] -> [m].
Tensor logsumexp_rows(const Tensor& a);

Tensor diag(const Tensor& a);  // [n,n] -> [n]

Tensor layer_norm_rows(const Tensor& a, const Tensor& gain, const Tensor& bias,
                       double eps = 1e-5);

Tensor dot(const Tensor& a, const Tensor& b);  // rank-1 -> scalar

/// a.b / (|a||b|); returns constant 0 if either norm is below 1e-12.
Tensor cosine_sim(const Tensor& a, const Tensor& b);

/// Plain-double cosine for scoring paths that never need gradients.
double cosine_sim_value(const std::vector<double>& a, const std::vector<double>& b);

}  // namespace trajod
