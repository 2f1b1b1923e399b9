#pragma once

#include <string>
#include <vector>

#include "trajod/tensor.hpp"

namespace trajod {

/// Stepped exponential decay: lr0 * decay^(epoch / step_epochs).
double lr_at(int epoch, double lr0 = 5e-3, double decay = 0.9, int step_epochs = 50);

struct AdamHyper {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

/// Adam with bias correction. Moment buffers are keyed by parameter index;
/// the parameter list is fixed at construction.
class Adam {
public:
    using Hyper = AdamHyper;

    explicit Adam(std::vector<Tensor> params, Hyper hyper = Hyper());

    /// Applies one update from the accumulated gradients, then clears them.
    void step(double lr);

    void zero_grad();
    int64_t step_count() const { return t_; }
    const std::vector<Tensor>& params() const { return params_; }

private:
    std::vector<Tensor> params_;
    std::vector<std::vector<double>> m_, v_;
    Hyper h_;
    int64_t t_ = 0;
};

}  // namespace trajod
