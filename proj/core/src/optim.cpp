#include "trajod/optim.hpp"

#include <cmath>

namespace trajod {

double lr_at(int epoch, double lr0, double decay, int step_epochs) {
    return lr0 * std::pow(decay, epoch / step_epochs);
}

Adam::Adam(std::vector<Tensor> params, Hyper hyper) : params_(std::move(params)), h_(hyper) {
    m_.resize(params_.size());
    v_.resize(params_.size());
    for (size_t i = 0; i < params_.size(); ++i) {
        m_[i].assign(params_[i].values().size(), 0.0);
        v_[i].assign(params_[i].values().size(), 0.0);
    }
}

void Adam::step(double lr) {
    ++t_;
    const double bc1 = 1.0 - std::pow(h_.beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(h_.beta2, static_cast<double>(t_));
    for (size_t i = 0; i < params_.size(); ++i) {
        auto& p = params_[i].values();
        const auto& g = params_[i].grad();
        auto& m = m_[i];
        auto& v = v_[i];
        for (size_t j = 0; j < p.size(); ++j) {
            m[j] = h_.beta1 * m[j] + (1.0 - h_.beta1) * g[j];
            v[j] = h_.beta2 * v[j] + (1.0 - h_.beta2) * g[j] * g[j];
            const double mhat = m[j] / bc1;
            const double vhat = v[j] / bc2;
            p[j] -= lr * mhat / (std::sqrt(vhat) + h_.eps);
        }
    }
    zero_grad();
}

void Adam::zero_grad() {
    for (auto& p : params_) p.zero_grad();
}

}  // namespace trajod
