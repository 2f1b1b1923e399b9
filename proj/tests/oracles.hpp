// Independent reference implementations used to check the library:
// finite-difference gradients, brute-force ranking metrics, and
// straight-from-formula score evaluation. Nothing here calls back into the
// code paths under test.
#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "trajod/tensor.hpp"

namespace oracles {

/// Relative error with a small floor so gradients at the finite-difference
/// noise level do not produce spurious ratios.
inline double rel_err(double a, double b, double floor = 1e-2) {
    return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

struct FdResult {
    double max_rel_err = 0.0;
    int checked = 0;
    std::string worst;
};

/// Central finite differences over every coordinate of every parameter.
/// loss_fn must rebuild the forward graph from the parameters' current
/// values and return the loss tensor.
inline FdResult fd_check(const std::function<trajod::Tensor()>& loss_fn,
                         std::vector<std::pair<std::string, trajod::Tensor>> params,
                         double h = 1e-5) {
    using trajod::NoGradGuard;
    using trajod::Tensor;

    for (auto& [name, p] : params) p.zero_grad();
    const Tensor loss = loss_fn();
    loss.backward();
    std::vector<std::vector<double>> grads;
    grads.reserve(params.size());
    for (const auto& [name, p] : params) grads.push_back(p.grad());

    FdResult res;
    for (size_t pi = 0; pi < params.size(); ++pi) {
        auto& vals = params[pi].second.values();
        for (size_t i = 0; i < vals.size(); ++i) {
            const double orig = vals[i];
            double fplus, fminus;
            {
                NoGradGuard ng;
                vals[i] = orig + h;
                fplus = loss_fn().value();
                vals[i] = orig - h;
                fminus = loss_fn().value();
                vals[i] = orig;
            }
            const double fd = (fplus - fminus) / (2.0 * h);
            const double ad = grads[pi][i];
            const double e = rel_err(ad, fd);
            ++res.checked;
            if (e > res.max_rel_err) {
                res.max_rel_err = e;
                res.worst = params[pi].first + "[" + std::to_string(i) + "] ad=" +
                            std::to_string(ad) + " fd=" + std::to_string(fd);
            }
        }
    }
    return res;
}

/// Runs the forward once with the relu kink watch active; true when every
/// relu preactivation stays safely away from zero for steps of size h
/// (a single-coordinate step of h moves any preactivation by O(h)).
inline bool relu_safe(const std::function<trajod::Tensor()>& loss_fn, double h = 1e-5) {
    trajod::detail::reset_relu_watch();
    trajod::detail::set_relu_watch(true);
    {
        trajod::NoGradGuard ng;
        (void)loss_fn();
    }
    trajod::detail::set_relu_watch(false);
    const double margin = trajod::detail::relu_watch_min();
    return margin > 20.0 * h;
}

/// O(n^2) average precision: for every positive, count items ranked above
/// it (score desc, index asc) and take precision at that rank.
inline double brute_average_precision(const std::vector<double>& scores,
                                      const std::vector<int>& labels) {
    const size_t n = scores.size();
    double ap = 0.0;
    int positives = 0;
    for (size_t i = 0; i < n; ++i) {
        if (!labels[i]) continue;
        ++positives;
        int rank = 1, tp = 1;
        for (size_t j = 0; j < n; ++j) {
            if (j == i) continue;
            const bool above = scores[j] > scores[i] || (scores[j] == scores[i] && j < i);
            if (above) {
                ++rank;
                if (labels[j]) ++tp;
            }
        }
        ap += static_cast<double>(tp) / rank;
    }
    return ap / positives;
}

/// Pairwise Mann-Whitney AUC, ties at 0.5.
inline double brute_roc_auc(const std::vector<double>& scores, const std::vector<int>& labels) {
    double wins = 0.0;
    int64_t pairs = 0;
    for (size_t i = 0; i < scores.size(); ++i) {
        if (!labels[i]) continue;
        for (size_t j = 0; j < scores.size(); ++j) {
            if (labels[j]) continue;
            ++pairs;
            if (scores[i] > scores[j])
                wins += 1.0;
            else if (scores[i] == scores[j])
                wins += 0.5;
        }
    }
    return wins / static_cast<double>(pairs);
}

}  // namespace oracles
