#pragma once

#include <cmath>
#include <numbers>
#include <span>
#include <vector>

#include "mammopos/common.hpp"

namespace mammopos {

/// log(cosh(d)) evaluated as |d| + log(1 + e^(-2|d|)) - log 2 so large
/// residuals behave like |d| - log 2 instead of overflowing cosh.
inline double log_cosh(double d) {
    const double a = std::abs(d);
    return a + std::log1p(std::exp(-2.0 * a)) - std::numbers::ln2;
}

inline double log_cosh_loss(std::span<const double> y_true, std::span<const double> y_pred) {
    if (y_true.size() != y_pred.size())
        throw ContractError("log_cosh_loss: mismatched lengths");
    double sum = 0.0;
    for (std::size_t i = 0; i < y_true.size(); ++i) sum += log_cosh(y_true[i] - y_pred[i]);
    return sum;
}

/// dL/dy_pred, componentwise; bounded in (-1, 1) by tanh saturation.
inline std::vector<double> loss_gradient(std::span<const double> y_true,
                                         std::span<const double> y_pred) {
    if (y_true.size() != y_pred.size())
        throw ContractError("loss_gradient: mismatched lengths");
    std::vector<double> g(y_true.size());
    for (std::size_t i = 0; i < y_true.size(); ++i) g[i] = -std::tanh(y_true[i] - y_pred[i]);
    return g;
}

}  // namespace mammopos
