#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "crowdlab/error.hpp"
#include "crowdlab/tensor.hpp"

namespace crowdlab {

struct DiscreteDistribution {
    std::vector<double> weights; // non-negative, sums to 1
    std::vector<double> support; // real values, same length

    void validate() const {
        require(weights.size() == support.size(), "DimensionMismatch",
                "weights/support length mismatch");
        require(!weights.empty(), "DimensionMismatch", "empty distribution");
        double s = 0.0;
        for (double w : weights) {
            require(w > 0.0, "DimensionMismatch",
                    "weights must be strictly positive (drop zero atoms first)");
            s += w;
        }
        require(std::abs(s - 1.0) <= 1e-9, "DimensionMismatch", "weights must sum to 1");
    }

    static DiscreteDistribution uniform_on(std::vector<double> support) {
        DiscreteDistribution d;
        d.weights.assign(support.size(), 1.0 / static_cast<double>(support.size()));
        d.support = std::move(support);
        return d;
    }
};

/// Squared difference of scalar support values.
inline Tensor<double> squared_cost(const std::vector<double>& x, const std::vector<double>& y) {
    Tensor<double> c({x.size(), y.size()});
    for (std::size_t i = 0; i < x.size(); ++i)
        for (std::size_t j = 0; j < y.size(); ++j) {
            const double d = x[i] - y[j];
            c.at(i, j) = d * d;
        }
    return c;
}

struct SinkhornResult {
    Tensor<double> plan;     // n x m, marginals match a and b within tol
    double distance = 0.0;   // <P, C>, entropic term excluded
    bool converged = false;
    std::size_t iterations = 0;
    double marginal_violation = 0.0;
};

/// Entropy-regularized optimal transport by iterative scaling on
/// K = exp(-C/eps), run in the log domain (dual potentials f, g).
inline SinkhornResult sinkhorn(const DiscreteDistribution& a, const DiscreteDistribution& b,
                               const Tensor<double>& cost, double eps,
                               std::size_t max_iter = 500, double tol = 1e-6) {
    a.validate();
    b.validate();
    require(eps > 0.0, "DimensionMismatch", "eps must be > 0");
    const std::size_t n = a.weights.size(), m = b.weights.size();
    require(cost.rank() == 2 && cost.dim(0) == n && cost.dim(1) == m, "DimensionMismatch",
            "cost matrix shape mismatch");

    std::vector<double> log_a(n), log_b(m), f(n, 0.0), g(m, 0.0);
    for (std::size_t i = 0; i < n; ++i) log_a[i] = std::log(a.weights[i]);
    for (std::size_t j = 0; j < m; ++j) log_b[j] = std::log(b.weights[j]);

    auto lse_row = [&](std::size_t i) {
        double mx = -std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < m; ++j)
            mx = std::max(mx, (g[j] - cost.at(i, j)) / eps);
        double s = 0.0;
        for (std::size_t j = 0; j < m; ++j) s += std::exp((g[j] - cost.at(i, j)) / eps - mx);
        return mx + std::log(s);
    };
    auto lse_col = [&](std::size_t j) {
        double mx = -std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < n; ++i)
            mx = std::max(mx, (f[i] - cost.at(i, j)) / eps);
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i) s += std::exp((f[i] - cost.at(i, j)) / eps - mx);
        return mx + std::log(s);
    };

    SinkhornResult result;
    result.plan = Tensor<double>({n, m});
    auto fill_plan = [&]() {
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < m; ++j)
                result.plan.at(i, j) = std::exp((f[i] + g[j] - cost.at(i, j)) / eps);
    };
    auto violation = [&]() {
        double worst = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            double row = 0.0;
            for (std::size_t j = 0; j < m; ++j) row += result.plan.at(i, j);
            worst = std::max(worst, std::abs(row - a.weights[i]));
        }
        for (std::size_t j = 0; j < m; ++j) {
            double col = 0.0;
            for (std::size_t i = 0; i < n; ++i) col += result.plan.at(i, j);
            worst = std::max(worst, std::abs(col - b.weights[j]));
        }
        return worst;
    };

    for (std::size_t it = 0; it < max_iter; ++it) {
        for (std::size_t i = 0; i < n; ++i) f[i] = eps * (log_a[i] - lse_row(i));
        for (std::size_t j = 0; j < m; ++j) g[j] = eps * (log_b[j] - lse_col(j));
        result.iterations = it + 1;
        fill_plan();
        result.marginal_violation = violation();
        if (result.marginal_violation <= tol) {
            result.converged = true;
            break;
        }
    }
    // NonConvergence is reported through the flag; the best iterate is kept.

    double dist = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < m; ++j) dist += result.plan.at(i, j) * cost.at(i, j);
    result.distance = dist;
    return result;
}

} // namespace crowdlab
