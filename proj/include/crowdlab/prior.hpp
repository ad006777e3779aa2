#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include <json.hpp>

#include "crowdlab/error.hpp"
#include "crowdlab/rng.hpp"

namespace crowdlab {

/// Truncated power law p(c) proportional to c^-alpha on [c_min, c_max],
/// modelling per-crop crowd counts.
struct PriorSpec {
    double alpha = 2.0;
    double c_min = 1.0;
    double c_max = 100.0;

    void validate() const {
        require(alpha > 1.0, "BadSpec", "prior alpha must be > 1");
        require(c_min > 0.0, "BadSpec", "prior c_min must be > 0");
        require(c_min < c_max, "BadSpec", "prior requires c_min < c_max");
    }

    // Normalizing constant of the unnormalized density c^-alpha.
    double z() const {
        const double e = 1.0 - alpha;
        return (std::pow(c_max, e) - std::pow(c_min, e)) / e;
    }

    double cdf(double c) const {
        if (c <= c_min) return 0.0;
        if (c >= c_max) return 1.0;
        const double e = 1.0 - alpha;
        return (std::pow(c, e) - std::pow(c_min, e)) / (std::pow(c_max, e) - std::pow(c_min, e));
    }

    double inverse_cdf(double u) const {
        const double e = 1.0 - alpha;
        const double lo = std::pow(c_min, e), hi = std::pow(c_max, e);
        return std::pow(lo + u * (hi - lo), 1.0 / e);
    }

    /// Closed-form mean of the truncated power law.
    double mean() const {
        validate();
        const double numer = (alpha == 2.0)
                                 ? std::log(c_max / c_min)
                                 : (std::pow(c_max, 2.0 - alpha) - std::pow(c_min, 2.0 - alpha)) /
                                       (2.0 - alpha);
        return numer / z();
    }

    static PriorSpec from_json(const nlohmann::json& j) {
        PriorSpec s;
        if (j.contains("alpha")) s.alpha = j.at("alpha").get<double>();
        if (j.contains("cmin")) s.c_min = j.at("cmin").get<double>();
        if (j.contains("cmax")) s.c_max = j.at("cmax").get<double>();
        s.validate();
        return s;
    }

    nlohmann::json to_json() const {
        return {{"alpha", alpha}, {"cmin", c_min}, {"cmax", c_max}};
    }
};

/// n i.i.d. inverse-CDF draws, sorted ascending.
inline std::vector<double> sample_prior(const PriorSpec& spec, std::size_t n, Rng& rng) {
    spec.validate();
    require(n >= 1, "BadSpec", "sample_prior needs n >= 1");
    std::vector<double> samples(n);
    for (auto& s : samples) s = spec.inverse_cdf(rng.uniform());
    std::sort(samples.begin(), samples.end());
    return samples;
}

} // namespace crowdlab
