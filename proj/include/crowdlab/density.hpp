#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include "crowdlab/dataset_io.hpp"
#include "crowdlab/error.hpp"

namespace crowdlab {

/// Per-pixel person density; sum over the grid equals the annotated count.
struct DensityMap {
    std::size_t height = 0;
    std::size_t width = 0;
    std::vector<double> values; // row-major, height*width

    double& at(std::size_t r, std::size_t c) { return values[r * width + c]; }
    double at(std::size_t r, std::size_t c) const { return values[r * width + c]; }
};

/// One truncated isotropic Gaussian per point, truncated at radius 4*sigma
/// and renormalized after truncation/border clipping so each person
/// contributes mass exactly 1. Kernels accumulate row-major per point, so
/// the result is bit-exact regardless of point ordering.
inline DensityMap generate_density_map(const std::vector<PointAnnotation>& points,
                                       std::size_t height, std::size_t width, double sigma) {
    require(sigma > 0.0, "NonPositiveSigma", "sigma must be > 0");
    DensityMap map;
    map.height = height;
    map.width = width;
    map.values.assign(height * width, 0.0);

    const double radius = 4.0 * sigma;
    const double inv_two_sigma2 = 1.0 / (2.0 * sigma * sigma);

    // Canonical accumulation order makes the map bit-exactly independent of
    // the caller's point ordering.
    std::vector<PointAnnotation> sorted = points;
    std::sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) {
        return a.y != b.y ? a.y < b.y : a.x < b.x;
    });

    for (const auto& p : sorted) {
        const bool in_bounds = p.x >= 0.0 && p.x < static_cast<double>(width) && p.y >= 0.0 &&
                               p.y < static_cast<double>(height);
        require(in_bounds, "OutOfBoundsPoint", "annotation point outside the grid");

        const long r0 = std::max<long>(0, static_cast<long>(std::ceil(p.y - radius)));
        const long r1 = std::min<long>(static_cast<long>(height) - 1,
                                       static_cast<long>(std::floor(p.y + radius)));
        const long c0 = std::max<long>(0, static_cast<long>(std::ceil(p.x - radius)));
        const long c1 = std::min<long>(static_cast<long>(width) - 1,
                                       static_cast<long>(std::floor(p.x + radius)));

        // First pass: unnormalized kernel mass inside grid and radius.
        double mass = 0.0;
        for (long r = r0; r <= r1; ++r) {
            for (long c = c0; c <= c1; ++c) {
                const double dy = static_cast<double>(r) - p.y;
                const double dx = static_cast<double>(c) - p.x;
                const double d2 = dx * dx + dy * dy;
                if (d2 > radius * radius) continue;
                mass += std::exp(-d2 * inv_two_sigma2);
            }
        }
        // Can only trip for sigma < ~0.18 px where 4*sigma misses every pixel center.
        require(mass > 0.0, "NonPositiveSigma",
                "kernel fully truncated; sigma too small for this grid");

        const double scale = 1.0 / mass;
        for (long r = r0; r <= r1; ++r) {
            for (long c = c0; c <= c1; ++c) {
                const double dy = static_cast<double>(r) - p.y;
                const double dx = static_cast<double>(c) - p.x;
                const double d2 = dx * dx + dy * dy;
                if (d2 > radius * radius) continue;
                map.at(static_cast<std::size_t>(r), static_cast<std::size_t>(c)) +=
                    std::exp(-d2 * inv_two_sigma2) * scale;
            }
        }
    }
    return map;
}

inline double count_from_density(const DensityMap& map) {
    double s = 0.0;
    for (double v : map.values) s += v;
    return s;
}

/// Sum-pooling by factor x factor blocks; total mass preserved.
inline DensityMap downsample_density(const DensityMap& map, std::size_t factor) {
    require(factor >= 1, "NonDivisibleShape", "factor must be >= 1");
    require(map.height % factor == 0 && map.width % factor == 0, "NonDivisibleShape",
            "factor must divide both dimensions");
    DensityMap out;
    out.height = map.height / factor;
    out.width = map.width / factor;
    out.values.assign(out.height * out.width, 0.0);
    for (std::size_t r = 0; r < map.height; ++r) {
        for (std::size_t c = 0; c < map.width; ++c) {
            out.at(r / factor, c / factor) += map.at(r, c);
        }
    }
    return out;
}

} // namespace crowdlab
