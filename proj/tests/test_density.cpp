#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>

#include "crowdlab/density.hpp"
#include "crowdlab/rng.hpp"

using namespace crowdlab;

namespace {

std::vector<PointAnnotation> random_points(Rng& rng, std::size_t max_n, std::size_t h,
                                           std::size_t w) {
    std::vector<PointAnnotation> pts;
    const std::size_t n = rng.uniform_index(max_n + 1);
    for (std::size_t i = 0; i < n; ++i)
        pts.push_back({rng.uniform(0.0, static_cast<double>(w) - 1e-9),
                       rng.uniform(0.0, static_cast<double>(h) - 1e-9)});
    return pts;
}

} // namespace

TEST_CASE("density mass equals the point count") {
    Rng rng(123);
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t h = 16 + rng.uniform_index(48);
        const std::size_t w = 16 + rng.uniform_index(48);
        const auto pts = random_points(rng, 50, h, w);
        const double sigma = rng.uniform(0.5, 6.0);
        const DensityMap dm = generate_density_map(pts, h, w, sigma);
        CHECK(std::abs(count_from_density(dm) - static_cast<double>(pts.size())) <= 1e-3);
        for (double v : dm.values) CHECK(v >= 0.0);
    }
}

TEST_CASE("border points keep unit mass through renormalization") {
    const DensityMap dm = generate_density_map({{0.0, 0.0}}, 32, 32, 4.0);
    CHECK(count_from_density(dm) == Catch::Approx(1.0).margin(1e-9));
}

TEST_CASE("density map is bit-exactly independent of point order") {
    std::vector<PointAnnotation> pts{{3.2, 7.7}, {15.0, 1.0}, {8.8, 8.8}, {0.5, 12.0}};
    const DensityMap a = generate_density_map(pts, 20, 20, 2.0);
    std::reverse(pts.begin(), pts.end());
    const DensityMap b = generate_density_map(pts, 20, 20, 2.0);
    CHECK(a.values == b.values); // exact double equality
}

TEST_CASE("downsampling preserves mass exactly per block") {
    Rng rng(9);
    for (int trial = 0; trial < 20; ++trial) {
        const auto pts = random_points(rng, 30, 64, 64);
        const DensityMap dm = generate_density_map(pts, 64, 64, 3.0);
        for (std::size_t factor : {2, 4, 8}) {
            const DensityMap down = downsample_density(dm, factor);
            CHECK(down.height == 64 / factor);
            CHECK(std::abs(count_from_density(down) - count_from_density(dm)) <= 1e-9);
            // Spot-check one block sum.
            double block = 0.0;
            for (std::size_t r = 0; r < factor; ++r)
                for (std::size_t c = 0; c < factor; ++c) block += dm.at(r, c);
            CHECK(down.at(0, 0) == Catch::Approx(block).margin(1e-12));
        }
    }
}

TEST_CASE("density error codes") {
    CHECK_THROWS_AS(generate_density_map({}, 8, 8, 0.0), Error);
    CHECK_THROWS_AS(generate_density_map({{8.0, 0.0}}, 8, 8, 1.0), Error); // x == width
    try {
        generate_density_map({{0.0, -1.0}}, 8, 8, 1.0);
        FAIL("expected an error");
    } catch (const Error& e) {
        CHECK(e.code() == "OutOfBoundsPoint");
    }
    const DensityMap dm = generate_density_map({{4.0, 4.0}}, 9, 9, 1.0);
    try {
        downsample_density(dm, 2); // 9 not divisible by 2
        FAIL("expected an error");
    } catch (const Error& e) {
        CHECK(e.code() == "NonDivisibleShape");
    }
}

TEST_CASE("sigma below the truncation floor is rejected, not silently zero") {
    // 4*sigma < 0.5 can miss every pixel center for off-center points.
    CHECK_THROWS_AS(generate_density_map({{3.5, 3.5}}, 8, 8, 0.05), Error);
}
