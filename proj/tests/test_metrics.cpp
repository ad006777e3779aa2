#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "crowdlab/metrics.hpp"
#include "crowdlab/rng.hpp"

using namespace crowdlab;

TEST_CASE("mae matches hand arithmetic on the scale-invariance fixture") {
    const std::vector<CountPair> pairs{{423.16, 427.0}, {286.89, 240.0}, {288.69, 320.0}};
    const double oracle = (3.84 + 46.89 + 31.31) / 3.0;
    CHECK(mae(pairs) == Catch::Approx(oracle).margin(1e-9));
    CHECK(mae(pairs) == Catch::Approx(27.3467).margin(1e-3));
}

TEST_CASE("mse matches hand arithmetic on the occlusion fixture") {
    const std::vector<CountPair> pairs{{139.35, 147.0}, {283.74, 279.0}, {223.75, 199.0}};
    const double oracle = (7.65 * 7.65 + 4.74 * 4.74 + 24.75 * 24.75) / 3.0;
    CHECK(mse(pairs) == Catch::Approx(oracle).margin(1e-9));
    CHECK(mse(pairs, true) == Catch::Approx(std::sqrt(oracle)).margin(1e-9));
}

TEST_CASE("f1 from precision/recall reproduces the reported score") {
    const PrfResult r = precision_recall_f1(0.91, 0.82);
    CHECK(r.f1 == Catch::Approx(2.0 * 0.91 * 0.82 / (0.91 + 0.82)).margin(1e-12));
    CHECK(r.f1 == Catch::Approx(0.8627).margin(1e-4));
    CHECK(std::round(r.f1 * 100.0) / 100.0 == Catch::Approx(0.86));
}

TEST_CASE("precision/recall/f1 from a confusion matrix") {
    ConfusionMatrix cm;
    cm.tp = 9;
    cm.fp = 1;
    cm.fn = 3;
    cm.tn = 7;
    const PrfResult r = precision_recall_f1(cm);
    CHECK(r.precision == Catch::Approx(0.9));
    CHECK(r.recall == Catch::Approx(0.75));
    CHECK(r.f1 == Catch::Approx(2.0 * 0.9 * 0.75 / 1.65));
    CHECK_FALSE(r.degenerate);
}

TEST_CASE("degenerate confusion matrices report zeros with the flag set") {
    ConfusionMatrix cm; // all zero
    const PrfResult r = precision_recall_f1(cm);
    CHECK(r.degenerate);
    CHECK(r.precision == 0.0);
    CHECK(r.recall == 0.0);
    CHECK(r.f1 == 0.0);
}

TEST_CASE("mae is bounded by rmse (Jensen) on random inputs") {
    Rng rng(42);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<CountPair> pairs;
        const std::size_t n = 1 + rng.uniform_index(30);
        for (std::size_t i = 0; i < n; ++i)
            pairs.push_back({rng.uniform(0.0, 500.0), rng.uniform(0.0, 500.0)});
        CHECK(mae(pairs) <= mse(pairs, true) + 1e-12);
    }
}

TEST_CASE("rotation accuracy counts exact label matches") {
    const std::vector<int> pred{0, 1, 2, 3, 0, 1};
    const std::vector<int> truth{0, 1, 2, 0, 1, 1};
    CHECK(rotation_accuracy(pred, truth) == Catch::Approx(4.0 / 6.0));
    CHECK_THROWS_AS(rotation_accuracy(pred, std::vector<int>{0}), Error);
    CHECK_THROWS_AS(rotation_accuracy(std::vector<int>{}, std::vector<int>{}), Error);
}

TEST_CASE("empty count-pair lists are rejected") {
    CHECK_THROWS_AS(mae({}), Error);
    CHECK_THROWS_AS(mse({}), Error);
}
