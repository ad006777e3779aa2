#include <catch2/catch_amalgamated.hpp>

#include <cstring>

#include "crowdlab/density.hpp"
#include "crowdlab/metrics.hpp"
#include "crowdlab/stage1.hpp"
#include "crowdlab/stage2.hpp"

using namespace crowdlab;

namespace {

FenConfig tiny_fen() {
    FenConfig cfg = FenConfig::defaults(1);
    const std::size_t kernels[5] = {1, 3, 3, 5, 5};
    for (std::size_t i = 0; i < 5; ++i) {
        cfg.columns[i].kernel = kernels[i];
        cfg.columns[i].widths = {2, 2, 2, 2};
        cfg.columns[i].pool_after = {1};
    }
    return cfg;
}

DensityHeadConfig tiny_density_head() {
    DensityHeadConfig cfg;
    cfg.widths = {2, 2};
    return cfg;
}

std::vector<TensorF> random_images(Rng& rng, std::size_t n, std::size_t hw) {
    std::vector<TensorF> images;
    for (std::size_t i = 0; i < n; ++i) {
        TensorF img({hw, hw, 1});
        for (auto& v : img.vec()) v = static_cast<float>(rng.uniform());
        images.push_back(std::move(img));
    }
    return images;
}

RotationHeadConfig tiny_head_config() {
    RotationHeadConfig cfg;
    cfg.widths = {4, 4};
    return cfg;
}

CheckpointArchive tiny_stage1_checkpoint(std::uint64_t seed) {
    Rng data_rng(seed + 1);
    auto images = random_images(data_rng, 2, 20);
    Stage1Config cfg;
    cfg.crop_size = 16;
    cfg.steps = 2;
    cfg.batch_size = 2;
    Rng rng(seed);
    return train_stage1(images, tiny_fen(), tiny_head_config(), cfg, rng).first;
}

bool entries_bit_equal(const CheckpointArchive& a, const CheckpointArchive& b,
                       const std::string& name) {
    const auto& ea = a.entry(name);
    const auto& eb = b.entry(name);
    if (ea.shape != eb.shape || ea.data.size() != eb.data.size()) return false;
    return std::memcmp(ea.data.data(), eb.data.data(), ea.data.size() * sizeof(float)) == 0;
}

Stage2Config tiny_stage2(std::size_t steps, double lr) {
    Stage2Config cfg;
    cfg.crop_size = 16;
    cfg.steps = steps;
    cfg.batch_size = 2;
    cfg.learning_rate = lr;
    cfg.prior.c_max = 20.0;
    cfg.sinkhorn.eps = 0.5;
    return cfg;
}

} // namespace

TEST_CASE("stage 2 keeps the feature extractor bit-frozen") {
    CheckpointArchive stage1 = tiny_stage1_checkpoint(41);
    Rng data_rng(5);
    auto images = random_images(data_rng, 2, 20);

    Rng rng(17);
    auto [stage2, log] =
        train_stage2(stage1, images, tiny_fen(), tiny_density_head(), tiny_stage2(4, 1e-3), rng);

    std::size_t fen_entries = 0;
    for (const auto& e : stage1.entries()) {
        if (e.name.rfind("fen/", 0) != 0) continue;
        ++fen_entries;
        CHECK(entries_bit_equal(stage1, stage2, e.name));
    }
    CHECK(fen_entries > 0);
    CHECK(stage2.metadata().at("stage") == "2");
    REQUIRE(log.records.size() == 4);
    for (const auto& rec : log.records) CHECK(std::isfinite(rec.loss));
}

TEST_CASE("zero learning rate leaves the density head at its initialization") {
    CheckpointArchive stage1 = tiny_stage1_checkpoint(42);
    Rng data_rng(6);
    auto images = random_images(data_rng, 2, 20);

    Rng r1(23), r2(23);
    auto [ck0, lg0] =
        train_stage2(stage1, images, tiny_fen(), tiny_density_head(), tiny_stage2(0, 0.0), r1);
    auto [ckN, lgN] =
        train_stage2(stage1, images, tiny_fen(), tiny_density_head(), tiny_stage2(3, 0.0), r2);

    for (const auto& e : ck0.entries())
        if (e.name.rfind("density_head/", 0) == 0)
            CHECK(entries_bit_equal(ck0, ckN, e.name));
}

TEST_CASE("stage 2 training is deterministic for a fixed seed") {
    CheckpointArchive stage1 = tiny_stage1_checkpoint(43);
    Rng data_rng(7);
    auto images = random_images(data_rng, 2, 20);

    Rng r1(31), r2(31);
    auto [ck1, lg1] =
        train_stage2(stage1, images, tiny_fen(), tiny_density_head(), tiny_stage2(3, 1e-3), r1);
    auto [ck2, lg2] =
        train_stage2(stage1, images, tiny_fen(), tiny_density_head(), tiny_stage2(3, 1e-3), r2);

    REQUIRE(ck1.entries().size() == ck2.entries().size());
    for (const auto& e : ck1.entries()) CHECK(entries_bit_equal(ck1, ck2, e.name));
    REQUIRE(lg1.records.size() == lg2.records.size());
    for (std::size_t i = 0; i < lg1.records.size(); ++i)
        CHECK(lg1.records[i].loss == lg2.records[i].loss);
}

TEST_CASE("predicted density scales linearly with the calibration factor") {
    Rng rng(77);
    Fen<float> fen(tiny_fen(), rng);
    DensityHead<float> head(tiny_density_head(), tiny_fen().output_channels(), rng);

    TensorF image({16, 16, 1});
    for (auto& v : image.vec()) v = static_cast<float>(rng.uniform());

    auto [map1, count1] = predict_count(fen, head, image, 1.0);
    auto [map3, count3] = predict_count(fen, head, image, 3.0);

    CHECK(count3 == Catch::Approx(3.0 * count1).margin(1e-9));
    REQUIRE(map1.values.size() == map3.values.size());
    for (std::size_t i = 0; i < map1.values.size(); ++i)
        CHECK(map3.values[i] == Catch::Approx(3.0 * map1.values[i]).margin(1e-12));
    CHECK(map1.height * map1.width == map1.values.size());
    CHECK(count_from_density(map1) == Catch::Approx(count1).margin(1e-9));
}

TEST_CASE("predict_count rejects images not divisible by the stride") {
    Rng rng(78);
    Fen<float> fen(tiny_fen(), rng);
    DensityHead<float> head(tiny_density_head(), tiny_fen().output_channels(), rng);
    TensorF image({15, 16, 1});
    try {
        predict_count(fen, head, image, 1.0);
        FAIL("expected an error");
    } catch (const Error& e) {
        CHECK(e.code() == "ShapeError");
    }
}

TEST_CASE("calibration scales") {
    SECTION("labeled reference") {
        CHECK(calibrate_scale_labeled(427.0, 100.0) == Catch::Approx(4.27));
        try {
            calibrate_scale_labeled(427.0, 0.0);
            FAIL("expected an error");
        } catch (const Error& e) {
            CHECK(e.code() == "ZeroPrediction");
        }
        try {
            calibrate_scale_labeled(0.0, 10.0);
            FAIL("expected an error");
        } catch (const Error& e) {
            CHECK(e.code() == "ZeroPrediction");
        }
    }
    SECTION("prior mean over mean raw sum") {
        PriorSpec prior; // alpha = 2, c in [1, 100]
        const double expected_mean = std::log(100.0) / (1.0 - 1.0 / 100.0);
        CHECK(prior.mean() == Catch::Approx(expected_mean).margin(1e-12));
        const double scale = calibrate_scale_prior(prior, {2.0, 4.0});
        CHECK(scale == Catch::Approx(expected_mean / 3.0).margin(1e-12));
        try {
            calibrate_scale_prior(prior, {});
            FAIL("expected an error");
        } catch (const Error& e) {
            CHECK(e.code() == "ZeroPrediction");
        }
        try {
            calibrate_scale_prior(prior, {0.0, 0.0});
            FAIL("expected an error");
        } catch (const Error& e) {
            CHECK(e.code() == "ZeroPrediction");
        }
    }
}

TEST_CASE("stage 2 rejects degenerate batches") {
    CheckpointArchive stage1 = tiny_stage1_checkpoint(44);
    Rng data_rng(8);
    auto images = random_images(data_rng, 1, 20);
    Stage2Config cfg = tiny_stage2(1, 1e-3);
    cfg.batch_size = 1;
    Rng rng(1);
    try {
        train_stage2(stage1, images, tiny_fen(), tiny_density_head(), cfg, rng);
        FAIL("expected an error");
    } catch (const Error& e) {
        CHECK(e.code() == "DegenerateBatch");
    }
}

TEST_CASE("published count fixtures reproduce through density-map sums") {
    // Predicted totals 423.16 / 286.89 / 288.69 against ground truth
    // 427 / 240 / 320 give MAE (3.84 + 46.89 + 31.31) / 3.
    struct Fixture {
        double predicted, truth;
    };
    const std::vector<Fixture> fixtures = {{423.16, 427.0}, {286.89, 240.0}, {288.69, 320.0}};

    std::vector<CountPair> pairs;
    for (const auto& f : fixtures) {
        DensityMap map;
        map.height = 4;
        map.width = 5;
        map.values.assign(20, f.predicted / 20.0);
        pairs.push_back({count_from_density(map), f.truth});
    }
    CHECK(mae(pairs) == Catch::Approx(27.346666666666668).margin(1e-3));
}
