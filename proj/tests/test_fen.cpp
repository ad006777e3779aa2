#include <catch2/catch_amalgamated.hpp>

#include "crowdlab/fen.hpp"

using namespace crowdlab;
using nn::Tensor;

namespace {

TensorF random_batch(Rng& rng, std::size_t b, std::size_t hw, std::size_t c) {
    TensorF x({b, hw, hw, c});
    for (auto& v : x.vec()) v = static_cast<float>(rng.uniform(-1.0, 1.0));
    return x;
}

} // namespace

TEST_CASE("closed-form parameter count matches the collected parameters") {
    Rng rng(1);
    SECTION("default geometry") {
        const FenConfig cfg = FenConfig::defaults(1);
        Fen<float> fen(cfg, rng);
        std::vector<nn::Param<float>*> ps;
        fen.collect(ps);
        std::size_t actual = 0;
        for (const auto* p : ps) actual += p->value.size();
        CHECK(actual == cfg.parameter_count());
    }
    SECTION("custom widths and RGB input") {
        FenConfig cfg = FenConfig::defaults(3);
        for (auto& col : cfg.columns) col.widths = {4, 8, 4, 2};
        Fen<float> fen(cfg, rng);
        std::vector<nn::Param<float>*> ps;
        fen.collect(ps);
        std::size_t actual = 0;
        for (const auto* p : ps) actual += p->value.size();
        CHECK(actual == cfg.parameter_count());
        // Hand arithmetic for one column (kernel 3): 3^2*(3*4+4*8+8*4+4*2)+18.
        CHECK(9 * (12 + 32 + 32 + 8) + 18 ==
              cfg.columns[0].kernel * cfg.columns[0].kernel *
                      (3 * 4 + 4 * 8 + 8 * 4 + 4 * 2) +
                  4 + 8 + 4 + 2);
    }
}

TEST_CASE("config validation") {
    Rng rng(2);
    FenConfig four = FenConfig::defaults(1);
    four.columns.pop_back();
    try {
        Fen<float> fen(four, rng);
        FAIL("expected an error");
    } catch (const Error& e) {
        CHECK(e.code() == "InvalidConfig");
    }

    FenConfig mismatched = FenConfig::defaults(1);
    mismatched.columns[2].pool_after = {1};
    CHECK_THROWS_AS(Fen<float>(mismatched, rng), Error);

    FenConfig even = FenConfig::defaults(1);
    even.columns[0].kernel = 4;
    CHECK_THROWS_AS(Fen<float>(even, rng), Error);
}

TEST_CASE("output geometry: 112 input, stride 4, concatenated channels") {
    Rng rng(3);
    const FenConfig cfg = FenConfig::defaults(1); // widths end at 8, 5 columns
    Fen<float> fen(cfg, rng);
    CHECK(cfg.stride() == 4);
    CHECK(cfg.output_channels() == 40);
    const TensorF y = fen.forward(random_batch(rng, 2, 112, 1));
    REQUIRE(y.shape() == std::vector<std::size_t>{2, 28, 28, 40});
}

TEST_CASE("non-divisible spatial dims are rejected") {
    Rng rng(4);
    Fen<float> fen(FenConfig::defaults(1), rng);
    TensorF x({1, 30, 30, 1});
    try {
        fen.forward(x);
        FAIL("expected an error");
    } catch (const Error& e) {
        CHECK(e.code() == "ShapeError");
    }
}

TEST_CASE("identical seeds give identical parameters and outputs") {
    FenConfig cfg = FenConfig::defaults(1);
    for (auto& col : cfg.columns) col.widths = {2, 2, 2, 2};
    Rng ra(77), rb(77), rx(5);
    Fen<float> a(cfg, ra), b(cfg, rb);
    std::vector<nn::Param<float>*> pa, pb;
    a.collect(pa);
    b.collect(pb);
    REQUIRE(pa.size() == pb.size());
    for (std::size_t i = 0; i < pa.size(); ++i) CHECK(pa[i]->value == pb[i]->value);
    const TensorF x = random_batch(rx, 1, 16, 1);
    CHECK(a.forward(x) == b.forward(x));
}

TEST_CASE("zero input maps to zero output (biases start at zero)") {
    Rng rng(6);
    FenConfig cfg = FenConfig::defaults(1);
    for (auto& col : cfg.columns) col.widths = {2, 2, 2, 2};
    Fen<float> fen(cfg, rng);
    TensorF x({1, 8, 8, 1});
    const TensorF y = fen.forward(x);
    for (std::size_t i = 0; i < y.size(); ++i) CHECK(y[i] == 0.0f);
}

TEST_CASE("columns are independent: zeroing one column only clears its slice") {
    Rng rng(7);
    FenConfig cfg = FenConfig::defaults(1);
    for (auto& col : cfg.columns) col.widths = {2, 2, 2, 2};
    Fen<float> fen(cfg, rng);
    const TensorF x = random_batch(rng, 1, 8, 1);
    const TensorF before = fen.forward(x);

    std::vector<nn::Param<float>*> ps;
    fen.collect(ps);
    // Each column owns 8 params (4 convs x weight+bias), in column order.
    for (std::size_t i = 16; i < 24; ++i) ps[i]->value.fill(0.0f); // column 2
    const TensorF after = fen.forward(x);

    const std::size_t per_col = 2; // output channels per column
    for (std::size_t r = 0; r < after.dim(1); ++r) {
        for (std::size_t c = 0; c < after.dim(2); ++c) {
            for (std::size_t ch = 0; ch < after.dim(3); ++ch) {
                if (ch / per_col == 2) {
                    CHECK(after.at(0, r, c, ch) == 0.0f);
                } else {
                    CHECK(after.at(0, r, c, ch) == before.at(0, r, c, ch));
                }
            }
        }
    }
}

TEST_CASE("save/load round trip restores parameters bit-exactly") {
    Rng ra(8), rb(9);
    FenConfig cfg = FenConfig::defaults(1);
    for (auto& col : cfg.columns) col.widths = {2, 2, 2, 2};
    Fen<float> a(cfg, ra), b(cfg, rb);
    CheckpointArchive archive;
    a.save(archive);
    b.load(archive);
    std::vector<nn::Param<float>*> pa, pb;
    a.collect(pa);
    b.collect(pb);
    for (std::size_t i = 0; i < pa.size(); ++i) CHECK(pa[i]->value == pb[i]->value);
}
