#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>

#include "crowdlab/dataset_io.hpp"
#include "crowdlab/rng.hpp"

using namespace crowdlab;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir() {
    const fs::path dir = fs::temp_directory_path() / "crowdlab_test_dataset_io";
    fs::create_directories(dir);
    return dir;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

} // namespace

TEST_CASE("manifest JSON round trip preserves every field") {
    DatasetManifest m;
    m.name = "toy";
    m.split = "train";
    m.records.push_back({"a.png", 64, 48, {{1.5, 2.5}, {63.0, 47.0}}});
    m.records.push_back({"b.png", 8, 8, {}});
    const fs::path p = temp_dir() / "manifest.json";
    write_manifest(m, p);
    const DatasetManifest back = load_manifest(p);
    CHECK(back.name == m.name);
    CHECK(back.split == m.split);
    REQUIRE(back.records.size() == 2);
    CHECK(back.records[0].image_path == "a.png");
    CHECK(back.records[0].width == 64);
    CHECK(back.records[0].height == 48);
    CHECK(back.records[0].points == m.records[0].points);
    CHECK(back.records[1].points.empty());
}

TEST_CASE("manifest validation rejects bad input") {
    const fs::path dir = temp_dir();

    SECTION("missing file") {
        try {
            load_manifest(dir / "nope.json");
            FAIL("expected an error");
        } catch (const Error& e) {
            CHECK(e.code() == "MissingFile");
        }
    }
    SECTION("malformed JSON") {
        const fs::path p = dir / "broken.json";
        std::ofstream(p) << "{ not json";
        try {
            load_manifest(p);
            FAIL("expected an error");
        } catch (const Error& e) {
            CHECK(e.code() == "MalformedManifest");
        }
    }
    SECTION("bad split") {
        nlohmann::json j{{"name", "x"}, {"split", "val"}, {"records", nlohmann::json::array()}};
        CHECK_THROWS_AS(manifest_from_json(j), Error);
    }
    SECTION("point on the width boundary is out of bounds") {
        nlohmann::json j{{"name", "x"},
                         {"split", "train"},
                         {"records",
                          {{{"image", "a.png"},
                            {"width", 10},
                            {"height", 10},
                            {"points", {{10.0, 0.0}}}}}}};
        try {
            manifest_from_json(j);
            FAIL("expected an error");
        } catch (const Error& e) {
            CHECK(e.code() == "OutOfBoundsPoint");
        }
    }
    SECTION("negative coordinate is out of bounds") {
        nlohmann::json j{{"name", "x"},
                         {"split", "test"},
                         {"records",
                          {{{"image", "a.png"},
                            {"width", 10},
                            {"height", 10},
                            {"points", {{0.0, -0.1}}}}}}};
        CHECK_THROWS_AS(manifest_from_json(j), Error);
    }
}

TEST_CASE("checkpoint round trip is bit-exact including non-finite floats") {
    CheckpointArchive a;
    Rng rng(7);
    std::vector<float> payload(24);
    for (auto& v : payload) v = static_cast<float>(rng.normal());
    payload[0] = std::numeric_limits<float>::quiet_NaN();
    payload[1] = std::numeric_limits<float>::infinity();
    payload[2] = -std::numeric_limits<float>::infinity();
    payload[3] = -0.0f;
    a.add("fen/col1/conv1/weight", {2, 3, 4}, payload);
    a.add("scalar", {}, {1.25f});
    a.metadata()["stage"] = "1";
    a.metadata()["seed"] = "7";

    const fs::path p = temp_dir() / "round.csa";
    write_checkpoint(a, p);
    const CheckpointArchive b = read_checkpoint(p);

    REQUIRE(b.has("fen/col1/conv1/weight"));
    const auto& e = b.entry("fen/col1/conv1/weight");
    CHECK(e.shape == std::vector<std::uint32_t>{2, 3, 4});
    REQUIRE(e.data.size() == payload.size());
    for (std::size_t i = 0; i < payload.size(); ++i) {
        std::uint32_t x, y;
        std::memcpy(&x, &payload[i], 4);
        std::memcpy(&y, &e.data[i], 4);
        CHECK(x == y); // bit identity, NaN-safe
    }
    CHECK(b.entry("scalar").data == std::vector<float>{1.25f});
    CHECK(b.metadata() == a.metadata());
}

TEST_CASE("checkpoint serialization is byte-deterministic") {
    CheckpointArchive a;
    a.add("w", {2, 2}, {1.0f, 2.0f, 3.0f, 4.0f});
    a.metadata()["k"] = "v";
    const fs::path p1 = temp_dir() / "d1.csa";
    const fs::path p2 = temp_dir() / "d2.csa";
    write_checkpoint(a, p1);
    write_checkpoint(a, p2);
    CHECK(slurp(p1) == slurp(p2));
}

TEST_CASE("checkpoint format errors are reported with codes") {
    const fs::path dir = temp_dir();

    SECTION("duplicate entry name") {
        CheckpointArchive a;
        a.add("w", {1}, {0.0f});
        try {
            a.add("w", {1}, {1.0f});
            FAIL("expected an error");
        } catch (const Error& e) {
            CHECK(e.code() == "DuplicateName");
        }
    }
    SECTION("payload/shape mismatch") {
        CheckpointArchive a;
        CHECK_THROWS_AS(a.add("w", {3}, {0.0f}), Error);
    }
    SECTION("bad magic") {
        const fs::path p = dir / "bad.csa";
        std::ofstream(p, std::ios::binary).write("XXXX\0\0\0\0", 8);
        try {
            read_checkpoint(p);
            FAIL("expected an error");
        } catch (const Error& e) {
            CHECK(e.code() == "BadMagic");
        }
    }
    SECTION("truncated payload") {
        CheckpointArchive a;
        a.add("w", {8}, std::vector<float>(8, 1.0f));
        const fs::path full = dir / "full.csa";
        write_checkpoint(a, full);
        const std::string bytes = slurp(full);
        const fs::path cut = dir / "cut.csa";
        std::ofstream(cut, std::ios::binary)
            << bytes.substr(0, bytes.size() - 10);
        try {
            read_checkpoint(cut);
            FAIL("expected an error");
        } catch (const Error& e) {
            CHECK(e.code() == "TruncatedPayload");
        }
    }
    SECTION("missing entry lookup") {
        CheckpointArchive a;
        CHECK_THROWS_AS(a.entry("nope"), Error);
    }
}
