#pragma once

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "crowdlab/error.hpp"
#include "crowdlab/tensor.hpp"

namespace crowdlab {

struct PointAnnotation {
    double x = 0.0; // column
    double y = 0.0; // row

    bool operator==(const PointAnnotation&) const = default;
};

struct ImageRecord {
    std::string image_path;
    std::uint32_t width = 0;
    std::uint32_t height = 0;
    std::vector<PointAnnotation> points;

    std::size_t count() const { return points.size(); }
};

struct DatasetManifest {
    std::string name;
    std::string split; // "train" | "test"
    std::vector<ImageRecord> records;
};

namespace detail {

inline void validate_record(const ImageRecord& rec) {
    require(rec.width >= 1 && rec.height >= 1, "MalformedManifest",
            "record '" + rec.image_path + "' has empty dimensions");
    for (const auto& p : rec.points) {
        const bool ok = p.x >= 0.0 && p.x < static_cast<double>(rec.width) && p.y >= 0.0 &&
                        p.y < static_cast<double>(rec.height);
        require(ok, "OutOfBoundsPoint",
                "point (" + std::to_string(p.x) + "," + std::to_string(p.y) +
                    ") outside image '" + rec.image_path + "'");
    }
}

} // namespace detail

inline DatasetManifest manifest_from_json(const nlohmann::json& j) {
    DatasetManifest m;
    try {
        m.name = j.at("name").get<std::string>();
        m.split = j.at("split").get<std::string>();
        for (const auto& jr : j.at("records")) {
            ImageRecord rec;
            rec.image_path = jr.at("image").get<std::string>();
            rec.width = jr.at("width").get<std::uint32_t>();
            rec.height = jr.at("height").get<std::uint32_t>();
            for (const auto& jp : jr.at("points")) {
                require(jp.is_array() && jp.size() == 2, "MalformedManifest",
                        "point must be a [x, y] pair");
                rec.points.push_back({jp[0].get<double>(), jp[1].get<double>()});
            }
            m.records.push_back(std::move(rec));
        }
    } catch (const nlohmann::json::exception& e) {
        fail("MalformedManifest", std::string("manifest JSON: ") + e.what());
    }
    require(m.split == "train" || m.split == "test", "MalformedManifest",
            "split must be 'train' or 'test', got '" + m.split + "'");
    for (const auto& rec : m.records) detail::validate_record(rec);
    return m;
}

inline DatasetManifest load_manifest(const std::filesystem::path& path) {
    require(std::filesystem::exists(path), "MissingFile",
            "manifest not found: " + path.string());
    std::ifstream in(path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        fail("MalformedManifest", path.string() + ": " + e.what());
    }
    return manifest_from_json(j);
}

inline nlohmann::json manifest_to_json(const DatasetManifest& m) {
    nlohmann::json j;
    j["name"] = m.name;
    j["split"] = m.split;
    j["records"] = nlohmann::json::array();
    for (const auto& rec : m.records) {
        nlohmann::json jr;
        jr["image"] = rec.image_path;
        jr["width"] = rec.width;
        jr["height"] = rec.height;
        jr["points"] = nlohmann::json::array();
        for (const auto& p : rec.points) jr["points"].push_back({p.x, p.y});
        j["records"].push_back(std::move(jr));
    }
    return j;
}

inline void write_manifest(const DatasetManifest& m, const std::filesystem::path& path) {
    std::ofstream out(path);
    require(out.good(), "MissingFile", "cannot open for write: " + path.string());
    out << manifest_to_json(m).dump(2) << "\n";
}

// ---------------------------------------------------------------------------
// CheckpointArchive: flat named-float32-tensor container.
//
// Layout: magic "CSA1", u32-LE entry count, then per entry
//   u16-LE name length, UTF-8 name, u8 dtype (0 = float32), u8 ndim,
//   ndim x u32-LE dims, raw row-major little-endian float32 payload;
// then u32-LE metadata count, per item u16-LE key len, key,
// u16-LE value len, value.
// ---------------------------------------------------------------------------

struct CheckpointEntry {
    std::string name;
    std::vector<std::uint32_t> shape;
    std::vector<float> data; // row-major

    bool operator==(const CheckpointEntry&) const = default;
};

class CheckpointArchive {
  public:
    void add(std::string name, std::vector<std::uint32_t> shape, std::vector<float> data) {
        std::size_t n = 1;
        for (auto d : shape) n *= d;
        require(data.size() == n, "ShapeError",
                "payload length does not match shape for '" + name + "'");
        require(!index_.count(name), "DuplicateName", "duplicate entry '" + name + "'");
        index_[name] = entries_.size();
        entries_.push_back({std::move(name), std::move(shape), std::move(data)});
    }

    void add_tensor(const std::string& name, const TensorF& t) {
        std::vector<std::uint32_t> shape(t.shape().begin(), t.shape().end());
        add(name, std::move(shape), t.vec());
    }

    bool has(const std::string& name) const { return index_.count(name) != 0; }

    const CheckpointEntry& entry(const std::string& name) const {
        auto it = index_.find(name);
        require(it != index_.end(), "MissingEntry", "no checkpoint entry '" + name + "'");
        return entries_[it->second];
    }

    TensorF tensor(const std::string& name) const {
        const auto& e = entry(name);
        std::vector<std::size_t> shape(e.shape.begin(), e.shape.end());
        return TensorF(std::move(shape), e.data);
    }

    const std::vector<CheckpointEntry>& entries() const { return entries_; }
    std::map<std::string, std::string>& metadata() { return metadata_; }
    const std::map<std::string, std::string>& metadata() const { return metadata_; }

    bool operator==(const CheckpointArchive& other) const {
        return entries_ == other.entries_ && metadata_ == other.metadata_;
    }

  private:
    std::vector<CheckpointEntry> entries_;
    std::map<std::string, std::size_t> index_;
    std::map<std::string, std::string> metadata_;
};

namespace detail {

template <typename T>
void write_le(std::ostream& out, T v) {
    unsigned char buf[sizeof(T)];
    for (std::size_t i = 0; i < sizeof(T); ++i)
        buf[i] = static_cast<unsigned char>((static_cast<std::uint64_t>(v) >> (8 * i)) & 0xff);
    out.write(reinterpret_cast<const char*>(buf), sizeof(T));
}

template <typename T>
T read_le(std::istream& in) {
    unsigned char buf[sizeof(T)];
    in.read(reinterpret_cast<char*>(buf), sizeof(T));
    require(in.gcount() == static_cast<std::streamsize>(sizeof(T)), "TruncatedPayload",
            "checkpoint ends mid-field");
    std::uint64_t v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i)
        v |= static_cast<std::uint64_t>(buf[i]) << (8 * i);
    return static_cast<T>(v);
}

inline std::string read_str(std::istream& in, std::size_t len) {
    std::string s(len, '\0');
    in.read(s.data(), static_cast<std::streamsize>(len));
    require(in.gcount() == static_cast<std::streamsize>(len), "TruncatedPayload",
            "checkpoint ends mid-string");
    return s;
}

} // namespace detail

inline void write_checkpoint(const CheckpointArchive& archive,
                             const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    require(out.good(), "MissingFile", "cannot open for write: " + path.string());
    out.write("CSA1", 4);
    detail::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(archive.entries().size()));
    for (const auto& e : archive.entries()) {
        detail::write_le<std::uint16_t>(out, static_cast<std::uint16_t>(e.name.size()));
        out.write(e.name.data(), static_cast<std::streamsize>(e.name.size()));
        out.put(0); // dtype: float32
        out.put(static_cast<char>(e.shape.size()));
        for (auto d : e.shape) detail::write_le<std::uint32_t>(out, d);
        static_assert(sizeof(float) == 4);
        for (float f : e.data) {
            std::uint32_t bits;
            std::memcpy(&bits, &f, 4);
            detail::write_le<std::uint32_t>(out, bits);
        }
    }
    detail::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(archive.metadata().size()));
    for (const auto& [k, v] : archive.metadata()) {
        detail::write_le<std::uint16_t>(out, static_cast<std::uint16_t>(k.size()));
        out.write(k.data(), static_cast<std::streamsize>(k.size()));
        detail::write_le<std::uint16_t>(out, static_cast<std::uint16_t>(v.size()));
        out.write(v.data(), static_cast<std::streamsize>(v.size()));
    }
    require(out.good(), "MissingFile", "write failed: " + path.string());
}

inline CheckpointArchive read_checkpoint(const std::filesystem::path& path) {
    require(std::filesystem::exists(path), "MissingFile",
            "checkpoint not found: " + path.string());
    std::ifstream in(path, std::ios::binary);
    char magic[4] = {};
    in.read(magic, 4);
    require(in.gcount() == 4 && std::memcmp(magic, "CSA1", 4) == 0, "BadMagic",
            path.string() + ": not a CSA1 checkpoint");
    CheckpointArchive archive;
    const auto n_entries = detail::read_le<std::uint32_t>(in);
    for (std::uint32_t i = 0; i < n_entries; ++i) {
        const auto name_len = detail::read_le<std::uint16_t>(in);
        std::string name = detail::read_str(in, name_len);
        const auto dtype = detail::read_le<std::uint8_t>(in);
        require(dtype == 0, "MalformedManifest", "unknown dtype tag in checkpoint");
        const auto ndim = detail::read_le<std::uint8_t>(in);
        std::vector<std::uint32_t> shape(ndim);
        std::size_t count = 1;
        for (auto& d : shape) {
            d = detail::read_le<std::uint32_t>(in);
            count *= d;
        }
        std::vector<float> data(count);
        for (auto& f : data) {
            std::uint32_t bits = detail::read_le<std::uint32_t>(in);
            std::memcpy(&f, &bits, 4);
        }
        archive.add(std::move(name), std::move(shape), std::move(data));
    }
    const auto n_meta = detail::read_le<std::uint32_t>(in);
    for (std::uint32_t i = 0; i < n_meta; ++i) {
        const auto klen = detail::read_le<std::uint16_t>(in);
        std::string key = detail::read_str(in, klen);
        const auto vlen = detail::read_le<std::uint16_t>(in);
        archive.metadata()[key] = detail::read_str(in, vlen);
    }
    return archive;
}

} // namespace crowdlab
