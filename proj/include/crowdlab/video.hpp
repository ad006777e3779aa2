#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "crowdlab/augment.hpp"
#include "crowdlab/error.hpp"
#include "crowdlab/image_io.hpp"
#include "crowdlab/rng.hpp"
#include "crowdlab/tensor.hpp"

namespace crowdlab {

struct DecodedClip {
    std::vector<TensorF> frames; // each H x W x 3, values in [0,1]
    double fps = 0.0;
};

/// Pluggable container decoder. The reference implementation reads a
/// directory of frame_%05d.png plus meta.json {"fps": number}; real AVI
/// decoding can be slotted in behind the same interface.
class ClipDecoder {
  public:
    virtual ~ClipDecoder() = default;
    virtual bool claims(const std::filesystem::path& entry) const = 0;
    virtual DecodedClip decode(const std::filesystem::path& entry) const = 0;
};

class PngDirDecoder : public ClipDecoder {
  public:
    bool claims(const std::filesystem::path& entry) const override {
        return std::filesystem::is_directory(entry) &&
               std::filesystem::exists(entry / "meta.json");
    }

    DecodedClip decode(const std::filesystem::path& entry) const override {
        std::ifstream meta_in(entry / "meta.json");
        nlohmann::json meta;
        try {
            meta_in >> meta;
        } catch (const nlohmann::json::exception& e) {
            fail("DecodeFailure", entry.string() + "/meta.json: " + e.what());
        }
        require(meta.contains("fps"), "MissingFps", entry.string() + ": meta.json lacks fps");
        DecodedClip clip;
        clip.fps = meta.at("fps").get<double>();
        require(clip.fps > 0.0, "MissingFps", entry.string() + ": fps must be > 0");
        for (std::size_t i = 0;; ++i) {
            char name[32];
            std::snprintf(name, sizeof(name), "frame_%05zu.png", i);
            const auto frame_path = entry / name;
            if (!std::filesystem::exists(frame_path)) break;
            clip.frames.push_back(load_image(frame_path, 3));
        }
        require(!clip.frames.empty(), "EmptyClip", entry.string() + ": no frames");
        return clip;
    }
};

struct FrameSequence {
    std::vector<TensorF> frames;     // length T, each 128 x 128 x 3; padded tail all-zero
    std::vector<std::uint8_t> valid; // contiguous prefix of 1s
    int label = 0;                   // 0 = non-violent, 1 = violent
    std::string source;

    std::size_t valid_count() const {
        std::size_t n = 0;
        for (auto v : valid) n += v;
        return n;
    }
};

/// Resample the clip timeline to 25 fps by nearest-frame selection, take up
/// to max_frames at uniform intervals, resize each to target x target, and
/// zero-pad the tail.
inline FrameSequence extract_frames(const DecodedClip& clip, std::size_t max_frames,
                                    std::size_t target = 128) {
    require(!clip.frames.empty(), "EmptyClip", "clip has no frames");
    require(clip.fps > 0.0, "MissingFps", "clip fps metadata missing");
    require(max_frames >= 1, "EmptyClip", "max_frames must be >= 1");

    // Nearest-frame indices on a 25 fps timeline spanning the clip.
    const double duration = static_cast<double>(clip.frames.size()) / clip.fps;
    const std::size_t resampled =
        std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(duration * 25.0)));
    std::vector<std::size_t> timeline(resampled);
    for (std::size_t i = 0; i < resampled; ++i) {
        const double t = static_cast<double>(i) / 25.0;
        const long idx = std::lround(t * clip.fps);
        timeline[i] = static_cast<std::size_t>(
            std::min<long>(std::max<long>(idx, 0), static_cast<long>(clip.frames.size()) - 1));
    }

    // Uniform-interval selection over the resampled timeline.
    std::vector<std::size_t> picks;
    if (resampled <= max_frames) {
        picks = timeline;
    } else {
        picks.reserve(max_frames);
        for (std::size_t k = 0; k < max_frames; ++k) {
            const double pos = max_frames == 1
                                   ? 0.0
                                   : static_cast<double>(k) *
                                         static_cast<double>(resampled - 1) /
                                         static_cast<double>(max_frames - 1);
            picks.push_back(timeline[static_cast<std::size_t>(std::lround(pos))]);
        }
    }

    FrameSequence seq;
    seq.frames.reserve(max_frames);
    for (std::size_t idx : picks)
        seq.frames.push_back(resize_bilinear(clip.frames[idx], target, target));
    seq.valid.assign(seq.frames.size(), 1);
    while (seq.frames.size() < max_frames) {
        TensorF zero({target, target, 3});
        seq.frames.push_back(std::move(zero));
        seq.valid.push_back(0);
    }
    return seq;
}

struct ProcessReport {
    std::vector<std::string> skipped; // entries that failed to decode
};

/// Enumerate decodable clip entries in lexicographic filename order and
/// extract a labeled FrameSequence from each. Entries with the .avi
/// extension but no registered decoder are skipped with a warning.
inline std::vector<FrameSequence> process_videos(
    const std::filesystem::path& directory, int label, std::size_t max_frames,
    const std::vector<const ClipDecoder*>& decoders, ProcessReport* report = nullptr) {
    require(std::filesystem::is_directory(directory), "MissingDirectory",
            "not a directory: " + directory.string());
    require(label == 0 || label == 1, "InvalidSpec", "label must be 0 or 1");

    std::vector<std::filesystem::path> entries;
    for (const auto& e : std::filesystem::directory_iterator(directory))
        entries.push_back(e.path());
    std::sort(entries.begin(), entries.end(),
              [](const auto& a, const auto& b) { return a.filename() < b.filename(); });

    std::vector<FrameSequence> out;
    for (const auto& entry : entries) {
        const ClipDecoder* chosen = nullptr;
        for (const auto* d : decoders)
            if (d->claims(entry)) {
                chosen = d;
                break;
            }
        const bool looks_like_clip = chosen != nullptr || entry.extension() == ".avi";
        if (!looks_like_clip) continue;
        if (chosen == nullptr) {
            if (report) report->skipped.push_back(entry.string());
            continue;
        }
        try {
            FrameSequence seq = extract_frames(chosen->decode(entry), max_frames);
            seq.label = label;
            seq.source = entry.string();
            out.push_back(std::move(seq));
        } catch (const Error& e) {
            if (report) report->skipped.push_back(entry.string() + " (" + e.code() + ")");
        }
    }
    return out;
}

struct ClipDatasetArrays {
    std::vector<FrameSequence> clips; // labels carried per clip

    std::vector<int> labels() const {
        std::vector<int> y;
        y.reserve(clips.size());
        for (const auto& c : clips) y.push_back(c.label);
        return y;
    }
};

/// Concatenate violent-first then non-violent and apply one seed-derived
/// permutation to clips and labels jointly (Fisher-Yates).
inline ClipDatasetArrays assemble_and_shuffle(std::vector<FrameSequence> violent,
                                              std::vector<FrameSequence> nonviolent,
                                              std::uint64_t seed) {
    ClipDatasetArrays ds;
    for (auto& c : violent) {
        c.label = 1;
        ds.clips.push_back(std::move(c));
    }
    for (auto& c : nonviolent) {
        c.label = 0;
        ds.clips.push_back(std::move(c));
    }
    require(!ds.clips.empty(), "EmptyDataset", "no clips to assemble");
    Rng rng(seed);
    for (std::size_t i = ds.clips.size(); i-- > 1;)
        std::swap(ds.clips[i], ds.clips[rng.uniform_index(i + 1)]);
    return ds;
}

} // namespace crowdlab
