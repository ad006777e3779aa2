#pragma once

#include <cmath>
#include <cstdint>

#include <json.hpp>

#include "crowdlab/error.hpp"
#include "crowdlab/rng.hpp"
#include "crowdlab/tensor.hpp"

namespace crowdlab {

// Images and frames are H x W x C float tensors with values in [0,1].

/// 4-way rotation pretext class: k means k*90 degrees counter-clockwise.
struct RotationLabel {
    int value = 0; // in {0,1,2,3}
};

struct AugmentSpec {
    double flip_p = 1.0;
    double zoom = 1.3;
    double brightness_lo = 1.0;
    double brightness_hi = 1.3;
    double rotation_lo_deg = -25.0;
    double rotation_hi_deg = 25.0;
    // Optional photometric extras, off by default.
    double gaussian_noise_std = 0.0;
    double salt_pepper_p = 0.0;

    void validate() const {
        require(flip_p >= 0.0 && flip_p <= 1.0, "BadSpec", "flip_p must be in [0,1]");
        require(zoom >= 1.0, "BadSpec", "zoom must be >= 1");
        require(brightness_lo <= brightness_hi, "BadSpec", "brightness range inverted");
        require(rotation_lo_deg <= rotation_hi_deg, "BadSpec", "rotation range inverted");
        require(salt_pepper_p >= 0.0 && salt_pepper_p <= 1.0, "BadSpec",
                "salt_pepper_p must be in [0,1]");
    }

    static AugmentSpec identity() {
        AugmentSpec s;
        s.flip_p = 0.0;
        s.zoom = 1.0;
        s.brightness_lo = s.brightness_hi = 1.0;
        s.rotation_lo_deg = s.rotation_hi_deg = 0.0;
        return s;
    }

    static AugmentSpec from_json(const nlohmann::json& j) {
        AugmentSpec s;
        if (j.contains("flip_p")) s.flip_p = j.at("flip_p").get<double>();
        if (j.contains("zoom")) s.zoom = j.at("zoom").get<double>();
        if (j.contains("brightness")) {
            s.brightness_lo = j.at("brightness").at(0).get<double>();
            s.brightness_hi = j.at("brightness").at(1).get<double>();
        }
        if (j.contains("rotation_deg")) {
            s.rotation_lo_deg = j.at("rotation_deg").at(0).get<double>();
            s.rotation_hi_deg = j.at("rotation_deg").at(1).get<double>();
        }
        if (j.contains("gaussian_noise_std"))
            s.gaussian_noise_std = j.at("gaussian_noise_std").get<double>();
        if (j.contains("salt_pepper_p")) s.salt_pepper_p = j.at("salt_pepper_p").get<double>();
        s.validate();
        return s;
    }

    nlohmann::json to_json() const {
        return {{"flip_p", flip_p},
                {"zoom", zoom},
                {"brightness", {brightness_lo, brightness_hi}},
                {"rotation_deg", {rotation_lo_deg, rotation_hi_deg}},
                {"gaussian_noise_std", gaussian_noise_std},
                {"salt_pepper_p", salt_pepper_p}};
    }
};

/// Uniformly placed axis-aligned size x size window; pixels copied unmodified.
inline TensorF crop_random(const TensorF& image, std::size_t size, Rng& rng) {
    require(image.rank() == 3, "ShapeError", "crop_random expects H x W x C");
    const std::size_t h = image.dim(0), w = image.dim(1), c = image.dim(2);
    require(h >= size && w >= size, "ImageTooSmall",
            "image smaller than requested crop size");
    const std::size_t r0 = static_cast<std::size_t>(rng.uniform_index(h - size + 1));
    const std::size_t c0 = static_cast<std::size_t>(rng.uniform_index(w - size + 1));
    TensorF out({size, size, c});
    for (std::size_t r = 0; r < size; ++r)
        for (std::size_t cc = 0; cc < size; ++cc)
            for (std::size_t ch = 0; ch < c; ++ch)
                out.at(r, cc, ch) = image.at(r0 + r, c0 + cc, ch);
    return out;
}

/// Lossless rotation by k*90 degrees counter-clockwise (index permutation).
inline TensorF rotate90(const TensorF& image, int k) {
    require(image.rank() == 3, "ShapeError", "rotate90 expects H x W x C");
    k = ((k % 4) + 4) % 4;
    if (k == 0) return image;
    const std::size_t h = image.dim(0), w = image.dim(1), c = image.dim(2);
    if (k == 2) {
        TensorF out({h, w, c});
        for (std::size_t r = 0; r < h; ++r)
            for (std::size_t cc = 0; cc < w; ++cc)
                for (std::size_t ch = 0; ch < c; ++ch)
                    out.at(r, cc, ch) = image.at(h - 1 - r, w - 1 - cc, ch);
        return out;
    }
    TensorF out({w, h, c});
    for (std::size_t r = 0; r < w; ++r) {
        for (std::size_t cc = 0; cc < h; ++cc) {
            for (std::size_t ch = 0; ch < c; ++ch) {
                if (k == 1)
                    out.at(r, cc, ch) = image.at(cc, w - 1 - r, ch);
                else // k == 3
                    out.at(r, cc, ch) = image.at(h - 1 - cc, r, ch);
            }
        }
    }
    return out;
}

/// Pretext pair: label drawn uniformly from {0,1,2,3}, image rotated to match.
inline std::pair<TensorF, RotationLabel> make_rotation_example(const TensorF& crop, Rng& rng) {
    require(crop.rank() == 3 && crop.dim(0) == crop.dim(1), "NonSquareCrop",
            "rotation pretext requires a square crop");
    RotationLabel label{static_cast<int>(rng.uniform_index(4))};
    return {rotate90(crop, label.value), label};
}

namespace detail {

/// Bilinear sample with zero fill outside the grid.
inline float bilinear(const TensorF& img, double y, double x, std::size_t ch) {
    const long h = static_cast<long>(img.dim(0));
    const long w = static_cast<long>(img.dim(1));
    const long y0 = static_cast<long>(std::floor(y));
    const long x0 = static_cast<long>(std::floor(x));
    const double fy = y - static_cast<double>(y0);
    const double fx = x - static_cast<double>(x0);
    auto pix = [&](long r, long c) -> double {
        if (r < 0 || r >= h || c < 0 || c >= w) return 0.0;
        return img.at(static_cast<std::size_t>(r), static_cast<std::size_t>(c), ch);
    };
    const double top = pix(y0, x0) * (1.0 - fx) + pix(y0, x0 + 1) * fx;
    const double bot = pix(y0 + 1, x0) * (1.0 - fx) + pix(y0 + 1, x0 + 1) * fx;
    return static_cast<float>(top * (1.0 - fy) + bot * fy);
}

} // namespace detail

/// Bilinear resize to out_h x out_w (align-corners-false convention).
inline TensorF resize_bilinear(const TensorF& image, std::size_t out_h, std::size_t out_w) {
    require(image.rank() == 3, "ShapeError", "resize_bilinear expects H x W x C");
    const std::size_t h = image.dim(0), w = image.dim(1), c = image.dim(2);
    if (h == out_h && w == out_w) return image;
    TensorF out({out_h, out_w, c});
    const double sy = static_cast<double>(h) / static_cast<double>(out_h);
    const double sx = static_cast<double>(w) / static_cast<double>(out_w);
    for (std::size_t r = 0; r < out_h; ++r) {
        for (std::size_t cc = 0; cc < out_w; ++cc) {
            double y = (static_cast<double>(r) + 0.5) * sy - 0.5;
            double x = (static_cast<double>(cc) + 0.5) * sx - 0.5;
            // Clamp so edge pixels replicate instead of fading to the zero fill.
            y = std::min(std::max(y, 0.0), static_cast<double>(h - 1));
            x = std::min(std::max(x, 0.0), static_cast<double>(w - 1));
            for (std::size_t ch = 0; ch < c; ++ch)
                out.at(r, cc, ch) = detail::bilinear(image, y, x, ch);
        }
    }
    return out;
}

inline TensorF flip_horizontal(const TensorF& image) {
    const std::size_t h = image.dim(0), w = image.dim(1), c = image.dim(2);
    TensorF out({h, w, c});
    for (std::size_t r = 0; r < h; ++r)
        for (std::size_t cc = 0; cc < w; ++cc)
            for (std::size_t ch = 0; ch < c; ++ch)
                out.at(r, cc, ch) = image.at(r, w - 1 - cc, ch);
    return out;
}

/// Anomaly-pipeline frame augmentation, applied in order:
/// horizontal flip (with probability flip_p), central zoom, brightness
/// multiply with clamp to [0,1], small rotation with zero fill.
inline TensorF augment_frame(const TensorF& frame, const AugmentSpec& spec, Rng& rng) {
    require(frame.rank() == 3, "ShapeError", "augment_frame expects H x W x C");
    spec.validate();
    for (std::size_t i = 0; i < frame.size(); ++i)
        require(frame[i] >= 0.0f && frame[i] <= 1.0f, "BadPixelRange",
                "augment_frame expects pixels in [0,1]");

    const std::size_t h = frame.dim(0), w = frame.dim(1), c = frame.dim(2);
    TensorF out = frame;

    if (rng.uniform() < spec.flip_p) out = flip_horizontal(out);

    if (spec.zoom != 1.0) {
        // Scale up then sample the central h x w window (magnification).
        TensorF zoomed({h, w, c});
        const double cy = (static_cast<double>(h) - 1.0) / 2.0;
        const double cx = (static_cast<double>(w) - 1.0) / 2.0;
        for (std::size_t r = 0; r < h; ++r) {
            for (std::size_t cc = 0; cc < w; ++cc) {
                const double y = (static_cast<double>(r) - cy) / spec.zoom + cy;
                const double x = (static_cast<double>(cc) - cx) / spec.zoom + cx;
                for (std::size_t ch = 0; ch < c; ++ch)
                    zoomed.at(r, cc, ch) = detail::bilinear(out, y, x, ch);
            }
        }
        out = std::move(zoomed);
    }

    const double gain = rng.uniform(spec.brightness_lo, spec.brightness_hi);
    if (gain != 1.0) { // skip keeps identity specs bit-exact
        for (std::size_t i = 0; i < out.size(); ++i) {
            const double v = static_cast<double>(out[i]) * gain;
            out[i] = static_cast<float>(std::min(std::max(v, 0.0), 1.0));
        }
    }

    const double theta_deg = rng.uniform(spec.rotation_lo_deg, spec.rotation_hi_deg);
    if (theta_deg != 0.0) {
        const double theta = theta_deg * 3.14159265358979323846 / 180.0;
        const double ct = std::cos(theta), st = std::sin(theta);
        const double cy = (static_cast<double>(h) - 1.0) / 2.0;
        const double cx = (static_cast<double>(w) - 1.0) / 2.0;
        TensorF rotated({h, w, c});
        for (std::size_t r = 0; r < h; ++r) {
            for (std::size_t cc = 0; cc < w; ++cc) {
                // Inverse map: rotate the output coordinate by -theta.
                const double dy = static_cast<double>(r) - cy;
                const double dx = static_cast<double>(cc) - cx;
                const double y = ct * dy + st * dx + cy;
                const double x = -st * dy + ct * dx + cx;
                for (std::size_t ch = 0; ch < c; ++ch)
                    rotated.at(r, cc, ch) = detail::bilinear(out, y, x, ch);
            }
        }
        out = std::move(rotated);
    }

    if (spec.gaussian_noise_std > 0.0) {
        for (std::size_t i = 0; i < out.size(); ++i) {
            const double v = static_cast<double>(out[i]) + rng.normal() * spec.gaussian_noise_std;
            out[i] = static_cast<float>(std::min(std::max(v, 0.0), 1.0));
        }
    }
    if (spec.salt_pepper_p > 0.0) {
        for (std::size_t i = 0; i < out.size(); ++i) {
            const double u = rng.uniform();
            if (u < spec.salt_pepper_p / 2.0)
                out[i] = 0.0f;
            else if (u < spec.salt_pepper_p)
                out[i] = 1.0f;
        }
    }
    return out;
}

} // namespace crowdlab
