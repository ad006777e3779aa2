#pragma once

#include <filesystem>
#include <string>

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>

#include "crowdlab/density.hpp"
#include "crowdlab/error.hpp"
#include "crowdlab/tensor.hpp"

namespace crowdlab {

/// Load an image file as H x W x C float tensor in [0,1].
/// channels: 1 forces grayscale, 3 forces RGB.
inline TensorF load_image(const std::filesystem::path& path, std::size_t channels = 3) {
    require(channels == 1 || channels == 3, "ShapeError", "channels must be 1 or 3");
    cv::Mat img = cv::imread(path.string(),
                             channels == 1 ? cv::IMREAD_GRAYSCALE : cv::IMREAD_COLOR);
    require(!img.empty(), "DecodeFailure", "cannot decode image: " + path.string());
    const std::size_t h = static_cast<std::size_t>(img.rows);
    const std::size_t w = static_cast<std::size_t>(img.cols);
    TensorF out({h, w, channels});
    for (std::size_t r = 0; r < h; ++r) {
        for (std::size_t c = 0; c < w; ++c) {
            if (channels == 1) {
                out.at(r, c, 0) = static_cast<float>(img.at<uchar>(static_cast<int>(r),
                                                                   static_cast<int>(c))) /
                                  255.0f;
            } else {
                const auto& px = img.at<cv::Vec3b>(static_cast<int>(r), static_cast<int>(c));
                // OpenCV loads BGR; store RGB.
                out.at(r, c, 0) = static_cast<float>(px[2]) / 255.0f;
                out.at(r, c, 1) = static_cast<float>(px[1]) / 255.0f;
                out.at(r, c, 2) = static_cast<float>(px[0]) / 255.0f;
            }
        }
    }
    return out;
}

/// Write an H x W x C tensor in [0,1] as an 8-bit PNG.
inline void save_image(const TensorF& image, const std::filesystem::path& path) {
    require(image.rank() == 3, "ShapeError", "save_image expects H x W x C");
    const std::size_t h = image.dim(0), w = image.dim(1), c = image.dim(2);
    require(c == 1 || c == 3, "ShapeError", "save_image supports 1 or 3 channels");
    cv::Mat img(static_cast<int>(h), static_cast<int>(w), c == 1 ? CV_8UC1 : CV_8UC3);
    auto to_byte = [](float v) {
        const float clamped = std::min(std::max(v, 0.0f), 1.0f);
        return static_cast<uchar>(std::lround(clamped * 255.0f));
    };
    for (std::size_t r = 0; r < h; ++r) {
        for (std::size_t cc = 0; cc < w; ++cc) {
            if (c == 1) {
                img.at<uchar>(static_cast<int>(r), static_cast<int>(cc)) =
                    to_byte(image.at(r, cc, 0));
            } else {
                img.at<cv::Vec3b>(static_cast<int>(r), static_cast<int>(cc)) =
                    cv::Vec3b(to_byte(image.at(r, cc, 2)), to_byte(image.at(r, cc, 1)),
                              to_byte(image.at(r, cc, 0)));
            }
        }
    }
    require(cv::imwrite(path.string(), img), "MissingFile",
            "cannot write image: " + path.string());
}

/// Density map rendered to 8-bit grayscale, normalized by its max value.
inline void save_density_png(const DensityMap& map, const std::filesystem::path& path) {
    double mx = 0.0;
    for (double v : map.values) mx = std::max(mx, v);
    TensorF img({map.height, map.width, 1});
    const double scale = mx > 0.0 ? 1.0 / mx : 0.0;
    for (std::size_t i = 0; i < map.values.size(); ++i)
        img[i] = static_cast<float>(map.values[i] * scale);
    save_image(img, path);
}

} // namespace crowdlab
