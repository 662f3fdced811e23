// Copyright Contributors to the splattrack project
// SPDX-License-Identifier: Apache-2.0
//
#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace splattrack::data {

/// 8-bit image, row-major with interleaved channels (1 = gray, 3 = RGB).
struct Image {
    int width = 0;
    int height = 0;
    int channels = 0;
    std::vector<std::uint8_t> pixels;

    /// Values in [0,1] quantized with round-to-nearest; out-of-range values clamp.
    static Image from_unit(std::span<const double> values, int width, int height, int channels);
    std::vector<double> to_unit() const;
};

/// Throws missing-file when the file does not exist and io-error when it
/// cannot be decoded. Gray+alpha and RGBA inputs are reduced to gray and RGB.
Image read_png(const std::filesystem::path &path);

void write_png(const std::filesystem::path &path, const Image &image);

} // namespace splattrack::data
