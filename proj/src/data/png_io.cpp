// Copyright Contributors to the splattrack project
// SPDX-License-Identifier: Apache-2.0
//
#include "splattrack/data/png_io.hpp"

#include "splattrack/core/error.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <csetjmp>
#include <cstdio>
#include <memory>

namespace splattrack::data {

namespace {

struct FileCloser {
    void operator()(std::FILE *f) const { std::fclose(f); }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

// libpng reports errors by longjmp; the message is kept for the exception
// raised once control is back in C++.
struct ErrorSink {
    char message[256] = {};
};

void
png_error_handler(png_structp png, png_const_charp msg) {
    auto *sink = static_cast<ErrorSink *>(png_get_error_ptr(png));
    std::snprintf(sink->message, sizeof(sink->message), "%s", msg);
    png_longjmp(png, 1);
}

void
png_warning_handler(png_structp, png_const_charp) {}

} // namespace

Image
Image::from_unit(std::span<const double> values, int width, int height, int channels) {
    if (values.size() != static_cast<std::size_t>(width) * height * channels) {
        fail(Errc::shape_mismatch, "image: value count does not match the dimensions");
    }
    Image img;
    img.width = width;
    img.height = height;
    img.channels = channels;
    img.pixels.resize(values.size());
    for (std::size_t i = 0; i < values.size(); ++i) {
        const double v = std::clamp(values[i], 0.0, 1.0);
        img.pixels[i] = static_cast<std::uint8_t>(std::lround(v * 255.0));
    }
    return img;
}

std::vector<double>
Image::to_unit() const {
    std::vector<double> out(pixels.size());
    for (std::size_t i = 0; i < pixels.size(); ++i) {
        out[i] = pixels[i] / 255.0;
    }
    return out;
}

Image
read_png(const std::filesystem::path &path) {
    if (!std::filesystem::exists(path)) {
        fail(Errc::missing_file, "missing image: " + path.string());
    }
    FilePtr file(std::fopen(path.c_str(), "rb"));
    if (!file) {
        fail(Errc::io_error, "cannot open image: " + path.string());
    }
    ErrorSink sink;
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, &sink, png_error_handler, png_warning_handler);
    png_infop info = png_create_info_struct(png);
    Image img;
    std::vector<png_bytep> rows;
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        fail(Errc::io_error, "cannot decode " + path.string() + ": " + sink.message);
    }
    {
        png_init_io(png, file.get());
        png_read_info(png, info);
        png_set_strip_16(png);
        png_set_packing(png);
        png_set_strip_alpha(png);
        const png_byte colorType = png_get_color_type(png, info);
        if (colorType == PNG_COLOR_TYPE_PALETTE) {
            png_set_palette_to_rgb(png);
        }
        if (colorType == PNG_COLOR_TYPE_GRAY && png_get_bit_depth(png, info) < 8) {
            png_set_expand_gray_1_2_4_to_8(png);
        }
        png_read_update_info(png, info);
        img.width = static_cast<int>(png_get_image_width(png, info));
        img.height = static_cast<int>(png_get_image_height(png, info));
        img.channels = png_get_channels(png, info);
        img.pixels.resize(static_cast<std::size_t>(img.width) * img.height * img.channels);
        rows.resize(img.height);
        for (int y = 0; y < img.height; ++y) {
            rows[y] = img.pixels.data() + static_cast<std::size_t>(y) * img.width * img.channels;
        }
        png_read_image(png, rows.data());
        png_read_end(png, nullptr);
    }
    png_destroy_read_struct(&png, &info, nullptr);
    return img;
}

void
write_png(const std::filesystem::path &path, const Image &image) {
    if (image.channels != 1 && image.channels != 3) {
        fail(Errc::invalid_parameter, "write_png: only gray and RGB images are supported");
    }
    FilePtr file(std::fopen(path.c_str(), "wb"));
    if (!file) {
        fail(Errc::io_error, "cannot write image: " + path.string());
    }
    ErrorSink sink;
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, &sink, png_error_handler, png_warning_handler);
    png_infop info = png_create_info_struct(png);
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        fail(Errc::io_error, "cannot encode " + path.string() + ": " + sink.message);
    }
    {
        png_init_io(png, file.get());
        png_set_IHDR(png, info, image.width, image.height, 8,
                     image.channels == 3 ? PNG_COLOR_TYPE_RGB : PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE,
                     PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
        png_write_info(png, info);
        for (int y = 0; y < image.height; ++y) {
            png_write_row(png, image.pixels.data() + static_cast<std::size_t>(y) * image.width * image.channels);
        }
        png_write_end(png, nullptr);
    }
    png_destroy_write_struct(&png, &info);
}

} // namespace splattrack::data
