// Copyright Contributors to the splattrack project
// SPDX-License-Identifier: Apache-2.0
//
#pragma once

// Little-endian helpers shared by the trajectory and checkpoint formats.

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <string>
#include <vector>

namespace splattrack::data {

class ByteWriter {
public:
    void reserve(std::size_t n) { mBytes.reserve(n); }
    void u32(std::uint32_t v) {
        const std::uint8_t b[4] = {static_cast<std::uint8_t>(v), static_cast<std::uint8_t>(v >> 8),
                                   static_cast<std::uint8_t>(v >> 16), static_cast<std::uint8_t>(v >> 24)};
        mBytes.insert(mBytes.end(), b, b + 4);
    }
    void f32(double v) { u32(std::bit_cast<std::uint32_t>(static_cast<float>(v))); }
    void raw(const void *data, std::size_t n) {
        const auto *p = static_cast<const std::uint8_t *>(data);
        mBytes.insert(mBytes.end(), p, p + n);
    }
    const std::vector<std::uint8_t> &bytes() const { return mBytes; }

private:
    std::vector<std::uint8_t> mBytes;
};

class ByteReader {
public:
    explicit ByteReader(const std::vector<std::uint8_t> &bytes) : mBytes(bytes) {}

    bool has(std::size_t n) const { return mBytes.size() - mPos >= n; }
    std::size_t remaining() const { return mBytes.size() - mPos; }
    std::uint32_t u32() {
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) {
            v |= static_cast<std::uint32_t>(mBytes[mPos + i]) << (8 * i);
        }
        mPos += 4;
        return v;
    }
    double f32() { return static_cast<double>(std::bit_cast<float>(u32())); }
    void raw(void *out, std::size_t n) {
        std::memcpy(out, mBytes.data() + mPos, n);
        mPos += n;
    }

private:
    const std::vector<std::uint8_t> &mBytes;
    std::size_t mPos = 0;
};

/// Whole-file helpers; writes go through a temporary file and a rename.
std::vector<std::uint8_t> read_file(const std::filesystem::path &path);
void write_file(const std::filesystem::path &path, const std::vector<std::uint8_t> &bytes);

} // namespace splattrack::data
