// Copyright Contributors to the splattrack project
// SPDX-License-Identifier: Apache-2.0
//
#include "splattrack/data/trajectory_io.hpp"

#include "splattrack/core/error.hpp"
#include "splattrack/data/binary_io.hpp"

#include <fstream>
#include <iterator>

namespace splattrack::data {

std::vector<std::uint8_t>
read_file(const std::filesystem::path &path) {
    if (!std::filesystem::exists(path)) {
        fail(Errc::missing_file, "missing file: " + path.string());
    }
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        fail(Errc::io_error, "cannot open " + path.string());
    }
    return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void
write_file(const std::filesystem::path &path, const std::vector<std::uint8_t> &bytes) {
    std::filesystem::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) {
            fail(Errc::io_error, "cannot write " + path.string());
        }
        out.write(reinterpret_cast<const char *>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
        if (!out) {
            fail(Errc::io_error, "cannot write " + path.string());
        }
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) {
        fail(Errc::io_error, "cannot write " + path.string() + ": " + ec.message());
    }
}

void
write_trajectories(const std::filesystem::path &path, const TrajectorySet &traj) {
    traj.validate();
    ByteWriter w;
    w.raw(kTrajectoryMagic, 4);
    w.u32(kTrajectoryVersion);
    w.u32(static_cast<std::uint32_t>(traj.num_points));
    w.u32(static_cast<std::uint32_t>(traj.num_steps));
    for (double v : traj.positions) {
        w.f32(v);
    }
    for (double v : traj.times) {
        w.f32(v);
    }
    write_file(path, w.bytes());
}

TrajectorySet
read_trajectories(const std::filesystem::path &path) {
    const std::vector<std::uint8_t> bytes = read_file(path);
    ByteReader r(bytes);
    if (!r.has(16)) {
        fail(Errc::shape_mismatch, path.string() + ": truncated trajectory header");
    }
    char magic[4];
    r.raw(magic, 4);
    if (std::memcmp(magic, kTrajectoryMagic, 4) != 0) {
        fail(Errc::version_mismatch, path.string() + ": not a trajectory file (bad magic)");
    }
    const std::uint32_t version = r.u32();
    if (version != kTrajectoryVersion) {
        fail(Errc::version_mismatch, path.string() + ": unsupported trajectory version " + std::to_string(version));
    }
    const std::uint64_t p = r.u32();
    const std::uint64_t t = r.u32();
    const std::uint64_t expected = 4 * (p * t * 3 + t);
    if (r.remaining() != expected) {
        fail(Errc::shape_mismatch, path.string() + ": payload has " + std::to_string(r.remaining()) +
                                       " bytes, header declares " + std::to_string(expected));
    }
    TrajectorySet traj = TrajectorySet::with_size(p, t);
    for (double &v : traj.positions) {
        v = r.f32();
    }
    for (double &v : traj.times) {
        v = r.f32();
    }
    try {
        traj.validate();
    } catch (const Error &e) {
        fail(Errc::invariant_violation, path.string() + ": " + e.what());
    }
    return traj;
}

} // namespace splattrack::data
