// Copyright Contributors to the splattrack project
// SPDX-License-Identifier: Apache-2.0
//
#pragma once

#include "splattrack/core/types.hpp"

#include <filesystem>

namespace splattrack::data {

inline constexpr char kTrajectoryMagic[4] = {'S', 'T', 'R', 'J'};
inline constexpr std::uint32_t kTrajectoryVersion = 1;

/// Binary layout, little-endian: "STRJ", u32 version, u32 P, u32 T, then
/// P x T x 3 f32 positions (point-major) and T f32 timestamps.
void write_trajectories(const std::filesystem::path &path, const TrajectorySet &traj);

/// Throws missing-file, version-mismatch (wrong magic or version),
/// shape-mismatch (size disagrees with the header) or invariant-violation.
TrajectorySet read_trajectories(const std::filesystem::path &path);

} // namespace splattrack::data
