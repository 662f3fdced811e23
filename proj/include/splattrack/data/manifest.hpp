// Copyright Contributors to the splattrack project
// SPDX-License-Identifier: Apache-2.0
//
#pragma once

#include "splattrack/core/types.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace splattrack::data {

inline constexpr int kManifestVersion = 1;
inline constexpr const char *kManifestFile = "manifest.json";

struct CameraRecord {
    int id = 0;
    Camera camera;
    /// Held-out cameras are excluded from training and used for evaluation.
    bool held_out = false;
};

struct FrameRecord {
    int camera_id = 0;
    int time_index = 0;
    std::string image_path;               // relative to the dataset root
    std::optional<std::string> mask_path; // relative to the dataset root
};

/// JSON manifest of a multi-view image sequence. Cameras store the
/// world-to-camera transform as a row-major 4x4 matrix.
struct SceneManifest {
    int version = kManifestVersion;
    std::vector<CameraRecord> cameras;
    std::vector<FrameRecord> frames;
    int num_timesteps = 0;
    std::optional<std::string> trajectory_path;
    Vec3 bbox_min = Vec3::Zero();
    Vec3 bbox_max = Vec3::Zero();

    /// Normalized timestamp of time index k: k / (T - 1), or 0 when T == 1.
    double time_of(int k) const;
    std::vector<double> times() const;

    /// Index into `cameras` of the given id, or -1.
    int camera_index(int id) const;

    /// Throws invariant-violation naming the offending frame or camera.
    void validate() const;
};

std::string manifest_to_json(const SceneManifest &manifest);
SceneManifest manifest_from_json(const std::string &text, const std::string &origin = "manifest");

void save_manifest(const std::filesystem::path &path, const SceneManifest &manifest);
SceneManifest load_manifest(const std::filesystem::path &path);

} // namespace splattrack::data
