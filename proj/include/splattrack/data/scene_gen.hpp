// Copyright Contributors to the splattrack project
// SPDX-License-Identifier: Apache-2.0
//
#pragma once

#include "splattrack/core/types.hpp"
#include "splattrack/data/manifest.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace splattrack::data {

enum class Deformation { none, wave, drop_on_sphere };
enum class Texture { noise, checker, half_uniform };

std::string to_string(Deformation d);
std::string to_string(Texture t);
/// Throws invalid-parameter for unknown names.
Deformation parse_deformation(const std::string &name);
Texture parse_texture(const std::string &name);

struct SceneSpec {
    int grid_res = 40;
    int num_cameras = 12;
    int held_out_cameras = 2;
    int num_timesteps = 20;
    int image_size = 96;
    int ground_res = 32;
    Deformation deformation = Deformation::drop_on_sphere;
    Texture texture = Texture::noise;
    std::uint64_t seed = 0;

    /// Throws invalid-parameter.
    void validate() const;
};

// Scene geometry in metres; +z is up and the ground is the z = 0 plane.
inline constexpr double kSheetSize = 1.0;
inline constexpr double kSphereRadius = 0.3;
inline constexpr double kWaveRestHeight = 0.5;
inline constexpr double kWaveAmplitude = 0.0625;
inline constexpr double kWaveLength = 0.5;
inline constexpr double kGroundSize = 1.6;

/// Sheet point positions (grid_res^2 x 3, row-major grid) at normalized time t.
std::vector<double> sheet_positions(const SceneSpec &spec, double t);

/// Ground-truth trajectories of every sheet point at the scene's timesteps.
TrajectorySet sheet_trajectories(const SceneSpec &spec);

/// Sheet Gaussians followed by the ground Gaussians, at time t. Sheet
/// Gaussians carry a large positive mask logit, ground ones a large negative.
GaussianSet scene_gaussians(const SceneSpec &spec, double t);

std::vector<CameraRecord> scene_cameras(const SceneSpec &spec);

/// Renders every (camera, time) frame and writes manifest, images, masks and
/// ground-truth trajectories under `dir`. Throws io-error if the directory
/// cannot be written.
SceneManifest generate_scene(const SceneSpec &spec, const std::filesystem::path &dir);

} // namespace splattrack::data
