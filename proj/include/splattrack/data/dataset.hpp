// Copyright Contributors to the splattrack project
// SPDX-License-Identifier: Apache-2.0
//
#pragma once

#include "splattrack/data/manifest.hpp"

#include <filesystem>
#include <vector>

namespace splattrack::data {

struct FrameData {
    std::size_t camera = 0; // index into manifest.cameras
    int time_index = 0;
    std::vector<double> rgb;  // H x W x 3 in [0,1]
    std::vector<double> mask; // H x W in {0,1}, empty when the frame has none
};

/// A manifest with every image decoded.
struct SceneDataset {
    std::filesystem::path root;
    SceneManifest manifest;
    std::vector<FrameData> frames; // same order as manifest.frames

    const Camera &camera_of(const FrameData &f) const { return manifest.cameras[f.camera].camera; }
    bool held_out(const FrameData &f) const { return manifest.cameras[f.camera].held_out; }

    /// Frame indices for training (cameras not held out) or evaluation.
    std::vector<std::size_t> training_frames() const;
    std::vector<std::size_t> held_out_frames() const;
};

/// Loads `<dir>/manifest.json` and every referenced image, checking image
/// sizes against the camera records. Masks are binarized at 0.5.
SceneDataset load_dataset(const std::filesystem::path &dir);

} // namespace splattrack::data
