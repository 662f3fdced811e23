// Copyright Contributors to the splattrack project
// SPDX-License-Identifier: Apache-2.0
//
#pragma once

#include "splattrack/core/types.hpp"
#include "splattrack/field/deformation_field.hpp"

#include <cstdint>
#include <string>

namespace splattrack::train {

struct LearningRates {
    double positions = 1.6e-4;
    double rotations = 1e-3;
    double scales = 5e-3;
    double opacities = 5e-2;
    double colors = 2.5e-3;
    double mask_logits = 2.5e-3;
    double planes = 1.6e-3;
    double mlp = 1.6e-4;
};

struct TrainConfig {
    int iterations = 30000;
    int coarse_iterations = 3000;
    int prune_interval = 100;
    double lambda_w = 2000.0; // 1/m^2
    double lambda_momentum = 0.03;
    double lambda_iso = 0.3;
    int knn_k = 20;
    double mask_loss_weight = 0.1;
    LearningRates lr;
    double dynamic_threshold = 0.5;
    double prune_opacity = 0.005;
    std::uint64_t seed = 0;

    // Initialization of the point cloud.
    int init_points = 8000;
    double init_opacity = 0.1;

    field::FieldConfig field;
    Vec3 background = Vec3::Zero();
    /// Structural-similarity term of the photometric loss. Not implemented;
    /// enabling it is rejected by validate().
    bool dssim = false;

    /// Throws invalid-config.
    void validate() const;
};

std::string config_to_json(const TrainConfig &config);

/// Applies the keys present in `text` on top of `base`; unknown keys are an
/// invalid-config error.
TrainConfig config_from_json(const std::string &text, TrainConfig base = {});

} // namespace splattrack::train
