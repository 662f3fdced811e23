// Copyright Contributors to the splattrack project
// SPDX-License-Identifier: Apache-2.0
//
#pragma once

#include "splattrack/core/types.hpp"
#include "splattrack/field/deformation_field.hpp"

#include <vector>

namespace splattrack::track {

inline constexpr std::size_t kDefaultKnnSize = 5;
inline constexpr double kWeightEpsilon = 1e-8;

struct TrackQuery {
    std::vector<double> points; // P x 3, positions at t0
    double t0 = 0.0;
    std::vector<double> eval_times;

    std::size_t size() const noexcept { return points.size() / 3; }
    /// Throws invalid-parameter.
    void validate() const;
};

struct TrackOptions {
    std::size_t knn_size = kDefaultKnnSize;
    /// Gaussians with sigmoid(mask logit) above this follow the field.
    double dynamic_threshold = 0.5;
};

/// Moves every query point with the inverse-distance weighted displacement
/// of its nearest dynamic Gaussians. A query within 1e-8 of a Gaussian
/// centre follows that Gaussian exactly.
TrajectorySet track_point(const TrackQuery &query, const GaussianSet &gaussians,
                          const field::DeformationField &field, const TrackOptions &options = {});

/// Deformed centres of the dynamic Gaussians at every time, in index order.
TrajectorySet gaussian_trajectories(const GaussianSet &gaussians, const field::DeformationField &field,
                                    std::span<const double> times, double dynamic_threshold = 0.5);

} // namespace splattrack::track
