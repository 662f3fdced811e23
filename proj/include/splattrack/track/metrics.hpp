// Copyright Contributors to the splattrack project
// SPDX-License-Identifier: Apache-2.0
//
#pragma once

#include "splattrack/core/types.hpp"

#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace splattrack::track {

inline constexpr std::array<double, 5> kDeltaThresholds = {0.01, 0.02, 0.04, 0.08, 0.16};
inline constexpr double kSurvivalThreshold = 0.5;
inline constexpr std::size_t kDefaultSampleCount = 1000;

/// Euclidean error of every (point, time) sample, point-major.
std::vector<double> sample_errors(const TrajectorySet &pred, const TrajectorySet &gt);

/// Median over all samples; the mean of the two middle values for an even count.
double compute_mte(const TrajectorySet &pred, const TrajectorySet &gt);

/// Fraction of samples strictly below each threshold, averaged over thresholds.
double compute_delta_avg(const TrajectorySet &pred, const TrajectorySet &gt);

/// Per time step, the fraction of points with error strictly below
/// `threshold`, averaged over time steps.
double compute_survival(const TrajectorySet &pred, const TrajectorySet &gt, double threshold = kSurvivalThreshold);

struct TrackReport {
    double mte = 0.0;
    double delta_avg = 0.0;
    double survival = 0.0;
    std::size_t n_points = 0;
    std::size_t n_steps = 0;
    std::vector<double> errors; // P x T

    std::string to_json() const;
};

TrackReport evaluate_tracks(const TrajectorySet &pred, const TrajectorySet &gt);

/// Seeded choice of `count` distinct point indices (all of them when there
/// are fewer), ascending.
std::vector<std::size_t> sample_points(std::size_t available, std::size_t count, std::uint64_t seed);

TrajectorySet select_points(const TrajectorySet &set, std::span<const std::size_t> indices);

/// Peak signal-to-noise ratio in dB for images in [0,1]; infinity when equal.
double psnr(std::span<const double> rendered, std::span<const double> target);

} // namespace splattrack::track
