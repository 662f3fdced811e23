// Copyright Contributors to the splattrack project
// SPDX-License-Identifier: Apache-2.0
//
#include "splattrack/track/metrics.hpp"

#include "splattrack/core/error.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

namespace splattrack::track {

namespace {

void
check_shapes(const TrajectorySet &pred, const TrajectorySet &gt) {
    if (pred.num_points != gt.num_points || pred.num_steps != gt.num_steps ||
        pred.positions.size() != gt.positions.size() || pred.positions.size() != 3 * pred.num_points * pred.num_steps) {
        fail(Errc::shape_mismatch, "trajectory sets differ in shape (" + std::to_string(pred.num_points) + "x" +
                                       std::to_string(pred.num_steps) + " vs " + std::to_string(gt.num_points) + "x" +
                                       std::to_string(gt.num_steps) + ")");
    }
}

double
median(std::vector<double> v) {
    if (v.empty()) {
        return 0.0;
    }
    const std::size_t mid = v.size() / 2;
    std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
    const double hi = v[mid];
    if (v.size() % 2 == 1) {
        return hi;
    }
    const double lo = *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid));
    return (lo + hi) / 2;
}

} // namespace

std::vector<double>
sample_errors(const TrajectorySet &pred, const TrajectorySet &gt) {
    check_shapes(pred, gt);
    std::vector<double> err(pred.num_points * pred.num_steps);
    for (std::size_t i = 0; i < err.size(); ++i) {
        const double dx = pred.positions[3 * i] - gt.positions[3 * i];
        const double dy = pred.positions[3 * i + 1] - gt.positions[3 * i + 1];
        const double dz = pred.positions[3 * i + 2] - gt.positions[3 * i + 2];
        err[i] = std::sqrt(dx * dx + dy * dy + dz * dz);
    }
    return err;
}

double
compute_mte(const TrajectorySet &pred, const TrajectorySet &gt) {
    return median(sample_errors(pred, gt));
}

double
compute_delta_avg(const TrajectorySet &pred, const TrajectorySet &gt) {
    const std::vector<double> err = sample_errors(pred, gt);
    if (err.empty()) {
        return 1.0;
    }
    double sum = 0.0;
    for (double thr : kDeltaThresholds) {
        const auto below = std::count_if(err.begin(), err.end(), [thr](double e) { return e < thr; });
        sum += static_cast<double>(below) / static_cast<double>(err.size());
    }
    return sum / static_cast<double>(kDeltaThresholds.size());
}

double
compute_survival(const TrajectorySet &pred, const TrajectorySet &gt, double threshold) {
    const std::vector<double> err = sample_errors(pred, gt);
    if (pred.num_steps == 0 || pred.num_points == 0) {
        return 1.0;
    }
    double sum = 0.0;
    for (std::size_t s = 0; s < pred.num_steps; ++s) {
        std::size_t alive = 0;
        for (std::size_t p = 0; p < pred.num_points; ++p) {
            alive += err[p * pred.num_steps + s] < threshold ? 1 : 0;
        }
        sum += static_cast<double>(alive) / static_cast<double>(pred.num_points);
    }
    return sum / static_cast<double>(pred.num_steps);
}

std::string
TrackReport::to_json() const {
    nlohmann::json j = {{"mte_m", mte},
                        {"delta_avg", delta_avg},
                        {"survival", survival},
                        {"n_points", n_points},
                        {"n_steps", n_steps}};
    return j.dump(2);
}

TrackReport
evaluate_tracks(const TrajectorySet &pred, const TrajectorySet &gt) {
    TrackReport r;
    r.errors = sample_errors(pred, gt);
    r.mte = median(r.errors);
    r.delta_avg = compute_delta_avg(pred, gt);
    r.survival = compute_survival(pred, gt);
    r.n_points = pred.num_points;
    r.n_steps = pred.num_steps;
    return r;
}

std::vector<std::size_t>
sample_points(std::size_t available, std::size_t count, std::uint64_t seed) {
    std::vector<std::size_t> idx(available);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    if (count >= available) {
        return idx;
    }
    // Partial Fisher-Yates with an explicit draw so the result does not
    // depend on the standard library's distribution implementation.
    std::mt19937_64 rng(seed);
    for (std::size_t i = 0; i < count; ++i) {
        const std::size_t j = i + static_cast<std::size_t>(rng() % (available - i));
        std::swap(idx[i], idx[j]);
    }
    idx.resize(count);
    std::sort(idx.begin(), idx.end());
    return idx;
}

TrajectorySet
select_points(const TrajectorySet &set, std::span<const std::size_t> indices) {
    TrajectorySet out = TrajectorySet::with_size(indices.size(), set.num_steps);
    out.times = set.times;
    for (std::size_t r = 0; r < indices.size(); ++r) {
        if (indices[r] >= set.num_points) {
            fail(Errc::invalid_parameter, "select_points: index " + std::to_string(indices[r]) + " out of range");
        }
        for (std::size_t s = 0; s < set.num_steps; ++s) {
            out.set(r, s, set.at(indices[r], s));
        }
    }
    return out;
}

double
psnr(std::span<const double> rendered, std::span<const double> target) {
    if (rendered.size() != target.size() || rendered.empty()) {
        fail(Errc::shape_mismatch, "psnr: images differ in size");
    }
    double se = 0.0;
    for (std::size_t i = 0; i < rendered.size(); ++i) {
        const double d = rendered[i] - target[i];
        se += d * d;
    }
    const double mse = se / static_cast<double>(rendered.size());
    if (mse == 0.0) {
        return std::numeric_limits<double>::infinity();
    }
    return -10.0 * std::log10(mse);
}

} // namespace splattrack::track
