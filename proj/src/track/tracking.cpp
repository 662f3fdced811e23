// Copyright Contributors to the splattrack project
// SPDX-License-Identifier: Apache-2.0
//
#include "splattrack/track/tracking.hpp"

#include "splattrack/core/error.hpp"
#include "splattrack/core/knn.hpp"
#include "splattrack/core/parallel.hpp"
#include "splattrack/field/deform.hpp"

#include <cmath>

namespace splattrack::track {

namespace {

std::vector<std::uint8_t>
dynamic_flags(const GaussianSet &set, double threshold) {
    std::vector<std::uint8_t> flags(set.size());
    for (std::size_t i = 0; i < set.size(); ++i) {
        flags[i] = set.mask_value(i) > threshold ? 1 : 0;
    }
    return flags;
}

/// Centres of the flagged Gaussians at time t.
std::vector<double>
dynamic_centres(const GaussianSet &set, const std::vector<std::uint8_t> &flags,
                const std::vector<std::uint32_t> &ids, double t, const field::DeformationField &field) {
    const field::DeformedState state = field::deform(set, flags, t, field);
    std::vector<double> out(3 * ids.size());
    for (std::size_t r = 0; r < ids.size(); ++r) {
        for (int a = 0; a < 3; ++a) {
            out[3 * r + a] = state.positions[3 * ids[r] + a];
        }
    }
    return out;
}

void
check_time(double t, const char *what) {
    if (!(t >= 0.0 && t <= 1.0)) {
        fail(Errc::invalid_parameter, std::string("track query: ") + what + " must lie in [0,1]");
    }
}

} // namespace

void
TrackQuery::validate() const {
    if (points.size() % 3 != 0) {
        fail(Errc::invalid_parameter, "track query: points must be a P x 3 buffer");
    }
    for (double v : points) {
        if (!std::isfinite(v)) {
            fail(Errc::invalid_parameter, "track query: non-finite point coordinate");
        }
    }
    check_time(t0, "t0");
    for (double t : eval_times) {
        check_time(t, "evaluation times");
    }
}

TrajectorySet
track_point(const TrackQuery &query, const GaussianSet &gaussians, const field::DeformationField &field,
            const TrackOptions &options) {
    query.validate();
    if (options.knn_size == 0) {
        fail(Errc::invalid_parameter, "track_point: knn_size must be at least 1");
    }
    const std::vector<std::uint8_t> flags = dynamic_flags(gaussians, options.dynamic_threshold);
    std::vector<std::uint32_t> ids;
    for (std::size_t i = 0; i < flags.size(); ++i) {
        if (flags[i]) {
            ids.push_back(static_cast<std::uint32_t>(i));
        }
    }
    if (ids.empty()) {
        fail(Errc::degenerate_model, "track_point: the model has no dynamic Gaussians");
    }
    const std::vector<double> base = dynamic_centres(gaussians, flags, ids, query.t0, field);
    const KnnGrid grid(base);
    const std::size_t p = query.size();
    const std::size_t k = std::min(options.knn_size, ids.size());

    std::vector<std::uint32_t> nbr(p * k);
    std::vector<double> weight(p * k, 0.0);
    parallel_for_chunks(p, 256, [&](std::size_t, std::size_t begin, std::size_t end) {
        for (std::size_t q = begin; q < end; ++q) {
            const Vec3 x(query.points[3 * q], query.points[3 * q + 1], query.points[3 * q + 2]);
            const std::vector<Neighbor> nn = grid.nearest(x, k);
            for (std::size_t j = 0; j < k; ++j) {
                nbr[q * k + j] = nn[j].index;
            }
            if (std::sqrt(nn[0].dist2) < kWeightEpsilon) {
                weight[q * k] = 1.0;
                continue;
            }
            double total = 0.0;
            for (std::size_t j = 0; j < k; ++j) {
                weight[q * k + j] = 1.0 / (std::sqrt(nn[j].dist2) + kWeightEpsilon);
                total += weight[q * k + j];
            }
            for (std::size_t j = 0; j < k; ++j) {
                weight[q * k + j] /= total;
            }
        }
    });

    TrajectorySet out = TrajectorySet::with_size(p, query.eval_times.size());
    out.times = query.eval_times;
    for (std::size_t s = 0; s < query.eval_times.size(); ++s) {
        const double t = query.eval_times[s];
        if (t == query.t0) {
            for (std::size_t q = 0; q < p; ++q) {
                out.set(q, s, Vec3(query.points[3 * q], query.points[3 * q + 1], query.points[3 * q + 2]));
            }
            continue;
        }
        const std::vector<double> moved = dynamic_centres(gaussians, flags, ids, t, field);
        parallel_for_chunks(p, 256, [&](std::size_t, std::size_t begin, std::size_t end) {
            for (std::size_t q = begin; q < end; ++q) {
                Vec3 x(query.points[3 * q], query.points[3 * q + 1], query.points[3 * q + 2]);
                for (std::size_t j = 0; j < k; ++j) {
                    const double w = weight[q * k + j];
                    if (w == 0.0) {
                        continue;
                    }
                    const std::size_t r = nbr[q * k + j];
                    for (int a = 0; a < 3; ++a) {
                        x[a] += w * (moved[3 * r + a] - base[3 * r + a]);
                    }
                }
                out.set(q, s, x);
            }
        });
    }
    return out;
}

TrajectorySet
gaussian_trajectories(const GaussianSet &gaussians, const field::DeformationField &field,
                      std::span<const double> times, double dynamic_threshold) {
    const std::vector<std::uint8_t> flags = dynamic_flags(gaussians, dynamic_threshold);
    std::vector<std::uint32_t> ids;
    for (std::size_t i = 0; i < flags.size(); ++i) {
        if (flags[i]) {
            ids.push_back(static_cast<std::uint32_t>(i));
        }
    }
    TrajectorySet out = TrajectorySet::with_size(ids.size(), times.size());
    out.times.assign(times.begin(), times.end());
    for (std::size_t s = 0; s < times.size(); ++s) {
        check_time(times[s], "evaluation times");
        const std::vector<double> c = dynamic_centres(gaussians, flags, ids, times[s], field);
        for (std::size_t r = 0; r < ids.size(); ++r) {
            out.set(r, s, Vec3(c[3 * r], c[3 * r + 1], c[3 * r + 2]));
        }
    }
    return out;
}

} // namespace splattrack::track
