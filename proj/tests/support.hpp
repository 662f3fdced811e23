// Copyright Contributors to the splattrack project
// SPDX-License-Identifier: Apache-2.0
//
#pragma once

// Shared helpers for the unit and acceptance tests: seeded random instances,
// gradient-check tolerances and the brute-force compositor used as the
// rasterizer oracle.

#include "splattrack/core/types.hpp"
#include "splattrack/raster/rasterizer.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <vector>

namespace splattrack::testing {

using Rng = std::mt19937_64;

inline double
uniform(Rng &rng, double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(rng);
}

inline Vec4
random_unit_quat(Rng &rng) {
    std::normal_distribution<double> n(0.0, 1.0);
    Vec4 q(n(rng), n(rng), n(rng), n(rng));
    return q / q.norm();
}

inline Mat3
random_rotation(Rng &rng) {
    const Vec4 q = random_unit_quat(rng);
    return Eigen::Quaterniond(q[0], q[1], q[2], q[3]).toRotationMatrix();
}

/// Relative error with an absolute floor for near-zero values.
inline bool
grad_close(double analytic, double numeric, double rel = 1e-4, double abs_floor = 1e-8) {
    const double diff = std::abs(analytic - numeric);
    if (diff <= abs_floor) {
        return true;
    }
    return diff <= rel * std::max(std::abs(analytic), std::abs(numeric));
}

/// Per-pixel compositor that evaluates every Gaussian at every pixel. It
/// shares only the cutoff constants with the library.
struct BruteForceImage {
    std::vector<double> rgb, mask, alpha;
};

inline BruteForceImage
brute_force_composite(const raster::SplatInputs &in) {
    const std::size_t n = in.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return in.depths[a] < in.depths[b]; });
    BruteForceImage img;
    const std::size_t pixels = static_cast<std::size_t>(in.width) * in.height;
    img.rgb.assign(3 * pixels, 0.0);
    img.mask.assign(pixels, 0.0);
    img.alpha.assign(pixels, 0.0);
    for (int y = 0; y < in.height; ++y) {
        for (int x = 0; x < in.width; ++x) {
            Vec3 color = Vec3::Zero();
            double m = 0.0;
            double t = 1.0;
            for (std::size_t id : order) {
                Mat2 cov;
                cov << in.cov2d[3 * id] + raster::kCovarianceFloor, in.cov2d[3 * id + 1], in.cov2d[3 * id + 1],
                    in.cov2d[3 * id + 2] + raster::kCovarianceFloor;
                const Vec2 d(x - in.means2d[2 * id], y - in.means2d[2 * id + 1]);
                const double q = d.dot(cov.inverse() * d);
                if (q > raster::kCutoffMahalanobis2) {
                    continue;
                }
                const double a = in.opacities[id] * std::exp(-0.5 * q);
                if (a < raster::kAlphaMin) {
                    continue;
                }
                color += a * t * Vec3(in.colors[3 * id], in.colors[3 * id + 1], in.colors[3 * id + 2]);
                m += a * t * in.mask_values[id];
                t *= 1.0 - a;
                if (t < raster::kTransmittanceMin) {
                    break;
                }
            }
            const std::size_t p = static_cast<std::size_t>(y) * in.width + x;
            for (int c = 0; c < 3; ++c) {
                img.rgb[3 * p + c] = color[c] + t * in.background[c];
            }
            img.mask[p] = m;
            img.alpha[p] = 1.0 - t;
        }
    }
    return img;
}

/// Random splat instance. Scales are in pixels relative to the image.
inline raster::SplatInputs
random_splats(Rng &rng, std::size_t n, int width, int height, double min_sigma = 0.8, double max_sigma = 5.0) {
    raster::SplatInputs in;
    in.width = width;
    in.height = height;
    in.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        in.means2d[2 * i] = uniform(rng, -1.0, width);
        in.means2d[2 * i + 1] = uniform(rng, -1.0, height);
        const double s0 = uniform(rng, min_sigma, max_sigma);
        const double s1 = uniform(rng, min_sigma, max_sigma);
        const double th = uniform(rng, 0.0, 3.14159);
        const double c = std::cos(th), s = std::sin(th);
        in.cov2d[3 * i] = c * c * s0 * s0 + s * s * s1 * s1;
        in.cov2d[3 * i + 1] = c * s * (s0 * s0 - s1 * s1);
        in.cov2d[3 * i + 2] = s * s * s0 * s0 + c * c * s1 * s1;
        in.depths[i] = uniform(rng, 1.0, 5.0);
        for (int k = 0; k < 3; ++k) {
            in.colors[3 * i + k] = uniform(rng, 0.0, 1.0);
        }
        in.opacities[i] = uniform(rng, 0.05, 0.95);
        in.mask_values[i] = uniform(rng, 0.0, 1.0);
    }
    in.background = Vec3(uniform(rng, 0, 1), uniform(rng, 0, 1), uniform(rng, 0, 1));
    return in;
}

/// True when no Gaussian sits within `margin` of a cutoff at any pixel, so
/// the rendered image is smooth in a neighbourhood of the instance and
/// central differences are meaningful.
inline bool
away_from_cutoffs(const raster::SplatInputs &in, double margin = 1e-3) {
    const std::size_t n = in.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return in.depths[a] < in.depths[b]; });
    for (int y = 0; y < in.height; ++y) {
        for (int x = 0; x < in.width; ++x) {
            double t = 1.0;
            for (std::size_t id : order) {
                Mat2 cov;
                cov << in.cov2d[3 * id] + raster::kCovarianceFloor, in.cov2d[3 * id + 1], in.cov2d[3 * id + 1],
                    in.cov2d[3 * id + 2] + raster::kCovarianceFloor;
                const Vec2 d(x - in.means2d[2 * id], y - in.means2d[2 * id + 1]);
                const double q = d.dot(cov.inverse() * d);
                if (std::abs(q - raster::kCutoffMahalanobis2) < margin) {
                    return false;
                }
                if (q > raster::kCutoffMahalanobis2) {
                    continue;
                }
                const double a = in.opacities[id] * std::exp(-0.5 * q);
                if (std::abs(a - raster::kAlphaMin) < margin * raster::kAlphaMin) {
                    return false;
                }
                if (a < raster::kAlphaMin) {
                    continue;
                }
                const double next = t * (1.0 - a);
                if (std::abs(next - raster::kTransmittanceMin) < margin * raster::kTransmittanceMin) {
                    return false;
                }
                t = next;
                if (t < raster::kTransmittanceMin) {
                    break;
                }
            }
        }
    }
    return true;
}

struct GradCheckResult {
    std::size_t checked = 0;
    std::size_t failed = 0;
    double worst_rel = 0.0;

    void record(double analytic, double numeric, double rel = 1e-4, double abs_floor = 1e-8) {
        ++checked;
        const double diff = std::abs(analytic - numeric);
        const double scale = std::max(std::abs(analytic), std::abs(numeric));
        if (scale > 1e-6) {
            worst_rel = std::max(worst_rel, diff / scale);
        }
        if (!grad_close(analytic, numeric, rel, abs_floor)) {
            ++failed;
        }
    }
    void merge(const GradCheckResult &o) {
        checked += o.checked;
        failed += o.failed;
        worst_rel = std::max(worst_rel, o.worst_rel);
    }
};

/// Compares rasterize_backward against central differences of
/// L = sum(grad_rgb * rgb) + sum(grad_mask * mask) for every input scalar.
inline GradCheckResult
check_raster_gradients(const raster::SplatInputs &in, Rng &rng, double step = 1e-5) {
    const std::size_t pixels = static_cast<std::size_t>(in.width) * in.height;
    std::vector<double> gRgb(3 * pixels), gMask(pixels);
    for (double &v : gRgb) {
        v = uniform(rng, -1.0, 1.0);
    }
    for (double &v : gMask) {
        v = uniform(rng, -1.0, 1.0);
    }
    auto objective = [&](const raster::SplatInputs &s) {
        const raster::RenderOutput o = raster::rasterize(s);
        double l = 0.0;
        for (std::size_t i = 0; i < gRgb.size(); ++i) {
            l += gRgb[i] * o.rgb[i];
        }
        for (std::size_t i = 0; i < gMask.size(); ++i) {
            l += gMask[i] * o.mask[i];
        }
        return l;
    };
    const raster::RenderOutput out = raster::rasterize(in);
    const raster::SplatGradients g = raster::rasterize_backward(in, out, gRgb, gMask);

    GradCheckResult res;
    auto sweep = [&](std::vector<double> raster::SplatInputs::*field, const std::vector<double> &analytic) {
        for (std::size_t i = 0; i < analytic.size(); ++i) {
            raster::SplatInputs plus = in, minus = in;
            (plus.*field)[i] += step;
            (minus.*field)[i] -= step;
            const double numeric = (objective(plus) - objective(minus)) / (2.0 * step);
            res.record(analytic[i], numeric);
        }
    };
    sweep(&raster::SplatInputs::means2d, g.means2d);
    sweep(&raster::SplatInputs::cov2d, g.cov2d);
    sweep(&raster::SplatInputs::colors, g.colors);
    sweep(&raster::SplatInputs::opacities, g.opacities);
    sweep(&raster::SplatInputs::mask_values, g.mask_values);
    return res;
}

/// Seeded instance that is smooth around its parameters (see away_from_cutoffs).
inline raster::SplatInputs
smooth_random_splats(Rng &rng, std::size_t n, int width, int height) {
    for (;;) {
        raster::SplatInputs in = random_splats(rng, n, width, height, 1.0, 4.0);
        if (away_from_cutoffs(in)) {
            return in;
        }
    }
}

} // namespace splattrack::testing
