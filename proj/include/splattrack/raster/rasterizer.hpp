// Copyright Contributors to the splattrack project
// SPDX-License-Identifier: Apache-2.0
//
#pragma once

#include "splattrack/core/types.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace splattrack::raster {

/// Added to the diagonal of every 2D covariance before inversion (pixels^2).
inline constexpr double kCovarianceFloor = 0.3;
/// Gaussians whose alpha at a pixel falls below this are skipped there.
inline constexpr double kAlphaMin = 1.0 / 255.0;
/// Compositing stops once transmittance drops below this.
inline constexpr double kTransmittanceMin = 1e-4;
/// A Gaussian only reaches pixels within this squared Mahalanobis distance (3 sigma).
inline constexpr double kCutoffMahalanobis2 = 9.0;
inline constexpr int kTileSize = 16;

/// Posed, projected Gaussians ready for compositing. Per-Gaussian arrays are
/// flat: means2d N x 2, cov2d N x 3 holding the symmetric matrix as
/// (xx, xy, yy), colors N x 3.
struct SplatInputs {
    int width = 0;
    int height = 0;
    std::vector<double> means2d;
    std::vector<double> cov2d;
    std::vector<double> depths;
    std::vector<double> colors;
    std::vector<double> opacities;
    std::vector<double> mask_values;
    Vec3 background = Vec3::Zero();

    std::size_t size() const noexcept { return depths.size(); }
    void resize(std::size_t n);
    void validate() const;
};

/// Images are row-major: pixel (x, y) lives at index y * width + x.
struct RenderOutput {
    int width = 0;
    int height = 0;
    std::vector<double> rgb;   // H x W x 3
    std::vector<double> mask;  // H x W
    std::vector<double> alpha; // H x W, 1 - final transmittance

    // Metadata for the backward pass.
    std::vector<std::uint32_t> tile_offsets;        // tiles + 1 offsets into tile_entries
    std::vector<std::uint32_t> tile_entries;        // Gaussian ids per tile, front to back
    std::vector<std::uint32_t> traversed;           // per pixel: tile entries visited
    std::vector<double> final_transmittance;        // per pixel
    std::vector<double> transmittance_before_last;  // per pixel, before the last contributor
    std::vector<double> conics;                     // N x 3, inverse of the floored covariance
    // Contributors of every pixel in compositing order: the tile entry index,
    // the transmittance in front of it and exp(-q/2).
    std::vector<std::uint32_t> hit_offsets; // pixels + 1
    std::vector<std::uint32_t> hit_entries;
    std::vector<double> hit_transmittance;
    std::vector<double> hit_gauss;

    std::size_t pixel_count() const noexcept { return static_cast<std::size_t>(width) * height; }
};

/// Front-to-back alpha compositing of the inputs. Ties in depth are ordered by
/// ascending Gaussian index. The RGB channel composites over the background
/// colour, the mask channel over zero.
RenderOutput rasterize(const SplatInputs &inputs);

struct SplatGradients {
    std::vector<double> means2d;     // N x 2
    std::vector<double> cov2d;       // N x 3, w.r.t. (xx, xy, yy)
    std::vector<double> colors;      // N x 3
    std::vector<double> opacities;   // N
    std::vector<double> mask_values; // N
};

/// Gradients of sum(grad_rgb * rgb) + sum(grad_mask * mask) with respect to the
/// per-Gaussian inputs. Depth (sort order) is treated as piecewise constant.
SplatGradients rasterize_backward(const SplatInputs &inputs, const RenderOutput &output,
                                  std::span<const double> grad_rgb, std::span<const double> grad_mask);

} // namespace splattrack::raster
