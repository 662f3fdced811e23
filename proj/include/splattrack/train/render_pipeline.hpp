// Copyright Contributors to the splattrack project
// SPDX-License-Identifier: Apache-2.0
//
#pragma once

#include "splattrack/core/types.hpp"
#include "splattrack/field/deform.hpp"
#include "splattrack/raster/rasterizer.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace splattrack::train {

/// Gradients of a rendered image with respect to the per-Gaussian state that
/// produced it: world positions, unit quaternions and shadows from the
/// deformed state, the rest from the canonical set.
struct SceneGradients {
    std::vector<double> positions;      // N x 3
    std::vector<double> rot_quats;      // N x 4
    std::vector<double> log_scales;     // N x 3
    std::vector<double> opacity_logits; // N
    std::vector<double> colors;         // N x 3
    std::vector<double> mask_logits;    // N
    std::vector<double> shadows;        // N

    static SceneGradients zeros(std::size_t n);
};

struct RenderPass {
    raster::SplatInputs inputs;
    raster::RenderOutput output;
    std::vector<std::uint32_t> ids; // Gaussian index of every splat (culled ones are absent)
};

/// Projects the Gaussians at `state` into `cam` (colors scaled by the shadow)
/// and rasterizes them.
RenderPass render_state(const GaussianSet &set, const field::DeformedState &state, const Camera &cam,
                        const Vec3 &background);

/// Accumulates into `out` the gradients of
/// sum(grad_rgb * rgb) + sum(grad_mask * mask) for a pass from render_state.
void render_backward(const GaussianSet &set, const field::DeformedState &state, const Camera &cam,
                     const RenderPass &pass, std::span<const double> grad_rgb, std::span<const double> grad_mask,
                     SceneGradients &out);

/// Canonical state (positions, normalized rotations, shadow 1) without the field.
field::DeformedState canonical_state(const GaussianSet &set);

} // namespace splattrack::train
