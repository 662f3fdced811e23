// Copyright Contributors to the splattrack project
// SPDX-License-Identifier: Apache-2.0
//
#pragma once

#include "splattrack/field/deformation_field.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace splattrack::field {

/// World-space state of every Gaussian at one time.
struct DeformedState {
    std::vector<double> positions; // N x 3
    std::vector<double> rot_quats; // N x 4, unit
    std::vector<double> shadows;   // N, in [0,1]

    std::size_t size() const noexcept { return shadows.size(); }
    Vec3 position(std::size_t i) const { return Vec3(positions[3 * i], positions[3 * i + 1], positions[3 * i + 2]); }
    Vec4 rotation(std::size_t i) const {
        return Vec4(rot_quats[4 * i], rot_quats[4 * i + 1], rot_quats[4 * i + 2], rot_quats[4 * i + 3]);
    }
};

/// Activations recorded by a forward pass for the deformed (dynamic)
/// Gaussians, in ascending index order.
struct FieldTape {
    bool recorded = false;
    double t = 0.0;
    std::size_t total = 0;              // size of the full Gaussian set
    std::vector<std::uint32_t> indices; // deformed Gaussians
    std::vector<double> query;          // n x 4 normalized coordinates
    std::vector<std::uint8_t> clamped;  // n x 4
    std::vector<double> plane_values;   // n x levels x 6 x h
    std::vector<double> features;       // n x encoding
    std::vector<std::vector<double>> pre;  // per trunk layer, n x width
    std::vector<std::vector<double>> post; // per trunk layer, n x width
    std::vector<double> heads;          // n x 8 raw head outputs
    std::vector<double> quat_sum;       // n x 4, canonical + offset before normalization
    std::vector<double> canonical_quats; // total x 4, for the static pass-through

    std::size_t size() const noexcept { return indices.size(); }
};

/// Deforms the Gaussians with dynamic[i] != 0 to time t in [0,1]; the rest keep
/// their canonical position and (normalized) rotation with shadow 1. An empty
/// `dynamic` span deforms every Gaussian. When `tape` is given, the forward
/// activations are recorded for field_backward.
DeformedState deform(const GaussianSet &set, std::span<const std::uint8_t> dynamic, double t,
                     const DeformationField &field, FieldTape *tape = nullptr);

/// Deforms every Gaussian.
DeformedState deform(const GaussianSet &set, double t, const DeformationField &field);

/// Upstream gradients with respect to a DeformedState.
struct DeformedGrad {
    std::vector<double> positions; // N x 3
    std::vector<double> rot_quats; // N x 4
    std::vector<double> shadows;   // N

    static DeformedGrad zeros(std::size_t n);
};

/// Reverse pass of the recorded deform call. Gradients are accumulated into
/// `field_grads` and into `d_positions` / `d_quats` (canonical, N x 3 and
/// N x 4); static Gaussians pass their gradients straight through (positions
/// as identity, quaternions through the normalization).
void field_backward(const DeformationField &field, const FieldTape &tape, const DeformedGrad &grads,
                    FieldGradients &field_grads, std::span<double> d_positions, std::span<double> d_quats);

} // namespace splattrack::field
