// Copyright Contributors to the splattrack project
// SPDX-License-Identifier: Apache-2.0
//
#pragma once

#include "splattrack/core/types.hpp"

#include <array>
#include <cstdint>
#include <span>
#include <vector>

namespace splattrack::field {

/// Axis pairs of the six feature planes, in storage order. Axis 3 is time.
inline constexpr std::array<std::array<int, 2>, 6> kPlaneAxes{{{0, 1}, {0, 2}, {1, 2}, {0, 3}, {1, 3}, {2, 3}}};
inline constexpr int kHeadOutputs = 8; // position 3, rotation 4, shadow logit 1

struct FieldConfig {
    /// Grid resolution of every plane at level 1, rows then columns.
    std::array<int, 2> base_resolution{64, 64};
    std::vector<int> levels{1, 2, 4, 8};
    int feature_size = 32;
    int hidden_width = 128;
    int hidden_layers = 2;
    /// Initial bias of the shadow head; large and positive so that training
    /// starts with shadow close to 1.
    double shadow_bias_init = 5.0;

    /// Throws invalid-config.
    void validate() const;
    int encoding_size() const { return feature_size * static_cast<int>(levels.size()); }
};

struct Aabb {
    Vec3 lo = Vec3::Zero();
    Vec3 hi = Vec3::Ones();

    /// Bounding box of an N x 3 buffer grown by `margin` times its extent on
    /// every side.
    static Aabb around(std::span<const double> xyz, double margin = 0.1);

    Vec3 extent() const { return hi - lo; }
    double diagonal() const { return extent().norm(); }
};

struct DenseLayer {
    int in = 0;
    int out = 0;
    std::vector<double> w; // out x in, row-major
    std::vector<double> b; // out
};

/// One feature plane: rows x cols grid nodes with `features` values each,
/// stored row-major with the feature index innermost.
struct Plane {
    int rows = 0;
    int cols = 0;
    std::vector<double> values;

    std::size_t nodes() const { return static_cast<std::size_t>(rows) * cols; }
};

/// Six multi-resolution feature planes over (x,y,z,t) followed by an MLP with
/// a shared trunk and a linear head producing the position offset, rotation
/// offset and shadow logit.
class DeformationField {
public:
    DeformationField() = default;

    /// Planes set to 1, trunk weights uniform in +-1/sqrt(fan_in), head weights
    /// zero, biases zero except the shadow bias.
    static DeformationField create(const FieldConfig &config, const Aabb &bbox, std::uint64_t seed);

    const FieldConfig &config() const { return mConfig; }
    const Aabb &bbox() const { return mBbox; }

    std::size_t plane_count() const { return mPlanes.size(); }
    /// Plane for level index `level` (into config().levels) and axis pair `pair`.
    Plane &plane(std::size_t level, std::size_t pair) { return mPlanes[level * 6 + pair]; }
    const Plane &plane(std::size_t level, std::size_t pair) const { return mPlanes[level * 6 + pair]; }
    std::vector<Plane> &planes() { return mPlanes; }
    const std::vector<Plane> &planes() const { return mPlanes; }

    /// Trunk layers followed by the head layer.
    std::vector<DenseLayer> &layers() { return mLayers; }
    const std::vector<DenseLayer> &layers() const { return mLayers; }

    /// Query coordinates in [0,1]^4: position normalized by the bbox and
    /// clamped, time clamped. `clamped[k]` reports whether axis k was clamped.
    Vec4 normalize_query(const Vec3 &xyz, double t, std::array<bool, 4> *clamped = nullptr) const;

    /// Feature vector of length encoding_size() at (xyz, t).
    void encode(const Vec3 &xyz, double t, std::span<double> out) const;

    std::size_t parameter_count() const;
    bool all_finite() const;

    /// Throws shape-mismatch when planes or layers disagree with the config.
    void validate() const;

    /// Builds an empty field with the right shapes for deserialization.
    static DeformationField with_shapes(const FieldConfig &config, const Aabb &bbox);

private:
    FieldConfig mConfig;
    Aabb mBbox;
    std::vector<Plane> mPlanes;
    std::vector<DenseLayer> mLayers;
};

/// Bilinear lookup position inside one plane axis of `n` nodes spanning [0,1].
struct AxisCell {
    int i0 = 0;
    double frac = 0.0;
};
AxisCell axis_cell(double u, int n);

/// Gradient buffers mirroring a field. Plane gradients are dense but only the
/// touched nodes are non-zero; they are listed so that clearing and sparse
/// optimizer updates cost O(touched).
struct FieldGradients {
    std::vector<std::vector<double>> planes;
    std::vector<std::vector<std::uint32_t>> touched; // node ids per plane, first-touch order
    std::vector<std::vector<std::uint8_t>> touched_flag;
    std::vector<DenseLayer> layers;

    static FieldGradients like(const DeformationField &field);

    void add_plane(std::size_t plane, std::uint32_t node, const double *g, int features);
    void clear();
};

} // namespace splattrack::field
