// Copyright Contributors to the splattrack project
// SPDX-License-Identifier: Apache-2.0
//
#pragma once

#include <Eigen/Core>

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace splattrack {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Vec4 = Eigen::Vector4d;
using Mat2 = Eigen::Matrix2d;
using Mat3 = Eigen::Matrix3d;
using Mat34 = Eigen::Matrix<double, 3, 4>;
using Mat4 = Eigen::Matrix4d;

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

/// Canonical parameters of a set of 3D Gaussians, stored as flat
/// structure-of-arrays buffers so that optimizers and serializers can treat
/// each group as one contiguous span.
///
/// Quaternions are scalar-first (w, x, y, z) and rotate column vectors
/// actively. Scales are stored as logarithms, opacity and mask as logits.
struct GaussianSet {
    std::vector<double> positions;      // count x 3, meters
    std::vector<double> rot_quats;      // count x 4
    std::vector<double> log_scales;     // count x 3
    std::vector<double> opacity_logits; // count
    std::vector<double> colors;         // count x 3, RGB in [0,1]
    std::vector<double> mask_logits;    // count

    static GaussianSet with_size(std::size_t count);

    std::size_t size() const noexcept { return opacity_logits.size(); }
    bool empty() const noexcept { return opacity_logits.empty(); }

    Vec3 position(std::size_t i) const { return Vec3(positions[3 * i], positions[3 * i + 1], positions[3 * i + 2]); }
    Vec4 rotation(std::size_t i) const {
        return Vec4(rot_quats[4 * i], rot_quats[4 * i + 1], rot_quats[4 * i + 2], rot_quats[4 * i + 3]);
    }
    Vec3 log_scale(std::size_t i) const { return Vec3(log_scales[3 * i], log_scales[3 * i + 1], log_scales[3 * i + 2]); }
    Vec3 color(std::size_t i) const { return Vec3(colors[3 * i], colors[3 * i + 1], colors[3 * i + 2]); }
    double opacity(std::size_t i) const { return sigmoid(opacity_logits[i]); }
    double mask_value(std::size_t i) const { return sigmoid(mask_logits[i]); }

    void set_position(std::size_t i, const Vec3 &p);
    void set_rotation(std::size_t i, const Vec4 &q);

    /// Throws shape-mismatch if the buffers disagree on the count and
    /// invalid-parameter if any entry is non-finite.
    void validate() const;

    /// Returns the subset at the given (ascending) indices.
    GaussianSet select(std::span<const std::size_t> keep) const;
};

/// Pinhole camera. Pixel (u, v) has its center at coordinates (u, v); the
/// projection of camera-frame point (x, y, z) lands at
/// (fx * x / z + cx, fy * y / z + cy).
struct Camera {
    double fx = 1.0;
    double fy = 1.0;
    double cx = 0.0;
    double cy = 0.0;
    int width = 1;
    int height = 1;
    Mat34 world_to_cam = Mat34::Identity();

    Mat3 rotation() const { return world_to_cam.leftCols<3>(); }
    Vec3 translation() const { return world_to_cam.col(3); }
    Vec3 center() const { return -rotation().transpose() * translation(); }

    /// Orthonormal rotation with determinant +1 (1e-6), positive image size,
    /// finite entries.
    void validate() const;

    /// Camera at `eye` looking at `target`. The camera frame has +z forward,
    /// +x right and +y down in the image.
    static Camera look_at(const Vec3 &eye, const Vec3 &target, const Vec3 &up, double fx, double fy,
                          double cx, double cy, int width, int height);
};

/// P points tracked over T timestamps; positions are point-major then time.
struct TrajectorySet {
    std::size_t num_points = 0;
    std::size_t num_steps = 0;
    std::vector<double> positions; // P x T x 3
    std::vector<double> times;     // T, normalized to [0,1]

    static TrajectorySet with_size(std::size_t points, std::size_t steps);

    Vec3 at(std::size_t point, std::size_t step) const {
        const std::size_t o = 3 * (point * num_steps + step);
        return Vec3(positions[o], positions[o + 1], positions[o + 2]);
    }
    void set(std::size_t point, std::size_t step, const Vec3 &p) {
        const std::size_t o = 3 * (point * num_steps + step);
        positions[o] = p.x();
        positions[o + 1] = p.y();
        positions[o + 2] = p.z();
    }

    /// Strictly increasing times and finite positions.
    void validate() const;
};

/// Unit quaternions for every Gaussian. Throws degenerate-rotation when a
/// quaternion has norm below 1e-12.
GaussianSet normalize_rotations(GaussianSet set);

} // namespace splattrack
