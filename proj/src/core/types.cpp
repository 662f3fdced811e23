// Copyright Contributors to the splattrack project
// SPDX-License-Identifier: Apache-2.0
//
#include "splattrack/core/types.hpp"

#include "splattrack/core/error.hpp"

#include <Eigen/Geometry>

#include <algorithm>
#include <string>

namespace splattrack {

namespace {

bool
all_finite(const std::vector<double> &v) {
    return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

template <std::size_t Stride>
void
copy_rows(const std::vector<double> &src, std::vector<double> &dst, std::span<const std::size_t> keep) {
    dst.resize(keep.size() * Stride);
    for (std::size_t k = 0; k < keep.size(); ++k) {
        std::copy_n(src.begin() + static_cast<std::ptrdiff_t>(keep[k] * Stride), Stride,
                    dst.begin() + static_cast<std::ptrdiff_t>(k * Stride));
    }
}

} // namespace

GaussianSet
GaussianSet::with_size(std::size_t count) {
    GaussianSet set;
    set.positions.assign(3 * count, 0.0);
    set.rot_quats.assign(4 * count, 0.0);
    for (std::size_t i = 0; i < count; ++i) {
        set.rot_quats[4 * i] = 1.0;
    }
    set.log_scales.assign(3 * count, 0.0);
    set.opacity_logits.assign(count, 0.0);
    set.colors.assign(3 * count, 0.0);
    set.mask_logits.assign(count, 0.0);
    return set;
}

void
GaussianSet::set_position(std::size_t i, const Vec3 &p) {
    positions[3 * i] = p.x();
    positions[3 * i + 1] = p.y();
    positions[3 * i + 2] = p.z();
}

void
GaussianSet::set_rotation(std::size_t i, const Vec4 &q) {
    for (int k = 0; k < 4; ++k) {
        rot_quats[4 * i + k] = q[k];
    }
}

void
GaussianSet::validate() const {
    const std::size_t n = size();
    if (positions.size() != 3 * n || rot_quats.size() != 4 * n || log_scales.size() != 3 * n ||
        colors.size() != 3 * n || mask_logits.size() != n) {
        fail(Errc::shape_mismatch, "GaussianSet buffers disagree on count " + std::to_string(n));
    }
    if (!all_finite(positions) || !all_finite(rot_quats) || !all_finite(log_scales) ||
        !all_finite(opacity_logits) || !all_finite(colors) || !all_finite(mask_logits)) {
        fail(Errc::invalid_parameter, "GaussianSet contains non-finite values");
    }
}

GaussianSet
GaussianSet::select(std::span<const std::size_t> keep) const {
    GaussianSet out;
    copy_rows<3>(positions, out.positions, keep);
    copy_rows<4>(rot_quats, out.rot_quats, keep);
    copy_rows<3>(log_scales, out.log_scales, keep);
    copy_rows<1>(opacity_logits, out.opacity_logits, keep);
    copy_rows<3>(colors, out.colors, keep);
    copy_rows<1>(mask_logits, out.mask_logits, keep);
    return out;
}

void
Camera::validate() const {
    if (width < 1 || height < 1) {
        fail(Errc::invalid_parameter, "camera image size must be at least 1x1");
    }
    if (!std::isfinite(fx) || !std::isfinite(fy) || !std::isfinite(cx) || !std::isfinite(cy) ||
        !world_to_cam.allFinite()) {
        fail(Errc::invalid_parameter, "camera has non-finite parameters");
    }
    const Mat3 r = rotation();
    const double orth = (r.transpose() * r - Mat3::Identity()).cwiseAbs().maxCoeff();
    if (orth > 1e-6 || std::abs(r.determinant() - 1.0) > 1e-6) {
        fail(Errc::invalid_parameter, "camera rotation is not a proper rotation");
    }
}

Camera
Camera::look_at(const Vec3 &eye, const Vec3 &target, const Vec3 &up, double fx, double fy, double cx,
                double cy, int width, int height) {
    const Vec3 forward = (target - eye).normalized();
    Vec3 right = forward.cross(up);
    if (right.norm() < 1e-12) {
        fail(Errc::invalid_parameter, "look_at: up vector is parallel to the view direction");
    }
    right.normalize();
    const Vec3 down = forward.cross(right);
    Mat3 r;
    r.row(0) = right.transpose();
    r.row(1) = down.transpose();
    r.row(2) = forward.transpose();
    Camera cam;
    cam.fx = fx;
    cam.fy = fy;
    cam.cx = cx;
    cam.cy = cy;
    cam.width = width;
    cam.height = height;
    cam.world_to_cam.leftCols<3>() = r;
    cam.world_to_cam.col(3) = -r * eye;
    return cam;
}

TrajectorySet
TrajectorySet::with_size(std::size_t points, std::size_t steps) {
    TrajectorySet t;
    t.num_points = points;
    t.num_steps = steps;
    t.positions.assign(points * steps * 3, 0.0);
    t.times.assign(steps, 0.0);
    return t;
}

void
TrajectorySet::validate() const {
    if (positions.size() != num_points * num_steps * 3 || times.size() != num_steps) {
        fail(Errc::shape_mismatch, "trajectory buffers do not match P x T");
    }
    for (std::size_t i = 1; i < times.size(); ++i) {
        if (!(times[i] > times[i - 1])) {
            fail(Errc::invariant_violation, "trajectory times must be strictly increasing");
        }
    }
    if (!all_finite(positions) || !all_finite(times)) {
        fail(Errc::invariant_violation, "trajectory contains non-finite values");
    }
}

GaussianSet
normalize_rotations(GaussianSet set) {
    for (std::size_t i = 0; i < set.size(); ++i) {
        Vec4 q = set.rotation(i);
        const double n = q.norm();
        if (!(n >= 1e-12)) {
            fail(Errc::degenerate_rotation, "quaternion " + std::to_string(i) + " has near-zero norm");
        }
        set.set_rotation(i, q / n);
    }
    return set;
}

} // namespace splattrack
