// Copyright Contributors to the splattrack project
// SPDX-License-Identifier: Apache-2.0
//
#pragma once

#include "splattrack/core/types.hpp"

#include <optional>

namespace splattrack {

/// Gaussians whose camera-frame depth is at or below this are culled.
inline constexpr double kNearPlane = 0.01;

/// Rotation matrix of a unit (w, x, y, z) quaternion.
Mat3 rotation_from_quat(const Vec4 &q);

/// Gradient of a scalar through rotation_from_quat, treating the four
/// components as independent (no renormalization).
Vec4 rotation_from_quat_backward(const Vec4 &q, const Mat3 &d_rot);

/// q / |q| and its vector-Jacobian product.
Vec4 normalize_quat(const Vec4 &q);
Vec4 normalize_quat_backward(const Vec4 &q, const Vec4 &d_unit);

/// Sigma = R S S^T R^T with S = diag(exp(log_scale)).
/// Throws invalid-parameter on non-finite input or a quaternion that is not
/// unit-norm within 1e-6.
Mat3 covariance_from_rs(const Vec4 &rot_quat, const Vec3 &log_scale);

struct CovarianceGrad {
    Vec4 d_quat = Vec4::Zero();
    Vec3 d_log_scale = Vec3::Zero();
};

/// `d_sigma` is the gradient with respect to the full 3x3 matrix.
CovarianceGrad covariance_from_rs_backward(const Vec4 &rot_quat, const Vec3 &log_scale, const Mat3 &d_sigma);

struct Projection {
    Vec2 mean2d = Vec2::Zero();
    Mat2 cov2d = Mat2::Zero();
    double depth = 0.0;
};

/// EWA splatting: cov2d = J W Sigma W^T J^T with J the perspective Jacobian
/// at the Gaussian mean. Returns nullopt when depth <= kNearPlane.
std::optional<Projection> project_gaussian(const Vec3 &mu, const Mat3 &sigma, const Camera &cam);

struct ProjectionGrad {
    Vec3 d_mu = Vec3::Zero();
    Mat3 d_sigma = Mat3::Zero();
};

/// Vector-Jacobian product of project_gaussian for a non-culled Gaussian.
/// `d_cov2d` is taken as the gradient with respect to the full 2x2 matrix.
ProjectionGrad project_gaussian_backward(const Vec3 &mu, const Mat3 &sigma, const Camera &cam,
                                         const Vec2 &d_mean2d, const Mat2 &d_cov2d);

} // namespace splattrack
