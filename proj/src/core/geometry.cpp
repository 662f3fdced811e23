// Copyright Contributors to the splattrack project
// SPDX-License-Identifier: Apache-2.0
//
#include "splattrack/core/geometry.hpp"

#include "splattrack/core/error.hpp"

#include <cmath>

namespace splattrack {

Mat3
rotation_from_quat(const Vec4 &q) {
    const double w = q[0], x = q[1], y = q[2], z = q[3];
    Mat3 r;
    r << 1.0 - 2.0 * (y * y + z * z), 2.0 * (x * y - w * z), 2.0 * (x * z + w * y),
        2.0 * (x * y + w * z), 1.0 - 2.0 * (x * x + z * z), 2.0 * (y * z - w * x),
        2.0 * (x * z - w * y), 2.0 * (y * z + w * x), 1.0 - 2.0 * (x * x + y * y);
    return r;
}

Vec4
rotation_from_quat_backward(const Vec4 &q, const Mat3 &g) {
    const double w = q[0], x = q[1], y = q[2], z = q[3];
    Vec4 d;
    d[0] = 2.0 * (-z * g(0, 1) + y * g(0, 2) + z * g(1, 0) - x * g(1, 2) - y * g(2, 0) + x * g(2, 1));
    d[1] = 2.0 * (y * g(0, 1) + z * g(0, 2) + y * g(1, 0) - 2.0 * x * g(1, 1) - w * g(1, 2) + z * g(2, 0) +
                  w * g(2, 1) - 2.0 * x * g(2, 2));
    d[2] = 2.0 * (-2.0 * y * g(0, 0) + x * g(0, 1) + w * g(0, 2) + x * g(1, 0) + z * g(1, 2) - w * g(2, 0) +
                  z * g(2, 1) - 2.0 * y * g(2, 2));
    d[3] = 2.0 * (-2.0 * z * g(0, 0) - w * g(0, 1) + x * g(0, 2) + w * g(1, 0) - 2.0 * z * g(1, 1) +
                  y * g(1, 2) + x * g(2, 0) + y * g(2, 1));
    return d;
}

Vec4
normalize_quat(const Vec4 &q) {
    return q / q.norm();
}

Vec4
normalize_quat_backward(const Vec4 &q, const Vec4 &d_unit) {
    const double n = q.norm();
    const Vec4 u = q / n;
    return (d_unit - u * u.dot(d_unit)) / n;
}

Mat3
covariance_from_rs(const Vec4 &rot_quat, const Vec3 &log_scale) {
    if (!rot_quat.allFinite() || !log_scale.allFinite()) {
        fail(Errc::invalid_parameter, "covariance_from_rs: non-finite input");
    }
    if (std::abs(rot_quat.norm() - 1.0) > 1e-6) {
        fail(Errc::invalid_parameter, "covariance_from_rs: quaternion is not unit-norm");
    }
    const Mat3 r = rotation_from_quat(rot_quat);
    const Vec3 s = log_scale.array().exp();
    const Mat3 m = r * s.asDiagonal();
    const Mat3 c = m * m.transpose();
    return 0.5 * (c + c.transpose());
}

CovarianceGrad
covariance_from_rs_backward(const Vec4 &rot_quat, const Vec3 &log_scale, const Mat3 &d_sigma) {
    const Mat3 r = rotation_from_quat(rot_quat);
    const Vec3 s = log_scale.array().exp();
    const Mat3 m = r * s.asDiagonal();
    const Mat3 d_m = (d_sigma + d_sigma.transpose()) * m;
    const Mat3 d_r = d_m * s.asDiagonal();
    CovarianceGrad out;
    for (int j = 0; j < 3; ++j) {
        out.d_log_scale[j] = r.col(j).dot(d_m.col(j)) * s[j];
    }
    out.d_quat = rotation_from_quat_backward(rot_quat, d_r);
    return out;
}

namespace {

struct ProjectionTerms {
    Vec3 t;
    Eigen::Matrix<double, 2, 3> jac;
};

ProjectionTerms
projection_terms(const Vec3 &mu, const Camera &cam) {
    ProjectionTerms pt;
    pt.t = cam.rotation() * mu + cam.translation();
    const double iz = 1.0 / pt.t.z();
    pt.jac << cam.fx * iz, 0.0, -cam.fx * pt.t.x() * iz * iz, 0.0, cam.fy * iz, -cam.fy * pt.t.y() * iz * iz;
    return pt;
}

} // namespace

std::optional<Projection>
project_gaussian(const Vec3 &mu, const Mat3 &sigma, const Camera &cam) {
    if (!mu.allFinite() || !sigma.allFinite()) {
        fail(Errc::invalid_parameter, "project_gaussian: non-finite input");
    }
    const ProjectionTerms pt = projection_terms(mu, cam);
    if (pt.t.z() <= kNearPlane) {
        return std::nullopt;
    }
    const Eigen::Matrix<double, 2, 3> jw = pt.jac * cam.rotation();
    const Mat2 c = jw * sigma * jw.transpose();
    Projection p;
    p.depth = pt.t.z();
    p.mean2d = Vec2(cam.fx * pt.t.x() / pt.t.z() + cam.cx, cam.fy * pt.t.y() / pt.t.z() + cam.cy);
    p.cov2d = 0.5 * (c + c.transpose());
    return p;
}

ProjectionGrad
project_gaussian_backward(const Vec3 &mu, const Mat3 &sigma, const Camera &cam, const Vec2 &d_mean2d,
                          const Mat2 &d_cov2d) {
    const ProjectionTerms pt = projection_terms(mu, cam);
    const Mat3 w = cam.rotation();
    const Eigen::Matrix<double, 2, 3> jw = pt.jac * w;
    const Mat2 g = 0.5 * (d_cov2d + d_cov2d.transpose());

    ProjectionGrad out;
    out.d_sigma = jw.transpose() * g * jw;
    const Eigen::Matrix<double, 2, 3> d_jw = 2.0 * g * jw * sigma;
    const Eigen::Matrix<double, 2, 3> d_j = d_jw * w.transpose();

    const double tx = pt.t.x(), ty = pt.t.y(), tz = pt.t.z();
    const double iz = 1.0 / tz, iz2 = iz * iz, iz3 = iz2 * iz;
    const double fx = cam.fx, fy = cam.fy;
    Vec3 d_t;
    d_t.x() = d_mean2d.x() * fx * iz - d_j(0, 2) * fx * iz2;
    d_t.y() = d_mean2d.y() * fy * iz - d_j(1, 2) * fy * iz2;
    d_t.z() = -d_mean2d.x() * fx * tx * iz2 - d_mean2d.y() * fy * ty * iz2 - d_j(0, 0) * fx * iz2 -
              d_j(1, 1) * fy * iz2 + 2.0 * d_j(0, 2) * fx * tx * iz3 + 2.0 * d_j(1, 2) * fy * ty * iz3;
    out.d_mu = w.transpose() * d_t;
    return out;
}

} // namespace splattrack
