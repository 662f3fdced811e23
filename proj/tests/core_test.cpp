// Copyright Contributors to the splattrack project
// SPDX-License-Identifier: Apache-2.0
//
#include "support.hpp"

#include "splattrack/core/error.hpp"
#include "splattrack/core/geometry.hpp"
#include "splattrack/core/parallel.hpp"

#include <doctest.h>

#include <atomic>

using namespace splattrack;
using splattrack::testing::Rng;
using splattrack::testing::uniform;

namespace {

// Dense R S S^T R^T with the rotation from Eigen's quaternion and the products
// written out as loops.
Mat3
covariance_oracle(const Vec4 &q, const Vec3 &log_scale) {
    const Mat3 r = Eigen::Quaterniond(q[0], q[1], q[2], q[3]).toRotationMatrix();
    double s[3][3] = {};
    for (int i = 0; i < 3; ++i) {
        s[i][i] = std::exp(log_scale[i]);
    }
    double rs[3][3] = {};
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j)
            for (int k = 0; k < 3; ++k)
                rs[i][j] += r(i, k) * s[k][j];
    Mat3 out = Mat3::Zero();
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j)
            for (int k = 0; k < 3; ++k)
                out(i, j) += rs[i][k] * rs[j][k];
    return out;
}

// Forms J and W explicitly and multiplies J W Sigma W^T J^T.
Mat2
projection_oracle(const Vec3 &mu, const Mat3 &sigma, const Camera &cam, bool identity_w = false) {
    const Mat3 w = identity_w ? Mat3::Identity() : cam.rotation();
    const Vec3 t = cam.rotation() * mu + cam.translation();
    Eigen::Matrix<double, 2, 3> j;
    j << cam.fx / t.z(), 0.0, -cam.fx * t.x() / (t.z() * t.z()), 0.0, cam.fy / t.z(),
        -cam.fy * t.y() / (t.z() * t.z());
    const Eigen::Matrix<double, 2, 3> jw = j * w;
    return jw * sigma * jw.transpose();
}

Camera
random_camera(Rng &rng) {
    const Vec3 eye(uniform(rng, -3, 3), uniform(rng, -3, 3), uniform(rng, 1, 3));
    return Camera::look_at(eye, Vec3(uniform(rng, -0.2, 0.2), uniform(rng, -0.2, 0.2), 0.0), Vec3(0, 0, 1), 80, 90,
                           40, 45, 80, 90);
}

Mat3
random_psd(Rng &rng) {
    const Vec4 q = testing::random_unit_quat(rng);
    const Vec3 ls(uniform(rng, -4, -1), uniform(rng, -4, -1), uniform(rng, -4, -1));
    return covariance_from_rs(q, ls);
}

} // namespace

TEST_CASE("covariance of identity rotation and unit scale is the identity") {
    CHECK(covariance_from_rs(Vec4(1, 0, 0, 0), Vec3::Zero()).isApprox(Mat3::Identity(), 1e-15));
}

TEST_CASE("covariance with log scale ln 2 on x is diag(4,1,1)") {
    const Mat3 c = covariance_from_rs(Vec4(1, 0, 0, 0), Vec3(std::log(2.0), 0, 0));
    Mat3 expected = Mat3::Identity();
    expected(0, 0) = 4.0;
    CHECK((c - expected).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("covariance matches the dense product oracle") {
    Rng rng(11);
    for (int trial = 0; trial < 50; ++trial) {
        const Vec4 q = testing::random_unit_quat(rng);
        const Vec3 ls(0.1, -0.2, 0.3);
        const Mat3 c = covariance_from_rs(q, ls);
        CHECK((c - covariance_oracle(q, ls)).cwiseAbs().maxCoeff() < 1e-12);
        CHECK((c - c.transpose()).cwiseAbs().maxCoeff() == 0.0);
        CHECK((c - covariance_from_rs(-q, ls)).cwiseAbs().maxCoeff() < 1e-15);

        Eigen::SelfAdjointEigenSolver<Mat3> eig(c);
        std::array<double, 3> expected{std::exp(0.2), std::exp(-0.4), std::exp(0.6)};
        std::sort(expected.begin(), expected.end());
        for (int k = 0; k < 3; ++k) {
            CHECK(eig.eigenvalues()[k] == doctest::Approx(expected[k]).epsilon(1e-12));
        }
    }
}

TEST_CASE("covariance rejects bad input") {
    const double nan = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(covariance_from_rs(Vec4(nan, 0, 0, 0), Vec3::Zero()), Error);
    CHECK_THROWS_AS(covariance_from_rs(Vec4(1, 0, 0, 0), Vec3(0, std::numeric_limits<double>::infinity(), 0)),
                    Error);
    try {
        covariance_from_rs(Vec4(2, 0, 0, 0), Vec3::Zero());
        FAIL("expected an error");
    } catch (const Error &e) {
        CHECK(e.code() == Errc::invalid_parameter);
    }
}

TEST_CASE("covariance backward matches finite differences") {
    Rng rng(5);
    for (int trial = 0; trial < 20; ++trial) {
        const Vec4 q = testing::random_unit_quat(rng);
        const Vec3 ls(uniform(rng, -1, 1), uniform(rng, -1, 1), uniform(rng, -1, 1));
        Mat3 g;
        for (int i = 0; i < 9; ++i) {
            g(i / 3, i % 3) = uniform(rng, -1, 1);
        }
        // The quaternion is not renormalized by the backward pass, so the
        // objective uses the raw rotation formula.
        auto objective = [&](const Vec4 &qq, const Vec3 &ll) {
            const Mat3 r = rotation_from_quat(qq);
            const Mat3 m = r * ll.array().exp().matrix().asDiagonal();
            return (g.array() * (m * m.transpose()).array()).sum();
        };
        const CovarianceGrad grad = covariance_from_rs_backward(q, ls, g);
        const double h = 1e-6;
        for (int k = 0; k < 4; ++k) {
            Vec4 qp = q, qm = q;
            qp[k] += h;
            qm[k] -= h;
            CHECK(testing::grad_close(grad.d_quat[k], (objective(qp, ls) - objective(qm, ls)) / (2 * h)));
        }
        for (int k = 0; k < 3; ++k) {
            Vec3 lp = ls, lm = ls;
            lp[k] += h;
            lm[k] -= h;
            CHECK(testing::grad_close(grad.d_log_scale[k], (objective(q, lp) - objective(q, lm)) / (2 * h)));
        }
    }
}

TEST_CASE("normalize quaternion backward matches finite differences") {
    Rng rng(6);
    const Vec4 q(0.3, -1.2, 0.7, 2.0);
    const Vec4 d(0.5, -0.1, 0.8, 0.3);
    const Vec4 grad = normalize_quat_backward(q, d);
    for (int k = 0; k < 4; ++k) {
        Vec4 p = q, m = q;
        p[k] += 1e-6;
        m[k] -= 1e-6;
        CHECK(testing::grad_close(grad[k], (normalize_quat(p).dot(d) - normalize_quat(m).dot(d)) / 2e-6));
    }
}

TEST_CASE("projection culls points behind the near plane") {
    Camera cam;
    cam.fx = cam.fy = 100;
    cam.width = cam.height = 64;
    CHECK_FALSE(project_gaussian(Vec3(0, 0, -1), Mat3::Identity(), cam).has_value());
    CHECK_FALSE(project_gaussian(Vec3(0, 0, kNearPlane), Mat3::Identity(), cam).has_value());
    CHECK(project_gaussian(Vec3(0, 0, 2 * kNearPlane), Mat3::Identity(), cam).has_value());
}

TEST_CASE("on-axis point projects to the principal point") {
    Camera cam;
    cam.fx = 120;
    cam.fy = 110;
    cam.cx = 31.5;
    cam.cy = 17.25;
    const auto p = project_gaussian(Vec3(0, 0, 3.0), 0.01 * Mat3::Identity(), cam);
    REQUIRE(p.has_value());
    CHECK(p->mean2d.x() == 31.5);
    CHECK(p->mean2d.y() == 17.25);
    CHECK(p->depth == 3.0);
}

TEST_CASE("isotropic on-axis Gaussian projects to (f s / z)^2 I") {
    Camera cam;
    cam.fx = cam.fy = 200;
    const double s = 0.05, z = 2.5;
    const auto p = project_gaussian(Vec3(0, 0, z), s * s * Mat3::Identity(), cam);
    REQUIRE(p.has_value());
    const double expected = (200 * s / z) * (200 * s / z);
    CHECK((p->cov2d - expected * Mat2::Identity()).cwiseAbs().maxCoeff() < 1e-9);
    CHECK((p->cov2d - projection_oracle(Vec3(0, 0, z), s * s * Mat3::Identity(), cam)).cwiseAbs().maxCoeff() <
          1e-9);
}

TEST_CASE("projection matches the explicit J W oracle and stays symmetric") {
    Rng rng(21);
    for (int trial = 0; trial < 1000; ++trial) {
        const Camera cam = random_camera(rng);
        const Mat3 sigma = random_psd(rng);
        const Vec3 mu(uniform(rng, -0.5, 0.5), uniform(rng, -0.5, 0.5), uniform(rng, -0.2, 0.2));
        const auto p = project_gaussian(mu, sigma, cam);
        REQUIRE(p.has_value());
        CHECK(p->cov2d(0, 1) == p->cov2d(1, 0));
        CHECK((p->cov2d - projection_oracle(mu, sigma, cam)).cwiseAbs().maxCoeff() <
              1e-9 * std::max(1.0, p->cov2d.norm()));
    }
}

TEST_CASE("identity extrinsics make W the identity") {
    Rng rng(3);
    Camera cam;
    cam.fx = 90;
    cam.fy = 80;
    cam.cx = 10;
    cam.cy = 12;
    for (int trial = 0; trial < 20; ++trial) {
        const Mat3 sigma = random_psd(rng);
        const Vec3 mu(uniform(rng, -1, 1), uniform(rng, -1, 1), uniform(rng, 1, 4));
        const auto p = project_gaussian(mu, sigma, cam);
        REQUIRE(p.has_value());
        CHECK((p->cov2d - projection_oracle(mu, sigma, cam, true)).cwiseAbs().maxCoeff() < 1e-9);
    }
}

TEST_CASE("projection backward matches finite differences") {
    Rng rng(8);
    for (int trial = 0; trial < 20; ++trial) {
        const Camera cam = random_camera(rng);
        const Mat3 sigma = random_psd(rng);
        const Vec3 mu(uniform(rng, -0.5, 0.5), uniform(rng, -0.5, 0.5), uniform(rng, -0.2, 0.2));
        const Vec2 dm(uniform(rng, -1, 1), uniform(rng, -1, 1));
        Mat2 dc;
        dc << uniform(rng, -1, 1), uniform(rng, -1, 1), uniform(rng, -1, 1), uniform(rng, -1, 1);
        auto objective = [&](const Vec3 &m, const Mat3 &s) {
            const auto p = project_gaussian(m, s, cam);
            return p->mean2d.dot(dm) + (p->cov2d.array() * dc.array()).sum();
        };
        const ProjectionGrad g = project_gaussian_backward(mu, sigma, cam, dm, dc);
        const double h = 1e-6;
        for (int k = 0; k < 3; ++k) {
            Vec3 p = mu, m = mu;
            p[k] += h;
            m[k] -= h;
            CHECK(testing::grad_close(g.d_mu[k], (objective(p, sigma) - objective(m, sigma)) / (2 * h), 1e-5, 1e-7));
        }
        for (int i = 0; i < 3; ++i) {
            for (int j = 0; j < 3; ++j) {
                Mat3 p = sigma, m = sigma;
                p(i, j) += h;
                m(i, j) -= h;
                CHECK(testing::grad_close(g.d_sigma(i, j), (objective(mu, p) - objective(mu, m)) / (2 * h), 1e-5,
                                          1e-7));
            }
        }
    }
}

TEST_CASE("normalize_rotations") {
    GaussianSet set = GaussianSet::with_size(3);
    set.set_rotation(0, Vec4(2, 0, 0, 0));
    set.set_rotation(1, Vec4(1, 1, 1, 1));
    const Vec4 unit = Vec4(0.1, -0.7, 0.3, 0.2).normalized();
    set.set_rotation(2, unit);
    const GaussianSet out = normalize_rotations(set);
    CHECK(out.rotation(0) == Vec4(1, 0, 0, 0));
    CHECK((out.rotation(1) - Vec4(0.5, 0.5, 0.5, 0.5)).cwiseAbs().maxCoeff() == 0.0);
    CHECK((out.rotation(2) - unit).cwiseAbs().maxCoeff() < 1e-15);
    for (std::size_t i = 0; i < 3; ++i) {
        CHECK(std::abs(out.rotation(i).norm() - 1.0) < 1e-9);
    }

    set.set_rotation(1, Vec4(1e-13, 0, 0, 0));
    try {
        normalize_rotations(set);
        FAIL("expected an error");
    } catch (const Error &e) {
        CHECK(e.code() == Errc::degenerate_rotation);
    }
}

TEST_CASE("gaussian set validation and selection") {
    GaussianSet set = GaussianSet::with_size(4);
    for (std::size_t i = 0; i < 4; ++i) {
        set.set_position(i, Vec3(i, 2.0 * i, 3.0 * i));
        set.opacity_logits[i] = static_cast<double>(i);
    }
    CHECK_NOTHROW(set.validate());
    const std::vector<std::size_t> keep{1, 3};
    const GaussianSet sub = set.select(keep);
    REQUIRE(sub.size() == 2);
    CHECK(sub.position(1) == Vec3(3, 6, 9));
    CHECK(sub.opacity_logits[0] == 1.0);
    CHECK(set.opacity(0) > 0.0);
    CHECK(set.opacity(0) < 1.0);

    set.colors.pop_back();
    try {
        set.validate();
        FAIL("expected an error");
    } catch (const Error &e) {
        CHECK(e.code() == Errc::shape_mismatch);
    }
}

TEST_CASE("camera validation") {
    Camera cam = Camera::look_at(Vec3(2, 1, 1), Vec3::Zero(), Vec3(0, 0, 1), 50, 50, 32, 32, 64, 64);
    CHECK_NOTHROW(cam.validate());
    CHECK((cam.center() - Vec3(2, 1, 1)).norm() < 1e-12);
    const auto p = project_gaussian(Vec3::Zero(), 1e-4 * Mat3::Identity(), cam);
    REQUIRE(p.has_value());
    CHECK(p->mean2d.x() == doctest::Approx(32.0));
    CHECK(p->mean2d.y() == doctest::Approx(32.0));
    // World up projects toward the top of the image.
    const auto up = project_gaussian(Vec3(0, 0, 0.1), 1e-4 * Mat3::Identity(), cam);
    CHECK(up->mean2d.y() < 32.0);

    Camera bad = cam;
    bad.world_to_cam(0, 0) *= -1.0;
    CHECK_THROWS_AS(bad.validate(), Error);
    bad = cam;
    bad.width = 0;
    CHECK_THROWS_AS(bad.validate(), Error);
}

TEST_CASE("trajectory validation") {
    TrajectorySet t = TrajectorySet::with_size(2, 3);
    t.times = {0.0, 0.5, 1.0};
    CHECK_NOTHROW(t.validate());
    t.times = {0.0, 0.5, 0.5};
    try {
        t.validate();
        FAIL("expected an error");
    } catch (const Error &e) {
        CHECK(e.code() == Errc::invariant_violation);
    }
}

TEST_CASE("parallel_for_chunks visits every chunk once and propagates errors") {
    for (std::size_t threads : {1u, 3u}) {
        set_num_threads(threads);
        std::vector<int> hits(103, 0);
        parallel_for_chunks(103, 10, [&](std::size_t chunk, std::size_t b, std::size_t e) {
            CHECK(b == chunk * 10);
            for (std::size_t i = b; i < e; ++i) {
                hits[i] += 1;
            }
        });
        CHECK(std::all_of(hits.begin(), hits.end(), [](int h) { return h == 1; }));
        CHECK_THROWS_AS(parallel_for_chunks(10, 1,
                                            [](std::size_t c, std::size_t, std::size_t) {
                                                if (c == 7) {
                                                    fail(Errc::io_error, "boom");
                                                }
                                            }),
                        Error);
    }
    set_num_threads(0);
}
