// Copyright Contributors to the splattrack project
// SPDX-License-Identifier: Apache-2.0
//
#include "splattrack/train/losses.hpp"

#include "splattrack/core/error.hpp"
#include "splattrack/core/types.hpp"

#include <cmath>

namespace splattrack::train {

namespace {

double
sign(double v) {
    return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0);
}

double
mean_abs(std::span<const double> a, std::span<const double> b, std::span<double> grad, double weight,
         const char *name) {
    if (a.size() != b.size() || (!grad.empty() && grad.size() != a.size())) {
        fail(Errc::shape_mismatch, std::string(name) + ": inputs differ in size");
    }
    if (a.empty()) {
        return 0.0;
    }
    const double inv = 1.0 / static_cast<double>(a.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        sum += std::abs(d);
        if (!grad.empty()) {
            grad[i] = weight * inv * sign(d);
        }
    }
    return sum * inv;
}

Vec3
at(std::span<const double> p, std::size_t i) {
    return Vec3(p[3 * i], p[3 * i + 1], p[3 * i + 2]);
}

void
add(std::span<double> g, std::size_t i, const Vec3 &v) {
    g[3 * i] += v.x();
    g[3 * i + 1] += v.y();
    g[3 * i + 2] += v.z();
}

} // namespace

double
l1_loss(std::span<const double> rendered, std::span<const double> target, std::span<double> grad, double weight) {
    return mean_abs(rendered, target, grad, weight, "l1_loss");
}

double
mask_loss(std::span<const double> rendered, std::span<const double> target, std::span<double> grad, double weight) {
    return mean_abs(rendered, target, grad, weight, "mask_loss");
}

double
iso_loss(std::span<const double> positions_t0, std::span<const double> positions_t,
         std::span<const std::uint32_t> knn, double lambda_w, std::size_t k, std::span<double> grad_t0,
         std::span<double> grad_t, double weight) {
    if (positions_t0.size() != positions_t.size() || positions_t0.size() % 3 != 0) {
        fail(Errc::shape_mismatch, "iso_loss: position buffers differ in size");
    }
    const std::size_t n = positions_t0.size() / 3;
    if (k == 0 || k >= n) {
        fail(Errc::invalid_config, "iso_loss: k must satisfy 1 <= k < N (k = " + std::to_string(k) +
                                       ", N = " + std::to_string(n) + ")");
    }
    if (knn.size() != n * k) {
        fail(Errc::shape_mismatch, "iso_loss: neighbour table is not N x k");
    }
    if ((!grad_t0.empty() && grad_t0.size() != 3 * n) || (!grad_t.empty() && grad_t.size() != 3 * n)) {
        fail(Errc::shape_mismatch, "iso_loss: gradient buffers differ in size");
    }
    const double norm = 1.0 / (static_cast<double>(k) * static_cast<double>(n));
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const Vec3 pi0 = at(positions_t0, i);
        const Vec3 pit = at(positions_t, i);
        for (std::size_t m = 0; m < k; ++m) {
            const std::size_t j = knn[i * k + m];
            const Vec3 d0 = at(positions_t0, j) - pi0;
            const Vec3 dt = at(positions_t, j) - pit;
            const double l0 = d0.norm();
            const double lt = dt.norm();
            const double w = std::exp(-lambda_w * l0 * l0);
            sum += w * std::abs(l0 - lt);
            const double s = weight * norm * w * sign(l0 - lt);
            if (s == 0.0) {
                continue;
            }
            if (!grad_t0.empty() && l0 > 0.0) {
                const Vec3 g = s * d0 / l0;
                add(grad_t0, j, g);
                add(grad_t0, i, -g);
            }
            if (!grad_t.empty() && lt > 0.0) {
                const Vec3 g = -s * dt / lt;
                add(grad_t, j, g);
                add(grad_t, i, -g);
            }
        }
    }
    return sum * norm;
}

double
momentum_loss(std::span<const double> prev, std::span<const double> cur, std::span<const double> next,
              std::span<double> grad_prev, std::span<double> grad_cur, std::span<double> grad_next, double weight) {
    if (prev.size() != cur.size() || cur.size() != next.size() || cur.size() % 3 != 0) {
        fail(Errc::shape_mismatch, "momentum_loss: position buffers differ in size");
    }
    for (auto g : {grad_prev, grad_cur, grad_next}) {
        if (!g.empty() && g.size() != cur.size()) {
            fail(Errc::shape_mismatch, "momentum_loss: gradient buffers differ in size");
        }
    }
    const std::size_t n = cur.size() / 3;
    if (n == 0) {
        return 0.0;
    }
    const double inv = 1.0 / static_cast<double>(n);
    double sum = 0.0;
    for (std::size_t i = 0; i < cur.size(); ++i) {
        const double d = next[i] + prev[i] - 2.0 * cur[i];
        sum += std::abs(d);
        const double s = weight * inv * sign(d);
        if (!grad_prev.empty()) {
            grad_prev[i] += s;
        }
        if (!grad_cur.empty()) {
            grad_cur[i] -= 2.0 * s;
        }
        if (!grad_next.empty()) {
            grad_next[i] += s;
        }
    }
    return sum * inv;
}

} // namespace splattrack::train
