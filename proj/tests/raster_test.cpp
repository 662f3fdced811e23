// Copyright Contributors to the splattrack project
// SPDX-License-Identifier: Apache-2.0
//
#include "support.hpp"

#include "splattrack/core/error.hpp"
#include "splattrack/core/parallel.hpp"

#include <doctest.h>

#include <cstring>

using namespace splattrack;
using namespace splattrack::raster;
using splattrack::testing::Rng;

namespace {

SplatInputs
single(double opacity, const Vec3 &color, double x, double y, double depth = 1.0) {
    SplatInputs in;
    in.width = in.height = 4;
    in.resize(1);
    in.means2d = {x, y};
    in.cov2d = {1.0, 0.0, 1.0};
    in.depths = {depth};
    in.colors = {color.x(), color.y(), color.z()};
    in.opacities = {opacity};
    in.mask_values = {1.0};
    return in;
}

void
append(SplatInputs &dst, const SplatInputs &src) {
    auto cat = [](std::vector<double> &a, const std::vector<double> &b) { a.insert(a.end(), b.begin(), b.end()); };
    cat(dst.means2d, src.means2d);
    cat(dst.cov2d, src.cov2d);
    cat(dst.depths, src.depths);
    cat(dst.colors, src.colors);
    cat(dst.opacities, src.opacities);
    cat(dst.mask_values, src.mask_values);
}

} // namespace

TEST_CASE("single Gaussian over a pixel center") {
    const SplatInputs in = single(0.5, Vec3(1, 0, 0), 2, 1);
    const RenderOutput out = rasterize(in);
    const std::size_t p = 1 * 4 + 2;
    CHECK(out.rgb[3 * p] == 0.5);
    CHECK(out.rgb[3 * p + 1] == 0.0);
    CHECK(out.rgb[3 * p + 2] == 0.0);
    CHECK(out.alpha[p] == 0.5);
}

TEST_CASE("two coincident Gaussians composite front to back") {
    SplatInputs in = single(0.5, Vec3(1, 0, 0), 2, 1, 1.0);
    append(in, single(0.5, Vec3(0, 1, 0), 2, 1, 2.0));
    const RenderOutput out = rasterize(in);
    const std::size_t p = 1 * 4 + 2;
    CHECK(out.rgb[3 * p] == 0.5);
    CHECK(out.rgb[3 * p + 1] == 0.25);
    CHECK(out.rgb[3 * p + 2] == 0.0);
}

TEST_CASE("equal depths order by index") {
    SplatInputs in = single(0.5, Vec3(1, 0, 0), 2, 1, 1.0);
    append(in, single(0.5, Vec3(0, 1, 0), 2, 1, 1.0));
    const RenderOutput out = rasterize(in);
    CHECK(out.rgb[3 * 6] == 0.5);
    CHECK(out.rgb[3 * 6 + 1] == 0.25);
}

TEST_CASE("opacity one occludes what is behind it at its center") {
    SplatInputs in = single(1.0, Vec3(0.2, 0.3, 0.4), 2, 1, 1.0);
    append(in, single(0.9, Vec3(1, 1, 1), 2, 1, 3.0));
    in.background = Vec3(1, 1, 1);
    const RenderOutput out = rasterize(in);
    const std::size_t p = 1 * 4 + 2;
    CHECK(out.rgb[3 * p] == 0.2);
    CHECK(out.rgb[3 * p + 1] == 0.3);
    CHECK(out.rgb[3 * p + 2] == 0.4);
    CHECK(out.alpha[p] == 1.0);
    // Gradients are still finite with a fully opaque contributor.
    std::vector<double> g(3 * 16, 1.0), gm(16, 1.0);
    const SplatGradients grads = rasterize_backward(in, out, g, gm);
    for (double v : grads.opacities) {
        CHECK(std::isfinite(v));
    }
}

TEST_CASE("zero-size image is rejected") {
    SplatInputs in = single(0.5, Vec3(1, 0, 0), 2, 1);
    in.width = 0;
    try {
        rasterize(in);
        FAIL("expected an error");
    } catch (const Error &e) {
        CHECK(e.code() == Errc::invalid_parameter);
    }
}

TEST_CASE("rasterize matches the brute-force compositor") {
    Rng rng(31);
    for (int scene = 0; scene < 10; ++scene) {
        const int w = 16 + scene, h = 16 + 2 * scene;
        const SplatInputs in = testing::random_splats(rng, 10 + 5 * scene, w, h);
        const RenderOutput out = rasterize(in);
        const testing::BruteForceImage ref = testing::brute_force_composite(in);
        for (std::size_t i = 0; i < ref.rgb.size(); ++i) {
            CHECK(std::abs(out.rgb[i] - ref.rgb[i]) < 1e-6);
        }
        for (std::size_t i = 0; i < ref.mask.size(); ++i) {
            CHECK(std::abs(out.mask[i] - ref.mask[i]) < 1e-6);
            CHECK(std::abs(out.alpha[i] - ref.alpha[i]) < 1e-6);
            CHECK(out.alpha[i] >= 0.0);
            CHECK(out.alpha[i] <= 1.0);
            CHECK(out.mask[i] >= 0.0);
            CHECK(out.mask[i] <= 1.0);
        }
    }
}

TEST_CASE("mask channel equals RGB rendered with (m,m,m) over black") {
    Rng rng(32);
    for (int scene = 0; scene < 5; ++scene) {
        SplatInputs in = testing::random_splats(rng, 40, 37, 29);
        const RenderOutput out = rasterize(in);
        for (std::size_t i = 0; i < in.size(); ++i) {
            for (int c = 0; c < 3; ++c) {
                in.colors[3 * i + c] = in.mask_values[i];
            }
        }
        in.background = Vec3::Zero();
        const RenderOutput gray = rasterize(in);
        for (std::size_t p = 0; p < out.mask.size(); ++p) {
            CHECK(gray.rgb[3 * p] == out.mask[p]);
        }
    }
}

TEST_CASE("output is independent of the worker count") {
    Rng rng(33);
    const SplatInputs in = testing::random_splats(rng, 200, 70, 50);
    std::vector<double> g(3 * 70 * 50), gm(70 * 50);
    for (double &v : g) {
        v = testing::uniform(rng, -1, 1);
    }
    for (double &v : gm) {
        v = testing::uniform(rng, -1, 1);
    }
    set_num_threads(1);
    const RenderOutput a = rasterize(in);
    const SplatGradients ga = rasterize_backward(in, a, g, gm);
    set_num_threads(4);
    const RenderOutput b = rasterize(in);
    const SplatGradients gb = rasterize_backward(in, b, g, gm);
    set_num_threads(0);
    CHECK(a.rgb == b.rgb);
    CHECK(a.mask == b.mask);
    CHECK(ga.means2d == gb.means2d);
    CHECK(ga.cov2d == gb.cov2d);
    CHECK(ga.opacities == gb.opacities);
}

TEST_CASE("transmittance is non-increasing along the contributor list") {
    Rng rng(34);
    const SplatInputs in = testing::random_splats(rng, 30, 16, 16);
    const RenderOutput out = rasterize(in);
    for (std::size_t p = 0; p < out.pixel_count(); ++p) {
        CHECK(out.final_transmittance[p] <= out.transmittance_before_last[p]);
        CHECK(out.transmittance_before_last[p] <= 1.0);
    }
}

TEST_CASE("zero upstream gradient gives zero gradients") {
    Rng rng(35);
    const SplatInputs in = testing::random_splats(rng, 10, 12, 12);
    const RenderOutput out = rasterize(in);
    const std::vector<double> g(3 * 144, 0.0), gm(144, 0.0);
    const SplatGradients grads = rasterize_backward(in, out, g, gm);
    for (const auto *v : {&grads.means2d, &grads.cov2d, &grads.colors, &grads.opacities, &grads.mask_values}) {
        CHECK(std::all_of(v->begin(), v->end(), [](double x) { return x == 0.0; }));
    }
}

TEST_CASE("color gradient of a single Gaussian equals the rendered alpha") {
    SplatInputs in = single(0.7, Vec3(0.3, 0.6, 0.9), 1.5, 2.0);
    const RenderOutput out = rasterize(in);
    std::vector<double> g(3 * 16, 0.0), gm(16, 0.0);
    const std::size_t p = 2 * 4 + 1;
    g[3 * p] = 1.0;
    const SplatGradients grads = rasterize_backward(in, out, g, gm);
    CHECK(grads.colors[0] == doctest::Approx(out.alpha[p]).epsilon(1e-15));
    CHECK(grads.colors[1] == 0.0);
}

TEST_CASE("backward matches central differences") {
    Rng rng(36);
    testing::GradCheckResult total;
    for (int trial = 0; trial < 6; ++trial) {
        const SplatInputs in = testing::smooth_random_splats(rng, 5, 8, 8);
        total.merge(testing::check_raster_gradients(in, rng));
    }
    MESSAGE("checked " << total.checked << " worst relative error " << total.worst_rel);
    CHECK(total.failed == 0);
}

TEST_CASE("backward rejects mismatched shapes") {
    const SplatInputs in = single(0.5, Vec3(1, 0, 0), 2, 1);
    const RenderOutput out = rasterize(in);
    std::vector<double> g(3 * 15), gm(16);
    CHECK_THROWS_AS(rasterize_backward(in, out, g, gm), Error);
}
