// Copyright Contributors to the splattrack project
// SPDX-License-Identifier: Apache-2.0
//
#include "field_support.hpp"

#include "splattrack/core/error.hpp"
#include "splattrack/simd/kernels.hpp"

#include <doctest.h>

using namespace splattrack;
using namespace splattrack::field;
using splattrack::testing::Rng;
using splattrack::testing::uniform;

namespace {

const Aabb kBox{Vec3(-1, -0.5, 0), Vec3(1, 1.5, 0.8)};

// Encoding written from the definition: per level, for each plane, bilinear
// interpolation of the four surrounding nodes, multiplied together.
std::vector<double>
encode_oracle(const DeformationField &f, const Vec3 &xyz, double t) {
    const FieldConfig &cfg = f.config();
    double u[4];
    for (int a = 0; a < 3; ++a) {
        u[a] = std::min(1.0, std::max(0.0, (xyz[a] - f.bbox().lo[a]) / (f.bbox().hi[a] - f.bbox().lo[a])));
    }
    u[3] = std::min(1.0, std::max(0.0, t));
    const int pairs[6][2] = {{0, 1}, {0, 2}, {1, 2}, {0, 3}, {1, 3}, {2, 3}};
    std::vector<double> out;
    for (std::size_t level = 0; level < cfg.levels.size(); ++level) {
        std::vector<double> prod(cfg.feature_size, 1.0);
        for (int p = 0; p < 6; ++p) {
            const Plane &pl = f.plane(level, p);
            const double gr = u[pairs[p][0]] * (pl.rows - 1);
            const double gc = u[pairs[p][1]] * (pl.cols - 1);
            int r = static_cast<int>(gr), c = static_cast<int>(gc);
            if (r == pl.rows - 1) {
                r = pl.rows - 2;
            }
            if (c == pl.cols - 1) {
                c = pl.cols - 2;
            }
            const double a = gr - r, b = gc - c;
            for (int k = 0; k < cfg.feature_size; ++k) {
                auto at = [&](int rr, int cc) { return pl.values[(rr * pl.cols + cc) * cfg.feature_size + k]; };
                const double top = at(r, c) + b * (at(r, c + 1) - at(r, c));
                const double bottom = at(r + 1, c) + b * (at(r + 1, c + 1) - at(r + 1, c));
                prod[k] *= top + a * (bottom - top);
            }
        }
        out.insert(out.end(), prod.begin(), prod.end());
    }
    return out;
}

} // namespace

TEST_CASE("plane shapes follow the level multipliers") {
    FieldConfig cfg;
    const DeformationField f = DeformationField::with_shapes(cfg, kBox);
    CHECK(f.plane_count() == 24);
    CHECK(f.plane(3, 5).rows == 512);
    CHECK(f.plane(3, 5).cols == 512);
    CHECK(f.plane(1, 0).values.size() == 128u * 128u * 32u);
    CHECK(f.layers().size() == 3);
    CHECK(f.layers()[0].in == 128);
    CHECK(f.layers().back().out == kHeadOutputs);
    CHECK_NOTHROW(f.validate());

    FieldConfig bad = cfg;
    bad.levels.clear();
    CHECK_THROWS_AS(bad.validate(), Error);
}

TEST_CASE("all-ones planes encode to all ones") {
    const DeformationField f = DeformationField::create(testing::tiny_field_config(), kBox, 1);
    std::vector<double> out(f.config().encoding_size());
    f.encode(Vec3(0.13, 0.2, 0.4), 0.37, out);
    for (double v : out) {
        CHECK(v == 1.0);
    }
}

TEST_CASE("query at a grid node returns the product of node features") {
    Rng rng(1);
    const DeformationField f = testing::random_field(rng, testing::tiny_field_config(), Aabb{Vec3::Zero(), Vec3::Ones()});
    // Level 1 has 4 nodes per axis at 0, 1/3, 2/3, 1.
    const Vec3 xyz(1.0 / 3.0, 2.0 / 3.0, 0.0);
    const double t = 1.0;
    std::vector<double> out(f.config().encoding_size());
    f.encode(xyz, t, out);
    const int h = f.config().feature_size;
    const int idx[4] = {1, 2, 0, 3};
    for (int k = 0; k < h; ++k) {
        double prod = 1.0;
        for (std::size_t p = 0; p < 6; ++p) {
            const Plane &pl = f.plane(0, p);
            const int r = idx[kPlaneAxes[p][0]], c = idx[kPlaneAxes[p][1]];
            prod *= pl.values[(r * pl.cols + c) * h + k];
        }
        CHECK(out[k] == doctest::Approx(prod).epsilon(1e-14));
    }
}

TEST_CASE("encode matches the independent bilinear oracle") {
    Rng rng(2);
    FieldConfig cfg = testing::tiny_field_config();
    cfg.base_resolution = {5, 7};
    cfg.levels = {1, 2, 3};
    cfg.feature_size = 6;
    for (int trial = 0; trial < 20; ++trial) {
        const DeformationField f = testing::random_field(rng, cfg, kBox);
        for (int q = 0; q < 10; ++q) {
            // Some queries fall outside the box to exercise clamping.
            const Vec3 xyz(uniform(rng, -1.2, 1.2), uniform(rng, -0.7, 1.7), uniform(rng, -0.1, 0.9));
            const double t = uniform(rng, 0, 1);
            std::vector<double> out(cfg.encoding_size());
            f.encode(xyz, t, out);
            const std::vector<double> ref = encode_oracle(f, xyz, t);
            for (std::size_t i = 0; i < out.size(); ++i) {
                CHECK(std::abs(out[i] - ref[i]) < 1e-12);
            }
        }
    }
}

TEST_CASE("encode is continuous") {
    Rng rng(3);
    const DeformationField f = testing::random_field(rng, testing::tiny_field_config(), kBox);
    std::vector<double> a(f.config().encoding_size()), b(a.size());
    for (int q = 0; q < 100; ++q) {
        const Vec3 xyz(uniform(rng, -1, 1), uniform(rng, -0.5, 1.5), uniform(rng, 0, 0.8));
        const double t = uniform(rng, 0, 1);
        f.encode(xyz, t, a);
        f.encode(xyz + Vec3::Constant(1e-6), t + 1e-6, b);
        for (std::size_t i = 0; i < a.size(); ++i) {
            CHECK(std::abs(a[i] - b[i]) < 1e-3);
        }
    }
}

TEST_CASE("initial field is the identity deformation with shadow near 1") {
    Rng rng(4);
    const DeformationField f = DeformationField::create(FieldConfig{}, kBox, 9);
    const GaussianSet set = testing::random_gaussians(rng, 50, kBox);
    const DeformedState st = deform(set, 0.4, f);
    for (std::size_t i = 0; i < set.size(); ++i) {
        CHECK(st.position(i) == set.position(i));
        CHECK((st.rotation(i) - set.rotation(i)).cwiseAbs().maxCoeff() < 1e-15);
        CHECK(st.shadows[i] > 0.99);
        CHECK(st.shadows[i] < 1.0);
    }
}

TEST_CASE("constant position offset shifts every dynamic Gaussian") {
    Rng rng(5);
    DeformationField f = DeformationField::create(testing::tiny_field_config(), kBox, 1);
    f.layers().back().b[0] = 0.1;
    const GaussianSet set = testing::random_gaussians(rng, 20, kBox);
    std::vector<std::uint8_t> dyn(20, 1);
    dyn[3] = 0;
    const DeformedState st = deform(set, dyn, 0.5, f);
    for (std::size_t i = 0; i < set.size(); ++i) {
        const double expected = dyn[i] ? set.positions[3 * i] + 0.1 : set.positions[3 * i];
        CHECK(st.positions[3 * i] == expected);
        CHECK(st.positions[3 * i + 1] == set.positions[3 * i + 1]);
    }
    CHECK(st.shadows[3] == 1.0);
}

TEST_CASE("rotation output is unit and shadows lie in [0,1]") {
    Rng rng(6);
    const DeformationField f = testing::random_field(rng, testing::tiny_field_config(), kBox);
    const GaussianSet set = testing::random_gaussians(rng, 40, kBox);
    const DeformedState st = deform(set, 0.8, f);
    for (std::size_t i = 0; i < set.size(); ++i) {
        CHECK(std::abs(st.rotation(i).norm() - 1.0) < 1e-9);
        CHECK(st.shadows[i] >= 0.0);
        CHECK(st.shadows[i] <= 1.0);
    }
    const DeformedState again = deform(set, 0.8, f);
    CHECK(st.positions == again.positions);
    CHECK(st.rot_quats == again.rot_quats);
}

TEST_CASE("field_backward without a forward pass fails") {
    const DeformationField f = DeformationField::create(testing::tiny_field_config(), kBox, 1);
    FieldTape tape;
    FieldGradients g = FieldGradients::like(f);
    std::vector<double> dp(3), dq(4);
    try {
        field_backward(f, tape, DeformedGrad::zeros(1), g, dp, dq);
        FAIL("expected an error");
    } catch (const Error &e) {
        CHECK(e.code() == Errc::missing_tape);
    }
}

TEST_CASE("zero upstream gradient gives zero field gradients") {
    Rng rng(7);
    const DeformationField f = testing::random_field(rng, testing::tiny_field_config(), kBox);
    const GaussianSet set = testing::random_gaussians(rng, 5, kBox);
    FieldTape tape;
    deform(set, {}, 0.3, f, &tape);
    FieldGradients g = FieldGradients::like(f);
    std::vector<double> dp(15, 0.0), dq(20, 0.0);
    field_backward(f, tape, DeformedGrad::zeros(5), g, dp, dq);
    for (const auto &l : g.layers) {
        CHECK(std::all_of(l.w.begin(), l.w.end(), [](double v) { return v == 0.0; }));
    }
    for (const auto &p : g.planes) {
        CHECK(std::all_of(p.begin(), p.end(), [](double v) { return v == 0.0; }));
    }
    CHECK(std::all_of(dp.begin(), dp.end(), [](double v) { return v == 0.0; }));
}

TEST_CASE("shadow-only gradient leaves position and rotation head rows untouched") {
    Rng rng(8);
    const DeformationField f = testing::random_field(rng, testing::tiny_field_config(), kBox);
    const GaussianSet set = testing::random_gaussians(rng, 4, kBox);
    FieldTape tape;
    deform(set, {}, 0.6, f, &tape);
    DeformedGrad up = DeformedGrad::zeros(4);
    up.shadows = {1.0, -0.5, 0.25, 2.0};
    FieldGradients g = FieldGradients::like(f);
    std::vector<double> dp(12, 0.0), dq(16, 0.0);
    field_backward(f, tape, up, g, dp, dq);
    const DenseLayer &head = g.layers.back();
    for (int o = 0; o < 7; ++o) {
        CHECK(head.b[o] == 0.0);
        for (int i = 0; i < head.in; ++i) {
            CHECK(head.w[o * head.in + i] == 0.0);
        }
    }
    CHECK(head.b[7] != 0.0);
    CHECK(std::any_of(g.layers[0].w.begin(), g.layers[0].w.end(), [](double v) { return v != 0.0; }));
    CHECK(std::any_of(dp.begin(), dp.end(), [](double v) { return v != 0.0; }));
    CHECK(std::all_of(dq.begin(), dq.end(), [](double v) { return v == 0.0; }));
}

TEST_CASE("deform gradients match central differences") {
    Rng rng(9);
    testing::GradCheckResult total;
    for (int trial = 0; trial < 4; ++trial) {
        const DeformationField f = testing::random_field(rng, testing::tiny_field_config(), kBox);
        const GaussianSet set = testing::random_gaussians(rng, 2, kBox);
        total.merge(testing::check_field_gradients(f, set, uniform(rng, 0, 1), rng));
    }
    MESSAGE("checked " << total.checked << " worst relative error " << total.worst_rel);
    CHECK(total.failed == 0);
}

TEST_CASE("backward accumulates static quaternion gradients through the normalization") {
    Rng rng(10);
    const DeformationField f = testing::random_field(rng, testing::tiny_field_config(), kBox);
    GaussianSet set = testing::random_gaussians(rng, 3, kBox);
    set.set_rotation(1, Vec4(2, 0, 0, 0));
    std::vector<std::uint8_t> dyn{1, 0, 1};
    FieldTape tape;
    deform(set, dyn, 0.2, f, &tape);
    DeformedGrad up = DeformedGrad::zeros(3);
    up.rot_quats[4 * 1 + 1] = 1.0;
    up.positions[3 * 1 + 2] = 1.0;
    FieldGradients g = FieldGradients::like(f);
    std::vector<double> dp(9, 0.0), dq(12, 0.0);
    field_backward(f, tape, up, g, dp, dq);
    CHECK(dp[3 * 1 + 2] == 1.0);
    CHECK(dq[4 * 1 + 1] == doctest::Approx(0.5));
    CHECK(dq[4 * 1] == 0.0);
}

TEST_CASE("gradient clearing resets touched entries") {
    Rng rng(11);
    const DeformationField f = testing::random_field(rng, testing::tiny_field_config(), kBox);
    const GaussianSet set = testing::random_gaussians(rng, 6, kBox);
    FieldTape tape;
    deform(set, {}, 0.2, f, &tape);
    DeformedGrad up = DeformedGrad::zeros(6);
    std::fill(up.positions.begin(), up.positions.end(), 1.0);
    FieldGradients g = FieldGradients::like(f);
    std::vector<double> dp(18, 0.0), dq(24, 0.0);
    field_backward(f, tape, up, g, dp, dq);
    CHECK_FALSE(g.touched[0].empty());
    g.clear();
    for (std::size_t p = 0; p < g.planes.size(); ++p) {
        CHECK(g.touched[p].empty());
        CHECK(std::all_of(g.planes[p].begin(), g.planes[p].end(), [](double v) { return v == 0.0; }));
    }
}

TEST_CASE("field results do not depend on the kernel ISA") {
    Rng rng(12);
    FieldConfig cfg;
    cfg.base_resolution = {8, 8};
    const DeformationField f = testing::random_field(rng, cfg, kBox);
    const GaussianSet set = testing::random_gaussians(rng, 300, kBox);
    const simd::KernelTable &before = simd::kernels();
    simd::set_active_kernels(simd::scalar_kernels());
    const DeformedState ref = deform(set, 0.3, f);
    for (const simd::KernelTable *k : simd::available_kernels()) {
        simd::set_active_kernels(*k);
        const DeformedState st = deform(set, 0.3, f);
        for (std::size_t i = 0; i < ref.positions.size(); ++i) {
            CHECK(std::abs(st.positions[i] - ref.positions[i]) < 1e-12);
        }
    }
    simd::set_active_kernels(before);
}
