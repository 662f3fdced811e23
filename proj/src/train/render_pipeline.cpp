// Copyright Contributors to the splattrack project
// SPDX-License-Identifier: Apache-2.0
//
#include "splattrack/train/render_pipeline.hpp"

#include "splattrack/core/error.hpp"
#include "splattrack/core/geometry.hpp"

namespace splattrack::train {

SceneGradients
SceneGradients::zeros(std::size_t n) {
    SceneGradients g;
    g.positions.assign(3 * n, 0.0);
    g.rot_quats.assign(4 * n, 0.0);
    g.log_scales.assign(3 * n, 0.0);
    g.opacity_logits.assign(n, 0.0);
    g.colors.assign(3 * n, 0.0);
    g.mask_logits.assign(n, 0.0);
    g.shadows.assign(n, 0.0);
    return g;
}

field::DeformedState
canonical_state(const GaussianSet &set) {
    field::DeformedState st;
    st.positions = set.positions;
    st.rot_quats.resize(set.rot_quats.size());
    st.shadows.assign(set.size(), 1.0);
    for (std::size_t i = 0; i < set.size(); ++i) {
        const Vec4 q = set.rotation(i);
        if (!(q.norm() >= 1e-12)) {
            fail(Errc::degenerate_rotation, "near-zero quaternion for Gaussian " + std::to_string(i));
        }
        const Vec4 u = normalize_quat(q);
        for (int c = 0; c < 4; ++c) {
            st.rot_quats[4 * i + c] = u[c];
        }
    }
    return st;
}

RenderPass
render_state(const GaussianSet &set, const field::DeformedState &state, const Camera &cam, const Vec3 &background) {
    const std::size_t n = set.size();
    if (state.size() != n) {
        fail(Errc::shape_mismatch, "render: deformed state does not match the Gaussian set");
    }
    RenderPass pass;
    pass.inputs.width = cam.width;
    pass.inputs.height = cam.height;
    pass.inputs.background = background;
    pass.inputs.resize(0);
    for (std::size_t i = 0; i < n; ++i) {
        const Mat3 sigma = covariance_from_rs(state.rotation(i), set.log_scale(i));
        const auto proj = project_gaussian(state.position(i), sigma, cam);
        if (!proj) {
            continue;
        }
        raster::SplatInputs &in = pass.inputs;
        in.means2d.push_back(proj->mean2d.x());
        in.means2d.push_back(proj->mean2d.y());
        in.cov2d.push_back(proj->cov2d(0, 0));
        in.cov2d.push_back(proj->cov2d(0, 1));
        in.cov2d.push_back(proj->cov2d(1, 1));
        in.depths.push_back(proj->depth);
        for (int c = 0; c < 3; ++c) {
            in.colors.push_back(state.shadows[i] * set.colors[3 * i + c]);
        }
        in.opacities.push_back(set.opacity(i));
        in.mask_values.push_back(set.mask_value(i));
        pass.ids.push_back(static_cast<std::uint32_t>(i));
    }
    pass.output = raster::rasterize(pass.inputs);
    return pass;
}

void
render_backward(const GaussianSet &set, const field::DeformedState &state, const Camera &cam,
                const RenderPass &pass, std::span<const double> grad_rgb, std::span<const double> grad_mask,
                SceneGradients &out) {
    const raster::SplatGradients g = raster::rasterize_backward(pass.inputs, pass.output, grad_rgb, grad_mask);
    for (std::size_t s = 0; s < pass.ids.size(); ++s) {
        const std::size_t i = pass.ids[s];
        const Vec4 q = state.rotation(i);
        const Vec3 ls = set.log_scale(i);
        const Mat3 sigma = covariance_from_rs(q, ls);
        const Vec2 dMean(g.means2d[2 * s], g.means2d[2 * s + 1]);
        Mat2 dCov;
        dCov << g.cov2d[3 * s], 0.5 * g.cov2d[3 * s + 1], 0.5 * g.cov2d[3 * s + 1], g.cov2d[3 * s + 2];
        const ProjectionGrad pg = project_gaussian_backward(state.position(i), sigma, cam, dMean, dCov);
        const CovarianceGrad cg = covariance_from_rs_backward(q, ls, pg.d_sigma);
        for (int c = 0; c < 3; ++c) {
            out.positions[3 * i + c] += pg.d_mu[c];
            out.log_scales[3 * i + c] += cg.d_log_scale[c];
            out.colors[3 * i + c] += state.shadows[i] * g.colors[3 * s + c];
            out.shadows[i] += set.colors[3 * i + c] * g.colors[3 * s + c];
        }
        for (int c = 0; c < 4; ++c) {
            out.rot_quats[4 * i + c] += cg.d_quat[c];
        }
        const double o = set.opacity(i);
        out.opacity_logits[i] += g.opacities[s] * o * (1.0 - o);
        const double m = set.mask_value(i);
        out.mask_logits[i] += g.mask_values[s] * m * (1.0 - m);
    }
}

} // namespace splattrack::train
