// Copyright Contributors to the splattrack project
// SPDX-License-Identifier: Apache-2.0
//
#include "splattrack/field/deformation_field.hpp"

#include "splattrack/core/error.hpp"
#include "splattrack/simd/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

namespace splattrack::field {

void
FieldConfig::validate() const {
    if (base_resolution[0] < 2 || base_resolution[1] < 2) {
        fail(Errc::invalid_config, "field: base resolution must be at least 2 in both directions");
    }
    if (levels.empty()) {
        fail(Errc::invalid_config, "field: at least one level is required");
    }
    for (int l : levels) {
        if (l < 1) {
            fail(Errc::invalid_config, "field: levels must be positive");
        }
    }
    if (feature_size < 1 || hidden_width < 1 || hidden_layers < 1) {
        fail(Errc::invalid_config, "field: feature size, hidden width and hidden layers must be positive");
    }
    if (!std::isfinite(shadow_bias_init)) {
        fail(Errc::invalid_config, "field: shadow bias must be finite");
    }
}

Aabb
Aabb::around(std::span<const double> xyz, double margin) {
    if (xyz.empty() || xyz.size() % 3 != 0) {
        fail(Errc::invalid_parameter, "bbox: expected a non-empty N x 3 buffer");
    }
    Aabb box;
    box.lo = Vec3::Constant(std::numeric_limits<double>::infinity());
    box.hi = -box.lo;
    for (std::size_t i = 0; i < xyz.size(); i += 3) {
        const Vec3 p(xyz[i], xyz[i + 1], xyz[i + 2]);
        box.lo = box.lo.cwiseMin(p);
        box.hi = box.hi.cwiseMax(p);
    }
    Vec3 ext = box.hi - box.lo;
    // A flat cloud still needs a non-degenerate box.
    const double floor = std::max(1e-3, 1e-3 * ext.maxCoeff());
    ext = ext.cwiseMax(Vec3::Constant(floor));
    const Vec3 mid = 0.5 * (box.lo + box.hi);
    box.lo = mid - 0.5 * ext - margin * ext;
    box.hi = mid + 0.5 * ext + margin * ext;
    return box;
}

AxisCell
axis_cell(double u, int n) {
    const double s = u * (n - 1);
    AxisCell c;
    c.i0 = std::min(static_cast<int>(std::floor(s)), n - 2);
    c.i0 = std::max(c.i0, 0);
    c.frac = s - c.i0;
    return c;
}

DeformationField
DeformationField::with_shapes(const FieldConfig &config, const Aabb &bbox) {
    config.validate();
    if (!((bbox.hi - bbox.lo).array() > 0.0).all()) {
        fail(Errc::invalid_config, "field: bbox must have positive extent on every axis");
    }
    DeformationField f;
    f.mConfig = config;
    f.mBbox = bbox;
    const int h = config.feature_size;
    for (int level : config.levels) {
        for (std::size_t pair = 0; pair < 6; ++pair) {
            Plane p;
            p.rows = level * config.base_resolution[0];
            p.cols = level * config.base_resolution[1];
            p.values.assign(p.nodes() * h, 0.0);
            f.mPlanes.push_back(std::move(p));
        }
    }
    int in = config.encoding_size();
    for (int l = 0; l < config.hidden_layers; ++l) {
        DenseLayer d;
        d.in = in;
        d.out = config.hidden_width;
        d.w.assign(static_cast<std::size_t>(d.in) * d.out, 0.0);
        d.b.assign(d.out, 0.0);
        f.mLayers.push_back(std::move(d));
        in = config.hidden_width;
    }
    DenseLayer head;
    head.in = in;
    head.out = kHeadOutputs;
    head.w.assign(static_cast<std::size_t>(head.in) * head.out, 0.0);
    head.b.assign(head.out, 0.0);
    f.mLayers.push_back(std::move(head));
    return f;
}

DeformationField
DeformationField::create(const FieldConfig &config, const Aabb &bbox, std::uint64_t seed) {
    DeformationField f = with_shapes(config, bbox);
    for (Plane &p : f.mPlanes) {
        std::fill(p.values.begin(), p.values.end(), 1.0);
    }
    std::mt19937_64 rng(seed);
    for (std::size_t l = 0; l + 1 < f.mLayers.size(); ++l) {
        DenseLayer &d = f.mLayers[l];
        const double bound = 1.0 / std::sqrt(static_cast<double>(d.in));
        std::uniform_real_distribution<double> dist(-bound, bound);
        for (double &w : d.w) {
            w = dist(rng);
        }
    }
    f.mLayers.back().b[kHeadOutputs - 1] = config.shadow_bias_init;
    return f;
}

Vec4
DeformationField::normalize_query(const Vec3 &xyz, double t, std::array<bool, 4> *clamped) const {
    Vec4 q;
    const Vec3 ext = mBbox.extent();
    for (int a = 0; a < 3; ++a) {
        q[a] = (xyz[a] - mBbox.lo[a]) / ext[a];
    }
    q[3] = t;
    for (int a = 0; a < 4; ++a) {
        const double c = std::clamp(q[a], 0.0, 1.0);
        if (clamped != nullptr) {
            (*clamped)[a] = c != q[a];
        }
        q[a] = c;
    }
    return q;
}

void
DeformationField::encode(const Vec3 &xyz, double t, std::span<double> out) const {
    const int h = mConfig.feature_size;
    if (out.size() != static_cast<std::size_t>(mConfig.encoding_size())) {
        fail(Errc::shape_mismatch, "encode: output buffer has the wrong length");
    }
    const simd::KernelTable &k = simd::kernels();
    const Vec4 q = normalize_query(xyz, t);
    std::vector<double> v(h);
    for (std::size_t level = 0; level < mConfig.levels.size(); ++level) {
        double *f = out.data() + level * h;
        std::fill(f, f + h, 1.0);
        for (std::size_t pair = 0; pair < 6; ++pair) {
            const Plane &p = plane(level, pair);
            const AxisCell r = axis_cell(q[kPlaneAxes[pair][0]], p.rows);
            const AxisCell c = axis_cell(q[kPlaneAxes[pair][1]], p.cols);
            const double *base = p.values.data() + (static_cast<std::size_t>(r.i0) * p.cols + c.i0) * h;
            const std::size_t down = static_cast<std::size_t>(p.cols) * h;
            const double w[4] = {(1 - r.frac) * (1 - c.frac), r.frac * (1 - c.frac), (1 - r.frac) * c.frac,
                                 r.frac * c.frac};
            k.lerp4(base, base + down, base + h, base + down + h, w, v.data(), h);
            k.mul(v.data(), f, h);
        }
    }
}

std::size_t
DeformationField::parameter_count() const {
    std::size_t n = 0;
    for (const Plane &p : mPlanes) {
        n += p.values.size();
    }
    for (const DenseLayer &d : mLayers) {
        n += d.w.size() + d.b.size();
    }
    return n;
}

bool
DeformationField::all_finite() const {
    auto finite = [](const std::vector<double> &v) {
        return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
    };
    for (const Plane &p : mPlanes) {
        if (!finite(p.values)) {
            return false;
        }
    }
    for (const DenseLayer &d : mLayers) {
        if (!finite(d.w) || !finite(d.b)) {
            return false;
        }
    }
    return true;
}

void
DeformationField::validate() const {
    mConfig.validate();
    const int h = mConfig.feature_size;
    if (mPlanes.size() != mConfig.levels.size() * 6) {
        fail(Errc::shape_mismatch, "field: wrong number of planes");
    }
    for (std::size_t level = 0; level < mConfig.levels.size(); ++level) {
        for (std::size_t pair = 0; pair < 6; ++pair) {
            const Plane &p = plane(level, pair);
            const int l = mConfig.levels[level];
            if (p.rows != l * mConfig.base_resolution[0] || p.cols != l * mConfig.base_resolution[1] ||
                p.values.size() != p.nodes() * h) {
                fail(Errc::shape_mismatch, "field: plane shape disagrees with the configuration");
            }
        }
    }
    if (mLayers.size() != static_cast<std::size_t>(mConfig.hidden_layers) + 1) {
        fail(Errc::shape_mismatch, "field: wrong number of MLP layers");
    }
    int in = mConfig.encoding_size();
    for (std::size_t l = 0; l < mLayers.size(); ++l) {
        const DenseLayer &d = mLayers[l];
        const int out = l + 1 == mLayers.size() ? kHeadOutputs : mConfig.hidden_width;
        if (d.in != in || d.out != out || d.w.size() != static_cast<std::size_t>(in) * out ||
            d.b.size() != static_cast<std::size_t>(out)) {
            fail(Errc::shape_mismatch, "field: MLP layer shape disagrees with the configuration");
        }
        in = out;
    }
    if (!all_finite()) {
        fail(Errc::invalid_parameter, "field: non-finite weights");
    }
}

FieldGradients
FieldGradients::like(const DeformationField &field) {
    FieldGradients g;
    for (const Plane &p : field.planes()) {
        g.planes.emplace_back(p.values.size(), 0.0);
        g.touched.emplace_back();
        g.touched_flag.emplace_back(p.nodes(), 0);
    }
    for (const DenseLayer &d : field.layers()) {
        DenseLayer z;
        z.in = d.in;
        z.out = d.out;
        z.w.assign(d.w.size(), 0.0);
        z.b.assign(d.b.size(), 0.0);
        g.layers.push_back(std::move(z));
    }
    return g;
}

void
FieldGradients::add_plane(std::size_t plane, std::uint32_t node, const double *g, int features) {
    if (!touched_flag[plane][node]) {
        touched_flag[plane][node] = 1;
        touched[plane].push_back(node);
    }
    double *dst = planes[plane].data() + static_cast<std::size_t>(node) * features;
    for (int f = 0; f < features; ++f) {
        dst[f] += g[f];
    }
}

void
FieldGradients::clear() {
    for (std::size_t p = 0; p < planes.size(); ++p) {
        const std::size_t h = touched_flag[p].empty() ? 0 : planes[p].size() / touched_flag[p].size();
        for (std::uint32_t node : touched[p]) {
            std::fill_n(planes[p].begin() + static_cast<std::ptrdiff_t>(node * h), h, 0.0);
            touched_flag[p][node] = 0;
        }
        touched[p].clear();
    }
    for (DenseLayer &d : layers) {
        std::fill(d.w.begin(), d.w.end(), 0.0);
        std::fill(d.b.begin(), d.b.end(), 0.0);
    }
}

} // namespace splattrack::field
