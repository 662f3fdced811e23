// Copyright Contributors to the splattrack project
// SPDX-License-Identifier: Apache-2.0
//
#include "splattrack/field/deform.hpp"

#include "splattrack/core/error.hpp"
#include "splattrack/core/geometry.hpp"
#include "splattrack/core/parallel.hpp"
#include "splattrack/simd/kernels.hpp"

#include <algorithm>
#include <cmath>

namespace splattrack::field {

namespace {

constexpr std::size_t kChunk = 256;

struct Corners {
    std::size_t node[4];
    double w[4];
    AxisCell r, c;
};

Corners
corners(const Plane &p, const Vec4 &q, std::size_t pair) {
    Corners k;
    k.r = axis_cell(q[kPlaneAxes[pair][0]], p.rows);
    k.c = axis_cell(q[kPlaneAxes[pair][1]], p.cols);
    const std::size_t n00 = static_cast<std::size_t>(k.r.i0) * p.cols + k.c.i0;
    k.node[0] = n00;
    k.node[1] = n00 + p.cols;
    k.node[2] = n00 + 1;
    k.node[3] = n00 + p.cols + 1;
    const double fr = k.r.frac, fc = k.c.frac;
    k.w[0] = (1 - fr) * (1 - fc);
    k.w[1] = fr * (1 - fc);
    k.w[2] = (1 - fr) * fc;
    k.w[3] = fr * fc;
    return k;
}

} // namespace

DeformedGrad
DeformedGrad::zeros(std::size_t n) {
    DeformedGrad g;
    g.positions.assign(3 * n, 0.0);
    g.rot_quats.assign(4 * n, 0.0);
    g.shadows.assign(n, 0.0);
    return g;
}

DeformedState
deform(const GaussianSet &set, std::span<const std::uint8_t> dynamic, double t, const DeformationField &field,
       FieldTape *tape) {
    const std::size_t total = set.size();
    if (!dynamic.empty() && dynamic.size() != total) {
        fail(Errc::shape_mismatch, "deform: dynamic flags do not match the Gaussian count");
    }
    const FieldConfig &cfg = field.config();
    const int h = cfg.feature_size;
    const std::size_t levels = cfg.levels.size();
    const std::size_t enc = static_cast<std::size_t>(cfg.encoding_size());
    const std::size_t width = static_cast<std::size_t>(cfg.hidden_width);
    const std::size_t trunk = static_cast<std::size_t>(cfg.hidden_layers);

    FieldTape local;
    FieldTape &tp = tape != nullptr ? *tape : local;
    tp = FieldTape{};
    tp.t = t;
    tp.total = total;
    for (std::size_t i = 0; i < total; ++i) {
        if (dynamic.empty() || dynamic[i] != 0) {
            tp.indices.push_back(static_cast<std::uint32_t>(i));
        }
    }
    const std::size_t n = tp.indices.size();
    tp.query.resize(4 * n);
    tp.clamped.resize(4 * n);
    tp.plane_values.resize(n * levels * 6 * h);
    tp.features.resize(n * enc);
    tp.pre.assign(trunk, std::vector<double>(n * width));
    tp.post.assign(trunk, std::vector<double>(n * width));
    tp.heads.resize(n * kHeadOutputs);
    tp.quat_sum.resize(4 * n);
    tp.canonical_quats = set.rot_quats;

    DeformedState out;
    out.positions = set.positions;
    out.rot_quats.resize(4 * total);
    out.shadows.assign(total, 1.0);
    for (std::size_t i = 0; i < total; ++i) {
        const Vec4 q = set.rotation(i);
        const double norm = q.norm();
        if (!(norm >= 1e-12)) {
            fail(Errc::degenerate_rotation, "deform: near-zero quaternion for Gaussian " + std::to_string(i));
        }
        for (int c = 0; c < 4; ++c) {
            out.rot_quats[4 * i + c] = q[c] / norm;
        }
    }

    const simd::KernelTable &k = simd::kernels();
    const auto &layers = field.layers();
    parallel_for_chunks(n, kChunk, [&](std::size_t, std::size_t begin, std::size_t end) {
        const std::size_t batch = end - begin;
        for (std::size_t s = begin; s < end; ++s) {
            const std::size_t i = tp.indices[s];
            std::array<bool, 4> clamped{};
            const Vec4 q = field.normalize_query(set.position(i), t, &clamped);
            for (int a = 0; a < 4; ++a) {
                tp.query[4 * s + a] = q[a];
                tp.clamped[4 * s + a] = clamped[a] ? 1 : 0;
            }
            for (std::size_t level = 0; level < levels; ++level) {
                double *f = tp.features.data() + s * enc + level * h;
                std::fill(f, f + h, 1.0);
                for (std::size_t pair = 0; pair < 6; ++pair) {
                    const Plane &p = field.plane(level, pair);
                    const Corners cr = corners(p, q, pair);
                    double *v = tp.plane_values.data() + ((s * levels + level) * 6 + pair) * h;
                    const double *vals = p.values.data();
                    k.lerp4(vals + cr.node[0] * h, vals + cr.node[1] * h, vals + cr.node[2] * h,
                            vals + cr.node[3] * h, cr.w, v, h);
                    k.mul(v, f, h);
                }
            }
        }
        const double *x = tp.features.data() + begin * enc;
        for (std::size_t l = 0; l < trunk; ++l) {
            const DenseLayer &d = layers[l];
            double *z = tp.pre[l].data() + begin * width;
            double *a = tp.post[l].data() + begin * width;
            k.dense_forward(x, batch, d.in, d.w.data(), d.b.data(), d.out, z);
            k.silu_forward(z, a, batch * width);
            x = a;
        }
        const DenseLayer &head = layers.back();
        k.dense_forward(x, batch, head.in, head.w.data(), head.b.data(), head.out,
                        tp.heads.data() + begin * kHeadOutputs);
        for (std::size_t s = begin; s < end; ++s) {
            const std::size_t i = tp.indices[s];
            const double *o = tp.heads.data() + s * kHeadOutputs;
            for (int c = 0; c < 3; ++c) {
                out.positions[3 * i + c] = set.positions[3 * i + c] + o[c];
            }
            Vec4 qs;
            for (int c = 0; c < 4; ++c) {
                qs[c] = set.rot_quats[4 * i + c] + o[3 + c];
                tp.quat_sum[4 * s + c] = qs[c];
            }
            const double norm = qs.norm();
            for (int c = 0; c < 4; ++c) {
                out.rot_quats[4 * i + c] = qs[c] / norm;
            }
            out.shadows[i] = sigmoid(o[7]);
        }
    });
    tp.recorded = true;
    return out;
}

DeformedState
deform(const GaussianSet &set, double t, const DeformationField &field) {
    return deform(set, {}, t, field, nullptr);
}

void
field_backward(const DeformationField &field, const FieldTape &tape, const DeformedGrad &grads,
               FieldGradients &field_grads, std::span<double> d_positions, std::span<double> d_quats) {
    if (!tape.recorded) {
        fail(Errc::missing_tape, "field_backward: no recorded forward pass");
    }
    const std::size_t total = tape.total;
    if (grads.positions.size() != 3 * total || grads.rot_quats.size() != 4 * total ||
        grads.shadows.size() != total || d_positions.size() != 3 * total || d_quats.size() != 4 * total) {
        fail(Errc::shape_mismatch, "field_backward: gradient buffers do not match the recorded forward");
    }
    const FieldConfig &cfg = field.config();
    const int h = cfg.feature_size;
    const std::size_t levels = cfg.levels.size();
    const std::size_t enc = static_cast<std::size_t>(cfg.encoding_size());
    const std::size_t width = static_cast<std::size_t>(cfg.hidden_width);
    const std::size_t trunk = static_cast<std::size_t>(cfg.hidden_layers);
    const std::size_t n = tape.size();
    const auto &layers = field.layers();
    const simd::KernelTable &k = simd::kernels();

    // Positions pass straight through for everyone; quaternions go through
    // the normalization of either the canonical or the offset quaternion.
    for (std::size_t i = 0; i < 3 * total; ++i) {
        d_positions[i] += grads.positions[i];
    }
    std::vector<std::uint8_t> isDynamic(total, 0);
    for (std::uint32_t i : tape.indices) {
        isDynamic[i] = 1;
    }
    for (std::size_t i = 0; i < total; ++i) {
        if (isDynamic[i]) {
            continue;
        }
        const Vec4 q(tape.canonical_quats[4 * i], tape.canonical_quats[4 * i + 1], tape.canonical_quats[4 * i + 2],
                     tape.canonical_quats[4 * i + 3]);
        const Vec4 d(grads.rot_quats[4 * i], grads.rot_quats[4 * i + 1], grads.rot_quats[4 * i + 2],
                     grads.rot_quats[4 * i + 3]);
        const Vec4 dq = normalize_quat_backward(q, d);
        for (int c = 0; c < 4; ++c) {
            d_quats[4 * i + c] += dq[c];
        }
    }
    if (n == 0) {
        return;
    }

    std::vector<double> dHeads(n * kHeadOutputs);
    for (std::size_t s = 0; s < n; ++s) {
        const std::size_t i = tape.indices[s];
        double *dh = dHeads.data() + s * kHeadOutputs;
        for (int c = 0; c < 3; ++c) {
            dh[c] = grads.positions[3 * i + c];
        }
        const Vec4 qs(tape.quat_sum[4 * s], tape.quat_sum[4 * s + 1], tape.quat_sum[4 * s + 2],
                      tape.quat_sum[4 * s + 3]);
        const Vec4 d(grads.rot_quats[4 * i], grads.rot_quats[4 * i + 1], grads.rot_quats[4 * i + 2],
                     grads.rot_quats[4 * i + 3]);
        const Vec4 dq = normalize_quat_backward(qs, d);
        for (int c = 0; c < 4; ++c) {
            dh[3 + c] = dq[c];
            d_quats[4 * i + c] += dq[c];
        }
        const double sh = sigmoid(tape.heads[s * kHeadOutputs + 7]);
        dh[7] = grads.shadows[i] * sh * (1.0 - sh);
    }

    // MLP backward per chunk; weight gradients go to per-chunk buffers that
    // are summed in chunk order.
    const std::size_t chunks = chunk_count(n, kChunk);
    std::vector<std::vector<DenseLayer>> chunkGrads(chunks);
    std::vector<double> dFeatures(n * enc);
    parallel_for_chunks(n, kChunk, [&](std::size_t chunk, std::size_t begin, std::size_t end) {
        const std::size_t batch = end - begin;
        std::vector<DenseLayer> &cg = chunkGrads[chunk];
        cg.resize(layers.size());
        for (std::size_t l = 0; l < layers.size(); ++l) {
            cg[l].w.assign(layers[l].w.size(), 0.0);
            cg[l].b.assign(layers[l].b.size(), 0.0);
        }
        const DenseLayer &head = layers.back();
        const double *headIn = trunk > 0 ? tape.post[trunk - 1].data() + begin * width
                                         : tape.features.data() + begin * enc;
        const double *dy = dHeads.data() + begin * kHeadOutputs;
        k.dense_backward_weights(dy, batch, head.out, headIn, head.in, cg.back().w.data(), cg.back().b.data());
        std::vector<double> da(batch * width), dz(batch * width);
        k.dense_backward_input(dy, batch, head.out, head.w.data(), head.in, da.data());
        for (std::size_t l = trunk; l-- > 0;) {
            const DenseLayer &d = layers[l];
            k.silu_backward(tape.pre[l].data() + begin * width, da.data(), dz.data(), batch * width);
            const double *x = l > 0 ? tape.post[l - 1].data() + begin * width : tape.features.data() + begin * enc;
            k.dense_backward_weights(dz.data(), batch, d.out, x, d.in, cg[l].w.data(), cg[l].b.data());
            if (l > 0) {
                k.dense_backward_input(dz.data(), batch, d.out, d.w.data(), d.in, da.data());
            } else {
                k.dense_backward_input(dz.data(), batch, d.out, d.w.data(), d.in, dFeatures.data() + begin * enc);
            }
        }
    });
    for (std::size_t c = 0; c < chunks; ++c) {
        for (std::size_t l = 0; l < layers.size(); ++l) {
            k.axpy(1.0, chunkGrads[c][l].w.data(), field_grads.layers[l].w.data(), layers[l].w.size());
            k.axpy(1.0, chunkGrads[c][l].b.data(), field_grads.layers[l].b.data(), layers[l].b.size());
        }
    }

    // Encoding backward, in sample order so plane gradients sum
    // deterministically.
    const Vec3 ext = field.bbox().extent();
    std::vector<double> prefix(7 * h), dv(h), g(h);
    for (std::size_t s = 0; s < n; ++s) {
        const std::size_t i = tape.indices[s];
        const Vec4 q(tape.query[4 * s], tape.query[4 * s + 1], tape.query[4 * s + 2], tape.query[4 * s + 3]);
        Vec4 dq = Vec4::Zero();
        for (std::size_t level = 0; level < levels; ++level) {
            const double *df = dFeatures.data() + s * enc + level * h;
            const double *v = tape.plane_values.data() + (s * levels + level) * 6 * h;
            // prefix[p] = prod_{q<p} v_q; the suffix product is built on the fly.
            std::fill(prefix.begin(), prefix.begin() + h, 1.0);
            for (std::size_t p = 0; p < 6; ++p) {
                for (int f = 0; f < h; ++f) {
                    prefix[(p + 1) * h + f] = prefix[p * h + f] * v[p * h + f];
                }
            }
            std::vector<double> suffix(h, 1.0);
            for (std::size_t pair = 6; pair-- > 0;) {
                for (int f = 0; f < h; ++f) {
                    dv[f] = df[f] * prefix[pair * h + f] * suffix[f];
                    suffix[f] *= v[pair * h + f];
                }
                const Plane &p = field.plane(level, pair);
                const Corners cr = corners(p, q, pair);
                const std::size_t planeIndex = level * 6 + pair;
                for (int c = 0; c < 4; ++c) {
                    if (cr.w[c] == 0.0) {
                        continue;
                    }
                    for (int f = 0; f < h; ++f) {
                        g[f] = cr.w[c] * dv[f];
                    }
                    field_grads.add_plane(planeIndex, static_cast<std::uint32_t>(cr.node[c]), g.data(), h);
                }
                // d v / d frac along rows and columns.
                const double *vals = p.values.data();
                const double *c00 = vals + cr.node[0] * h;
                const double *c10 = vals + cr.node[1] * h;
                const double *c01 = vals + cr.node[2] * h;
                const double *c11 = vals + cr.node[3] * h;
                const double fr = cr.r.frac, fc = cr.c.frac;
                double dr = 0.0, dc = 0.0;
                for (int f = 0; f < h; ++f) {
                    dr += dv[f] * ((1 - fc) * (c10[f] - c00[f]) + fc * (c11[f] - c01[f]));
                    dc += dv[f] * ((1 - fr) * (c01[f] - c00[f]) + fr * (c11[f] - c10[f]));
                }
                dq[kPlaneAxes[pair][0]] += dr * (p.rows - 1);
                dq[kPlaneAxes[pair][1]] += dc * (p.cols - 1);
            }
        }
        for (int a = 0; a < 3; ++a) {
            if (!tape.clamped[4 * s + a]) {
                d_positions[3 * i + a] += dq[a] / ext[a];
            }
        }
    }
}

} // namespace splattrack::field
