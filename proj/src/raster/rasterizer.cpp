// Copyright Contributors to the splattrack project
// SPDX-License-Identifier: Apache-2.0
//
#include "splattrack/raster/rasterizer.hpp"

#include "splattrack/core/error.hpp"
#include "splattrack/core/parallel.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>

namespace splattrack::raster {

namespace {

struct Splat {
    double mx, my;
    double ca, cb, cc; // conic
    double opacity;
    double r, g, b;
    double m;
};

struct Contribution {
    bool hit;
    double alpha;
    double gauss; // exp(power)
    double dx, dy;
};

inline Contribution
evaluate(const Splat &s, double px, double py) {
    Contribution c{false, 0.0, 0.0, px - s.mx, py - s.my};
    const double q = s.ca * c.dx * c.dx + 2.0 * s.cb * c.dx * c.dy + s.cc * c.dy * c.dy;
    if (!(q <= kCutoffMahalanobis2)) {
        return c;
    }
    c.gauss = std::exp(-0.5 * q);
    c.alpha = s.opacity * c.gauss;
    c.hit = c.alpha >= kAlphaMin;
    return c;
}

std::vector<Splat>
make_splats(const SplatInputs &in, std::vector<double> &conics) {
    const std::size_t n = in.size();
    std::vector<Splat> splats(n);
    conics.resize(3 * n);
    for (std::size_t i = 0; i < n; ++i) {
        const double a = in.cov2d[3 * i] + kCovarianceFloor;
        const double b = in.cov2d[3 * i + 1];
        const double c = in.cov2d[3 * i + 2] + kCovarianceFloor;
        const double det = a * c - b * b;
        Splat &s = splats[i];
        s.mx = in.means2d[2 * i];
        s.my = in.means2d[2 * i + 1];
        s.ca = c / det;
        s.cb = -b / det;
        s.cc = a / det;
        s.opacity = in.opacities[i];
        s.r = in.colors[3 * i];
        s.g = in.colors[3 * i + 1];
        s.b = in.colors[3 * i + 2];
        s.m = in.mask_values[i];
        conics[3 * i] = s.ca;
        conics[3 * i + 1] = s.cb;
        conics[3 * i + 2] = s.cc;
    }
    return splats;
}

int
tiles_x(int width) {
    return (width + kTileSize - 1) / kTileSize;
}

int
tiles_y(int height) {
    return (height + kTileSize - 1) / kTileSize;
}

} // namespace

void
SplatInputs::resize(std::size_t n) {
    means2d.assign(2 * n, 0.0);
    cov2d.assign(3 * n, 0.0);
    depths.assign(n, 0.0);
    colors.assign(3 * n, 0.0);
    opacities.assign(n, 0.0);
    mask_values.assign(n, 0.0);
}

void
SplatInputs::validate() const {
    if (width < 1 || height < 1) {
        fail(Errc::invalid_parameter, "rasterize: image size must be at least 1x1");
    }
    const std::size_t n = size();
    if (means2d.size() != 2 * n || cov2d.size() != 3 * n || colors.size() != 3 * n || opacities.size() != n ||
        mask_values.size() != n) {
        fail(Errc::invalid_parameter, "rasterize: per-Gaussian arrays disagree on count");
    }
    if (!background.allFinite()) {
        fail(Errc::invalid_parameter, "rasterize: non-finite background");
    }
    for (std::size_t i = 0; i < n; ++i) {
        const double a = cov2d[3 * i] + kCovarianceFloor;
        const double b = cov2d[3 * i + 1];
        const double c = cov2d[3 * i + 2] + kCovarianceFloor;
        const bool finite = std::isfinite(means2d[2 * i]) && std::isfinite(means2d[2 * i + 1]) &&
                            std::isfinite(a) && std::isfinite(b) && std::isfinite(c) &&
                            std::isfinite(colors[3 * i]) && std::isfinite(colors[3 * i + 1]) &&
                            std::isfinite(colors[3 * i + 2]);
        if (!finite) {
            fail(Errc::invalid_parameter, "rasterize: non-finite input for Gaussian " + std::to_string(i));
        }
        if (!(a > 0.0 && a * c - b * b > 0.0)) {
            fail(Errc::invalid_parameter, "rasterize: covariance of Gaussian " + std::to_string(i) +
                                              " is not positive definite after the floor");
        }
        if (!(std::isfinite(depths[i]) && depths[i] > 0.0)) {
            fail(Errc::invalid_parameter, "rasterize: depth must be finite and positive");
        }
        if (!(opacities[i] >= 0.0 && opacities[i] <= 1.0) || !(mask_values[i] >= 0.0 && mask_values[i] <= 1.0)) {
            fail(Errc::invalid_parameter, "rasterize: opacity and mask values must lie in [0,1]");
        }
    }
}

RenderOutput
rasterize(const SplatInputs &in) {
    in.validate();
    const std::size_t n = in.size();
    const int width = in.width;
    const int height = in.height;

    RenderOutput out;
    out.width = width;
    out.height = height;
    const std::size_t pixels = out.pixel_count();
    out.rgb.assign(3 * pixels, 0.0);
    out.mask.assign(pixels, 0.0);
    out.alpha.assign(pixels, 0.0);
    out.traversed.assign(pixels, 0);
    out.final_transmittance.assign(pixels, 1.0);
    out.transmittance_before_last.assign(pixels, 1.0);

    const std::vector<Splat> splats = make_splats(in, out.conics);

    std::vector<std::uint32_t> order(n);
    std::iota(order.begin(), order.end(), 0u);
    std::sort(order.begin(), order.end(), [&](std::uint32_t a, std::uint32_t b) {
        return in.depths[a] < in.depths[b] || (in.depths[a] == in.depths[b] && a < b);
    });

    // Bin into tiles using the exact bounding box of the 3-sigma ellipse.
    const int tx = tiles_x(width);
    const int ty = tiles_y(height);
    const std::size_t tiles = static_cast<std::size_t>(tx) * ty;
    std::vector<std::array<int, 4>> tileRect(n); // x0, x1, y0, y1 inclusive, or empty
    out.tile_offsets.assign(tiles + 1, 0);
    for (std::uint32_t id : order) {
        const double a = in.cov2d[3 * id] + kCovarianceFloor;
        const double c = in.cov2d[3 * id + 2] + kCovarianceFloor;
        const double rx = 3.0 * std::sqrt(a);
        const double ry = 3.0 * std::sqrt(c);
        const double mx = in.means2d[2 * id];
        const double my = in.means2d[2 * id + 1];
        const int px0 = std::max(0, static_cast<int>(std::ceil(mx - rx)));
        const int px1 = std::min(width - 1, static_cast<int>(std::floor(mx + rx)));
        const int py0 = std::max(0, static_cast<int>(std::ceil(my - ry)));
        const int py1 = std::min(height - 1, static_cast<int>(std::floor(my + ry)));
        if (px0 > px1 || py0 > py1 || !std::isfinite(rx) || !std::isfinite(ry)) {
            tileRect[id] = {1, 0, 1, 0};
            continue;
        }
        tileRect[id] = {px0 / kTileSize, px1 / kTileSize, py0 / kTileSize, py1 / kTileSize};
        for (int y = tileRect[id][2]; y <= tileRect[id][3]; ++y) {
            for (int x = tileRect[id][0]; x <= tileRect[id][1]; ++x) {
                ++out.tile_offsets[static_cast<std::size_t>(y) * tx + x + 1];
            }
        }
    }
    for (std::size_t t = 0; t < tiles; ++t) {
        out.tile_offsets[t + 1] += out.tile_offsets[t];
    }
    out.tile_entries.resize(out.tile_offsets[tiles]);
    {
        std::vector<std::uint32_t> fill(out.tile_offsets.begin(), out.tile_offsets.end() - 1);
        for (std::uint32_t id : order) {
            const auto &r = tileRect[id];
            for (int y = r[2]; y <= r[3]; ++y) {
                for (int x = r[0]; x <= r[1]; ++x) {
                    out.tile_entries[fill[static_cast<std::size_t>(y) * tx + x]++] = id;
                }
            }
        }
    }

    struct TileHits {
        std::vector<std::uint32_t> count; // per pixel of the tile, row-major
        std::vector<std::uint32_t> entry;
        std::vector<double> transmittance;
        std::vector<double> gauss;
    };
    std::vector<TileHits> tileHits(tiles);
    parallel_for_chunks(tiles, 1, [&](std::size_t tile, std::size_t, std::size_t) {
        const int tileX = static_cast<int>(tile % tx);
        const int tileY = static_cast<int>(tile / tx);
        const std::uint32_t begin = out.tile_offsets[tile];
        const std::uint32_t end = out.tile_offsets[tile + 1];
        TileHits &th = tileHits[tile];
        for (int y = tileY * kTileSize; y < std::min(height, (tileY + 1) * kTileSize); ++y) {
            for (int x = tileX * kTileSize; x < std::min(width, (tileX + 1) * kTileSize); ++x) {
                const std::size_t pix = static_cast<std::size_t>(y) * width + x;
                double t = 1.0;
                double tBeforeLast = 1.0;
                double cr = 0.0, cg = 0.0, cb = 0.0, cm = 0.0;
                std::uint32_t visited = 0;
                std::uint32_t hits = 0;
                for (std::uint32_t e = begin; e < end; ++e) {
                    const Splat &s = splats[out.tile_entries[e]];
                    visited = e - begin + 1;
                    const Contribution c = evaluate(s, x, y);
                    if (!c.hit) {
                        continue;
                    }
                    th.entry.push_back(e - begin);
                    th.transmittance.push_back(t);
                    th.gauss.push_back(c.gauss);
                    ++hits;
                    const double w = c.alpha * t;
                    cr += s.r * w;
                    cg += s.g * w;
                    cb += s.b * w;
                    cm += s.m * w;
                    tBeforeLast = t;
                    t *= 1.0 - c.alpha;
                    if (t < kTransmittanceMin) {
                        break;
                    }
                }
                th.count.push_back(hits);
                out.rgb[3 * pix] = cr + t * in.background.x();
                out.rgb[3 * pix + 1] = cg + t * in.background.y();
                out.rgb[3 * pix + 2] = cb + t * in.background.z();
                out.mask[pix] = cm;
                out.alpha[pix] = 1.0 - t;
                out.final_transmittance[pix] = t;
                out.transmittance_before_last[pix] = tBeforeLast;
                out.traversed[pix] = visited;
            }
        }
    });

    // Gather the per-tile hit lists into pixel order.
    out.hit_offsets.assign(pixels + 1, 0);
    for (std::size_t tile = 0; tile < tiles; ++tile) {
        const int tileX = static_cast<int>(tile % tx);
        const int tileY = static_cast<int>(tile / tx);
        std::size_t k = 0;
        for (int y = tileY * kTileSize; y < std::min(height, (tileY + 1) * kTileSize); ++y) {
            for (int x = tileX * kTileSize; x < std::min(width, (tileX + 1) * kTileSize); ++x) {
                out.hit_offsets[static_cast<std::size_t>(y) * width + x + 1] = tileHits[tile].count[k++];
            }
        }
    }
    for (std::size_t p = 0; p < pixels; ++p) {
        out.hit_offsets[p + 1] += out.hit_offsets[p];
    }
    out.hit_entries.resize(out.hit_offsets[pixels]);
    out.hit_transmittance.resize(out.hit_offsets[pixels]);
    out.hit_gauss.resize(out.hit_offsets[pixels]);
    for (std::size_t tile = 0; tile < tiles; ++tile) {
        const int tileX = static_cast<int>(tile % tx);
        const int tileY = static_cast<int>(tile / tx);
        const TileHits &th = tileHits[tile];
        std::size_t k = 0, src = 0;
        for (int y = tileY * kTileSize; y < std::min(height, (tileY + 1) * kTileSize); ++y) {
            for (int x = tileX * kTileSize; x < std::min(width, (tileX + 1) * kTileSize); ++x) {
                const std::size_t dst = out.hit_offsets[static_cast<std::size_t>(y) * width + x];
                const std::uint32_t c = th.count[k++];
                std::copy_n(th.entry.begin() + static_cast<std::ptrdiff_t>(src), c, out.hit_entries.begin() + static_cast<std::ptrdiff_t>(dst));
                std::copy_n(th.transmittance.begin() + static_cast<std::ptrdiff_t>(src), c,
                            out.hit_transmittance.begin() + static_cast<std::ptrdiff_t>(dst));
                std::copy_n(th.gauss.begin() + static_cast<std::ptrdiff_t>(src), c, out.hit_gauss.begin() + static_cast<std::ptrdiff_t>(dst));
                src += c;
            }
        }
    }
    return out;
}

SplatGradients
rasterize_backward(const SplatInputs &in, const RenderOutput &out, std::span<const double> grad_rgb,
                   std::span<const double> grad_mask) {
    const std::size_t n = in.size();
    const std::size_t pixels = out.pixel_count();
    if (out.width != in.width || out.height != in.height || grad_rgb.size() != 3 * pixels ||
        grad_mask.size() != pixels || out.conics.size() != 3 * n || out.traversed.size() != pixels ||
        out.hit_offsets.size() != pixels + 1) {
        fail(Errc::invalid_parameter, "rasterize_backward: shape mismatch between inputs, output and gradients");
    }
    std::vector<double> conics;
    const std::vector<Splat> splats = make_splats(in, conics);
    const int width = in.width;
    const int height = in.height;
    const int tx = tiles_x(width);
    const std::size_t tiles = out.tile_offsets.size() - 1;

    // Per-tile accumulators, reduced in tile order afterwards so the result
    // does not depend on scheduling.
    constexpr int kG = 10; // mean(2) conic(3) color(3) opacity mask
    std::vector<std::vector<double>> tileGrads(tiles);

    parallel_for_chunks(tiles, 1, [&](std::size_t tile, std::size_t, std::size_t) {
        const std::uint32_t begin = out.tile_offsets[tile];
        const std::uint32_t end = out.tile_offsets[tile + 1];
        std::vector<double> &acc = tileGrads[tile];
        acc.assign(static_cast<std::size_t>(end - begin) * kG, 0.0);
        const int tileX = static_cast<int>(tile % tx);
        const int tileY = static_cast<int>(tile / tx);
        for (int y = tileY * kTileSize; y < std::min(height, (tileY + 1) * kTileSize); ++y) {
            for (int x = tileX * kTileSize; x < std::min(width, (tileX + 1) * kTileSize); ++x) {
                const std::size_t pix = static_cast<std::size_t>(y) * width + x;
                const double dR = grad_rgb[3 * pix];
                const double dGc = grad_rgb[3 * pix + 1];
                const double dB = grad_rgb[3 * pix + 2];
                const double dM = grad_mask[pix];
                if (dR == 0.0 && dGc == 0.0 && dB == 0.0 && dM == 0.0) {
                    continue;
                }
                double behindR = in.background.x();
                double behindG = in.background.y();
                double behindB = in.background.z();
                double behindM = 0.0;
                for (std::uint32_t h = out.hit_offsets[pix + 1]; h-- > out.hit_offsets[pix];) {
                    const std::uint32_t k = out.hit_entries[h];
                    const Splat &s = splats[out.tile_entries[begin + k]];
                    const double t = out.hit_transmittance[h];
                    Contribution c{true, 0.0, out.hit_gauss[h], x - s.mx, y - s.my};
                    c.alpha = s.opacity * c.gauss;
                    double *g = &acc[static_cast<std::size_t>(k) * kG];
                    const double w = c.alpha * t;
                    g[5] += w * dR;
                    g[6] += w * dGc;
                    g[7] += w * dB;
                    g[9] += w * dM;
                    const double dAlpha = t * ((s.r - behindR) * dR + (s.g - behindG) * dGc + (s.b - behindB) * dB +
                                               (s.m - behindM) * dM);
                    behindR = c.alpha * s.r + (1.0 - c.alpha) * behindR;
                    behindG = c.alpha * s.g + (1.0 - c.alpha) * behindG;
                    behindB = c.alpha * s.b + (1.0 - c.alpha) * behindB;
                    behindM = c.alpha * s.m + (1.0 - c.alpha) * behindM;

                    g[8] += c.gauss * dAlpha;
                    const double dPower = c.alpha * dAlpha;
                    // power = -0.5 (A dx^2 + 2 B dx dy + C dy^2), d = pixel - mean
                    g[0] += dPower * (s.ca * c.dx + s.cb * c.dy);
                    g[1] += dPower * (s.cb * c.dx + s.cc * c.dy);
                    g[2] += -0.5 * dPower * c.dx * c.dx;
                    g[3] += -dPower * c.dx * c.dy;
                    g[4] += -0.5 * dPower * c.dy * c.dy;
                }
            }
        }
    });

    SplatGradients grads;
    grads.means2d.assign(2 * n, 0.0);
    grads.cov2d.assign(3 * n, 0.0);
    grads.colors.assign(3 * n, 0.0);
    grads.opacities.assign(n, 0.0);
    grads.mask_values.assign(n, 0.0);
    std::vector<double> dConic(3 * n, 0.0);
    for (std::size_t tile = 0; tile < tiles; ++tile) {
        const std::uint32_t begin = out.tile_offsets[tile];
        const std::vector<double> &acc = tileGrads[tile];
        for (std::size_t k = 0; k < acc.size() / kG; ++k) {
            const std::uint32_t id = out.tile_entries[begin + k];
            const double *g = &acc[k * kG];
            grads.means2d[2 * id] += g[0];
            grads.means2d[2 * id + 1] += g[1];
            dConic[3 * id] += g[2];
            dConic[3 * id + 1] += g[3];
            dConic[3 * id + 2] += g[4];
            grads.colors[3 * id] += g[5];
            grads.colors[3 * id + 1] += g[6];
            grads.colors[3 * id + 2] += g[7];
            grads.opacities[id] += g[8];
            grads.mask_values[id] += g[9];
        }
    }

    // Conic Q = S^-1 with S the floored covariance: dS = -Q dQ Q, where dQ is
    // the symmetric matrix gradient (off-diagonal carries half the xy term).
    for (std::size_t i = 0; i < n; ++i) {
        const Splat &s = splats[i];
        Mat2 q;
        q << s.ca, s.cb, s.cb, s.cc;
        Mat2 dq;
        dq << dConic[3 * i], 0.5 * dConic[3 * i + 1], 0.5 * dConic[3 * i + 1], dConic[3 * i + 2];
        const Mat2 ds = -q * dq * q;
        grads.cov2d[3 * i] = ds(0, 0);
        grads.cov2d[3 * i + 1] = ds(0, 1) + ds(1, 0);
        grads.cov2d[3 * i + 2] = ds(1, 1);
    }
    return grads;
}

} // namespace splattrack::raster
