// Copyright Contributors to the splattrack project
// SPDX-License-Identifier: Apache-2.0
//
#include "splattrack/core/knn.hpp"

#include "splattrack/core/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace splattrack {

namespace {

bool
closer(const Neighbor &a, const Neighbor &b) {
    return a.dist2 < b.dist2 || (a.dist2 == b.dist2 && a.index < b.index);
}

} // namespace

KnnGrid::KnnGrid(std::span<const double> xyz) : mPoints(xyz.begin(), xyz.end()) {
    if (mPoints.size() % 3 != 0) {
        fail(Errc::shape_mismatch, "KnnGrid expects an N x 3 buffer");
    }
    const std::size_t n = size();
    if (n == 0) {
        mCellStart.assign(2, 0);
        return;
    }
    Vec3 lo = Vec3::Constant(std::numeric_limits<double>::infinity());
    Vec3 hi = -lo;
    for (std::size_t i = 0; i < n; ++i) {
        const Vec3 p(mPoints[3 * i], mPoints[3 * i + 1], mPoints[3 * i + 2]);
        lo = lo.cwiseMin(p);
        hi = hi.cwiseMax(p);
    }
    const Vec3 extent = hi - lo;
    const double maxExtent = std::max(extent.maxCoeff(), 1e-9);

    // Aim for about two points per occupied cell, measuring volume only along
    // the axes that are not flat.
    double volume = 1.0;
    int dimsUsed = 0;
    for (int a = 0; a < 3; ++a) {
        if (extent[a] > 1e-6 * maxExtent) {
            volume *= extent[a];
            ++dimsUsed;
        }
    }
    const double target = std::max(1.0, static_cast<double>(n) / 2.0);
    mCell = dimsUsed == 0 ? 1.0 : std::pow(volume / target, 1.0 / dimsUsed);
    mCell = std::max(mCell, maxExtent / 512.0);
    mOrigin = lo;
    std::size_t cells = 1;
    for (int a = 0; a < 3; ++a) {
        mDims[a] = std::max(1, static_cast<int>(std::ceil(extent[a] / mCell)));
        cells *= static_cast<std::size_t>(mDims[a]);
    }

    std::vector<std::uint32_t> cellOf(n);
    mCellStart.assign(cells + 1, 0);
    for (std::size_t i = 0; i < n; ++i) {
        const int cx = cell_coord(mPoints[3 * i], 0);
        const int cy = cell_coord(mPoints[3 * i + 1], 1);
        const int cz = cell_coord(mPoints[3 * i + 2], 2);
        cellOf[i] = static_cast<std::uint32_t>((static_cast<std::size_t>(cz) * mDims[1] + cy) * mDims[0] + cx);
        ++mCellStart[cellOf[i] + 1];
    }
    for (std::size_t c = 0; c < cells; ++c) {
        mCellStart[c + 1] += mCellStart[c];
    }
    mIndices.resize(n);
    std::vector<std::uint32_t> fill(mCellStart.begin(), mCellStart.end() - 1);
    for (std::size_t i = 0; i < n; ++i) {
        mIndices[fill[cellOf[i]]++] = static_cast<std::uint32_t>(i);
    }
}

int
KnnGrid::cell_coord(double v, int axis) const {
    const int c = static_cast<int>(std::floor((v - mOrigin[axis]) / mCell));
    return std::clamp(c, 0, mDims[axis] - 1);
}

std::vector<Neighbor>
KnnGrid::nearest(const Vec3 &query, std::size_t k, std::optional<std::uint32_t> exclude) const {
    std::vector<Neighbor> best;
    const std::size_t available = size() - (exclude && *exclude < size() ? 1 : 0);
    k = std::min(k, available);
    if (k == 0) {
        return best;
    }
    best.reserve(k + 1);
    const int c[3] = {cell_coord(query.x(), 0), cell_coord(query.y(), 1), cell_coord(query.z(), 2)};
    const int maxRadius = std::max({mDims[0], mDims[1], mDims[2]});

    auto visit = [&](int x, int y, int z) {
        const std::size_t cell = (static_cast<std::size_t>(z) * mDims[1] + y) * mDims[0] + x;
        for (std::uint32_t s = mCellStart[cell]; s < mCellStart[cell + 1]; ++s) {
            const std::uint32_t id = mIndices[s];
            if (exclude && id == *exclude) {
                continue;
            }
            const double dx = mPoints[3 * id] - query.x();
            const double dy = mPoints[3 * id + 1] - query.y();
            const double dz = mPoints[3 * id + 2] - query.z();
            const Neighbor cand{id, dx * dx + dy * dy + dz * dz};
            if (best.size() < k || closer(cand, best.back())) {
                best.insert(std::upper_bound(best.begin(), best.end(), cand, closer), cand);
                if (best.size() > k) {
                    best.pop_back();
                }
            }
        }
    };

    for (int r = 0; r <= maxRadius; ++r) {
        const int x0 = c[0] - r, x1 = c[0] + r;
        const int y0 = c[1] - r, y1 = c[1] + r;
        const int z0 = c[2] - r, z1 = c[2] + r;
        for (int z = std::max(z0, 0); z <= std::min(z1, mDims[2] - 1); ++z) {
            for (int y = std::max(y0, 0); y <= std::min(y1, mDims[1] - 1); ++y) {
                const bool shellZY = (z == z0 || z == z1 || y == y0 || y == y1);
                if (shellZY) {
                    for (int x = std::max(x0, 0); x <= std::min(x1, mDims[0] - 1); ++x) {
                        visit(x, y, z);
                    }
                } else {
                    if (x0 >= 0) {
                        visit(x0, y, z);
                    }
                    if (x1 < mDims[0] && x1 != x0) {
                        visit(x1, y, z);
                    }
                }
            }
        }
        if (best.size() == k) {
            // Smallest distance from the query to any cell outside the block
            // of radius r; faces on the grid boundary have nothing beyond.
            double bound = std::numeric_limits<double>::infinity();
            for (int a = 0; a < 3; ++a) {
                if (c[a] - r > 0) {
                    bound = std::min(bound, query[a] - (mOrigin[a] + (c[a] - r) * mCell));
                }
                if (c[a] + r < mDims[a] - 1) {
                    bound = std::min(bound, mOrigin[a] + (c[a] + r + 1) * mCell - query[a]);
                }
            }
            if (bound == std::numeric_limits<double>::infinity() || (bound > 0.0 && bound * bound > best.back().dist2)) {
                break;
            }
        }
    }
    return best;
}

std::vector<std::uint32_t>
knn_graph(std::span<const double> xyz, std::size_t k) {
    const std::size_t n = xyz.size() / 3;
    if (k == 0 || k >= n) {
        fail(Errc::invalid_config, "knn_graph: k must satisfy 1 <= k < N (k=" + std::to_string(k) +
                                       ", N=" + std::to_string(n) + ")");
    }
    const KnnGrid grid(xyz);
    std::vector<std::uint32_t> out(n * k);
    for (std::size_t i = 0; i < n; ++i) {
        const Vec3 q(xyz[3 * i], xyz[3 * i + 1], xyz[3 * i + 2]);
        const auto nb = grid.nearest(q, k, static_cast<std::uint32_t>(i));
        for (std::size_t j = 0; j < k; ++j) {
            out[i * k + j] = nb[j].index;
        }
    }
    return out;
}

} // namespace splattrack
