// Copyright Contributors to the splattrack project
// SPDX-License-Identifier: Apache-2.0
//
#pragma once

#include "splattrack/core/types.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace splattrack {

struct Neighbor {
    std::uint32_t index = 0;
    double dist2 = 0.0;
};

/// Exact k-nearest-neighbor queries over a fixed point set using a uniform
/// grid hash. Results are ordered by (squared distance, index), so ties are
/// broken toward the lower index.
class KnnGrid {
public:
    /// `xyz` is a flat N x 3 buffer; it is copied.
    explicit KnnGrid(std::span<const double> xyz);

    std::size_t size() const noexcept { return mPoints.size() / 3; }

    std::vector<Neighbor> nearest(const Vec3 &query, std::size_t k,
                                  std::optional<std::uint32_t> exclude = std::nullopt) const;

private:
    std::vector<double> mPoints;
    Vec3 mOrigin = Vec3::Zero();
    double mCell = 1.0;
    int mDims[3] = {1, 1, 1};
    std::vector<std::uint32_t> mCellStart; // CSR offsets, size cells + 1
    std::vector<std::uint32_t> mIndices;   // point ids grouped by cell

    int cell_coord(double v, int axis) const;
};

/// For every point, its k nearest other points (self excluded), N x k.
/// Requires k < N.
std::vector<std::uint32_t> knn_graph(std::span<const double> xyz, std::size_t k);

} // namespace splattrack
