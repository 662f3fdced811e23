// Copyright Contributors to the splattrack project
// SPDX-License-Identifier: Apache-2.0
//
#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace splattrack::train {

struct AdamHyper {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-15;
};

/// First and second moment buffers for one parameter group.
class AdamState {
public:
    AdamState() = default;
    explicit AdamState(std::size_t n) : mM(n, 0.0), mV(n, 0.0) {}

    std::size_t size() const noexcept { return mM.size(); }
    const std::vector<double> &first_moment() const { return mM; }
    const std::vector<double> &second_moment() const { return mV; }

    /// Bias-corrected update of every entry; `step` counts from 1.
    void update(std::span<double> params, std::span<const double> grads, double lr, std::uint64_t step,
                const AdamHyper &hyper = {});

    /// Update restricted to the listed blocks of `stride` consecutive entries;
    /// the moments of other blocks are left as they are.
    void update_blocks(std::span<double> params, std::span<const double> grads,
                       std::span<const std::uint32_t> blocks, std::size_t stride, double lr, std::uint64_t step,
                       const AdamHyper &hyper = {});

    /// Keeps the rows (of `stride` entries) at the given ascending indices.
    void select_rows(std::span<const std::size_t> keep, std::size_t stride);

private:
    std::vector<double> mM;
    std::vector<double> mV;
};

} // namespace splattrack::train
