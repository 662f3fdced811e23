// Copyright Contributors to the splattrack project
// SPDX-License-Identifier: Apache-2.0
//
#include "splattrack/train/adam.hpp"

#include "splattrack/core/error.hpp"

#include <cmath>

namespace splattrack::train {

namespace {

struct Corrected {
    double c1, c2;
};

Corrected
corrections(std::uint64_t step, const AdamHyper &h) {
    const double t = static_cast<double>(step);
    return {1.0 - std::pow(h.beta1, t), 1.0 - std::pow(h.beta2, t)};
}

inline void
update_one(double &p, double g, double &m, double &v, double lr, const Corrected &c, const AdamHyper &h) {
    m = h.beta1 * m + (1.0 - h.beta1) * g;
    v = h.beta2 * v + (1.0 - h.beta2) * g * g;
    p -= lr * (m / c.c1) / (std::sqrt(v / c.c2) + h.eps);
}

} // namespace

void
AdamState::update(std::span<double> params, std::span<const double> grads, double lr, std::uint64_t step,
                  const AdamHyper &hyper) {
    if (params.size() != mM.size() || grads.size() != mM.size()) {
        fail(Errc::shape_mismatch, "adam: parameter, gradient and moment sizes differ");
    }
    if (step == 0) {
        fail(Errc::invalid_parameter, "adam: step counts from 1");
    }
    const Corrected c = corrections(step, hyper);
    for (std::size_t i = 0; i < params.size(); ++i) {
        update_one(params[i], grads[i], mM[i], mV[i], lr, c, hyper);
    }
}

void
AdamState::update_blocks(std::span<double> params, std::span<const double> grads,
                         std::span<const std::uint32_t> blocks, std::size_t stride, double lr, std::uint64_t step,
                         const AdamHyper &hyper) {
    if (params.size() != mM.size() || grads.size() != mM.size()) {
        fail(Errc::shape_mismatch, "adam: parameter, gradient and moment sizes differ");
    }
    if (step == 0) {
        fail(Errc::invalid_parameter, "adam: step counts from 1");
    }
    const Corrected c = corrections(step, hyper);
    for (std::uint32_t b : blocks) {
        const std::size_t o = static_cast<std::size_t>(b) * stride;
        for (std::size_t i = o; i < o + stride; ++i) {
            update_one(params[i], grads[i], mM[i], mV[i], lr, c, hyper);
        }
    }
}

void
AdamState::select_rows(std::span<const std::size_t> keep, std::size_t stride) {
    std::vector<double> m, v;
    m.reserve(keep.size() * stride);
    v.reserve(keep.size() * stride);
    for (std::size_t r : keep) {
        for (std::size_t k = 0; k < stride; ++k) {
            m.push_back(mM[r * stride + k]);
            v.push_back(mV[r * stride + k]);
        }
    }
    mM = std::move(m);
    mV = std::move(v);
}

} // namespace splattrack::train
