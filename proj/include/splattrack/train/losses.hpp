// Copyright Contributors to the splattrack project
// SPDX-License-Identifier: Apache-2.0
//
#pragma once

#include <cstdint>
#include <span>

namespace splattrack::train {

/// Mean absolute error. When `grad` is non-empty it receives the gradient of
/// the loss with respect to `rendered` (overwritten, scaled by `weight`).
double l1_loss(std::span<const double> rendered, std::span<const double> target, std::span<double> grad = {},
               double weight = 1.0);

/// Mean absolute error between a rendered and a binary target mask.
double mask_loss(std::span<const double> rendered, std::span<const double> target, std::span<double> grad = {},
                 double weight = 1.0);

/// (1 / (k N)) sum_i sum_{j in knn_i} w_ij | |mu_j0 - mu_i0| - |mu_jt - mu_it| |
/// with w_ij = exp(-lambda_w |mu_j0 - mu_i0|^2). `knn` is N x k. Gradients
/// (scaled by `weight`) are accumulated into the non-empty spans; the weights
/// w_ij are treated as constants.
double iso_loss(std::span<const double> positions_t0, std::span<const double> positions_t,
                std::span<const std::uint32_t> knn, double lambda_w, std::size_t k,
                std::span<double> grad_t0 = {}, std::span<double> grad_t = {}, double weight = 1.0);

/// Mean over points of |next + prev - 2 cur|_1. Gradients (scaled by
/// `weight`) are accumulated into the non-empty spans.
double momentum_loss(std::span<const double> prev, std::span<const double> cur, std::span<const double> next,
                     std::span<double> grad_prev = {}, std::span<double> grad_cur = {},
                     std::span<double> grad_next = {}, double weight = 1.0);

} // namespace splattrack::train
