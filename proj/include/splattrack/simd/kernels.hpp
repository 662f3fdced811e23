// Copyright Contributors to the splattrack project
// SPDX-License-Identifier: Apache-2.0
//
#pragma once

// Data-parallel f64 inner loops used by the deformation field. Each kernel
// has a portable scalar reference and, where the CPU supports it, an AVX2+FMA
// variant. The active table is chosen once at startup; the equivalence tests
// compare every variant against the scalar reference.

#include <cstddef>
#include <string_view>
#include <vector>

namespace splattrack::simd {

enum class Isa { scalar, avx2 };

std::string_view to_string(Isa isa) noexcept;

struct KernelTable {
    Isa isa;

    /// sum_i a[i] * b[i]
    double (*dot)(const double *a, const double *b, std::size_t n);
    /// y += alpha * x
    void (*axpy)(double alpha, const double *x, double *y, std::size_t n);
    /// y *= x (elementwise)
    void (*mul)(const double *x, double *y, std::size_t n);
    /// out = w[0]*c0 + w[1]*c1 + w[2]*c2 + w[3]*c3
    void (*lerp4)(const double *c0, const double *c1, const double *c2, const double *c3, const double *w,
                  double *out, std::size_t n);

    /// y[b][o] = bias[o] + sum_i x[b][i] * w[o][i]    (w is out x in, row-major)
    void (*dense_forward)(const double *x, std::size_t batch, std::size_t in, const double *w, const double *bias,
                          std::size_t out, double *y);
    /// dx[b][i] = sum_o dy[b][o] * w[o][i]
    void (*dense_backward_input)(const double *dy, std::size_t batch, std::size_t out, const double *w,
                                 std::size_t in, double *dx);
    /// dw[o][i] += sum_b dy[b][o] * x[b][i];  dbias[o] += sum_b dy[b][o]
    void (*dense_backward_weights)(const double *dy, std::size_t batch, std::size_t out, const double *x,
                                   std::size_t in, double *dw, double *dbias);

    /// a = z * sigmoid(z)
    void (*silu_forward)(const double *z, double *a, std::size_t n);
    /// dz = da * d/dz[z * sigmoid(z)]
    void (*silu_backward)(const double *z, const double *da, double *dz, std::size_t n);
};

const KernelTable &scalar_kernels();

/// nullptr when the binary or the CPU lacks AVX2+FMA.
const KernelTable *avx2_kernels();

/// Every table usable on this machine, scalar first.
std::vector<const KernelTable *> available_kernels();

/// Active table: the widest supported ISA unless the environment variable
/// SPLATTRACK_SIMD=scalar forces the reference path.
const KernelTable &kernels();

/// Overrides the active table (tests and benchmarks).
void set_active_kernels(const KernelTable &table);

} // namespace splattrack::simd
