// Copyright Contributors to the splattrack project
// SPDX-License-Identifier: Apache-2.0
//
#include "splattrack/simd/kernels.hpp"

#include <cmath>

namespace splattrack::simd {

namespace {

double
dot_scalar(const double *a, const double *b, std::size_t n) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        s += a[i] * b[i];
    }
    return s;
}

void
axpy_scalar(double alpha, const double *x, double *y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) {
        y[i] += alpha * x[i];
    }
}

void
mul_scalar(const double *x, double *y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) {
        y[i] *= x[i];
    }
}

void
lerp4_scalar(const double *c0, const double *c1, const double *c2, const double *c3, const double *w, double *out,
             std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) {
        out[i] = w[0] * c0[i] + w[1] * c1[i] + w[2] * c2[i] + w[3] * c3[i];
    }
}

void
dense_forward_scalar(const double *x, std::size_t batch, std::size_t in, const double *w, const double *bias,
                     std::size_t out, double *y) {
    for (std::size_t b = 0; b < batch; ++b) {
        const double *xb = x + b * in;
        for (std::size_t o = 0; o < out; ++o) {
            y[b * out + o] = bias[o] + dot_scalar(xb, w + o * in, in);
        }
    }
}

void
dense_backward_input_scalar(const double *dy, std::size_t batch, std::size_t out, const double *w, std::size_t in,
                            double *dx) {
    for (std::size_t b = 0; b < batch; ++b) {
        double *dxb = dx + b * in;
        for (std::size_t i = 0; i < in; ++i) {
            dxb[i] = 0.0;
        }
        for (std::size_t o = 0; o < out; ++o) {
            axpy_scalar(dy[b * out + o], w + o * in, dxb, in);
        }
    }
}

void
dense_backward_weights_scalar(const double *dy, std::size_t batch, std::size_t out, const double *x,
                              std::size_t in, double *dw, double *dbias) {
    for (std::size_t o = 0; o < out; ++o) {
        double *dwo = dw + o * in;
        double db = 0.0;
        for (std::size_t b = 0; b < batch; ++b) {
            const double g = dy[b * out + o];
            db += g;
            axpy_scalar(g, x + b * in, dwo, in);
        }
        dbias[o] += db;
    }
}

void
silu_forward_scalar(const double *z, double *a, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) {
        a[i] = z[i] / (1.0 + std::exp(-z[i]));
    }
}

void
silu_backward_scalar(const double *z, const double *da, double *dz, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) {
        const double s = 1.0 / (1.0 + std::exp(-z[i]));
        dz[i] = da[i] * s * (1.0 + z[i] * (1.0 - s));
    }
}

} // namespace

const KernelTable &
scalar_kernels() {
    static const KernelTable table{Isa::scalar,
                                   dot_scalar,
                                   axpy_scalar,
                                   mul_scalar,
                                   lerp4_scalar,
                                   dense_forward_scalar,
                                   dense_backward_input_scalar,
                                   dense_backward_weights_scalar,
                                   silu_forward_scalar,
                                   silu_backward_scalar};
    return table;
}

} // namespace splattrack::simd
