// Copyright Contributors to the splattrack project
// SPDX-License-Identifier: Apache-2.0
//
// Built with -mavx2 -mfma. Nothing here may be inline-shared with other
// translation units; every helper lives in the anonymous namespace.

#include "splattrack/simd/kernels.hpp"

#if defined(SPLATTRACK_HAVE_AVX2_TU)

#include <immintrin.h>

#include <cmath>
#include <cstdint>

namespace splattrack::simd {

namespace {

inline double
hsum(__m256d v) {
    const __m128d lo = _mm256_castpd256_pd128(v);
    const __m128d hi = _mm256_extractf128_pd(v, 1);
    const __m128d s = _mm_add_pd(lo, hi);
    return _mm_cvtsd_f64(_mm_add_sd(s, _mm_unpackhi_pd(s, s)));
}

// [sum(a0), sum(a1), sum(a2), sum(a3)]
inline __m256d
hsum4(__m256d a0, __m256d a1, __m256d a2, __m256d a3) {
    const __m256d t0 = _mm256_hadd_pd(a0, a1);
    const __m256d t1 = _mm256_hadd_pd(a2, a3);
    const __m256d lo = _mm256_permute2f128_pd(t0, t1, 0x20);
    const __m256d hi = _mm256_permute2f128_pd(t0, t1, 0x31);
    return _mm256_add_pd(lo, hi);
}

double
dot_avx2(const double *a, const double *b, std::size_t n) {
    __m256d acc0 = _mm256_setzero_pd();
    __m256d acc1 = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
        acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 4), _mm256_loadu_pd(b + i + 4), acc1);
    }
    for (; i + 4 <= n; i += 4) {
        acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
    }
    double s = hsum(_mm256_add_pd(acc0, acc1));
    for (; i < n; ++i) {
        s += a[i] * b[i];
    }
    return s;
}

void
axpy_avx2(double alpha, const double *x, double *y, std::size_t n) {
    const __m256d va = _mm256_set1_pd(alpha);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        _mm256_storeu_pd(y + i, _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
    }
    for (; i < n; ++i) {
        y[i] += alpha * x[i];
    }
}

void
mul_avx2(const double *x, double *y, std::size_t n) {
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        _mm256_storeu_pd(y + i, _mm256_mul_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
    }
    for (; i < n; ++i) {
        y[i] *= x[i];
    }
}

void
lerp4_avx2(const double *c0, const double *c1, const double *c2, const double *c3, const double *w, double *out,
           std::size_t n) {
    const __m256d w0 = _mm256_set1_pd(w[0]);
    const __m256d w1 = _mm256_set1_pd(w[1]);
    const __m256d w2 = _mm256_set1_pd(w[2]);
    const __m256d w3 = _mm256_set1_pd(w[3]);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        __m256d acc = _mm256_mul_pd(w0, _mm256_loadu_pd(c0 + i));
        acc = _mm256_fmadd_pd(w1, _mm256_loadu_pd(c1 + i), acc);
        acc = _mm256_fmadd_pd(w2, _mm256_loadu_pd(c2 + i), acc);
        acc = _mm256_fmadd_pd(w3, _mm256_loadu_pd(c3 + i), acc);
        _mm256_storeu_pd(out + i, acc);
    }
    for (; i < n; ++i) {
        out[i] = w[0] * c0[i] + w[1] * c1[i] + w[2] * c2[i] + w[3] * c3[i];
    }
}

void
dense_forward_avx2(const double *x, std::size_t batch, std::size_t in, const double *w, const double *bias,
                   std::size_t out, double *y) {
    const std::size_t in4 = in & ~std::size_t(3);
    std::size_t b = 0;
    for (; b + 4 <= batch; b += 4) {
        const double *x0 = x + (b + 0) * in;
        const double *x1 = x + (b + 1) * in;
        const double *x2 = x + (b + 2) * in;
        const double *x3 = x + (b + 3) * in;
        std::size_t o = 0;
        for (; o + 4 <= out; o += 4) {
            const double *w0 = w + (o + 0) * in;
            const double *w1 = w + (o + 1) * in;
            const double *w2 = w + (o + 2) * in;
            const double *w3 = w + (o + 3) * in;
            __m256d a00 = _mm256_setzero_pd(), a01 = _mm256_setzero_pd(), a02 = _mm256_setzero_pd(),
                    a03 = _mm256_setzero_pd();
            __m256d a10 = _mm256_setzero_pd(), a11 = _mm256_setzero_pd(), a12 = _mm256_setzero_pd(),
                    a13 = _mm256_setzero_pd();
            __m256d a20 = _mm256_setzero_pd(), a21 = _mm256_setzero_pd(), a22 = _mm256_setzero_pd(),
                    a23 = _mm256_setzero_pd();
            __m256d a30 = _mm256_setzero_pd(), a31 = _mm256_setzero_pd(), a32 = _mm256_setzero_pd(),
                    a33 = _mm256_setzero_pd();
            for (std::size_t i = 0; i < in4; i += 4) {
                const __m256d vw0 = _mm256_loadu_pd(w0 + i);
                const __m256d vw1 = _mm256_loadu_pd(w1 + i);
                const __m256d vw2 = _mm256_loadu_pd(w2 + i);
                const __m256d vw3 = _mm256_loadu_pd(w3 + i);
                __m256d vx = _mm256_loadu_pd(x0 + i);
                a00 = _mm256_fmadd_pd(vx, vw0, a00);
                a01 = _mm256_fmadd_pd(vx, vw1, a01);
                a02 = _mm256_fmadd_pd(vx, vw2, a02);
                a03 = _mm256_fmadd_pd(vx, vw3, a03);
                vx = _mm256_loadu_pd(x1 + i);
                a10 = _mm256_fmadd_pd(vx, vw0, a10);
                a11 = _mm256_fmadd_pd(vx, vw1, a11);
                a12 = _mm256_fmadd_pd(vx, vw2, a12);
                a13 = _mm256_fmadd_pd(vx, vw3, a13);
                vx = _mm256_loadu_pd(x2 + i);
                a20 = _mm256_fmadd_pd(vx, vw0, a20);
                a21 = _mm256_fmadd_pd(vx, vw1, a21);
                a22 = _mm256_fmadd_pd(vx, vw2, a22);
                a23 = _mm256_fmadd_pd(vx, vw3, a23);
                vx = _mm256_loadu_pd(x3 + i);
                a30 = _mm256_fmadd_pd(vx, vw0, a30);
                a31 = _mm256_fmadd_pd(vx, vw1, a31);
                a32 = _mm256_fmadd_pd(vx, vw2, a32);
                a33 = _mm256_fmadd_pd(vx, vw3, a33);
            }
            const __m256d vb = _mm256_loadu_pd(bias + o);
            __m256d r0 = _mm256_add_pd(vb, hsum4(a00, a01, a02, a03));
            __m256d r1 = _mm256_add_pd(vb, hsum4(a10, a11, a12, a13));
            __m256d r2 = _mm256_add_pd(vb, hsum4(a20, a21, a22, a23));
            __m256d r3 = _mm256_add_pd(vb, hsum4(a30, a31, a32, a33));
            alignas(32) double tmp[4][4];
            _mm256_store_pd(tmp[0], r0);
            _mm256_store_pd(tmp[1], r1);
            _mm256_store_pd(tmp[2], r2);
            _mm256_store_pd(tmp[3], r3);
            const double *xs[4] = {x0, x1, x2, x3};
            const double *ws[4] = {w0, w1, w2, w3};
            for (int r = 0; r < 4; ++r) {
                for (int c = 0; c < 4; ++c) {
                    double t = tmp[r][c];
                    for (std::size_t i = in4; i < in; ++i) {
                        t += xs[r][i] * ws[c][i];
                    }
                    y[(b + r) * out + o + c] = t;
                }
            }
        }
        for (; o < out; ++o) {
            for (std::size_t r = 0; r < 4; ++r) {
                y[(b + r) * out + o] = bias[o] + dot_avx2(x + (b + r) * in, w + o * in, in);
            }
        }
    }
    for (; b < batch; ++b) {
        for (std::size_t o = 0; o < out; ++o) {
            y[b * out + o] = bias[o] + dot_avx2(x + b * in, w + o * in, in);
        }
    }
}

void
dense_backward_input_avx2(const double *dy, std::size_t batch, std::size_t out, const double *w, std::size_t in,
                          double *dx) {
    std::size_t b = 0;
    for (; b + 4 <= batch; b += 4) {
        const double *g0 = dy + (b + 0) * out;
        const double *g1 = dy + (b + 1) * out;
        const double *g2 = dy + (b + 2) * out;
        const double *g3 = dy + (b + 3) * out;
        std::size_t i = 0;
        for (; i + 8 <= in; i += 8) {
            __m256d a0l = _mm256_setzero_pd(), a0h = _mm256_setzero_pd();
            __m256d a1l = _mm256_setzero_pd(), a1h = _mm256_setzero_pd();
            __m256d a2l = _mm256_setzero_pd(), a2h = _mm256_setzero_pd();
            __m256d a3l = _mm256_setzero_pd(), a3h = _mm256_setzero_pd();
            for (std::size_t o = 0; o < out; ++o) {
                const __m256d wl = _mm256_loadu_pd(w + o * in + i);
                const __m256d wh = _mm256_loadu_pd(w + o * in + i + 4);
                __m256d g = _mm256_broadcast_sd(g0 + o);
                a0l = _mm256_fmadd_pd(g, wl, a0l);
                a0h = _mm256_fmadd_pd(g, wh, a0h);
                g = _mm256_broadcast_sd(g1 + o);
                a1l = _mm256_fmadd_pd(g, wl, a1l);
                a1h = _mm256_fmadd_pd(g, wh, a1h);
                g = _mm256_broadcast_sd(g2 + o);
                a2l = _mm256_fmadd_pd(g, wl, a2l);
                a2h = _mm256_fmadd_pd(g, wh, a2h);
                g = _mm256_broadcast_sd(g3 + o);
                a3l = _mm256_fmadd_pd(g, wl, a3l);
                a3h = _mm256_fmadd_pd(g, wh, a3h);
            }
            _mm256_storeu_pd(dx + (b + 0) * in + i, a0l);
            _mm256_storeu_pd(dx + (b + 0) * in + i + 4, a0h);
            _mm256_storeu_pd(dx + (b + 1) * in + i, a1l);
            _mm256_storeu_pd(dx + (b + 1) * in + i + 4, a1h);
            _mm256_storeu_pd(dx + (b + 2) * in + i, a2l);
            _mm256_storeu_pd(dx + (b + 2) * in + i + 4, a2h);
            _mm256_storeu_pd(dx + (b + 3) * in + i, a3l);
            _mm256_storeu_pd(dx + (b + 3) * in + i + 4, a3h);
        }
        for (; i < in; ++i) {
            for (std::size_t r = 0; r < 4; ++r) {
                double s = 0.0;
                for (std::size_t o = 0; o < out; ++o) {
                    s += dy[(b + r) * out + o] * w[o * in + i];
                }
                dx[(b + r) * in + i] = s;
            }
        }
    }
    for (; b < batch; ++b) {
        double *dxb = dx + b * in;
        for (std::size_t i = 0; i < in; ++i) {
            dxb[i] = 0.0;
        }
        for (std::size_t o = 0; o < out; ++o) {
            axpy_avx2(dy[b * out + o], w + o * in, dxb, in);
        }
    }
}

void
dense_backward_weights_avx2(const double *dy, std::size_t batch, std::size_t out, const double *x,
                            std::size_t in, double *dw, double *dbias) {
    std::size_t o = 0;
    for (; o + 4 <= out; o += 4) {
        std::size_t i = 0;
        for (; i + 8 <= in; i += 8) {
            double *d0 = dw + (o + 0) * in + i;
            double *d1 = dw + (o + 1) * in + i;
            double *d2 = dw + (o + 2) * in + i;
            double *d3 = dw + (o + 3) * in + i;
            __m256d a0l = _mm256_loadu_pd(d0), a0h = _mm256_loadu_pd(d0 + 4);
            __m256d a1l = _mm256_loadu_pd(d1), a1h = _mm256_loadu_pd(d1 + 4);
            __m256d a2l = _mm256_loadu_pd(d2), a2h = _mm256_loadu_pd(d2 + 4);
            __m256d a3l = _mm256_loadu_pd(d3), a3h = _mm256_loadu_pd(d3 + 4);
            for (std::size_t b = 0; b < batch; ++b) {
                const __m256d xl = _mm256_loadu_pd(x + b * in + i);
                const __m256d xh = _mm256_loadu_pd(x + b * in + i + 4);
                const double *g = dy + b * out + o;
                __m256d gv = _mm256_broadcast_sd(g + 0);
                a0l = _mm256_fmadd_pd(gv, xl, a0l);
                a0h = _mm256_fmadd_pd(gv, xh, a0h);
                gv = _mm256_broadcast_sd(g + 1);
                a1l = _mm256_fmadd_pd(gv, xl, a1l);
                a1h = _mm256_fmadd_pd(gv, xh, a1h);
                gv = _mm256_broadcast_sd(g + 2);
                a2l = _mm256_fmadd_pd(gv, xl, a2l);
                a2h = _mm256_fmadd_pd(gv, xh, a2h);
                gv = _mm256_broadcast_sd(g + 3);
                a3l = _mm256_fmadd_pd(gv, xl, a3l);
                a3h = _mm256_fmadd_pd(gv, xh, a3h);
            }
            _mm256_storeu_pd(d0, a0l);
            _mm256_storeu_pd(d0 + 4, a0h);
            _mm256_storeu_pd(d1, a1l);
            _mm256_storeu_pd(d1 + 4, a1h);
            _mm256_storeu_pd(d2, a2l);
            _mm256_storeu_pd(d2 + 4, a2h);
            _mm256_storeu_pd(d3, a3l);
            _mm256_storeu_pd(d3 + 4, a3h);
        }
        for (; i < in; ++i) {
            for (std::size_t c = 0; c < 4; ++c) {
                double s = 0.0;
                for (std::size_t b = 0; b < batch; ++b) {
                    s += dy[b * out + o + c] * x[b * in + i];
                }
                dw[(o + c) * in + i] += s;
            }
        }
    }
    for (; o < out; ++o) {
        for (std::size_t b = 0; b < batch; ++b) {
            axpy_avx2(dy[b * out + o], x + b * in, dw + o * in, in);
        }
    }
    for (std::size_t oo = 0; oo < out; ++oo) {
        double s = 0.0;
        for (std::size_t b = 0; b < batch; ++b) {
            s += dy[b * out + oo];
        }
        dbias[oo] += s;
    }
}

// exp(x) for x in [-708, 708]: x = n ln2 + r, |r| <= ln2/2, degree-13 Taylor
// polynomial for exp(r), then scale by 2^n through the exponent bits.
inline __m256d
exp_pd(__m256d x) {
    const __m256d maxX = _mm256_set1_pd(708.0);
    const __m256d minX = _mm256_set1_pd(-708.0);
    x = _mm256_min_pd(_mm256_max_pd(x, minX), maxX);
    const __m256d log2e = _mm256_set1_pd(1.4426950408889634);
    const __m256d ln2hi = _mm256_set1_pd(6.93145751953125e-1);
    const __m256d ln2lo = _mm256_set1_pd(1.42860682030941723212e-6);
    const __m256d n = _mm256_round_pd(_mm256_mul_pd(x, log2e), _MM_FROUND_TO_NEAREST_INT | _MM_FROUND_NO_EXC);
    __m256d r = _mm256_fnmadd_pd(n, ln2hi, x);
    r = _mm256_fnmadd_pd(n, ln2lo, r);

    static constexpr double kCoeff[] = {1.0 / 6227020800.0, 1.0 / 479001600.0, 1.0 / 39916800.0,
                                        1.0 / 3628800.0,    1.0 / 362880.0,    1.0 / 40320.0,
                                        1.0 / 5040.0,       1.0 / 720.0,       1.0 / 120.0,
                                        1.0 / 24.0,         1.0 / 6.0,         0.5,
                                        1.0,                1.0};
    __m256d p = _mm256_set1_pd(kCoeff[0]);
    for (int k = 1; k < 14; ++k) {
        p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(kCoeff[k]));
    }

    // 2^n: move the integer-valued n into the exponent field.
    const __m256d magic = _mm256_set1_pd(6755399441055744.0); // 2^52 + 2^51
    const __m256i ni = _mm256_sub_epi64(_mm256_castpd_si256(_mm256_add_pd(n, magic)), _mm256_castpd_si256(magic));
    const __m256i bits = _mm256_slli_epi64(_mm256_add_epi64(ni, _mm256_set1_epi64x(1023)), 52);
    return _mm256_mul_pd(p, _mm256_castsi256_pd(bits));
}

inline __m256d
sigmoid_pd(__m256d z) {
    const __m256d one = _mm256_set1_pd(1.0);
    const __m256d e = exp_pd(_mm256_sub_pd(_mm256_setzero_pd(), z));
    return _mm256_div_pd(one, _mm256_add_pd(one, e));
}

void
silu_forward_avx2(const double *z, double *a, std::size_t n) {
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d vz = _mm256_loadu_pd(z + i);
        _mm256_storeu_pd(a + i, _mm256_mul_pd(vz, sigmoid_pd(vz)));
    }
    for (; i < n; ++i) {
        a[i] = z[i] / (1.0 + std::exp(-z[i]));
    }
}

void
silu_backward_avx2(const double *z, const double *da, double *dz, std::size_t n) {
    const __m256d one = _mm256_set1_pd(1.0);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d vz = _mm256_loadu_pd(z + i);
        const __m256d s = sigmoid_pd(vz);
        const __m256d d = _mm256_mul_pd(s, _mm256_fmadd_pd(vz, _mm256_sub_pd(one, s), one));
        _mm256_storeu_pd(dz + i, _mm256_mul_pd(_mm256_loadu_pd(da + i), d));
    }
    for (; i < n; ++i) {
        const double s = 1.0 / (1.0 + std::exp(-z[i]));
        dz[i] = da[i] * s * (1.0 + z[i] * (1.0 - s));
    }
}

} // namespace

const KernelTable *
avx2_kernel_table_impl() {
    static const KernelTable table{Isa::avx2,
                                   dot_avx2,
                                   axpy_avx2,
                                   mul_avx2,
                                   lerp4_avx2,
                                   dense_forward_avx2,
                                   dense_backward_input_avx2,
                                   dense_backward_weights_avx2,
                                   silu_forward_avx2,
                                   silu_backward_avx2};
    return &table;
}

} // namespace splattrack::simd

#endif
