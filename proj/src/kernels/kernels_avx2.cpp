// AVX2 + FMA kernel variants. This translation unit is compiled with
// -mavx2 -mfma and must only be reached after avx2_available() says yes.

#include <immintrin.h>

#include <cmath>
#include <cstring>

#include "cardioforge/kernels.hpp"

namespace cardioforge::kernels {
namespace {

inline double hsum(__m256d v) {
    __m128d lo = _mm256_castpd256_pd128(v);
    __m128d hi = _mm256_extractf128_pd(v, 1);
    lo = _mm_add_pd(lo, hi);
    __m128d sh = _mm_unpackhi_pd(lo, lo);
    return _mm_cvtsd_f64(_mm_add_sd(lo, sh));
}

// Dot product with four independent accumulators; remainder handled scalar.
inline double dot_impl(const double* a, const double* b, std::size_t n) {
    __m256d acc0 = _mm256_setzero_pd();
    __m256d acc1 = _mm256_setzero_pd();
    __m256d acc2 = _mm256_setzero_pd();
    __m256d acc3 = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 16 <= n; i += 16) {
        acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
        acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 4), _mm256_loadu_pd(b + i + 4), acc1);
        acc2 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 8), _mm256_loadu_pd(b + i + 8), acc2);
        acc3 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 12), _mm256_loadu_pd(b + i + 12), acc3);
    }
    for (; i + 4 <= n; i += 4) {
        acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
    }
    acc0 = _mm256_add_pd(_mm256_add_pd(acc0, acc1), _mm256_add_pd(acc2, acc3));
    double r = hsum(acc0);
    for (; i < n; ++i) r += a[i] * b[i];
    return r;
}

void matmul_nt_avx2(const double* a, const double* b, double* c, std::size_t m,
                    std::size_t n, std::size_t k, bool accumulate) {
    for (std::size_t i = 0; i < m; ++i) {
        const double* ai = a + i * k;
        for (std::size_t j = 0; j < n; ++j) {
            const double r = dot_impl(ai, b + j * k, k);
            if (accumulate) {
                c[i * n + j] += r;
            } else {
                c[i * n + j] = r;
            }
        }
    }
}

// Row-update form: c_i += a[i,p] * b_p for each p; contiguous vector FMA
// over columns.
inline void row_fma(double* ci, const double* bp, double av, std::size_t n) {
    const __m256d va = _mm256_set1_pd(av);
    std::size_t j = 0;
    for (; j + 8 <= n; j += 8) {
        _mm256_storeu_pd(ci + j, _mm256_fmadd_pd(va, _mm256_loadu_pd(bp + j),
                                                 _mm256_loadu_pd(ci + j)));
        _mm256_storeu_pd(ci + j + 4, _mm256_fmadd_pd(va, _mm256_loadu_pd(bp + j + 4),
                                                     _mm256_loadu_pd(ci + j + 4)));
    }
    for (; j + 4 <= n; j += 4) {
        _mm256_storeu_pd(ci + j, _mm256_fmadd_pd(va, _mm256_loadu_pd(bp + j),
                                                 _mm256_loadu_pd(ci + j)));
    }
    for (; j < n; ++j) ci[j] += av * bp[j];
}

void matmul_nn_avx2(const double* a, const double* b, double* c, std::size_t m,
                    std::size_t n, std::size_t k, bool accumulate) {
    for (std::size_t i = 0; i < m; ++i) {
        double* ci = c + i * n;
        if (!accumulate) std::memset(ci, 0, n * sizeof(double));
        for (std::size_t p = 0; p < k; ++p) {
            row_fma(ci, b + p * n, a[i * k + p], n);
        }
    }
}

void matmul_tn_avx2(const double* a, const double* b, double* c, std::size_t m,
                    std::size_t n, std::size_t k, bool accumulate) {
    if (!accumulate) std::memset(c, 0, m * n * sizeof(double));
    for (std::size_t p = 0; p < k; ++p) {
        const double* ap = a + p * m;
        const double* bp = b + p * n;
        for (std::size_t i = 0; i < m; ++i) {
            row_fma(c + i * n, bp, ap[i], n);
        }
    }
}

double dot_avx2(const double* a, const double* b, std::size_t n) {
    return dot_impl(a, b, n);
}

double sum_avx2(const double* a, std::size_t n) {
    __m256d acc0 = _mm256_setzero_pd();
    __m256d acc1 = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        acc0 = _mm256_add_pd(acc0, _mm256_loadu_pd(a + i));
        acc1 = _mm256_add_pd(acc1, _mm256_loadu_pd(a + i + 4));
    }
    for (; i + 4 <= n; i += 4) acc0 = _mm256_add_pd(acc0, _mm256_loadu_pd(a + i));
    double r = hsum(_mm256_add_pd(acc0, acc1));
    for (; i < n; ++i) r += a[i];
    return r;
}

void axpy_avx2(double alpha, const double* x, double* y, std::size_t n) {
    const __m256d va = _mm256_set1_pd(alpha);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        _mm256_storeu_pd(y + i, _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i),
                                                _mm256_loadu_pd(y + i)));
    }
    for (; i < n; ++i) y[i] += alpha * x[i];
}

void add_avx2(const double* a, const double* b, double* c, std::size_t n) {
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        _mm256_storeu_pd(c + i, _mm256_add_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)));
    }
    for (; i < n; ++i) c[i] = a[i] + b[i];
}

void mul_avx2(const double* a, const double* b, double* c, std::size_t n) {
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        _mm256_storeu_pd(c + i, _mm256_mul_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)));
    }
    for (; i < n; ++i) c[i] = a[i] * b[i];
}

void scale_avx2(const double* a, double alpha, double* c, std::size_t n) {
    const __m256d va = _mm256_set1_pd(alpha);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        _mm256_storeu_pd(c + i, _mm256_mul_pd(va, _mm256_loadu_pd(a + i)));
    }
    for (; i < n; ++i) c[i] = a[i] * alpha;
}

void relu_fwd_avx2(const double* x, double* y, std::size_t n) {
    const __m256d zero = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        _mm256_storeu_pd(y + i, _mm256_max_pd(_mm256_loadu_pd(x + i), zero));
    }
    for (; i < n; ++i) y[i] = x[i] > 0.0 ? x[i] : 0.0;
}

void relu_bwd_avx2(const double* x, const double* gy, double* gx, std::size_t n) {
    const __m256d zero = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d mask = _mm256_cmp_pd(_mm256_loadu_pd(x + i), zero, _CMP_GT_OQ);
        const __m256d g = _mm256_and_pd(mask, _mm256_loadu_pd(gy + i));
        _mm256_storeu_pd(gx + i, _mm256_add_pd(_mm256_loadu_pd(gx + i), g));
    }
    for (; i < n; ++i) {
        if (x[i] > 0.0) gx[i] += gy[i];
    }
}

void leaky_fwd_avx2(const double* x, double* y, double slope, std::size_t n) {
    const __m256d zero = _mm256_setzero_pd();
    const __m256d vs = _mm256_set1_pd(slope);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d v = _mm256_loadu_pd(x + i);
        const __m256d mask = _mm256_cmp_pd(v, zero, _CMP_GT_OQ);
        _mm256_storeu_pd(y + i, _mm256_blendv_pd(_mm256_mul_pd(v, vs), v, mask));
    }
    for (; i < n; ++i) y[i] = x[i] > 0.0 ? x[i] : slope * x[i];
}

void leaky_bwd_avx2(const double* x, const double* gy, double* gx, double slope,
                    std::size_t n) {
    const __m256d zero = _mm256_setzero_pd();
    const __m256d vs = _mm256_set1_pd(slope);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d g = _mm256_loadu_pd(gy + i);
        const __m256d mask = _mm256_cmp_pd(_mm256_loadu_pd(x + i), zero, _CMP_GT_OQ);
        const __m256d gsel = _mm256_blendv_pd(_mm256_mul_pd(g, vs), g, mask);
        _mm256_storeu_pd(gx + i, _mm256_add_pd(_mm256_loadu_pd(gx + i), gsel));
    }
    for (; i < n; ++i) gx[i] += x[i] > 0.0 ? gy[i] : slope * gy[i];
}

void adam_avx2(double* p, const double* g, double* m, double* v, std::size_t n,
               double lr, double beta1, double beta2, double eps, double bc1,
               double bc2) {
    const __m256d vb1 = _mm256_set1_pd(beta1);
    const __m256d vb2 = _mm256_set1_pd(beta2);
    const __m256d v1mb1 = _mm256_set1_pd(1.0 - beta1);
    const __m256d v1mb2 = _mm256_set1_pd(1.0 - beta2);
    const __m256d vlr = _mm256_set1_pd(lr);
    const __m256d veps = _mm256_set1_pd(eps);
    const __m256d vbc1 = _mm256_set1_pd(bc1);
    const __m256d vbc2 = _mm256_set1_pd(bc2);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d gi = _mm256_loadu_pd(g + i);
        __m256d mi = _mm256_loadu_pd(m + i);
        __m256d vi = _mm256_loadu_pd(v + i);
        mi = _mm256_fmadd_pd(v1mb1, gi, _mm256_mul_pd(vb1, mi));
        vi = _mm256_fmadd_pd(v1mb2, _mm256_mul_pd(gi, gi), _mm256_mul_pd(vb2, vi));
        _mm256_storeu_pd(m + i, mi);
        _mm256_storeu_pd(v + i, vi);
        const __m256d mhat = _mm256_div_pd(mi, vbc1);
        const __m256d vhat = _mm256_div_pd(vi, vbc2);
        const __m256d denom = _mm256_add_pd(_mm256_sqrt_pd(vhat), veps);
        const __m256d upd = _mm256_div_pd(_mm256_mul_pd(vlr, mhat), denom);
        _mm256_storeu_pd(p + i, _mm256_sub_pd(_mm256_loadu_pd(p + i), upd));
    }
    for (; i < n; ++i) {
        m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
        v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i];
        p[i] -= lr * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + eps);
    }
}

}  // namespace

const KernelTable& avx2_table() {
    static const KernelTable table = {
        "avx2",         matmul_nt_avx2, matmul_nn_avx2, matmul_tn_avx2,
        dot_avx2,       sum_avx2,       axpy_avx2,      add_avx2,
        mul_avx2,       scale_avx2,     relu_fwd_avx2,  relu_bwd_avx2,
        leaky_fwd_avx2, leaky_bwd_avx2, adam_avx2,
    };
    return table;
}

}  // namespace cardioforge::kernels
