#include <cmath>
#include <cstring>

#include "cardioforge/kernels.hpp"

// Reference kernels. Plain loops, one accumulator, no reordering: these
// define the semantics the SIMD variants are tested against.

namespace cardioforge::kernels {
namespace {

void matmul_nt_scalar(const double* a, const double* b, double* c, std::size_t m,
                      std::size_t n, std::size_t k, bool accumulate) {
    for (std::size_t i = 0; i < m; ++i) {
        const double* ai = a + i * k;
        for (std::size_t j = 0; j < n; ++j) {
            const double* bj = b + j * k;
            double acc = 0.0;
            for (std::size_t p = 0; p < k; ++p) acc += ai[p] * bj[p];
            if (accumulate) {
                c[i * n + j] += acc;
            } else {
                c[i * n + j] = acc;
            }
        }
    }
}

void matmul_nn_scalar(const double* a, const double* b, double* c, std::size_t m,
                      std::size_t n, std::size_t k, bool accumulate) {
    for (std::size_t i = 0; i < m; ++i) {
        double* ci = c + i * n;
        if (!accumulate) std::memset(ci, 0, n * sizeof(double));
        for (std::size_t p = 0; p < k; ++p) {
            const double av = a[i * k + p];
            const double* bp = b + p * n;
            for (std::size_t j = 0; j < n; ++j) ci[j] += av * bp[j];
        }
    }
}

void matmul_tn_scalar(const double* a, const double* b, double* c, std::size_t m,
                      std::size_t n, std::size_t k, bool accumulate) {
    if (!accumulate) std::memset(c, 0, m * n * sizeof(double));
    for (std::size_t p = 0; p < k; ++p) {
        const double* ap = a + p * m;
        const double* bp = b + p * n;
        for (std::size_t i = 0; i < m; ++i) {
            const double av = ap[i];
            double* ci = c + i * n;
            for (std::size_t j = 0; j < n; ++j) ci[j] += av * bp[j];
        }
    }
}

double dot_scalar(const double* a, const double* b, std::size_t n) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += a[i] * b[i];
    return acc;
}

double sum_scalar(const double* a, std::size_t n) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += a[i];
    return acc;
}

void axpy_scalar(double alpha, const double* x, double* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

void add_scalar_k(const double* a, const double* b, double* c, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) c[i] = a[i] + b[i];
}

void mul_scalar_k(const double* a, const double* b, double* c, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) c[i] = a[i] * b[i];
}

void scale_scalar(const double* a, double alpha, double* c, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) c[i] = a[i] * alpha;
}

void relu_fwd_scalar(const double* x, double* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] = x[i] > 0.0 ? x[i] : 0.0;
}

void relu_bwd_scalar(const double* x, const double* gy, double* gx, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) {
        if (x[i] > 0.0) gx[i] += gy[i];
    }
}

void leaky_fwd_scalar(const double* x, double* y, double slope, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] = x[i] > 0.0 ? x[i] : slope * x[i];
}

void leaky_bwd_scalar(const double* x, const double* gy, double* gx, double slope,
                      std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) gx[i] += x[i] > 0.0 ? gy[i] : slope * gy[i];
}

void adam_scalar(double* p, const double* g, double* m, double* v, std::size_t n,
                 double lr, double beta1, double beta2, double eps, double bc1,
                 double bc2) {
    for (std::size_t i = 0; i < n; ++i) {
        m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
        v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i];
        const double mhat = m[i] / bc1;
        const double vhat = v[i] / bc2;
        p[i] -= lr * mhat / (std::sqrt(vhat) + eps);
    }
}

}  // namespace

const KernelTable& scalar_table() {
    static const KernelTable table = {
        "scalar",        matmul_nt_scalar, matmul_nn_scalar, matmul_tn_scalar,
        dot_scalar,      sum_scalar,       axpy_scalar,      add_scalar_k,
        mul_scalar_k,    scale_scalar,     relu_fwd_scalar,  relu_bwd_scalar,
        leaky_fwd_scalar, leaky_bwd_scalar, adam_scalar,
    };
    return table;
}

}  // namespace cardioforge::kernels
