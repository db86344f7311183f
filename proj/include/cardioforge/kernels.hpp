#pragma once

#include <cstddef>

namespace cardioforge::kernels {

enum class Backend { kAuto, kScalar, kAvx2 };

/// Inner-loop arithmetic kernels behind the tensor engine. Two
/// implementations exist: a scalar reference and an AVX2+FMA variant
/// selected at runtime. Within one backend every kernel reduces in a fixed
/// order, so results are bit-reproducible run to run; across backends the
/// reduction order differs and results agree to ~1e-12 (equivalence-tested).
///
/// Matrices are dense row-major doubles. The `accumulate` flag adds into C
/// instead of overwriting it.
struct KernelTable {
    const char* name;

    /// C[m,n] = A[m,k] * B[n,k]^T
    void (*matmul_nt)(const double* a, const double* b, double* c, std::size_t m,
                      std::size_t n, std::size_t k, bool accumulate);
    /// C[m,n] = A[m,k] * B[k,n]
    void (*matmul_nn)(const double* a, const double* b, double* c, std::size_t m,
                      std::size_t n, std::size_t k, bool accumulate);
    /// C[m,n] = A[k,m]^T * B[k,n]
    void (*matmul_tn)(const double* a, const double* b, double* c, std::size_t m,
                      std::size_t n, std::size_t k, bool accumulate);

    double (*dot)(const double* a, const double* b, std::size_t n);
    double (*sum)(const double* a, std::size_t n);
    /// y += alpha * x
    void (*axpy)(double alpha, const double* x, double* y, std::size_t n);
    void (*add)(const double* a, const double* b, double* c, std::size_t n);
    void (*mul)(const double* a, const double* b, double* c, std::size_t n);
    void (*scale)(const double* a, double alpha, double* c, std::size_t n);

    void (*relu_fwd)(const double* x, double* y, std::size_t n);
    /// gx += gy where x > 0
    void (*relu_bwd)(const double* x, const double* gy, double* gx, std::size_t n);
    void (*leaky_relu_fwd)(const double* x, double* y, double slope, std::size_t n);
    void (*leaky_relu_bwd)(const double* x, const double* gy, double* gx, double slope,
                           std::size_t n);

    /// In-place Adam update with precomputed bias corrections
    /// bc1 = 1 - beta1^t, bc2 = 1 - beta2^t.
    void (*adam_update)(double* p, const double* g, double* m, double* v, std::size_t n,
                        double lr, double beta1, double beta2, double eps, double bc1,
                        double bc2);
};

const KernelTable& scalar_table();
bool avx2_available();
const KernelTable& avx2_table();

/// Pick the backend. kAuto honours CARDIOFORGE_KERNELS (scalar|avx2|auto)
/// and otherwise takes AVX2 when the CPU supports it.
void select_backend(Backend b);
Backend selected_backend();
const KernelTable& active();

}  // namespace cardioforge::kernels
