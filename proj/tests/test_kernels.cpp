#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "cardioforge/kernels.hpp"
#include "cardioforge/rng.hpp"

using namespace cardioforge;
using kernels::KernelTable;

namespace {

std::vector<double> random_vec(Rng& rng, std::size_t n, double lo = -2.0, double hi = 2.0) {
    std::vector<double> v(n);
    for (double& x : v) x = rng.uniform(lo, hi);
    return v;
}

void check_close(const std::vector<double>& a, const std::vector<double>& b,
                 double tol = 1e-11) {
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double scale = std::max({std::abs(a[i]), std::abs(b[i]), 1.0});
        CHECK(std::abs(a[i] - b[i]) <= tol * scale);
    }
}

}  // namespace

TEST_CASE("scalar matmul_nt matches a hand-rolled triple loop") {
    Rng rng(1);
    const std::size_t m = 3, n = 4, k = 5;
    const auto a = random_vec(rng, m * k);
    const auto b = random_vec(rng, n * k);
    std::vector<double> c(m * n, 7.0);
    kernels::scalar_table().matmul_nt(a.data(), b.data(), c.data(), m, n, k, false);
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            double acc = 0.0;
            for (std::size_t p = 0; p < k; ++p) acc += a[i * k + p] * b[j * k + p];
            CHECK(c[i * n + j] == doctest::Approx(acc).epsilon(1e-14));
        }
    }
}

TEST_CASE("matmul accumulate flag adds instead of overwriting") {
    Rng rng(2);
    const std::size_t m = 2, n = 3, k = 4;
    const auto a = random_vec(rng, m * k);
    const auto b = random_vec(rng, n * k);
    std::vector<double> base(m * n, 0.5);
    std::vector<double> once = base;
    kernels::scalar_table().matmul_nt(a.data(), b.data(), once.data(), m, n, k, true);
    std::vector<double> fresh(m * n, 0.0);
    kernels::scalar_table().matmul_nt(a.data(), b.data(), fresh.data(), m, n, k, false);
    for (std::size_t i = 0; i < m * n; ++i) {
        CHECK(once[i] == doctest::Approx(0.5 + fresh[i]).epsilon(1e-14));
    }
}

TEST_CASE("avx2 kernels agree with the scalar reference") {
    if (!kernels::avx2_available()) {
        MESSAGE("AVX2 not available on this CPU; equivalence checks skipped");
        return;
    }
    const KernelTable& s = kernels::scalar_table();
    const KernelTable& a = kernels::avx2_table();
    Rng rng(3);

    // Sizes straddle the vector width so remainder lanes get exercised.
    const std::size_t sizes[] = {1, 2, 3, 4, 5, 7, 8, 15, 16, 17, 64, 129, 1000};

    SUBCASE("dot / sum / axpy / add / mul / scale") {
        for (std::size_t n : sizes) {
            const auto x = random_vec(rng, n);
            const auto y = random_vec(rng, n);
            CHECK(a.dot(x.data(), y.data(), n) ==
                  doctest::Approx(s.dot(x.data(), y.data(), n)).epsilon(1e-12));
            CHECK(a.sum(x.data(), n) ==
                  doctest::Approx(s.sum(x.data(), n)).epsilon(1e-12));

            std::vector<double> ys = y, ya = y;
            s.axpy(1.7, x.data(), ys.data(), n);
            a.axpy(1.7, x.data(), ya.data(), n);
            check_close(ys, ya);

            std::vector<double> cs(n), ca(n);
            s.add(x.data(), y.data(), cs.data(), n);
            a.add(x.data(), y.data(), ca.data(), n);
            check_close(cs, ca);
            s.mul(x.data(), y.data(), cs.data(), n);
            a.mul(x.data(), y.data(), ca.data(), n);
            check_close(cs, ca);
            s.scale(x.data(), -0.3, cs.data(), n);
            a.scale(x.data(), -0.3, ca.data(), n);
            check_close(cs, ca);
        }
    }

    SUBCASE("matmul variants") {
        const std::size_t dims[][3] = {{1, 1, 1},  {2, 3, 4},   {5, 5, 5},
                                       {7, 9, 13}, {16, 16, 16}, {3, 17, 33},
                                       {21, 6, 50}};
        for (const auto& d : dims) {
            const std::size_t m = d[0], n = d[1], k = d[2];
            for (bool acc : {false, true}) {
                const auto A = random_vec(rng, m * k);
                const auto Bnt = random_vec(rng, n * k);
                const auto Bnn = random_vec(rng, k * n);
                const auto Atn = random_vec(rng, k * m);
                auto c1 = random_vec(rng, m * n);
                auto c2 = c1;
                s.matmul_nt(A.data(), Bnt.data(), c1.data(), m, n, k, acc);
                a.matmul_nt(A.data(), Bnt.data(), c2.data(), m, n, k, acc);
                check_close(c1, c2);
                c1 = random_vec(rng, m * n);
                c2 = c1;
                s.matmul_nn(A.data(), Bnn.data(), c1.data(), m, n, k, acc);
                a.matmul_nn(A.data(), Bnn.data(), c2.data(), m, n, k, acc);
                check_close(c1, c2);
                c1 = random_vec(rng, m * n);
                c2 = c1;
                s.matmul_tn(Atn.data(), Bnn.data(), c1.data(), m, n, k, acc);
                a.matmul_tn(Atn.data(), Bnn.data(), c2.data(), m, n, k, acc);
                check_close(c1, c2);
            }
        }
    }

    SUBCASE("activations") {
        for (std::size_t n : sizes) {
            const auto x = random_vec(rng, n);
            const auto gy = random_vec(rng, n);
            std::vector<double> ys(n), ya(n);
            s.relu_fwd(x.data(), ys.data(), n);
            a.relu_fwd(x.data(), ya.data(), n);
            check_close(ys, ya);
            s.leaky_relu_fwd(x.data(), ys.data(), 0.2, n);
            a.leaky_relu_fwd(x.data(), ya.data(), 0.2, n);
            check_close(ys, ya);

            auto gs = random_vec(rng, n);
            auto ga = gs;
            s.relu_bwd(x.data(), gy.data(), gs.data(), n);
            a.relu_bwd(x.data(), gy.data(), ga.data(), n);
            check_close(gs, ga);
            gs = random_vec(rng, n);
            ga = gs;
            s.leaky_relu_bwd(x.data(), gy.data(), gs.data(), 0.2, n);
            a.leaky_relu_bwd(x.data(), gy.data(), ga.data(), 0.2, n);
            check_close(gs, ga);
        }
    }

    SUBCASE("adam update") {
        for (std::size_t n : sizes) {
            const auto g = random_vec(rng, n);
            auto p1 = random_vec(rng, n);
            auto p2 = p1;
            auto m1 = random_vec(rng, n, 0.0, 0.1);
            auto m2 = m1;
            auto v1 = random_vec(rng, n, 0.0, 0.1);
            auto v2 = v1;
            s.adam_update(p1.data(), g.data(), m1.data(), v1.data(), n, 2e-4, 0.9, 0.999,
                          1e-8, 0.1, 0.001999);
            a.adam_update(p2.data(), g.data(), m2.data(), v2.data(), n, 2e-4, 0.9, 0.999,
                          1e-8, 0.1, 0.001999);
            check_close(p1, p2);
            check_close(m1, m2);
            check_close(v1, v2);
        }
    }
}

TEST_CASE("backend selection is explicit and reported") {
    kernels::select_backend(kernels::Backend::kScalar);
    CHECK(std::string(kernels::active().name) == "scalar");
    CHECK(kernels::selected_backend() == kernels::Backend::kScalar);
    if (kernels::avx2_available()) {
        kernels::select_backend(kernels::Backend::kAvx2);
        CHECK(std::string(kernels::active().name) == "avx2");
    }
    kernels::select_backend(kernels::Backend::kAuto);
}
