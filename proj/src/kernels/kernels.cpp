#include "cardioforge/kernels.hpp"

#include <atomic>
#include <cstdlib>
#include <cstring>

#include "cardioforge/errors.hpp"

namespace cardioforge::kernels {
namespace {

std::atomic<const KernelTable*> g_active{nullptr};
std::atomic<Backend> g_selected{Backend::kAuto};

Backend env_backend() {
    const char* env = std::getenv("CARDIOFORGE_KERNELS");
    if (env == nullptr || std::strcmp(env, "auto") == 0) return Backend::kAuto;
    if (std::strcmp(env, "scalar") == 0) return Backend::kScalar;
    if (std::strcmp(env, "avx2") == 0) return Backend::kAvx2;
    throw InputError(std::string("CARDIOFORGE_KERNELS must be scalar, avx2 or auto; got '") +
                     env + "'");
}

const KernelTable* resolve(Backend b) {
    if (b == Backend::kAuto) {
        b = env_backend();
    }
    switch (b) {
        case Backend::kScalar:
            g_selected.store(Backend::kScalar);
            return &scalar_table();
        case Backend::kAvx2:
            if (!avx2_available()) {
                throw InputError("AVX2 kernels requested but the CPU lacks AVX2/FMA");
            }
            g_selected.store(Backend::kAvx2);
            return &avx2_table();
        case Backend::kAuto:
        default:
            if (avx2_available()) {
                g_selected.store(Backend::kAvx2);
                return &avx2_table();
            }
            g_selected.store(Backend::kScalar);
            return &scalar_table();
    }
}

}  // namespace

bool avx2_available() {
#if defined(__x86_64__) || defined(__i386__)
    return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
    return false;
#endif
}

void select_backend(Backend b) { g_active.store(resolve(b)); }

Backend selected_backend() {
    if (g_active.load() == nullptr) select_backend(Backend::kAuto);
    return g_selected.load();
}

const KernelTable& active() {
    const KernelTable* t = g_active.load();
    if (t == nullptr) {
        select_backend(Backend::kAuto);
        t = g_active.load();
    }
    return *t;
}

}  // namespace cardioforge::kernels
