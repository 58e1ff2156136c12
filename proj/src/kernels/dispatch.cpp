#include "kernels_internal.hpp"

#include <atomic>
#include <cstdlib>
#include <string_view>

namespace scalevo::kernels {
namespace {

bool cpu_has_avx2() {
#if defined(SCALEVO_HAVE_AVX2) && (defined(__GNUC__) || defined(__clang__))
    __builtin_cpu_init();
    return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
    return false;
#endif
}

const KernelTable* detect() {
    if (const char* env = std::getenv("SCALEVO_SIMD"); env && std::string_view(env) == "scalar") {
        return &scalar_table();
    }
    if (const KernelTable* t = avx2_table()) return t;
    return &scalar_table();
}

std::atomic<const KernelTable*>& slot() {
    static std::atomic<const KernelTable*> current{detect()};
    return current;
}

}  // namespace

void PointsSoA::reserve(std::size_t n) {
    x1.reserve(n);
    y1.reserve(n);
    x2.reserve(n);
    y2.reserve(n);
}

void PointsSoA::push(double ax, double ay, double bx, double by) {
    x1.push_back(ax);
    y1.push_back(ay);
    x2.push_back(bx);
    y2.push_back(by);
}

const KernelTable* avx2_table() {
#if defined(SCALEVO_HAVE_AVX2)
    static const bool supported = cpu_has_avx2();
    return supported ? &avx2_table_impl() : nullptr;
#else
    return nullptr;
#endif
}

const KernelTable& active() { return *slot().load(std::memory_order_acquire); }

bool force_backend(Backend backend) {
    const KernelTable* table = backend == Backend::Scalar ? &scalar_table() : avx2_table();
    if (!table) return false;
    slot().store(table, std::memory_order_release);
    return true;
}

Backend active_backend() {
    return &active() == &scalar_table() ? Backend::Scalar : Backend::Avx2;
}

}  // namespace scalevo::kernels
