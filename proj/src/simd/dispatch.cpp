#include "adhops/simd/kernels.hpp"

#include <atomic>
#include <cstdlib>
#include <stdexcept>
#include <string>

namespace adhops::simd {
namespace {

const KernelTable* detect() {
    if (const char* env = std::getenv("ADHOPS_ISA")) {
        const std::string want{env};
        if (want == "scalar") return &scalar_kernels();
        if (want == "avx2" && avx2_kernels() != nullptr) return avx2_kernels();
    }
    if (const KernelTable* t = avx2_kernels()) return t;
    return &scalar_kernels();
}

std::atomic<const KernelTable*>& slot() {
    static std::atomic<const KernelTable*> current{detect()};
    return current;
}

}  // namespace

const KernelTable& active() { return *slot().load(std::memory_order_acquire); }

void set_active_isa(Isa isa) {
    const KernelTable* t = isa == Isa::scalar ? &scalar_kernels() : avx2_kernels();
    if (t == nullptr) throw std::runtime_error("requested ISA is not available on this CPU/build");
    slot().store(t, std::memory_order_release);
}

std::string_view isa_name(Isa isa) { return isa == Isa::scalar ? "scalar" : "avx2"; }

}  // namespace adhops::simd
