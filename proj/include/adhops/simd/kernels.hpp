#pragma once

// Complex-double inner loops used by the hierarchy integrator.
//
// Every kernel has a scalar reference implementation and, on x86-64, an
// AVX2+FMA variant. The active table is picked once at startup from CPUID;
// set ADHOPS_ISA=scalar in the environment (or call set_active_isa) to force
// the reference path. Results of the two paths agree to rounding (FMA
// contraction changes the last bits), never bit-for-bit.

#include <complex>
#include <cstddef>
#include <cstdint>
#include <string_view>

namespace adhops::simd {

using cplx = std::complex<double>;

enum class Isa { scalar, avx2 };

// dst[pos] += coef * src[pos]
struct LowerEdge {
    std::uint32_t src;
    std::int32_t pos;
    cplx coef;
};

// dst += scale[mode] * src;  dst[pos] -= coef * src[pos]  (pos < 0: no second term)
struct RaiseEdge {
    std::uint32_t src;
    std::uint32_t mode;
    std::int32_t pos;
    cplx coef;
};

// Read-only view of one hierarchy derivative: aux-major blocks of ns states.
//   y_a = (diag - kgamma[a]) x_a + H x_a + lower terms + raise terms
struct HierarchyView {
    std::size_t ns = 0, na = 0;
    const cplx* diag = nullptr;
    const cplx* kgamma = nullptr;
    const std::int32_t* h_rowptr = nullptr;  // null when H has no entries
    const std::int32_t* h_col = nullptr;
    const cplx* h_val = nullptr;
    const std::uint32_t* lower_offset = nullptr;
    const LowerEdge* lower = nullptr;
    const std::uint32_t* raise_offset = nullptr;
    const RaiseEdge* raise = nullptr;
    const cplx* raise_scale = nullptr;  // per mode
};

struct KernelTable {
    Isa isa;
    // y[i] = (d[i] + shift) * x[i]
    void (*diag_mul)(cplx* y, const cplx* d, cplx shift, const cplx* x, std::size_t n);
    // y[i] += a * x[i]
    void (*axpy)(cplx* y, cplx a, const cplx* x, std::size_t n);
    // out[i] = x[i] + h * k[i]   (h real)
    void (*stage)(cplx* out, const cplx* x, double h, const cplx* k, std::size_t n);
    // y[i] += h/6 * (k1 + 2 k2 + 2 k3 + k4)
    void (*rk4_combine)(cplx* y, const cplx* k1, const cplx* k2, const cplx* k3,
                        const cplx* k4, double h, std::size_t n);
    // sum |x|^2
    double (*norm2)(const cplx* x, std::size_t n);
    // sum conj(x) y
    cplx (*dotc)(const cplx* x, const cplx* y, std::size_t n);
    // y[r] += sum_k val[k] * x[col[k]] over k in [rowptr[r], rowptr[r+1])
    void (*csr_matvec_add)(cplx* y, const cplx* x, const std::int32_t* rowptr,
                           const std::int32_t* col, const cplx* val, std::size_t nrows);
    // y = full hierarchy derivative described by v
    void (*hierarchy_apply)(const HierarchyView& v, const cplx* x, cplx* y);
};

const KernelTable& scalar_kernels();
// nullptr when the binary was built without AVX2 support or the CPU lacks it.
const KernelTable* avx2_kernels();

// Kernel table used by the library.
const KernelTable& active();
void set_active_isa(Isa isa);  // throws std::runtime_error if unavailable
std::string_view isa_name(Isa isa);

}  // namespace adhops::simd
