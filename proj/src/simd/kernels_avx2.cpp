#include "adhops/simd/kernels.hpp"

// AVX2 + FMA variants. One __m256d holds two interleaved complex doubles
// [re0, im0, re1, im1]. This translation unit is compiled with -mavx2 -mfma;
// nothing here may run before the dispatcher has checked CPUID.

#if defined(ADHOPS_HAVE_AVX2)

#include <immintrin.h>

namespace adhops::simd {
namespace {

// (a * b) for two packed complex numbers.
inline __m256d cmul(__m256d a, __m256d b) {
    const __m256d b_re = _mm256_movedup_pd(b);         // br0 br0 br1 br1
    const __m256d b_im = _mm256_permute_pd(b, 0xF);    // bi0 bi0 bi1 bi1
    const __m256d a_sw = _mm256_permute_pd(a, 0x5);    // ai0 ar0 ai1 ar1
    return _mm256_fmaddsub_pd(a, b_re, _mm256_mul_pd(a_sw, b_im));
}

// acc + a * b
inline __m256d cfma(__m256d acc, __m256d a, __m256d b) {
    return _mm256_add_pd(acc, cmul(a, b));
}

inline __m256d broadcast(cplx a) {
    return _mm256_setr_pd(a.real(), a.imag(), a.real(), a.imag());
}

inline __m256d load2(const cplx* p) { return _mm256_loadu_pd(reinterpret_cast<const double*>(p)); }
inline void store2(cplx* p, __m256d v) { _mm256_storeu_pd(reinterpret_cast<double*>(p), v); }

inline cplx scalar_mul(cplx a, cplx b) {
    return {a.real() * b.real() - a.imag() * b.imag(), a.real() * b.imag() + a.imag() * b.real()};
}

void diag_mul(cplx* y, const cplx* d, cplx shift, const cplx* x, std::size_t n) {
    const __m256d s = broadcast(shift);
    std::size_t i = 0;
    for (; i + 2 <= n; i += 2) store2(y + i, cmul(_mm256_add_pd(load2(d + i), s), load2(x + i)));
    for (; i < n; ++i) y[i] = scalar_mul(d[i] + shift, x[i]);
}

void axpy(cplx* y, cplx a, const cplx* x, std::size_t n) {
    const __m256d av = broadcast(a);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        store2(y + i, cfma(load2(y + i), av, load2(x + i)));
        store2(y + i + 2, cfma(load2(y + i + 2), av, load2(x + i + 2)));
    }
    for (; i + 2 <= n; i += 2) store2(y + i, cfma(load2(y + i), av, load2(x + i)));
    for (; i < n; ++i) y[i] += scalar_mul(a, x[i]);
}

void stage(cplx* out, const cplx* x, double h, const cplx* k, std::size_t n) {
    const __m256d hv = _mm256_set1_pd(h);
    std::size_t i = 0;
    for (; i + 2 <= n; i += 2) store2(out + i, _mm256_fmadd_pd(hv, load2(k + i), load2(x + i)));
    for (; i < n; ++i) out[i] = x[i] + h * k[i];
}

void rk4_combine(cplx* y, const cplx* k1, const cplx* k2, const cplx* k3, const cplx* k4,
                 double h, std::size_t n) {
    const __m256d w = _mm256_set1_pd(h / 6.0);
    const __m256d two = _mm256_set1_pd(2.0);
    std::size_t i = 0;
    for (; i + 2 <= n; i += 2) {
        __m256d s = _mm256_add_pd(load2(k1 + i), load2(k4 + i));
        s = _mm256_fmadd_pd(two, _mm256_add_pd(load2(k2 + i), load2(k3 + i)), s);
        store2(y + i, _mm256_fmadd_pd(w, s, load2(y + i)));
    }
    for (; i < n; ++i) y[i] += (h / 6.0) * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
}

inline double hsum(__m256d v) {
    const __m128d lo = _mm256_castpd256_pd128(v);
    const __m128d hi = _mm256_extractf128_pd(v, 1);
    const __m128d s = _mm_add_pd(lo, hi);
    return _mm_cvtsd_f64(_mm_add_sd(s, _mm_unpackhi_pd(s, s)));
}

double norm2(const cplx* x, std::size_t n) {
    __m256d acc0 = _mm256_setzero_pd(), acc1 = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d a = load2(x + i), b = load2(x + i + 2);
        acc0 = _mm256_fmadd_pd(a, a, acc0);
        acc1 = _mm256_fmadd_pd(b, b, acc1);
    }
    for (; i + 2 <= n; i += 2) {
        const __m256d a = load2(x + i);
        acc0 = _mm256_fmadd_pd(a, a, acc0);
    }
    double s = hsum(_mm256_add_pd(acc0, acc1));
    for (; i < n; ++i) s += std::norm(x[i]);
    return s;
}

cplx dotc(const cplx* x, const cplx* y, std::size_t n) {
    // re += xr*yr + xi*yi ; im += xr*yi - xi*yr
    __m256d acc_re = _mm256_setzero_pd(), acc_im = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 2 <= n; i += 2) {
        const __m256d a = load2(x + i), b = load2(y + i);
        acc_re = _mm256_fmadd_pd(a, b, acc_re);                          // xr*yr, xi*yi
        acc_im = _mm256_fmadd_pd(a, _mm256_permute_pd(b, 0x5), acc_im);  // xr*yi, xi*yr
    }
    alignas(32) double re[4], im[4];
    _mm256_store_pd(re, acc_re);
    _mm256_store_pd(im, acc_im);
    double sr = re[0] + re[1] + re[2] + re[3];
    double si = (im[0] - im[1]) + (im[2] - im[3]);
    for (; i < n; ++i) {
        sr += x[i].real() * y[i].real() + x[i].imag() * y[i].imag();
        si += x[i].real() * y[i].imag() - x[i].imag() * y[i].real();
    }
    return {sr, si};
}

void csr_matvec_add(cplx* y, const cplx* x, const std::int32_t* rowptr, const std::int32_t* col,
                    const cplx* val, std::size_t nrows) {
    for (std::size_t r = 0; r < nrows; ++r) {
        std::int32_t k = rowptr[r];
        const std::int32_t end = rowptr[r + 1];
        __m256d acc = _mm256_setzero_pd();
        for (; k + 2 <= end; k += 2) {
            const __m256d xv = _mm256_insertf128_pd(
                _mm256_castpd128_pd256(_mm_loadu_pd(reinterpret_cast<const double*>(x + col[k]))),
                _mm_loadu_pd(reinterpret_cast<const double*>(x + col[k + 1])), 1);
            acc = cfma(acc, load2(val + k), xv);
        }
        const __m128d lo = _mm256_castpd256_pd128(acc);
        const __m128d hi = _mm256_extractf128_pd(acc, 1);
        alignas(16) double s[2];
        _mm_store_pd(s, _mm_add_pd(lo, hi));
        cplx sum{s[0], s[1]};
        for (; k < end; ++k) sum += scalar_mul(val[k], x[col[k]]);
        y[r] += sum;
    }
}

// Fused per-auxiliary loop. State blocks are short (a few to a few hundred
// entries), so everything is inlined here instead of calling the kernels above.
void hierarchy_apply(const HierarchyView& v, const cplx* x, cplx* y) {
    const std::size_t ns = v.ns;
    const std::size_t ns2 = ns & ~std::size_t{1};
    for (std::size_t a = 0; a < v.na; ++a) {
        cplx* ya = y + a * ns;
        const cplx* xa = x + a * ns;
        const cplx shift = -v.kgamma[a];
        const __m256d sv = broadcast(shift);
        for (std::size_t i = 0; i < ns2; i += 2) store2(ya + i, cmul(_mm256_add_pd(load2(v.diag + i), sv), load2(xa + i)));
        if (ns2 < ns) ya[ns2] = scalar_mul(v.diag[ns2] + shift, xa[ns2]);
        if (v.h_rowptr != nullptr) {
            for (std::size_t r = 0; r < ns; ++r) {
                cplx acc{0.0, 0.0};
                for (std::int32_t k = v.h_rowptr[r]; k < v.h_rowptr[r + 1]; ++k) acc += scalar_mul(v.h_val[k], xa[v.h_col[k]]);
                ya[r] += acc;
            }
        }
        for (std::uint32_t e = v.lower_offset[a]; e < v.lower_offset[a + 1]; ++e) {
            const LowerEdge& edge = v.lower[e];
            ya[edge.pos] += scalar_mul(edge.coef, x[edge.src * ns + static_cast<std::size_t>(edge.pos)]);
        }
        for (std::uint32_t e = v.raise_offset[a]; e < v.raise_offset[a + 1]; ++e) {
            const RaiseEdge& edge = v.raise[e];
            const cplx* src = x + static_cast<std::size_t>(edge.src) * ns;
            const cplx sc = v.raise_scale[edge.mode];
            const __m256d av = broadcast(sc);
            for (std::size_t i = 0; i < ns2; i += 2) store2(ya + i, cfma(load2(ya + i), av, load2(src + i)));
            if (ns2 < ns) ya[ns2] += scalar_mul(sc, src[ns2]);
            if (edge.pos >= 0) ya[edge.pos] -= scalar_mul(edge.coef, src[edge.pos]);
        }
    }
}

}  // namespace

const KernelTable* avx2_kernels() {
    static const KernelTable table{Isa::avx2, diag_mul, axpy,           stage,          rk4_combine,
                                   norm2,     dotc,     csr_matvec_add, hierarchy_apply};
    static const bool supported = __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
    return supported ? &table : nullptr;
}

}  // namespace adhops::simd

#else

namespace adhops::simd {
const KernelTable* avx2_kernels() { return nullptr; }
}  // namespace adhops::simd

#endif
