#include "adhops/simd/kernels.hpp"

// Reference kernels. Complex products are written out explicitly so the
// compiler does not route them through the C99 Annex G slow path.

namespace adhops::simd {
namespace {

inline void mul(double ar, double ai, double br, double bi, double& cr, double& ci) {
    cr = ar * br - ai * bi;
    ci = ar * bi + ai * br;
}

void diag_mul(cplx* y, const cplx* d, cplx shift, const cplx* x, std::size_t n) {
    auto* yp = reinterpret_cast<double*>(y);
    const auto* dp = reinterpret_cast<const double*>(d);
    const auto* xp = reinterpret_cast<const double*>(x);
    const double sr = shift.real(), si = shift.imag();
    for (std::size_t i = 0; i < n; ++i) {
        mul(dp[2 * i] + sr, dp[2 * i + 1] + si, xp[2 * i], xp[2 * i + 1], yp[2 * i], yp[2 * i + 1]);
    }
}

void axpy(cplx* y, cplx a, const cplx* x, std::size_t n) {
    auto* yp = reinterpret_cast<double*>(y);
    const auto* xp = reinterpret_cast<const double*>(x);
    const double ar = a.real(), ai = a.imag();
    for (std::size_t i = 0; i < n; ++i) {
        double cr, ci;
        mul(ar, ai, xp[2 * i], xp[2 * i + 1], cr, ci);
        yp[2 * i] += cr;
        yp[2 * i + 1] += ci;
    }
}

void stage(cplx* out, const cplx* x, double h, const cplx* k, std::size_t n) {
    auto* op = reinterpret_cast<double*>(out);
    const auto* xp = reinterpret_cast<const double*>(x);
    const auto* kp = reinterpret_cast<const double*>(k);
    for (std::size_t i = 0; i < 2 * n; ++i) op[i] = xp[i] + h * kp[i];
}

void rk4_combine(cplx* y, const cplx* k1, const cplx* k2, const cplx* k3, const cplx* k4,
                 double h, std::size_t n) {
    auto* yp = reinterpret_cast<double*>(y);
    const auto* a = reinterpret_cast<const double*>(k1);
    const auto* b = reinterpret_cast<const double*>(k2);
    const auto* c = reinterpret_cast<const double*>(k3);
    const auto* d = reinterpret_cast<const double*>(k4);
    const double w = h / 6.0;
    for (std::size_t i = 0; i < 2 * n; ++i) yp[i] += w * (a[i] + 2.0 * b[i] + 2.0 * c[i] + d[i]);
}

double norm2(const cplx* x, std::size_t n) {
    const auto* xp = reinterpret_cast<const double*>(x);
    double s = 0.0;
    for (std::size_t i = 0; i < 2 * n; ++i) s += xp[i] * xp[i];
    return s;
}

cplx dotc(const cplx* x, const cplx* y, std::size_t n) {
    const auto* xp = reinterpret_cast<const double*>(x);
    const auto* yp = reinterpret_cast<const double*>(y);
    double re = 0.0, im = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        re += xp[2 * i] * yp[2 * i] + xp[2 * i + 1] * yp[2 * i + 1];
        im += xp[2 * i] * yp[2 * i + 1] - xp[2 * i + 1] * yp[2 * i];
    }
    return {re, im};
}

void csr_matvec_add(cplx* y, const cplx* x, const std::int32_t* rowptr, const std::int32_t* col,
                    const cplx* val, std::size_t nrows) {
    auto* yp = reinterpret_cast<double*>(y);
    const auto* xp = reinterpret_cast<const double*>(x);
    const auto* vp = reinterpret_cast<const double*>(val);
    for (std::size_t r = 0; r < nrows; ++r) {
        double sr = 0.0, si = 0.0;
        for (std::int32_t k = rowptr[r]; k < rowptr[r + 1]; ++k) {
            const std::int32_t c = col[k];
            double cr, ci;
            mul(vp[2 * k], vp[2 * k + 1], xp[2 * c], xp[2 * c + 1], cr, ci);
            sr += cr;
            si += ci;
        }
        yp[2 * r] += sr;
        yp[2 * r + 1] += si;
    }
}

void hierarchy_apply(const HierarchyView& v, const cplx* x, cplx* y) {
    const std::size_t ns = v.ns;
    for (std::size_t a = 0; a < v.na; ++a) {
        cplx* ya = y + a * ns;
        const cplx* xa = x + a * ns;
        const cplx shift = -v.kgamma[a];
        for (std::size_t i = 0; i < ns; ++i) {
            const cplx d = v.diag[i] + shift;
            double cr, ci;
            mul(d.real(), d.imag(), xa[i].real(), xa[i].imag(), cr, ci);
            ya[i] = {cr, ci};
        }
        if (v.h_rowptr != nullptr) {
            for (std::size_t r = 0; r < ns; ++r) {
                double sr = 0.0, si = 0.0;
                for (std::int32_t k = v.h_rowptr[r]; k < v.h_rowptr[r + 1]; ++k) {
                    const cplx xv = xa[v.h_col[k]];
                    double cr, ci;
                    mul(v.h_val[k].real(), v.h_val[k].imag(), xv.real(), xv.imag(), cr, ci);
                    sr += cr;
                    si += ci;
                }
                ya[r] += cplx{sr, si};
            }
        }
        for (std::uint32_t e = v.lower_offset[a]; e < v.lower_offset[a + 1]; ++e) {
            const LowerEdge& edge = v.lower[e];
            const cplx xv = x[edge.src * ns + static_cast<std::size_t>(edge.pos)];
            double cr, ci;
            mul(edge.coef.real(), edge.coef.imag(), xv.real(), xv.imag(), cr, ci);
            ya[edge.pos] += cplx{cr, ci};
        }
        for (std::uint32_t e = v.raise_offset[a]; e < v.raise_offset[a + 1]; ++e) {
            const RaiseEdge& edge = v.raise[e];
            const cplx* src = x + static_cast<std::size_t>(edge.src) * ns;
            const cplx sc = v.raise_scale[edge.mode];
            for (std::size_t i = 0; i < ns; ++i) {
                double cr, ci;
                mul(sc.real(), sc.imag(), src[i].real(), src[i].imag(), cr, ci);
                ya[i] += cplx{cr, ci};
            }
            if (edge.pos >= 0) {
                const cplx xv = src[edge.pos];
                double cr, ci;
                mul(edge.coef.real(), edge.coef.imag(), xv.real(), xv.imag(), cr, ci);
                ya[edge.pos] -= cplx{cr, ci};
            }
        }
    }
}

}  // namespace

const KernelTable& scalar_kernels() {
    static const KernelTable table{Isa::scalar, diag_mul, axpy,           stage,          rk4_combine,
                                   norm2,       dotc,     csr_matvec_add, hierarchy_apply};
    return table;
}

}  // namespace adhops::simd
