// Compiled with -mavx2 -mfma; only reached after a runtime CPU check.
#include "thz/simd/kernels.hpp"

#include <immintrin.h>

#include <cmath>

namespace thz::simd {
namespace {

inline double hsum(__m256d v) {
    __m128d lo = _mm256_castpd256_pd128(v);
    __m128d hi = _mm256_extractf128_pd(v, 1);
    lo = _mm_add_pd(lo, hi);
    __m128d sh = _mm_unpackhi_pd(lo, lo);
    return _mm_cvtsd_f64(_mm_add_sd(lo, sh));
}

double dot_avx2(const double* a, const double* b, std::size_t n) {
    __m256d acc0 = _mm256_setzero_pd();
    __m256d acc1 = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
        acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 4), _mm256_loadu_pd(b + i + 4), acc1);
    }
    if (i + 4 <= n) {
        acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
        i += 4;
    }
    double s = hsum(_mm256_add_pd(acc0, acc1));
    for (; i < n; ++i) s += a[i] * b[i];
    return s;
}

void axpy_avx2(double alpha, const double* x, double* y, std::size_t n) {
    const __m256d va = _mm256_set1_pd(alpha);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        _mm256_storeu_pd(y + i, _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
    }
    for (; i < n; ++i) y[i] += alpha * x[i];
}

// Two complex values per register, laid out [r0 i0 r1 i1].
void caxpy_avx2(std::complex<double> alpha, const std::complex<double>* x,
                std::complex<double>* y, std::size_t n) {
    const double* xd = reinterpret_cast<const double*>(x);
    double* yd = reinterpret_cast<double*>(y);
    const __m256d ar = _mm256_set1_pd(alpha.real());
    const __m256d ai = _mm256_set1_pd(alpha.imag());
    std::size_t i = 0;
    for (; i + 2 <= n; i += 2) {
        const __m256d xv = _mm256_loadu_pd(xd + 2 * i);
        const __m256d xs = _mm256_permute_pd(xv, 0b0101);  // [i0 r0 i1 r1]
        // re: ar*xr - ai*xi ; im: ar*xi + ai*xr
        const __m256d t = _mm256_fmaddsub_pd(ar, xv, _mm256_mul_pd(ai, xs));
        _mm256_storeu_pd(yd + 2 * i, _mm256_add_pd(_mm256_loadu_pd(yd + 2 * i), t));
    }
    for (; i < n; ++i) {
        const double xr = x[i].real();
        const double xi = x[i].imag();
        y[i] = {y[i].real() + (alpha.real() * xr - alpha.imag() * xi),
                y[i].imag() + (alpha.real() * xi + alpha.imag() * xr)};
    }
}

void abs2_avx2(const std::complex<double>* x, double* out, std::size_t n) {
    const double* xd = reinterpret_cast<const double*>(x);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d a = _mm256_loadu_pd(xd + 2 * i);      // r0 i0 r1 i1
        const __m256d b = _mm256_loadu_pd(xd + 2 * i + 4);  // r2 i2 r3 i3
        const __m256d sa = _mm256_mul_pd(a, a);
        const __m256d sb = _mm256_mul_pd(b, b);
        const __m256d h = _mm256_hadd_pd(sa, sb);            // s0 s2 s1 s3
        _mm256_storeu_pd(out + i, _mm256_permute4x64_pd(h, 0b11011000));
    }
    for (; i < n; ++i) out[i] = x[i].real() * x[i].real() + x[i].imag() * x[i].imag();
}

void adam_avx2(double* param, const double* grad, double* m, double* v, std::size_t n,
               double lr_t, double beta1, double beta2, double eps) {
    const __m256d b1 = _mm256_set1_pd(beta1);
    const __m256d c1 = _mm256_set1_pd(1.0 - beta1);
    const __m256d b2 = _mm256_set1_pd(beta2);
    const __m256d c2 = _mm256_set1_pd(1.0 - beta2);
    const __m256d lr = _mm256_set1_pd(lr_t);
    const __m256d ve = _mm256_set1_pd(eps);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d g = _mm256_loadu_pd(grad + i);
        const __m256d mi = _mm256_add_pd(_mm256_mul_pd(b1, _mm256_loadu_pd(m + i)), _mm256_mul_pd(c1, g));
        const __m256d vi = _mm256_add_pd(_mm256_mul_pd(b2, _mm256_loadu_pd(v + i)),
                                         _mm256_mul_pd(c2, _mm256_mul_pd(g, g)));
        _mm256_storeu_pd(m + i, mi);
        _mm256_storeu_pd(v + i, vi);
        const __m256d step = _mm256_div_pd(_mm256_mul_pd(lr, mi), _mm256_add_pd(_mm256_sqrt_pd(vi), ve));
        _mm256_storeu_pd(param + i, _mm256_sub_pd(_mm256_loadu_pd(param + i), step));
    }
    for (; i < n; ++i) {
        m[i] = beta1 * m[i] + (1.0 - beta1) * grad[i];
        v[i] = beta2 * v[i] + (1.0 - beta2) * grad[i] * grad[i];
        param[i] -= lr_t * m[i] / (std::sqrt(v[i]) + eps);
    }
}

}  // namespace

namespace detail {
const KernelTable kAvx2Table{Isa::Avx2, dot_avx2, axpy_avx2, caxpy_avx2, abs2_avx2, adam_avx2};
}

}  // namespace thz::simd
