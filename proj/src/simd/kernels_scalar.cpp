#include "thz/simd/kernels.hpp"

#include <cmath>

namespace thz::simd {
namespace {

double dot_scalar(const double* a, const double* b, std::size_t n) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
    return s;
}

void axpy_scalar(double alpha, const double* x, double* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

void caxpy_scalar(std::complex<double> alpha, const std::complex<double>* x,
                  std::complex<double>* y, std::size_t n) {
    const double ar = alpha.real();
    const double ai = alpha.imag();
    for (std::size_t i = 0; i < n; ++i) {
        const double xr = x[i].real();
        const double xi = x[i].imag();
        y[i] = {y[i].real() + (ar * xr - ai * xi), y[i].imag() + (ar * xi + ai * xr)};
    }
}

void abs2_scalar(const std::complex<double>* x, double* out, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) {
        out[i] = x[i].real() * x[i].real() + x[i].imag() * x[i].imag();
    }
}

void adam_scalar(double* param, const double* grad, double* m, double* v, std::size_t n,
                 double lr_t, double beta1, double beta2, double eps) {
    for (std::size_t i = 0; i < n; ++i) {
        m[i] = beta1 * m[i] + (1.0 - beta1) * grad[i];
        v[i] = beta2 * v[i] + (1.0 - beta2) * grad[i] * grad[i];
        param[i] -= lr_t * m[i] / (std::sqrt(v[i]) + eps);
    }
}

}  // namespace

namespace detail {
const KernelTable kScalarTable{Isa::Scalar, dot_scalar, axpy_scalar, caxpy_scalar, abs2_scalar,
                               adam_scalar};
}

}  // namespace thz::simd
