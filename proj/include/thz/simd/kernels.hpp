#pragma once

// Data-parallel inner loops shared by the sounder and the neural field.
//
// Every kernel has a scalar reference implementation and, on x86-64 builds,
// an AVX2/FMA variant. The active table is chosen once at first use from the
// CPU feature bits; THZ_SIMD=scalar in the environment forces the reference
// path. Variants agree to rounding (see tests/test_simd.cpp), and a given
// variant is bit-reproducible run to run.

#include <complex>
#include <cstddef>
#include <span>
#include <string_view>

namespace thz::simd {

enum class Isa { Scalar, Avx2 };

std::string_view isa_name(Isa isa);

struct KernelTable {
    Isa isa;
    /// sum_i a[i] * b[i]
    double (*dot)(const double* a, const double* b, std::size_t n);
    /// y[i] += alpha * x[i]
    void (*axpy)(double alpha, const double* x, double* y, std::size_t n);
    /// y[i] += alpha * x[i] over interleaved complex data
    void (*caxpy)(std::complex<double> alpha, const std::complex<double>* x,
                  std::complex<double>* y, std::size_t n);
    /// out[i] = |x[i]|^2
    void (*abs2)(const std::complex<double>* x, double* out, std::size_t n);
    /// Adaptive-moment parameter update, elementwise over one parameter block.
    void (*adam_step)(double* param, const double* grad, double* m, double* v, std::size_t n,
                      double lr_t, double beta1, double beta2, double eps);
};

/// Table selected for this process.
const KernelTable& active();

/// Table for a specific ISA; returns nullptr when it was not compiled in or
/// the CPU cannot run it.
const KernelTable* table_for(Isa isa);

// Span conveniences over the active table.

inline double dot(std::span<const double> a, std::span<const double> b) {
    return active().dot(a.data(), b.data(), a.size());
}

inline void axpy(double alpha, std::span<const double> x, std::span<double> y) {
    active().axpy(alpha, x.data(), y.data(), x.size());
}

inline void caxpy(std::complex<double> alpha, std::span<const std::complex<double>> x,
                  std::span<std::complex<double>> y) {
    active().caxpy(alpha, x.data(), y.data(), x.size());
}

inline void abs2(std::span<const std::complex<double>> x, std::span<double> out) {
    active().abs2(x.data(), out.data(), x.size());
}

namespace detail {
extern const KernelTable kScalarTable;
#if defined(THZ_HAVE_AVX2_KERNELS)
extern const KernelTable kAvx2Table;
#endif
}  // namespace detail

}  // namespace thz::simd
