#include "thz/simd/kernels.hpp"

#include <cstdlib>
#include <string>

namespace thz::simd {
namespace {

bool cpu_has_avx2() {
#if defined(THZ_HAVE_AVX2_KERNELS) && (defined(__GNUC__) || defined(__clang__))
    __builtin_cpu_init();
    return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
    return false;
#endif
}

const KernelTable& select() {
    if (const char* env = std::getenv("THZ_SIMD")) {
        if (std::string(env) == "scalar") return detail::kScalarTable;
    }
    if (const KernelTable* t = table_for(Isa::Avx2)) return *t;
    return detail::kScalarTable;
}

}  // namespace

std::string_view isa_name(Isa isa) {
    switch (isa) {
        case Isa::Scalar: return "scalar";
        case Isa::Avx2: return "avx2";
    }
    return "unknown";
}

const KernelTable* table_for(Isa isa) {
    switch (isa) {
        case Isa::Scalar: return &detail::kScalarTable;
        case Isa::Avx2:
#if defined(THZ_HAVE_AVX2_KERNELS)
            if (cpu_has_avx2()) return &detail::kAvx2Table;
#endif
            return nullptr;
    }
    return nullptr;
}

const KernelTable& active() {
    static const KernelTable& table = select();
    return table;
}

}  // namespace thz::simd
