#include "segpipe/kernels.hpp"

#include <cstdlib>
#include <string_view>

namespace segpipe::kernels {

#if defined(SEGPIPE_HAVE_AVX2)
const KernelTable& avx2_table_unchecked() noexcept;
#endif

const KernelTable* avx2_table() noexcept {
#if defined(SEGPIPE_HAVE_AVX2)
    static const bool supported = __builtin_cpu_supports("avx2");
    return supported ? &avx2_table_unchecked() : nullptr;
#else
    return nullptr;
#endif
}

const KernelTable& active() noexcept {
    static const KernelTable& chosen = [] () -> const KernelTable& {
        const char* forced = std::getenv("SEGPIPE_SIMD");
        if (forced != nullptr && std::string_view(forced) == "scalar") {
            return scalar_table();
        }
        if (const KernelTable* vec = avx2_table()) {
            return *vec;
        }
        return scalar_table();
    }();
    return chosen;
}

}  // namespace segpipe::kernels
