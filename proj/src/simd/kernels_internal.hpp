#pragma once

#include "fusionbiopsy/simd/kernels.hpp"

namespace fusionbiopsy::simd::detail {

#if defined(FUSIONBIOPSY_HAVE_AVX2)
const KernelTable& avx2_table();
#endif
#if defined(FUSIONBIOPSY_HAVE_NEON)
const KernelTable& neon_table();
#endif

}  // namespace fusionbiopsy::simd::detail
