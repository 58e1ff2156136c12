#pragma once

#include "scalevo/kernels/kernels.hpp"

namespace scalevo::kernels {

// Homogeneous coordinates with |w| below this map to infinity.
inline constexpr double kMinHomogeneous = 1e-12;

#if defined(SCALEVO_HAVE_AVX2)
const KernelTable& avx2_table_impl();
#endif

}  // namespace scalevo::kernels
