#pragma once

#include <cstddef>

namespace netshock {

// Process-wide worker count used by every OpenMP region in the library.
// Reductions are organised in fixed-size blocks, so results do not depend on it.
void set_thread_count(int threads);
int thread_count();

inline constexpr std::size_t kReductionBlock = 4096;

}  // namespace netshock
