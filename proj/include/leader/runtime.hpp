#pragma once

// Process-level tuning for long-running inference. Opt-in: call once from main.

#if defined(__GLIBC__)
#include <malloc.h>
#endif

namespace leader::runtime {

/// Keeps freed activation buffers in the heap instead of returning them to the
/// OS, so repeated multi-megabyte allocations stop page-faulting. No-op
/// outside glibc.
inline void retain_freed_memory() noexcept {
#if defined(__GLIBC__)
    mallopt(M_MMAP_THRESHOLD, 1 << 30);
    mallopt(M_TRIM_THRESHOLD, 1 << 30);
#endif
}

}  // namespace leader::runtime
