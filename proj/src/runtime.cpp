#include "patchsel/runtime.hpp"

#include <limits>

#if defined(__GLIBC__)
#include <malloc.h>
#endif

namespace patchsel {

void configure_allocator() {
#if defined(__GLIBC__)
  // M_MMAP_THRESHOLD is capped at 32 MB, and bigger activation buffers would
  // still be mmapped and faulted in again every step; keep everything on the heap
  mallopt(M_MMAP_MAX, 0);
  mallopt(M_TRIM_THRESHOLD, std::numeric_limits<int>::max());
#endif
}

}  // namespace patchsel
