#include "omnilab/numcore/alloc.hpp"

#include <cstdlib>

#if defined(__GLIBC__)
#include <malloc.h>
#endif

namespace omnilab::num {

void retain_freed_memory() noexcept {
#if defined(__GLIBC__)
  // Step graphs allocate and free the same large buffers each iteration;
  // mmap-backed allocations would page-fault them in again every time.
  mallopt(M_MMAP_THRESHOLD, 32 << 20);
  mallopt(M_TRIM_THRESHOLD, 1 << 30);
#endif
}

}  // namespace omnilab::num
