#pragma once

namespace patchsel {

// Keeps large tensor buffers in the heap instead of fresh mmap pages; every
// conv allocates tens of megabytes and page-faulting them dominated runtime.
// No effect outside glibc. Call once at program start.
void configure_allocator();

}  // namespace patchsel
