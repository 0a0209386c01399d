#pragma once

namespace omnilab::num {

/// Keeps freed tensor buffers in the process heap instead of returning them
/// to the kernel after every training step. No-op outside glibc.
void retain_freed_memory() noexcept;

}  // namespace omnilab::num
