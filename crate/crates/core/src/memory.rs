//! Allocator tuning for frame-sized buffers.

/// Keeps freed memory in the process heap so the ~200 MB frame buffers
/// allocated by every trial reuse resident pages instead of faulting in
/// fresh ones. A no-op outside glibc.
pub fn retain_freed_memory() {
    #[cfg(all(target_os = "linux", target_env = "gnu"))]
    // SAFETY: mallopt only adjusts allocator parameters and is thread-safe.
    unsafe {
        libc::mallopt(libc::M_MMAP_MAX, 0);
        libc::mallopt(libc::M_TRIM_THRESHOLD, i32::MAX);
    }
}
