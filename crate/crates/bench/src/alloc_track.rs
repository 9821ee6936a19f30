//! Byte-accurate allocation tracking for peak-memory measurements.
//!
//! Wraps the system allocator and keeps live/peak counters. Register it with
//! `#[global_allocator]` in the binary (the `summix` CLI and the acceptance
//! suite both do); library code can then bracket a region with
//! [`reset_peak`] and read [`peak_bytes`]. Counters are logical live bytes,
//! so allocator caching in the OS never skews a measurement.

use std::alloc::{GlobalAlloc, Layout, System};
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};

static LIVE: AtomicUsize = AtomicUsize::new(0);
static PEAK: AtomicUsize = AtomicUsize::new(0);
static ACTIVE: AtomicBool = AtomicBool::new(false);

pub struct TrackingAllocator;

impl TrackingAllocator {
    #[inline]
    fn record_alloc(size: usize) {
        ACTIVE.store(true, Ordering::Relaxed);
        let live = LIVE.fetch_add(size, Ordering::Relaxed) + size;
        PEAK.fetch_max(live, Ordering::Relaxed);
    }

    #[inline]
    fn record_dealloc(size: usize) {
        LIVE.fetch_sub(size, Ordering::Relaxed);
    }
}

unsafe impl GlobalAlloc for TrackingAllocator {
    unsafe fn alloc(&self, layout: Layout) -> *mut u8 {
        let ptr = System.alloc(layout);
        if !ptr.is_null() {
            Self::record_alloc(layout.size());
        }
        ptr
    }

    unsafe fn dealloc(&self, ptr: *mut u8, layout: Layout) {
        System.dealloc(ptr, layout);
        Self::record_dealloc(layout.size());
    }

    unsafe fn realloc(&self, ptr: *mut u8, layout: Layout, new_size: usize) -> *mut u8 {
        let new_ptr = System.realloc(ptr, layout, new_size);
        if !new_ptr.is_null() {
            Self::record_dealloc(layout.size());
            Self::record_alloc(new_size);
        }
        new_ptr
    }
}

/// True once the tracking allocator has served an allocation in this
/// process, i.e. it is actually registered.
pub fn enabled() -> bool {
    ACTIVE.load(Ordering::Relaxed)
}

pub fn live_bytes() -> usize {
    LIVE.load(Ordering::Relaxed)
}

pub fn peak_bytes() -> usize {
    PEAK.load(Ordering::Relaxed)
}

/// Restart the peak watermark at the current live level.
pub fn reset_peak() {
    PEAK.store(LIVE.load(Ordering::Relaxed), Ordering::Relaxed);
}

/// Measure the extra peak bytes `f` allocates above the live level at entry.
pub fn measure_peak_delta<T>(f: impl FnOnce() -> T) -> (T, usize) {
    reset_peak();
    let before = live_bytes();
    let out = f();
    let peak = peak_bytes();
    (out, peak.saturating_sub(before))
}
