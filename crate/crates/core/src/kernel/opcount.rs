//! Thread-local multiply-add counter. Kernels report their MAC counts here so
//! scaling tests can compare measured arithmetic cost between configurations
//! without timing noise.

use std::cell::Cell;

thread_local! {
    static MACS: Cell<u64> = const { Cell::new(0) };
}

#[inline]
pub fn add(n: u64) {
    MACS.with(|c| c.set(c.get().wrapping_add(n)));
}

pub fn read() -> u64 {
    MACS.with(|c| c.get())
}

pub fn reset() {
    MACS.with(|c| c.set(0));
}

/// Run `f` and return (result, multiply-adds recorded while it ran).
pub fn measure<T>(f: impl FnOnce() -> T) -> (T, u64) {
    let before = read();
    let out = f();
    (out, read().wrapping_sub(before))
}
