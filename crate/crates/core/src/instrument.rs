//! Thread-local multiply-accumulate counter used by the instrumented forward.
//!
//! Kernels report the MACs they execute to the counter of the thread that
//! called them. Counting is off unless the call runs inside [`counting`].

use std::cell::Cell;

thread_local! {
    static MACS: Cell<Option<u64>> = const { Cell::new(None) };
}

/// Runs `f` with counting enabled on this thread and returns the MACs it executed.
pub fn counting<R>(f: impl FnOnce() -> R) -> (R, u64) {
    let previous = MACS.with(|c| c.replace(Some(0)));
    let out = f();
    let counted = MACS.with(|c| c.replace(previous)).unwrap_or(0);
    if let Some(outer) = previous {
        MACS.with(|c| c.set(Some(outer + counted)));
    }
    (out, counted)
}

pub(crate) fn record(macs: u64) {
    MACS.with(|c| {
        if let Some(n) = c.get() {
            c.set(Some(n + macs));
        }
    });
}
