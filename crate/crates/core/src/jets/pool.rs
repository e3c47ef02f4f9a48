//! Thread-local scratch buffers for batch passes.
//!
//! Batch matrices run to several megabytes; allocating them fresh on every
//! pass costs more in page faults than the arithmetic itself.

use std::cell::RefCell;

thread_local! {
    static POOL: RefCell<Vec<Vec<f64>>> = const { RefCell::new(Vec::new()) };
}

const MAX_POOLED: usize = 32;

/// Buffer of length `len` with unspecified contents.
pub(crate) fn take_dirty(len: usize) -> Vec<f64> {
    let mut v = POOL.with(|p| {
        let mut p = p.borrow_mut();
        match p.iter().position(|b| b.capacity() >= len) {
            Some(i) => p.swap_remove(i),
            None => p.pop().unwrap_or_default(),
        }
    });
    if v.len() >= len {
        v.truncate(len);
    } else {
        v.resize(len, 0.0);
    }
    v
}

pub(crate) fn take_zeroed(len: usize) -> Vec<f64> {
    let mut v = take_dirty(len);
    v.fill(0.0);
    v
}

pub(crate) fn give(v: Vec<f64>) {
    if v.capacity() == 0 {
        return;
    }
    POOL.with(|p| {
        let mut p = p.borrow_mut();
        if p.len() < MAX_POOLED {
            p.push(v);
        }
    });
}
