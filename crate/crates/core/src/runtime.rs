//! Hooks the caller supplies for timing and for running independent work
//! items, so this crate stays free of threads and system clocks.

use alloc::vec::Vec;

pub trait Clock: Sync {
    /// Seconds since an arbitrary fixed origin.
    fn now(&self) -> f64;
}

/// Reports zero for every reading; timings come out as 0.
#[derive(Debug, Clone, Copy, Default)]
pub struct NullClock;

impl Clock for NullClock {
    fn now(&self) -> f64 {
        0.0
    }
}

/// Runs a batch of independent jobs. Implementations may run them in any
/// order or concurrently but must return results in input order.
pub trait Executor: Sync {
    fn map<T, R, F>(&self, items: Vec<T>, f: F) -> Vec<R>
    where
        T: Send,
        R: Send,
        F: Fn(T) -> R + Sync;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct Sequential;

impl Executor for Sequential {
    fn map<T, R, F>(&self, items: Vec<T>, f: F) -> Vec<R>
    where
        T: Send,
        R: Send,
        F: Fn(T) -> R + Sync,
    {
        items.into_iter().map(f).collect()
    }
}

/// Times `f` on `clock`.
pub fn timed<R>(clock: &dyn Clock, f: impl FnOnce() -> R) -> (R, f64) {
    let start = clock.now();
    let out = f();
    (out, (clock.now() - start).max(0.0))
}

/// Executor and clock handed to the orchestration routines.
pub struct Env<'a, E> {
    pub exec: &'a E,
    pub clock: &'a dyn Clock,
}

impl<E> Clone for Env<'_, E> {
    fn clone(&self) -> Self {
        *self
    }
}

impl<E> Copy for Env<'_, E> {}

impl Env<'static, Sequential> {
    /// Sequential execution with a null clock.
    pub fn sequential() -> Self {
        Env {
            exec: &Sequential,
            clock: &NullClock,
        }
    }
}
