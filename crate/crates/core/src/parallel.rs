//! Data-parallel helpers. With the `parallel` feature the work is spread over
//! the rayon pool; without it the same closures run sequentially. Output order
//! always follows input order.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

#[cfg(feature = "parallel")]
pub fn map<'a, T: Sync, R: Send>(items: &'a [T], f: impl Fn(&'a T) -> R + Sync + Send) -> Vec<R> {
    items.par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub fn map<'a, T: Sync, R: Send>(items: &'a [T], f: impl Fn(&'a T) -> R + Sync + Send) -> Vec<R> {
    items.iter().map(f).collect()
}

#[cfg(feature = "parallel")]
pub fn filter_map<'a, T: Sync, R: Send>(items: &'a [T], f: impl Fn(&'a T) -> Option<R> + Sync + Send) -> Vec<R> {
    items.par_iter().filter_map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub fn filter_map<'a, T: Sync, R: Send>(items: &'a [T], f: impl Fn(&'a T) -> Option<R> + Sync + Send) -> Vec<R> {
    items.iter().filter_map(f).collect()
}

/// Whether this build spreads work over a thread pool.
pub const fn enabled() -> bool {
    cfg!(feature = "parallel")
}
