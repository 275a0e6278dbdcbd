//! Serial or data-parallel evaluation of independent work items.
//!
//! Results always come back in index order, so any reduction done by the
//! caller is identical between the two modes.

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Exec {
    Serial,
    Parallel,
}

impl Default for Exec {
    fn default() -> Self {
        if cfg!(feature = "parallel") {
            Exec::Parallel
        } else {
            Exec::Serial
        }
    }
}

impl Exec {
    /// Evaluates `f(i)` for `i` in `start..end`, returning results in order.
    /// Without the `parallel` feature both modes run serially.
    pub fn map_range<T, F>(self, start: usize, end: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        match self {
            Exec::Serial => (start..end).map(f).collect(),
            Exec::Parallel => parallel_map(start, end, f),
        }
    }
}

#[cfg(feature = "parallel")]
fn parallel_map<T, F>(start: usize, end: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    use rayon::prelude::*;
    (start..end).into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
fn parallel_map<T, F>(start: usize, end: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    (start..end).map(f).collect()
}
