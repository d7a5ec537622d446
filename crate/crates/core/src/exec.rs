//! Replica-parallel execution with a deterministic merge order.

use alloc::vec::Vec;
use core::ops::Range;

/// Runs independent work items, possibly in parallel, and returns their
/// results in input order.
pub trait Executor: Sync {
    fn map<T, F>(&self, items: &[Range<u64>], f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(Range<u64>) -> T + Sync + Send;
}

/// Runs everything on the calling thread.
#[derive(Debug, Clone, Copy, Default)]
pub struct Sequential;

impl Executor for Sequential {
    fn map<T, F>(&self, items: &[Range<u64>], f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(Range<u64>) -> T + Sync + Send,
    {
        items.iter().cloned().map(f).collect()
    }
}

/// Fixed-size chunks of `range`. Chunk boundaries depend only on the range,
/// never on the worker count, so float merges happen in the same order everywhere.
pub fn chunks(range: Range<u64>, chunk: u64) -> Vec<Range<u64>> {
    let chunk = chunk.max(1);
    let mut out = Vec::new();
    let mut start = range.start;
    while start < range.end {
        let end = (start + chunk).min(range.end);
        out.push(start..end);
        start = end;
    }
    out
}

pub const DEFAULT_CHUNK: u64 = 64;

/// Map-reduce over replica indices: `fold` each chunk from `init()`, then
/// merge chunk results left to right.
pub fn fold_replicas<E, A, I, F, M>(exec: &E, replicas: Range<u64>, init: I, fold: F, merge: M) -> A
where
    E: Executor + ?Sized,
    A: Send,
    I: Fn() -> A + Sync + Send,
    F: Fn(&mut A, u64) + Sync + Send,
    M: Fn(&mut A, A),
{
    let parts = exec.map(&chunks(replicas, DEFAULT_CHUNK), |r| {
        let mut acc = init();
        for i in r {
            fold(&mut acc, i);
        }
        acc
    });
    let mut total = init();
    for p in parts {
        merge(&mut total, p);
    }
    total
}
