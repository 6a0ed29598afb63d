//! Execution engine: thread pool configuration, chunked traversal of
//! branches and the fork-join merge sort used by interference operations.
//!
//! Branch-local (non-interference) updates are split into fixed-size chunks
//! and handed to a rayon pool once the state is large enough. Interference
//! operations only parallelize their sorting step; see [`parallel_merge_sort`].

use std::cmp::Ordering;
use std::fmt;
use std::sync::Arc;

use rayon::prelude::*;
use rayon::ThreadPool;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::state::SparseState;

pub mod profiler;
mod speedup;

pub use speedup::{measure_speedup, synthetic_state, time_op, SpeedupOp, SpeedupReport};

/// Environment variable that overrides [`ExecConfig::thread_count`].
pub const THREADS_ENV: &str = "SPARQ_THREADS";
pub const DEFAULT_THRESHOLD: usize = 4096;
pub const DEFAULT_CHUNK_SIZE: usize = 8192;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ExecConfig {
    pub thread_count: usize,
    /// Minimum number of branches before work is handed to the pool.
    pub threshold: usize,
    /// Branches per work unit.
    pub chunk_size: usize,
}

impl Default for ExecConfig {
    fn default() -> Self {
        Self {
            thread_count: 1,
            threshold: DEFAULT_THRESHOLD,
            chunk_size: DEFAULT_CHUNK_SIZE,
        }
    }
}

impl ExecConfig {
    pub fn with_threads(thread_count: usize) -> Self {
        Self {
            thread_count,
            ..Self::default()
        }
    }

    /// Default config with the thread count taken from `SPARQ_THREADS`,
    /// falling back to the machine's available parallelism.
    pub fn from_env() -> Self {
        let threads = std::env::var(THREADS_ENV)
            .ok()
            .and_then(|v| v.trim().parse::<usize>().ok())
            .filter(|&t| t > 0)
            .unwrap_or_else(|| {
                std::thread::available_parallelism()
                    .map(|n| n.get())
                    .unwrap_or(1)
            });
        Self::with_threads(threads)
    }

    /// Applies the `SPARQ_THREADS` override on top of an explicit config.
    pub fn env_override(mut self) -> Self {
        if let Some(t) = std::env::var(THREADS_ENV)
            .ok()
            .and_then(|v| v.trim().parse::<usize>().ok())
            .filter(|&t| t > 0)
        {
            self.thread_count = t;
        }
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.thread_count == 0 {
            return Err(Error::InvalidConfig("thread_count must be positive".into()));
        }
        if self.threshold == 0 {
            return Err(Error::InvalidConfig("threshold must be at least 1".into()));
        }
        if self.chunk_size == 0 {
            return Err(Error::InvalidConfig("chunk_size must be at least 1".into()));
        }
        Ok(())
    }
}

/// How a traversal was executed. Returned so callers and tests can observe
/// the threshold contract.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dispatch {
    Sequential,
    Parallel,
}

/// An [`ExecConfig`] bound to a worker pool. Cheap to clone.
#[derive(Clone)]
pub struct Executor {
    config: ExecConfig,
    pool: Option<Arc<ThreadPool>>,
}

impl fmt::Debug for Executor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Executor")
            .field("config", &self.config)
            .field("pooled", &self.pool.is_some())
            .finish()
    }
}

impl Default for Executor {
    fn default() -> Self {
        Self::sequential()
    }
}

impl Executor {
    pub fn new(config: ExecConfig) -> Result<Self> {
        config.validate()?;
        let pool = if config.thread_count > 1 {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(config.thread_count)
                .build()
                .map_err(|e| Error::InvalidConfig(e.to_string()))?;
            Some(Arc::new(pool))
        } else {
            None
        };
        Ok(Self { config, pool })
    }

    pub fn sequential() -> Self {
        Self {
            config: ExecConfig::default(),
            pool: None,
        }
    }

    pub fn config(&self) -> &ExecConfig {
        &self.config
    }

    pub fn threads(&self) -> usize {
        self.config.thread_count
    }

    pub fn should_parallelize(&self, len: usize) -> bool {
        self.pool.is_some() && len >= self.config.threshold
    }

    /// Runs `f` inside the worker pool (or inline when single-threaded).
    pub fn install<R, F>(&self, f: F) -> R
    where
        R: Send,
        F: FnOnce() -> R + Send,
    {
        match &self.pool {
            Some(pool) => pool.install(f),
            None => f(),
        }
    }
}

/// Applies `f` to aligned chunks of three record arrays: `a` and `c` hold one
/// item per record, `b` holds `b_stride` items per record. Every record is
/// visited exactly once and the result does not depend on the thread count.
pub(crate) fn for_each_chunk<A, B, C, F>(
    exec: &Executor,
    a: &mut [A],
    b: &mut [B],
    b_stride: usize,
    c: &mut [C],
    f: F,
) -> Dispatch
where
    A: Send,
    B: Send,
    C: Send,
    F: Fn(&mut [A], &mut [B], &mut [C]) + Sync + Send,
{
    let len = a.len();
    debug_assert_eq!(b.len(), len * b_stride);
    debug_assert_eq!(c.len(), len);
    if !exec.should_parallelize(len) {
        f(a, b, c);
        return Dispatch::Sequential;
    }
    let chunk = exec.config.chunk_size;
    exec.install(|| {
        a.par_chunks_mut(chunk)
            .zip(b.par_chunks_mut(chunk * b_stride.max(1)))
            .zip(c.par_chunks_mut(chunk))
            .for_each(|((ca, cb), cc)| f(ca, cb, cc));
    });
    Dispatch::Parallel
}

/// Runs a branch-local update over every branch of `state`, chunked and
/// handed to the pool above the threshold. `f` may rewrite register values
/// but must map distinct basis values to distinct basis values; digests are
/// refreshed afterwards.
pub fn parallel_for_branches<F>(state: &mut SparseState, f: F) -> Dispatch
where
    F: Fn(&mut Complex64, &mut [u64]) + Sync + Send,
{
    state.map_branches(f)
}

/// Stable merge sort. Above the executor threshold the two halves are sorted
/// with fork-join recursion down to `chunk_size` leaves and merged in
/// parallel by splitting around a median element; below it this is the
/// sequential stable sort. The output is identical for every thread count.
pub fn parallel_merge_sort<T, F>(data: &mut [T], cmp: F, exec: &Executor) -> Dispatch
where
    T: Copy + Send + Sync,
    F: Fn(&T, &T) -> Ordering + Sync,
{
    if !exec.should_parallelize(data.len()) {
        data.sort_by(&cmp);
        return Dispatch::Sequential;
    }
    let leaf = exec.config.chunk_size.max(2);
    let mut buf = data.to_vec();
    exec.install(|| sort_into(data, &mut buf, &cmp, leaf));
    Dispatch::Parallel
}

// Sorts `data` in place using `buf` (same length) as scratch.
fn sort_into<T, F>(data: &mut [T], buf: &mut [T], cmp: &F, leaf: usize)
where
    T: Copy + Send + Sync,
    F: Fn(&T, &T) -> Ordering + Sync,
{
    let n = data.len();
    if n <= leaf {
        data.sort_by(cmp);
        return;
    }
    let mid = n / 2;
    {
        let (dl, dr) = data.split_at_mut(mid);
        let (bl, br) = buf.split_at_mut(mid);
        rayon::join(
            || sort_into(dl, bl, cmp, leaf),
            || sort_into(dr, br, cmp, leaf),
        );
    }
    let (left, right) = data.split_at(mid);
    par_merge(left, right, buf, cmp, leaf);
    data.copy_from_slice(buf);
}

fn par_merge<T, F>(left: &[T], right: &[T], out: &mut [T], cmp: &F, leaf: usize)
where
    T: Copy + Send + Sync,
    F: Fn(&T, &T) -> Ordering + Sync,
{
    debug_assert_eq!(left.len() + right.len(), out.len());
    if out.len() <= leaf || left.is_empty() || right.is_empty() {
        seq_merge(left, right, out, cmp);
        return;
    }
    // Split around a pivot from the longer run; equal elements from the
    // left run always land before those from the right run.
    let (i, j, pivot, pivot_from_left) = if left.len() >= right.len() {
        let i = left.len() / 2;
        let p = left[i];
        let j = right.partition_point(|r| cmp(r, &p) == Ordering::Less);
        (i, j, p, true)
    } else {
        let j = right.len() / 2;
        let p = right[j];
        let i = left.partition_point(|l| cmp(l, &p) != Ordering::Greater);
        (i, j, p, false)
    };
    let (out_lo, rest) = out.split_at_mut(i + j);
    let (slot, out_hi) = rest.split_at_mut(1);
    slot[0] = pivot;
    let (l_hi, r_hi) = if pivot_from_left {
        (&left[i + 1..], &right[j..])
    } else {
        (&left[i..], &right[j + 1..])
    };
    rayon::join(
        || par_merge(&left[..i], &right[..j], out_lo, cmp, leaf),
        || par_merge(l_hi, r_hi, out_hi, cmp, leaf),
    );
}

fn seq_merge<T, F>(left: &[T], right: &[T], out: &mut [T], cmp: &F)
where
    T: Copy,
    F: Fn(&T, &T) -> Ordering,
{
    let (mut i, mut j) = (0, 0);
    for slot in out.iter_mut() {
        let take_left = j >= right.len()
            || (i < left.len() && cmp(&right[j], &left[i]) != Ordering::Less);
        if take_left {
            *slot = left[i];
            i += 1;
        } else {
            *slot = right[j];
            j += 1;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn pooled(threads: usize, threshold: usize, chunk: usize) -> Executor {
        Executor::new(ExecConfig {
            thread_count: threads,
            threshold,
            chunk_size: chunk,
        })
        .unwrap()
    }

    #[test]
    fn config_validation() {
        assert!(ExecConfig::with_threads(0).validate().is_err());
        let mut c = ExecConfig {
            chunk_size: 0,
            ..ExecConfig::default()
        };
        assert!(c.validate().is_err());
        c.chunk_size = 1;
        c.threshold = 0;
        assert!(c.validate().is_err());
    }

    #[test]
    fn merge_sort_matches_std_stable_sort() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        // (key, original position): ties must keep input order.
        let base: Vec<(u8, u32)> = (0..50_000).map(|i| (rng.gen::<u8>(), i)).collect();
        let mut expect = base.clone();
        expect.sort_by_key(|x| x.0);
        for threads in [1, 2, 4] {
            let exec = pooled(threads, 16, 64);
            let mut v = base.clone();
            let d = parallel_merge_sort(&mut v, |a, b| a.0.cmp(&b.0), &exec);
            assert_eq!(v, expect, "threads = {threads}");
            if threads > 1 {
                assert_eq!(d, Dispatch::Parallel);
            }
        }
    }

    #[test]
    fn merge_sort_small_input_is_sequential() {
        let exec = pooled(2, 1000, 64);
        let mut v = vec![3, 1, 2];
        assert_eq!(
            parallel_merge_sort(&mut v, |a: &i32, b| a.cmp(b), &exec),
            Dispatch::Sequential
        );
        assert_eq!(v, vec![1, 2, 3]);
    }

    #[test]
    fn reverse_sorted_input() {
        let exec = pooled(3, 8, 32);
        let mut v: Vec<u32> = (0..100_000).rev().collect();
        parallel_merge_sort(&mut v, |a, b| a.cmp(b), &exec);
        assert!(v.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn chunked_traversal_touches_each_item_once() {
        let exec = pooled(4, 10, 7);
        let mut a = vec![0u32; 1000];
        let mut b = vec![0u64; 2000];
        let mut c = vec![0u8; 1000];
        let d = for_each_chunk(&exec, &mut a, &mut b, 2, &mut c, |ca, cb, cc| {
            for ((x, pair), y) in ca.iter_mut().zip(cb.chunks_mut(2)).zip(cc) {
                *x += 1;
                pair[1] += 1;
                *y += 1;
            }
        });
        assert_eq!(d, Dispatch::Parallel);
        assert!(a.iter().all(|&x| x == 1));
        assert!(b.chunks(2).all(|p| p == [0, 1]));
        assert!(c.iter().all(|&y| y == 1));
    }
}
