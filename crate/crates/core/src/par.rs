//! Data-parallel helpers with a sequential fallback.
//!
//! With the `parallel` feature (on by default) the helpers dispatch to rayon;
//! without it every call runs on the current thread. Reductions always use a
//! fixed chunk size and combine partial sums in chunk order, so results are
//! bit-identical regardless of thread count or feature selection.

/// Elements per work unit for elementwise kernels and reductions.
pub const CHUNK: usize = 4096;

/// Execution strategy for batch work such as sweeps.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Exec {
    Sequential,
    /// Falls back to sequential when the crate is built without `parallel`.
    Parallel,
}

impl Default for Exec {
    fn default() -> Self {
        if cfg!(feature = "parallel") {
            Exec::Parallel
        } else {
            Exec::Sequential
        }
    }
}

impl Exec {
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Exec::Parallel
    }
}

/// Applies `f(index, &mut element)` to every element.
pub fn for_each_indexed<T, F>(data: &mut [T], f: F)
where
    T: Send,
    F: Fn(usize, &mut T) + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        if data.len() > CHUNK {
            data.par_chunks_mut(CHUNK)
                .enumerate()
                .for_each(|(c, chunk)| {
                    let base = c * CHUNK;
                    for (k, x) in chunk.iter_mut().enumerate() {
                        f(base + k, x);
                    }
                });
            return;
        }
    }
    for (k, x) in data.iter_mut().enumerate() {
        f(k, x);
    }
}

/// Deterministic sum of `f(index, &element)`.
pub fn sum_indexed<T, F>(data: &[T], f: F) -> f64
where
    T: Sync,
    F: Fn(usize, &T) -> f64 + Sync + Send,
{
    let partial = |c: usize, chunk: &[T]| -> f64 {
        let base = c * CHUNK;
        chunk
            .iter()
            .enumerate()
            .map(|(k, x)| f(base + k, x))
            .sum::<f64>()
    };

    #[cfg(feature = "parallel")]
    let partials: Vec<f64> = {
        use rayon::prelude::*;
        data.par_chunks(CHUNK)
            .enumerate()
            .map(|(c, chunk)| partial(c, chunk))
            .collect()
    };
    #[cfg(not(feature = "parallel"))]
    let partials: Vec<f64> = data
        .chunks(CHUNK)
        .enumerate()
        .map(|(c, chunk)| partial(c, chunk))
        .collect();

    partials.into_iter().sum()
}

/// Maps `f` over `items`, preserving input order in the output.
pub fn map_collect<I, O, F>(exec: Exec, items: &[I], f: F) -> Vec<O>
where
    I: Sync,
    O: Send,
    F: Fn(&I) -> O + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if exec.is_parallel() {
        use rayon::prelude::*;
        return items.par_iter().map(f).collect();
    }
    let _ = exec;
    items.iter().map(f).collect()
}

/// Runs two closures, concurrently when parallelism is available.
pub fn join<A, B, RA, RB>(a: A, b: B) -> (RA, RB)
where
    A: FnOnce() -> RA + Send,
    B: FnOnce() -> RB + Send,
    RA: Send,
    RB: Send,
{
    #[cfg(feature = "parallel")]
    {
        rayon::join(a, b)
    }
    #[cfg(not(feature = "parallel"))]
    {
        (a(), b())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chunked_sum_is_order_stable() {
        let data: Vec<f64> = (0..20_000).map(|k| 1.0 / (k as f64 + 1.0)).collect();
        let a = sum_indexed(&data, |_, x| *x);
        let b = sum_indexed(&data, |_, x| *x);
        assert_eq!(a.to_bits(), b.to_bits());
        let seq: f64 = data
            .chunks(CHUNK)
            .map(|c| c.iter().sum::<f64>())
            .sum();
        assert_eq!(a.to_bits(), seq.to_bits());
    }

    #[test]
    fn map_collect_preserves_order() {
        let xs: Vec<u32> = (0..257).collect();
        for exec in [Exec::Sequential, Exec::Parallel] {
            let ys = map_collect(exec, &xs, |x| x * 2);
            assert!(ys.iter().enumerate().all(|(k, y)| *y == 2 * k as u32));
        }
    }

    #[test]
    fn indexed_for_each_sees_global_index() {
        let mut v = vec![0usize; 3 * CHUNK + 7];
        for_each_indexed(&mut v, |k, x| *x = k);
        assert!(v.iter().enumerate().all(|(k, x)| *x == k));
    }
}
