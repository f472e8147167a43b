//! Data-parallel execution over independent work items.
//!
//! With the `parallel` feature (default) work is spread over a rayon pool;
//! without it every helper runs sequentially. Each item is computed by the
//! same closure in both modes, so results are bit-identical whatever the
//! thread count.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Thread count for data-parallel sections. `None` uses the global pool.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Parallelism {
    pub threads: Option<usize>,
}

impl Parallelism {
    pub const fn sequential() -> Self {
        Self { threads: Some(1) }
    }

    pub const fn threads(n: usize) -> Self {
        Self { threads: Some(n) }
    }

    /// Runs `f` inside a pool sized to the requested thread count.
    pub fn install<R: Send>(&self, f: impl FnOnce() -> R + Send) -> R {
        #[cfg(feature = "parallel")]
        if let Some(n) = self.threads {
            match rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build() {
                Ok(pool) => return pool.install(f),
                Err(_) => return f(),
            }
        }
        f()
    }

    /// Fills `out` in chunks of `chunk` elements; `f(index, chunk_slice)`
    /// receives the chunk index.
    pub fn fill_chunks<T: Send>(
        &self,
        out: &mut [T],
        chunk: usize,
        f: impl Fn(usize, &mut [T]) + Sync + Send,
    ) {
        let chunk = chunk.max(1);
        self.install(|| {
            #[cfg(feature = "parallel")]
            {
                if self.threads != Some(1) {
                    out.par_chunks_mut(chunk)
                        .enumerate()
                        .for_each(|(i, c)| f(i, c));
                    return;
                }
            }
            out.chunks_mut(chunk).enumerate().for_each(|(i, c)| f(i, c));
        })
    }

    /// Maps `0..n` through `f`, preserving order.
    pub fn map_range<R: Send>(&self, n: usize, f: impl Fn(usize) -> R + Sync + Send) -> Vec<R> {
        self.install(|| {
            #[cfg(feature = "parallel")]
            {
                if self.threads != Some(1) {
                    return (0..n).into_par_iter().map(&f).collect();
                }
            }
            (0..n).map(&f).collect()
        })
    }

    pub fn effective_threads(&self) -> usize {
        #[cfg(feature = "parallel")]
        {
            self.threads.unwrap_or_else(rayon::current_num_threads)
        }
        #[cfg(not(feature = "parallel"))]
        {
            1
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn map_range_preserves_order() {
        for p in [Parallelism::sequential(), Parallelism::threads(3), Parallelism::default()] {
            let v = p.map_range(100, |i| i * i);
            assert_eq!(v, (0..100).map(|i| i * i).collect::<Vec<_>>());
        }
    }

    #[test]
    fn fill_chunks_covers_everything() {
        let mut out = vec![0usize; 37];
        Parallelism::threads(4).fill_chunks(&mut out, 5, |ci, c| {
            for (j, x) in c.iter_mut().enumerate() {
                *x = ci * 5 + j;
            }
        });
        assert_eq!(out, (0..37).collect::<Vec<_>>());
    }
}
