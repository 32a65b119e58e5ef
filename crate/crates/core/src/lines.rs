//! Axis-line traversal shared by the separable kernels.
//!
//! A pass along one axis gathers every grid line into a contiguous
//! line-major buffer, runs the 1D kernel on each line (data-parallel when
//! the `parallel` feature is on), and scatters the results back. Each line
//! is processed by the same code path regardless of thread count, so the
//! output is bit-identical across schedules.

use crate::grid::GridSpec;

pub(crate) struct Lines {
    pub len: usize,
    stride: usize,
    starts: Vec<usize>,
}

impl Lines {
    pub fn new(grid: &GridSpec, axis: usize) -> Self {
        let len = grid.shape()[axis];
        let stride = grid.stride(axis);
        let outer = grid.len() / (len * stride);
        let mut starts = Vec::with_capacity(outer * stride);
        for o in 0..outer {
            let base = o * len * stride;
            starts.extend((0..stride).map(|i| base + i));
        }
        Self { len, stride, starts }
    }

    /// True when lines already sit contiguously in memory.
    pub fn contiguous(&self) -> bool {
        self.stride == 1
    }

    pub fn gather<T: Copy>(&self, src: &[T], dst: &mut [T]) {
        for (line, &s) in dst.chunks_exact_mut(self.len).zip(&self.starts) {
            for (k, d) in line.iter_mut().enumerate() {
                *d = src[s + k * self.stride];
            }
        }
    }

    pub fn scatter<T: Copy>(&self, src: &[T], dst: &mut [T]) {
        for (line, &s) in src.chunks_exact(self.len).zip(&self.starts) {
            for (k, &v) in line.iter().enumerate() {
                dst[s + k * self.stride] = v;
            }
        }
    }
}

/// Runs `f(input_line, output_line, arg_line, scratch)` over every line.
pub(crate) fn for_each_line3<A, B, C, S, I, F>(
    len: usize,
    input: &[A],
    out: &mut [B],
    arg: &mut [C],
    init: I,
    f: F,
) where
    A: Sync,
    B: Send,
    C: Send,
    I: Fn() -> S + Sync + Send,
    F: Fn(&[A], &mut [B], &mut [C], &mut S) + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        input
            .par_chunks(len)
            .zip(out.par_chunks_mut(len))
            .zip(arg.par_chunks_mut(len))
            .for_each_init(init, |s, ((i, o), a)| f(i, o, a, s));
    }
    #[cfg(not(feature = "parallel"))]
    {
        let mut s = init();
        for ((i, o), a) in input.chunks(len).zip(out.chunks_mut(len)).zip(arg.chunks_mut(len)) {
            f(i, o, a, &mut s);
        }
    }
}

/// Runs `f(line, scratch)` in place over every line.
pub(crate) fn for_each_line<T, S, I, F>(len: usize, data: &mut [T], init: I, f: F)
where
    T: Send,
    I: Fn() -> S + Sync + Send,
    F: Fn(&mut [T], &mut S) + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        data.par_chunks_mut(len).for_each_init(init, |s, line| f(line, s));
    }
    #[cfg(not(feature = "parallel"))]
    {
        let mut s = init();
        for line in data.chunks_mut(len) {
            f(line, &mut s);
        }
    }
}
