//! Data-parallel helpers with a sequential fallback.
//!
//! Every helper preserves input order in its output, so reductions performed
//! on the returned vectors are identical whichever execution mode is used.

/// How independent work items (grid points, multi-starts, probes) are evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Execution {
    #[default]
    Parallel,
    Sequential,
}

/// Whether the crate was built with the `parallel` feature.
pub fn is_parallel_available() -> bool {
    cfg!(feature = "parallel")
}

/// Evaluate `f(0..len)` and collect in index order.
pub fn map_indexed<U, F>(exec: Execution, len: usize, f: F) -> Vec<U>
where
    U: Send,
    F: Fn(usize) -> U + Sync + Send,
{
    match exec {
        #[cfg(feature = "parallel")]
        Execution::Parallel => {
            use rayon::prelude::*;
            (0..len).into_par_iter().map(f).collect()
        }
        _ => (0..len).map(f).collect(),
    }
}

/// Map over a slice and collect in input order.
pub fn map_slice<T, U, F>(exec: Execution, data: &[T], f: F) -> Vec<U>
where
    T: Sync,
    U: Send,
    F: Fn(&T) -> U + Sync + Send,
{
    match exec {
        #[cfg(feature = "parallel")]
        Execution::Parallel => {
            use rayon::prelude::*;
            data.par_iter().map(f).collect()
        }
        _ => data.iter().map(f).collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn modes_agree_and_keep_order() {
        let par = map_indexed(Execution::Parallel, 1000, |i| (i as f64).sqrt());
        let seq = map_indexed(Execution::Sequential, 1000, |i| (i as f64).sqrt());
        assert_eq!(par, seq);
        let data: Vec<u32> = (0..257).collect();
        assert_eq!(
            map_slice(Execution::Parallel, &data, |v| v * 2),
            map_slice(Execution::Sequential, &data, |v| v * 2)
        );
    }
}
