//! Path-level execution strategy for ensembles.

/// How independent paths of an ensemble are scheduled.
///
/// `Parallel` uses the rayon pool when the `parallel` feature is enabled and silently
/// runs sequentially otherwise. Results are identical either way.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum Execution {
    #[default]
    Parallel,
    Sequential,
}

/// Maps `f` over `0..count`, preserving index order in the output.
pub(crate) fn map_indices<T, F>(execution: Execution, count: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    match execution {
        #[cfg(feature = "parallel")]
        Execution::Parallel => {
            use rayon::prelude::*;
            (0..count).into_par_iter().map(f).collect()
        }
        _ => (0..count).map(f).collect(),
    }
}
