//! Replication scheduling: rayon when the `parallel` feature is on, a plain
//! loop otherwise. Results always come back in index order.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// How independent replications are scheduled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Execution {
    Serial,
    /// Runs on rayon; `threads: None` uses the global pool. Falls back to
    /// serial when the crate is built without the `parallel` feature.
    #[default]
    Parallel,
    ParallelWith {
        threads: usize,
    },
}

impl Execution {
    /// `Parallel`, capped by the `DEPLM_THREADS` environment variable when it
    /// holds a positive integer.
    pub fn from_env() -> Self {
        match std::env::var("DEPLM_THREADS")
            .ok()
            .and_then(|v| v.trim().parse::<usize>().ok())
        {
            Some(0) | None => Execution::Parallel,
            Some(1) => Execution::Serial,
            Some(threads) => Execution::ParallelWith { threads },
        }
    }
}

/// `(0..count).map(f)` collected in index order under the given schedule.
pub fn map_indexed<T, F>(count: u64, execution: Execution, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(u64) -> T + Sync + Send,
{
    match execution {
        Execution::Serial => (0..count).map(f).collect(),
        #[cfg(feature = "parallel")]
        Execution::Parallel => (0..count).into_par_iter().map(f).collect(),
        #[cfg(feature = "parallel")]
        Execution::ParallelWith { threads } => rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .expect("thread pool construction")
            .install(|| (0..count).into_par_iter().map(f).collect()),
        #[cfg(not(feature = "parallel"))]
        Execution::Parallel | Execution::ParallelWith { .. } => (0..count).map(f).collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn order_is_preserved() {
        let expected: Vec<u64> = (0..1000).map(|i| i * i).collect();
        for exec in [
            Execution::Serial,
            Execution::Parallel,
            Execution::ParallelWith { threads: 3 },
        ] {
            assert_eq!(map_indexed(1000, exec, |i| i * i), expected);
        }
    }
}
