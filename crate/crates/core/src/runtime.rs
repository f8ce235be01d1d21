//! Process-wide thread pool.
//!
//! Internal parallelism is capped by the `RKHS_DAGMA_THREADS` environment
//! variable; unset or `0` means one thread per core. All parallel sections in
//! the crate run inside this pool so the cap applies globally. Work is always
//! partitioned into fixed per-node or per-row slots, so results do not depend
//! on the thread count.

use std::sync::OnceLock;

use rayon::ThreadPool;

pub const THREADS_ENV_VAR: &str = "RKHS_DAGMA_THREADS";

static POOL: OnceLock<ThreadPool> = OnceLock::new();

/// The shared compute pool, built on first use.
///
/// A malformed `RKHS_DAGMA_THREADS` value is treated as unset rather than
/// aborting mid-pipeline.
pub fn thread_pool() -> &'static ThreadPool {
    POOL.get_or_init(|| {
        let requested = std::env::var(THREADS_ENV_VAR)
            .ok()
            .and_then(|v| v.trim().parse::<usize>().ok())
            .unwrap_or(0);
        rayon::ThreadPoolBuilder::new()
            .num_threads(requested) // rayon treats 0 as "auto"
            .build()
            .expect("thread pool construction cannot fail with these settings")
    })
}
