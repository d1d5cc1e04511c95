//! Reproducible parallel Monte Carlo experiments.
//!
//! Trial `i` of an experiment with master seed `s` draws all of its
//! randomness from `RandomStream::new(s, i)`, and results are merged by
//! integer addition, so the thread count never changes an output.

mod audit;
mod reflection;
mod scaling;
mod suite;
mod tail;

pub use audit::{audit_rhs, calibrate, lemma_audit, AuditReport, LemmaId, Tunables, Verdict};
pub use reflection::{reflection_mc, ReflectionBin, ReflectionCase};
pub use scaling::{scaling_diagnostic, RegressionReport, ScalingPoint};
pub use suite::{identity_suite, SuiteConfig, SuiteReport};
pub use tail::{
    estimate_simple_prob, read_records, run_tail, size_distribution, write_records, CiMethod,
    TailEstimate, TailMode, TailSpec,
};

use crate::error::{invalid, Result};

/// Runs `f` on a dedicated pool with `threads` workers, or on the global pool.
pub fn with_threads<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match threads {
        None => Ok(f()),
        Some(0) => invalid("threads must be >= 1"),
        Some(k) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(k)
                .build()
                .map_err(|e| crate::Error::InvalidParams(e.to_string()))?;
            Ok(pool.install(f))
        }
    }
}

/// Wall time since `start` in seconds, or 0 when timing is off.
pub(crate) fn elapsed(start: std::time::Instant, timing: bool) -> f64 {
    if timing {
        crate::stats::sig12(start.elapsed().as_secs_f64())
    } else {
        0.0
    }
}
