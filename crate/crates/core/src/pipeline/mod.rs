//! Dataset building, recognition runs, evaluation and noise sweeps.

pub mod dataset;
pub mod evaluate;
pub mod heatmap;
pub mod manifest;
pub mod noise;
pub mod recognize;

pub use dataset::{build_dataset, BuildOptions, BuildSummary};
pub use evaluate::{evaluate, EvaluationReport, TimingSummary};
pub use heatmap::emit_heatmap;
pub use manifest::{DatasetRecord, Manifest, Split};
pub use noise::{noise_sweep, NoiseRow, SweepOptions, DEFAULT_SIGMAS};
pub use recognize::{
    run_recognition, EntropySource, KnnDescriptor, RecognitionOptions, RecognitionOutcome, ResultRow,
};

use crate::error::{Error, Result};

/// FNV-1a, used to derive per-object seeds that do not depend on ordering.
pub(crate) fn stable_hash(s: &str) -> u64 {
    s.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| {
        (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01b3)
    })
}

pub(crate) fn worker_pool(workers: usize) -> Result<rayon::ThreadPool> {
    if workers == 0 {
        return Err(Error::invalid("worker count must be at least 1"));
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::invalid(format!("cannot start worker pool: {e}")))
}
