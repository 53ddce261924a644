//! Ensembles of independent memory-time realizations.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::experiments::memory::{memory_time_single, MemoryTimeRecord, StopRule};
use crate::params::ModelParams;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSummary {
    pub params: ModelParams,
    pub stop: StopRule,
    pub n_realizations: usize,
    pub n_censored: usize,
    /// Mean over uncensored records; `None` when every record is censored.
    pub mean_tau: Option<f64>,
    pub stderr_tau: Option<f64>,
    pub median_tau: Option<f64>,
    pub master_seed: u64,
}

impl EnsembleSummary {
    /// Aggregates records in realization order. Censored records are excluded
    /// from the statistics and mark the summary unreliable.
    pub fn from_records(
        params: ModelParams,
        stop: StopRule,
        master_seed: u64,
        records: &[MemoryTimeRecord],
    ) -> Self {
        let mut taus: Vec<f64> = records
            .iter()
            .filter_map(|r| r.tau.filter(|_| !r.censored))
            .map(|t| t as f64)
            .collect();
        let (mean, stderr) = mean_and_stderr(&taus).unzip();
        taus.sort_by(f64::total_cmp);
        let median = (!taus.is_empty()).then(|| {
            let k = taus.len();
            if k % 2 == 1 {
                taus[k / 2]
            } else {
                0.5 * (taus[k / 2 - 1] + taus[k / 2])
            }
        });
        EnsembleSummary {
            params,
            stop,
            n_realizations: records.len(),
            n_censored: records.iter().filter(|r| r.censored).count(),
            mean_tau: mean,
            stderr_tau: stderr,
            median_tau: median,
            master_seed,
        }
    }

    pub fn is_reliable(&self) -> bool {
        self.n_censored == 0 && self.mean_tau.is_some()
    }
}

/// Sample mean and standard error `s/√n` (with `s` the n−1 standard deviation).
/// The error is 0 for a single value.
pub fn mean_and_stderr(values: &[f64]) -> Option<(f64, f64)> {
    if values.is_empty() {
        return None;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() == 1 {
        return Some((mean, 0.0));
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    Some((mean, (var / n).sqrt()))
}

/// Runs realizations `0..n_realizations` on streams `(master_seed, index)`.
///
/// `parallelism` is the worker-thread count (0 uses rayon's default). The
/// record list is ordered by realization index and does not depend on it.
pub fn run_ensemble(
    params: &ModelParams,
    n_realizations: usize,
    master_seed: u64,
    stop: StopRule,
    max_steps: u64,
    parallelism: usize,
) -> Result<(EnsembleSummary, Vec<MemoryTimeRecord>)> {
    if n_realizations == 0 {
        return Err(Error::InvalidParams("n_realizations must be at least 1".into()));
    }
    params.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(parallelism)
        .build()
        .map_err(|e| Error::InvalidParams(format!("thread pool: {e}")))?;
    let records: Vec<MemoryTimeRecord> = pool.install(|| {
        (0..n_realizations as u64)
            .into_par_iter()
            .map(|i| memory_time_single(params, i, master_seed, stop, max_steps))
            .collect::<Result<_>>()
    })?;
    let summary = EnsembleSummary::from_records(*params, stop, master_seed, &records);
    Ok((summary, records))
}
