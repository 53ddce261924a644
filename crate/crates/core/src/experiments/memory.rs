//! Memory time of the polarized state: start with every spin in species 0,
//! run Metropolis sweeps, and stop the first time species 0 loses dominance.

use serde::{Deserialize, Serialize};

use crate::dynamics::{metropolis_attempt, sweep, SweepClock};
use crate::error::{Error, Result};
use crate::lattice::{Fill, SpinLattice, SpinState};
use crate::params::{Cardinality, ModelParams};
use crate::rng::{RngStream, StreamId};

/// Default cap on the length of a single realization, in MCS.
pub const DEFAULT_MAX_STEPS: u64 = 100_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum StopKind {
    /// Some single species `s ≠ 0` strictly outnumbers species 0.
    PluralityLoss,
    /// All species `s ≠ 0` together strictly outnumber species 0.
    AggregateLoss,
}

impl StopKind {
    pub fn as_str(self) -> &'static str {
        match self {
            StopKind::PluralityLoss => "PLURALITY_LOSS",
            StopKind::AggregateLoss => "AGGREGATE_LOSS",
        }
    }
}

impl std::str::FromStr for StopKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "plurality_loss" | "plurality" => Ok(StopKind::PluralityLoss),
            "aggregate_loss" | "aggregate" => Ok(StopKind::AggregateLoss),
            other => Err(Error::InvalidParams(format!("unknown stop rule {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StopRule {
    pub kind: StopKind,
    /// Sweeps between checks of the rule.
    pub check_interval: u64,
}

impl Default for StopRule {
    fn default() -> Self {
        StopRule {
            kind: StopKind::PluralityLoss,
            check_interval: 1,
        }
    }
}

impl StopRule {
    pub fn new(kind: StopKind) -> Self {
        StopRule {
            kind,
            check_interval: 1,
        }
    }

    /// Whether species 0 has lost dominance in this census.
    pub fn holds(&self, counts: &[u64]) -> bool {
        let (zero, rest) = counts.split_first().expect("census has at least two species");
        match self.kind {
            StopKind::PluralityLoss => rest.iter().any(|&c| c > *zero),
            StopKind::AggregateLoss => rest.iter().sum::<u64>() > *zero,
        }
    }
}

/// Outcome of one realization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MemoryTimeRecord {
    pub params: ModelParams,
    pub realization_index: u64,
    /// MCS at which the stop rule first held; `None` when censored.
    pub tau: Option<u64>,
    pub censored: bool,
    pub accepts: u64,
    pub attempts: u64,
}

fn polarized_state(q: Cardinality) -> SpinState {
    match q {
        Cardinality::Finite(_) => SpinState::Discrete(0),
        // centre of bin 0, so a lone fluctuation does not leave the bin
        Cardinality::Continuous { q_bin } => SpinState::Angle(std::f64::consts::PI / f64::from(q_bin)),
    }
}

/// Runs one realization from the polarized state with stream
/// `(master_seed, realization_index)`.
pub fn memory_time_single(
    params: &ModelParams,
    realization_index: u64,
    master_seed: u64,
    stop: StopRule,
    max_steps: u64,
) -> Result<MemoryTimeRecord> {
    params.validate()?;
    if max_steps == 0 {
        return Err(Error::InvalidParams("max_steps must be at least 1".into()));
    }
    if stop.check_interval == 0 {
        return Err(Error::InvalidParams("check_interval must be at least 1".into()));
    }
    let mut lattice = SpinLattice::new(*params, Fill::Polarized(polarized_state(params.q)))?;
    let mut rng = RngStream::new(StreamId::new(master_seed, realization_index));
    let mut clock = SweepClock::default();
    let mut tau = None;
    while clock.mcs < max_steps {
        sweep(&mut lattice, &mut rng, &mut clock);
        if clock.mcs % stop.check_interval == 0 && stop.holds(lattice.census()) {
            tau = Some(clock.mcs);
            break;
        }
    }
    Ok(MemoryTimeRecord {
        params: *params,
        realization_index,
        tau,
        censored: tau.is_none(),
        accepts: clock.accepts,
        attempts: clock.attempts,
    })
}

/// Attempt-resolution variant of [`memory_time_single`]: the stop rule is
/// checked after every single-spin attempt and the result counts attempts.
/// Consumes the same stream as the sweep-checked protocol.
pub fn first_passage_attempts(
    params: &ModelParams,
    realization_index: u64,
    master_seed: u64,
    stop: StopRule,
    max_attempts: u64,
) -> Result<Option<u64>> {
    params.validate()?;
    let mut lattice = SpinLattice::new(*params, Fill::Polarized(polarized_state(params.q)))?;
    let mut rng = RngStream::new(StreamId::new(master_seed, realization_index));
    for attempt in 1..=max_attempts {
        if metropolis_attempt(&mut lattice, &mut rng) && stop.holds(lattice.census()) {
            return Ok(Some(attempt));
        }
    }
    Ok(None)
}
