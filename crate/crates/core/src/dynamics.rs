//! Single-spin Metropolis dynamics.
//!
//! One attempt consumes exactly three words from the stream, in this order:
//!
//! 1. site: `below(L²)`;
//! 2. proposal: `below(q - 1)` offset past the current state (finite q), or
//!    `angle()` (XY);
//! 3. acceptance: `uniform()`, drawn even when the move is downhill.
//!
//! The move is accepted iff `u < min(1, exp(-ΔE/T))`. One Monte Carlo step
//! (MCS) is one sweep of `L²` attempts.

use serde::{Deserialize, Serialize};

use crate::lattice::SpinLattice;
use crate::params::Cardinality;
use crate::rng::RngStream;

/// `min(1, exp(-ΔE/T))`; at `T = 0` downhill and neutral moves are accepted
/// and uphill moves rejected.
#[inline]
pub fn acceptance_probability(delta_e: f64, temperature: f64) -> f64 {
    if delta_e <= 0.0 {
        1.0
    } else if temperature == 0.0 {
        0.0
    } else {
        (-delta_e / temperature).exp()
    }
}

/// Elapsed Monte Carlo time of one trajectory.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SweepClock {
    pub mcs: u64,
    pub attempts: u64,
    pub accepts: u64,
}

impl SweepClock {
    pub fn acceptance_rate(&self) -> f64 {
        if self.attempts == 0 {
            0.0
        } else {
            self.accepts as f64 / self.attempts as f64
        }
    }
}

/// One Metropolis attempt; returns whether the proposal was accepted.
#[inline]
pub fn metropolis_attempt(lattice: &mut SpinLattice, rng: &mut RngStream) -> bool {
    let n = lattice.n_sites() as u64;
    let temperature = lattice.params().temperature;
    match lattice.params().q {
        Cardinality::Finite(q) => discrete_attempt(lattice, rng, n, q, temperature),
        Cardinality::Continuous { .. } => continuous_attempt(lattice, rng, n, temperature),
    }
}

#[inline(always)]
fn discrete_attempt(
    lattice: &mut SpinLattice,
    rng: &mut RngStream,
    n: u64,
    q: u32,
    temperature: f64,
) -> bool {
    let site = rng.below(n) as usize;
    let offset = rng.below(u64::from(q - 1)) as u32 + 1;
    let u = rng.uniform();
    let old = u32::from(lattice.discrete_spin(site));
    let new = old + offset;
    let new = if new >= q { new - q } else { new } as u16;
    let (accept, de) = match lattice.local_table() {
        Some(table) => {
            let (io, inew) = lattice.local_indices(table, site, new);
            let de = table.energy[inew] - table.energy[io];
            let accept = match &table.weight {
                // u < exp(-ΔE/T) rewritten as a ratio of tabulated weights
                Some(w) => u * w[io] < w[inew],
                None => u < acceptance_probability(de, temperature),
            };
            (accept, de)
        }
        None => {
            let de = lattice.discrete_delta(site, new);
            (u < acceptance_probability(de, temperature), de)
        }
    };
    if accept {
        lattice.apply_discrete(site, new, de);
    }
    accept
}

#[inline(always)]
fn continuous_attempt(
    lattice: &mut SpinLattice,
    rng: &mut RngStream,
    n: u64,
    temperature: f64,
) -> bool {
    let site = rng.below(n) as usize;
    let new = rng.angle();
    let u = rng.uniform();
    let (sn, cn) = new.sin_cos();
    let de = lattice.continuous_delta(site, cn, sn);
    if u < acceptance_probability(de, temperature) {
        lattice.apply_continuous(site, new, (cn, sn), de);
        true
    } else {
        false
    }
}

/// Performs `L²` attempts and advances `clock` by one MCS.
pub fn sweep(lattice: &mut SpinLattice, rng: &mut RngStream, clock: &mut SweepClock) {
    let n = lattice.n_sites() as u64;
    let temperature = lattice.params().temperature;
    let mut accepts = 0u64;
    match lattice.params().q {
        Cardinality::Finite(q) => {
            for _ in 0..n {
                accepts += u64::from(discrete_attempt(lattice, rng, n, q, temperature));
            }
        }
        Cardinality::Continuous { .. } => {
            for _ in 0..n {
                accepts += u64::from(continuous_attempt(lattice, rng, n, temperature));
            }
        }
    }
    clock.mcs += 1;
    clock.attempts += n;
    clock.accepts += accepts;
}
