//! Magnetization, polarization angle, species census and trajectory probes.

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{wrap_angle, SpinLattice};
use crate::params::{Cardinality, ModelParams};
use crate::rng::StreamId;

/// Below this modulus the polarization angle is reported as 0 and flagged undefined.
pub const THETA_UNDEFINED_BELOW: f64 = 1e-12;

/// Polar form of the mean spin vector `m e^{iθ} = L⁻² Σ_j e^{iθ_j}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Magnetization {
    pub m: f64,
    /// Angle in `[0, 2π)`; 0 when `m` is below [`THETA_UNDEFINED_BELOW`].
    pub theta: f64,
    pub theta_defined: bool,
}

impl Magnetization {
    fn from_sum(re: f64, im: f64, n: f64) -> Self {
        let (re, im) = (re / n, im / n);
        let m = re.hypot(im).min(1.0);
        if m < THETA_UNDEFINED_BELOW {
            Magnetization {
                m,
                theta: 0.0,
                theta_defined: false,
            }
        } else {
            Magnetization {
                m,
                theta: wrap_angle(im.atan2(re)),
                theta_defined: true,
            }
        }
    }
}

pub fn magnetization(lattice: &SpinLattice) -> Magnetization {
    let n = lattice.n_sites() as f64;
    match lattice.params().q {
        Cardinality::Finite(q) => {
            let counts = species_census(lattice);
            magnetization_from_counts(&counts, q, n)
        }
        Cardinality::Continuous { .. } => {
            let (mut re, mut im) = (0.0, 0.0);
            for theta in lattice.angles() {
                let (s, c) = theta.sin_cos();
                re += c;
                im += s;
            }
            Magnetization::from_sum(re, im, n)
        }
    }
}

/// Magnetization of a clock configuration known only through its species counts.
pub fn magnetization_from_counts(counts: &[u64], q: u32, n_sites: f64) -> Magnetization {
    let (mut re, mut im) = (0.0, 0.0);
    for (s, &c) in counts.iter().enumerate() {
        let (sn, cs) = (TAU * s as f64 / f64::from(q)).sin_cos();
        re += c as f64 * cs;
        im += c as f64 * sn;
    }
    Magnetization::from_sum(re, im, n_sites)
}

/// Site counts per species, or per angular bin for XY, recounted from scratch.
pub fn species_census(lattice: &SpinLattice) -> Vec<u64> {
    let mut counts = vec![0u64; lattice.params().q.n_species()];
    for s in lattice.species() {
        counts[s] += 1;
    }
    counts
}

/// Converts a polarization angle into a real-valued sector `(q θ / 2π) mod q`.
pub fn effective_sector(theta: f64, q: u32) -> f64 {
    let q = f64::from(q);
    let v = (q * theta / TAU).rem_euclid(q);
    if v >= q {
        0.0
    } else {
        v
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservableSample {
    /// Elapsed MCS.
    pub t: u64,
    pub m: f64,
    pub theta: f64,
    pub theta_defined: bool,
    pub energy_per_site: f64,
    pub counts: Vec<u64>,
}

impl ObservableSample {
    pub fn measure(lattice: &SpinLattice, t: u64) -> Self {
        let mag = magnetization(lattice);
        ObservableSample {
            t,
            m: mag.m,
            theta: mag.theta,
            theta_defined: mag.theta_defined,
            energy_per_site: lattice.energy() / lattice.n_sites() as f64,
            counts: species_census(lattice),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub params: ModelParams,
    pub sampling_interval: u64,
    pub stream: StreamId,
    pub samples: Vec<ObservableSample>,
}

impl Trajectory {
    pub fn n_sites(&self) -> f64 {
        self.params.n_sites() as f64
    }

    /// Time average of `m` over all samples.
    pub fn mean_magnetization(&self) -> Option<f64> {
        if self.samples.is_empty() {
            return None;
        }
        Some(self.samples.iter().map(|s| s.m).sum::<f64>() / self.samples.len() as f64)
    }

    /// Sorted distinct integer sectors `floor(effective_sector(θ))` visited.
    pub fn visited_sectors(&self, q: u32) -> Vec<u32> {
        let mut v: Vec<u32> = self
            .samples
            .iter()
            .filter(|s| s.theta_defined)
            .map(|s| effective_sector(s.theta, q).floor() as u32)
            .collect();
        v.sort_unstable();
        v.dedup();
        v
    }
}

/// Largest rise of the total energy above its initial value, `max_t E(t) - E(0)`.
pub fn max_energy_excursion(trajectory: &Trajectory) -> Result<f64> {
    let first = trajectory.samples.first().ok_or(Error::EmptyTrajectory)?;
    let n = trajectory.n_sites();
    let e0 = first.energy_per_site * n;
    Ok(trajectory
        .samples
        .iter()
        .map(|s| s.energy_per_site * n - e0)
        .fold(0.0, f64::max))
}
