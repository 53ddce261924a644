//! Periodic L×L clock/XY lattice with a cached total energy and an
//! incrementally maintained species census.
//!
//! Bonds are the directed `(i, right(i))` and `(i, down(i))` pairs, so the
//! torus carries exactly `2L²` bonds and the energy is
//! `E = -Σ_bonds cos(θ_i - θ_j)`.

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::{Cardinality, ModelParams};
use crate::rng::{RngStream, StreamId};

/// Accepted updates between full recomputations of energy and census.
pub const RESYNC_INTERVAL: u64 = 1_000_000;

/// Largest tolerated gap between cached and recomputed energy at a resync.
pub const ENERGY_DRIFT_TOLERANCE: f64 = 1e-6;

/// A single spin: a clock index or a raw angle in `[0, 2π)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum SpinState {
    Discrete(u16),
    Angle(f64),
}

impl SpinState {
    /// The spin's angle in radians for a model of the given cardinality.
    pub fn angle(self, q: Cardinality) -> f64 {
        match (self, q) {
            (SpinState::Discrete(s), Cardinality::Finite(q)) => TAU * f64::from(s) / f64::from(q),
            (SpinState::Discrete(s), Cardinality::Continuous { .. }) => f64::from(s),
            (SpinState::Angle(theta), _) => theta,
        }
    }
}

/// How a freshly built lattice is populated.
#[derive(Debug, Clone, PartialEq)]
pub enum Fill {
    /// Every site in the same state.
    Polarized(SpinState),
    /// Independent uniform states drawn from the identified stream.
    UniformRandom(StreamId),
    /// Row-major list of exactly `L²` states.
    Explicit(Vec<SpinState>),
}

#[derive(Debug, Clone)]
enum Spins {
    Discrete(Vec<u16>),
    Continuous(Vec<f64>),
}

/// Returns the up, down, left and right neighbours of site `index` on an
/// `size × size` torus, row-major.
pub fn neighbor_indices(index: usize, size: usize) -> Result<[usize; 4]> {
    let n_sites = size * size;
    if index >= n_sites {
        return Err(Error::SiteOutOfRange { index, n_sites });
    }
    Ok(neighbors_unchecked(index, size))
}

#[inline]
fn neighbors_unchecked(index: usize, size: usize) -> [usize; 4] {
    let (r, c) = (index / size, index % size);
    let up = if r == 0 { size - 1 } else { r - 1 };
    let down = if r + 1 == size { 0 } else { r + 1 };
    let left = if c == 0 { size - 1 } else { c - 1 };
    let right = if c + 1 == size { 0 } else { c + 1 };
    [up * size + c, down * size + c, r * size + left, r * size + right]
}

/// Bin of an angle in `[0, 2π)` among `q_bin` sectors; bin 0 covers `[0, 2π/q_bin)`.
#[inline]
pub fn angle_bin(theta: f64, q_bin: u32) -> usize {
    let b = (theta * f64::from(q_bin) / TAU).floor();
    if b <= 0.0 {
        0
    } else {
        (b as usize).min(q_bin as usize - 1)
    }
}

/// Reduces an arbitrary angle into `[0, 2π)`.
#[inline]
pub fn wrap_angle(theta: f64) -> f64 {
    let r = theta.rem_euclid(TAU);
    // rem_euclid can round up to exactly TAU for tiny negative inputs
    if r >= TAU {
        0.0
    } else {
        r
    }
}

#[derive(Debug, Clone)]
pub struct SpinLattice {
    params: ModelParams,
    spins: Spins,
    neighbors: Vec<[u32; 4]>,
    /// `cos(2π d / q)` for `d = 0..2q`, indexed by `a + q - b`.
    cos_diff: Vec<f64>,
    local: Option<LocalTable>,
    /// `(cos θ, sin θ)` per site, XY only.
    unit: Vec<(f64, f64)>,
    energy: f64,
    census: Vec<u64>,
    accepted_since_resync: u64,
}

impl SpinLattice {
    pub fn new(params: ModelParams, fill: Fill) -> Result<Self> {
        params.validate()?;
        let n = params.n_sites();
        let spins = match (params.q, fill) {
            (Cardinality::Finite(q), Fill::Polarized(s)) => {
                Spins::Discrete(vec![discrete_state(s, q)?; n])
            }
            (Cardinality::Continuous { .. }, Fill::Polarized(s)) => {
                Spins::Continuous(vec![continuous_state(s)?; n])
            }
            (Cardinality::Finite(q), Fill::UniformRandom(id)) => {
                let mut rng = RngStream::new(id);
                Spins::Discrete((0..n).map(|_| rng.below(u64::from(q)) as u16).collect())
            }
            (Cardinality::Continuous { .. }, Fill::UniformRandom(id)) => {
                let mut rng = RngStream::new(id);
                Spins::Continuous((0..n).map(|_| rng.angle()).collect())
            }
            (q, Fill::Explicit(list)) => {
                if list.len() != n {
                    return Err(Error::FillLength {
                        expected: n,
                        got: list.len(),
                    });
                }
                match q {
                    Cardinality::Finite(q) => Spins::Discrete(
                        list.into_iter()
                            .map(|s| discrete_state(s, q))
                            .collect::<Result<_>>()?,
                    ),
                    Cardinality::Continuous { .. } => Spins::Continuous(
                        list.into_iter()
                            .map(continuous_state)
                            .collect::<Result<_>>()?,
                    ),
                }
            }
        };
        let size = params.size;
        let neighbors = (0..n)
            .map(|i| neighbors_unchecked(i, size).map(|j| j as u32))
            .collect();
        let cos_diff = match params.q {
            Cardinality::Finite(q) => (0..2 * q)
                .map(|d| (TAU * f64::from(d) / f64::from(q)).cos())
                .collect(),
            Cardinality::Continuous { .. } => Vec::new(),
        };
        let local = match params.q {
            Cardinality::Finite(q) if q <= LocalTable::MAX_Q => {
                Some(LocalTable::new(q as usize, &cos_diff, params.temperature))
            }
            _ => None,
        };
        let mut lattice = SpinLattice {
            params,
            spins,
            neighbors,
            cos_diff,
            local,
            unit: Vec::new(),
            energy: 0.0,
            census: Vec::new(),
            accepted_since_resync: 0,
        };
        if let Spins::Continuous(t) = &lattice.spins {
            lattice.unit = t.iter().map(|a| { let (s, c) = a.sin_cos(); (c, s) }).collect();
        }
        lattice.energy = lattice.total_energy();
        lattice.census = lattice.recount();
        Ok(lattice)
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn size(&self) -> usize {
        self.params.size
    }

    pub fn n_sites(&self) -> usize {
        self.neighbors.len()
    }

    pub fn spin(&self, index: usize) -> SpinState {
        match &self.spins {
            Spins::Discrete(s) => SpinState::Discrete(s[index]),
            Spins::Continuous(a) => SpinState::Angle(a[index]),
        }
    }

    pub fn states(&self) -> Vec<SpinState> {
        (0..self.n_sites()).map(|i| self.spin(i)).collect()
    }

    /// Clock indices, or `None` for the XY model.
    pub fn discrete_spins(&self) -> Option<&[u16]> {
        match &self.spins {
            Spins::Discrete(s) => Some(s),
            Spins::Continuous(_) => None,
        }
    }

    pub fn angles(&self) -> Vec<f64> {
        let q = self.params.q;
        (0..self.n_sites()).map(|i| self.spin(i).angle(q)).collect()
    }

    /// Census species of every site: the clock index, or the angular bin for XY.
    pub fn species(&self) -> Vec<usize> {
        match &self.spins {
            Spins::Discrete(s) => s.iter().map(|&v| v as usize).collect(),
            Spins::Continuous(a) => {
                let q_bin = self.params.q.q_bin();
                a.iter().map(|&t| angle_bin(t, q_bin)).collect()
            }
        }
    }

    #[inline]
    pub fn neighbors(&self, index: usize) -> [usize; 4] {
        self.neighbors[index].map(|j| j as usize)
    }

    /// Cached total energy, maintained incrementally.
    pub fn energy(&self) -> f64 {
        self.energy
    }

    /// Per-species (or per-bin) site counts, maintained incrementally.
    pub fn census(&self) -> &[u64] {
        &self.census
    }

    /// Total energy recomputed from scratch over the `2L²` right/down bonds.
    pub fn total_energy(&self) -> f64 {
        let size = self.params.size;
        let mut e = 0.0;
        match &self.spins {
            Spins::Discrete(s) => {
                let q = self.cos_diff.len() / 2;
                for (i, nb) in self.neighbors.iter().enumerate() {
                    let a = s[i] as usize;
                    e -= self.cos_diff[a + q - s[nb[1] as usize] as usize];
                    e -= self.cos_diff[a + q - s[nb[3] as usize] as usize];
                }
            }
            Spins::Continuous(t) => {
                for i in 0..size * size {
                    let nb = self.neighbors[i];
                    e -= (t[i] - t[nb[1] as usize]).cos();
                    e -= (t[i] - t[nb[3] as usize]).cos();
                }
            }
        }
        e
    }

    fn recount(&self) -> Vec<u64> {
        let mut counts = vec![0u64; self.params.q.n_species()];
        for s in self.species() {
            counts[s] += 1;
        }
        counts
    }

    /// Energy change from setting site `index` to `proposed`, from its four bonds only.
    ///
    /// Panics if the site is out of range or the state does not match the model.
    pub fn local_energy_delta(&self, index: usize, proposed: SpinState) -> f64 {
        match (&self.spins, proposed) {
            (Spins::Discrete(_), SpinState::Discrete(s)) => {
                assert!((s as usize) < self.cos_diff.len() / 2, "spin {s} out of range");
                self.discrete_delta(index, s)
            }
            (Spins::Continuous(_), SpinState::Angle(t)) => {
                let (sn, cn) = t.sin_cos();
                self.continuous_delta(index, cn, sn)
            }
            _ => panic!("spin state {proposed:?} does not match the model"),
        }
    }

    pub(crate) fn local_table(&self) -> Option<&LocalTable> {
        self.local.as_ref()
    }

    #[inline]
    pub(crate) fn discrete_spin(&self, index: usize) -> u16 {
        match &self.spins {
            Spins::Discrete(s) => s[index],
            Spins::Continuous(_) => unreachable!(),
        }
    }

    /// Local-configuration indices of site `index` in its current state and
    /// in state `new`, for lookups in the [`LocalTable`].
    #[inline]
    pub(crate) fn local_indices(&self, table: &LocalTable, index: usize, new: u16) -> (usize, usize) {
        let Spins::Discrete(s) = &self.spins else {
            unreachable!()
        };
        let q = table.q;
        let old = s[index] as usize + q;
        let new = new as usize + q;
        let (mut io, mut inew) = (0, 0);
        for &j in &self.neighbors[index] {
            let n = s[j as usize] as usize;
            io = io * q + table.mod_diff[old - n] as usize;
            inew = inew * q + table.mod_diff[new - n] as usize;
        }
        (io, inew)
    }

    #[inline]
    pub(crate) fn discrete_delta(&self, index: usize, new: u16) -> f64 {
        let Spins::Discrete(s) = &self.spins else {
            unreachable!()
        };
        let q = self.cos_diff.len() / 2;
        let old = s[index] as usize + q;
        let new = new as usize + q;
        let mut de = 0.0;
        for &j in &self.neighbors[index] {
            let n = s[j as usize] as usize;
            de += self.cos_diff[old - n] - self.cos_diff[new - n];
        }
        de
    }

    /// Energy change for moving XY site `index` to the unit vector `(cn, sn)`.
    #[inline]
    pub(crate) fn continuous_delta(&self, index: usize, cn: f64, sn: f64) -> f64 {
        let (co, so) = self.unit[index];
        let (mut sum_c, mut sum_s) = (0.0, 0.0);
        for &j in &self.neighbors[index] {
            let (c, s) = self.unit[j as usize];
            sum_c += c;
            sum_s += s;
        }
        (co - cn) * sum_c + (so - sn) * sum_s
    }

    /// Writes `state` at `index`, updating energy and census incrementally.
    pub fn set_spin(&mut self, index: usize, state: SpinState) -> Result<()> {
        if index >= self.n_sites() {
            return Err(Error::SiteOutOfRange {
                index,
                n_sites: self.n_sites(),
            });
        }
        match (&self.spins, state) {
            (Spins::Discrete(_), SpinState::Discrete(_)) => {
                let s = discrete_state(state, self.params.q.q_bin())?;
                let de = self.discrete_delta(index, s);
                self.apply_discrete(index, s, de);
            }
            (Spins::Continuous(_), SpinState::Angle(t)) => {
                let t = continuous_state(SpinState::Angle(t))?;
                let (sn, cn) = t.sin_cos();
                let de = self.continuous_delta(index, cn, sn);
                self.apply_continuous(index, t, (cn, sn), de);
            }
            _ => return Err(Error::InvalidSpin(format!("{state:?}"))),
        }
        Ok(())
    }

    #[inline]
    pub(crate) fn apply_discrete(&mut self, index: usize, new: u16, delta: f64) {
        let Spins::Discrete(s) = &mut self.spins else {
            unreachable!()
        };
        let old = std::mem::replace(&mut s[index], new);
        self.census[old as usize] -= 1;
        self.census[new as usize] += 1;
        self.energy += delta;
        self.note_accept();
    }

    #[inline]
    pub(crate) fn apply_continuous(&mut self, index: usize, new: f64, unit: (f64, f64), delta: f64) {
        let q_bin = self.params.q.q_bin();
        let Spins::Continuous(t) = &mut self.spins else {
            unreachable!()
        };
        let old = std::mem::replace(&mut t[index], new);
        self.unit[index] = unit;
        self.census[angle_bin(old, q_bin)] -= 1;
        self.census[angle_bin(new, q_bin)] += 1;
        self.energy += delta;
        self.note_accept();
    }

    #[inline]
    fn note_accept(&mut self) {
        self.accepted_since_resync += 1;
        if self.accepted_since_resync >= RESYNC_INTERVAL {
            self.resync();
        }
    }

    /// Recomputes energy and census from scratch, checking the cached values.
    ///
    /// Panics if the cached energy drifted by more than [`ENERGY_DRIFT_TOLERANCE`]
    /// or the census disagrees with a full recount.
    pub fn resync(&mut self) {
        let fresh = self.total_energy();
        assert!(
            (fresh - self.energy).abs() <= ENERGY_DRIFT_TOLERANCE,
            "cached energy {} drifted from recomputed {}",
            self.energy,
            fresh
        );
        let counts = self.recount();
        assert_eq!(counts, self.census, "incremental census out of sync");
        self.energy = fresh;
        self.accepted_since_resync = 0;
    }
}

/// Local energies `-Σ_k cos(θ - θ_k)` of a site against its four neighbours,
/// indexed by the four differences `(s - s_k) mod q` in base q, together
/// with the Boltzmann weights of those energies.
#[derive(Debug, Clone)]
pub(crate) struct LocalTable {
    q: usize,
    mod_diff: Vec<u16>,
    pub(crate) energy: Vec<f64>,
    /// `exp(-(ε + 4)/T)`; absent when it would underflow or `T` is 0 or infinite.
    pub(crate) weight: Option<Vec<f64>>,
}

impl LocalTable {
    const MAX_Q: u32 = 16;
    /// Weights are tabulated only while `8/T` stays well inside f64 range.
    const MAX_EXPONENT: f64 = 600.0;

    fn new(q: usize, cos_diff: &[f64], temperature: f64) -> Self {
        let mod_diff = (0..2 * q).map(|d| (d % q) as u16).collect();
        let energy: Vec<f64> = (0..q.pow(4))
            .map(|idx| {
                let (mut rest, mut e) = (idx, 0.0);
                for _ in 0..4 {
                    e -= cos_diff[rest % q];
                    rest /= q;
                }
                e
            })
            .collect();
        let tabulate =
            temperature > 0.0 && temperature.is_finite() && 8.0 / temperature < Self::MAX_EXPONENT;
        let weight = tabulate.then(|| {
            energy
                .iter()
                .map(|e| (-(e + 4.0) / temperature).exp())
                .collect()
        });
        LocalTable {
            q,
            mod_diff,
            energy,
            weight,
        }
    }
}

fn discrete_state(s: SpinState, q: u32) -> Result<u16> {
    match s {
        SpinState::Discrete(v) if u32::from(v) < q => Ok(v),
        other => Err(Error::InvalidSpin(format!("{other:?} for q = {q}"))),
    }
}

fn continuous_state(s: SpinState) -> Result<f64> {
    match s {
        SpinState::Angle(t) if t.is_finite() => Ok(wrap_angle(t)),
        other => Err(Error::InvalidSpin(format!("{other:?} for the XY model"))),
    }
}
