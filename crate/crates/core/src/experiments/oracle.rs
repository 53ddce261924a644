//! Exact expected memory time on tiny lattices, by enumerating every
//! configuration and solving the hitting-time equations of the Metropolis
//! chain. Shares nothing with the simulation path except the stop rule.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::experiments::memory::StopRule;
use crate::lattice::neighbor_indices;
use crate::params::{Cardinality, ModelParams};

/// Largest state space accepted for per-attempt hitting times.
pub const MAX_STATES: u128 = 1_000_000;
/// Largest state space accepted for per-sweep hitting times (dense kernel powers).
pub const MAX_SWEEP_STATES: u128 = 1024;
/// Transient-state count up to which the per-attempt system is solved densely.
const DENSE_LIMIT: usize = 4096;

/// When the stop rule is checked.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckCadence {
    /// After every single-spin attempt; the result is attempts divided by the site count.
    PerAttempt,
    /// After every `check_interval` full sweeps, as in the memory-time protocol.
    PerSweep,
}

/// A clock model on an arbitrary small bond graph.
#[derive(Debug, Clone)]
pub struct HittingTimeProblem {
    pub n_sites: usize,
    pub q: u32,
    /// Undirected bonds, each listed once.
    pub bonds: Vec<(usize, usize)>,
    pub temperature: f64,
    pub stop: StopRule,
    /// Initial configuration, one spin index per site.
    pub start: Vec<u16>,
}

impl HittingTimeProblem {
    /// Torus problem from model parameters, started fully polarized in species 0.
    pub fn torus(params: &ModelParams, stop: StopRule) -> Result<Self> {
        params.validate()?;
        let Cardinality::Finite(q) = params.q else {
            return Err(Error::RequiresFiniteQ("exact hitting-time oracle"));
        };
        let size = params.size;
        let mut bonds = Vec::with_capacity(2 * size * size);
        for i in 0..size * size {
            let nb = neighbor_indices(i, size)?;
            bonds.push((i, nb[1]));
            bonds.push((i, nb[3]));
        }
        Ok(HittingTimeProblem {
            n_sites: size * size,
            q,
            bonds,
            temperature: params.temperature,
            stop,
            start: vec![0; size * size],
        })
    }

    fn n_states(&self) -> u128 {
        u32::try_from(self.n_sites)
            .ok()
            .and_then(|n| u128::from(self.q).checked_pow(n))
            .unwrap_or(u128::MAX)
    }

    fn check(&self, limit: u128) -> Result<usize> {
        if self.temperature.is_nan() || self.temperature <= 0.0 {
            return Err(Error::InvalidParams("oracle needs T > 0".into()));
        }
        if self.q < 2 || self.start.len() != self.n_sites {
            return Err(Error::InvalidParams("malformed hitting-time problem".into()));
        }
        let states = self.n_states();
        if states > limit {
            return Err(Error::StateSpaceTooLarge { states, limit });
        }
        Ok(states as usize)
    }

    fn digits(&self, mut x: usize) -> Vec<usize> {
        let q = self.q as usize;
        (0..self.n_sites)
            .map(|_| {
                let d = x % q;
                x /= q;
                d
            })
            .collect()
    }

    fn encode(&self, spins: &[u16]) -> usize {
        let q = self.q as usize;
        spins.iter().rev().fold(0, |acc, &s| acc * q + s as usize)
    }

    fn energy(&self, digits: &[usize]) -> f64 {
        let q = f64::from(self.q);
        self.bonds
            .iter()
            .map(|&(i, j)| {
                -(std::f64::consts::TAU * (digits[i] as f64 - digits[j] as f64) / q).cos()
            })
            .sum()
    }

    fn absorbing(&self, digits: &[usize]) -> bool {
        let mut counts = vec![0u64; self.q as usize];
        for &d in digits {
            counts[d] += 1;
        }
        self.stop.holds(&counts)
    }

    /// Off-diagonal single-attempt transitions `(to, probability)` from every state.
    fn kernel_rows(&self, n_states: usize, energies: &[f64]) -> Vec<Vec<(usize, f64)>> {
        let q = self.q as usize;
        let pick = 1.0 / (self.n_sites as f64 * (q - 1) as f64);
        let mut pow = vec![1usize; self.n_sites];
        for i in 1..self.n_sites {
            pow[i] = pow[i - 1] * q;
        }
        (0..n_states)
            .map(|x| {
                let digits = self.digits(x);
                let mut row = Vec::with_capacity(self.n_sites * (q - 1));
                for (i, &d) in digits.iter().enumerate() {
                    for v in (0..q).filter(|&v| v != d) {
                        let y = x + v * pow[i] - d * pow[i];
                        let de = energies[y] - energies[x];
                        let a = if de <= 0.0 {
                            1.0
                        } else {
                            (-de / self.temperature).exp()
                        };
                        row.push((y, a * pick));
                    }
                }
                row
            })
            .collect()
    }

    fn tables(&self, n_states: usize) -> (Vec<f64>, Vec<bool>) {
        (0..n_states)
            .map(|x| {
                let d = self.digits(x);
                (self.energy(&d), self.absorbing(&d))
            })
            .unzip()
    }

    /// Expected number of attempts until the stop rule first holds, checked after every attempt.
    pub fn expected_attempts(&self) -> Result<f64> {
        let n_states = self.check(MAX_STATES)?;
        let (energies, absorbing) = self.tables(n_states);
        let start = self.encode(&self.start);
        if absorbing[start] {
            return Ok(0.0);
        }
        let rows = self.kernel_rows(n_states, &energies);
        // transient states get dense indices
        let mut index = vec![usize::MAX; n_states];
        let transient: Vec<usize> = (0..n_states).filter(|&x| !absorbing[x]).collect();
        for (k, &x) in transient.iter().enumerate() {
            index[x] = k;
        }
        // (I - P_TT) h = 1, written with the stay probability folded in:
        // (1 - p_stay) h_x - Σ_{y≠x transient} p_xy h_y = 1, where 1 - p_stay = Σ_y p_xy.
        let system: Vec<(f64, Vec<(usize, f64)>)> = transient
            .iter()
            .map(|&x| {
                let leave: f64 = rows[x].iter().map(|&(_, p)| p).sum();
                let coupled = rows[x]
                    .iter()
                    .filter(|&&(y, _)| !absorbing[y])
                    .map(|&(y, p)| (index[y], p))
                    .collect();
                (leave, coupled)
            })
            .collect();
        let h = if system.len() <= DENSE_LIMIT {
            solve_dense(&system)?
        } else {
            solve_gauss_seidel(&system)?
        };
        Ok(h[index[start]])
    }

    /// Expected number of stop-rule checks until it first holds, when checks
    /// happen only after every `sweeps_per_check · n_sites` attempts.
    pub fn expected_checks(&self, sweeps_per_check: u64) -> Result<f64> {
        let n_states = self.check(MAX_SWEEP_STATES)?;
        if sweeps_per_check == 0 {
            return Err(Error::InvalidParams("sweeps_per_check must be at least 1".into()));
        }
        let (energies, absorbing) = self.tables(n_states);
        let start = self.encode(&self.start);
        if absorbing[start] {
            return Ok(0.0);
        }
        let rows = self.kernel_rows(n_states, &energies);
        let mut kernel = DMatrix::<f64>::zeros(n_states, n_states);
        for (x, row) in rows.iter().enumerate() {
            let mut leave = 0.0;
            for &(y, p) in row {
                kernel[(x, y)] += p;
                leave += p;
            }
            kernel[(x, x)] += 1.0 - leave;
        }
        let steps = sweeps_per_check * self.n_sites as u64;
        let block = matrix_power(kernel, steps);
        let transient: Vec<usize> = (0..n_states).filter(|&x| !absorbing[x]).collect();
        let n = transient.len();
        let mut a = DMatrix::<f64>::identity(n, n);
        for (r, &x) in transient.iter().enumerate() {
            for (c, &y) in transient.iter().enumerate() {
                a[(r, c)] -= block[(x, y)];
            }
        }
        let h = a
            .lu()
            .solve(&DVector::from_element(n, 1.0))
            .ok_or_else(|| Error::Solve("singular per-sweep system".into()))?;
        let k = transient.iter().position(|&x| x == start).expect("start is transient");
        Ok(h[k])
    }
}

fn matrix_power(mut base: DMatrix<f64>, mut exp: u64) -> DMatrix<f64> {
    let n = base.nrows();
    let mut acc = DMatrix::<f64>::identity(n, n);
    while exp > 0 {
        if exp & 1 == 1 {
            acc = &acc * &base;
        }
        exp >>= 1;
        if exp > 0 {
            base = &base * &base;
        }
    }
    acc
}

fn solve_dense(system: &[(f64, Vec<(usize, f64)>)]) -> Result<Vec<f64>> {
    let n = system.len();
    let mut a = DMatrix::<f64>::zeros(n, n);
    for (r, (diag, coupled)) in system.iter().enumerate() {
        a[(r, r)] += diag;
        for &(c, p) in coupled {
            a[(r, c)] -= p;
        }
    }
    let h = a
        .lu()
        .solve(&DVector::from_element(n, 1.0))
        .ok_or_else(|| Error::Solve("singular hitting-time system".into()))?;
    Ok(h.iter().copied().collect())
}

fn solve_gauss_seidel(system: &[(f64, Vec<(usize, f64)>)]) -> Result<Vec<f64>> {
    const MAX_ITERATIONS: usize = 1_000_000;
    const TOLERANCE: f64 = 1e-13;
    let mut h = vec![0.0; system.len()];
    for _ in 0..MAX_ITERATIONS {
        let mut change: f64 = 0.0;
        for (r, (diag, coupled)) in system.iter().enumerate() {
            let s: f64 = coupled.iter().map(|&(c, p)| p * h[c]).sum();
            let next = (1.0 + s) / diag;
            change = change.max((next - h[r]).abs() / next.abs().max(1.0));
            h[r] = next;
        }
        if change < TOLERANCE {
            return Ok(h);
        }
    }
    Err(Error::Solve("Gauss-Seidel did not converge".into()))
}

/// Exact expected memory time in MCS from the polarized state of a tiny torus.
///
/// `PerAttempt` returns the expected attempt count divided by `L²`;
/// `PerSweep` returns the expected number of sweeps when the rule is checked
/// every `stop.check_interval` sweeps, which is what
/// [`memory_time_single`](crate::experiments::memory::memory_time_single) measures.
pub fn exact_hitting_time_oracle(
    params: &ModelParams,
    stop: StopRule,
    cadence: CheckCadence,
) -> Result<f64> {
    let problem = HittingTimeProblem::torus(params, stop)?;
    match cadence {
        CheckCadence::PerAttempt => {
            Ok(problem.expected_attempts()? / problem.n_sites as f64)
        }
        CheckCadence::PerSweep => Ok(problem.expected_checks(stop.check_interval)?
            * stop.check_interval as f64),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiments::memory::StopKind;

    fn four_spins(temperature: f64, start: Vec<u16>) -> HittingTimeProblem {
        HittingTimeProblem {
            n_sites: 4,
            q: 2,
            bonds: vec![(0, 1), (1, 2), (2, 3), (3, 0)],
            temperature,
            stop: StopRule::new(StopKind::PluralityLoss),
            start,
        }
    }

    /// Birth–death chain on the number k of flipped spins at infinite
    /// temperature: E_k = 1 + (k/4) E_{k-1} + ((4-k)/4) E_{k+1}, absorbing at k = 3.
    fn birth_death_recurrence() -> f64 {
        // E0 = 1 + E1; E1 = 1 + E0/4 + 3 E2/4; E2 = 1 + E1/2
        // substituting: E1 = 2 + 5 E1 / 8
        let e1 = 2.0 / (1.0 - 5.0 / 8.0);
        1.0 + e1
    }

    #[test]
    fn infinite_temperature_four_spins() {
        let analytic = birth_death_recurrence();
        assert!((analytic - 19.0 / 3.0).abs() < 1e-12);
        let p = four_spins(f64::INFINITY, vec![0; 4]);
        let attempts = p.expected_attempts().unwrap();
        assert!((attempts - 19.0 / 3.0).abs() < 1e-10, "{attempts}");
        assert!((attempts / 4.0 - 19.0 / 12.0).abs() < 1e-10);
    }

    #[test]
    fn absorbing_start_is_zero() {
        let p = four_spins(1.0, vec![1, 1, 1, 0]);
        assert_eq!(p.expected_attempts().unwrap(), 0.0);
        assert_eq!(p.expected_checks(1).unwrap(), 0.0);
    }

    #[test]
    fn rejects_oversized_and_continuous() {
        let big = ModelParams::clock(5, 2, 1.0).unwrap();
        assert!(matches!(
            exact_hitting_time_oracle(&big, StopRule::default(), CheckCadence::PerSweep),
            Err(Error::StateSpaceTooLarge { .. })
        ));
        let huge = ModelParams::clock(64, 6, 1.0).unwrap();
        assert!(matches!(
            exact_hitting_time_oracle(&huge, StopRule::default(), CheckCadence::PerAttempt),
            Err(Error::StateSpaceTooLarge { .. })
        ));
        let xy = ModelParams::xy(3, 6, 1.0).unwrap();
        assert!(exact_hitting_time_oracle(&xy, StopRule::default(), CheckCadence::PerAttempt).is_err());
        let frozen = ModelParams::clock(3, 2, 0.0).unwrap();
        assert!(exact_hitting_time_oracle(&frozen, StopRule::default(), CheckCadence::PerAttempt).is_err());
    }

    #[test]
    fn dense_and_iterative_solvers_agree() {
        let p = HittingTimeProblem::torus(
            &ModelParams::clock(3, 2, 4.0).unwrap(),
            StopRule::default(),
        )
        .unwrap();
        let n_states = p.check(MAX_STATES).unwrap();
        let (energies, absorbing) = p.tables(n_states);
        let rows = p.kernel_rows(n_states, &energies);
        let mut index = vec![usize::MAX; n_states];
        let transient: Vec<usize> = (0..n_states).filter(|&x| !absorbing[x]).collect();
        for (k, &x) in transient.iter().enumerate() {
            index[x] = k;
        }
        let system: Vec<_> = transient
            .iter()
            .map(|&x| {
                let leave: f64 = rows[x].iter().map(|&(_, pr)| pr).sum();
                let coupled = rows[x]
                    .iter()
                    .filter(|&&(y, _)| !absorbing[y])
                    .map(|&(y, pr)| (index[y], pr))
                    .collect();
                (leave, coupled)
            })
            .collect();
        let a = solve_dense(&system).unwrap();
        let b = solve_gauss_seidel(&system).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-9 * x.abs().max(1.0));
        }
    }

    #[test]
    fn sweep_checks_never_beat_attempt_checks() {
        let params = ModelParams::clock(3, 2, 4.0).unwrap();
        let per_attempt =
            exact_hitting_time_oracle(&params, StopRule::default(), CheckCadence::PerAttempt).unwrap();
        let per_sweep =
            exact_hitting_time_oracle(&params, StopRule::default(), CheckCadence::PerSweep).unwrap();
        assert!(per_attempt > 0.0);
        assert!(per_sweep > per_attempt, "{per_sweep} vs {per_attempt}");
    }

    #[test]
    fn single_sweep_interval_at_infinite_temperature() {
        // After one sweep at T = ∞ every state is reachable; the number of
        // sweeps is geometric, so E = 1 / P(absorbed at a check) is ≥ 1.
        let p = four_spins(f64::INFINITY, vec![0; 4]);
        let checks = p.expected_checks(1).unwrap();
        assert!(checks >= 1.0);
    }
}
