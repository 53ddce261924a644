//! Long single-trajectory recordings of magnetization and polarization angle.

use crate::dynamics::{sweep, SweepClock};
use crate::error::{Error, Result};
use crate::lattice::{Fill, SpinLattice};
use crate::observables::{ObservableSample, Trajectory};
use crate::params::ModelParams;
use crate::rng::{RngStream, StreamId};

/// Evolves a lattice for `duration` MCS on stream `(master_seed, 0)`,
/// sampling at `t = 0` and every `sampling_interval` MCS after that.
pub fn record_precession(
    params: &ModelParams,
    master_seed: u64,
    duration: u64,
    sampling_interval: u64,
    start: Fill,
) -> Result<Trajectory> {
    if sampling_interval == 0 || duration < sampling_interval {
        return Err(Error::InvalidParams(format!(
            "need duration ≥ sampling_interval ≥ 1, got {duration} and {sampling_interval}"
        )));
    }
    let stream = StreamId::new(master_seed, 0);
    let mut lattice = SpinLattice::new(*params, start)?;
    let mut rng = RngStream::new(stream);
    let mut clock = SweepClock::default();
    let mut samples = Vec::with_capacity((duration / sampling_interval) as usize + 1);
    samples.push(ObservableSample::measure(&lattice, 0));
    while clock.mcs + sampling_interval <= duration {
        for _ in 0..sampling_interval {
            sweep(&mut lattice, &mut rng, &mut clock);
        }
        samples.push(ObservableSample::measure(&lattice, clock.mcs));
    }
    Ok(Trajectory {
        params: *params,
        sampling_interval,
        stream,
        samples,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::SpinState;
    use crate::observables::max_energy_excursion;

    #[test]
    fn sample_count_and_spacing() {
        let params = ModelParams::clock(8, 6, 0.9).unwrap();
        let traj =
            record_precession(&params, 3, 100, 10, Fill::Polarized(SpinState::Discrete(0))).unwrap();
        assert_eq!(traj.samples.len(), 11);
        assert!(traj.samples.windows(2).all(|w| w[1].t == w[0].t + 10));
        assert_eq!(traj.samples[0].t, 0);
        assert!(traj
            .samples
            .iter()
            .all(|s| s.counts.iter().sum::<u64>() == 64 && (0.0..=1.0).contains(&s.m)));
        assert!(max_energy_excursion(&traj).unwrap() > 0.0);
    }

    #[test]
    fn frozen_precession_stays_put() {
        let params = ModelParams::clock(8, 6, 0.0).unwrap();
        let traj =
            record_precession(&params, 3, 50, 5, Fill::Polarized(SpinState::Discrete(0))).unwrap();
        assert!(traj.samples.iter().all(|s| s.m == 1.0 && s.theta == 0.0));
    }

    #[test]
    fn rejects_bad_intervals() {
        let params = ModelParams::clock(8, 6, 1.0).unwrap();
        let fill = || Fill::Polarized(SpinState::Discrete(0));
        assert!(record_precession(&params, 0, 10, 0, fill()).is_err());
        assert!(record_precession(&params, 0, 5, 10, fill()).is_err());
    }
}
