//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.
//!
//! Run a subset with `cargo test --test acceptance -- 1 5 8`.

mod common;

use std::f64::consts::TAU;
use std::time::Instant;

use clock_memory::cluster::{largest_island_scan, label_species, IslandScanConfig};
use clock_memory::dynamics::{metropolis_attempt, sweep, SweepClock};
use clock_memory::experiments::memory::first_passage_attempts;
use clock_memory::experiments::oracle::HittingTimeProblem;
use clock_memory::experiments::{
    exact_hitting_time_oracle, record_precession, run_ensemble, CheckCadence, StopKind, StopRule,
};
use clock_memory::experiments::memory::DEFAULT_MAX_STEPS;
use clock_memory::experiments::ensemble::mean_and_stderr;
use clock_memory::fit::{fit_power_law, growth_classifier, GrowthClass, ScalingPoint, Statistic};
use clock_memory::io::write_records;
use clock_memory::lattice::wrap_angle;
use clock_memory::observables::{magnetization, magnetization_from_counts, species_census};
use clock_memory::rng::{RngStream, StreamId};
use clock_memory::{Cardinality, Fill, ModelParams, SpinLattice, SpinState};

use common::*;

const SEED: u64 = 1;
const REALIZATIONS: usize = 500;
const MARGIN: f64 = clock_memory::fit::DEFAULT_GROWTH_MARGIN;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

/// Ensemble means per size with the plurality-loss rule.
fn scaling_points(q: Cardinality, temperature: f64, sizes: &[usize], n: usize) -> Vec<ScalingPoint> {
    sizes
        .iter()
        .map(|&size| {
            let params = ModelParams::new(size, q, temperature).unwrap();
            let (summary, _) =
                run_ensemble(&params, n, SEED, StopRule::default(), DEFAULT_MAX_STEPS, 0).unwrap();
            let point = ScalingPoint::from_summary(&summary, Statistic::Mean)
                .unwrap_or_else(|e| panic!("L = {size}: {e}"));
            println!(
                "    q={q} T={temperature} L={size}: tau = {:.1} ± {:.1} MCS ({} realizations)",
                point.mean_tau, point.stderr_tau, point.n
            );
            point
        })
        .collect()
}

fn exponent_check(points: &[ScalingPoint], lo: f64, hi: f64) -> Outcome {
    let fit = fit_power_law(points).unwrap();
    let slopes: Vec<String> = fit.local_slopes.iter().map(|s| format!("{s:.3}")).collect();
    outcome(
        (lo..=hi).contains(&fit.z),
        format!(
            "z = {:.4} ± {:.4} (target [{lo}, {hi}]), R² = {:.5}, local slopes [{}]",
            fit.z,
            fit.z_err,
            fit.r_squared,
            slopes.join(", ")
        ),
    )
}

fn dataset_q6() -> Vec<ScalingPoint> {
    scaling_points(Cardinality::Finite(6), 0.71, &[16, 24, 32, 48, 64], REALIZATIONS)
}

fn criterion_1(q6: &[ScalingPoint]) -> Outcome {
    exponent_check(q6, 1.85, 2.15)
}

fn criterion_2() -> Outcome {
    let points = scaling_points(Cardinality::Finite(8), 0.43, &[16, 24, 32, 48, 64], REALIZATIONS);
    exponent_check(&points, 1.8, 2.2)
}

fn criterion_3() -> Outcome {
    let points = scaling_points(
        Cardinality::Continuous { q_bin: 6 },
        0.80,
        &[16, 24, 32, 48],
        REALIZATIONS,
    );
    exponent_check(&points, 1.75, 2.2)
}

fn criterion_4(q6: &[ScalingPoint]) -> Outcome {
    // τ grows like exp(c L) here, so L = 20 realizations are expensive; 50
    // keeps the slope noise well under the observed rise.
    let ising = scaling_points(Cardinality::Finite(2), 2.0, &[8, 12, 16, 20], 50);
    let ising_class = growth_classifier(&ising, MARGIN).unwrap();
    let ising_slopes = fit_power_law(&ising).unwrap().local_slopes;
    let q6_class = growth_classifier(q6, MARGIN).unwrap();
    outcome(
        ising_class == GrowthClass::SuperPolynomial && q6_class == GrowthClass::PolynomialConsistent,
        format!(
            "q=2 T=2.0: {} (local slopes {:.2?}); q=6 T=0.71: {}",
            ising_class.as_str(),
            ising_slopes,
            q6_class.as_str()
        ),
    )
}

fn criterion_5() -> Outcome {
    let params = ModelParams::clock(3, 2, 4.0).unwrap();
    let stop = StopRule::default();
    let n = 10_000;

    let sweep_oracle = exact_hitting_time_oracle(&params, stop, CheckCadence::PerSweep).unwrap();
    let (summary, _) = run_ensemble(&params, n, SEED, stop, DEFAULT_MAX_STEPS, 0).unwrap();
    let (sweep_mean, sweep_se) = (summary.mean_tau.unwrap(), summary.stderr_tau.unwrap());
    let sweep_ok = summary.is_reliable() && (sweep_mean - sweep_oracle).abs() <= 3.0 * sweep_se;

    let attempt_oracle = exact_hitting_time_oracle(&params, stop, CheckCadence::PerAttempt).unwrap();
    let attempts: Vec<f64> = (0..n as u64)
        .map(|i| {
            first_passage_attempts(&params, i, SEED, stop, u64::MAX).unwrap().unwrap() as f64
                / params.n_sites() as f64
        })
        .collect();
    let (attempt_mean, attempt_se) = mean_and_stderr(&attempts).unwrap();
    let attempt_ok = (attempt_mean - attempt_oracle).abs() <= 3.0 * attempt_se;

    // 4-spin ring at T = ∞: E0 = 1 + E1, E1 = 1 + E0/4 + 3E2/4, E2 = 1 + E1/2.
    let e1: f64 = 2.0 / (1.0 - 5.0 / 8.0);
    let recurrence = (1.0 + e1) / 4.0;
    let ring = HittingTimeProblem {
        n_sites: 4,
        q: 2,
        bonds: vec![(0, 1), (1, 2), (2, 3), (3, 0)],
        temperature: f64::INFINITY,
        stop: StopRule::new(StopKind::PluralityLoss),
        start: vec![0; 4],
    };
    let ring_mcs = ring.expected_attempts().unwrap() / 4.0;
    let ring_ok = (ring_mcs - 19.0 / 12.0).abs() < 1e-10 && (recurrence - 19.0 / 12.0).abs() < 1e-12;

    outcome(
        sweep_ok && attempt_ok && ring_ok,
        format!(
            "per-sweep: sim {sweep_mean:.4} ± {sweep_se:.4} vs exact {sweep_oracle:.4}; \
             per-attempt: sim {attempt_mean:.4} ± {attempt_se:.4} vs exact {attempt_oracle:.4}; \
             ring T=∞: {ring_mcs:.12} vs 19/12"
        ),
    )
}

fn criterion_6() -> Outcome {
    let (size, q, temperature) = (3, 2u32, 4.0);
    let params = ModelParams::clock(size, q, temperature).unwrap();
    let exact = boltzmann_distribution(size, q, temperature);
    let mut lattice = SpinLattice::new(params, Fill::UniformRandom(StreamId::new(SEED, 1))).unwrap();
    let mut rng = RngStream::new(StreamId::new(SEED, 2));
    let mut clock = SweepClock::default();
    for _ in 0..1_000 {
        sweep(&mut lattice, &mut rng, &mut clock);
    }
    let n_samples = 2_000_000;
    let mut hist = vec![0u64; exact.len()];
    for _ in 0..n_samples {
        sweep(&mut lattice, &mut rng, &mut clock);
        hist[encode(&discrete_states(&lattice), q as usize)] += 1;
    }
    let tv = 0.5
        * hist
            .iter()
            .zip(&exact)
            .map(|(&h, &p)| (h as f64 / n_samples as f64 - p).abs())
            .sum::<f64>();
    outcome(tv < 0.02, format!("total variation {tv:.5} over {} states, {n_samples} sweeps", exact.len()))
}

fn criterion_7() -> Outcome {
    let params = ModelParams::clock(128, 6, 0.80).unwrap();
    let traj = record_precession(
        &params,
        SEED,
        1_000_000,
        1_000,
        Fill::Polarized(SpinState::Discrete(0)),
    )
    .unwrap();
    let sectors = traj.visited_sectors(6);
    let mean_m = traj.mean_magnetization().unwrap();
    outcome(
        sectors.len() >= 3 && mean_m > 0.1,
        format!("sectors visited {sectors:?}, time-averaged m = {mean_m:.4}"),
    )
}

/// π(a)P(a→b) = π(b)P(b→a) over every single-spin move of random configurations.
fn detailed_balance() -> Result<String, String> {
    let (size, q, temperature) = (3, 4u32, 0.9);
    let params = ModelParams::clock(size, q, temperature).unwrap();
    let mut worst: f64 = 0.0;
    for k in 0..50 {
        let lattice = SpinLattice::new(params, Fill::UniformRandom(StreamId::new(SEED, 100 + k))).unwrap();
        let a = lattice.total_energy();
        for site in 0..lattice.n_sites() {
            let current = discrete_states(&lattice)[site];
            for s in (0..q as u16).filter(|&s| s != current) {
                let b = a + lattice.local_energy_delta(site, SpinState::Discrete(s));
                let forward = (-a / temperature).exp() * transition_probability(a, b, 9, q, temperature);
                let backward = (-b / temperature).exp() * transition_probability(b, a, 9, q, temperature);
                worst = worst.max((forward - backward).abs() / forward.max(backward));
            }
        }
    }
    if worst < 1e-12 {
        Ok(format!("detailed balance (max rel. gap {worst:.1e})"))
    } else {
        Err(format!("detailed balance violated, rel. gap {worst:.3e}"))
    }
}

fn rotation_invariance() -> Result<String, String> {
    let q = 6u32;
    let params = ModelParams::clock(8, q, 1.0).unwrap();
    for k in 0..20 {
        let lattice = SpinLattice::new(params, Fill::UniformRandom(StreamId::new(SEED, 200 + k))).unwrap();
        let m = magnetization(&lattice);
        let shift = 1 + (k as u16 % 5);
        let rotated: Vec<SpinState> = discrete_states(&lattice)
            .iter()
            .map(|&s| SpinState::Discrete((s + shift) % q as u16))
            .collect();
        let r = SpinLattice::new(params, Fill::Explicit(rotated)).unwrap();
        let mr = magnetization(&r);
        let expected = m.theta + TAU * f64::from(shift) / f64::from(q);
        if (r.energy() - lattice.energy()).abs() > 1e-9
            || (mr.m - m.m).abs() > 1e-12
            || (m.theta_defined && angle_distance(mr.theta, expected) > 1e-9)
        {
            return Err(format!("clock rotation by {shift} broke invariance"));
        }
    }
    let xy = ModelParams::xy(8, 6, 1.0).unwrap();
    for k in 0..20 {
        let lattice = SpinLattice::new(xy, Fill::UniformRandom(StreamId::new(SEED, 300 + k))).unwrap();
        let m = magnetization(&lattice);
        let phi = 0.37 * (k + 1) as f64;
        let rotated: Vec<SpinState> = lattice
            .angles()
            .iter()
            .map(|&t| SpinState::Angle(wrap_angle(t + phi)))
            .collect();
        let r = SpinLattice::new(xy, Fill::Explicit(rotated)).unwrap();
        let mr = magnetization(&r);
        if (r.energy() - lattice.energy()).abs() > 1e-9
            || (mr.m - m.m).abs() > 1e-12
            || angle_distance(mr.theta, m.theta + phi) > 1e-9
        {
            return Err(format!("XY rotation by {phi} broke invariance"));
        }
    }
    Ok("rotation invariance".into())
}

fn cluster_equivalence() -> Result<String, String> {
    let mut checked = 0;
    for size in 3..=8 {
        for k in 0..200 {
            let n_species = 2 + k % 3;
            let species = random_species(size, n_species, SEED, (size * 1000 + k) as u64);
            for target in 0..n_species {
                let report = label_species(&species, size, target);
                let reference = flood_fill_sizes(&species, size, target);
                if report.cluster_sizes != reference
                    || report.largest != reference.first().copied().unwrap_or(0)
                    || report.cluster_sizes.iter().sum::<usize>()
                        != species.iter().filter(|&&s| s == target).count()
                {
                    return Err(format!("cluster mismatch at L = {size}, sample {k}, target {target}"));
                }
                checked += 1;
            }
        }
    }
    Ok(format!("cluster flood-fill equivalence ({checked} labelings)"))
}

fn census_consistency() -> Result<String, String> {
    for (k, q) in [2u32, 3, 6, 8, 12].into_iter().enumerate() {
        let params = ModelParams::clock(10, q, 0.7).unwrap();
        let mut lattice = SpinLattice::new(params, Fill::UniformRandom(StreamId::new(SEED, 400 + k as u64))).unwrap();
        let mut rng = RngStream::new(StreamId::new(SEED, 500 + k as u64));
        for _ in 0..20_000 {
            metropolis_attempt(&mut lattice, &mut rng);
        }
        let counts = species_census(&lattice);
        if counts != lattice.census() || counts.iter().sum::<u64>() != 100 {
            return Err(format!("census mismatch at q = {q}"));
        }
        let direct = {
            let (re, im) = discrete_states(&lattice).iter().fold((0.0, 0.0), |(re, im), &s| {
                let t = TAU * f64::from(s) / f64::from(q);
                (re + t.cos(), im + t.sin())
            });
            (re / 100.0).hypot(im / 100.0)
        };
        let from_counts = magnetization_from_counts(&counts, q, 100.0);
        if (from_counts.m - direct).abs() > 1e-12 || (magnetization(&lattice).m - direct).abs() > 1e-12 {
            return Err(format!("magnetization mismatch at q = {q}"));
        }
        if (lattice.energy() - energy_of_angles(&clock_angles(&discrete_states(&lattice), q), 10)).abs() > 1e-9 {
            return Err(format!("cached energy mismatch at q = {q}"));
        }
    }
    Ok("census/magnetization consistency".into())
}

fn parallel_determinism() -> Result<String, String> {
    let params = ModelParams::clock(8, 6, 0.71).unwrap();
    let bytes = |parallelism| {
        let (_, records) = run_ensemble(&params, 200, SEED, StopRule::default(), DEFAULT_MAX_STEPS, parallelism).unwrap();
        let mut buf = Vec::new();
        write_records(&mut buf, &records).unwrap();
        buf
    };
    if bytes(1) == bytes(8) {
        Ok("parallelism 1 vs 8 byte-identical".into())
    } else {
        Err("record lists differ between parallelism 1 and 8".into())
    }
}

fn synthetic_fit() -> Result<String, String> {
    let points: Vec<ScalingPoint> = [8usize, 16, 32, 64, 128]
        .iter()
        .map(|&l| ScalingPoint::new(l, 5.0 * (l as f64).powf(2.12), 0.0, 100))
        .collect();
    let fit = fit_power_law(&points).map_err(|e| e.to_string())?;
    if (fit.z - 2.12).abs() < 1e-12 && (fit.amplitude() - 5.0).abs() < 1e-10 {
        Ok(format!("synthetic fit (z error {:.1e})", (fit.z - 2.12).abs()))
    } else {
        Err(format!("synthetic fit gave z = {}, amplitude {}", fit.z, fit.amplitude()))
    }
}

fn criterion_8() -> Outcome {
    let checks = [
        detailed_balance(),
        rotation_invariance(),
        cluster_equivalence(),
        census_consistency(),
        parallel_determinism(),
        synthetic_fit(),
    ];
    let pass = checks.iter().all(Result::is_ok);
    let detail: Vec<String> = checks
        .into_iter()
        .map(|c| match c {
            Ok(s) => s,
            Err(s) => format!("FAILED {s}"),
        })
        .collect();
    outcome(pass, detail.join("; "))
}

fn criterion_9() -> Outcome {
    let params = ModelParams::clock(16, 6, 0.71).unwrap();
    let rows = largest_island_scan(&params, &[16, 32, 64], 40, SEED, IslandScanConfig::default()).unwrap();
    let non0: Vec<f64> = rows.iter().map(|r| r.largest_non0.mean).collect();
    let own: Vec<f64> = rows.iter().map(|r| r.largest_0.mean / (r.size * r.size) as f64).collect();
    let plurality: Vec<f64> = rows.iter().map(|r| r.plurality_fraction).collect();
    let grows = non0.windows(2).all(|w| w[1] > w[0]);
    let persists = plurality.iter().all(|&f| f >= 0.9);
    outcome(
        grows && persists,
        format!(
            "largest non-plurality cluster {non0:.1?}; plurality held in {plurality:.2?} of samples; \
             largest plurality cluster fraction {own:.3?}"
        ),
    )
}

fn main() {
    let selected: Vec<u32> = std::env::args()
        .skip(1)
        .filter_map(|a| a.parse().ok())
        .collect();
    let wanted = |k: u32| selected.is_empty() || selected.contains(&k);
    let titles = [
        "exponent q=6 T=0.71",
        "exponent q=8 T=0.43",
        "exponent XY T=0.80",
        "regime contrast",
        "oracle equivalence",
        "stationarity",
        "precession",
        "invariant suites",
        "droplet diagnostic",
    ];

    let mut q6: Option<Vec<ScalingPoint>> = None;
    let mut failures = 0;
    for (k, title) in (1..=9u32).zip(titles) {
        if !wanted(k) {
            continue;
        }
        let started = Instant::now();
        println!("criterion {k} ({title}) running");
        let result = match k {
            1 => criterion_1(q6.get_or_insert_with(dataset_q6)),
            2 => criterion_2(),
            3 => criterion_3(),
            4 => criterion_4(q6.get_or_insert_with(dataset_q6)),
            5 => criterion_5(),
            6 => criterion_6(),
            7 => criterion_7(),
            8 => criterion_8(),
            _ => criterion_9(),
        };
        if !result.pass {
            failures += 1;
        }
        println!(
            "criterion {k} {}: {title}: {} [{:.1}s]",
            if result.pass { "PASS" } else { "FAIL" },
            result.detail,
            started.elapsed().as_secs_f64()
        );
    }
    if failures > 0 {
        println!("{failures} acceptance criteria failed");
        std::process::exit(1);
    }
}
