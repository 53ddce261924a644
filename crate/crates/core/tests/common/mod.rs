//! Independent reference implementations used by the integration tests.
//! None of these go through the lattice's cached or tabulated paths.

#![allow(dead_code)]

use std::collections::VecDeque;
use std::f64::consts::TAU;

use clock_memory::dynamics::acceptance_probability;
use clock_memory::rng::{RngStream, StreamId};
use clock_memory::{SpinLattice, SpinState};

/// Energy of a row-major configuration of angles, summing each of the four
/// neighbours of every site and halving.
pub fn energy_of_angles(angles: &[f64], size: usize) -> f64 {
    let mut e = 0.0;
    for r in 0..size {
        for c in 0..size {
            let t = angles[r * size + c];
            let nbrs = [
                ((r + size - 1) % size, c),
                ((r + 1) % size, c),
                (r, (c + size - 1) % size),
                (r, (c + 1) % size),
            ];
            for (nr, nc) in nbrs {
                e -= (t - angles[nr * size + nc]).cos();
            }
        }
    }
    e / 2.0
}

pub fn clock_angles(spins: &[u16], q: u32) -> Vec<f64> {
    spins.iter().map(|&s| TAU * f64::from(s) / f64::from(q)).collect()
}

/// Decodes configuration number `x` into `n` base-`q` digits, site 0 first.
pub fn decode(mut x: usize, q: usize, n: usize) -> Vec<u16> {
    (0..n)
        .map(|_| {
            let d = x % q;
            x /= q;
            d as u16
        })
        .collect()
}

pub fn encode(spins: &[u16], q: usize) -> usize {
    spins.iter().rev().fold(0, |acc, &s| acc * q + s as usize)
}

/// Boltzmann distribution over all `q^(L²)` configurations by brute force.
pub fn boltzmann_distribution(size: usize, q: u32, temperature: f64) -> Vec<f64> {
    let n = size * size;
    let count = (q as usize).pow(n as u32);
    let energies: Vec<f64> = (0..count)
        .map(|x| energy_of_angles(&clock_angles(&decode(x, q as usize, n), q), size))
        .collect();
    let e_min = energies.iter().cloned().fold(f64::INFINITY, f64::min);
    let weights: Vec<f64> = energies.iter().map(|e| (-(e - e_min) / temperature).exp()).collect();
    let z: f64 = weights.iter().sum();
    weights.into_iter().map(|w| w / z).collect()
}

/// Metropolis transition probability between configurations differing in one site.
pub fn transition_probability(e_from: f64, e_to: f64, n_sites: usize, q: u32, temperature: f64) -> f64 {
    acceptance_probability(e_to - e_from, temperature) / (n_sites as f64 * f64::from(q - 1))
}

/// Cluster sizes of `target` by breadth-first flood fill, largest first.
pub fn flood_fill_sizes(species: &[usize], size: usize, target: usize) -> Vec<usize> {
    let mut seen = vec![false; species.len()];
    let mut sizes = Vec::new();
    for start in 0..species.len() {
        if seen[start] || species[start] != target {
            continue;
        }
        seen[start] = true;
        let mut queue = VecDeque::from([start]);
        let mut count = 0;
        while let Some(i) = queue.pop_front() {
            count += 1;
            let (r, c) = (i / size, i % size);
            for j in [
                ((r + size - 1) % size) * size + c,
                ((r + 1) % size) * size + c,
                r * size + (c + size - 1) % size,
                r * size + (c + 1) % size,
            ] {
                if !seen[j] && species[j] == target {
                    seen[j] = true;
                    queue.push_back(j);
                }
            }
        }
        sizes.push(count);
    }
    sizes.sort_unstable_by(|a, b| b.cmp(a));
    sizes
}

/// Random species map with `n_species` values, drawn from its own stream.
pub fn random_species(size: usize, n_species: usize, seed: u64, index: u64) -> Vec<usize> {
    let mut rng = RngStream::new(StreamId::new(seed, index));
    (0..size * size)
        .map(|_| rng.below(n_species as u64) as usize)
        .collect()
}

pub fn discrete_states(lattice: &SpinLattice) -> Vec<u16> {
    lattice
        .states()
        .into_iter()
        .map(|s| match s {
            SpinState::Discrete(v) => v,
            SpinState::Angle(_) => panic!("expected a clock lattice"),
        })
        .collect()
}

/// Smallest angular distance between two angles.
pub fn angle_distance(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(TAU);
    d.min(TAU - d)
}
