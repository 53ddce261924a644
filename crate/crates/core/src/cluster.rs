//! Same-species clusters on the torus.
//!
//! Clusters are 4-connected components labelled with a union-find that keeps,
//! for every site, its displacement from the parent on the unwrapped plane.
//! Joining two sites that already share a root with a displacement different
//! from the recorded one closes a loop around the torus; the mismatch is the
//! winding vector of that loop.

use serde::{Deserialize, Serialize};

use crate::dynamics::{sweep, SweepClock};
use crate::error::{Error, Result};
use crate::lattice::{Fill, SpinLattice, SpinState};
use crate::params::{Cardinality, ModelParams};
use crate::rng::{RngStream, StreamId};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClusterReport {
    pub target: usize,
    /// Cluster sizes in non-increasing order.
    pub cluster_sizes: Vec<usize>,
    pub largest: usize,
    /// Winding of the largest cluster (lowest site index wins ties).
    pub wraps_x: bool,
    pub wraps_y: bool,
    pub n_clusters: usize,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
struct Winding {
    x: bool,
    y: bool,
}

/// Union-find with per-node displacement `(dx, dy)` relative to the parent.
struct DisplacementForest {
    parent: Vec<u32>,
    offset: Vec<(i32, i32)>,
    size: Vec<u32>,
    winding: Vec<Winding>,
}

impl DisplacementForest {
    fn new(n: usize) -> Self {
        DisplacementForest {
            parent: (0..n as u32).collect(),
            offset: vec![(0, 0); n],
            size: vec![1; n],
            winding: vec![Winding::default(); n],
        }
    }

    /// Root of `i` and the displacement of `i` from it, compressing the path.
    fn find(&mut self, i: usize) -> (usize, (i32, i32)) {
        let mut path = Vec::new();
        let mut node = i;
        while self.parent[node] as usize != node {
            path.push(node);
            node = self.parent[node] as usize;
        }
        let root = node;
        // walk back from the node nearest the root, accumulating offsets
        let mut acc = (0, 0);
        for &n in path.iter().rev() {
            acc = (acc.0 + self.offset[n].0, acc.1 + self.offset[n].1);
            self.offset[n] = acc;
            self.parent[n] = root as u32;
        }
        (root, self.offset_of(i, root))
    }

    fn offset_of(&self, i: usize, root: usize) -> (i32, i32) {
        if i == root {
            (0, 0)
        } else {
            self.offset[i]
        }
    }

    /// Records that `j` sits at `pos(i) + d` on the unwrapped plane.
    fn union(&mut self, i: usize, j: usize, d: (i32, i32)) {
        let (ri, oi) = self.find(i);
        let (rj, oj) = self.find(j);
        let gap = (oi.0 + d.0 - oj.0, oi.1 + d.1 - oj.1);
        if ri == rj {
            let w = &mut self.winding[ri];
            w.x |= gap.0 != 0;
            w.y |= gap.1 != 0;
            return;
        }
        // attach the smaller tree; pos(rj) = pos(ri) + gap
        let (big, small, off) = if self.size[ri] >= self.size[rj] {
            (ri, rj, gap)
        } else {
            (rj, ri, (-gap.0, -gap.1))
        };
        self.parent[small] = big as u32;
        self.offset[small] = off;
        self.size[big] += self.size[small];
        let ws = self.winding[small];
        let wb = &mut self.winding[big];
        wb.x |= ws.x;
        wb.y |= ws.y;
    }
}

/// Clusters of every species at once; `include` selects which species take part.
struct Labeling {
    forest: DisplacementForest,
}

impl Labeling {
    fn build(species: &[usize], size: usize, include: impl Fn(usize) -> bool) -> Self {
        let mut forest = DisplacementForest::new(species.len());
        for i in 0..species.len() {
            let s = species[i];
            if !include(s) {
                continue;
            }
            let (r, c) = (i / size, i % size);
            let right = r * size + (c + 1) % size;
            let down = ((r + 1) % size) * size + c;
            if species[right] == s {
                forest.union(i, right, (1, 0));
            }
            if species[down] == s {
                forest.union(i, down, (0, 1));
            }
        }
        Labeling { forest }
    }

    fn report(&mut self, species: &[usize], target: usize) -> ClusterReport {
        let mut sizes = Vec::new();
        let mut best: Option<(usize, usize)> = None; // (size, root)
        let mut seen = vec![false; species.len()];
        for (i, &s) in species.iter().enumerate() {
            if s != target {
                continue;
            }
            let (root, _) = self.forest.find(i);
            if seen[root] {
                continue;
            }
            seen[root] = true;
            let s = self.forest.size[root] as usize;
            sizes.push(s);
            if best.is_none_or(|(b, _)| s > b) {
                best = Some((s, root));
            }
        }
        sizes.sort_unstable_by(|a, b| b.cmp(a));
        let (largest, winding) = best
            .map(|(s, root)| (s, self.forest.winding[root]))
            .unwrap_or((0, Winding::default()));
        ClusterReport {
            target,
            n_clusters: sizes.len(),
            cluster_sizes: sizes,
            largest,
            wraps_x: winding.x,
            wraps_y: winding.y,
        }
    }
}

/// Clusters of species `target` in a row-major `size × size` species map.
pub fn label_species(species: &[usize], size: usize, target: usize) -> ClusterReport {
    assert_eq!(species.len(), size * size, "species map does not match size");
    Labeling::build(species, size, |s| s == target).report(species, target)
}

/// Clusters of `target` on the lattice; XY spins are binned into `q_bin` sectors first.
pub fn label_clusters(lattice: &SpinLattice, target: usize) -> Result<ClusterReport> {
    let n_species = lattice.params().q.n_species();
    if target >= n_species {
        return Err(Error::TargetOutOfRange { target, n_species });
    }
    Ok(label_species(&lattice.species(), lattice.size(), target))
}

/// Peierls estimate `4/q²` of the temperature at which excitation droplets
/// percolate. A heuristic, not a measured threshold.
pub fn peierls_percolation_temperature(q: Cardinality) -> Result<f64> {
    match q {
        Cardinality::Finite(q) if q >= 2 => Ok(4.0 / f64::from(q * q)),
        Cardinality::Finite(q) => Err(Error::InvalidParams(format!("q must be at least 2, got {q}"))),
        Cardinality::Continuous { .. } => Err(Error::RequiresFiniteQ("percolation temperature")),
    }
}

/// Which species the droplet statistics are measured against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReferenceSpecies {
    /// Species 0, the initially polarized one.
    Initial,
    /// The species holding the plurality at sampling time (lowest index on ties).
    Plurality,
}

impl std::str::FromStr for ReferenceSpecies {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "initial" => Ok(ReferenceSpecies::Initial),
            "plurality" => Ok(ReferenceSpecies::Plurality),
            other => Err(Error::InvalidParams(format!("unknown reference {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IslandScanConfig {
    /// Burn-in from the polarized state, in units of `L²` MCS.
    pub burn_in_per_site: u64,
    /// Spacing between samples, in units of `L²` MCS.
    pub spacing_per_site: u64,
    pub reference: ReferenceSpecies,
}

impl Default for IslandScanConfig {
    fn default() -> Self {
        IslandScanConfig {
            burn_in_per_site: 20,
            spacing_per_site: 1,
            reference: ReferenceSpecies::Plurality,
        }
    }
}

/// One equilibrium snapshot of a droplet scan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IslandSample {
    pub size: usize,
    pub temperature: f64,
    pub q: Cardinality,
    pub sample_index: u64,
    pub reference: usize,
    /// Largest cluster of the reference species.
    pub largest_0: usize,
    /// Largest cluster of any other species.
    pub largest_non0: usize,
    pub n_clusters_0: usize,
    pub wraps_x: bool,
    pub wraps_y: bool,
    /// Whether the reference species strictly outnumbers every other species.
    pub reference_is_strict_plurality: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SizeStats {
    pub mean: f64,
    pub q10: f64,
    pub median: f64,
    pub q90: f64,
}

impl SizeStats {
    fn from_values(values: &mut [f64]) -> Self {
        values.sort_by(f64::total_cmp);
        let mean = values.iter().sum::<f64>() / values.len() as f64;
        SizeStats {
            mean,
            q10: quantile(values, 0.1),
            median: quantile(values, 0.5),
            q90: quantile(values, 0.9),
        }
    }
}

/// Linear-interpolation quantile of sorted data.
fn quantile(sorted: &[f64], p: f64) -> f64 {
    let h = p * (sorted.len() - 1) as f64;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IslandScanRow {
    pub size: usize,
    pub n_samples: usize,
    pub largest_0: SizeStats,
    pub largest_non0: SizeStats,
    /// Fraction of samples where the reference species held a strict plurality.
    pub plurality_fraction: f64,
    pub wrap_fraction_0: f64,
    pub samples: Vec<IslandSample>,
}

/// Samples equilibrium droplet statistics for each lattice size.
///
/// Each size runs its own chain on stream `(master_seed, L)`: polarized
/// start, `burn_in_per_site · L²` MCS of burn-in, then one sample every
/// `spacing_per_site · L²` MCS.
pub fn largest_island_scan(
    params: &ModelParams,
    sizes: &[usize],
    n_samples: usize,
    master_seed: u64,
    config: IslandScanConfig,
) -> Result<Vec<IslandScanRow>> {
    use rayon::prelude::*;
    if n_samples == 0 {
        return Err(Error::InvalidParams("n_samples must be at least 1".into()));
    }
    if config.spacing_per_site == 0 {
        return Err(Error::InvalidParams("sample spacing must be at least 1".into()));
    }
    let all: Vec<ModelParams> = sizes
        .iter()
        .map(|&l| {
            let p = params.with_size(l);
            p.validate().map(|_| p)
        })
        .collect::<Result<_>>()?;
    all.par_iter()
        .map(|p| scan_one_size(p, n_samples, master_seed, config))
        .collect()
}

fn scan_one_size(
    params: &ModelParams,
    n_samples: usize,
    master_seed: u64,
    config: IslandScanConfig,
) -> Result<IslandScanRow> {
    let start = match params.q {
        Cardinality::Finite(_) => SpinState::Discrete(0),
        Cardinality::Continuous { q_bin } => SpinState::Angle(std::f64::consts::PI / f64::from(q_bin)),
    };
    let mut lattice = SpinLattice::new(*params, Fill::Polarized(start))?;
    let mut rng = RngStream::new(StreamId::new(master_seed, params.size as u64));
    let mut clock = SweepClock::default();
    let n = params.n_sites() as u64;
    for _ in 0..config.burn_in_per_site * n {
        sweep(&mut lattice, &mut rng, &mut clock);
    }
    let mut samples = Vec::with_capacity(n_samples);
    for k in 0..n_samples {
        if k > 0 {
            for _ in 0..config.spacing_per_site * n {
                sweep(&mut lattice, &mut rng, &mut clock);
            }
        }
        samples.push(island_sample(&lattice, k as u64, config.reference));
    }
    let mut l0: Vec<f64> = samples.iter().map(|s| s.largest_0 as f64).collect();
    let mut ln: Vec<f64> = samples.iter().map(|s| s.largest_non0 as f64).collect();
    let frac = |f: &dyn Fn(&IslandSample) -> bool| {
        samples.iter().filter(|s| f(s)).count() as f64 / samples.len() as f64
    };
    Ok(IslandScanRow {
        size: params.size,
        n_samples,
        largest_0: SizeStats::from_values(&mut l0),
        largest_non0: SizeStats::from_values(&mut ln),
        plurality_fraction: frac(&|s| s.reference_is_strict_plurality),
        wrap_fraction_0: frac(&|s| s.wraps_x || s.wraps_y),
        samples,
    })
}

/// Droplet statistics of one snapshot.
pub fn island_sample(
    lattice: &SpinLattice,
    sample_index: u64,
    reference: ReferenceSpecies,
) -> IslandSample {
    let species = lattice.species();
    let census = lattice.census();
    let reference = match reference {
        ReferenceSpecies::Initial => 0,
        ReferenceSpecies::Plurality => {
            let max = *census.iter().max().unwrap_or(&0);
            census.iter().position(|&c| c == max).unwrap_or(0)
        }
    };
    let strict = census
        .iter()
        .enumerate()
        .all(|(s, &c)| s == reference || c < census[reference]);
    let mut labeling = Labeling::build(&species, lattice.size(), |_| true);
    let own = labeling.report(&species, reference);
    let largest_non0 = (0..census.len())
        .filter(|&s| s != reference && census[s] > 0)
        .map(|s| labeling.report(&species, s).largest)
        .max()
        .unwrap_or(0);
    let p = lattice.params();
    IslandSample {
        size: p.size,
        temperature: p.temperature,
        q: p.q,
        sample_index,
        reference,
        largest_0: own.largest,
        largest_non0,
        n_clusters_0: own.n_clusters,
        wraps_x: own.wraps_x,
        wraps_y: own.wraps_y,
        reference_is_strict_plurality: strict,
    }
}
