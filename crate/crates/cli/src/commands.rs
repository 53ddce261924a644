use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use clock_memory::cluster::{
    largest_island_scan, peierls_percolation_temperature, IslandScanConfig, IslandScanRow,
    ReferenceSpecies,
};
use clock_memory::experiments::memory::DEFAULT_MAX_STEPS;
use clock_memory::experiments::{
    exact_hitting_time_oracle, record_precession, run_ensemble, CheckCadence, EnsembleSummary,
    MemoryTimeRecord, StopKind, StopRule,
};
use clock_memory::fit::{
    fit_power_law, growth_classifier, mcs_to_seconds, FitResult, GrowthClass, ScalingPoint,
    Statistic, DEFAULT_GROWTH_MARGIN, DEFAULT_SECONDS_PER_MCS,
};
use clock_memory::io::{self, CODE_VERSION};
use clock_memory::observables::{effective_sector, max_energy_excursion};
use clock_memory::params::DEFAULT_Q_BIN;
use clock_memory::rng::StreamId;
use clock_memory::{Cardinality, Fill, ModelParams, SpinState};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("runtime error: {0}")]
    Runtime(String),
    #[error("UNRELIABLE result: {0}")]
    Unreliable(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Runtime(_) => 3,
            CliError::Unreliable(_) => 4,
        }
    }
}

impl From<clock_memory::Error> for CliError {
    fn from(e: clock_memory::Error) -> Self {
        use clock_memory::Error as E;
        match e {
            E::Solve(_) => CliError::Runtime(e.to_string()),
            _ => CliError::Config(e.to_string()),
        }
    }
}

type CliResult<T> = Result<T, CliError>;

#[derive(Debug, Clone, Subcommand, Serialize, Deserialize)]
#[serde(tag = "subcommand", rename_all = "snake_case")]
pub enum Command {
    /// Memory-time ensemble: records table plus summary document.
    Memory(MemoryArgs),
    /// Long trajectory of magnetization and polarization angle.
    Precess(PrecessArgs),
    /// Equilibrium droplet statistics over lattice sizes.
    Clusters(ClusterArgs),
    /// Power-law fit and growth classification of a records table.
    Fit(FitArgs),
    /// Exact expected memory time on a tiny lattice.
    Oracle(OracleArgs),
    /// Peierls estimate of the percolation temperature, 4/q².
    Tp(TpArgs),
    /// Re-run a subcommand from the configuration stored in its metadata document.
    #[serde(skip)]
    Replay(ReplayArgs),
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct ModelArgs {
    /// Spin cardinality; `inf` (or `xy`) selects the XY model.
    #[arg(long)]
    pub q: String,
    /// Sectors used to census XY angles.
    #[arg(long = "q-bin", default_value_t = DEFAULT_Q_BIN)]
    pub q_bin: u32,
    /// Lattice side length.
    #[arg(long = "L")]
    pub size: usize,
    /// Temperature (J = k_B = 1).
    #[arg(long = "T")]
    pub temperature: f64,
}

impl ModelArgs {
    fn params(&self) -> CliResult<ModelParams> {
        let q = Cardinality::parse(&self.q, self.q_bin)?;
        Ok(ModelParams::new(self.size, q, self.temperature)?)
    }
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopArg {
    Plurality,
    Aggregate,
}

impl From<StopArg> for StopKind {
    fn from(s: StopArg) -> Self {
        match s {
            StopArg::Plurality => StopKind::PluralityLoss,
            StopArg::Aggregate => StopKind::AggregateLoss,
        }
    }
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct MemoryArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long, default_value_t = 1000)]
    pub realizations: usize,
    #[arg(long = "master-seed", default_value_t = 0)]
    pub master_seed: u64,
    /// Censoring cap per realization, in MCS.
    #[arg(long = "max-steps", default_value_t = DEFAULT_MAX_STEPS)]
    pub max_steps: u64,
    #[arg(long, value_enum, default_value_t = StopArg::Plurality)]
    pub stop: StopArg,
    /// Sweeps between stop-rule checks.
    #[arg(long = "check-interval", default_value_t = 1)]
    pub check_interval: u64,
    /// Worker threads; 0 uses all cores.
    #[arg(long, default_value_t = 0)]
    pub parallelism: usize,
    #[arg(long, default_value = "records.csv")]
    pub out: PathBuf,
    #[arg(long, default_value = "summary.json")]
    pub summary: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StartArg {
    Polarized,
    Random,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct PrecessArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// Total length in MCS.
    #[arg(long)]
    pub duration: u64,
    /// MCS between samples.
    #[arg(long, default_value_t = 100)]
    pub interval: u64,
    #[arg(long = "master-seed", default_value_t = 0)]
    pub master_seed: u64,
    #[arg(long, value_enum, default_value_t = StartArg::Polarized)]
    pub start: StartArg,
    #[arg(long, default_value = "trajectory.csv")]
    pub out: PathBuf,
    #[arg(long, default_value = "trajectory.json")]
    pub meta: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReferenceArg {
    Initial,
    Plurality,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct ClusterArgs {
    #[arg(long)]
    pub q: String,
    #[arg(long = "q-bin", default_value_t = DEFAULT_Q_BIN)]
    pub q_bin: u32,
    #[arg(long = "T")]
    pub temperature: f64,
    /// Comma-separated lattice sizes.
    #[arg(long, value_delimiter = ',', required = true)]
    pub sizes: Vec<usize>,
    #[arg(long, default_value_t = 20)]
    pub samples: usize,
    #[arg(long = "master-seed", default_value_t = 0)]
    pub master_seed: u64,
    /// Burn-in in units of L² MCS.
    #[arg(long = "burn-in", default_value_t = 20)]
    pub burn_in: u64,
    /// Sample spacing in units of L² MCS.
    #[arg(long, default_value_t = 1)]
    pub spacing: u64,
    #[arg(long, value_enum, default_value_t = ReferenceArg::Plurality)]
    pub reference: ReferenceArg,
    #[arg(long, default_value_t = 0)]
    pub parallelism: usize,
    #[arg(long, default_value = "clusters.csv")]
    pub out: PathBuf,
    #[arg(long, default_value = "clusters.json")]
    pub summary: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StatisticArg {
    Mean,
    Median,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct FitArgs {
    /// Records table written by `memory` (several may be concatenated by row).
    #[arg(long = "in", required = true, num_args = 1..)]
    pub input: Vec<PathBuf>,
    /// Comma-separated grouping columns among q, q_bin, T.
    #[arg(long, value_delimiter = ',', default_value = "q,q_bin,T")]
    pub group: Vec<String>,
    #[arg(long, default_value_t = DEFAULT_GROWTH_MARGIN)]
    pub margin: f64,
    #[arg(long, value_enum, default_value_t = StatisticArg::Mean)]
    pub statistic: StatisticArg,
    #[arg(long, default_value = "fit.json")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CadenceArg {
    PerAttempt,
    PerSweep,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct OracleArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long, value_enum, default_value_t = StopArg::Plurality)]
    pub stop: StopArg,
    #[arg(long = "check-interval", default_value_t = 1)]
    pub check_interval: u64,
    #[arg(long, value_enum, default_value_t = CadenceArg::PerSweep)]
    pub cadence: CadenceArg,
    /// Optional metadata document.
    #[arg(long)]
    pub meta: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct TpArgs {
    #[arg(long)]
    pub q: String,
}

#[derive(Debug, Clone, Args)]
pub struct ReplayArgs {
    /// Metadata document written by a previous run.
    #[arg(long)]
    pub meta: PathBuf,
    /// Directory for the replayed outputs (file names are kept).
    #[arg(long = "out-dir")]
    pub out_dir: Option<PathBuf>,
}

/// Conventions that are fixed in code but recorded with every output.
#[derive(Debug, Serialize)]
struct Conventions {
    time_unit: &'static str,
    proposal: &'static str,
    site_selection: &'static str,
    rng: &'static str,
    xy_start: &'static str,
}

const CONVENTIONS: Conventions = Conventions {
    time_unit: "1 MCS = L^2 attempted single-spin updates",
    proposal: "uniform over the q-1 other states (XY: uniform angle)",
    site_selection: "independent uniform site per attempt",
    rng: "ChaCha8, key = master_seed (LE, zero padded), stream = realization index",
    xy_start: "all angles pi/q_bin (centre of census bin 0)",
};

fn create(path: &Path) -> CliResult<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)
            .map_err(|e| CliError::Runtime(format!("{}: {e}", dir.display())))?;
    }
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))
}

fn write_text(path: &Path, text: &str) -> CliResult<()> {
    let mut f = create(path)?;
    f.write_all(text.as_bytes())
        .and_then(|_| f.flush())
        .map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))
}

fn pool(parallelism: usize) -> CliResult<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(parallelism)
        .build()
        .map_err(|e| CliError::Runtime(e.to_string()))
}

pub fn dispatch(command: Command) -> CliResult<()> {
    match command {
        Command::Memory(args) => memory(args),
        Command::Precess(args) => precess(args),
        Command::Clusters(args) => clusters(args),
        Command::Fit(args) => fit(args),
        Command::Oracle(args) => oracle(args),
        Command::Tp(args) => tp(args),
        Command::Replay(args) => replay(args),
    }
}

#[derive(Serialize)]
struct MemoryDocument<'a> {
    code_version: &'a str,
    config: &'a Command,
    conventions: &'a Conventions,
    summary: &'a EnsembleSummary,
    reliable: bool,
    mean_tau_seconds: Option<f64>,
}

fn memory(args: MemoryArgs) -> CliResult<()> {
    let params = args.model.params()?;
    if args.check_interval == 0 {
        return Err(CliError::Config("--check-interval must be at least 1".into()));
    }
    let stop = StopRule {
        kind: args.stop.into(),
        check_interval: args.check_interval,
    };
    let (summary, records) = run_ensemble(
        &params,
        args.realizations,
        args.master_seed,
        stop,
        args.max_steps,
        args.parallelism,
    )?;
    io::write_records(create(&args.out)?, &records)?;
    let config = Command::Memory(args.clone());
    let doc = MemoryDocument {
        code_version: CODE_VERSION,
        config: &config,
        conventions: &CONVENTIONS,
        summary: &summary,
        reliable: summary.is_reliable(),
        mean_tau_seconds: summary
            .mean_tau
            .map(|t| mcs_to_seconds(t, DEFAULT_SECONDS_PER_MCS)),
    };
    write_text(&args.summary, &io::to_document(&doc)?)?;
    println!(
        "L={} q={} T={} n={} censored={} mean_tau={} stderr={}",
        params.size,
        params.q,
        params.temperature,
        summary.n_realizations,
        summary.n_censored,
        summary.mean_tau.map_or("NA".into(), |v| v.to_string()),
        summary.stderr_tau.map_or("NA".into(), |v| v.to_string()),
    );
    if !summary.is_reliable() {
        return Err(CliError::Unreliable(format!(
            "{} of {} realizations censored at {} MCS",
            summary.n_censored, summary.n_realizations, args.max_steps
        )));
    }
    Ok(())
}

#[derive(Serialize)]
struct PrecessDocument<'a> {
    code_version: &'a str,
    config: &'a Command,
    conventions: &'a Conventions,
    stream: StreamId,
    n_samples: usize,
    mean_m: Option<f64>,
    visited_sectors: Vec<u32>,
    max_energy_excursion: f64,
}

fn precess(args: PrecessArgs) -> CliResult<()> {
    let params = args.model.params()?;
    let start = match args.start {
        StartArg::Polarized => Fill::Polarized(match params.q {
            Cardinality::Finite(_) => SpinState::Discrete(0),
            Cardinality::Continuous { q_bin } => {
                SpinState::Angle(std::f64::consts::PI / f64::from(q_bin))
            }
        }),
        StartArg::Random => Fill::UniformRandom(StreamId::new(args.master_seed, u64::MAX)),
    };
    let traj = record_precession(&params, args.master_seed, args.duration, args.interval, start)?;
    io::write_trajectory(create(&args.out)?, &traj)?;
    let q_bin = params.q.q_bin();
    let config = Command::Precess(args.clone());
    let doc = PrecessDocument {
        code_version: CODE_VERSION,
        config: &config,
        conventions: &CONVENTIONS,
        stream: traj.stream,
        n_samples: traj.samples.len(),
        mean_m: traj.mean_magnetization(),
        visited_sectors: traj.visited_sectors(q_bin),
        max_energy_excursion: max_energy_excursion(&traj)?,
    };
    write_text(&args.meta, &io::to_document(&doc)?)?;
    if let Some(last) = traj.samples.last() {
        println!(
            "samples={} final m={:.6} sector={:.4} visited={:?}",
            traj.samples.len(),
            last.m,
            effective_sector(last.theta, q_bin),
            doc.visited_sectors
        );
    }
    Ok(())
}

#[derive(Serialize)]
struct ClusterDocument<'a> {
    code_version: &'a str,
    config: &'a Command,
    conventions: &'a Conventions,
    scan: &'a IslandScanConfig,
    rows: Vec<ClusterRowSummary<'a>>,
}

#[derive(Serialize)]
struct ClusterRowSummary<'a> {
    size: usize,
    n_samples: usize,
    largest_0: &'a clock_memory::cluster::SizeStats,
    largest_non0: &'a clock_memory::cluster::SizeStats,
    plurality_fraction: f64,
    wrap_fraction_0: f64,
}

fn clusters(args: ClusterArgs) -> CliResult<()> {
    let first = *args
        .sizes
        .first()
        .ok_or_else(|| CliError::Config("--sizes is empty".into()))?;
    let q = Cardinality::parse(&args.q, args.q_bin)?;
    let params = ModelParams::new(first, q, args.temperature)?;
    let scan = IslandScanConfig {
        burn_in_per_site: args.burn_in,
        spacing_per_site: args.spacing,
        reference: match args.reference {
            ReferenceArg::Initial => ReferenceSpecies::Initial,
            ReferenceArg::Plurality => ReferenceSpecies::Plurality,
        },
    };
    let rows: Vec<IslandScanRow> = pool(args.parallelism)?
        .install(|| largest_island_scan(&params, &args.sizes, args.samples, args.master_seed, scan))?;
    let samples: Vec<_> = rows.iter().flat_map(|r| r.samples.iter().cloned()).collect();
    io::write_cluster_samples(create(&args.out)?, &samples)?;
    let config = Command::Clusters(args.clone());
    let doc = ClusterDocument {
        code_version: CODE_VERSION,
        config: &config,
        conventions: &CONVENTIONS,
        scan: &scan,
        rows: rows
            .iter()
            .map(|r| ClusterRowSummary {
                size: r.size,
                n_samples: r.n_samples,
                largest_0: &r.largest_0,
                largest_non0: &r.largest_non0,
                plurality_fraction: r.plurality_fraction,
                wrap_fraction_0: r.wrap_fraction_0,
            })
            .collect(),
    };
    write_text(&args.summary, &io::to_document(&doc)?)?;
    for r in &rows {
        println!(
            "L={} largest_0 mean={:.1} largest_non0 mean={:.1} plurality={:.2}",
            r.size, r.largest_0.mean, r.largest_non0.mean, r.plurality_fraction
        );
    }
    Ok(())
}

#[derive(Serialize)]
struct FitDocument<'a> {
    code_version: &'a str,
    config: &'a Command,
    groups: Vec<FitGroup>,
}

#[derive(Serialize)]
struct FitGroup {
    key: BTreeMap<String, String>,
    points: Vec<ScalingPoint>,
    n_censored: usize,
    reliable: bool,
    margin: f64,
    fit: Option<FitResult>,
    growth: Option<GrowthClass>,
    error: Option<String>,
}

fn group_key(record: &MemoryTimeRecord, columns: &[String]) -> CliResult<BTreeMap<String, String>> {
    columns
        .iter()
        .map(|c| {
            let p = &record.params;
            let value = match c.trim() {
                "q" => p.q.q_label(),
                "q_bin" => p.q.q_bin().to_string(),
                "T" => io::fmt_f64(p.temperature),
                other => {
                    return Err(CliError::Config(format!(
                        "cannot group by {other:?}; use q, q_bin or T"
                    )))
                }
            };
            Ok((c.trim().to_string(), value))
        })
        .collect()
}

fn fit(args: FitArgs) -> CliResult<()> {
    let mut records = Vec::new();
    for path in &args.input {
        let f = File::open(path).map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))?;
        records.extend(io::read_records(BufReader::new(f))?);
    }
    if records.is_empty() {
        return Err(CliError::Config("no records to fit".into()));
    }
    let statistic = match args.statistic {
        StatisticArg::Mean => Statistic::Mean,
        StatisticArg::Median => Statistic::Median,
    };
    let mut groups: BTreeMap<BTreeMap<String, String>, BTreeMap<usize, Vec<MemoryTimeRecord>>> =
        BTreeMap::new();
    for r in records {
        let key = group_key(&r, &args.group)?;
        groups.entry(key).or_default().entry(r.params.size).or_default().push(r);
    }
    let mut out = Vec::new();
    let mut unreliable = false;
    for (key, by_size) in groups {
        let mut n_censored = 0;
        let mut points = Vec::new();
        for (size, recs) in &by_size {
            n_censored += recs.iter().filter(|r| r.censored).count();
            let first = &recs[0];
            let summary = EnsembleSummary::from_records(first.params, StopRule::default(), 0, recs);
            let point = match statistic {
                Statistic::Mean => ScalingPoint::new(
                    *size,
                    summary.mean_tau.unwrap_or(0.0),
                    summary.stderr_tau.unwrap_or(0.0),
                    recs.len(),
                ),
                Statistic::Median => {
                    ScalingPoint::new(*size, summary.median_tau.unwrap_or(0.0), 0.0, recs.len())
                }
            };
            points.push(point);
        }
        let fitted = fit_power_law(&points);
        let growth = (points.len() >= 4)
            .then(|| growth_classifier(&points, args.margin))
            .transpose();
        let error = fitted
            .as_ref()
            .err()
            .map(|e| e.to_string())
            .or_else(|| growth.as_ref().err().map(|e| e.to_string()));
        unreliable |= n_censored > 0;
        if let Ok(f) = &fitted {
            println!(
                "{key:?}: z={:.6} ± {:.6} r2={:.6} growth={}",
                f.z,
                f.z_err,
                f.r_squared,
                match &growth {
                    Ok(Some(g)) => g.as_str(),
                    _ => "NA",
                }
            );
        }
        out.push(FitGroup {
            key,
            points,
            n_censored,
            reliable: n_censored == 0,
            margin: args.margin,
            fit: fitted.ok(),
            growth: growth.ok().flatten(),
            error,
        });
    }
    let config = Command::Fit(args.clone());
    let doc = FitDocument {
        code_version: CODE_VERSION,
        config: &config,
        groups: out,
    };
    write_text(&args.out, &io::to_document(&doc)?)?;
    if doc.groups.iter().all(|g| g.fit.is_none()) {
        return Err(CliError::Config("no group could be fitted".into()));
    }
    if unreliable {
        return Err(CliError::Unreliable("censored records in fitted groups".into()));
    }
    Ok(())
}

#[derive(Serialize)]
struct OracleDocument<'a> {
    code_version: &'a str,
    config: &'a Command,
    expected_tau_mcs: f64,
}

fn oracle(args: OracleArgs) -> CliResult<()> {
    let params = args.model.params()?;
    let stop = StopRule {
        kind: args.stop.into(),
        check_interval: args.check_interval,
    };
    let cadence = match args.cadence {
        CadenceArg::PerAttempt => CheckCadence::PerAttempt,
        CadenceArg::PerSweep => CheckCadence::PerSweep,
    };
    let tau = exact_hitting_time_oracle(&params, stop, cadence)?;
    println!("{}", io::fmt_f64(tau));
    if let Some(path) = &args.meta {
        let config = Command::Oracle(args.clone());
        let doc = OracleDocument {
            code_version: CODE_VERSION,
            config: &config,
            expected_tau_mcs: tau,
        };
        write_text(path, &io::to_document(&doc)?)?;
    }
    Ok(())
}

fn tp(args: TpArgs) -> CliResult<()> {
    let q = Cardinality::parse(&args.q, DEFAULT_Q_BIN)?;
    let t = peierls_percolation_temperature(q)?;
    println!("{t}");
    eprintln!("(Peierls heuristic 4/q^2, not a measured threshold)");
    Ok(())
}

#[derive(Deserialize)]
struct StoredConfig {
    config: Command,
}

fn relocate(path: &mut PathBuf, dir: &Option<PathBuf>) {
    if let (Some(dir), Some(name)) = (dir, path.file_name()) {
        *path = dir.join(name);
    }
}

fn replay(args: ReplayArgs) -> CliResult<()> {
    let text = std::fs::read_to_string(&args.meta)
        .map_err(|e| CliError::Runtime(format!("{}: {e}", args.meta.display())))?;
    let stored: StoredConfig = io::from_document(&text)?;
    let dir = &args.out_dir;
    let command = match stored.config {
        Command::Memory(mut a) => {
            relocate(&mut a.out, dir);
            relocate(&mut a.summary, dir);
            Command::Memory(a)
        }
        Command::Precess(mut a) => {
            relocate(&mut a.out, dir);
            relocate(&mut a.meta, dir);
            Command::Precess(a)
        }
        Command::Clusters(mut a) => {
            relocate(&mut a.out, dir);
            relocate(&mut a.summary, dir);
            Command::Clusters(a)
        }
        Command::Fit(mut a) => {
            relocate(&mut a.out, dir);
            Command::Fit(a)
        }
        Command::Oracle(mut a) => {
            if let Some(m) = a.meta.as_mut() {
                relocate(m, dir);
            }
            Command::Oracle(a)
        }
        other => other,
    };
    dispatch(command)
}
