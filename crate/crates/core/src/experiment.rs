//! Parallel simulation sweeps and the reductions that turn their output
//! into per-size statistics, scaling fits and coupling reports.
//!
//! Every run draws its bond order from [`SeedSpec::for_sweep`], which
//! depends on `(seed, d, L, batch, run)` only. Results are gathered in run
//! order and merged with integer additions, so output is identical for any
//! worker count.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimator::{self, OpenFraction, OpenStats, SlopePeak, DEFAULT_GRID};
use crate::fss::{self, InvNuFit, ScalingSample, TcFit};
use crate::histogram::QHistogram;
use crate::io::{self, HistogramFile, OpenCountFile, RunKey};
use crate::lattice::LatticeSpec;
use crate::process::{Runner, SeedSpec};

/// Environment variable read for the default worker count.
pub const WORKERS_ENV: &str = "CDPERC_WORKERS";

fn default_batches() -> u32 {
    5
}

fn default_grid() -> usize {
    DEFAULT_GRID
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub d: u32,
    #[serde(rename = "L")]
    pub sides: Vec<u32>,
    pub k: Vec<u32>,
    pub runs: u64,
    pub seed: u64,
    #[serde(default = "default_batches")]
    pub batches: u32,
    #[serde(default)]
    pub measure_xk: bool,
    #[serde(default = "default_grid")]
    pub grid: usize,
    #[serde(default)]
    pub workers: Option<usize>,
    #[serde(default)]
    pub out_dir: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.sides.is_empty() || self.k.is_empty() {
            return Err(Error::Config("L and k lists must be nonempty".into()));
        }
        for &l in &self.sides {
            for &k in &self.k {
                LatticeSpec::new(self.d, l, k)?;
            }
        }
        if self.runs == 0 {
            return Err(Error::Config("runs must be at least 1".into()));
        }
        if self.batches == 0 {
            return Err(Error::Config("batches must be at least 1".into()));
        }
        if self.grid < 3 {
            return Err(Error::Config("grid must have at least 3 points".into()));
        }
        if self.workers == Some(0) {
            return Err(Error::Config("workers must be at least 1".into()));
        }
        Ok(())
    }

    pub fn from_json_file(path: &Path) -> Result<Self> {
        let cfg: Self = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Worker count from an explicit value, else [`WORKERS_ENV`], else the
/// number of available cores.
pub fn resolve_workers(explicit: Option<usize>) -> usize {
    explicit
        .or_else(|| std::env::var(WORKERS_ENV).ok()?.parse().ok())
        .filter(|&w| w > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

pub fn thread_pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))
}

/// Output of one `(d, L, k, batch)` cell.
#[derive(Clone, Debug, PartialEq)]
pub struct CellOutput {
    pub histogram: HistogramFile,
    pub open_counts: Option<OpenCountFile>,
}

impl CellOutput {
    pub fn key(&self) -> RunKey {
        self.histogram.key()
    }

    pub fn open_stats(&self) -> Option<OpenStats> {
        self.open_counts.as_ref().map(|f| {
            let mut s = OpenStats::new(f.lattice.bond_count());
            f.counts.iter().for_each(|&c| s.push(c));
            s
        })
    }
}

/// Simulates `runs` bond orders on the `d`, `side` box and replays each
/// under every capacity in `ks`. One output per capacity, in `ks` order.
#[allow(clippy::too_many_arguments)]
pub fn simulate_cell(
    pool: &rayon::ThreadPool,
    d: u32,
    side: u32,
    ks: &[u32],
    runs: u64,
    seed: u64,
    batch: u32,
    measure_xk: bool,
) -> Result<Vec<CellOutput>> {
    if ks.is_empty() {
        return Err(Error::Empty("capacity list"));
    }
    let base = LatticeSpec::new(d, side, ks[0])?;
    let lattices = ks
        .iter()
        .map(|&k| base.with_capacity(k))
        .collect::<Result<Vec<_>>>()?;

    let records = pool.install(|| {
        (0..runs)
            .into_par_iter()
            .map_init(
                || Runner::new(base),
                |runner, run| {
                    let s = SeedSpec::for_sweep(seed, base.dim(), base.side(), batch, run);
                    runner.run_coupled_records(ks, s, measure_xk)
                },
            )
            .collect::<Result<Vec<_>>>()
    })?;

    lattices
        .iter()
        .enumerate()
        .map(|(j, &lattice)| {
            let mut hist = QHistogram::new(lattice);
            let mut counts = Vec::new();
            for per_k in &records {
                let r = &per_k[j];
                hist.push(r)?;
                if measure_xk {
                    counts.push(r.open_count.expect("complete run"));
                }
            }
            Ok(CellOutput {
                histogram: HistogramFile { hist, seed, batch },
                open_counts: measure_xk.then_some(OpenCountFile {
                    lattice,
                    seed,
                    batch,
                    counts,
                }),
            })
        })
        .collect()
}

/// All cells of an experiment, ordered by `(L, batch, k)`.
pub fn simulate(config: &ExperimentConfig, pool: &rayon::ThreadPool) -> Result<Vec<CellOutput>> {
    config.validate()?;
    let mut out = Vec::new();
    for &side in &config.sides {
        for batch in 0..config.batches {
            out.extend(simulate_cell(
                pool,
                config.d,
                side,
                &config.k,
                config.runs,
                config.seed,
                batch,
                config.measure_xk,
            )?);
        }
    }
    Ok(out)
}

/// Writes `hist_<stem>.txt` (and `open_<stem>.txt`) for each cell.
/// Returns the paths written.
pub fn write_cells(dir: &Path, cells: &[CellOutput]) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let mut paths = Vec::new();
    for c in cells {
        let stem = c.key().stem();
        let p = dir.join(format!("hist_{stem}.txt"));
        std::fs::write(&p, io::format_histogram(&c.histogram))?;
        paths.push(p);
        if let Some(o) = &c.open_counts {
            let p = dir.join(format!("open_{stem}.txt"));
            std::fs::write(&p, io::format_open_counts(o))?;
            paths.push(p);
        }
    }
    Ok(paths)
}

/// Per-cell observables.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StatsEntry {
    pub d: u32,
    #[serde(rename = "L")]
    pub side: u32,
    pub k: u32,
    pub batch: u32,
    #[serde(rename = "N")]
    pub bonds: u64,
    #[serde(rename = "M")]
    pub runs: u64,
    pub seed: u64,
    /// `None` when no run wrapped (mean threshold infinite).
    pub t_bar: Option<f64>,
    pub max_slope: Option<SlopePeak>,
    pub psi_at_1: Option<f64>,
    pub x_k: Option<OpenFraction>,
}

impl StatsEntry {
    pub fn key(&self) -> RunKey {
        RunKey {
            d: self.d,
            side: self.side,
            k: self.k,
            batch: self.batch,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct StatsReport {
    pub entries: Vec<StatsEntry>,
}

pub fn summarize(
    hist: Option<&HistogramFile>,
    open: Option<&OpenStats>,
    key: RunKey,
    seed: u64,
    grid: usize,
) -> Result<StatsEntry> {
    let lattice = key.lattice()?;
    let mut entry = StatsEntry {
        d: key.d,
        side: key.side,
        k: key.k,
        batch: key.batch,
        bonds: lattice.bond_count() as u64,
        runs: 0,
        seed,
        t_bar: None,
        max_slope: None,
        psi_at_1: None,
        x_k: None,
    };
    if let Some(h) = hist {
        let q = h.hist.q_bar()?;
        entry.runs = h.hist.runs();
        entry.psi_at_1 = Some(q[q.len() - 1]);
        entry.t_bar = match estimator::mean_threshold(&q) {
            Ok(t) => Some(t),
            Err(Error::NoPercolation(_)) => None,
            Err(e) => return Err(e),
        };
        entry.max_slope = match estimator::max_dpsi(&q, grid) {
            Ok(p) => Some(p),
            Err(Error::Degenerate(_)) => None,
            Err(e) => return Err(e),
        };
    }
    if let Some(o) = open {
        entry.x_k = Some(o.estimate()?);
        if hist.is_none() {
            entry.runs = o.runs;
        }
    }
    Ok(entry)
}

/// Builds one stats entry per `(d, L, k, batch)` found among the inputs.
pub fn stats_from_files(files: Vec<io::DataFile>, grid: usize) -> Result<StatsReport> {
    let mut hists: BTreeMap<RunKey, HistogramFile> = BTreeMap::new();
    let mut opens: BTreeMap<RunKey, (u64, OpenStats)> = BTreeMap::new();
    for f in files {
        match f {
            io::DataFile::Histogram(h) => {
                if let Some(prev) = hists.get_mut(&h.key()) {
                    if prev.seed != h.seed {
                        return Err(Error::Mismatch(format!(
                            "two histograms for {} with different seeds",
                            h.key().stem()
                        )));
                    }
                    prev.hist.merge(&h.hist)?;
                } else {
                    hists.insert(h.key(), h);
                }
            }
            io::DataFile::OpenCounts(o) => {
                let entry = opens
                    .entry(o.key())
                    .or_insert_with(|| (o.seed, OpenStats::new(o.lattice.bond_count())));
                o.counts.iter().for_each(|&c| entry.1.push(c));
            }
        }
    }
    let keys: std::collections::BTreeSet<RunKey> =
        hists.keys().chain(opens.keys()).copied().collect();
    let entries = keys
        .into_iter()
        .map(|key| {
            let h = hists.get(&key);
            let o = opens.get(&key);
            let seed = h.map(|h| h.seed).or(o.map(|o| o.0)).unwrap_or_default();
            summarize(h, o.map(|o| &o.1), key, seed, grid)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(StatsReport { entries })
}

pub fn stats_from_cells(cells: &[CellOutput], grid: usize) -> Result<StatsReport> {
    let files = cells
        .iter()
        .flat_map(|c| {
            std::iter::once(io::DataFile::Histogram(c.histogram.clone()))
                .chain(c.open_counts.clone().map(io::DataFile::OpenCounts))
        })
        .collect();
    stats_from_files(files, grid)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FitMode {
    Tc,
    Nu,
    XkSlope,
}

impl std::str::FromStr for FitMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "tc" => Ok(FitMode::Tc),
            "nu" => Ok(FitMode::Nu),
            "xk-slope" => Ok(FitMode::XkSlope),
            other => Err(Error::Config(format!("unknown fit mode {other:?}"))),
        }
    }
}

/// Fit of one batch.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum BatchFit {
    Tc(TcFit),
    Nu(InvNuFit),
}

impl BatchFit {
    pub fn estimate(&self) -> f64 {
        match self {
            BatchFit::Tc(f) => f.t_c,
            BatchFit::Nu(f) => f.inv_nu,
        }
    }
}

/// Central value over batches for one `(d, k)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroupFit {
    pub d: u32,
    pub k: u32,
    #[serde(rename = "L")]
    pub sides: Vec<u32>,
    /// Mean over batches; `None` when the group does not percolate.
    pub estimate: Option<f64>,
    /// Standard deviation of the batch mean; `None` with a single batch.
    pub uncertainty: Option<f64>,
    pub per_batch: Vec<f64>,
    pub batches: Vec<BatchFit>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

/// Line through `(k, x_k)` for one dimension.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct XkSlopeFit {
    pub d: u32,
    pub points: Vec<XkPoint>,
    pub fit: fss::LineFit,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct XkPoint {
    pub k: u32,
    #[serde(rename = "L")]
    pub side: u32,
    pub mean: f64,
    pub sem: f64,
    pub runs: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub mode: FitMode,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub groups: Vec<GroupFit>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub lines: Vec<XkSlopeFit>,
}

impl FitReport {
    pub fn group(&self, d: u32, k: u32) -> Option<&GroupFit> {
        self.groups.iter().find(|g| g.d == d && g.k == k)
    }
}

pub fn fit_stats(report: &StatsReport, mode: FitMode, weighted: bool) -> Result<FitReport> {
    match mode {
        FitMode::XkSlope => Ok(FitReport {
            mode,
            groups: Vec::new(),
            lines: fit_xk_lines(report)?,
        }),
        FitMode::Tc | FitMode::Nu => {
            let mut by_group: BTreeMap<(u32, u32), BTreeMap<u32, Vec<&StatsEntry>>> =
                BTreeMap::new();
            for e in report.entries.iter().filter(|e| e.psi_at_1.is_some()) {
                by_group
                    .entry((e.d, e.k))
                    .or_default()
                    .entry(e.batch)
                    .or_default()
                    .push(e);
            }
            let groups = by_group
                .into_iter()
                .map(|((d, k), batches)| fit_group(d, k, batches, mode, weighted))
                .collect::<Result<Vec<_>>>()?;
            Ok(FitReport {
                mode,
                groups,
                lines: Vec::new(),
            })
        }
    }
}

fn fit_group(
    d: u32,
    k: u32,
    batches: BTreeMap<u32, Vec<&StatsEntry>>,
    mode: FitMode,
    weighted: bool,
) -> Result<GroupFit> {
    let mut sides: Vec<u32> = batches.values().flatten().map(|e| e.side).collect();
    sides.sort_unstable();
    sides.dedup();
    let mut group = GroupFit {
        d,
        k,
        sides,
        estimate: None,
        uncertainty: None,
        per_batch: Vec::new(),
        batches: Vec::new(),
        note: None,
    };
    let spreads = if weighted {
        Some(size_spreads(&batches, mode)?)
    } else {
        None
    };
    for entries in batches.values() {
        let mut entries = entries.clone();
        entries.sort_by_key(|e| e.side);
        let samples: Option<Vec<ScalingSample>> = entries
            .iter()
            .map(|e| {
                let v = match mode {
                    FitMode::Tc => e.t_bar,
                    _ => e.max_slope.map(|p| p.value),
                };
                v.map(|v| ScalingSample {
                    side: e.side as usize,
                    value: v,
                    err: spreads.as_ref().and_then(|m| m.get(&e.side).copied()),
                })
            })
            .collect();
        let Some(samples) = samples else {
            group.note = Some("no percolation at some size; critical time is infinite".into());
            group.per_batch.clear();
            group.batches.clear();
            return Ok(group);
        };
        let fit = match mode {
            FitMode::Tc => BatchFit::Tc(fss::fit_tc(&samples, weighted)?),
            _ => BatchFit::Nu(fss::fit_inv_nu(&samples, weighted)?),
        };
        group.per_batch.push(fit.estimate());
        group.batches.push(fit);
    }
    if group.per_batch.len() >= 2 {
        let (mean, sem) = fss::batch_stats(&group.per_batch)?;
        group.estimate = Some(mean);
        group.uncertainty = Some(sem);
    } else {
        group.estimate = group.per_batch.first().copied();
    }
    Ok(group)
}

/// Batch-to-batch standard deviation of the fitted observable at each `L`,
/// used as the per-point error of weighted fits.
fn size_spreads(
    batches: &BTreeMap<u32, Vec<&StatsEntry>>,
    mode: FitMode,
) -> Result<BTreeMap<u32, f64>> {
    let mut values: BTreeMap<u32, Vec<f64>> = BTreeMap::new();
    for e in batches.values().flatten() {
        let v = match mode {
            FitMode::Tc => e.t_bar,
            _ => e.max_slope.map(|p| p.value),
        };
        if let Some(v) = v {
            values.entry(e.side).or_default().push(v);
        }
    }
    values
        .into_iter()
        .map(|(side, vs)| {
            let (_, sem) = fss::batch_stats(&vs).map_err(|_| {
                Error::Config("weighted fits need at least 2 batches per size".into())
            })?;
            Ok((side, sem * (vs.len() as f64).sqrt()))
        })
        .collect()
}

/// Pools the x_k estimates of all batches at the largest `L` for each
/// `(d, k)` with `k < 2d`, then fits a line per dimension. `k = 2d` is
/// excluded because `x_{2d} = 1` identically.
fn fit_xk_lines(report: &StatsReport) -> Result<Vec<XkSlopeFit>> {
    let mut best: BTreeMap<(u32, u32), (u32, Vec<OpenFraction>)> = BTreeMap::new();
    for e in &report.entries {
        let Some(x) = e.x_k else { continue };
        if e.k >= 2 * e.d {
            continue;
        }
        let slot = best.entry((e.d, e.k)).or_insert((e.side, Vec::new()));
        if e.side > slot.0 {
            *slot = (e.side, Vec::new());
        }
        if e.side == slot.0 {
            slot.1.push(x);
        }
    }
    let mut by_d: BTreeMap<u32, Vec<XkPoint>> = BTreeMap::new();
    for ((d, k), (side, xs)) in best {
        let runs: u64 = xs.iter().map(|x| x.runs).sum();
        let m = runs as f64;
        let mean = xs.iter().map(|x| x.mean * x.runs as f64).sum::<f64>() / m;
        let sem = xs
            .iter()
            .map(|x| (x.sem * x.runs as f64).powi(2))
            .sum::<f64>()
            .sqrt()
            / m;
        by_d.entry(d).or_default().push(XkPoint {
            k,
            side,
            mean,
            sem,
            runs,
        });
    }
    by_d.into_iter()
        .map(|(d, points)| {
            let xy: Vec<(f64, f64)> = points.iter().map(|p| (p.k as f64, p.mean)).collect();
            Ok(XkSlopeFit {
                d,
                fit: fss::slope_xk(&xy)?,
                points,
            })
        })
        .collect()
}

/// Pairwise comparison of coupled wrap indices.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairReport {
    pub k_low: u32,
    pub k_high: u32,
    /// Runs with `t(k_high) < t(k_low)`.
    pub strict: u64,
    pub strict_pct: f64,
    /// Runs with `t(k_high) > t(k_low)`.
    pub reversed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CouplingReport {
    pub d: u32,
    #[serde(rename = "L")]
    pub side: u32,
    pub ks: Vec<u32>,
    #[serde(rename = "M")]
    pub runs: u64,
    pub seed: u64,
    /// Runs in which some larger capacity wrapped strictly later than a
    /// smaller one.
    pub violations: u64,
    pub pairs: Vec<PairReport>,
}

/// Replays `runs` shared bond orders under each capacity and compares the
/// wrap indices of every pair `k_low < k_high`. A run that never wraps
/// counts as wrapping at infinity.
pub fn couple(
    pool: &rayon::ThreadPool,
    d: u32,
    side: u32,
    ks: &[u32],
    runs: u64,
    seed: u64,
) -> Result<CouplingReport> {
    let mut ks = ks.to_vec();
    ks.sort_unstable();
    ks.dedup();
    if ks.is_empty() {
        return Err(Error::Empty("capacity list"));
    }
    let base = LatticeSpec::new(d, side, ks[0])?;
    for &k in &ks {
        base.with_capacity(k)?;
    }
    let records = pool.install(|| {
        (0..runs)
            .into_par_iter()
            .map_init(
                || Runner::new(base),
                |runner, run| {
                    let s = SeedSpec::for_sweep(seed, base.dim(), base.side(), 0, run);
                    runner.run_coupled(&ks, s)
                },
            )
            .collect::<Result<Vec<_>>>()
    })?;
    let time = |w: Option<usize>| w.unwrap_or(usize::MAX);

    let mut pairs = Vec::new();
    for lo in 0..ks.len() {
        for hi in lo + 1..ks.len() {
            let (mut strict, mut reversed) = (0, 0);
            for r in &records {
                let (a, b) = (time(r.wrap_index[lo]), time(r.wrap_index[hi]));
                if b < a {
                    strict += 1;
                } else if b > a {
                    reversed += 1;
                }
            }
            pairs.push(PairReport {
                k_low: ks[lo],
                k_high: ks[hi],
                strict,
                strict_pct: if runs > 0 {
                    100.0 * strict as f64 / runs as f64
                } else {
                    0.0
                },
                reversed,
            });
        }
    }
    let violations = records
        .iter()
        .filter(|r| r.wrap_index.windows(2).any(|w| time(w[1]) > time(w[0])))
        .count() as u64;
    Ok(CouplingReport {
        d,
        side,
        ks,
        runs,
        seed,
        violations,
        pairs,
    })
}
