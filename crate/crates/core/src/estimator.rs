//! Canonical-ensemble observables from microcanonical wrap probabilities.
//!
//! With `Q̄_i` the probability of a wrapping cluster after `i` attempted
//! bonds, the wrapping probability at concentration `t` is the binomial
//! mixture
//!
//! ```text
//! ψ(t) = Σ_i C(N,i) t^i (1−t)^(N−i) Q̄_i
//! ```
//!
//! and its derivative
//!
//! ```text
//! ψ'(t) = Σ_i C(N,i) (i − Nt) t^(i−1) (1−t)^(N−i−1) Q̄_i
//!       = N Σ_{i<N} C(N−1,i) t^i (1−t)^(N−1−i) (Q̄_{i+1} − Q̄_i).
//! ```
//!
//! The second form is evaluated: it has no cancellation and is
//! nonnegative whenever `Q̄` is nondecreasing.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::process::RunRecord;

/// Binomial weights smaller than this fraction of the peak are dropped.
pub const WINDOW_CUTOFF: f64 = 1e-15;

/// Default number of points of the `t` grid used by [`max_dpsi`].
pub const DEFAULT_GRID: usize = 2001;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurveSample {
    pub t: f64,
    pub psi: f64,
    pub dpsi: f64,
}

/// Normalised binomial(n, t) probabilities over a window around the mode.
/// Returns the first index of the window and the weights.
pub fn binomial_window(n: usize, t: f64) -> (usize, Vec<f64>) {
    if t <= 0.0 {
        return (0, vec![1.0]);
    }
    if t >= 1.0 {
        return (n, vec![1.0]);
    }
    let mode = (((n + 1) as f64 * t).floor() as usize).min(n);
    let odds = t / (1.0 - t);

    let mut up = Vec::new();
    let mut w = 1.0;
    for i in mode..n {
        w *= (n - i) as f64 / (i + 1) as f64 * odds;
        if w < WINDOW_CUTOFF {
            break;
        }
        up.push(w);
    }
    let mut down = Vec::new();
    let mut w = 1.0;
    for i in (1..=mode).rev() {
        w *= i as f64 / (n - i + 1) as f64 / odds;
        if w < WINDOW_CUTOFF {
            break;
        }
        down.push(w);
    }

    let start = mode - down.len();
    let mut weights = Vec::with_capacity(down.len() + 1 + up.len());
    weights.extend(down.into_iter().rev());
    weights.push(1.0);
    weights.extend(up);
    let total: f64 = weights.iter().sum();
    weights.iter_mut().for_each(|w| *w /= total);
    (start, weights)
}

fn check_t(t: f64) -> Result<()> {
    if (0.0..=1.0).contains(&t) {
        Ok(())
    } else {
        Err(Error::TimeOutOfRange(t))
    }
}

fn bond_count(qbar: &[f64]) -> Result<usize> {
    match qbar.len() {
        0 => Err(Error::Empty("Q̄ vector")),
        n => Ok(n - 1),
    }
}

/// Wrapping probability at concentration `t`.
pub fn psi_at(qbar: &[f64], t: f64) -> Result<f64> {
    check_t(t)?;
    let n = bond_count(qbar)?;
    let (start, w) = binomial_window(n, t);
    Ok(w.iter().zip(&qbar[start..]).map(|(w, q)| w * q).sum())
}

/// Derivative of [`psi_at`]; one-sided at `t = 0` and `t = 1`.
pub fn dpsi_at(qbar: &[f64], t: f64) -> Result<f64> {
    check_t(t)?;
    let n = bond_count(qbar)?;
    if n == 0 {
        return Ok(0.0);
    }
    let (start, w) = binomial_window(n - 1, t);
    let s: f64 = w
        .iter()
        .enumerate()
        .map(|(j, w)| w * (qbar[start + j + 1] - qbar[start + j]))
        .sum();
    Ok(n as f64 * s)
}

/// `ψ` and `ψ'` on `grid` equally spaced points of `[0, 1]`.
pub fn curve(qbar: &[f64], grid: usize) -> Result<Vec<CurveSample>> {
    if grid < 2 {
        return Err(Error::Degenerate(format!("grid of {grid} points")));
    }
    (0..grid)
        .map(|j| {
            let t = j as f64 / (grid - 1) as f64;
            Ok(CurveSample {
                t,
                psi: psi_at(qbar, t)?,
                dpsi: dpsi_at(qbar, t)?,
            })
        })
        .collect()
}

/// Mean concentration at first percolation, `∫₀¹ t ψ'(t) dt`, in closed
/// form. Integrating by parts and using `∫₀¹ C(N,i) tⁱ(1−t)^(N−i) dt =
/// 1/(N+1)` gives `Q̄_N − Σ_i Q̄_i / (N+1)`.
///
/// Fails with [`Error::NoPercolation`] if no run ever wrapped.
pub fn mean_threshold(qbar: &[f64]) -> Result<f64> {
    let n = bond_count(qbar)?;
    let last = qbar[n];
    if last <= 0.0 {
        return Err(Error::NoPercolation(
            "no run wrapped; mean threshold is infinite",
        ));
    }
    let sum: f64 = qbar.iter().sum();
    Ok(last - sum / (n + 1) as f64)
}

/// Composite Gauss–Legendre evaluation of `∫₀¹ t ψ'(t) dt` over `panels`
/// equal panels. Cross-check for [`mean_threshold`].
pub fn mean_threshold_quadrature(qbar: &[f64], panels: usize) -> Result<f64> {
    integrate(panels, |t| Ok(t * dpsi_at(qbar, t)?))
}

/// `∫₀¹ ψ'(t) dt` by the same quadrature; equals `Q̄_N − Q̄_0`.
pub fn integrate_dpsi(qbar: &[f64], panels: usize) -> Result<f64> {
    integrate(panels, |t| dpsi_at(qbar, t))
}

const GL_ORDER: usize = 20;

fn integrate(panels: usize, f: impl Fn(f64) -> Result<f64>) -> Result<f64> {
    if panels == 0 {
        return Err(Error::Degenerate("zero quadrature panels".into()));
    }
    let (nodes, weights) = gauss_legendre(GL_ORDER);
    let h = 1.0 / panels as f64;
    let mut total = 0.0;
    for p in 0..panels {
        let mid = (p as f64 + 0.5) * h;
        for (x, w) in nodes.iter().zip(&weights) {
            total += w * 0.5 * h * f(mid + 0.5 * h * x)?;
        }
    }
    Ok(total)
}

/// Nodes and weights of the `n`-point Gauss–Legendre rule on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for j in 2..=n {
                let p2 = ((2 * j - 1) as f64 * x * p1 - (j - 1) as f64 * p0) / j as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

/// Location and height of the maximum of `ψ'`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SlopePeak {
    pub t: f64,
    pub value: f64,
}

/// Scans `ψ'` on a uniform grid of `grid` points, then refines the best
/// point by a parabola through it and its neighbours.
pub fn max_dpsi(qbar: &[f64], grid: usize) -> Result<SlopePeak> {
    if grid < 3 {
        return Err(Error::Degenerate(format!("grid of {grid} points")));
    }
    bond_count(qbar)?;
    if qbar.iter().all(|&q| q == qbar[0]) {
        return Err(Error::Degenerate("constant Q̄ has no slope maximum".into()));
    }
    let h = 1.0 / (grid - 1) as f64;
    let values = (0..grid)
        .map(|j| dpsi_at(qbar, j as f64 * h))
        .collect::<Result<Vec<_>>>()?;
    let (best, &top) = values
        .iter()
        .enumerate()
        .fold((0, &f64::NEG_INFINITY), |acc, (j, v)| {
            if *v > *acc.1 {
                (j, v)
            } else {
                acc
            }
        });

    let mut peak = SlopePeak {
        t: best as f64 * h,
        value: top,
    };
    if best > 0 && best + 1 < grid {
        let (a, b, c) = (values[best - 1], top, values[best + 1]);
        let curvature = a - 2.0 * b + c;
        if curvature < 0.0 {
            let shift = 0.5 * (a - c) / curvature;
            let t = (peak.t + shift * h).clamp(0.0, 1.0);
            let v = dpsi_at(qbar, t)?;
            if v > peak.value {
                peak = SlopePeak { t, value: v };
            }
        }
    }
    Ok(peak)
}

/// Mean fraction of open bonds at `t = 1` and its standard error.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OpenFraction {
    pub mean: f64,
    pub sem: f64,
    pub runs: u64,
}

/// Running sums of final open-bond counts. Integer sums keep merges exact
/// and order independent.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct OpenStats {
    pub bonds: u64,
    pub runs: u64,
    pub sum: u64,
    pub sum_sq: u128,
}

impl OpenStats {
    pub fn new(bonds: usize) -> Self {
        Self {
            bonds: bonds as u64,
            ..Self::default()
        }
    }

    pub fn push(&mut self, open_count: usize) {
        let c = open_count as u64;
        self.runs += 1;
        self.sum += c;
        self.sum_sq += c as u128 * c as u128;
    }

    pub fn merge(&mut self, other: &OpenStats) {
        self.runs += other.runs;
        self.sum += other.sum;
        self.sum_sq += other.sum_sq;
    }

    pub fn estimate(&self) -> Result<OpenFraction> {
        if self.runs == 0 {
            return Err(Error::Empty("no open-count records"));
        }
        let m = self.runs as f64;
        let nb = self.bonds as f64;
        let mean = self.sum as f64 / m;
        let sem = if self.runs > 1 {
            // Σ(c − c̄)² = Σc² − (Σc)²/m, exact in integers.
            let ss = self.sum_sq * self.runs as u128 - self.sum as u128 * self.sum as u128;
            let var = ss as f64 / (m * (m - 1.0));
            (var / m).sqrt() / nb
        } else {
            0.0
        };
        Ok(OpenFraction {
            mean: mean / nb,
            sem,
            runs: self.runs,
        })
    }
}

/// x_k from complete runs.
pub fn xk_estimate(records: &[RunRecord]) -> Result<OpenFraction> {
    let first = records.first().ok_or(Error::Empty("no run records"))?;
    let mut stats = OpenStats::new(first.lattice.bond_count());
    for r in records {
        if r.lattice != first.lattice {
            return Err(Error::Mismatch("records from different lattices".into()));
        }
        let c = r.open_count.ok_or(Error::Mismatch(
            "record stopped before all bonds were tried".into(),
        ))?;
        stats.push(c);
    }
    stats.estimate()
}
