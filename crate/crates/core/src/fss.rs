//! Finite-size scaling fits for the critical time and `1/ν`, and the batch
//! statistics that turn independent estimates into a central value with an
//! error bar.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Search interval for the exponent of the `t̄_L` power-law correction.
pub const EXPONENT_RANGE: (f64, f64) = (-3.0, -0.05);
/// Golden-section stopping width on the exponent.
pub const EXPONENT_TOL: f64 = 1e-6;
const COARSE_STEPS: usize = 64;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalingSample {
    #[serde(rename = "L")]
    pub side: usize,
    pub value: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub err: Option<f64>,
}

impl ScalingSample {
    pub fn new(side: usize, value: f64) -> Self {
        Self {
            side,
            value,
            err: None,
        }
    }
}

/// Fit of `t̄_L = t_c + c·L^a`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TcFit {
    pub t_c: f64,
    pub amplitude: f64,
    /// `None` when every `t̄_L` is equal and the exponent is unconstrained.
    pub exponent: Option<f64>,
    pub residual: f64,
}

/// Log–log fit of the maximum slope against `L`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct InvNuFit {
    pub inv_nu: f64,
    pub slope: f64,
    pub intercept: f64,
    pub residual: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    pub slope_err: f64,
    pub residual: f64,
}

fn weights(samples: &[ScalingSample], weighted: bool, rel: bool) -> Result<Vec<f64>> {
    samples
        .iter()
        .map(|s| {
            if !weighted {
                return Ok(1.0);
            }
            let e = s
                .err
                .filter(|e| *e > 0.0 && e.is_finite())
                .ok_or_else(|| Error::Degenerate(format!("L={} has no positive error", s.side)))?;
            let e = if rel { e / s.value } else { e };
            Ok(1.0 / (e * e))
        })
        .collect()
}

/// Weighted least-squares line `y = a + b x`. Returns `(a, b, ssr)`.
fn line(xs: &[f64], ys: &[f64], ws: &[f64]) -> (f64, f64, f64) {
    let sw: f64 = ws.iter().sum();
    let mx = xs.iter().zip(ws).map(|(x, w)| w * x).sum::<f64>() / sw;
    let my = ys.iter().zip(ws).map(|(y, w)| w * y).sum::<f64>() / sw;
    let (mut sxx, mut sxy) = (0.0, 0.0);
    for ((x, y), w) in xs.iter().zip(ys).zip(ws) {
        sxx += w * (x - mx) * (x - mx);
        sxy += w * (x - mx) * (y - my);
    }
    let b = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let a = my - b * mx;
    let ssr = xs
        .iter()
        .zip(ys)
        .zip(ws)
        .map(|((x, y), w)| w * (y - a - b * x).powi(2))
        .sum();
    (a, b, ssr)
}

/// Fits `t̄_L = t_c + c·L^a` by separable least squares: for each trial
/// exponent the pair `(t_c, c)` is linear, and the exponent is located by a
/// coarse scan of [`EXPONENT_RANGE`] followed by golden-section search.
pub fn fit_tc(samples: &[ScalingSample], weighted: bool) -> Result<TcFit> {
    if samples.len() < 4 {
        return Err(Error::Degenerate(format!(
            "t_c fit needs at least 4 sizes, got {}",
            samples.len()
        )));
    }
    let mut sides: Vec<usize> = samples.iter().map(|s| s.side).collect();
    sides.sort_unstable();
    sides.dedup();
    if sides.len() != samples.len() {
        return Err(Error::Degenerate("repeated system size".into()));
    }
    if samples.iter().any(|s| !s.value.is_finite() || s.side < 3) {
        return Err(Error::Degenerate("non-finite value or L < 3".into()));
    }
    let ws = weights(samples, weighted, false)?;
    let ys: Vec<f64> = samples.iter().map(|s| s.value).collect();
    if ys.iter().all(|&y| y == ys[0]) {
        return Ok(TcFit {
            t_c: ys[0],
            amplitude: 0.0,
            exponent: None,
            residual: 0.0,
        });
    }
    let logs: Vec<f64> = samples.iter().map(|s| (s.side as f64).ln()).collect();
    let profile = |a: f64| {
        let xs: Vec<f64> = logs.iter().map(|l| (a * l).exp()).collect();
        line(&xs, &ys, &ws)
    };
    let ssr = |a: f64| profile(a).2;

    let (lo, hi) = EXPONENT_RANGE;
    let step = (hi - lo) / COARSE_STEPS as f64;
    let best = (0..=COARSE_STEPS)
        .map(|j| (j, ssr(lo + j as f64 * step)))
        .fold(
            (0, f64::INFINITY),
            |acc, (j, r)| if r < acc.1 { (j, r) } else { acc },
        )
        .0;
    let mut a = (lo + best.saturating_sub(1) as f64 * step).max(lo);
    let mut b = (lo + (best + 1) as f64 * step).min(hi);

    let ratio = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - ratio * (b - a);
    let mut d = a + ratio * (b - a);
    let (mut fc, mut fd) = (ssr(c), ssr(d));
    while b - a > EXPONENT_TOL {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - ratio * (b - a);
            fc = ssr(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + ratio * (b - a);
            fd = ssr(d);
        }
    }
    let exponent = 0.5 * (a + b);
    let (t_c, amplitude, residual) = profile(exponent);
    Ok(TcFit {
        t_c,
        amplitude,
        exponent: Some(exponent),
        residual,
    })
}

/// Least squares of `ln(value)` on `ln(L)`.
///
/// The maximum of `ψ'` grows as `L^{1/ν}` while the width of the
/// transition shrinks as `L^{-1/ν}`, so `1/ν` is reported as the magnitude
/// of the log–log slope; the signed slope is kept alongside.
pub fn fit_inv_nu(samples: &[ScalingSample], weighted: bool) -> Result<InvNuFit> {
    if samples.len() < 3 {
        return Err(Error::Degenerate(format!(
            "1/nu fit needs at least 3 sizes, got {}",
            samples.len()
        )));
    }
    if let Some(s) = samples
        .iter()
        .find(|s| s.value.is_nan() || s.value <= 0.0 || !s.value.is_finite())
    {
        return Err(Error::Degenerate(format!(
            "nonpositive slope maximum {} at L={}",
            s.value, s.side
        )));
    }
    let ws = weights(samples, weighted, true)?;
    let xs: Vec<f64> = samples.iter().map(|s| (s.side as f64).ln()).collect();
    let ys: Vec<f64> = samples.iter().map(|s| s.value.ln()).collect();
    let (intercept, slope, residual) = line(&xs, &ys, &ws);
    Ok(InvNuFit {
        inv_nu: slope.abs(),
        slope,
        intercept,
        residual,
    })
}

/// Mean and standard deviation of the mean of independent estimates.
pub fn batch_stats(estimates: &[f64]) -> Result<(f64, f64)> {
    if estimates.len() < 2 {
        return Err(Error::Degenerate(format!(
            "batch statistics need at least 2 estimates, got {}",
            estimates.len()
        )));
    }
    let n = estimates.len() as f64;
    let mean = estimates.iter().sum::<f64>() / n;
    let var = estimates.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    Ok((mean, (var / n).sqrt()))
}

/// Ordinary least-squares line through `(k, x_k)` points. The slope error
/// is the usual residual-based standard error; with exactly two points it
/// is zero.
pub fn slope_xk(points: &[(f64, f64)]) -> Result<LineFit> {
    if points.len() < 2 {
        return Err(Error::Degenerate(format!(
            "line fit needs at least 2 points, got {}",
            points.len()
        )));
    }
    let xs: Vec<f64> = points.iter().map(|p| p.0).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1).collect();
    let ws = vec![1.0; xs.len()];
    let (intercept, slope, residual) = line(&xs, &ys, &ws);
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::Degenerate("all points share one k".into()));
    }
    let slope_err = if xs.len() > 2 {
        (residual / (n - 2.0) / sxx).sqrt()
    } else {
        0.0
    };
    Ok(LineFit {
        slope,
        intercept,
        slope_err,
        residual,
    })
}
