//! Acceptance suite. Runs every criterion at its stated scale and prints
//! one PASS/FAIL line per criterion; exits nonzero if any fails.
//!
//! Runs per size are per batch: "2×10⁴ runs each, 5 batches" is five
//! batches of 2×10⁴.

mod common;

use std::process::ExitCode;
use std::time::Instant;

use cdperc_core::estimator::{self, DEFAULT_GRID};
use cdperc_core::experiment::{
    couple, fit_stats, resolve_workers, simulate, stats_from_cells, thread_pool, CellOutput,
    ExperimentConfig, FitMode, FitReport, StatsReport,
};
use cdperc_core::{LatticeSpec, Result, UnionOutcome, WrapUnionFind};
use common::{direct_wrap_fraction, lifted_cover_wrap, random_bonds};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const SEED: u64 = 2026;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict {
        pass,
        detail: detail.into(),
    }
}

struct Ctx {
    pool: rayon::ThreadPool,
    d2: Option<StatsReport>,
}

fn config(
    d: u32,
    sides: &[u32],
    k: &[u32],
    runs: u64,
    batches: u32,
    measure_xk: bool,
) -> ExperimentConfig {
    ExperimentConfig {
        d,
        sides: sides.to_vec(),
        k: k.to_vec(),
        runs,
        seed: SEED,
        batches,
        measure_xk,
        grid: DEFAULT_GRID,
        workers: None,
        out_dir: None,
    }
}

fn cells(ctx: &Ctx, cfg: &ExperimentConfig) -> Result<Vec<CellOutput>> {
    cfg.validate()?;
    simulate(cfg, &ctx.pool)
}

fn stats(ctx: &Ctx, cfg: &ExperimentConfig) -> Result<StatsReport> {
    stats_from_cells(&cells(ctx, cfg)?, cfg.grid)
}

fn estimate(report: &FitReport, d: u32, k: u32) -> (f64, f64) {
    let g = report.group(d, k).expect("group present");
    (
        g.estimate.unwrap_or(f64::NAN),
        g.uncertainty.unwrap_or(f64::NAN),
    )
}

fn d2_stats(ctx: &mut Ctx) -> Result<&StatsReport> {
    if ctx.d2.is_none() {
        let cfg = config(2, &[16, 32, 64, 128], &[3, 4], 20_000, 5, false);
        ctx.d2 = Some(stats(ctx, &cfg)?);
    }
    Ok(ctx.d2.as_ref().unwrap())
}

fn c1_ordinary_d2(ctx: &mut Ctx) -> Result<Verdict> {
    let fit = fit_stats(d2_stats(ctx)?, FitMode::Tc, false)?;
    let (tc, err) = estimate(&fit, 2, 4);
    Ok(verdict(
        (tc - 0.5).abs() <= 0.004,
        format!("t_c(d=2,k=4) = {tc:.5} ± {err:.5}, target 0.5 ± 0.004"),
    ))
}

fn c2_cdpm_d2(ctx: &mut Ctx) -> Result<Verdict> {
    let fit = fit_stats(d2_stats(ctx)?, FitMode::Tc, false)?;
    let (tc, err) = estimate(&fit, 2, 3);
    Ok(verdict(
        (tc - 0.532393).abs() <= 0.005 && tc > 0.5 && tc < 1.0,
        format!("t_c(d=2,k=3) = {tc:.5} ± {err:.5}, target 0.532393 ± 0.005 inside (1/2, 1)"),
    ))
}

fn d3_fit(ctx: &Ctx) -> Result<FitReport> {
    let cfg = config(3, &[8, 12, 16, 24], &[3, 4, 5, 6], 10_000, 5, false);
    fit_stats(&stats(ctx, &cfg)?, FitMode::Tc, false)
}

fn c3_c4_d3(ctx: &Ctx) -> Result<(Verdict, Verdict)> {
    let fit = d3_fit(ctx)?;
    let (tc6, err6) = estimate(&fit, 3, 6);
    let c3 = verdict(
        (tc6 - 0.248810).abs() <= 0.004,
        format!("t_c(d=3,k=6) = {tc6:.5} ± {err6:.5}, target 0.248810 ± 0.004"),
    );
    let tcs: Vec<(f64, f64)> = (3..=6).map(|k| estimate(&fit, 3, k)).collect();
    let ordered = tcs.windows(2).all(|w| w[0].0 > w[1].0);
    let listing = tcs
        .iter()
        .zip(3..)
        .map(|((t, e), k)| format!("k={k}: {t:.5} ± {e:.5}"))
        .collect::<Vec<_>>()
        .join(", ");
    let c4 = verdict(ordered, format!("{listing}; need strictly decreasing in k"));
    Ok((c3, c4))
}

fn c5_inv_nu(ctx: &mut Ctx) -> Result<Verdict> {
    let fit = fit_stats(d2_stats(ctx)?, FitMode::Nu, false)?;
    let (a, ea) = estimate(&fit, 2, 3);
    let (b, eb) = estimate(&fit, 2, 4);
    Ok(verdict(
        (a - 0.75).abs() <= 0.08 && (b - 0.75).abs() <= 0.08,
        format!("1/ν: k=3 {a:.4} ± {ea:.4}, k=4 {b:.4} ± {eb:.4}, target 0.75 ± 0.08"),
    ))
}

fn xk_values(report: &StatsReport, d: u32) -> Vec<f64> {
    let mut es: Vec<_> = report.entries.iter().filter(|e| e.d == d).collect();
    es.sort_by_key(|e| e.k);
    es.iter()
        .map(|e| e.x_k.map_or(f64::NAN, |x| x.mean))
        .collect()
}

struct XkData {
    reports: Vec<StatsReport>,
}

fn xk_data(ctx: &Ctx) -> Result<XkData> {
    let runs = [(2, 128, 4), (3, 32, 6), (4, 10, 8)];
    let reports = runs
        .iter()
        .map(|&(d, l, kmax)| {
            let ks: Vec<u32> = (1..=kmax).collect();
            stats(ctx, &config(d, &[l], &ks, 200, 1, true))
        })
        .collect::<Result<_>>()?;
    Ok(XkData { reports })
}

fn c6_xk(data: &XkData) -> Verdict {
    let d2 = xk_values(&data.reports[0], 2);
    let d3 = xk_values(&data.reports[1], 3);
    let t2 = [0.22670, 0.46578, 0.71094];
    let t3 = [0.15307, 0.31346, 0.47511, 0.63817, 0.80474];
    let ok2 = t2.iter().zip(&d2).all(|(t, x)| (t - x).abs() <= 0.001) && d2[3] == 1.0;
    let ok3 = t3.iter().zip(&d3).all(|(t, x)| (t - x).abs() <= 0.002) && d3[5] == 1.0;
    let fmt = |xs: &[f64]| {
        xs.iter()
            .map(|x| format!("{x:.5}"))
            .collect::<Vec<_>>()
            .join(" ")
    };
    verdict(
        ok2 && ok3,
        format!("d=2 L=128: {}; d=3 L=32: {}", fmt(&d2), fmt(&d3)),
    )
}

fn c7_xk_slope(data: &XkData) -> Result<Verdict> {
    let targets = [
        (2, 0.2419, 0.0016),
        (3, 0.1626, 0.0006),
        (4, 0.1225, 0.0003),
    ];
    let mut pass = true;
    let mut parts = Vec::new();
    for (report, (d, slope, err)) in data.reports.iter().zip(targets) {
        let fit = fit_stats(report, FitMode::XkSlope, false)?;
        let line = fit.lines.iter().find(|l| l.d == d).expect("line for d").fit;
        let combined = (line.slope_err.powi(2) + err * err).sqrt();
        pass &= (line.slope - slope).abs() <= 2.0 * combined;
        parts.push(format!(
            "d={d}: {:.4} ± {:.4} (target {slope} ± {err})",
            line.slope, line.slope_err
        ));
    }
    Ok(verdict(pass, parts.join(", ")))
}

fn c8_coupling(ctx: &Ctx) -> Result<Verdict> {
    let r = couple(&ctx.pool, 4, 8, &[6, 7, 8], 10_000, SEED)?;
    let pct = r
        .pairs
        .iter()
        .map(|p| format!("P(t{} < t{}) = {:.1}%", p.k_high, p.k_low, p.strict_pct))
        .collect::<Vec<_>>()
        .join(", ");
    Ok(verdict(
        r.violations == 0,
        format!("{} violations in {} runs; {pct}", r.violations, r.runs),
    ))
}

fn c9_k2(ctx: &Ctx) -> Result<Verdict> {
    let report = stats(ctx, &config(2, &[16, 32, 64], &[2], 10_000, 1, false))?;
    let mut es: Vec<_> = report.entries.iter().collect();
    es.sort_by_key(|e| e.side);
    let q: Vec<f64> = es.iter().map(|e| e.psi_at_1.unwrap_or(f64::NAN)).collect();
    let wrapped: Vec<u64> = es
        .iter()
        .zip(&q)
        .map(|(e, q)| (q * e.runs as f64).round() as u64)
        .collect();
    Ok(verdict(
        q.windows(2).all(|w| w[1] < w[0]),
        format!(
            "Q̄_N at L=16,32,64: {:.4} {:.4} {:.4} ({:?} of 10000 runs wrapped); need strictly decreasing",
            q[0], q[1], q[2], wrapped
        ),
    ))
}

fn c10_properties(ctx: &Ctx) -> Result<Verdict> {
    let mut failed = Vec::new();
    let mut check = |name: &str, ok: bool| {
        if !ok {
            failed.push(name.to_string());
        }
    };

    let spec = LatticeSpec::new(2, 8, 3)?;
    let cfg = config(2, &[8], &[3], 10_000, 1, false);
    let cell = cells(ctx, &cfg)?.remove(0);
    let q = cell.histogram.hist.q_bar()?;
    check("Q̄ monotone", q.windows(2).all(|w| w[0] <= w[1]));

    let psi = estimator::curve(&q, DEFAULT_GRID)?;
    check(
        "ψ monotone",
        psi.windows(2).all(|w| w[0].psi <= w[1].psi + 1e-12),
    );

    let h = 1e-5;
    let fd_ok = [0.2, 0.35, 0.5, 0.65, 0.8].iter().all(|&t| {
        let fd = (estimator::psi_at(&q, t + h).unwrap() - estimator::psi_at(&q, t - h).unwrap())
            / (2.0 * h);
        (fd - estimator::dpsi_at(&q, t).unwrap()).abs() < 1e-6
    });
    check("ψ' vs finite differences", fd_ok);

    let closed = estimator::mean_threshold(&q)?;
    let quad = estimator::mean_threshold_quadrature(&q, 64)?;
    check("t̄ closed form vs quadrature", (closed - quad).abs() < 1e-8);

    let runs = cfg.runs as usize;
    let conv_ok = [0.3, 0.5, 0.7].iter().enumerate().all(|(j, &t)| {
        let p = estimator::psi_at(&q, t).unwrap();
        let direct = direct_wrap_fraction(&spec, t, runs, SEED + j as u64);
        let var = |x: f64| x * (1.0 - x) / runs as f64;
        (p - direct).abs() < 3.0 * (var(p) + var(direct)).sqrt().max(1e-4)
    });
    check("convolution vs direct fixed-t simulation", conv_ok);

    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let mut oracle_ok = true;
    for (d, l) in [(2, 3), (2, 4), (2, 5), (3, 3), (3, 4), (3, 5)] {
        let lat = LatticeSpec::new(d, l, 1)?;
        for i in 0..200 {
            let bonds = random_bonds(&lat, 0.1 + 0.8 * (i as f64 / 200.0), &mut rng);
            let mut uf = WrapUnionFind::new(&lat);
            for &b in &bonds {
                let (u, v, a) = lat.endpoints(b)?;
                if let UnionOutcome::Wrapped { mismatch, .. } = uf.unite_along(u, v, a) {
                    oracle_ok &= mismatch.as_slice().iter().all(|c| c % l as i64 == 0);
                }
            }
            oracle_ok &= uf.wrapped_axes() == lifted_cover_wrap(&lat, &bonds);
        }
    }
    let small = LatticeSpec::new(2, 3, 1)?;
    for mask in 0u32..(1 << 18) {
        let bonds: Vec<usize> = (0..18).filter(|b| mask & (1 << b) != 0).collect();
        let mut uf = WrapUnionFind::new(&small);
        for &b in &bonds {
            let (u, v, a) = small.endpoints(b)?;
            uf.unite_along(u, v, a);
        }
        oracle_ok &= uf.wrapped_axes() == lifted_cover_wrap(&small, &bonds);
    }
    check("wrap detection vs lifted-cover oracle", oracle_ok);

    let det = config(3, &[5, 7], &[3, 6], 500, 2, true);
    let a = simulate(&det, &thread_pool(1)?)?;
    let b = simulate(&det, &thread_pool(3)?)?;
    check("determinism across worker counts", a == b);

    Ok(if failed.is_empty() {
        verdict(true, "Q̄/ψ monotone, ψ' FD, t̄ quadrature, convolution 3σ, lifted-cover oracle, worker determinism")
    } else {
        verdict(false, format!("failed: {}", failed.join(", ")))
    })
}

fn report(id: u32, title: &str, start: Instant, v: Result<Verdict>) -> bool {
    let secs = start.elapsed().as_secs_f64();
    let v = v.unwrap_or_else(|e| verdict(false, format!("error: {e}")));
    println!(
        "criterion {id:>2} [{}] {title}: {} ({secs:.0} s)",
        if v.pass { "PASS" } else { "FAIL" },
        v.detail
    );
    v.pass
}

fn main() -> ExitCode {
    // `cargo test -- --list` and name filters are harness conventions; this
    // target has a single entry.
    if std::env::args().any(|a| a == "--list") {
        println!("acceptance: test");
        return ExitCode::SUCCESS;
    }
    let workers = resolve_workers(None);
    let mut ctx = Ctx {
        pool: thread_pool(workers).expect("thread pool"),
        d2: None,
    };
    println!("acceptance suite, seed {SEED}, {workers} worker(s)");
    let mut ok = true;

    let t = Instant::now();
    ok &= report(1, "ordinary percolation d=2", t, c1_ordinary_d2(&mut ctx));
    let t = Instant::now();
    ok &= report(2, "CDPM d=2 k=3", t, c2_cdpm_d2(&mut ctx));

    let t = Instant::now();
    let (c3, c4) = match c3_c4_d3(&ctx) {
        Ok((a, b)) => (Ok(a), Ok(b)),
        Err(e) => (
            Err(e),
            Err(cdperc_core::Error::Degenerate("see criterion 3".into())),
        ),
    };
    ok &= report(3, "d=3 k=6 calibration", t, c3);
    let t = Instant::now();
    ok &= report(4, "d=3 monotonicity in k", t, c4);

    let t = Instant::now();
    ok &= report(5, "1/ν d=2", t, c5_inv_nu(&mut ctx));

    let t = Instant::now();
    match xk_data(&ctx) {
        Ok(data) => {
            ok &= report(6, "x_k values", t, Ok(c6_xk(&data)));
            let t = Instant::now();
            ok &= report(7, "x_k linearity", t, c7_xk_slope(&data));
        }
        Err(e) => {
            let msg = e.to_string();
            ok &= report(6, "x_k values", t, Err(e));
            ok &= report(7, "x_k linearity", t, Ok(verdict(false, msg)));
        }
    }

    let t = Instant::now();
    ok &= report(8, "coupling d=4 L=8", t, c8_coupling(&ctx));
    let t = Instant::now();
    ok &= report(9, "k=2 no-percolation signature", t, c9_k2(&ctx));
    let t = Instant::now();
    ok &= report(10, "property suites", t, c10_properties(&ctx));

    println!(
        "acceptance: {}",
        if ok { "all criteria pass" } else { "FAILED" }
    );
    if ok {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
