//! Plain-text file formats.
//!
//! Histogram file (`kind=histogram`):
//!
//! ```text
//! # format-version=1
//! # kind=histogram
//! # d=2
//! # L=32
//! # k=3
//! # N=2048
//! # M=1000
//! # seed=7
//! # batch=0
//! 1017 3
//! 1022 1
//! ...
//! inf 0
//! ```
//!
//! Each body line is `i count` for a first-wrap attempt index `i` with a
//! nonzero count, in increasing `i`; the final `inf` line counts runs that
//! never wrapped. Open-count files (`kind=open-counts`) share the header
//! and list the final open-bond count of every run, one per line, in run
//! order. Curves are CSV with the same `# key=value` header lines followed
//! by `t,psi,dpsi`.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::estimator::CurveSample;
use crate::histogram::QHistogram;
use crate::lattice::LatticeSpec;

pub const FORMAT_VERSION: u32 = 1;

/// Provenance carried in every file header.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct RunKey {
    pub d: u32,
    pub side: u32,
    pub k: u32,
    pub batch: u32,
}

impl RunKey {
    pub fn lattice(&self) -> Result<LatticeSpec> {
        LatticeSpec::new(self.d, self.side, self.k)
    }

    pub fn of(lattice: LatticeSpec, batch: u32) -> Self {
        Self {
            d: lattice.dim() as u32,
            side: lattice.side() as u32,
            k: lattice.capacity(),
            batch,
        }
    }

    /// Canonical file stem, e.g. `d2_L32_k3_b0`.
    pub fn stem(&self) -> String {
        format!("d{}_L{}_k{}_b{}", self.d, self.side, self.k, self.batch)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct HistogramFile {
    pub hist: QHistogram,
    pub seed: u64,
    pub batch: u32,
}

impl HistogramFile {
    pub fn key(&self) -> RunKey {
        RunKey::of(self.hist.lattice(), self.batch)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OpenCountFile {
    pub lattice: LatticeSpec,
    pub seed: u64,
    pub batch: u32,
    pub counts: Vec<usize>,
}

impl OpenCountFile {
    pub fn key(&self) -> RunKey {
        RunKey::of(self.lattice, self.batch)
    }
}

fn header(out: &mut String, kind: &str, lattice: LatticeSpec, runs: u64, seed: u64, batch: u32) {
    let _ = writeln!(out, "# format-version={FORMAT_VERSION}");
    let _ = writeln!(out, "# kind={kind}");
    let _ = writeln!(out, "# d={}", lattice.dim());
    let _ = writeln!(out, "# L={}", lattice.side());
    let _ = writeln!(out, "# k={}", lattice.capacity());
    let _ = writeln!(out, "# N={}", lattice.bond_count());
    let _ = writeln!(out, "# M={runs}");
    let _ = writeln!(out, "# seed={seed}");
    let _ = writeln!(out, "# batch={batch}");
}

pub fn format_histogram(file: &HistogramFile) -> String {
    let mut out = String::new();
    let h = &file.hist;
    header(
        &mut out,
        "histogram",
        h.lattice(),
        h.runs(),
        file.seed,
        file.batch,
    );
    for (i, c) in h.counts() {
        let _ = writeln!(out, "{i} {c}");
    }
    let _ = writeln!(out, "inf {}", h.no_wrap());
    out
}

pub fn format_open_counts(file: &OpenCountFile) -> String {
    let mut out = String::new();
    header(
        &mut out,
        "open-counts",
        file.lattice,
        file.counts.len() as u64,
        file.seed,
        file.batch,
    );
    for c in &file.counts {
        let _ = writeln!(out, "{c}");
    }
    out
}

/// Parsed header plus the remaining `(line number, text)` body lines.
pub struct Parsed<'a> {
    pub kind: String,
    pub lattice: LatticeSpec,
    pub runs: u64,
    pub seed: u64,
    pub batch: u32,
    pub fields: BTreeMap<String, String>,
    pub body: Vec<(usize, &'a str)>,
}

fn format_err(what: &'static str, line: usize, msg: impl Into<String>) -> Error {
    Error::Format {
        what,
        line,
        msg: msg.into(),
    }
}

pub fn parse_header<'a>(what: &'static str, text: &'a str) -> Result<Parsed<'a>> {
    let mut fields = BTreeMap::new();
    let mut body = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('#') {
            if !body.is_empty() {
                return Err(format_err(what, n + 1, "header line after body"));
            }
            let (key, value) = rest
                .trim()
                .split_once('=')
                .ok_or_else(|| format_err(what, n + 1, "expected `# key=value`"))?;
            fields.insert(key.trim().to_string(), value.trim().to_string());
        } else {
            body.push((n + 1, line));
        }
    }
    let get = |key: &str| -> Result<u64> {
        let v = fields
            .get(key)
            .ok_or_else(|| format_err(what, 0, format!("missing header `{key}`")))?;
        v.parse::<u64>()
            .map_err(|_| format_err(what, 0, format!("header `{key}` is not an integer: {v}")))
    };
    let version = get("format-version")?;
    if version != FORMAT_VERSION as u64 {
        return Err(format_err(
            what,
            0,
            format!("unsupported format-version {version}"),
        ));
    }
    let small = |key: &str| -> Result<u32> {
        u32::try_from(get(key)?)
            .map_err(|_| format_err(what, 0, format!("header `{key}` too large")))
    };
    let lattice = LatticeSpec::new(small("d")?, small("L")?, small("k")?)
        .map_err(|e| format_err(what, 0, e.to_string()))?;
    if get("N")? != lattice.bond_count() as u64 {
        return Err(format_err(what, 0, "N does not equal d·L^d"));
    }
    Ok(Parsed {
        kind: fields.get("kind").cloned().unwrap_or_default(),
        lattice,
        runs: get("M")?,
        seed: get("seed")?,
        batch: small("batch")?,
        fields,
        body,
    })
}

fn parse_u64(what: &'static str, line: usize, s: &str) -> Result<u64> {
    s.parse()
        .map_err(|_| format_err(what, line, format!("not a nonnegative integer: {s:?}")))
}

pub fn parse_histogram(text: &str) -> Result<HistogramFile> {
    const WHAT: &str = "histogram file";
    let p = parse_header(WHAT, text)?;
    if p.kind != "histogram" {
        return Err(format_err(WHAT, 0, format!("kind is {:?}", p.kind)));
    }
    let mut counts = Vec::new();
    let mut no_wrap = None;
    let mut last = 0u64;
    for &(n, line) in &p.body {
        if no_wrap.is_some() {
            return Err(format_err(WHAT, n, "line after `inf`"));
        }
        let mut parts = line.split_whitespace();
        let (Some(idx), Some(count), None) = (parts.next(), parts.next(), parts.next()) else {
            return Err(format_err(WHAT, n, "expected `index count`"));
        };
        let count = parse_u64(WHAT, n, count)?;
        if idx == "inf" {
            no_wrap = Some(count);
            continue;
        }
        let i = parse_u64(WHAT, n, idx)?;
        if i <= last {
            return Err(format_err(
                WHAT,
                n,
                "indices must be positive and increasing",
            ));
        }
        last = i;
        counts.push((i as usize, count));
    }
    let no_wrap = no_wrap.ok_or_else(|| format_err(WHAT, 0, "missing `inf` line"))?;
    let hist = QHistogram::from_counts(p.lattice, counts, no_wrap)
        .map_err(|e| format_err(WHAT, 0, e.to_string()))?;
    if hist.runs() != p.runs {
        return Err(format_err(
            WHAT,
            0,
            format!("M={} but counts sum to {}", p.runs, hist.runs()),
        ));
    }
    Ok(HistogramFile {
        hist,
        seed: p.seed,
        batch: p.batch,
    })
}

pub fn parse_open_counts(text: &str) -> Result<OpenCountFile> {
    const WHAT: &str = "open-count file";
    let p = parse_header(WHAT, text)?;
    if p.kind != "open-counts" {
        return Err(format_err(WHAT, 0, format!("kind is {:?}", p.kind)));
    }
    let n = p.lattice.bond_count() as u64;
    let counts = p
        .body
        .iter()
        .map(|&(line, s)| {
            let c = parse_u64(WHAT, line, s)?;
            if c > n {
                return Err(format_err(WHAT, line, "open count exceeds N"));
            }
            Ok(c as usize)
        })
        .collect::<Result<Vec<_>>>()?;
    if counts.len() as u64 != p.runs {
        return Err(format_err(
            WHAT,
            0,
            "M does not match the number of records",
        ));
    }
    Ok(OpenCountFile {
        lattice: p.lattice,
        seed: p.seed,
        batch: p.batch,
        counts,
    })
}

/// Either kind of data file, as detected from its header.
pub enum DataFile {
    Histogram(HistogramFile),
    OpenCounts(OpenCountFile),
}

pub fn read_data_file(path: &Path) -> Result<DataFile> {
    let text = std::fs::read_to_string(path)?;
    let kind = parse_header("data file", &text)?.kind;
    match kind.as_str() {
        "histogram" => Ok(DataFile::Histogram(parse_histogram(&text)?)),
        "open-counts" => Ok(DataFile::OpenCounts(parse_open_counts(&text)?)),
        other => Err(format_err(
            "data file",
            0,
            format!("unknown kind {other:?}"),
        )),
    }
}

pub fn read_histogram(path: &Path) -> Result<HistogramFile> {
    parse_histogram(&std::fs::read_to_string(path)?)
}

pub fn format_curve(file: &HistogramFile, samples: &[CurveSample]) -> String {
    let mut out = String::new();
    let h = &file.hist;
    header(
        &mut out,
        "curve",
        h.lattice(),
        h.runs(),
        file.seed,
        file.batch,
    );
    out.push_str("t,psi,dpsi\n");
    for s in samples {
        let _ = writeln!(out, "{},{},{}", s.t, s.psi, s.dpsi);
    }
    out
}
