//! Monte Carlo engine for constrained-degree bond percolation on the
//! periodic `d`-dimensional hypercubic lattice.
//!
//! Every bond tries to open once, in uniformly random order, and succeeds
//! only if neither endpoint already carries `k` open bonds. Runs record
//! when a cluster first wraps the torus; the resulting histograms are
//! turned into wrapping-probability curves, mean thresholds and slope
//! maxima, which feed finite-size-scaling fits of the critical time and
//! of `1/ν`.

pub mod dsu;
pub mod error;
pub mod estimator;
pub mod experiment;
pub mod fss;
pub mod histogram;
pub mod io;
pub mod lattice;
pub mod process;

pub use dsu::{AxisSet, UnionOutcome, WrapUnionFind};
pub use error::{Error, Result};
pub use histogram::{accumulate, QHistogram};
pub use lattice::{Coords, LatticeSpec};
pub use process::{run_coupled, run_once, CoupledRecord, RunRecord, Runner, SeedSpec};
