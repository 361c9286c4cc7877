//! Single and coupled runs of the constrained-degree process.
//!
//! A run draws a uniformly random order of all `N` bonds and attempts them
//! one by one. An attempted bond opens only if both endpoints currently
//! have fewer than `k` open bonds. The attempt index at which some cluster
//! first wraps the torus is recorded; attempts count every bond tried,
//! opened or not.
//!
//! Opening times are never sampled. The order alone determines the
//! microcanonical wrap index, and replaying one order with several
//! capacities compares percolation times under a shared configuration.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dsu::{with_dim, UnionOutcome, WrapUnionFind};
use crate::error::{Error, Result};
use crate::lattice::LatticeSpec;

/// Identifies the random stream of one run.
///
/// The stream is ChaCha8 seeded with `master_seed` (expanded by
/// `SeedableRng::seed_from_u64`) and positioned on stream `run_index`, so
/// each run's bond order depends on nothing but this pair.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SeedSpec {
    pub master_seed: u64,
    pub run_index: u64,
}

impl SeedSpec {
    pub fn new(master_seed: u64, run_index: u64) -> Self {
        Self {
            master_seed,
            run_index,
        }
    }

    /// Seed for run `run` of batch `batch` on the `d`-dimensional box of
    /// side `side`. The capacity is deliberately not mixed in: sweeps over
    /// `k` with one master seed replay identical bond orders.
    pub fn for_sweep(master_seed: u64, d: usize, side: usize, batch: u32, run: u64) -> Self {
        let key = ((d as u64) << 56) ^ ((side as u64) << 24) ^ batch as u64;
        Self::new(splitmix64(master_seed ^ splitmix64(key)), run)
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.master_seed);
        rng.set_stream(self.run_index);
        rng
    }
}

/// SplitMix64 output function.
pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Outcome of one run.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunRecord {
    pub lattice: LatticeSpec,
    /// 1-based attempt index whose opening first produced a wrapping
    /// cluster.
    pub wrap_index: Option<usize>,
    pub wrap_axis: Option<usize>,
    /// Open bonds after all `N` attempts. `None` when the run stopped
    /// early at the wrap.
    pub open_count: Option<usize>,
}

/// Wrap indices of several capacities replayed on one bond order.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoupledRecord {
    pub ks: Vec<u32>,
    pub wrap_index: Vec<Option<usize>>,
}

/// Lazily materialised Fisher–Yates permutation of `0..N`.
///
/// Position `i` is fixed the first time it is requested; only swapped
/// slots are restored on reset, so a run that stops early costs
/// `O(attempts)` rather than `O(N)`.
struct BondOrder {
    perm: Vec<u32>,
    dirty: Vec<u32>,
    drawn: usize,
}

impl BondOrder {
    fn new(n: usize) -> Self {
        Self {
            perm: (0..n as u32).collect(),
            dirty: Vec::new(),
            drawn: 0,
        }
    }

    fn reset(&mut self) {
        for &p in &self.dirty {
            self.perm[p as usize] = p;
        }
        self.dirty.clear();
        self.drawn = 0;
    }

    #[inline]
    fn at<R: Rng>(&mut self, i: usize, rng: &mut R) -> usize {
        let n = self.perm.len();
        while self.drawn <= i {
            let pos = self.drawn;
            let j = rng.random_range(pos as u32..n as u32) as usize;
            self.perm.swap(pos, j);
            self.dirty.push(pos as u32);
            if j != pos {
                self.dirty.push(j as u32);
            }
            self.drawn += 1;
        }
        self.perm[i] as usize
    }
}

/// Per-site degrees and cluster structure of one run.
struct OpenState {
    lattice: LatticeSpec,
    uf: WrapUnionFind,
    /// `+1` neighbour of every bond's base site, indexed by bond.
    neighbour: Vec<u32>,
    degree: Vec<u8>,
    touched: Vec<u32>,
}

impl OpenState {
    fn new(lattice: LatticeSpec) -> Self {
        let neighbour = (0..lattice.bond_count())
            .map(|b| lattice.endpoints_unchecked(b).1 as u32)
            .collect();
        Self {
            uf: WrapUnionFind::new(&lattice),
            neighbour,
            degree: vec![0; lattice.site_count()],
            touched: Vec::new(),
            lattice,
        }
    }

    fn reset(&mut self) {
        for &s in &self.touched {
            self.degree[s as usize] = 0;
        }
        self.uf
            .reset_sites(self.touched.iter().map(|&s| s as usize));
        self.touched.clear();
    }

    /// Attempts bonds `next_bond(0), next_bond(1), …` under capacity `k`.
    fn replay(
        &mut self,
        k: u32,
        stop_on_wrap: bool,
        next_bond: impl FnMut(usize) -> usize,
    ) -> RunRecord {
        with_dim!(self.lattice.dim(), D => self.replay_fixed::<D>(k, stop_on_wrap, next_bond))
    }

    fn replay_fixed<const D: usize>(
        &mut self,
        k: u32,
        stop_on_wrap: bool,
        mut next_bond: impl FnMut(usize) -> usize,
    ) -> RunRecord {
        self.reset();
        let lattice = self
            .lattice
            .with_capacity(k)
            .expect("capacity checked by caller");
        let n = lattice.bond_count();
        let cap = k as u8;
        let mut wrap_index = None;
        let mut wrap_axis = None;
        let mut opened = 0usize;
        let mut attempts = 0usize;

        while attempts < n {
            let bond = next_bond(attempts);
            attempts += 1;
            let (u, axis) = (bond / D, bond % D);
            let v = self.neighbour[bond] as usize;
            if self.degree[u] >= cap || self.degree[v] >= cap {
                continue;
            }
            for s in [u, v] {
                if self.degree[s] == 0 {
                    self.touched.push(s as u32);
                }
                self.degree[s] += 1;
                debug_assert!(self.degree[s] <= cap);
            }
            opened += 1;
            let mut step = [0i64; D];
            step[axis] = 1;
            if let UnionOutcome::Wrapped { axes, .. } = self.uf.unite_fixed::<D>(u, v, step) {
                if wrap_index.is_none() {
                    wrap_index = Some(attempts);
                    wrap_axis = axes.first();
                    if stop_on_wrap {
                        break;
                    }
                }
            }
        }

        RunRecord {
            lattice,
            wrap_index,
            wrap_axis,
            open_count: (attempts == n).then_some(opened),
        }
    }
}

/// Reusable buffers for repeated runs on one box. One per worker.
pub struct Runner {
    state: OpenState,
    order: BondOrder,
}

impl Runner {
    /// `lattice`'s capacity is the default for [`run_once`](Self::run_once);
    /// coupled runs override it.
    pub fn new(lattice: LatticeSpec) -> Self {
        Self {
            order: BondOrder::new(lattice.bond_count()),
            state: OpenState::new(lattice),
        }
    }

    pub fn lattice(&self) -> LatticeSpec {
        self.state.lattice
    }

    /// One run with a fresh uniformly random bond order. With
    /// `measure_xk == false` the run stops at the first wrap.
    pub fn run_once(&mut self, seed: SeedSpec, measure_xk: bool) -> RunRecord {
        let k = self.state.lattice.capacity();
        self.run_with_capacity(k, seed, measure_xk)
    }

    fn run_with_capacity(&mut self, k: u32, seed: SeedSpec, measure_xk: bool) -> RunRecord {
        let mut rng = seed.rng();
        self.order.reset();
        let order = &mut self.order;
        self.state.replay(k, !measure_xk, |i| order.at(i, &mut rng))
    }

    /// Replays one random bond order under every capacity in `ks`.
    pub fn run_coupled(&mut self, ks: &[u32], seed: SeedSpec) -> Result<CoupledRecord> {
        Ok(self.run_coupled_records(ks, seed, false)?.into_iter().fold(
            CoupledRecord {
                ks: Vec::with_capacity(ks.len()),
                wrap_index: Vec::with_capacity(ks.len()),
            },
            |mut acc, r| {
                acc.ks.push(r.lattice.capacity());
                acc.wrap_index.push(r.wrap_index);
                acc
            },
        ))
    }

    /// Like [`run_coupled`](Self::run_coupled) but returns the full record
    /// of each capacity.
    pub fn run_coupled_records(
        &mut self,
        ks: &[u32],
        seed: SeedSpec,
        measure_xk: bool,
    ) -> Result<Vec<RunRecord>> {
        if ks.is_empty() {
            return Err(Error::Empty("capacity list"));
        }
        for &k in ks {
            self.state.lattice.with_capacity(k)?;
        }
        let mut rng = seed.rng();
        self.order.reset();
        let mut out = Vec::with_capacity(ks.len());
        for &k in ks {
            let order = &mut self.order;
            out.push(self.state.replay(k, !measure_xk, |i| order.at(i, &mut rng)));
        }
        Ok(out)
    }

    /// Runs a caller-supplied bond order. Attempts stop when `order` is
    /// exhausted or, unless `measure_xk`, at the first wrap.
    pub fn run_with_order(&mut self, order: &[usize], measure_xk: bool) -> Result<RunRecord> {
        let n = self.state.lattice.bond_count();
        if order.len() != n {
            return Err(Error::Mismatch(format!(
                "order has {} bonds, lattice has {n}",
                order.len()
            )));
        }
        if let Some(&b) = order.iter().find(|&&b| b >= n) {
            return Err(Error::BondOutOfRange { bond: b, count: n });
        }
        let k = self.state.lattice.capacity();
        Ok(self.state.replay(k, !measure_xk, |i| order[i]))
    }
}

pub fn run_once(lattice: LatticeSpec, seed: SeedSpec, measure_xk: bool) -> RunRecord {
    Runner::new(lattice).run_once(seed, measure_xk)
}

/// `lattice` supplies `d` and `L`; its capacity is ignored.
pub fn run_coupled(lattice: LatticeSpec, ks: &[u32], seed: SeedSpec) -> Result<CoupledRecord> {
    Runner::new(lattice).run_coupled(ks, seed)
}
