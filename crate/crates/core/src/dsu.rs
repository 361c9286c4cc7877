//! Union-find over torus sites that tracks unwrapped displacements, so a
//! bond closing a cycle can be classified as contractible or as winding
//! around the torus.
//!
//! Each site stores `disp[s] = pos(parent) − pos(s)` in the covering
//! lattice. Summing along the path to the root gives `offset(s) =
//! pos(root) − pos(s)`. When a bond `u → v` (geometric step `step`) joins
//! two sites already in one cluster, the mismatch
//! `offset(u) − offset(v) − step` is zero for a contractible cycle and
//! otherwise a nonzero multiple of `L` along every axis the cycle winds.

use crate::lattice::{Coords, LatticeSpec, MAX_DIM};

/// Runs `$body` with `$D` bound to the runtime dimension as a constant, so
/// hot loops are compiled per dimension.
macro_rules! with_dim {
    ($dim:expr, $D:ident => $body:expr) => {
        match $dim {
            2 => {
                const $D: usize = 2;
                $body
            }
            3 => {
                const $D: usize = 3;
                $body
            }
            4 => {
                const $D: usize = 4;
                $body
            }
            5 => {
                const $D: usize = 5;
                $body
            }
            6 => {
                const $D: usize = 6;
                $body
            }
            7 => {
                const $D: usize = 7;
                $body
            }
            8 => {
                const $D: usize = 8;
                $body
            }
            d => unreachable!("unsupported dimension {d}"),
        }
    };
}
pub(crate) use with_dim;

#[inline(always)]
fn add<const D: usize>(a: &mut [i64; D], b: &[i64; D]) {
    for i in 0..D {
        a[i] += b[i];
    }
}

#[inline(always)]
fn sub<const D: usize>(a: &mut [i64; D], b: &[i64; D]) {
    for i in 0..D {
        a[i] -= b[i];
    }
}

/// Outcome of opening one bond.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum UnionOutcome {
    /// Two clusters merged.
    Merged,
    /// Endpoints already connected by a path with the same displacement.
    Redundant,
    /// Endpoints already connected, but through a path winding the torus.
    Wrapped { axes: AxisSet, mismatch: Coords },
}

/// Bit set of axes.
#[derive(Clone, Copy, Default, PartialEq, Eq, Hash)]
pub struct AxisSet(u8);

impl AxisSet {
    pub fn contains(&self, axis: usize) -> bool {
        self.0 & (1 << axis) != 0
    }

    pub fn insert(&mut self, axis: usize) {
        self.0 |= 1 << axis;
    }

    pub fn is_empty(&self) -> bool {
        self.0 == 0
    }

    pub fn union(self, other: AxisSet) -> AxisSet {
        AxisSet(self.0 | other.0)
    }

    /// Lowest axis in the set.
    pub fn first(&self) -> Option<usize> {
        (!self.is_empty()).then(|| self.0.trailing_zeros() as usize)
    }

    pub fn iter(self) -> impl Iterator<Item = usize> {
        (0..MAX_DIM).filter(move |&a| self.contains(a))
    }
}

impl std::fmt::Debug for AxisSet {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_set().entries(self.iter()).finish()
    }
}

pub struct WrapUnionFind {
    dim: usize,
    side: i64,
    parent: Vec<u32>,
    size: Vec<u32>,
    disp: Vec<i64>,
    wrapped: AxisSet,
}

impl WrapUnionFind {
    pub fn new(spec: &LatticeSpec) -> Self {
        let n = spec.site_count();
        Self {
            dim: spec.dim(),
            side: spec.side() as i64,
            parent: (0..n as u32).collect(),
            size: vec![1; n],
            disp: vec![0; n * spec.dim()],
            wrapped: AxisSet::default(),
        }
    }

    pub fn len(&self) -> usize {
        self.parent.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parent.is_empty()
    }

    /// Restores the listed sites to singletons and clears the wrap flags.
    /// The caller must pass every site that took part in a union since the
    /// last reset.
    pub fn reset_sites(&mut self, sites: impl IntoIterator<Item = usize>) {
        let d = self.dim;
        for s in sites {
            self.parent[s] = s as u32;
            self.size[s] = 1;
            self.disp[s * d..(s + 1) * d].fill(0);
        }
        self.wrapped = AxisSet::default();
    }

    pub fn reset(&mut self) {
        self.reset_sites(0..self.len());
    }

    /// Root of `s` and the unwrapped offset `pos(root) − pos(s)`.
    /// Compresses the path.
    pub fn find(&mut self, s: usize) -> (usize, Coords) {
        with_dim!(self.dim, D => {
            let (root, off) = self.find_fixed::<D>(s);
            (root, Coords::from_slice(&off))
        })
    }

    #[inline(always)]
    fn disp_of<const D: usize>(&self, x: usize) -> [i64; D] {
        let mut out = [0; D];
        out.copy_from_slice(&self.disp[x * D..(x + 1) * D]);
        out
    }

    #[inline(always)]
    fn set_disp<const D: usize>(&mut self, x: usize, v: [i64; D]) {
        self.disp[x * D..(x + 1) * D].copy_from_slice(&v);
    }

    #[inline]
    fn find_fixed<const D: usize>(&mut self, s: usize) -> (usize, [i64; D]) {
        let p = self.parent[s] as usize;
        if p == s {
            return (s, [0; D]);
        }
        let mut total = self.disp_of::<D>(s);
        let mut x = p;
        loop {
            let p = self.parent[x] as usize;
            if p == x {
                break;
            }
            add(&mut total, &self.disp_of::<D>(x));
            x = p;
        }
        let root = x;

        // Second pass: point every node at the root, rewriting its
        // displacement to the full offset.
        let mut cur = total;
        let mut x = s;
        loop {
            let next = self.parent[x] as usize;
            if next == root {
                break;
            }
            let old = self.disp_of::<D>(x);
            self.set_disp::<D>(x, cur);
            self.parent[x] = root as u32;
            sub(&mut cur, &old);
            x = next;
        }
        (root, total)
    }

    /// Records the opening of a bond from `u` to `v` whose unwrapped step is
    /// `step` (`pos(v) − pos(u)`).
    pub fn unite(&mut self, u: usize, v: usize, step: &Coords) -> UnionOutcome {
        assert_eq!(step.dim(), self.dim, "step dimension");
        with_dim!(self.dim, D => {
            let mut fixed = [0; D];
            fixed.copy_from_slice(step.as_slice());
            self.unite_fixed::<D>(u, v, fixed)
        })
    }

    /// Opens the bond from `u` to its `+1` neighbour `v` along `axis`.
    pub fn unite_along(&mut self, u: usize, v: usize, axis: usize) -> UnionOutcome {
        with_dim!(self.dim, D => {
            let mut step = [0; D];
            step[axis] = 1;
            self.unite_fixed::<D>(u, v, step)
        })
    }

    #[inline]
    pub(crate) fn unite_fixed<const D: usize>(
        &mut self,
        u: usize,
        v: usize,
        step: [i64; D],
    ) -> UnionOutcome {
        assert!(u != v || step.iter().all(|&x| x == 0), "self-loop bond");
        let (ru, ou) = self.find_fixed::<D>(u);
        let (rv, ov) = self.find_fixed::<D>(v);

        if ru == rv {
            let mut mismatch = ou;
            sub(&mut mismatch, &ov);
            sub(&mut mismatch, &step);
            let mut axes = AxisSet::default();
            for (a, &m) in mismatch.iter().enumerate() {
                if m != 0 {
                    debug_assert_eq!(m % self.side, 0, "mismatch not a multiple of L");
                    axes.insert(a);
                }
            }
            if axes.is_empty() {
                return UnionOutcome::Redundant;
            }
            self.wrapped = self.wrapped.union(axes);
            return UnionOutcome::Wrapped {
                axes,
                mismatch: Coords::from_slice(&mismatch),
            };
        }

        // pos(ru) = u + ou, pos(rv) = u + step + ov.
        let (su, sv) = (self.size[ru], self.size[rv]);
        let ru_under_rv = su < sv || (su == sv && rv < ru);
        let (child, root, link) = if ru_under_rv {
            let mut link = step;
            add(&mut link, &ov);
            sub(&mut link, &ou);
            (ru, rv, link)
        } else {
            let mut link = ou;
            sub(&mut link, &ov);
            sub(&mut link, &step);
            (rv, ru, link)
        };
        self.parent[child] = root as u32;
        self.size[root] += self.size[child];
        self.set_disp::<D>(child, link);
        UnionOutcome::Merged
    }

    pub fn cluster_size(&mut self, s: usize) -> usize {
        let (r, _) = self.find(s);
        self.size[r] as usize
    }

    pub fn wrapped_any(&self) -> bool {
        !self.wrapped.is_empty()
    }

    pub fn wrapped_axes(&self) -> AxisSet {
        self.wrapped
    }
}
