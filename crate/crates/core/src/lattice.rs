//! Site and bond indexing on the periodic `L × … × L` hypercubic lattice.
//!
//! Sites are encoded mixed-radix with coordinate 0 varying fastest:
//! `site = c_0 + c_1·L + … + c_{d-1}·L^{d-1}`. Every site owns the `d`
//! bonds that join it to its `+1` neighbour along each axis, so
//! `bond = site·d + axis`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest supported dimension. Coordinates and displacements live in
/// fixed-size arrays of this length.
pub const MAX_DIM: usize = 8;

/// Dimension, side length and vertex capacity of a simulation box.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LatticeSpec {
    d: u32,
    #[serde(rename = "L")]
    side: u32,
    k: u32,
}

impl LatticeSpec {
    /// Validates `2 ≤ d ≤ MAX_DIM`, `L ≥ 3` and `1 ≤ k ≤ 2d`.
    ///
    /// `L = 2` is rejected: the two bonds between a site and its single
    /// neighbour along an axis would form a parallel pair.
    pub fn new(d: u32, side: u32, k: u32) -> Result<Self> {
        if d < 2 || d as usize > MAX_DIM {
            return Err(Error::InvalidLattice(format!(
                "dimension d={d} outside [2, {MAX_DIM}]"
            )));
        }
        if side < 3 {
            return Err(Error::InvalidLattice(format!(
                "side L={side} must be at least 3"
            )));
        }
        if k < 1 || k > 2 * d {
            return Err(Error::InvalidLattice(format!(
                "capacity k={k} outside [1, {}]",
                2 * d
            )));
        }
        let sites = (side as u64).checked_pow(d);
        match sites.and_then(|s| s.checked_mul(d as u64)) {
            Some(n) if n <= u32::MAX as u64 => {}
            _ => {
                return Err(Error::InvalidLattice(format!(
                    "d={d}, L={side} has more than 2^32 bonds"
                )))
            }
        }
        Ok(Self { d, side, k })
    }

    pub fn dim(&self) -> usize {
        self.d as usize
    }

    pub fn side(&self) -> usize {
        self.side as usize
    }

    pub fn capacity(&self) -> u32 {
        self.k
    }

    /// Same box with a different capacity.
    pub fn with_capacity(&self, k: u32) -> Result<Self> {
        Self::new(self.d, self.side, k)
    }

    /// `L^d`.
    pub fn site_count(&self) -> usize {
        self.side().pow(self.d)
    }

    /// `N = d·L^d`.
    pub fn bond_count(&self) -> usize {
        self.dim() * self.site_count()
    }

    /// `L^axis`, the index step of a unit move along `axis`.
    #[inline]
    pub fn stride(&self, axis: usize) -> usize {
        self.side().pow(axis as u32)
    }

    pub fn coords(&self, site: usize) -> Coords {
        let mut c = Coords::zero(self.dim());
        let mut rest = site;
        for j in 0..self.dim() {
            c.0[j] = (rest % self.side()) as i64;
            rest /= self.side();
        }
        c
    }

    /// Inverse of [`coords`](Self::coords). Components are reduced mod `L`.
    pub fn site_of(&self, coords: &Coords) -> usize {
        let l = self.side() as i64;
        let mut site = 0usize;
        for j in (0..self.dim()).rev() {
            site = site * self.side() + coords.0[j].rem_euclid(l) as usize;
        }
        site
    }

    /// Neighbour of `site` one step forward along `axis`, wrapping at `L`.
    #[inline]
    pub fn forward(&self, site: usize, axis: usize) -> usize {
        let stride = self.stride(axis);
        let c = (site / stride) % self.side();
        if c + 1 == self.side() {
            site - c * stride
        } else {
            site + stride
        }
    }

    /// `(base, neighbour, axis)` of bond `b`.
    pub fn endpoints(&self, bond: usize) -> Result<(usize, usize, usize)> {
        if bond >= self.bond_count() {
            return Err(Error::BondOutOfRange {
                bond,
                count: self.bond_count(),
            });
        }
        Ok(self.endpoints_unchecked(bond))
    }

    #[inline]
    pub(crate) fn endpoints_unchecked(&self, bond: usize) -> (usize, usize, usize) {
        let d = self.dim();
        let (site, axis) = (bond / d, bond % d);
        (site, self.forward(site, axis), axis)
    }

    pub fn bond_of(&self, site: usize, axis: usize) -> usize {
        site * self.dim() + axis
    }

    /// Unwrapped geometric step of bond `b`: the unit vector along its axis.
    pub fn bond_offset(&self, bond: usize) -> Coords {
        Coords::unit(self.dim(), bond % self.dim())
    }
}

/// Small fixed-capacity integer vector used both for site coordinates and
/// for unwrapped displacements.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct Coords([i64; MAX_DIM], u8);

impl Coords {
    pub fn zero(dim: usize) -> Self {
        assert!(dim <= MAX_DIM);
        Coords([0; MAX_DIM], dim as u8)
    }

    pub fn unit(dim: usize, axis: usize) -> Self {
        let mut c = Self::zero(dim);
        c.0[axis] = 1;
        c
    }

    pub fn from_slice(v: &[i64]) -> Self {
        let mut c = Self::zero(v.len());
        c.0[..v.len()].copy_from_slice(v);
        c
    }

    pub fn dim(&self) -> usize {
        self.1 as usize
    }

    pub fn as_slice(&self) -> &[i64] {
        &self.0[..self.dim()]
    }

    pub fn as_mut_slice(&mut self) -> &mut [i64] {
        let d = self.dim();
        &mut self.0[..d]
    }

    pub fn is_zero(&self) -> bool {
        self.as_slice().iter().all(|&x| x == 0)
    }
}

impl std::fmt::Debug for Coords {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_tuple("").field(&self.as_slice()).finish()
    }
}

impl std::ops::Index<usize> for Coords {
    type Output = i64;
    fn index(&self, i: usize) -> &i64 {
        &self.as_slice()[i]
    }
}

impl std::ops::Add for Coords {
    type Output = Coords;
    fn add(mut self, rhs: Coords) -> Coords {
        for (a, b) in self.as_mut_slice().iter_mut().zip(rhs.as_slice()) {
            *a += b;
        }
        self
    }
}

impl std::ops::Sub for Coords {
    type Output = Coords;
    fn sub(mut self, rhs: Coords) -> Coords {
        for (a, b) in self.as_mut_slice().iter_mut().zip(rhs.as_slice()) {
            *a -= b;
        }
        self
    }
}
