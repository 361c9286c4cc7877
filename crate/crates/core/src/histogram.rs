use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::lattice::LatticeSpec;
use crate::process::RunRecord;

/// Counts of first-wrap attempt indices over `M` runs on one `(d, L, k)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct QHistogram {
    lattice: LatticeSpec,
    counts: BTreeMap<usize, u64>,
    no_wrap: u64,
}

impl QHistogram {
    pub fn new(lattice: LatticeSpec) -> Self {
        Self {
            lattice,
            counts: BTreeMap::new(),
            no_wrap: 0,
        }
    }

    /// Builds a histogram from raw counts, checking every index lies in
    /// `1..=N`.
    pub fn from_counts(
        lattice: LatticeSpec,
        counts: impl IntoIterator<Item = (usize, u64)>,
        no_wrap: u64,
    ) -> Result<Self> {
        let mut h = Self::new(lattice);
        h.no_wrap = no_wrap;
        for (i, c) in counts {
            h.add_index(i, c)?;
        }
        Ok(h)
    }

    fn add_index(&mut self, index: usize, count: u64) -> Result<()> {
        if index == 0 || index > self.bond_count() {
            return Err(Error::Mismatch(format!(
                "wrap index {index} outside 1..={}",
                self.bond_count()
            )));
        }
        if count > 0 {
            *self.counts.entry(index).or_default() += count;
        }
        Ok(())
    }

    pub fn push(&mut self, record: &RunRecord) -> Result<()> {
        if record.lattice != self.lattice {
            return Err(Error::Mismatch(format!(
                "record for {:?} pushed into histogram for {:?}",
                record.lattice, self.lattice
            )));
        }
        match record.wrap_index {
            Some(i) => self.add_index(i, 1),
            None => {
                self.no_wrap += 1;
                Ok(())
            }
        }
    }

    /// Element-wise sum. Fails if the two histograms describe different
    /// lattices or capacities.
    pub fn merge(&mut self, other: &QHistogram) -> Result<()> {
        if other.lattice != self.lattice {
            return Err(Error::Mismatch(format!(
                "cannot merge {:?} into {:?}",
                other.lattice, self.lattice
            )));
        }
        for (&i, &c) in &other.counts {
            *self.counts.entry(i).or_default() += c;
        }
        self.no_wrap += other.no_wrap;
        Ok(())
    }

    pub fn lattice(&self) -> LatticeSpec {
        self.lattice
    }

    pub fn bond_count(&self) -> usize {
        self.lattice.bond_count()
    }

    pub fn runs(&self) -> u64 {
        self.counts.values().sum::<u64>() + self.no_wrap
    }

    pub fn no_wrap(&self) -> u64 {
        self.no_wrap
    }

    pub fn count_at(&self, index: usize) -> u64 {
        self.counts.get(&index).copied().unwrap_or(0)
    }

    /// Nonzero `(index, count)` pairs in increasing index order.
    pub fn counts(&self) -> impl Iterator<Item = (usize, u64)> + '_ {
        self.counts.iter().map(|(&i, &c)| (i, c))
    }

    /// Microcanonical wrapping probabilities `Q̄_0 … Q̄_N`: the fraction of
    /// runs that had wrapped after `i` attempted bonds.
    pub fn q_bar(&self) -> Result<Vec<f64>> {
        let m = self.runs();
        if m == 0 {
            return Err(Error::Empty("histogram has no runs"));
        }
        let n = self.bond_count();
        let mut q = vec![0.0; n + 1];
        let mut cum = 0u64;
        let mut iter = self.counts.iter().peekable();
        for (i, slot) in q.iter_mut().enumerate() {
            while let Some((_, &c)) = iter.next_if(|(&j, _)| j == i) {
                cum += c;
            }
            *slot = cum as f64 / m as f64;
        }
        Ok(q)
    }
}

/// Accumulates records of one `(d, L, k)` into a histogram.
pub fn accumulate<'a>(
    lattice: LatticeSpec,
    records: impl IntoIterator<Item = &'a RunRecord>,
) -> Result<QHistogram> {
    let mut h = QHistogram::new(lattice);
    for r in records {
        h.push(r)?;
    }
    Ok(h)
}
