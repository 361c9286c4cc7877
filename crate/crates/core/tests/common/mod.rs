//! Oracles shared by the integration tests. They use only the lattice
//! geometry from the library, never its union-find or process code.
#![allow(dead_code)]

use std::collections::VecDeque;

use cdperc_core::{AxisSet, Coords, LatticeSpec};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Axes along which some open cycle winds: a BFS assigns each site of a
/// cluster one lifted position; reaching a visited site at a different
/// lifted position exposes a winding cycle.
pub fn lifted_cover_wrap(spec: &LatticeSpec, bonds: &[usize]) -> AxisSet {
    let n = spec.site_count();
    let d = spec.dim();
    let mut adj: Vec<Vec<(usize, Coords)>> = vec![Vec::new(); n];
    for &b in bonds {
        let (u, v, a) = spec.endpoints(b).unwrap();
        let step = Coords::unit(d, a);
        adj[u].push((v, step));
        adj[v].push((u, Coords::zero(d) - step));
    }
    let mut lift: Vec<Option<Coords>> = vec![None; n];
    let mut axes = AxisSet::default();
    for start in 0..n {
        if lift[start].is_some() {
            continue;
        }
        lift[start] = Some(spec.coords(start));
        let mut queue = VecDeque::from([start]);
        while let Some(x) = queue.pop_front() {
            let px = lift[x].unwrap();
            for &(y, step) in &adj[x] {
                let py = px + step;
                match lift[y] {
                    None => {
                        lift[y] = Some(py);
                        queue.push_back(y);
                    }
                    Some(seen) => {
                        let diff = seen - py;
                        for (a, &c) in diff.as_slice().iter().enumerate() {
                            if c != 0 {
                                assert_eq!(c % spec.side() as i64, 0);
                                axes.insert(a);
                            }
                        }
                    }
                }
            }
        }
    }
    axes
}

/// Open bonds at time `t` of the constrained process, driven by explicit
/// uniform bond times.
pub fn open_bonds_at(spec: &LatticeSpec, t: f64, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let n = spec.bond_count();
    let mut times: Vec<(f64, usize)> = (0..n).map(|b| (rng.random::<f64>(), b)).collect();
    times.sort_by(|a, b| a.0.total_cmp(&b.0));
    let k = spec.capacity() as usize;
    let mut degree = vec![0usize; spec.site_count()];
    let mut open = Vec::new();
    for &(u_e, b) in &times {
        if u_e > t {
            break;
        }
        let (u, v, _) = spec.endpoints(b).unwrap();
        if degree[u] < k && degree[v] < k {
            degree[u] += 1;
            degree[v] += 1;
            open.push(b);
        }
    }
    open
}

/// Fraction of `runs` direct realisations that wrap by time `t`.
pub fn direct_wrap_fraction(spec: &LatticeSpec, t: f64, runs: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let hits = (0..runs)
        .filter(|_| !lifted_cover_wrap(spec, &open_bonds_at(spec, t, &mut rng)).is_empty())
        .count();
    hits as f64 / runs as f64
}

/// A random subset of the bonds, in random order.
pub fn random_bonds(spec: &LatticeSpec, p: f64, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let mut bonds: Vec<usize> = (0..spec.bond_count())
        .filter(|_| rng.random_bool(p))
        .collect();
    bonds.shuffle(rng);
    bonds
}
