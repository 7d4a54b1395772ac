//! Distances between empirical measures.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};
use crate::linalg::c64;

/// Ground cost of the bounded-Lipschitz distance.
pub fn bl_cost(x: c64, y: c64) -> f64 {
    (x - y).norm().min(2.0)
}

#[derive(Clone, Copy)]
struct Entry {
    key: f64,
    point: usize,
}

impl PartialEq for Entry {
    fn eq(&self, o: &Self) -> bool {
        self.cmp(o) == Ordering::Equal
    }
}
impl Eq for Entry {}
impl PartialOrd for Entry {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}
impl Ord for Entry {
    // Min-heap on key.
    fn cmp(&self, o: &Self) -> Ordering {
        o.key.total_cmp(&self.key).then(o.point.cmp(&self.point))
    }
}

/// Bounded-Lipschitz distance between the uniform measure on `points` and
/// the atomic measure with weights `mult_j / sum(mult)` at `atoms[j]`:
///
/// `d(mu, nu) = sup { int f d(mu - nu) : |f|_inf <= 1, Lip(f) <= 1 }`,
/// computed as the optimal transport cost for `min(|x - y|, 2)`.
///
/// The number of points must be a multiple of the total multiplicity, so
/// that the problem is an assignment with integer capacities. It is solved
/// exactly by successive shortest paths; only the atoms are graph nodes,
/// so each augmentation is a Bellman-Ford pass over `k` nodes with
/// per-pair heaps of reassignment costs.
pub fn bl_distance_to_atoms(points: &[c64], atoms: &[(c64, usize)]) -> Result<f64> {
    let total: usize = atoms.iter().map(|a| a.1).sum();
    if total == 0 || points.is_empty() || !points.len().is_multiple_of(total) {
        return Err(Error::InvalidParameter(format!(
            "{} points cannot be split over total multiplicity {total}",
            points.len()
        )));
    }
    if points
        .iter()
        .any(|p| !p.re.is_finite() || !p.im.is_finite())
    {
        return Err(Error::NonFinite);
    }
    let k = atoms.len();
    let per = points.len() / total;
    let cap: Vec<usize> = atoms.iter().map(|a| a.1 * per).collect();
    let cost = |i: usize, j: usize| bl_cost(points[i], atoms[j].0);
    let mut load = vec![0usize; k];
    let mut assign = vec![usize::MAX; points.len()];
    let mut heaps: Vec<BinaryHeap<Entry>> = (0..k * k).map(|_| BinaryHeap::new()).collect();
    let push = |heaps: &mut Vec<BinaryHeap<Entry>>, i: usize, j: usize| {
        for l in 0..k {
            if l != j {
                heaps[j * k + l].push(Entry {
                    key: cost(i, l) - cost(i, j),
                    point: i,
                });
            }
        }
    };
    let mut dist = vec![0.0; k];
    let mut pred: Vec<Option<(usize, usize)>> = vec![None; k];
    for i in 0..points.len() {
        for j in 0..k {
            dist[j] = cost(i, j);
            pred[j] = None;
        }
        // Cheapest reassignment j -> l among points currently at j.
        let mut edge = vec![None; k * k];
        for j in 0..k {
            for l in 0..k {
                if j == l {
                    continue;
                }
                let h = &mut heaps[j * k + l];
                while let Some(e) = h.peek() {
                    if assign[e.point] == j {
                        edge[j * k + l] = Some(*e);
                        break;
                    }
                    h.pop();
                }
            }
        }
        for _ in 0..k {
            let mut changed = false;
            for j in 0..k {
                for l in 0..k {
                    if let Some(e) = edge[j * k + l] {
                        let d = dist[j] + e.key;
                        if d < dist[l] - 1e-15 {
                            dist[l] = d;
                            pred[l] = Some((j, e.point));
                            changed = true;
                        }
                    }
                }
            }
            if !changed {
                break;
            }
        }
        let target = (0..k)
            .filter(|&l| load[l] < cap[l])
            .min_by(|&a, &b| dist[a].total_cmp(&dist[b]))
            .expect("capacity is never exhausted before the last point");
        load[target] += 1;
        let mut cur = target;
        let mut moved = vec![i];
        for _ in 0..=k {
            match pred[cur] {
                None => {
                    assign[i] = cur;
                    break;
                }
                Some((j, p)) => {
                    assign[p] = cur;
                    moved.push(p);
                    cur = j;
                }
            }
        }
        for p in moved {
            push(&mut heaps, p, assign[p]);
        }
    }
    let sum: f64 = (0..points.len()).map(|i| cost(i, assign[i])).sum();
    Ok(sum / points.len() as f64)
}

/// Two-sample Kolmogorov-Smirnov statistic `sup_x |F_a(x) - F_b(x)|`.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::InvalidParameter("empty sample".into()));
    }
    if a.iter().chain(b).any(|x| x.is_nan()) {
        return Err(Error::NonFinite);
    }
    let mut xs = a.to_vec();
    let mut ys = b.to_vec();
    xs.sort_by(f64::total_cmp);
    ys.sort_by(f64::total_cmp);
    let (na, nb) = (xs.len() as f64, ys.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < xs.len() && j < ys.len() {
        let v = if xs[i] <= ys[j] { xs[i] } else { ys[j] };
        while i < xs.len() && xs[i] <= v {
            i += 1;
        }
        while j < ys.len() && ys[j] <= v {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    Ok(d)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn brute_force(points: &[c64], atoms: &[(c64, usize)]) -> f64 {
        let total: usize = atoms.iter().map(|a| a.1).sum();
        let per = points.len() / total;
        let k = atoms.len();
        let mut best = f64::INFINITY;
        let mut choice = vec![0usize; points.len()];
        loop {
            let mut load = vec![0; k];
            for &c in &choice {
                load[c] += 1;
            }
            if (0..k).all(|j| load[j] == atoms[j].1 * per) {
                let c: f64 = choice
                    .iter()
                    .enumerate()
                    .map(|(i, &j)| bl_cost(points[i], atoms[j].0))
                    .sum();
                best = best.min(c);
            }
            let mut pos = 0;
            loop {
                if pos == choice.len() {
                    return best / points.len() as f64;
                }
                choice[pos] += 1;
                if choice[pos] < k {
                    break;
                }
                choice[pos] = 0;
                pos += 1;
            }
        }
    }

    #[test]
    fn matches_exhaustive_search() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for case in 0..40 {
            let k = 1 + case % 3;
            let atoms: Vec<(c64, usize)> = (0..k)
                .map(|_| {
                    let z = c64::new(rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0));
                    (z, rng.random_range(1..3))
                })
                .collect();
            let total: usize = atoms.iter().map(|a| a.1).sum();
            let per = (8 / total).max(1);
            let points: Vec<c64> = (0..total * per)
                .map(|_| c64::new(rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0)))
                .collect();
            let fast = bl_distance_to_atoms(&points, &atoms).unwrap();
            let slow = brute_force(&points, &atoms);
            assert!((fast - slow).abs() < 1e-12, "case {case}: {fast} vs {slow}");
        }
    }

    #[test]
    fn single_atom_is_mean_cost() {
        let pts = [c64::new(0.5, 0.0), c64::new(0.0, 3.0), c64::new(-1.0, 1.0)];
        let d = bl_distance_to_atoms(&pts, &[(c64::new(0.0, 0.0), 1)]).unwrap();
        let expect = (0.5 + 2.0 + 2f64.sqrt()) / 3.0;
        assert!((d - expect).abs() < 1e-15);
    }

    #[test]
    fn identical_measures_have_zero_distance() {
        let atoms = [(c64::new(1.0, 0.0), 2), (c64::new(-1.0, 0.5), 1)];
        let pts: Vec<c64> = atoms
            .iter()
            .flat_map(|a| std::iter::repeat_n(a.0, a.1 * 3))
            .collect();
        assert_eq!(bl_distance_to_atoms(&pts, &atoms).unwrap(), 0.0);
    }

    #[test]
    fn rejects_incompatible_sizes() {
        let pts = [c64::new(0.0, 0.0); 3];
        assert!(bl_distance_to_atoms(&pts, &[(c64::new(0.0, 0.0), 2)]).is_err());
    }

    fn ks_oracle(a: &[f64], b: &[f64]) -> f64 {
        let cdf = |s: &[f64], x: f64| s.iter().filter(|&&v| v <= x).count() as f64 / s.len() as f64;
        a.iter()
            .chain(b)
            .map(|&x| (cdf(a, x) - cdf(b, x)).abs())
            .fold(0.0, f64::max)
    }

    #[test]
    fn ks_matches_direct_evaluation() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..50 {
            let na = rng.random_range(1..30);
            let nb = rng.random_range(1..30);
            // Coarse values force ties.
            let a: Vec<f64> = (0..na).map(|_| rng.random_range(0..10) as f64).collect();
            let b: Vec<f64> = (0..nb).map(|_| rng.random_range(0..12) as f64).collect();
            assert!((ks_two_sample(&a, &b).unwrap() - ks_oracle(&a, &b)).abs() < 1e-15);
        }
        assert_eq!(ks_two_sample(&[1.0, 2.0], &[2.0, 1.0]).unwrap(), 0.0);
        assert_eq!(ks_two_sample(&[0.0], &[1.0]).unwrap(), 1.0);
    }
}
