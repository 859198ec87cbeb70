//! Exact discrete optimal transport and total variation.
//!
//! Masses are scaled to integers with common denominator [`MASS_SCALE`] and
//! the transportation problem is solved as a min-cost flow by successive
//! shortest paths (dense Dijkstra with node potentials). The final potentials
//! give a Kantorovich dual pair, so every solution carries its own gap.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::dpp::PointConfiguration;
use crate::error::{Error, Result};

pub const MASS_SCALE: f64 = 1e12;
pub const SUPPORT_CAP: usize = 2_000;
const MASS_TOL: f64 = 1e-9;

/// A finitely supported probability law. Keys outside the map have mass 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteDistribution<K: Ord> {
    masses: BTreeMap<K, f64>,
}

impl<K: Ord + Clone> DiscreteDistribution<K> {
    /// Repeated keys are summed; zero masses are dropped.
    pub fn new(entries: impl IntoIterator<Item = (K, f64)>) -> Result<Self> {
        let mut masses = BTreeMap::new();
        for (k, m) in entries {
            if !(m.is_finite() && m >= 0.0) {
                return Err(Error::InvalidArgument(format!("mass {m} is negative or not finite")));
            }
            if m > 0.0 {
                *masses.entry(k).or_insert(0.0) += m;
            }
        }
        let total: f64 = masses.values().sum();
        if (total - 1.0).abs() > MASS_TOL {
            return Err(Error::InvalidArgument(format!("masses sum to {total}, not 1")));
        }
        Ok(Self { masses })
    }

    /// Normalises nonnegative counts or weights.
    pub fn from_weights(entries: impl IntoIterator<Item = (K, f64)>) -> Result<Self> {
        let entries: Vec<(K, f64)> = entries.into_iter().collect();
        let total: f64 = entries.iter().map(|(_, w)| *w).sum();
        if !(total > 0.0) {
            return Err(Error::InvalidArgument("weights have no positive mass".into()));
        }
        Self::new(entries.into_iter().map(|(k, w)| (k, w / total)))
    }

    pub fn point_mass(k: K) -> Self {
        Self {
            masses: BTreeMap::from([(k, 1.0)]),
        }
    }

    pub fn prob(&self, k: &K) -> f64 {
        self.masses.get(k).copied().unwrap_or(0.0)
    }

    pub fn support(&self) -> impl Iterator<Item = &K> {
        self.masses.keys()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&K, f64)> {
        self.masses.iter().map(|(k, m)| (k, *m))
    }

    pub fn len(&self) -> usize {
        self.masses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.masses.is_empty()
    }

    pub fn total_mass(&self) -> f64 {
        self.masses.values().sum()
    }

    pub fn merged_support(&self, other: &Self) -> Vec<K> {
        self.masses
            .keys()
            .chain(other.masses.keys())
            .cloned()
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect()
    }

    pub fn map_keys<L: Ord + Clone>(&self, f: impl Fn(&K) -> L) -> Result<DiscreteDistribution<L>> {
        DiscreteDistribution::new(self.masses.iter().map(|(k, m)| (f(k), *m)))
    }
}

/// `(1/2) Σ |p - q|` over the merged support.
pub fn total_variation<K: Ord + Clone>(p: &DiscreteDistribution<K>, q: &DiscreteDistribution<K>) -> f64 {
    0.5 * p
        .merged_support(q)
        .iter()
        .map(|k| (p.prob(k) - q.prob(k)).abs())
        .sum::<f64>()
}

/// `sup_{f: E -> [0,1]} ∫ f d(p - q)`, attained at the indicator of `{p > q}`.
pub fn total_variation_sup<K: Ord + Clone>(p: &DiscreteDistribution<K>, q: &DiscreteDistribution<K>) -> f64 {
    p.merged_support(q)
        .iter()
        .map(|k| (p.prob(k) - q.prob(k)).max(0.0))
        .sum()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl CostMatrix {
    /// Row-major entries.
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                expected: rows * cols,
                found: data.len(),
            });
        }
        if let Some(bad) = data.iter().find(|c| !(c.is_finite() && **c >= 0.0)) {
            return Err(Error::InvalidArgument(format!("cost entry {bad} is negative or not finite")));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Result<Self> {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self::new(rows, cols, data)
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlanEntry {
    pub row: usize,
    pub col: usize,
    pub mass: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OtSolution {
    pub cost: f64,
    /// Nonzero entries, sorted by `(row, col)`.
    pub plan: Vec<PlanEntry>,
    /// Kantorovich potentials with `alpha_i + beta_j <= c_ij`.
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
    pub dual_value: f64,
    pub duality_gap: f64,
    /// Largest `|scaled mass - input mass|` from integer rounding.
    pub rounding_residual: f64,
}

impl OtSolution {
    pub fn row_marginal(&self, rows: usize) -> Vec<f64> {
        let mut m = vec![0.0; rows];
        for e in &self.plan {
            m[e.row] += e.mass;
        }
        m
    }

    pub fn col_marginal(&self, cols: usize) -> Vec<f64> {
        let mut m = vec![0.0; cols];
        for e in &self.plan {
            m[e.col] += e.mass;
        }
        m
    }

    pub fn plan_json(&self) -> Result<String> {
        Ok(serde_json::to_string(&self.plan)?)
    }
}

/// Integer masses summing to exactly `MASS_SCALE`; the rounding defect is
/// absorbed by the largest entry.
fn scale_masses(p: &[f64]) -> Result<(Vec<i64>, f64)> {
    if let Some(bad) = p.iter().find(|m| !(m.is_finite() && **m >= 0.0)) {
        return Err(Error::InvalidArgument(format!("mass {bad} is negative or not finite")));
    }
    let total: f64 = p.iter().sum();
    if (total - 1.0).abs() > MASS_TOL {
        return Err(Error::Infeasible(format!("masses sum to {total}, not 1")));
    }
    let target = MASS_SCALE as i64;
    let mut a: Vec<i64> = p.iter().map(|m| (m * MASS_SCALE).round() as i64).collect();
    let defect = target - a.iter().sum::<i64>();
    if let Some(big) = (0..a.len()).max_by(|&i, &j| a[i].cmp(&a[j]).then(j.cmp(&i))) {
        a[big] += defect;
    }
    let residual = a
        .iter()
        .zip(p)
        .map(|(ai, pi)| (*ai as f64 / MASS_SCALE - pi).abs())
        .fold(0.0, f64::max);
    Ok((a, residual))
}

/// Exact optimal transport between probability vectors `p` (rows) and `q`
/// (columns) for the cost `c`.
pub fn ot_cost(p: &[f64], q: &[f64], c: &CostMatrix) -> Result<OtSolution> {
    let (m, n) = (p.len(), q.len());
    if m > SUPPORT_CAP || n > SUPPORT_CAP {
        return Err(Error::CapExceeded {
            what: "transport support size",
            required: m.max(n) as u128,
            cap: SUPPORT_CAP as u128,
        });
    }
    if c.rows() != m || c.cols() != n {
        return Err(Error::DimensionMismatch {
            expected: m * n,
            found: c.rows() * c.cols(),
        });
    }
    let (mut supply, res_p) = scale_masses(p)?;
    let (mut demand, res_q) = scale_masses(q)?;
    let mut flow = vec![0i64; m * n];

    // nodes: 0 = source, 1..=m rows, m+1..=m+n columns, m+n+1 = sink
    let nodes = m + n + 2;
    let (src, sink) = (0, m + n + 1);
    let mut pot = vec![0.0f64; nodes];
    let mut remaining: i64 = supply.iter().sum();
    let mut dist = vec![f64::INFINITY; nodes];
    let mut prev = vec![usize::MAX; nodes];
    let mut done = vec![false; nodes];

    while remaining > 0 {
        dist.fill(f64::INFINITY);
        prev.fill(usize::MAX);
        done.fill(false);
        dist[src] = 0.0;
        loop {
            let mut u = usize::MAX;
            for v in 0..nodes {
                if !done[v] && dist[v].is_finite() && (u == usize::MAX || dist[v] < dist[u]) {
                    u = v;
                }
            }
            if u == usize::MAX || u == sink {
                break;
            }
            done[u] = true;
            let du = dist[u];
            let relax = |v: usize, cost: f64, dist: &mut Vec<f64>, prev: &mut Vec<usize>| {
                let nd = du + (cost + pot[u] - pot[v]).max(0.0);
                if nd < dist[v] {
                    dist[v] = nd;
                    prev[v] = u;
                }
            };
            if u == src {
                for i in 0..m {
                    if supply[i] > 0 {
                        relax(1 + i, 0.0, &mut dist, &mut prev);
                    }
                }
            } else if u <= m {
                let i = u - 1;
                for j in 0..n {
                    relax(1 + m + j, c.at(i, j), &mut dist, &mut prev);
                }
            } else {
                let j = u - 1 - m;
                for i in 0..m {
                    if flow[i * n + j] > 0 {
                        relax(1 + i, -c.at(i, j), &mut dist, &mut prev);
                    }
                }
                if demand[j] > 0 {
                    relax(sink, 0.0, &mut dist, &mut prev);
                }
            }
        }
        if !dist[sink].is_finite() {
            return Err(Error::Infeasible("no augmenting path".into()));
        }
        let reach = dist[sink];
        for v in 0..nodes {
            pot[v] += dist[v].min(reach);
        }
        // bottleneck along the path
        let mut path = vec![sink];
        while let Some(&v) = path.last() {
            if v == src {
                break;
            }
            path.push(prev[v]);
        }
        path.reverse();
        let first_row = path[1] - 1;
        let last_col = path[path.len() - 2] - 1 - m;
        let mut delta = supply[first_row].min(demand[last_col]);
        for w in path[1..path.len() - 1].windows(2) {
            if w[0] > m {
                // column -> row: undo flow
                let (j, i) = (w[0] - 1 - m, w[1] - 1);
                delta = delta.min(flow[i * n + j]);
            }
        }
        for w in path[1..path.len() - 1].windows(2) {
            if w[0] <= m {
                let (i, j) = (w[0] - 1, w[1] - 1 - m);
                flow[i * n + j] += delta;
            } else {
                let (j, i) = (w[0] - 1 - m, w[1] - 1);
                flow[i * n + j] -= delta;
            }
        }
        supply[first_row] -= delta;
        demand[last_col] -= delta;
        remaining -= delta;
    }

    let mut plan = Vec::new();
    let mut cost = 0.0;
    for i in 0..m {
        for j in 0..n {
            let f = flow[i * n + j];
            if f > 0 {
                let mass = f as f64 / MASS_SCALE;
                cost += c.at(i, j) * mass;
                plan.push(PlanEntry { row: i, col: j, mass });
            }
        }
    }
    // c_ij + pot_row - pot_col >= 0 on every forward edge
    let mut alpha: Vec<f64> = (0..m).map(|i| -pot[1 + i]).collect();
    let beta: Vec<f64> = (0..n).map(|j| pot[1 + m + j]).collect();
    // repair round-off violations of alpha_i + beta_j <= c_ij
    for (i, a) in alpha.iter_mut().enumerate() {
        let slack = (0..n).map(|j| c.at(i, j) - *a - beta[j]).fold(f64::INFINITY, f64::min);
        if slack < 0.0 {
            *a += slack;
        }
    }
    let dual_value: f64 = alpha.iter().zip(p).map(|(a, x)| a * x).sum::<f64>()
        + beta.iter().zip(q).map(|(b, y)| b * y).sum::<f64>();
    Ok(OtSolution {
        cost,
        plan,
        alpha,
        beta,
        dual_value,
        duality_gap: cost - dual_value,
        rounding_residual: res_p.max(res_q),
    })
}

/// [`ot_cost`] between two keyed laws; rows follow `p`'s support order and
/// columns `q`'s.
pub fn ot_cost_between<K: Ord + Clone, L: Ord + Clone>(
    p: &DiscreteDistribution<K>,
    q: &DiscreteDistribution<L>,
    cost: impl Fn(&K, &L) -> f64,
) -> Result<OtSolution> {
    let rows: Vec<&K> = p.support().collect();
    let cols: Vec<&L> = q.support().collect();
    let c = CostMatrix::from_fn(rows.len(), cols.len(), |i, j| cost(rows[i], cols[j]))?;
    let pm: Vec<f64> = p.iter().map(|(_, m)| m).collect();
    let qm: Vec<f64> = q.iter().map(|(_, m)| m).collect();
    ot_cost(&pm, &qm, &c)
}

/// `1_{x != y}`
pub fn trivial_cost<K: PartialEq>(x: &K, y: &K) -> f64 {
    if x == y {
        0.0
    } else {
        1.0
    }
}

/// Number of coordinates where `x` and `y` differ.
pub fn hamming_cost<K: PartialEq>(x: &[K], y: &[K]) -> Result<usize> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: x.len(),
            found: y.len(),
        });
    }
    Ok(x.iter().zip(y).filter(|(a, b)| a != b).count())
}

/// `#(A Δ B)`
pub fn symmetric_difference_cost(a: &PointConfiguration, b: &PointConfiguration) -> usize {
    let (a, b) = (a.points(), b.points());
    let (mut i, mut j, mut common) = (0, 0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                common += 1;
                i += 1;
                j += 1;
            }
        }
    }
    a.len() + b.len() - 2 * common
}

/// Exact `W_#` between two configuration laws.
pub fn wsharp_distance(
    p: &DiscreteDistribution<PointConfiguration>,
    q: &DiscreteDistribution<PointConfiguration>,
) -> Result<OtSolution> {
    ot_cost_between(p, q, |a, b| symmetric_difference_cost(a, b) as f64)
}

/// Exact Hamming `W_1` between two laws on tuples.
pub fn hamming_w1<K: PartialEq + Ord + Clone>(
    p: &DiscreteDistribution<Vec<K>>,
    q: &DiscreteDistribution<Vec<K>>,
) -> Result<OtSolution> {
    ot_cost_between(p, q, |a, b| hamming_cost(a, b).map(|d| d as f64).unwrap_or(f64::MAX))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    use crate::rng::stream;

    fn random_simplex<R: Rng>(k: usize, rng: &mut R) -> Vec<f64> {
        let w: Vec<f64> = (0..k).map(|_| rng.random::<f64>() + 1e-3).collect();
        let s: f64 = w.iter().sum();
        w.into_iter().map(|x| x / s).collect()
    }

    fn dist(p: &[f64]) -> DiscreteDistribution<usize> {
        DiscreteDistribution::new(p.iter().copied().enumerate()).unwrap()
    }

    #[test]
    fn tv_examples() {
        let p = dist(&[0.75, 0.25]);
        let q = dist(&[0.25, 0.75]);
        assert!((total_variation(&p, &q) - 0.5).abs() < 1e-15);
        assert_eq!(total_variation(&p, &p), 0.0);
        let a = DiscreteDistribution::point_mass(0usize);
        let b = DiscreteDistribution::point_mass(1usize);
        assert_eq!(total_variation(&a, &b), 1.0);
    }

    #[test]
    fn negative_or_unnormalised_masses_are_rejected() {
        assert!(DiscreteDistribution::new([(0, -0.1), (1, 1.1)]).is_err());
        assert!(DiscreteDistribution::new([(0, 0.5)]).is_err());
        assert!(ot_cost(&[0.5, 0.6], &[1.0], &CostMatrix::zeros(2, 1)).is_err());
    }

    #[test]
    fn ot_examples() {
        let p = [0.3, 0.7];
        let q = [0.6, 0.4];
        assert_eq!(ot_cost(&p, &q, &CostMatrix::zeros(2, 2)).unwrap().cost, 0.0);
        let c = CostMatrix::new(1, 1, vec![2.5]).unwrap();
        assert!((ot_cost(&[1.0], &[1.0], &c).unwrap().cost - 2.5).abs() < 1e-15);
        let c = CostMatrix::from_fn(3, 3, |i, j| (i as f64 - j as f64).abs()).unwrap();
        let s = ot_cost(&[1.0, 0.0, 0.0], &[0.0, 0.0, 1.0], &c).unwrap();
        assert!((s.cost - 2.0).abs() < 1e-15);
    }

    #[test]
    fn trivial_cost_equals_tv_with_small_gap() {
        let mut rng = stream(11, 0);
        for _ in 0..100 {
            let k = rng.random_range(1..12);
            let p = random_simplex(k, &mut rng);
            let q = random_simplex(k, &mut rng);
            let c = CostMatrix::from_fn(k, k, |i, j| trivial_cost(&i, &j)).unwrap();
            let s = ot_cost(&p, &q, &c).unwrap();
            let tv = total_variation(&dist(&p), &dist(&q));
            assert!((s.cost - tv).abs() < 1e-10);
            assert!((total_variation_sup(&dist(&p), &dist(&q)) - tv).abs() < 1e-12);
            assert!(s.duality_gap.abs() < 1e-9, "gap {}", s.duality_gap);
            for (x, y) in s.row_marginal(k).iter().zip(&p) {
                assert!((x - y).abs() < 1e-9);
            }
            for (x, y) in s.col_marginal(k).iter().zip(&q) {
                assert!((x - y).abs() < 1e-9);
            }
        }
    }

    /// Brute force over the vertices of small transportation polytopes is
    /// awkward, so compare against the dual bound and the 2x2 closed form.
    #[test]
    fn two_by_two_closed_form() {
        let mut rng = stream(12, 0);
        for _ in 0..50 {
            let p = random_simplex(2, &mut rng);
            let q = random_simplex(2, &mut rng);
            let c: Vec<f64> = (0..4).map(|_| rng.random::<f64>()).collect();
            let cm = CostMatrix::new(2, 2, c.clone()).unwrap();
            // the plan is determined by t = pi_00 in [max(0, p0 - q1), min(p0, q0)]
            let lo = (p[0] - q[1]).max(0.0);
            let hi = p[0].min(q[0]);
            let value = |t: f64| c[0] * t + c[1] * (p[0] - t) + c[2] * (q[0] - t) + c[3] * (p[1] - q[0] + t);
            let want = value(lo).min(value(hi));
            let got = ot_cost(&p, &q, &cm).unwrap();
            assert!((got.cost - want).abs() < 1e-10);
            assert!(got.duality_gap.abs() < 1e-9);
        }
    }

    #[test]
    fn potentials_are_dual_feasible() {
        let mut rng = stream(13, 0);
        for _ in 0..20 {
            let (m, n) = (rng.random_range(1..15), rng.random_range(1..15));
            let p = random_simplex(m, &mut rng);
            let q = random_simplex(n, &mut rng);
            let c = CostMatrix::from_fn(m, n, |_, _| rng.random::<f64>() * 3.0);
            let c = c.unwrap();
            let s = ot_cost(&p, &q, &c).unwrap();
            for i in 0..m {
                for j in 0..n {
                    assert!(s.alpha[i] + s.beta[j] <= c.at(i, j) + 1e-12);
                }
            }
            assert!(s.duality_gap.abs() < 1e-9);
        }
    }

    #[test]
    fn deterministic_plan() {
        let p = [0.25; 4];
        let c = CostMatrix::from_fn(4, 4, |_, _| 1.0).unwrap();
        let a = ot_cost(&p, &p, &c).unwrap();
        let b = ot_cost(&p, &p, &c).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.plan_json().unwrap(), b.plan_json().unwrap());
    }

    #[test]
    fn hamming_examples() {
        assert_eq!(hamming_cost(&[1, 2, 3], &[1, 2, 3]).unwrap(), 0);
        assert_eq!(hamming_cost(&[1, 2, 3], &[4, 5, 6]).unwrap(), 3);
        assert_eq!(hamming_cost(&[1, 2, 3], &[1, 5, 3]).unwrap(), 1);
        assert!(hamming_cost(&[1], &[1, 2]).is_err());
    }

    #[test]
    fn symmetric_difference_examples() {
        let a = PointConfiguration::new(vec![0, 2, 4]).unwrap();
        let b = PointConfiguration::new(vec![1, 3, 5]).unwrap();
        assert_eq!(symmetric_difference_cost(&a, &a), 0);
        assert_eq!(symmetric_difference_cost(&a, &b), 6);
        let c = PointConfiguration::new(vec![0, 3]).unwrap();
        assert_eq!(symmetric_difference_cost(&a, &c), 3);
    }

    #[test]
    fn support_cap() {
        let p = vec![1.0 / 2001.0; 2001];
        let c = CostMatrix::zeros(2001, 1);
        assert!(matches!(ot_cost(&p, &[1.0], &c), Err(Error::CapExceeded { .. })));
    }
}
