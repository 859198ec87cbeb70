//! Right-hand sides of the distance bounds between determinantal processes,
//! and their comparison with exact or Monte-Carlo distances.
//!
//! For projection kernels of equal rank with overlap matrix `M`:
//!
//! ```text
//! TV <= sqrt(1 - |det M|²),      W_# <= n sqrt(1 - s²),  s = ‖M‖_* / n.
//! ```
//!
//! For general kernels `K = Σ λ_i |ψ_i⟩⟨ψ_i|`, `K' = Σ λ'_i |ψ'_i⟩⟨ψ'_i|`,
//! the bounds sum the projection bounds of the sub-families `I` with weights
//! `w(λ, λ', I) = Π_{i∈I} min(λ_i, λ'_i) Π_{i∉I} (1 - max(λ_i, λ'_i))`.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use num_rational::Ratio;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dpp::{
    mixed_exact_distribution, sample_mixed_dpp, walsh_exact_kernel, ConfigurationDistribution, MixedKernelSpec,
    PointConfiguration,
};
use crate::error::{Error, Result};
use crate::ground_space::{walsh_family, OrthonormalFamily};
use crate::rng::{split_seed, stream};
use crate::scalar::Real;
use crate::slater::{overlap_matrix, trace_distance_slater, OverlapMatrix};
use crate::transport::{ot_cost, ot_cost_between, total_variation, wsharp_distance, CostMatrix, DiscreteDistribution};
use crate::w1_bounds::{stabilizer_max_overlap, w1_upper_slater};

/// Largest index set summed over exactly.
pub const SUBSET_ENUMERATION_CAP: usize = 20;

/// `sqrt(1 - |det M|²)`
pub fn tv_bound_projection<T: Real>(m: &OverlapMatrix<T>) -> T {
    trace_distance_slater(m)
}

/// `n sqrt(1 - s²)`
pub fn wsharp_bound_projection<T: Real>(m: &OverlapMatrix<T>) -> T {
    w1_upper_slater(m)
}

fn check_lambdas(l: &[f64]) -> Result<()> {
    match l.iter().find(|x| !(**x >= 0.0 && **x <= 1.0)) {
        Some(bad) => Err(Error::InvalidArgument(format!("eigenvalue {bad} outside [0, 1]"))),
        None => Ok(()),
    }
}

/// `w(λ, λ', I)`; `subset` lists indices into `lam`.
pub fn weight_w(lam: &[f64], lam_prime: &[f64], subset: &[usize]) -> Result<f64> {
    if lam.len() != lam_prime.len() {
        return Err(Error::DimensionMismatch {
            expected: lam.len(),
            found: lam_prime.len(),
        });
    }
    check_lambdas(lam)?;
    check_lambdas(lam_prime)?;
    if let Some(&i) = subset.iter().find(|&&i| i >= lam.len()) {
        return Err(Error::InvalidArgument(format!("index {i} out of range")));
    }
    Ok((0..lam.len())
        .map(|i| {
            if subset.contains(&i) {
                lam[i].min(lam_prime[i])
            } else {
                1.0 - lam[i].max(lam_prime[i])
            }
        })
        .product())
}

/// A general right-hand side with its parts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneralBound {
    pub value: f64,
    /// The term driven by `Σ |λ_i - λ'_i|`.
    pub eigenvalue_term: f64,
    /// `Σ_I (per-subset bound) w(λ, λ', I)` over the enumerated subsets.
    pub subset_term: f64,
    /// Weight not covered by the enumerated subsets, already added to
    /// `value` times the largest possible per-subset bound.
    pub tail_mass: f64,
    pub enumerated_subsets: usize,
    pub truncated: bool,
    /// For `W_#`: the eigenvalue term plus twice the subset and tail terms.
    /// `♯(A Δ B)` can reach twice the Hamming distance between orderings, so
    /// this is the version that survives the contraction step. Equal to
    /// `value` for TV.
    pub corrected_value: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Which {
    Tv,
    Wsharp,
}

fn lambdas_f64<T: Real>(s: &MixedKernelSpec<T>) -> Vec<f64> {
    s.lambdas().iter().map(|l| (*l).into()).collect()
}

#[derive(PartialEq)]
struct Node {
    weight: f64,
    flips: Vec<usize>,
}

impl Eq for Node {}

impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Node {
    fn cmp(&self, other: &Self) -> Ordering {
        self.weight
            .partial_cmp(&other.weight)
            .unwrap_or(Ordering::Equal)
            .then_with(|| other.flips.cmp(&self.flips))
    }
}

/// Visits index sets with their weights: all of them up to `exact_cap`
/// indices, otherwise the `budget` heaviest ones. Returns the number visited.
fn for_each_subset(
    lam: &[f64],
    lam_p: &[f64],
    exact_cap: usize,
    budget: usize,
    mut visit: impl FnMut(&[usize], f64) -> Result<()>,
) -> Result<(usize, bool)> {
    let k = lam.len();
    let inc: Vec<f64> = (0..k).map(|i| lam[i].min(lam_p[i])).collect();
    let exc: Vec<f64> = (0..k).map(|i| 1.0 - lam[i].max(lam_p[i])).collect();
    if k <= exact_cap {
        let mut count = 0;
        let mut subset = Vec::with_capacity(k);
        for mask in 0u64..(1u64 << k) {
            let w: f64 = (0..k).map(|i| if mask >> i & 1 == 1 { inc[i] } else { exc[i] }).product();
            if w == 0.0 {
                continue;
            }
            subset.clear();
            subset.extend((0..k).filter(|i| mask >> i & 1 == 1));
            visit(&subset, w)?;
            count += 1;
        }
        return Ok((count, false));
    }
    // best-first: start from the heaviest set and flip indices in order of
    // decreasing ratio min/max of their two factors
    let base: Vec<bool> = (0..k).map(|i| inc[i] >= exc[i]).collect();
    let top: f64 = (0..k).map(|i| inc[i].max(exc[i])).product();
    if top == 0.0 {
        return Ok((0, false));
    }
    let mut ratio: Vec<(usize, f64)> = (0..k).map(|i| (i, inc[i].min(exc[i]) / inc[i].max(exc[i]))).collect();
    ratio.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap_or(Ordering::Equal).then(a.0.cmp(&b.0)));
    let subset_of = |flips: &[usize]| -> Vec<usize> {
        let mut member = base.clone();
        for &f in flips {
            member[ratio[f].0] = !member[ratio[f].0];
        }
        (0..k).filter(|&i| member[i]).collect()
    };
    visit(&subset_of(&[]), top)?;
    let mut count = 1;
    let mut heap = BinaryHeap::new();
    if k > 0 && ratio[0].1 > 0.0 {
        heap.push(Node {
            weight: top * ratio[0].1,
            flips: vec![0],
        });
    }
    while let Some(node) = heap.pop() {
        if count >= budget {
            return Ok((count, true));
        }
        visit(&subset_of(&node.flips), node.weight)?;
        count += 1;
        let last = *node.flips.last().unwrap_or(&0);
        if last + 1 < k && ratio[last + 1].1 > 0.0 {
            let mut add = node.flips.clone();
            add.push(last + 1);
            heap.push(Node {
                weight: node.weight * ratio[last + 1].1,
                flips: add,
            });
            let mut swap = node.flips.clone();
            *swap.last_mut().unwrap() = last + 1;
            heap.push(Node {
                weight: node.weight / ratio[last].1 * ratio[last + 1].1,
                flips: swap,
            });
        }
    }
    Ok((count, false))
}

fn general_bound<T: Real>(
    a: &MixedKernelSpec<T>,
    b: &MixedKernelSpec<T>,
    which: Which,
    exact_cap: usize,
    budget: usize,
) -> Result<GeneralBound> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: a.len(),
            found: b.len(),
        });
    }
    let lam = lambdas_f64(a);
    let lam_p = lambdas_f64(b);
    let m = overlap_matrix(a.family(), b.family())?;
    let diff: f64 = lam.iter().zip(&lam_p).map(|(x, y)| (x - y).abs()).sum();
    let eigenvalue_term = match which {
        Which::Tv => diff,
        Which::Wsharp => (2.0 + lam.iter().sum::<f64>() + lam_p.iter().sum::<f64>()) * diff.sqrt(),
    };
    let mut subset_term = 0.0;
    let mut covered = 0.0;
    let (count, truncated) = for_each_subset(&lam, &lam_p, exact_cap, budget, |subset, w| {
        covered += w;
        if subset.is_empty() {
            return Ok(());
        }
        let sub = m.restrict(subset);
        let term: f64 = match which {
            Which::Tv => tv_bound_projection(&sub).into(),
            Which::Wsharp => wsharp_bound_projection(&sub).into(),
        };
        subset_term += term * w;
        Ok(())
    })?;
    let tail_mass = if truncated {
        let total: f64 = (0..lam.len())
            .map(|i| lam[i].min(lam_p[i]) + 1.0 - lam[i].max(lam_p[i]))
            .product();
        (total - covered).max(0.0)
    } else {
        0.0
    };
    let worst = match which {
        Which::Tv => 1.0,
        Which::Wsharp => lam.len() as f64,
    };
    let rest = subset_term + tail_mass * worst;
    Ok(GeneralBound {
        value: eigenvalue_term + rest,
        corrected_value: match which {
            Which::Tv => eigenvalue_term + rest,
            Which::Wsharp => eigenvalue_term + 2.0 * rest,
        },
        eigenvalue_term,
        subset_term,
        tail_mass,
        enumerated_subsets: count,
        truncated,
    })
}

const DEFAULT_BUDGET: usize = 1 << SUBSET_ENUMERATION_CAP;

pub fn tv_bound_general<T: Real>(a: &MixedKernelSpec<T>, b: &MixedKernelSpec<T>) -> Result<GeneralBound> {
    general_bound(a, b, Which::Tv, SUBSET_ENUMERATION_CAP, DEFAULT_BUDGET)
}

pub fn wsharp_bound_general<T: Real>(a: &MixedKernelSpec<T>, b: &MixedKernelSpec<T>) -> Result<GeneralBound> {
    general_bound(a, b, Which::Wsharp, SUBSET_ENUMERATION_CAP, DEFAULT_BUDGET)
}

/// Same bounds with explicit truncation parameters.
pub fn general_bounds_truncated<T: Real>(
    a: &MixedKernelSpec<T>,
    b: &MixedKernelSpec<T>,
    exact_cap: usize,
    budget: usize,
) -> Result<(GeneralBound, GeneralBound)> {
    Ok((
        general_bound(a, b, Which::Tv, exact_cap, budget)?,
        general_bound(a, b, Which::Wsharp, exact_cap, budget)?,
    ))
}

/// How the eigenpairs of the two kernels are matched.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Pairing {
    #[default]
    AsGiven,
    /// Both sides sorted by decreasing eigenvalue, matched by rank.
    GreedyDescending,
}

pub fn paired<T: Real>(a: &MixedKernelSpec<T>, b: &MixedKernelSpec<T>, pairing: Pairing) -> Result<(MixedKernelSpec<T>, MixedKernelSpec<T>)> {
    match pairing {
        Pairing::AsGiven => Ok((a.clone(), b.clone())),
        Pairing::GreedyDescending => Ok((a.permuted(&a.descending_order())?, b.permuted(&b.descending_order())?)),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimateKind {
    Exact,
    Empirical,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistanceEstimate {
    pub value: f64,
    pub kind: EstimateKind,
    /// Percentile bootstrap interval, empirical mode only.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub ci95: Option<[f64; 2]>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum VerifyMode {
    Exact,
    Empirical { samples: usize, seed: u64, bootstrap: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DppBoundsReport {
    pub indices: usize,
    pub dim: usize,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub seed: Option<u64>,
    pub tv: DistanceEstimate,
    pub wsharp: DistanceEstimate,
    pub tv_bound: f64,
    pub wsharp_bound: f64,
    pub tv_bound_paired: f64,
    pub wsharp_bound_paired: f64,
    /// `min(bounds) - distance`
    pub slack_tv: f64,
    pub slack_wsharp: f64,
    /// Corrected `W_#` bound (see [`GeneralBound::corrected_value`]), best
    /// of the two pairings, and its slack.
    pub wsharp_bound_corrected: f64,
    pub slack_wsharp_corrected: f64,
    pub truncated: bool,
}

impl DppBoundsReport {
    pub const CSV_HEADER: &'static str = "indices,dim,seed,kind,tv,tv_lo,tv_hi,tv_bound,tv_bound_paired,slack_tv,\
wsharp,wsharp_lo,wsharp_hi,wsharp_bound,wsharp_bound_paired,slack_wsharp,wsharp_bound_corrected,slack_wsharp_corrected";

    pub fn csv_row(&self) -> String {
        let ci = |e: &DistanceEstimate| match e.ci95 {
            Some([lo, hi]) => (lo.to_string(), hi.to_string()),
            None => (String::new(), String::new()),
        };
        let (tlo, thi) = ci(&self.tv);
        let (wlo, whi) = ci(&self.wsharp);
        let kind = match self.tv.kind {
            EstimateKind::Exact => "exact",
            EstimateKind::Empirical => "empirical",
        };
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            self.indices,
            self.dim,
            self.seed.map(|s| s.to_string()).unwrap_or_default(),
            kind,
            self.tv.value,
            tlo,
            thi,
            self.tv_bound,
            self.tv_bound_paired,
            self.slack_tv,
            self.wsharp.value,
            wlo,
            whi,
            self.wsharp_bound,
            self.wsharp_bound_paired,
            self.slack_wsharp,
            self.wsharp_bound_corrected,
            self.slack_wsharp_corrected
        )
    }

    /// Slacks are only meaningful against exact distances.
    pub fn bounds_hold(&self, tol: f64) -> bool {
        self.slack_tv >= -tol && self.slack_wsharp >= -tol
    }
}

fn percentile_interval(mut xs: Vec<f64>) -> Option<[f64; 2]> {
    if xs.is_empty() {
        return None;
    }
    xs.sort_by(|a, b| a.partial_cmp(b).unwrap_or(Ordering::Equal));
    let at = |q: f64| xs[((q * (xs.len() - 1) as f64).round() as usize).min(xs.len() - 1)];
    Some([at(0.025), at(0.975)])
}

fn resample<R: Rng + ?Sized>(samples: &[PointConfiguration], rng: &mut R) -> Vec<PointConfiguration> {
    (0..samples.len())
        .map(|_| samples[rng.random_range(0..samples.len())].clone())
        .collect()
}

fn distances(p: &ConfigurationDistribution, q: &ConfigurationDistribution) -> Result<(f64, f64)> {
    Ok((total_variation(p.law(), q.law()), wsharp_distance(p.law(), q.law())?.cost))
}

/// Compares the measured distances between the two processes with both
/// general bounds (as given and with greedy pairing).
pub fn verify_instance<T: Real>(a: &MixedKernelSpec<T>, b: &MixedKernelSpec<T>, mode: VerifyMode) -> Result<DppBoundsReport> {
    if a.space() != b.space() {
        return Err(Error::InvalidArgument("specs live on different ground spaces".into()));
    }
    let tvb = tv_bound_general(a, b)?;
    let wb = wsharp_bound_general(a, b)?;
    let (pa, pb) = paired(a, b, Pairing::GreedyDescending)?;
    let tvp = tv_bound_general(&pa, &pb)?;
    let wp = wsharp_bound_general(&pa, &pb)?;

    let (tv, wsharp, seed) = match mode {
        VerifyMode::Exact => {
            let p = mixed_exact_distribution(a)?;
            let q = mixed_exact_distribution(b)?;
            let (tv, ws) = distances(&p, &q)?;
            let est = |value| DistanceEstimate {
                value,
                kind: EstimateKind::Exact,
                ci95: None,
            };
            (est(tv), est(ws), None)
        }
        VerifyMode::Empirical {
            samples,
            seed,
            bootstrap,
        } => {
            let mut ra = stream(split_seed(seed, 0), 0);
            let mut rb = stream(split_seed(seed, 1), 0);
            let sa = (0..samples)
                .map(|_| sample_mixed_dpp(a, &mut ra))
                .collect::<Result<Vec<_>>>()?;
            let sb = (0..samples)
                .map(|_| sample_mixed_dpp(b, &mut rb))
                .collect::<Result<Vec<_>>>()?;
            let p = ConfigurationDistribution::from_samples(&sa, split_seed(seed, 0))?;
            let q = ConfigurationDistribution::from_samples(&sb, split_seed(seed, 1))?;
            let (tv, ws) = distances(&p, &q)?;
            let mut rboot = stream(split_seed(seed, 2), 0);
            let mut tvs = Vec::with_capacity(bootstrap);
            let mut wss = Vec::with_capacity(bootstrap);
            for _ in 0..bootstrap {
                let p = ConfigurationDistribution::from_samples(&resample(&sa, &mut rboot), 0)?;
                let q = ConfigurationDistribution::from_samples(&resample(&sb, &mut rboot), 0)?;
                let (t, w) = distances(&p, &q)?;
                tvs.push(t);
                wss.push(w);
            }
            let est = |value, boot| DistanceEstimate {
                value,
                kind: EstimateKind::Empirical,
                ci95: percentile_interval(boot),
            };
            (est(tv, tvs), est(ws, wss), Some(seed))
        }
    };
    let tv_best = tvb.value.min(tvp.value);
    let w_best = wb.value.min(wp.value);
    let w_corr = wb.corrected_value.min(wp.corrected_value);
    Ok(DppBoundsReport {
        wsharp_bound_corrected: w_corr,
        slack_wsharp_corrected: w_corr - wsharp.value,
        indices: a.len(),
        dim: a.space().len(),
        seed,
        slack_tv: tv_best - tv.value,
        slack_wsharp: w_best - wsharp.value,
        tv,
        wsharp,
        tv_bound: tvb.value,
        wsharp_bound: wb.value,
        tv_bound_paired: tvp.value,
        wsharp_bound_paired: wp.value,
        truncated: tvb.truncated || wb.truncated,
    })
}

/// The two Walsh processes on the 4-cell dyadic grid: kernels from
/// `{w_0, w_1}` and from `{w_0, w_2}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WalshReport {
    /// `Cov(#(X ∩ [0,1/4)), #(X ∩ [1/4,1/2)))`, exact.
    pub covariance_first: String,
    pub covariance_second: String,
    pub covariance_first_value: f64,
    pub covariance_second_value: f64,
    /// `min_τ Σ_i W_2(|ψ_i|² μ, |ψ'_τ(i)|² μ)` on cell midpoints.
    pub falsified_rhs: f64,
    /// Transport cost between the configuration laws for the squared-distance
    /// assignment cost, the quantity that right-hand side was meant to bound.
    pub falsified_lhs: f64,
    pub tv_exact: f64,
    pub wsharp_exact: f64,
    pub tv_bound: f64,
    pub wsharp_bound: f64,
}

fn ratio_string(r: &Ratio<i64>) -> String {
    if *r.denom() == 1 {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![Vec::new()];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for pos in 0..=p.len() {
            let mut q = p.clone();
            q.insert(pos, n - 1);
            out.push(q);
        }
    }
    out
}

/// `W_2` between two measures on the real line given on shared points.
fn w2_on_points(p: &[f64], q: &[f64], coords: &[f64]) -> Result<f64> {
    let c = CostMatrix::from_fn(coords.len(), coords.len(), |i, j| (coords[i] - coords[j]).powi(2))?;
    Ok(ot_cost(p, q, &c)?.cost.max(0.0).sqrt())
}

pub fn walsh_counterexample() -> Result<WalshReport> {
    let k1 = walsh_exact_kernel::<Ratio<i64>>(2, &[0, 1])?;
    let k2 = walsh_exact_kernel::<Ratio<i64>>(2, &[0, 2])?;
    let c1 = k1.count_covariance(&[0], &[1])?;
    let c2 = k2.count_covariance(&[0], &[1])?;

    let (space, fns) = walsh_family::<f64>(2);
    let fam = |idx: &[usize]| OrthonormalFamily::new(space.clone(), idx.iter().map(|&k| fns[k].clone()).collect(), 1e-12);
    let a = fam(&[0, 1])?;
    let b = fam(&[0, 2])?;
    let coords = space.coords().expect("Walsh grid carries midpoints").to_vec();

    // right-hand side: marginal intensities |ψ|² μ, matched by the best τ
    let intensity = |f: &crate::ground_space::GroundFunction<f64>| -> Vec<f64> {
        (0..space.len()).map(|x| f.at(x).norm_sqr() * space.weight(x)).collect()
    };
    let mut rhs = f64::INFINITY;
    for tau in permutations(a.len()) {
        let mut total = 0.0;
        for (i, &t) in tau.iter().enumerate() {
            total += w2_on_points(&intensity(&a.functions()[i]), &intensity(&b.functions()[t]), &coords)?;
        }
        rhs = rhs.min(total);
    }

    let sa = MixedKernelSpec::projection(a.clone());
    let sb = MixedKernelSpec::projection(b.clone());
    let p = mixed_exact_distribution(&sa)?;
    let q = mixed_exact_distribution(&sb)?;
    let assignment = |x: &PointConfiguration, y: &PointConfiguration| -> f64 {
        permutations(x.len())
            .iter()
            .map(|s| {
                x.points()
                    .iter()
                    .zip(s)
                    .map(|(&i, &j)| (coords[i] - coords[y.points()[j]]).powi(2))
                    .sum::<f64>()
            })
            .fold(f64::INFINITY, f64::min)
    };
    let lhs = ot_cost_between(p.law(), q.law(), assignment)?.cost;
    let m = overlap_matrix(&a, &b)?;
    Ok(WalshReport {
        covariance_first: ratio_string(&c1),
        covariance_second: ratio_string(&c2),
        covariance_first_value: *c1.numer() as f64 / *c1.denom() as f64,
        covariance_second_value: *c2.numer() as f64 / *c2.denom() as f64,
        falsified_rhs: rhs,
        falsified_lhs: lhs,
        tv_exact: total_variation(p.law(), q.law()),
        wsharp_exact: wsharp_distance(p.law(), q.law())?.cost,
        tv_bound: tv_bound_projection(&m),
        wsharp_bound: wsharp_bound_projection(&m),
    })
}

/// `E[#(X Δ X')]` under a coupling is an upper bound on `W_#`; used to
/// check the coupling side of the general bound.
pub fn mean_symmetric_difference(pairs: &[crate::dpp::CoupledPair]) -> f64 {
    if pairs.is_empty() {
        return 0.0;
    }
    pairs.iter().map(|p| p.symmetric_difference() as f64).sum::<f64>() / pairs.len() as f64
}

/// Configuration law of a single index set, used by the self-test.
pub fn index_set_law<T: Real>(spec: &MixedKernelSpec<T>) -> Result<DiscreteDistribution<PointConfiguration>> {
    Ok(mixed_exact_distribution(spec)?.law().clone())
}

/// Stabilizer overlap of a sub-family pair, exposed for reports.
pub fn restricted_stabilizer_overlap<T: Real>(m: &OverlapMatrix<T>, subset: &[usize]) -> T {
    stabilizer_max_overlap(&m.restrict(subset))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ground_space::{random_orthonormal, GroundSpace};
    use crate::rng::stream;

    fn spec(lams: &[f64], fam: &OrthonormalFamily<f64>) -> MixedKernelSpec<f64> {
        MixedKernelSpec::new(lams.to_vec(), fam.clone()).unwrap()
    }

    #[test]
    fn projection_bounds_examples() {
        let id = OverlapMatrix::<f64>::identity(3);
        let tv: fn(&OverlapMatrix<f64>) -> f64 = tv_bound_projection;
        assert_eq!(tv_bound_projection(&id), 0.0);
        assert_eq!(wsharp_bound_projection(&id), 0.0);
        let c = 0.6;
        let one = OverlapMatrix::from_diagonal(&[c]).unwrap();
        assert!((tv(&one) - 0.8).abs() < 1e-15);
        let walsh = OverlapMatrix::from_diagonal(&[1.0, 0.0]).unwrap();
        assert!((tv(&walsh) - 1.0).abs() < 1e-15);
        assert!((wsharp_bound_projection(&walsh) - 3f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn wsharp_bound_is_at_most_n_times_tv_bound() {
        let s = GroundSpace::<f64>::uniform(7).unwrap();
        for seed in 0..30 {
            let a = random_orthonormal(&s, 3, seed).unwrap();
            let b = random_orthonormal(&s, 3, seed + 99).unwrap();
            let m = overlap_matrix(&a, &b).unwrap();
            assert!(wsharp_bound_projection(&m) <= 3.0 * tv_bound_projection(&m) + 1e-12);
        }
    }

    #[test]
    fn weight_examples() {
        assert_eq!(weight_w(&[1.0, 1.0], &[1.0, 1.0], &[0, 1]).unwrap(), 1.0);
        assert_eq!(weight_w(&[0.0, 0.5], &[0.3, 0.5], &[0]).unwrap(), 0.0);
        assert!(weight_w(&[1.2], &[0.5], &[]).is_err());
        assert!(weight_w(&[0.2], &[0.5, 0.1], &[]).is_err());
        // Bernoulli normalisation for λ = λ'
        let mut rng = stream(1, 0);
        for k in [1usize, 5, 12] {
            let lam: Vec<f64> = (0..k).map(|_| rng.random::<f64>()).collect();
            let total: f64 = (0u32..(1 << k))
                .map(|mask| {
                    let s: Vec<usize> = (0..k).filter(|i| mask >> i & 1 == 1).collect();
                    weight_w(&lam, &lam, &s).unwrap()
                })
                .sum();
            assert!((total - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn general_bounds_reduce_to_projection() {
        let s = GroundSpace::<f64>::uniform(6).unwrap();
        let a = random_orthonormal(&s, 3, 1).unwrap();
        let b = random_orthonormal(&s, 3, 2).unwrap();
        let m = overlap_matrix(&a, &b).unwrap();
        let sa = MixedKernelSpec::projection(a);
        let sb = MixedKernelSpec::projection(b);
        assert_eq!(tv_bound_general(&sa, &sb).unwrap().value, tv_bound_projection(&m));
        assert_eq!(wsharp_bound_general(&sa, &sb).unwrap().value, wsharp_bound_projection(&m));
        assert!(tv_bound_general(&sa, &sa).unwrap().value < 1e-12);
        assert!(wsharp_bound_general(&sa, &sa).unwrap().value < 1e-12);
    }

    #[test]
    fn general_bound_hand_examples() {
        let s = GroundSpace::<f64>::uniform(4).unwrap();
        let a = random_orthonormal(&s, 2, 3).unwrap();
        let x = spec(&[1.0, 1.0], &a);
        let y = spec(&[1.0, 0.0], &a);
        // Σ|λ-λ'| = 1; the only weighted set is {0}, whose bound is 0
        assert!((tv_bound_general(&x, &y).unwrap().value - 1.0).abs() < 1e-12);
        let one = random_orthonormal(&s, 1, 3).unwrap();
        let other = random_orthonormal(&s, 1, 4).unwrap();
        let c = overlap_matrix(&one, &other).unwrap().matrix()[(0, 0)].norm();
        let w = wsharp_bound_general(&MixedKernelSpec::projection(one), &MixedKernelSpec::projection(other))
            .unwrap()
            .value;
        assert!((w - (1.0 - c * c).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn truncated_enumeration_is_conservative() {
        let s = GroundSpace::<f64>::uniform(10).unwrap();
        let mut rng = stream(2, 0);
        let a = random_orthonormal(&s, 8, 5).unwrap();
        let b = random_orthonormal(&s, 8, 6).unwrap();
        let la: Vec<f64> = (0..8).map(|_| rng.random::<f64>()).collect();
        let lb: Vec<f64> = (0..8).map(|_| rng.random::<f64>()).collect();
        let x = spec(&la, &a);
        let y = spec(&lb, &b);
        let (tv, ws) = general_bounds_truncated(&x, &y, 8, 0).unwrap();
        assert!(!tv.truncated);
        let mut last = (f64::INFINITY, f64::INFINITY);
        for budget in [1, 10, 50, 255] {
            let (t, w) = general_bounds_truncated(&x, &y, 0, budget).unwrap();
            assert!(t.truncated);
            assert!(t.value >= tv.value - 1e-12 && w.value >= ws.value - 1e-12);
            assert!(t.value <= last.0 + 1e-12 && w.value <= last.1 + 1e-12);
            last = (t.value, w.value);
        }
        // a budget covering all 256 sets recovers the exact value
        let (t, w) = general_bounds_truncated(&x, &y, 0, 1000).unwrap();
        assert!(!t.truncated);
        assert!((t.value - tv.value).abs() < 1e-12 && (w.value - ws.value).abs() < 1e-12);
        assert_eq!(t.enumerated_subsets, 256);
    }

    #[test]
    fn identical_specs_verify_to_zero() {
        let s = GroundSpace::<f64>::uniform(5).unwrap();
        let a = random_orthonormal(&s, 3, 1).unwrap();
        let x = spec(&[0.2, 0.7, 1.0], &a);
        let r = verify_instance(&x, &x, VerifyMode::Exact).unwrap();
        assert!(r.tv.value.abs() < 1e-12 && r.wsharp.value.abs() < 1e-9);
        assert!(r.tv_bound < 1e-12 && r.wsharp_bound < 1e-12, "{r:?}");
    }

    #[test]
    fn tv_and_corrected_wsharp_bounds_hold_on_random_instances() {
        let s = GroundSpace::<f64>::uniform(6).unwrap();
        for seed in 0..10 {
            let a = random_orthonormal(&s, 2, seed).unwrap();
            let b = random_orthonormal(&s, 2, seed + 1000).unwrap();
            let r = verify_instance(&MixedKernelSpec::projection(a), &MixedKernelSpec::projection(b), VerifyMode::Exact)
                .unwrap();
            assert!(r.slack_tv >= -1e-9, "{r:?}");
            assert!(r.slack_wsharp_corrected >= -1e-9, "{r:?}");
        }
    }

    #[test]
    fn literal_wsharp_bound_fails_on_disjoint_supports() {
        // {0,1} against {2,3} surely: ♯(X Δ X') = 4, while the overlap is 0
        let s = GroundSpace::<f64>::uniform(4).unwrap();
        let fam = |pts: &[usize]| {
            let fns = pts
                .iter()
                .map(|&x| crate::ground_space::GroundFunction::normalized_indicator(&s, x))
                .collect();
            MixedKernelSpec::projection(OrthonormalFamily::new(s.clone(), fns, 1e-12).unwrap())
        };
        let r = verify_instance(&fam(&[0, 1]), &fam(&[2, 3]), VerifyMode::Exact).unwrap();
        assert!((r.wsharp.value - 4.0).abs() < 1e-9);
        assert!((r.wsharp_bound - 2.0).abs() < 1e-9);
        assert!(r.slack_wsharp < -1.9);
        assert!(r.slack_wsharp_corrected > -1e-9);
    }

    #[test]
    fn empirical_mode_reports_intervals() {
        let s = GroundSpace::<f64>::uniform(5).unwrap();
        let a = random_orthonormal(&s, 2, 1).unwrap();
        let b = random_orthonormal(&s, 2, 2).unwrap();
        let mode = VerifyMode::Empirical {
            samples: 2000,
            seed: 7,
            bootstrap: 50,
        };
        let x = MixedKernelSpec::projection(a);
        let y = MixedKernelSpec::projection(b);
        let r = verify_instance(&x, &y, mode).unwrap();
        let [lo, hi] = r.tv.ci95.unwrap();
        assert!(lo <= hi);
        assert_eq!(r.tv.kind, EstimateKind::Empirical);
        let exact = verify_instance(&x, &y, VerifyMode::Exact).unwrap();
        assert!((r.tv.value - exact.tv.value).abs() < 0.1);
        assert_eq!(r.csv_row().split(',').count(), DppBoundsReport::CSV_HEADER.split(',').count());
        // deterministic given the seed
        assert_eq!(verify_instance(&x, &y, mode).unwrap(), r);
    }

    #[test]
    fn walsh_exhibit() {
        let r = walsh_counterexample().unwrap();
        assert_eq!(r.covariance_first, "-1/4");
        assert_eq!(r.covariance_second, "0");
        assert_eq!(r.falsified_rhs, 0.0);
        assert!(r.falsified_lhs > 0.0);
        assert!((r.tv_exact - 0.5).abs() < 1e-12);
        assert!((r.wsharp_exact - 1.0).abs() < 1e-9);
        assert!((r.tv_bound - 1.0).abs() < 1e-12);
        assert!((r.wsharp_bound - 3f64.sqrt()).abs() < 1e-12);
    }
}
