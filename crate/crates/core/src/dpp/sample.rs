//! Exact samplers.
//!
//! The projection sampler works on the folded frame `V = (ψ_j(x) √μ(x))`,
//! whose columns are orthonormal in `C^|E|`. A point is drawn with
//! probability `‖V_x‖² / k`, then the frame is reduced to the functions of
//! its span vanishing at that point and re-orthonormalised.

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::enumerate::projection_exact_distribution;
use super::{MixedKernelSpec, PointConfiguration};
use crate::error::{Error, Result};
use crate::ground_space::OrthonormalFamily;
use crate::linalg::CMatrix;
use crate::scalar::{creal, Real};
use crate::transport::{symmetric_difference_cost, total_variation, wsharp_distance};

const COLLAPSE_TOL: f64 = 1e-12;

fn pick<R: Rng + ?Sized>(weights: &[f64], rng: &mut R) -> usize {
    let total: f64 = weights.iter().sum();
    let u = rng.random::<f64>() * total;
    let mut acc = 0.0;
    let mut last = 0;
    for (i, &w) in weights.iter().enumerate() {
        if w > 0.0 {
            last = i;
            acc += w;
            if u < acc {
                return i;
            }
        }
    }
    last
}

/// Modified Gram–Schmidt with one reorthogonalisation pass, in place.
fn orthonormalize_columns<T: Real>(v: &mut CMatrix<T>, step: usize) -> Result<()> {
    for j in 0..v.ncols() {
        for _ in 0..2 {
            for i in 0..j {
                let proj = v.column(i).dotc(&v.column(j));
                let ci = v.column(i).clone_owned();
                v.column_mut(j).axpy(-proj, &ci, creal(T::one()));
            }
        }
        let norm = v.column(j).norm();
        if norm < T::lit(COLLAPSE_TOL) {
            return Err(Error::RankCollapse {
                step,
                residual: norm.into(),
            });
        }
        v.column_mut(j).unscale_mut(norm);
    }
    Ok(())
}

fn sample_frame<T: Real, R: Rng + ?Sized>(mut v: CMatrix<T>, rng: &mut R) -> Result<PointConfiguration> {
    let e = v.nrows();
    let n = v.ncols();
    let mut chosen = vec![false; e];
    let mut points = Vec::with_capacity(n);
    for step in 0..n {
        let weights: Vec<f64> = (0..e)
            .map(|x| if chosen[x] { 0.0 } else { v.row(x).norm_squared().into() })
            .collect();
        let x = pick(&weights, rng);
        chosen[x] = true;
        points.push(x);
        let k = v.ncols();
        if k == 1 {
            break;
        }
        let c = (0..k)
            .max_by(|&i, &j| {
                v[(x, i)]
                    .norm_sqr()
                    .partial_cmp(&v[(x, j)].norm_sqr())
                    .unwrap_or(std::cmp::Ordering::Equal)
            })
            .unwrap_or(0);
        let pivot = v[(x, c)];
        let pc = v.column(c).clone_owned();
        let mut next = CMatrix::<T>::zeros(e, k - 1);
        for (slot, j) in (0..k).filter(|&j| j != c).enumerate() {
            let f = v[(x, j)] / pivot;
            let mut col = v.column(j) - &pc * f;
            col[x] = creal(T::zero());
            next.set_column(slot, &col);
        }
        orthonormalize_columns(&mut next, step + 1)?;
        v = next;
    }
    PointConfiguration::new(points)
}

/// One exact sample of the projection process of `a`: always `a.len()`
/// distinct points.
pub fn sample_projection_dpp<T: Real, R: Rng + ?Sized>(a: &OrthonormalFamily<T>, rng: &mut R) -> Result<PointConfiguration> {
    if a.is_empty() {
        return Ok(PointConfiguration::empty());
    }
    sample_frame(a.weighted_matrix(), rng)
}

/// Draws `I = {i : B_i = 1}` with independent `B_i ~ Bernoulli(λ_i)`, then
/// the projection process on `span{ψ_i : i ∈ I}`.
pub fn sample_mixed_dpp_with_indices<T: Real, R: Rng + ?Sized>(
    spec: &MixedKernelSpec<T>,
    rng: &mut R,
) -> Result<(Vec<usize>, PointConfiguration)> {
    let idx: Vec<usize> = spec
        .lambdas()
        .iter()
        .enumerate()
        .filter(|(_, l)| rng.random::<f64>() < (**l).into())
        .map(|(i, _)| i)
        .collect();
    let c = sample_projection_dpp(&spec.family().subfamily(&idx), rng)?;
    Ok((idx, c))
}

pub fn sample_mixed_dpp<T: Real, R: Rng + ?Sized>(spec: &MixedKernelSpec<T>, rng: &mut R) -> Result<PointConfiguration> {
    sample_mixed_dpp_with_indices(spec, rng).map(|(_, c)| c)
}

/// How the two projection processes are coupled on `{I = I'}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum CouplingKind {
    /// Maximal coupling: `P(X_I ≠ X'_I) = TV`.
    #[default]
    MaximalTv,
    /// An optimal plan for the symmetric-difference cost.
    WsharpOptimal,
    Independent,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoupledPair {
    pub first: PointConfiguration,
    pub second: PointConfiguration,
    pub indices_first: Vec<usize>,
    pub indices_second: Vec<usize>,
    /// False when the inner processes were sampled independently.
    pub inner_coupled: bool,
}

impl CoupledPair {
    pub fn symmetric_difference(&self) -> usize {
        symmetric_difference_cost(&self.first, &self.second)
    }
}

/// Cumulative table over pairs of configurations.
#[derive(Debug, Clone)]
struct JointTable {
    cells: Vec<(PointConfiguration, PointConfiguration)>,
    masses: Vec<f64>,
}

impl JointTable {
    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> (PointConfiguration, PointConfiguration) {
        self.cells[pick(&self.masses, rng)].clone()
    }
}

fn joint_table<T: Real>(a: &OrthonormalFamily<T>, b: &OrthonormalFamily<T>, kind: CouplingKind) -> Result<Option<JointTable>> {
    let p = match projection_exact_distribution(a) {
        Ok(p) => p,
        Err(Error::CapExceeded { .. }) => return Ok(None),
        Err(e) => return Err(e),
    };
    let q = match projection_exact_distribution(b) {
        Ok(q) => q,
        Err(Error::CapExceeded { .. }) => return Ok(None),
        Err(e) => return Err(e),
    };
    let (p, q) = (p.law(), q.law());
    let mut cells = Vec::new();
    let mut masses = Vec::new();
    match kind {
        CouplingKind::Independent => return Ok(None),
        CouplingKind::MaximalTv => {
            let tv = total_variation(p, q);
            for c in p.merged_support(q) {
                let m = p.prob(&c).min(q.prob(&c));
                if m > 0.0 {
                    cells.push((c.clone(), c));
                    masses.push(m);
                }
            }
            if tv > 0.0 {
                let excess: Vec<_> = p.iter().filter(|(c, m)| *m > q.prob(c)).collect();
                let deficit: Vec<_> = q.iter().filter(|(c, m)| *m > p.prob(c)).collect();
                for (x, px) in &excess {
                    for (y, qy) in &deficit {
                        cells.push(((*x).clone(), (*y).clone()));
                        masses.push((px - q.prob(x)) * (qy - p.prob(y)) / tv);
                    }
                }
            }
        }
        CouplingKind::WsharpOptimal => {
            let rows: Vec<_> = p.support().cloned().collect();
            let cols: Vec<_> = q.support().cloned().collect();
            let plan = wsharp_distance(p, q)?;
            for e in plan.plan {
                cells.push((rows[e.row].clone(), cols[e.col].clone()));
                masses.push(e.mass);
            }
        }
    }
    Ok(Some(JointTable { cells, masses }))
}

/// Samples coupled pairs of two mixed processes on the same index set,
/// caching the inner couplings per index set.
#[derive(Debug)]
pub struct PairSampler<'a, T: Real> {
    a: &'a MixedKernelSpec<T>,
    b: &'a MixedKernelSpec<T>,
    kind: CouplingKind,
    cache: BTreeMap<Vec<usize>, Option<JointTable>>,
}

impl<'a, T: Real> PairSampler<'a, T> {
    pub fn new(a: &'a MixedKernelSpec<T>, b: &'a MixedKernelSpec<T>, kind: CouplingKind) -> Result<Self> {
        if a.len() != b.len() {
            return Err(Error::DimensionMismatch {
                expected: a.len(),
                found: b.len(),
            });
        }
        if a.space() != b.space() {
            return Err(Error::InvalidArgument("specs live on different ground spaces".into()));
        }
        Ok(Self {
            a,
            b,
            kind,
            cache: BTreeMap::new(),
        })
    }

    /// Each `(B_i, B'_i)` is driven by one shared uniform, so
    /// `P(B_i = B'_i = 1) = min(λ_i, λ'_i)` and `P(B_i ≠ B'_i) = |λ_i - λ'_i|`.
    pub fn sample<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<CoupledPair> {
        let mut ia = Vec::new();
        let mut ib = Vec::new();
        for i in 0..self.a.len() {
            let u = rng.random::<f64>();
            if u < self.a.lambdas()[i].into() {
                ia.push(i);
            }
            if u < self.b.lambdas()[i].into() {
                ib.push(i);
            }
        }
        let fa = self.a.family().subfamily(&ia);
        let fb = self.b.family().subfamily(&ib);
        if ia == ib && !ia.is_empty() {
            if !self.cache.contains_key(&ia) {
                let table = joint_table(&fa, &fb, self.kind)?;
                self.cache.insert(ia.clone(), table);
            }
            if let Some(table) = &self.cache[&ia] {
                let (first, second) = table.sample(rng);
                return Ok(CoupledPair {
                    first,
                    second,
                    indices_first: ia,
                    indices_second: ib,
                    inner_coupled: true,
                });
            }
        }
        let inner_coupled = ia == ib && ia.is_empty();
        Ok(CoupledPair {
            first: sample_projection_dpp(&fa, rng)?,
            second: sample_projection_dpp(&fb, rng)?,
            indices_first: ia,
            indices_second: ib,
            inner_coupled,
        })
    }
}

pub fn coupled_sample_pair<T: Real, R: Rng + ?Sized>(
    a: &MixedKernelSpec<T>,
    b: &MixedKernelSpec<T>,
    kind: CouplingKind,
    rng: &mut R,
) -> Result<CoupledPair> {
    PairSampler::new(a, b, kind)?.sample(rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dpp::{brute_force_configuration_distribution, expected_count, ConfigurationDistribution};
    use crate::ground_space::{random_orthonormal, GroundSpace};
    use crate::rng::stream;
    use crate::slater::projection_kernel;

    #[test]
    fn full_frame_returns_every_point() {
        let s = GroundSpace::<f64>::uniform(4).unwrap();
        let a = random_orthonormal(&s, 4, 3).unwrap();
        let mut rng = stream(1, 0);
        for _ in 0..20 {
            assert_eq!(sample_projection_dpp(&a, &mut rng).unwrap().points(), &[0, 1, 2, 3]);
        }
    }

    #[test]
    fn samples_have_exact_cardinality() {
        let s = GroundSpace::<f64>::weighted(vec![0.1, 0.2, 0.3, 0.1, 0.2, 0.1]).unwrap();
        let a = random_orthonormal(&s, 3, 9).unwrap();
        let mut rng = stream(2, 0);
        for _ in 0..500 {
            assert_eq!(sample_projection_dpp(&a, &mut rng).unwrap().len(), 3);
        }
    }

    #[test]
    fn empirical_law_is_close_to_oracle() {
        let s = GroundSpace::<f64>::uniform(6).unwrap();
        let a = random_orthonormal(&s, 2, 5).unwrap();
        let mut rng = stream(3, 0);
        let samples: Vec<_> = (0..20_000).map(|_| sample_projection_dpp(&a, &mut rng).unwrap()).collect();
        let emp = ConfigurationDistribution::from_samples(&samples, 3).unwrap();
        let exact = brute_force_configuration_distribution(&a).unwrap();
        let tv = total_variation(emp.law(), exact.law());
        assert!(tv <= 3.0 * (15.0f64 / 20_000.0).sqrt(), "tv {tv}");
        let k = projection_kernel(&a);
        let mean = expected_count(&k, &[0, 1]).unwrap();
        assert!((emp.mean_count(&[0, 1]) - mean).abs() < 0.05);
    }

    #[test]
    fn extreme_mixtures() {
        let s = GroundSpace::<f64>::uniform(5).unwrap();
        let a = random_orthonormal(&s, 3, 2).unwrap();
        let mut rng = stream(4, 0);
        let zero = MixedKernelSpec::new(vec![0.0; 3], a.clone()).unwrap();
        let one = MixedKernelSpec::projection(a);
        for _ in 0..50 {
            assert!(sample_mixed_dpp(&zero, &mut rng).unwrap().is_empty());
            assert_eq!(sample_mixed_dpp(&one, &mut rng).unwrap().len(), 3);
        }
    }

    #[test]
    fn identical_specs_share_index_sets() {
        let s = GroundSpace::<f64>::uniform(5).unwrap();
        let a = random_orthonormal(&s, 3, 2).unwrap();
        let spec = MixedKernelSpec::new(vec![0.3, 0.6, 0.9], a).unwrap();
        let mut sampler = PairSampler::new(&spec, &spec, CouplingKind::MaximalTv).unwrap();
        let mut rng = stream(5, 0);
        for _ in 0..200 {
            let p = sampler.sample(&mut rng).unwrap();
            assert_eq!(p.indices_first, p.indices_second);
            assert_eq!(p.first, p.second);
            assert!(p.inner_coupled);
        }
    }

    #[test]
    fn single_index_disagreement_rate() {
        let s = GroundSpace::<f64>::uniform(5).unwrap();
        let a = random_orthonormal(&s, 2, 2).unwrap();
        let x = MixedKernelSpec::new(vec![0.5, 0.8], a.clone()).unwrap();
        let y = MixedKernelSpec::new(vec![0.5, 0.3], a).unwrap();
        let mut sampler = PairSampler::new(&x, &y, CouplingKind::WsharpOptimal).unwrap();
        let mut rng = stream(6, 0);
        let trials = 20_000;
        let differ = (0..trials)
            .filter(|_| {
                let p = sampler.sample(&mut rng).unwrap();
                p.indices_first != p.indices_second
            })
            .count();
        let rate = differ as f64 / trials as f64;
        let se = (0.5 * 0.5 / trials as f64).sqrt();
        assert!((rate - 0.5).abs() < 4.0 * se, "rate {rate}");
    }
}
