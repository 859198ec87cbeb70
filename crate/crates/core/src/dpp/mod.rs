//! Determinantal point processes on finite ground sets.
//!
//! A kernel `K(x, y)` defines the process through its correlation functions
//! `ρ_m(x_1, ..., x_m) = det(K(x_i, x_j))`, densities with respect to `μ^m`.
//! Projection kernels come from [`crate::slater::projection_kernel`]; general
//! Hermitian kernels with spectrum in `[0, 1]` from [`MixedKernelSpec`].

mod enumerate;
pub use enumerate::subsets;
mod sample;

use std::collections::BTreeMap;

use num_complex::Complex;
use num_traits::FromPrimitive;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ground_space::{walsh_signs, GroundSpace, OrthonormalFamily};
use crate::linalg::{self, CMatrix};
use crate::scalar::{Field, Real};
use crate::slater::ProjectionKernel;
use crate::transport::DiscreteDistribution;

pub use enumerate::{
    brute_force_configuration_distribution, final_claim_lhs, inclusion_probability, mixed_exact_distribution,
    projection_exact_distribution, projection_exact_distribution_capped, tuple_law, tuple_law_capped, TupleLaw,
    ENUMERATION_CAP,
};
pub use sample::{
    coupled_sample_pair, sample_mixed_dpp, sample_mixed_dpp_with_indices, sample_projection_dpp, CoupledPair,
    CouplingKind, PairSampler,
};

/// A finite subset of the ground space, stored as sorted point indices.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct PointConfiguration {
    points: Vec<usize>,
}

impl PointConfiguration {
    pub fn new(mut points: Vec<usize>) -> Result<Self> {
        points.sort_unstable();
        if points.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidArgument(format!("repeated point in configuration {points:?}")));
        }
        Ok(Self { points })
    }

    /// Also checks that every point lies in a space of `space_len` points.
    pub fn new_in(points: Vec<usize>, space_len: usize) -> Result<Self> {
        let c = Self::new(points)?;
        if let Some(&x) = c.points.last().filter(|&&x| x >= space_len) {
            return Err(Error::InvalidArgument(format!("point {x} outside a space of {space_len} points")));
        }
        Ok(c)
    }

    pub fn empty() -> Self {
        Self { points: Vec::new() }
    }

    pub fn points(&self) -> &[usize] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn contains(&self, x: usize) -> bool {
        self.points.binary_search(&x).is_ok()
    }

    pub fn count_in(&self, set: &[usize]) -> usize {
        set.iter().filter(|&&x| self.contains(x)).count()
    }

    /// `"[0,3,4]"`, the key used in JSON count maps.
    pub fn key(&self) -> String {
        let inner: Vec<String> = self.points.iter().map(|x| x.to_string()).collect();
        format!("[{}]", inner.join(","))
    }
}

impl TryFrom<Vec<usize>> for PointConfiguration {
    type Error = Error;

    fn try_from(points: Vec<usize>) -> Result<Self> {
        Self::new(points)
    }
}

impl From<PointConfiguration> for Vec<usize> {
    fn from(c: PointConfiguration) -> Self {
        c.points
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DistributionKind {
    Exact,
    Empirical { sample_count: usize, seed: u64 },
}

/// The law of a point process on finitely many configurations.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigurationDistribution {
    law: DiscreteDistribution<PointConfiguration>,
    kind: DistributionKind,
    counts: Option<BTreeMap<PointConfiguration, u64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigurationDocument {
    #[serde(flatten)]
    pub kind: DistributionKind,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub probs: Option<BTreeMap<String, f64>>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub counts: Option<BTreeMap<String, u64>>,
}

impl ConfigurationDistribution {
    pub fn exact(law: DiscreteDistribution<PointConfiguration>) -> Self {
        Self {
            law,
            kind: DistributionKind::Exact,
            counts: None,
        }
    }

    pub fn from_samples<'a>(samples: impl IntoIterator<Item = &'a PointConfiguration>, seed: u64) -> Result<Self> {
        let mut counts = BTreeMap::new();
        let mut total = 0usize;
        for s in samples {
            *counts.entry(s.clone()).or_insert(0u64) += 1;
            total += 1;
        }
        let law = DiscreteDistribution::from_weights(counts.iter().map(|(c, k)| (c.clone(), *k as f64)))?;
        Ok(Self {
            law,
            kind: DistributionKind::Empirical {
                sample_count: total,
                seed,
            },
            counts: Some(counts),
        })
    }

    pub fn law(&self) -> &DiscreteDistribution<PointConfiguration> {
        &self.law
    }

    pub fn kind(&self) -> DistributionKind {
        self.kind
    }

    pub fn counts(&self) -> Option<&BTreeMap<PointConfiguration, u64>> {
        self.counts.as_ref()
    }

    pub fn prob(&self, c: &PointConfiguration) -> f64 {
        self.law.prob(c)
    }

    /// `E[#(X ∩ B)]`
    pub fn mean_count(&self, set: &[usize]) -> f64 {
        self.law.iter().map(|(c, p)| p * c.count_in(set) as f64).sum()
    }

    /// `Cov(#(X ∩ A), #(X ∩ B))`
    pub fn count_covariance(&self, a: &[usize], b: &[usize]) -> f64 {
        let ea = self.mean_count(a);
        let eb = self.mean_count(b);
        self.law
            .iter()
            .map(|(c, p)| p * c.count_in(a) as f64 * c.count_in(b) as f64)
            .sum::<f64>()
            - ea * eb
    }

    pub fn to_document(&self) -> ConfigurationDocument {
        match &self.counts {
            Some(counts) => ConfigurationDocument {
                kind: self.kind,
                probs: None,
                counts: Some(counts.iter().map(|(c, k)| (c.key(), *k)).collect()),
            },
            None => ConfigurationDocument {
                kind: self.kind,
                probs: Some(self.law.iter().map(|(c, p)| (c.key(), p)).collect()),
                counts: None,
            },
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(&self.to_document())?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let doc: ConfigurationDocument = serde_json::from_str(s)?;
        let parse = |k: &str| -> Result<PointConfiguration> { Ok(serde_json::from_str::<PointConfiguration>(k)?) };
        match (doc.kind, doc.probs, doc.counts) {
            (DistributionKind::Exact, Some(probs), None) => {
                let entries = probs.iter().map(|(k, p)| Ok((parse(k)?, *p))).collect::<Result<Vec<_>>>()?;
                Ok(Self::exact(DiscreteDistribution::new(entries)?))
            }
            (kind @ DistributionKind::Empirical { .. }, None, Some(counts)) => {
                let counts = counts
                    .iter()
                    .map(|(k, n)| Ok((parse(k)?, *n)))
                    .collect::<Result<BTreeMap<_, _>>>()?;
                let law = DiscreteDistribution::from_weights(counts.iter().map(|(c, k)| (c.clone(), *k as f64)))?;
                Ok(Self {
                    law,
                    kind,
                    counts: Some(counts),
                })
            }
            _ => Err(Error::InvalidArgument("document must carry probs (exact) or counts (empirical)".into())),
        }
    }
}

/// `K = Σ_i λ_i |ψ_i⟩⟨ψ_i|` with `0 <= λ_i <= 1` and `{ψ_i}` orthonormal.
#[derive(Debug, Clone, PartialEq)]
pub struct MixedKernelSpec<T: Real> {
    lambdas: Vec<T>,
    family: OrthonormalFamily<T>,
}

impl<T: Real> MixedKernelSpec<T> {
    pub fn new(lambdas: Vec<T>, family: OrthonormalFamily<T>) -> Result<Self> {
        if lambdas.len() != family.len() {
            return Err(Error::DimensionMismatch {
                expected: family.len(),
                found: lambdas.len(),
            });
        }
        if let Some(bad) = lambdas.iter().find(|l| !(**l >= T::zero() && **l <= T::one())) {
            return Err(Error::InvalidArgument(format!("eigenvalue {bad} outside [0, 1]")));
        }
        Ok(Self { lambdas, family })
    }

    /// All eigenvalues 1: the projection kernel of `family`.
    pub fn projection(family: OrthonormalFamily<T>) -> Self {
        Self {
            lambdas: vec![T::one(); family.len()],
            family,
        }
    }

    pub fn lambdas(&self) -> &[T] {
        &self.lambdas
    }

    pub fn family(&self) -> &OrthonormalFamily<T> {
        &self.family
    }

    pub fn len(&self) -> usize {
        self.lambdas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lambdas.is_empty()
    }

    pub fn space(&self) -> &GroundSpace<T> {
        self.family.space()
    }

    /// Relabels eigenpairs: entry `k` of the result is pair `order[k]`.
    pub fn permuted(&self, order: &[usize]) -> Result<Self> {
        let family = self.family.subfamily(order);
        Self::new(order.iter().map(|&i| self.lambdas[i]).collect(), family)
    }

    /// Order of the eigenpairs by decreasing eigenvalue (stable).
    pub fn descending_order(&self) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.len()).collect();
        idx.sort_by(|&i, &j| {
            self.lambdas[j]
                .partial_cmp(&self.lambdas[i])
                .unwrap_or(std::cmp::Ordering::Equal)
        });
        idx
    }

    pub fn kernel_matrix(&self) -> CMatrix<T> {
        let v = self.family.value_matrix();
        let s = self.space().len();
        CMatrix::<T>::from_fn(s, s, |x, y| {
            (0..self.len()).fold(Complex::new(T::zero(), T::zero()), |acc, l| {
                acc + v[(x, l)].conj() * v[(y, l)] * self.lambdas[l]
            })
        })
    }

    pub fn expected_cardinality(&self) -> T {
        self.lambdas.iter().fold(T::zero(), |a, l| a + *l)
    }
}

/// A kernel `K(x, y)` on a finite weighted ground space.
pub trait Kernel<T: Real> {
    fn space(&self) -> &GroundSpace<T>;
    fn at(&self, x: usize, y: usize) -> Complex<T>;
    /// The rank, when the kernel is known to be a projection.
    fn projection_rank(&self) -> Option<usize> {
        None
    }
}

impl<T: Real> Kernel<T> for ProjectionKernel<T> {
    fn space(&self) -> &GroundSpace<T> {
        ProjectionKernel::space(self)
    }

    fn at(&self, x: usize, y: usize) -> Complex<T> {
        ProjectionKernel::at(self, x, y)
    }

    fn projection_rank(&self) -> Option<usize> {
        Some(self.rank())
    }
}

/// A mixed kernel with its matrix materialised.
#[derive(Debug, Clone, PartialEq)]
pub struct MixedKernel<T: Real> {
    space: GroundSpace<T>,
    matrix: CMatrix<T>,
    projection_rank: Option<usize>,
}

impl<T: Real> MixedKernel<T> {
    pub fn new(spec: &MixedKernelSpec<T>) -> Self {
        let projection_rank = spec
            .lambdas
            .iter()
            .all(|l| *l == T::one() || *l == T::zero())
            .then(|| spec.lambdas.iter().filter(|l| **l == T::one()).count());
        Self {
            space: spec.space().clone(),
            matrix: spec.kernel_matrix(),
            projection_rank,
        }
    }

    pub fn matrix(&self) -> &CMatrix<T> {
        &self.matrix
    }
}

impl<T: Real> Kernel<T> for MixedKernel<T> {
    fn space(&self) -> &GroundSpace<T> {
        &self.space
    }

    fn at(&self, x: usize, y: usize) -> Complex<T> {
        self.matrix[(x, y)]
    }

    fn projection_rank(&self) -> Option<usize> {
        self.projection_rank
    }
}

fn check_points(points: &[usize], len: usize) -> Result<()> {
    PointConfiguration::new_in(points.to_vec(), len).map(|_| ())
}

/// `ρ_m(x_1, ..., x_m) = det(K(x_i, x_j))`.
pub fn correlation_function<T: Real, K: Kernel<T> + ?Sized>(k: &K, points: &[usize]) -> Result<T> {
    check_points(points, k.space().len())?;
    let m = points.len();
    if k.projection_rank().is_some_and(|r| m > r) {
        return Ok(T::zero());
    }
    let minor = CMatrix::<T>::from_fn(m, m, |i, j| k.at(points[i], points[j]));
    Ok(linalg::det(&minor).re)
}

/// `E[#(X ∩ B)] = Σ_{x ∈ B} K(x, x) μ(x)`.
pub fn expected_count<T: Real, K: Kernel<T> + ?Sized>(k: &K, set: &[usize]) -> Result<T> {
    check_points(set, k.space().len())?;
    Ok(set
        .iter()
        .fold(T::zero(), |a, &x| a + k.at(x, x).re * k.space().weight(x)))
}

fn check_disjoint(a: &[usize], b: &[usize], len: usize) -> Result<()> {
    check_points(a, len)?;
    check_points(b, len)?;
    if let Some(x) = a.iter().find(|x| b.contains(x)) {
        return Err(Error::InvalidArgument(format!("sets share the point {x}")));
    }
    Ok(())
}

/// `Cov(#(X ∩ A), #(X ∩ B)) = -Σ_{x∈A} Σ_{y∈B} |K(x, y)|² μ(x) μ(y)` for
/// disjoint `A`, `B`.
pub fn count_covariance<T: Real, K: Kernel<T> + ?Sized>(k: &K, a: &[usize], b: &[usize]) -> Result<T> {
    let space = k.space();
    check_disjoint(a, b, space.len())?;
    let mut acc = T::zero();
    for &x in a {
        for &y in b {
            acc -= k.at(x, y).norm_sqr() * space.weight(x) * space.weight(y);
        }
    }
    Ok(acc)
}

/// Same covariance through `∫∫ (ρ_2 - ρ_1 ⊗ ρ_1) dμ dμ`.
pub fn count_covariance_from_correlations<T: Real, K: Kernel<T> + ?Sized>(
    k: &K,
    a: &[usize],
    b: &[usize],
) -> Result<T> {
    let space = k.space();
    check_disjoint(a, b, space.len())?;
    let mut acc = T::zero();
    for &x in a {
        for &y in b {
            let rho2 = correlation_function(k, &[x, y])?;
            let r1 = correlation_function(k, &[x])? * correlation_function(k, &[y])?;
            acc += (rho2 - r1) * space.weight(x) * space.weight(y);
        }
    }
    Ok(acc)
}

/// A real symmetric kernel with entries in an exact field.
#[derive(Debug, Clone, PartialEq)]
pub struct ExactKernel<F: Field> {
    values: Vec<Vec<F>>,
    weights: Vec<F>,
}

impl<F: Field> ExactKernel<F> {
    pub fn new(values: Vec<Vec<F>>, weights: Vec<F>) -> Result<Self> {
        let n = weights.len();
        if values.len() != n || values.iter().any(|r| r.len() != n) {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: values.len(),
            });
        }
        Ok(Self { values, weights })
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn at(&self, x: usize, y: usize) -> F {
        self.values[x][y].clone()
    }

    pub fn expected_count(&self, set: &[usize]) -> F {
        set.iter()
            .fold(F::zero(), |a, &x| a + self.at(x, x) * self.weights[x].clone())
    }

    /// `-Σ Σ K(x, y) K(y, x) μ(x) μ(y)`
    pub fn count_covariance(&self, a: &[usize], b: &[usize]) -> Result<F> {
        check_disjoint(a, b, self.len())?;
        let mut acc = F::zero();
        for &x in a {
            for &y in b {
                acc = acc - self.at(x, y) * self.at(y, x) * self.weights[x].clone() * self.weights[y].clone();
            }
        }
        Ok(acc)
    }

    /// `∫∫ (K(x,x)K(y,y) - K(x,y)K(y,x) - K(x,x)K(y,y)) dμ dμ`, written out
    /// from the 2-point correlation function.
    pub fn count_covariance_from_correlations(&self, a: &[usize], b: &[usize]) -> Result<F> {
        check_disjoint(a, b, self.len())?;
        let mut acc = F::zero();
        for &x in a {
            for &y in b {
                let rho2 = self.at(x, x) * self.at(y, y) - self.at(x, y) * self.at(y, x);
                let r1 = self.at(x, x) * self.at(y, y);
                acc = acc + (rho2 - r1) * self.weights[x].clone() * self.weights[y].clone();
            }
        }
        Ok(acc)
    }
}

/// Projection kernel of the Walsh functions `w_k`, `k ∈ indices`, on the
/// `2^levels` dyadic cells of `[0, 1)` with Lebesgue weights, evaluated exactly.
pub fn walsh_exact_kernel<F: Field + FromPrimitive>(levels: u32, indices: &[usize]) -> Result<ExactKernel<F>> {
    let signs = walsh_signs(levels);
    let cells = signs.len();
    if let Some(&k) = indices.iter().find(|&&k| k >= cells) {
        return Err(Error::InvalidArgument(format!("Walsh index {k} needs more than {levels} levels")));
    }
    let int = |v: i64| F::from_i64(v).expect("small integers are representable");
    let weight = int(1) / int(cells as i64);
    let values = (0..cells)
        .map(|x| {
            (0..cells)
                .map(|y| int(indices.iter().map(|&k| signs[k][x] as i64 * signs[k][y] as i64).sum()))
                .collect()
        })
        .collect();
    ExactKernel::new(values, vec![weight; cells])
}

#[cfg(test)]
mod tests {
    use num_rational::Ratio;

    use super::*;
    use crate::ground_space::{random_orthonormal, walsh_family};
    use crate::slater::projection_kernel;

    fn walsh_pair(indices: [usize; 2]) -> OrthonormalFamily<f64> {
        let (space, fns) = walsh_family::<f64>(2);
        let chosen = indices.iter().map(|&k| fns[k].clone()).collect();
        OrthonormalFamily::new(space, chosen, 1e-12).unwrap()
    }

    #[test]
    fn configurations_are_sorted_sets() {
        let c = PointConfiguration::new(vec![3, 1, 2]).unwrap();
        assert_eq!(c.points(), &[1, 2, 3]);
        assert!(PointConfiguration::new(vec![1, 1]).is_err());
        assert!(PointConfiguration::new_in(vec![0, 4], 4).is_err());
        assert_eq!(c.key(), "[1,2,3]");
        let json = serde_json::to_string(&c).unwrap();
        assert_eq!(json, "[1,2,3]");
        assert!(serde_json::from_str::<PointConfiguration>("[2,2]").is_err());
    }

    #[test]
    fn one_point_correlation_is_the_diagonal() {
        let s = GroundSpace::<f64>::uniform(5).unwrap();
        let a = random_orthonormal(&s, 2, 4).unwrap();
        let k = projection_kernel(&a);
        for x in 0..5 {
            assert!((correlation_function(&k, &[x]).unwrap() - k.at(x, x).re).abs() < 1e-14);
        }
        assert_eq!(correlation_function(&k, &[0, 1, 2]).unwrap(), 0.0);
        assert!(correlation_function(&k, &[1, 1]).is_err());
        // the mixed-kernel route does not know the rank; the minor is still singular
        let spec = MixedKernelSpec::new(vec![1.0, 1.0], a).unwrap();
        let mk = MixedKernel::new(&spec);
        let mut generic = mk.clone();
        generic.projection_rank = None;
        assert!(correlation_function(&generic, &[0, 1, 2]).unwrap().abs() < 1e-10);
    }

    #[test]
    fn walsh_correlations_and_counts() {
        let k = projection_kernel(&walsh_pair([0, 1]));
        // cells 0 and 2 lie in opposite halves
        assert!((correlation_function(&k, &[0, 2]).unwrap() - 4.0).abs() < 1e-12);
        assert!((expected_count(&k, &[0, 1, 2, 3]).unwrap() - 2.0).abs() < 1e-12);
        assert_eq!(expected_count(&k, &[]).unwrap(), 0.0);
        assert!((expected_count(&k, &[0, 1]).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn walsh_covariances_float() {
        let k01 = projection_kernel(&walsh_pair([0, 1]));
        let k02 = projection_kernel(&walsh_pair([0, 2]));
        assert!((count_covariance(&k01, &[0], &[1]).unwrap() + 0.25).abs() < 1e-14);
        assert!(count_covariance(&k02, &[0], &[1]).unwrap().abs() < 1e-14);
        assert!((count_covariance_from_correlations(&k01, &[0], &[1]).unwrap() + 0.25).abs() < 1e-14);
        assert_eq!(count_covariance(&k01, &[], &[1]).unwrap(), 0.0);
        assert!(count_covariance(&k01, &[0, 1], &[1]).is_err());
    }

    #[test]
    fn walsh_covariances_exact() {
        let k01 = walsh_exact_kernel::<Ratio<i64>>(2, &[0, 1]).unwrap();
        let k02 = walsh_exact_kernel::<Ratio<i64>>(2, &[0, 2]).unwrap();
        assert_eq!(k01.count_covariance(&[0], &[1]).unwrap(), Ratio::new(-1, 4));
        assert_eq!(k02.count_covariance(&[0], &[1]).unwrap(), Ratio::from_integer(0));
        assert_eq!(k01.count_covariance_from_correlations(&[0], &[1]).unwrap(), Ratio::new(-1, 4));
        assert_eq!(k02.count_covariance_from_correlations(&[0], &[1]).unwrap(), Ratio::from_integer(0));
        assert_eq!(k01.expected_count(&[0, 1, 2, 3]), Ratio::from_integer(2));
        // Paley order would give the same pair
        assert!(walsh_exact_kernel::<Ratio<i64>>(2, &[4]).is_err());
    }

    #[test]
    fn mixed_spec_validation() {
        let s = GroundSpace::<f64>::uniform(4).unwrap();
        let a = random_orthonormal(&s, 2, 1).unwrap();
        assert!(MixedKernelSpec::new(vec![0.5], a.clone()).is_err());
        assert!(MixedKernelSpec::new(vec![0.5, 1.5], a.clone()).is_err());
        let spec = MixedKernelSpec::new(vec![0.2, 0.9], a).unwrap();
        assert_eq!(spec.descending_order(), vec![1, 0]);
        let k = MixedKernel::new(&spec);
        assert!((expected_count(&k, &[0, 1, 2, 3]).unwrap() - 1.1).abs() < 1e-12);
        assert_eq!(k.projection_rank(), None);
    }

    #[test]
    fn distribution_json_roundtrip() {
        let a = PointConfiguration::new(vec![0, 1]).unwrap();
        let b = PointConfiguration::new(vec![1, 2]).unwrap();
        let samples = vec![a.clone(), b.clone(), a.clone()];
        let d = ConfigurationDistribution::from_samples(&samples, 42).unwrap();
        let json = d.to_json().unwrap();
        assert!(json.contains("\"[0,1]\":2"));
        assert!(json.contains("\"seed\":42"));
        let back = ConfigurationDistribution::from_json(&json).unwrap();
        assert_eq!(back, d);
        let e = ConfigurationDistribution::exact(DiscreteDistribution::new([(a, 0.25), (b, 0.75)]).unwrap());
        assert_eq!(ConfigurationDistribution::from_json(&e.to_json().unwrap()).unwrap(), e);
    }
}
