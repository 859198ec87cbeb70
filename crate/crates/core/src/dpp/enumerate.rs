//! Exact laws by enumeration.
//!
//! [`tuple_law`] is the brute-force oracle: it measures the Slater state in
//! the position basis of every factor, assigning the ordered tuple
//! `(x_1, ..., x_n)` the mass `|det(ψ_i(x_j))|² / n! · Π μ(x_j)`.
//! [`projection_exact_distribution`] gets the same unordered law from the
//! `n × n` minors of the folded frame, `P(X = S) = |det V_S|²`.

use std::collections::BTreeMap;

use num_complex::Complex;

use super::{ConfigurationDistribution, MixedKernelSpec, PointConfiguration};
use crate::error::{Error, Result};
use crate::ground_space::OrthonormalFamily;
use crate::linalg::{self, CMatrix};
use crate::scalar::Real;
use crate::slater::{binomial, factorial, has_repeat};
use crate::tensor::digits;
use crate::transport::DiscreteDistribution;

/// Largest number of ordered tuples (or subsets) enumerated exactly.
pub const ENUMERATION_CAP: usize = 1_000_000;

fn checked_power(base: usize, exp: usize, cap: usize, what: &'static str) -> Result<usize> {
    let required = (base as u128).checked_pow(exp as u32).unwrap_or(u128::MAX);
    if required > cap as u128 {
        return Err(Error::CapExceeded {
            what,
            required,
            cap: cap as u128,
        });
    }
    Ok(required as usize)
}

/// The law of the ordered outcome tuple, dense over `E^n`.
#[derive(Debug, Clone, PartialEq)]
pub struct TupleLaw {
    space_len: usize,
    n: usize,
    probs: Vec<f64>,
}

impl TupleLaw {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn space_len(&self) -> usize {
        self.space_len
    }

    /// Masses indexed like [`crate::tensor`] basis states.
    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn index_of(&self, tuple: &[usize]) -> usize {
        tuple.iter().fold(0, |acc, &x| acc * self.space_len + x)
    }

    pub fn prob(&self, tuple: &[usize]) -> f64 {
        self.probs[self.index_of(tuple)]
    }

    pub fn tuples(&self) -> impl Iterator<Item = (Vec<usize>, f64)> + '_ {
        let dims = vec![self.space_len; self.n];
        self.probs.iter().enumerate().map(move |(idx, &p)| {
            let mut t = vec![0; dims.len()];
            digits(idx, &dims, &mut t);
            (t, p)
        })
    }

    pub fn total_mass(&self) -> f64 {
        self.probs.iter().sum()
    }

    /// Mass on tuples with a repeated point.
    pub fn diagonal_mass(&self) -> f64 {
        self.tuples().filter(|(t, _)| has_repeat(t)).map(|(_, p)| p).sum()
    }

    /// Largest `|P(t) - P(t ∘ π)|` over tuples and adjacent transpositions.
    pub fn exchangeability_defect(&self) -> f64 {
        let mut worst = 0.0f64;
        for (t, p) in self.tuples() {
            for i in 0..self.n.saturating_sub(1) {
                let mut s = t.clone();
                s.swap(i, i + 1);
                worst = worst.max((p - self.prob(&s)).abs());
            }
        }
        worst
    }

    pub fn to_distribution(&self) -> Result<DiscreteDistribution<Vec<usize>>> {
        DiscreteDistribution::new(self.tuples())
    }

    /// Forgets the order.
    pub fn configurations(&self) -> Result<ConfigurationDistribution> {
        let mut law: BTreeMap<PointConfiguration, f64> = BTreeMap::new();
        for (t, p) in self.tuples() {
            if has_repeat(&t) || p == 0.0 {
                continue;
            }
            *law.entry(PointConfiguration::new(t)?).or_insert(0.0) += p;
        }
        Ok(ConfigurationDistribution::exact(DiscreteDistribution::new(law)?))
    }
}

/// Brute-force law of the position measurement of the Slater state of `a`.
pub fn tuple_law<T: Real>(a: &OrthonormalFamily<T>) -> Result<TupleLaw> {
    tuple_law_capped(a, ENUMERATION_CAP)
}

pub fn tuple_law_capped<T: Real>(a: &OrthonormalFamily<T>, cap: usize) -> Result<TupleLaw> {
    let n = a.len();
    let e = a.space().len();
    let total = checked_power(e, n, cap, "ordered tuples E^n")?;
    let dims = vec![e; n];
    let nf: T = factorial(n);
    let mut probs = vec![0.0; total];
    let mut t = vec![0; n];
    let mut m = CMatrix::<T>::zeros(n, n);
    for (idx, slot) in probs.iter_mut().enumerate() {
        digits(idx, &dims, &mut t);
        if has_repeat(&t) {
            continue;
        }
        let mut mu = T::one();
        for j in 0..n {
            mu *= a.space().weight(t[j]);
            for i in 0..n {
                m[(i, j)] = a.functions()[i].at(t[j]);
            }
        }
        let d = linalg::det(&m);
        *slot = (d.norm_sqr() / nf * mu).into();
    }
    Ok(TupleLaw {
        space_len: e,
        n,
        probs,
    })
}

/// Brute force, order forgotten.
pub fn brute_force_configuration_distribution<T: Real>(a: &OrthonormalFamily<T>) -> Result<ConfigurationDistribution> {
    tuple_law(a)?.configurations()
}

/// Lexicographic `k`-subsets of `0..n`.
pub fn subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur: Vec<usize> = (0..k).collect();
    if k > n {
        return out;
    }
    loop {
        out.push(cur.clone());
        let Some(i) = (0..k).rev().find(|&i| cur[i] < n - k + i) else {
            break;
        };
        cur[i] += 1;
        for j in i + 1..k {
            cur[j] = cur[j - 1] + 1;
        }
    }
    out
}

/// Exact unordered law of the projection process of `a`, from the minors of
/// the folded frame.
pub fn projection_exact_distribution<T: Real>(a: &OrthonormalFamily<T>) -> Result<ConfigurationDistribution> {
    projection_exact_distribution_capped(a, ENUMERATION_CAP)
}

pub fn projection_exact_distribution_capped<T: Real>(
    a: &OrthonormalFamily<T>,
    cap: usize,
) -> Result<ConfigurationDistribution> {
    let law = projection_law(a, cap)?;
    Ok(ConfigurationDistribution::exact(DiscreteDistribution::new(law)?))
}

fn projection_law<T: Real>(a: &OrthonormalFamily<T>, cap: usize) -> Result<Vec<(PointConfiguration, f64)>> {
    let n = a.len();
    let e = a.space().len();
    let count: f64 = binomial::<f64>(e, n);
    if count > cap as f64 {
        return Err(Error::CapExceeded {
            what: "n-subsets of E",
            required: count as u128,
            cap: cap as u128,
        });
    }
    let v = a.weighted_matrix();
    let mut out = Vec::new();
    for s in subsets(e, n) {
        let minor = CMatrix::<T>::from_fn(n, n, |i, j| v[(s[i], j)]);
        let p: f64 = linalg::log_det(&minor).abs_sqr().into();
        if p > 0.0 {
            out.push((PointConfiguration::new(s)?, p));
        }
    }
    Ok(out)
}

/// Exact law of the mixed process: the Bernoulli mixture over index sets
/// `I` of the projection processes on `span{ψ_i : i ∈ I}`.
pub fn mixed_exact_distribution<T: Real>(spec: &MixedKernelSpec<T>) -> Result<ConfigurationDistribution> {
    let k = spec.len();
    if k > 20 {
        return Err(Error::CapExceeded {
            what: "eigenvalue indices for exact mixture enumeration",
            required: k as u128,
            cap: 20,
        });
    }
    let lambdas: Vec<f64> = spec.lambdas().iter().map(|l| (*l).into()).collect();
    let mut law: BTreeMap<PointConfiguration, f64> = BTreeMap::new();
    for mask in 0u32..(1u32 << k) {
        let idx: Vec<usize> = (0..k).filter(|i| mask >> i & 1 == 1).collect();
        let weight: f64 = (0..k)
            .map(|i| if mask >> i & 1 == 1 { lambdas[i] } else { 1.0 - lambdas[i] })
            .product();
        if weight == 0.0 {
            continue;
        }
        if idx.is_empty() {
            *law.entry(PointConfiguration::empty()).or_insert(0.0) += weight;
            continue;
        }
        for (c, p) in projection_law(&spec.family().subfamily(&idx), ENUMERATION_CAP)? {
            *law.entry(c).or_insert(0.0) += weight * p;
        }
    }
    Ok(ConfigurationDistribution::exact(DiscreteDistribution::new(law)?))
}

/// `P(S ⊆ X)` under `law`.
pub fn inclusion_probability(law: &ConfigurationDistribution, set: &[usize]) -> f64 {
    law.law()
        .iter()
        .filter(|(c, _)| set.iter().all(|&x| c.contains(x)))
        .map(|(_, p)| p)
        .sum()
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    fn rec(cur: &mut Vec<usize>, used: &mut Vec<bool>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == used.len() {
            out.push(cur.clone());
            return;
        }
        for i in 0..used.len() {
            if !used[i] {
                used[i] = true;
                cur.push(i);
                rec(cur, used, out);
                cur.pop();
                used[i] = false;
            }
        }
    }
    let mut out = Vec::new();
    rec(&mut Vec::new(), &mut vec![false; n], &mut out);
    out
}

/// `(1/(n-m)!) Σ_{τ ∈ S_n} det(conj ψ_{τ(i)}(x_i) ψ_{τ(i)}(x_j))_{i,j ≤ m}`,
/// which equals `det K(x_i, x_j)` for distinct points.
pub fn final_claim_lhs<T: Real>(a: &OrthonormalFamily<T>, points: &[usize]) -> Result<T> {
    let n = a.len();
    let m = points.len();
    if m > n {
        return Err(Error::InvalidArgument(format!("{m} points for {n} functions")));
    }
    let f = a.functions();
    let mut acc = Complex::new(T::zero(), T::zero());
    for tau in permutations(n) {
        let mat = CMatrix::<T>::from_fn(m, m, |i, j| f[tau[i]].at(points[i]).conj() * f[tau[i]].at(points[j]));
        acc += linalg::det(&mat);
    }
    Ok(acc.re / factorial::<T>(n - m))
}
