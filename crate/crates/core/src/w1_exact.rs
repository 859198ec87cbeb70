//! Quantum Wasserstein-1 distance at desk scale.
//!
//! The distance between states on `H_1 ⊗ ... ⊗ H_n` is the value of
//!
//! ```text
//! minimise   Σ_i (1/2) tr|X_i|
//! subject to Σ_i X_i = ρ - σ,   tr_i X_i = 0   (X_i Hermitian)
//! ```
//!
//! solved here by over-relaxed ADMM. The nuclear-norm prox is eigenvalue
//! soft-thresholding; the affine set `C` is projected onto in closed form.
//! Writing `Q_i Y = (1/d_i) 1_i ⊗ tr_i Y` and `P_i = 1 - Q_i`,
//!
//! ```text
//! Π_C(Y)_i = P_i(Y_i + Λ),   Λ = T^+ (Δ - Σ_i P_i Y_i),   T = n - Σ_i Q_i.
//! ```
//!
//! The `Q_i` are commuting projections, so `T^+` is a polynomial in them:
//! `T^+ = Σ_S c(|S|) Q_S` with `c(k) = Σ_{j ≤ k, j ≠ n} C(k,j) (-1)^{k-j} / (n-j)`.
//!
//! Lower bounds come from two kinds of dual witnesses: the scaled ADMM
//! multiplier, which is a feasible point of the dual problem after a
//! projection and a rescaling, and classical Hamming-Lipschitz observables
//! measured in a product basis.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ground_space::OrthonormalFamily;
use crate::linalg::{self, eigen_shrink, half_trace_norm, hermitian_operator_norm, hermitize, kron, CMatrix};
use crate::scalar::{creal, Real};
use crate::slater::{full_state_vector, DensityOperator, MatrixDocument};
use crate::tensor::{digits, identity_component, identity_component_on, total_dim};
use crate::transport::{hamming_w1, DiscreteDistribution};
use crate::w1_bounds::w1_upper_slater;

pub use crate::tensor::partial_trace;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct W1Config {
    pub rho_penalty: f64,
    pub relaxation: f64,
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_iter: usize,
    /// Rebalance the penalty every 50 iterations when one residual exceeds
    /// the other tenfold.
    pub adaptive_penalty: bool,
    /// Also stop once the certified gap `value - lower bound` is this small;
    /// checked every 50 iterations.
    pub gap_tol: f64,
    /// Largest total dimension accepted.
    pub dim_cap: usize,
}

impl Default for W1Config {
    fn default() -> Self {
        Self {
            rho_penalty: 1.0,
            relaxation: 1.7,
            abs_tol: 1e-8,
            rel_tol: 1e-6,
            max_iter: 50_000,
            adaptive_penalty: true,
            gap_tol: 1e-5,
            dim_cap: 64,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct W1Certificate<T: Real> {
    /// `Σ_i (1/2) tr|X_i|` at the returned feasible point.
    pub value: T,
    pub primal_parts: Vec<CMatrix<T>>,
    /// `c_i = (1/2) tr|X_i|`
    pub site_costs: Vec<T>,
    /// Best lower bound among the dual witnesses.
    pub dual_witness_value: T,
    pub admm_lower_bound: T,
    pub classical_lower_bound: T,
    pub gap: T,
    /// `max |Σ_i X_i - (ρ - σ)|`
    pub sum_residual: T,
    /// `max_i max |tr_i X_i|`
    pub partial_trace_residual: T,
    pub admm_primal_residual: T,
    pub admm_dual_residual: T,
    pub iterations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct W1CertificateDocument {
    pub value: f64,
    pub site_costs: Vec<f64>,
    pub dual_witness_value: f64,
    pub admm_lower_bound: f64,
    pub classical_lower_bound: f64,
    pub gap: f64,
    pub sum_residual: f64,
    pub partial_trace_residual: f64,
    pub admm_primal_residual: f64,
    pub admm_dual_residual: f64,
    pub iterations: usize,
    pub primal_parts: Vec<MatrixDocument>,
}

impl<T: Real> W1Certificate<T> {
    pub fn to_document(&self) -> W1CertificateDocument {
        W1CertificateDocument {
            value: self.value.into(),
            site_costs: self.site_costs.iter().map(|c| (*c).into()).collect(),
            dual_witness_value: self.dual_witness_value.into(),
            admm_lower_bound: self.admm_lower_bound.into(),
            classical_lower_bound: self.classical_lower_bound.into(),
            gap: self.gap.into(),
            sum_residual: self.sum_residual.into(),
            partial_trace_residual: self.partial_trace_residual.into(),
            admm_primal_residual: self.admm_primal_residual.into(),
            admm_dual_residual: self.admm_dual_residual.into(),
            iterations: self.iterations,
            primal_parts: self.primal_parts.iter().map(MatrixDocument::from_matrix).collect(),
        }
    }
}

/// The affine set `{Z : Σ Z_i = Δ, tr_i Z_i = 0}` and its projection.
struct AffineSet<'a, T: Real> {
    dims: &'a [usize],
    delta: CMatrix<T>,
    /// `(S, c(|S|))` for every nonempty proper subset plus the empty set
    terms: Vec<(Vec<usize>, T)>,
}

impl<'a, T: Real> AffineSet<'a, T> {
    fn new(dims: &'a [usize], delta: CMatrix<T>) -> Self {
        let n = dims.len();
        let binom = |k: usize, j: usize| -> f64 { (0..j).fold(1.0, |a, i| a * (k - i) as f64 / (i + 1) as f64) };
        let coeff: Vec<f64> = (0..=n)
            .map(|k| {
                (0..=k)
                    .filter(|&j| j != n)
                    .map(|j| binom(k, j) * if (k - j) % 2 == 0 { 1.0 } else { -1.0 } / (n - j) as f64)
                    .sum()
            })
            .collect();
        let terms = (0u32..(1 << n))
            .map(|mask| {
                let s: Vec<usize> = (0..n).filter(|i| mask >> i & 1 == 1).collect();
                let c = T::lit(coeff[s.len()]);
                (s, c)
            })
            .filter(|(_, c)| *c != T::zero())
            .collect();
        Self { dims, delta, terms }
    }

    fn p(&self, y: &CMatrix<T>, site: usize) -> Result<CMatrix<T>> {
        Ok(y - identity_component(y, self.dims, site)?)
    }

    fn t_pinv(&self, r: &CMatrix<T>) -> Result<CMatrix<T>> {
        let mut out = CMatrix::<T>::zeros(r.nrows(), r.ncols());
        for (s, c) in &self.terms {
            out += identity_component_on(r, self.dims, s)? * creal(*c);
        }
        Ok(out)
    }

    /// Projection onto the affine set with right-hand side `delta`, or onto
    /// its direction space when `homogeneous`.
    fn project(&self, y: &[CMatrix<T>], homogeneous: bool) -> Result<Vec<CMatrix<T>>> {
        let mut r = if homogeneous {
            CMatrix::<T>::zeros(self.delta.nrows(), self.delta.ncols())
        } else {
            self.delta.clone()
        };
        for (i, yi) in y.iter().enumerate() {
            r -= self.p(yi, i)?;
        }
        let lambda = self.t_pinv(&r)?;
        y.iter()
            .enumerate()
            .map(|(i, yi)| Ok(hermitize(&self.p(&(yi + &lambda), i)?)))
            .collect()
    }
}

fn frob<T: Real>(parts: &[CMatrix<T>]) -> T {
    parts.iter().fold(T::zero(), |a, m| a + m.norm_squared()).sqrt()
}

fn feasibility<T: Real>(parts: &[CMatrix<T>], delta: &CMatrix<T>, dims: &[usize]) -> Result<(T, T)> {
    let mut sum = -delta.clone();
    let mut worst_partial = T::zero();
    for (i, x) in parts.iter().enumerate() {
        sum += x;
        worst_partial = worst_partial.max(linalg::max_abs(&partial_trace(x, dims, &[i])?));
    }
    Ok((linalg::max_abs(&sum), worst_partial))
}

fn check_pair<T: Real>(rho: &DensityOperator<T>, sigma: &DensityOperator<T>, cap: usize) -> Result<()> {
    if rho.dims() != sigma.dims() {
        return Err(Error::InvalidArgument("states on different tensor spaces".into()));
    }
    let d = total_dim(rho.dims());
    if d > cap {
        return Err(Error::CapExceeded {
            what: "total dimension for the W1 solver",
            required: d as u128,
            cap: cap as u128,
        });
    }
    Ok(())
}

/// Dual bound from the scaled multiplier: `W = -ρU`, moved into the
/// orthogonal complement of the direction space and scaled into the unit ball
/// of the dual norm, evaluated against the feasible point `z`.
fn admm_dual_bound<T: Real>(set: &AffineSet<'_, T>, z: &[CMatrix<T>], u: &[CMatrix<T>], rho_pen: T) -> Result<T> {
    let w: Vec<CMatrix<T>> = u.iter().map(|ui| ui * creal(-rho_pen)).collect();
    let along = set.project(&w, true)?;
    let w: Vec<CMatrix<T>> = w.iter().zip(&along).map(|(a, b)| hermitize(&(a - b))).collect();
    let worst = w.iter().fold(T::zero(), |a, wi| a.max(hermitian_operator_norm(wi)));
    let scale = T::one() / (T::lit(2.0) * worst).max(T::one());
    Ok(w
        .iter()
        .zip(z)
        .fold(T::zero(), |a, (wi, zi)| a + (wi * zi).trace().re)
        * scale)
}

/// Solves the primal problem and certifies the value from below.
pub fn w1_exact<T: Real>(rho: &DensityOperator<T>, sigma: &DensityOperator<T>, config: &W1Config) -> Result<W1Certificate<T>> {
    check_pair(rho, sigma, config.dim_cap)?;
    let dims = rho.dims();
    let n = dims.len();
    let delta = hermitize(&(rho.matrix() - sigma.matrix()));
    let classical = classical_lower_bound(rho, sigma)?;

    if n == 1 {
        // X_1 = ρ - σ is the only feasible point
        let value = half_trace_norm(&delta);
        let (sum_res, part_res) = feasibility(std::slice::from_ref(&delta), &delta, dims)?;
        return Ok(W1Certificate {
            value,
            primal_parts: vec![delta],
            site_costs: vec![value],
            dual_witness_value: value,
            admm_lower_bound: value,
            classical_lower_bound: classical,
            gap: T::zero(),
            sum_residual: sum_res,
            partial_trace_residual: part_res,
            admm_primal_residual: T::zero(),
            admm_dual_residual: T::zero(),
            iterations: 0,
        });
    }

    let set = AffineSet::new(dims, delta.clone());
    let mut rho_pen = T::lit(config.rho_penalty);
    let alpha = T::lit(config.relaxation);
    let two = T::lit(2.0);
    let d = delta.nrows();
    let sqrt_p = T::from_count(n * d * d).sqrt();
    let (abs_tol, rel_tol) = (T::lit(config.abs_tol), T::lit(config.rel_tol));

    let zeros = vec![CMatrix::<T>::zeros(d, d); n];
    let mut z = set.project(&zeros, false)?;
    let mut u = zeros.clone();
    let mut x = zeros;
    let (mut r_norm, mut s_norm) = (T::zero(), T::zero());
    let mut iterations = 0;
    let mut converged = false;
    for it in 1..=config.max_iter {
        iterations = it;
        for i in 0..n {
            x[i] = eigen_shrink(&(&z[i] - &u[i]), T::one() / (two * rho_pen));
        }
        let v: Vec<CMatrix<T>> = (0..n)
            .map(|i| &x[i] * creal(alpha) + &z[i] * creal(T::one() - alpha) + &u[i])
            .collect();
        let z_new = set.project(&v, false)?;
        for i in 0..n {
            u[i] = &v[i] - &z_new[i];
        }
        let diff_xz: Vec<CMatrix<T>> = (0..n).map(|i| &x[i] - &z_new[i]).collect();
        let diff_z: Vec<CMatrix<T>> = (0..n).map(|i| &z_new[i] - &z[i]).collect();
        r_norm = frob(&diff_xz);
        s_norm = rho_pen * frob(&diff_z);
        z = z_new;
        let eps_pri = sqrt_p * abs_tol + rel_tol * frob(&x).max(frob(&z));
        let eps_dual = sqrt_p * abs_tol + rel_tol * rho_pen * frob(&u);
        if r_norm <= eps_pri && s_norm <= eps_dual {
            converged = true;
            break;
        }
        if it % 50 == 0 {
            let value = z.iter().fold(T::zero(), |a, zi| a + half_trace_norm(zi));
            let lower = admm_dual_bound(&set, &z, &u, rho_pen)?.max(classical);
            if value - lower <= T::lit(config.gap_tol) {
                converged = true;
                break;
            }
        }
        if config.adaptive_penalty && it % 50 == 0 {
            // u is the scaled dual y / ρ, so it moves against ρ
            let ten = T::lit(10.0);
            let factor = if r_norm > ten * s_norm {
                two
            } else if s_norm > ten * r_norm {
                T::one() / two
            } else {
                T::one()
            };
            if factor != T::one() {
                rho_pen *= factor;
                for ui in u.iter_mut() {
                    *ui /= creal(factor);
                }
            }
        }
    }
    if !converged {
        return Err(Error::NotConverged {
            iterations,
            primal_residual: r_norm.into(),
            dual_residual: s_norm.into(),
        });
    }

    let site_costs: Vec<T> = z.iter().map(half_trace_norm).collect();
    let value = site_costs.iter().fold(T::zero(), |a, c| a + *c);
    let admm_lower = admm_dual_bound(&set, &z, &u, rho_pen)?;

    let dual = admm_lower.max(classical);
    let (sum_res, part_res) = feasibility(&z, &delta, dims)?;
    Ok(W1Certificate {
        value,
        primal_parts: z,
        site_costs,
        dual_witness_value: dual,
        admm_lower_bound: admm_lower,
        classical_lower_bound: classical,
        gap: value - dual,
        sum_residual: sum_res,
        partial_trace_residual: part_res,
        admm_primal_residual: r_norm,
        admm_dual_residual: s_norm,
        iterations,
    })
}

/// A sharp product measurement: site `i` is measured in the orthonormal
/// basis given by the columns of `bases[i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProductMeasurement<T: Real> {
    dims: Vec<usize>,
    bases: Vec<CMatrix<T>>,
}

impl<T: Real> ProductMeasurement<T> {
    pub fn computational(dims: Vec<usize>) -> Self {
        let bases = dims.iter().map(|&d| CMatrix::<T>::identity(d, d)).collect();
        Self { dims, bases }
    }

    pub fn new(bases: Vec<CMatrix<T>>) -> Result<Self> {
        for b in &bases {
            if !b.is_square() || linalg::max_abs_diff_identity(&(b.adjoint() * b)) > T::tol(1e-10) {
                return Err(Error::InvalidArgument("measurement basis is not unitary".into()));
            }
        }
        Ok(Self {
            dims: bases.iter().map(|b| b.nrows()).collect(),
            bases,
        })
    }

    /// The `(|0⟩ ± |1⟩)/√2` basis on every qubit.
    pub fn hadamard(n: usize) -> Self {
        let h = T::one() / T::lit(2.0).sqrt();
        let b = CMatrix::<T>::from_fn(2, 2, |i, j| creal(if i == 1 && j == 1 { -h } else { h }));
        Self {
            dims: vec![2; n],
            bases: vec![b; n],
        }
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    fn unitary(&self) -> CMatrix<T> {
        self.bases
            .iter()
            .fold(CMatrix::<T>::identity(1, 1), |acc, b| kron(&acc, b))
    }

    /// Outcome probabilities, indexed like the tensor basis.
    pub fn outcome_probabilities(&self, rho: &DensityOperator<T>) -> Result<Vec<f64>> {
        if rho.dims() != self.dims.as_slice() {
            return Err(Error::InvalidArgument("measurement and state dims differ".into()));
        }
        let u = self.unitary();
        let m = u.adjoint() * rho.matrix() * &u;
        Ok((0..m.nrows()).map(|i| Into::<f64>::into(m[(i, i)].re).max(0.0)).collect())
    }

    pub fn outcome_law(&self, rho: &DensityOperator<T>) -> Result<DiscreteDistribution<Vec<usize>>> {
        let p = self.outcome_probabilities(rho)?;
        let total: f64 = p.iter().sum();
        let mut t = vec![0; self.dims.len()];
        let entries = p.iter().enumerate().map(|(idx, &m)| {
            digits(idx, &self.dims, &mut t);
            (t.clone(), m / total)
        });
        DiscreteDistribution::new(entries.collect::<Vec<_>>())
    }

    /// `H = Σ_x f(x) Π_x`.
    pub fn observable(&self, f: &HammingLipschitzFn) -> Result<CMatrix<T>> {
        if f.dims != self.dims {
            return Err(Error::InvalidArgument("function and measurement dims differ".into()));
        }
        let u = self.unitary();
        let diag = CMatrix::<T>::from_diagonal(&nalgebra::DVector::from_iterator(
            f.values.len(),
            f.values.iter().map(|&v| creal(T::lit(v))),
        ));
        Ok(hermitize(&(&u * diag * u.adjoint())))
    }
}

/// A real function on the outcome grid `Π_i {0, ..., d_i - 1}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HammingLipschitzFn {
    dims: Vec<usize>,
    values: Vec<f64>,
}

impl HammingLipschitzFn {
    pub fn new(dims: Vec<usize>, values: Vec<f64>) -> Result<Self> {
        if values.len() != total_dim(&dims) {
            return Err(Error::DimensionMismatch {
                expected: total_dim(&dims),
                found: values.len(),
            });
        }
        Ok(Self { dims, values })
    }

    pub fn from_fn(dims: Vec<usize>, f: impl Fn(&[usize]) -> f64) -> Self {
        let mut t = vec![0; dims.len()];
        let values = (0..total_dim(&dims))
            .map(|idx| {
                digits(idx, &dims, &mut t);
                f(&t)
            })
            .collect();
        Self { dims, values }
    }

    /// Number of coordinates equal to 1.
    pub fn count_ones(dims: Vec<usize>) -> Self {
        Self::from_fn(dims, |t| t.iter().filter(|&&x| x == 1).count() as f64)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// First pair of outcomes differing in one coordinate whose values differ
    /// by more than 1.
    pub fn lipschitz_violation(&self) -> Option<(usize, usize, f64)> {
        let n = self.dims.len();
        let mut stride = vec![1usize; n];
        for i in (0..n.saturating_sub(1)).rev() {
            stride[i] = stride[i + 1] * self.dims[i + 1];
        }
        let mut t = vec![0; n];
        for a in 0..self.values.len() {
            digits(a, &self.dims, &mut t);
            for i in 0..n {
                for other in t[i] + 1..self.dims[i] {
                    let b = a + (other - t[i]) * stride[i];
                    let gap = (self.values[a] - self.values[b]).abs();
                    if gap > 1.0 + 1e-12 {
                        return Some((a, b, gap));
                    }
                }
            }
        }
        None
    }
}

/// `tr[H (ρ - σ)]` with `H = f ∘ Π`, a lower bound on the W1 distance for
/// any `f` that is 1-Lipschitz in the Hamming distance.
pub fn dual_witness_from_classical<T: Real>(
    f: &HammingLipschitzFn,
    pvm: &ProductMeasurement<T>,
    rho: &DensityOperator<T>,
    sigma: &DensityOperator<T>,
) -> Result<f64> {
    if let Some((a, b, gap)) = f.lipschitz_violation() {
        return Err(Error::NotLipschitz { a, b, gap });
    }
    let p = pvm.outcome_probabilities(rho)?;
    let q = pvm.outcome_probabilities(sigma)?;
    if p.len() != f.values.len() {
        return Err(Error::DimensionMismatch {
            expected: p.len(),
            found: f.values.len(),
        });
    }
    Ok(f.values.iter().zip(p.iter().zip(&q)).map(|(v, (a, b))| v * (a - b)).sum())
}

/// Hamming `W1` between the outcome laws of a product measurement.
pub fn classical_w1<T: Real>(pvm: &ProductMeasurement<T>, rho: &DensityOperator<T>, sigma: &DensityOperator<T>) -> Result<f64> {
    Ok(hamming_w1(&pvm.outcome_law(rho)?, &pvm.outcome_law(sigma)?)?.cost)
}

/// Best classical lift among the computational basis and, on qubits, the
/// Hadamard basis.
fn classical_lower_bound<T: Real>(rho: &DensityOperator<T>, sigma: &DensityOperator<T>) -> Result<T> {
    let dims = rho.dims().to_vec();
    let mut best = classical_w1(&ProductMeasurement::computational(dims.clone()), rho, sigma)?;
    if dims.iter().all(|&d| d == 2) {
        best = best.max(classical_w1(&ProductMeasurement::hadamard(dims.len()), rho, sigma)?);
    }
    // the exact transport value carries rounding at the 1e-12 level
    Ok(T::lit((best - 1e-11).max(0.0)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RdmRow {
    pub k: usize,
    pub w1: f64,
    /// `W1 / k`
    pub value: f64,
    pub gap: f64,
    pub iterations: usize,
}

/// `(1/k) W1(Γ_A^(k), Γ_B^(k))` for `k = 1, ..., n`, on the normalised
/// reduced states of the two Slater states.
pub fn rdm_monotonicity_check<T: Real>(
    a: &OrthonormalFamily<T>,
    b: &OrthonormalFamily<T>,
    config: &W1Config,
) -> Result<Vec<RdmRow>> {
    if a.len() != b.len() || a.space() != b.space() {
        return Err(Error::InvalidArgument("families must share space and size".into()));
    }
    let n = a.len();
    let sa = full_state_vector(a)?;
    let sb = full_state_vector(b)?;
    (1..=n)
        .map(|k| {
            let ra = sa.reduced(k)?;
            let rb = sb.reduced(k)?;
            let cert = w1_exact(&ra, &rb, config)?;
            let w1: f64 = cert.value.into();
            Ok(RdmRow {
                k,
                w1,
                value: w1 / k as f64,
                gap: cert.gap.into(),
                iterations: cert.iterations,
            })
        })
        .collect()
}

/// `value_k <= value_{k+1} + tol` for every consecutive pair.
pub fn is_monotone(rows: &[RdmRow], tol: f64) -> bool {
    rows.windows(2).all(|w| w[0].value <= w[1].value + tol)
}

/// The Slater-pair sandwich `trace <= W1 <= w1_upper <= n trace`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SandwichReport {
    pub n: usize,
    pub trace_distance: f64,
    pub w1: f64,
    pub w1_lower: f64,
    pub w1_upper: f64,
    pub n_times_trace: f64,
}

impl SandwichReport {
    pub fn holds(&self, tol: f64) -> bool {
        self.trace_distance <= self.w1 + tol
            && self.w1 <= self.w1_upper + tol
            && self.w1_upper <= self.n_times_trace + tol
    }
}

pub fn slater_sandwich<T: Real>(a: &OrthonormalFamily<T>, b: &OrthonormalFamily<T>, config: &W1Config) -> Result<SandwichReport> {
    let m = crate::slater::overlap_matrix(a, b)?;
    let rho = full_state_vector(a)?.density()?;
    let sigma = full_state_vector(b)?.density()?;
    let cert = w1_exact(&rho, &sigma, config)?;
    let trace: f64 = rho.trace_distance(&sigma)?.into();
    Ok(SandwichReport {
        n: a.len(),
        trace_distance: trace,
        w1: cert.value.into(),
        w1_lower: cert.dual_witness_value.into(),
        w1_upper: w1_upper_slater(&m).into(),
        n_times_trace: a.len() as f64 * trace,
    })
}

/// Two qubits: the maximally mixed state against `|++⟩`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProductBasisRemark {
    pub trace_distance: f64,
    pub w1: f64,
    /// Hamming `W1` between computational-basis outcome laws.
    pub computational_basis_w1: f64,
    /// Same in the Hadamard basis, where `|++⟩` is deterministic.
    pub hadamard_basis_w1: f64,
    pub eigenvalues: Vec<f64>,
}

pub fn product_basis_remark(config: &W1Config) -> Result<ProductBasisRemark> {
    let dims = vec![2, 2];
    let rho = DensityOperator::<f64>::maximally_mixed(dims.clone());
    let plus = nalgebra::DVector::from_element(4, creal(0.5));
    let sigma = DensityOperator::pure(dims.clone(), &plus)?;
    let cert = w1_exact(&rho, &sigma, config)?;
    let delta = rho.matrix() - sigma.matrix();
    Ok(ProductBasisRemark {
        trace_distance: rho.trace_distance(&sigma)?,
        w1: cert.value,
        computational_basis_w1: classical_w1(&ProductMeasurement::computational(dims), &rho, &sigma)?,
        hadamard_basis_w1: classical_w1(&ProductMeasurement::hadamard(2), &rho, &sigma)?,
        eigenvalues: linalg::hermitian_eigenvalues(&delta),
    })
}

/// Ordered keys of [`W1Config`] accepted from configuration files.
pub fn apply_config_keys(config: &mut W1Config, keys: &BTreeMap<String, String>) -> Result<()> {
    let parse = |k: &str, v: &str| -> Result<f64> {
        v.parse::<f64>()
            .map_err(|_| Error::InvalidArgument(format!("{k}: cannot parse {v:?} as a number")))
    };
    for (k, v) in keys {
        match k.as_str() {
            "w1.rho_penalty" => config.rho_penalty = parse(k, v)?,
            "w1.relaxation" => config.relaxation = parse(k, v)?,
            "w1.tol" => config.abs_tol = parse(k, v)?,
            "w1.rel_tol" => config.rel_tol = parse(k, v)?,
            "w1.max_iter" => config.max_iter = parse(k, v)? as usize,
            "w1.gap_tol" => config.gap_tol = parse(k, v)?,
            "w1.adaptive_penalty" => {
                config.adaptive_penalty = v
                    .parse::<bool>()
                    .map_err(|_| Error::InvalidArgument(format!("{k}: expected true or false, got {v:?}")))?
            }
            "w1.dim_cap" => config.dim_cap = parse(k, v)? as usize,
            _ => {}
        }
    }
    if !(config.rho_penalty > 0.0 && config.relaxation > 0.0 && config.relaxation < 2.0) {
        return Err(Error::InvalidArgument("w1.rho_penalty must be > 0 and w1.relaxation in (0, 2)".into()));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ground_space::{random_orthonormal, GroundSpace};
    use crate::linalg::{gaussian_matrix, haar_unitary};
    use crate::rng::stream;
    use crate::slater::{overlap_matrix, projection_kernel};
    use rand::Rng;

    fn random_density<R: Rng>(d: usize, rng: &mut R) -> CMatrix<f64> {
        crate::linalg::random_density_matrix(d, rng)
    }

    fn random_pure<R: Rng>(d: usize, rng: &mut R) -> CMatrix<f64> {
        let u = haar_unitary::<f64, _>(d, rng);
        let v = u.column(0).clone_owned();
        &v * v.adjoint()
    }

    #[test]
    fn t_inverse_coefficients() {
        let dims = [2, 2];
        let set = AffineSet::<f64>::new(&dims, CMatrix::zeros(4, 4));
        // n = 2: c(0) = 1/2, c(1) = -1/2 + 1 = 1/2, c(2) = 1/2 - 2 + 0 = ... (j = 2 excluded)
        let c: BTreeMap<usize, f64> = set.terms.iter().map(|(s, c)| (s.len(), *c)).collect();
        assert!((c[&0] - 0.5).abs() < 1e-15);
        assert!((c[&1] - 0.5).abs() < 1e-15);
        // check T T^+ = 1 on a traceless operator
        let mut rng = stream(1, 0);
        let y = hermitize(&gaussian_matrix::<f64, _>(8, 8, &mut rng));
        let y = &y - CMatrix::<f64>::identity(8, 8) * (y.trace() / 8.0);
        let dims3 = [2, 2, 2];
        let set3 = AffineSet::<f64>::new(&dims3, CMatrix::zeros(8, 8));
        let x = set3.t_pinv(&y).unwrap();
        let mut tx = &x * creal(3.0);
        for i in 0..3 {
            tx -= identity_component(&x, &dims3, i).unwrap();
        }
        assert!(linalg::max_abs(&(tx - y)) < 1e-12);
    }

    #[test]
    fn projection_is_feasible_and_idempotent() {
        let mut rng = stream(2, 0);
        let dims = [2, 3];
        let rho = random_density(6, &mut rng);
        let sigma = random_density(6, &mut rng);
        let delta = hermitize(&(rho - sigma));
        let set = AffineSet::new(&dims, delta.clone());
        let y: Vec<_> = (0..2).map(|_| hermitize(&gaussian_matrix::<f64, _>(6, 6, &mut rng))).collect();
        let z = set.project(&y, false).unwrap();
        let (s, p) = feasibility(&z, &delta, &dims).unwrap();
        assert!(s < 1e-12 && p < 1e-12);
        let zz = set.project(&z, false).unwrap();
        assert!(frob(&[&zz[0] - &z[0], &zz[1] - &z[1]]) < 1e-12);
        // the residual of a projection is orthogonal to the direction space
        let w: Vec<_> = (0..2).map(|i| &y[i] - &z[i]).collect();
        let dir = set.project(&y, true).unwrap();
        let inner: f64 = (0..2).map(|i| (w[i].adjoint() * &dir[i]).trace().re).sum();
        assert!(inner.abs() < 1e-10);
    }

    #[test]
    fn equal_states_have_zero_distance() {
        let mut rng = stream(3, 0);
        let r = DensityOperator::new(vec![2, 2], random_density(4, &mut rng)).unwrap();
        let c = w1_exact(&r, &r, &W1Config::default()).unwrap();
        assert!(c.value.abs() < 1e-10);
    }

    #[test]
    fn product_with_common_factor_is_single_site_trace_distance() {
        let mut rng = stream(4, 0);
        for _ in 0..3 {
            let r1 = random_density(2, &mut rng);
            let s1 = random_density(2, &mut rng);
            let w = random_density(2, &mut rng);
            let rho = DensityOperator::new(vec![2, 2], kron(&r1, &w)).unwrap();
            let sigma = DensityOperator::new(vec![2, 2], kron(&s1, &w)).unwrap();
            let c = w1_exact(&rho, &sigma, &W1Config::default()).unwrap();
            let want = half_trace_norm(&(&r1 - &s1));
            assert!((c.value - want).abs() < 1e-4, "{} vs {want}", c.value);
            assert!(c.sum_residual < 1e-8 && c.partial_trace_residual < 1e-8);
            assert!(c.dual_witness_value <= c.value + 1e-9);
            assert!(c.gap < 1e-3, "gap {}", c.gap);
        }
    }

    #[test]
    fn random_pure_pairs_are_bracketed() {
        let mut rng = stream(5, 0);
        for _ in 0..5 {
            let rho = DensityOperator::new(vec![2, 2], random_pure(4, &mut rng)).unwrap();
            let sigma = DensityOperator::new(vec![2, 2], random_pure(4, &mut rng)).unwrap();
            let c = w1_exact(&rho, &sigma, &W1Config::default()).unwrap();
            let t = rho.trace_distance(&sigma).unwrap();
            assert!(t <= c.value + 1e-6 && c.value <= 2.0 * t + 1e-6);
            assert!(c.dual_witness_value <= c.value + 1e-9);
            assert!(c.dual_witness_value >= t - 1e-3);
        }
    }

    #[test]
    fn three_sites_and_mixed_dims() {
        let mut rng = stream(6, 0);
        let rho = DensityOperator::new(vec![2, 3, 2], random_density(12, &mut rng)).unwrap();
        let sigma = DensityOperator::new(vec![2, 3, 2], random_density(12, &mut rng)).unwrap();
        let c = w1_exact(&rho, &sigma, &W1Config::default()).unwrap();
        let t = rho.trace_distance(&sigma).unwrap();
        assert!(t <= c.value + 1e-6 && c.value <= 3.0 * t + 1e-6);
        assert!(c.gap < 1e-3);
    }

    #[test]
    fn single_site_is_trace_distance() {
        let mut rng = stream(7, 0);
        let rho = DensityOperator::new(vec![3], random_density(3, &mut rng)).unwrap();
        let sigma = DensityOperator::new(vec![3], random_density(3, &mut rng)).unwrap();
        let c = w1_exact(&rho, &sigma, &W1Config::default()).unwrap();
        assert!((c.value - rho.trace_distance(&sigma).unwrap()).abs() < 1e-14);
    }

    #[test]
    fn caps_and_convergence_errors() {
        let rho = DensityOperator::<f64>::maximally_mixed(vec![2; 7]);
        assert!(matches!(w1_exact(&rho, &rho, &W1Config::default()), Err(Error::CapExceeded { .. })));
        let mut rng = stream(8, 0);
        let a = DensityOperator::new(vec![2, 2], random_density(4, &mut rng)).unwrap();
        let b = DensityOperator::new(vec![2, 2], random_density(4, &mut rng)).unwrap();
        let cfg = W1Config {
            max_iter: 2,
            ..W1Config::default()
        };
        assert!(matches!(w1_exact(&a, &b, &cfg), Err(Error::NotConverged { iterations: 2, .. })));
    }

    #[test]
    fn classical_witnesses() {
        let dims = vec![2, 2];
        let mut rng = stream(9, 0);
        let diag = |rng: &mut _| {
            let p: Vec<f64> = (0..4).map(|_| Rng::random::<f64>(rng) + 0.01).collect();
            let s: f64 = p.iter().sum();
            let m = CMatrix::<f64>::from_diagonal(&nalgebra::DVector::from_iterator(4, p.iter().map(|x| creal(x / s))));
            DensityOperator::new(vec![2, 2], m).unwrap()
        };
        let pvm = ProductMeasurement::computational(dims.clone());
        for _ in 0..5 {
            let rho = diag(&mut rng);
            let sigma = diag(&mut rng);
            let zero = HammingLipschitzFn::new(dims.clone(), vec![0.0; 4]).unwrap();
            assert_eq!(dual_witness_from_classical(&zero, &pvm, &rho, &sigma).unwrap(), 0.0);
            let ones = HammingLipschitzFn::count_ones(dims.clone());
            let got = dual_witness_from_classical(&ones, &pvm, &rho, &sigma).unwrap();
            let weight = |r: &DensityOperator<f64>| {
                let m = r.matrix();
                m[(1, 1)].re + m[(2, 2)].re + 2.0 * m[(3, 3)].re
            };
            assert!((got - (weight(&rho) - weight(&sigma))).abs() < 1e-14);
            let c = w1_exact(&rho, &sigma, &W1Config::default()).unwrap();
            assert!(got <= c.value + 1e-6);
            // diagonal states: the quantum value is the classical one
            assert!((c.classical_lower_bound - c.value).abs() < 1e-4);
        }
        let bad = HammingLipschitzFn::new(dims, vec![0.0, 2.0, 0.0, 0.0]).unwrap();
        assert!(matches!(bad.lipschitz_violation(), Some((0, 1, _))));
    }

    #[test]
    fn remark_instance() {
        let r = product_basis_remark(&W1Config::default()).unwrap();
        assert!((r.trace_distance - 0.75).abs() < 1e-12);
        let want = [-0.75, 0.25, 0.25, 0.25];
        for (a, b) in r.eigenvalues.iter().zip(want) {
            assert!((a - b).abs() < 1e-12);
        }
        assert!(r.computational_basis_w1.abs() < 1e-12);
        assert!((r.hadamard_basis_w1 - 1.0).abs() < 1e-12);
        assert!(r.w1 >= r.trace_distance - 1e-6);
    }

    #[test]
    fn slater_pairs_sandwich_and_monotonicity() {
        let s = GroundSpace::<f64>::uniform(4).unwrap();
        let cfg = W1Config::default();
        for seed in 0..3 {
            let a = random_orthonormal(&s, 2, seed).unwrap();
            let b = random_orthonormal(&s, 2, seed + 50).unwrap();
            let r = slater_sandwich(&a, &b, &cfg).unwrap();
            assert!(r.holds(1e-4), "{r:?}");
            let rows = rdm_monotonicity_check(&a, &b, &cfg).unwrap();
            assert!(is_monotone(&rows, 2e-6), "{rows:?}");
            let m = overlap_matrix(&a, &b).unwrap();
            assert!(rows[1].w1 <= w1_upper_slater(&m) + 1e-4);
        }
        let a = random_orthonormal(&s, 2, 9).unwrap();
        for row in rdm_monotonicity_check(&a, &a, &cfg).unwrap() {
            assert!(row.value.abs() < 1e-9);
        }
    }

    #[test]
    fn one_body_reduced_state_is_folded_kernel_over_n() {
        let s = GroundSpace::<f64>::uniform(4).unwrap();
        let a = random_orthonormal(&s, 2, 1).unwrap();
        let r = full_state_vector(&a).unwrap().density().unwrap();
        let one = partial_trace(r.matrix(), r.dims(), &[1]).unwrap();
        let k = projection_kernel(&a).folded() * creal(0.5);
        assert!(linalg::max_abs(&(one - k)) < 1e-12);
    }
}
