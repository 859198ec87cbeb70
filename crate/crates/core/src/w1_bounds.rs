//! Upper bounds on the quantum Wasserstein-1 distance between Slater states.
//!
//! For families `{ψ_i}`, `{φ_i}` with overlap matrix `M`, the bound is
//! `n sqrt(1 - s²)` where `s` is the largest mean overlap
//! `|(1/n) Σ_i ⟨Vψ_i|Uφ_i⟩|` over unitaries preserving each span. Restricted
//! to the spans, `V` and `U` act as arbitrary `n × n` unitaries `A`, `B` and
//! the sum becomes `tr(A† M B)`, whose maximal modulus is the nuclear norm of
//! `M` (von Neumann's trace inequality). So `s = ‖M‖_* / n`.
//!
//! [`alternating_ascent`] recomputes `s` without any SVD, by alternately
//! replacing `A` and `B` with Newton polar factors; it serves as the check on
//! the closed form.

use num_complex::Complex;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::ground_space::{GroundFunction, GroundSpace, OrthonormalFamily};
use crate::linalg::{self, haar_unitary, nuclear_norm, polar_unitary_newton, CMatrix};
use crate::scalar::{creal, Real};
use crate::slater::{clamped_sqrt, overlap_matrix, slater_fidelity, trace_distance_slater, OverlapMatrix};

/// `max_{V,U} |(1/n) Σ_i ⟨Vψ_i|Uφ_i⟩| = ‖M‖_* / n`. Returns 1 for `n = 0`.
pub fn stabilizer_max_overlap<T: Real>(m: &OverlapMatrix<T>) -> T {
    let n = m.n();
    if n == 0 {
        return T::one();
    }
    (nuclear_norm(m.matrix()) / T::from_count(n)).min(T::one())
}

/// `n sqrt(1 - s²)` with `s` from [`stabilizer_max_overlap`].
pub fn w1_upper_slater<T: Real>(m: &OverlapMatrix<T>) -> T {
    let n = m.n();
    if n == 0 {
        return T::zero();
    }
    // 1 - s² = d (2 - d) with d = 1 - s = mean of 1 - cos θ_i
    let d = m
        .angle_defects()
        .into_iter()
        .fold(T::zero(), |a, (d, _)| a + d)
        / T::from_count(n);
    T::from_count(n) * clamped_sqrt(d * (T::lit(2.0) - d))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlaterBoundsReport {
    pub n: usize,
    pub trace_distance: f64,
    pub w1_upper: f64,
    pub n_times_trace: f64,
    pub stabilizer_overlap: f64,
    pub singular_values: Vec<f64>,
}

impl SlaterBoundsReport {
    pub fn from_overlap<T: Real>(m: &OverlapMatrix<T>) -> Self {
        let n = m.n();
        let trace: f64 = trace_distance_slater(m).into();
        Self {
            n,
            trace_distance: trace,
            w1_upper: w1_upper_slater(m).into(),
            n_times_trace: n as f64 * trace,
            stabilizer_overlap: stabilizer_max_overlap(m).into(),
            singular_values: m.singular_values().into_iter().map(Into::into).collect(),
        }
    }

    /// `trace <= w1_upper <= n * trace`, up to `tol`.
    pub fn chain_holds(&self, tol: f64) -> bool {
        self.trace_distance <= self.w1_upper + tol && self.w1_upper <= self.n_times_trace + tol
    }

    pub fn csv_header(n: usize) -> String {
        let mut h = String::from("n,trace,w1_upper,n_trace");
        for i in 1..=n {
            h.push_str(&format!(",sigma_{i}"));
        }
        h
    }

    pub fn csv_row(&self) -> String {
        let mut r = format!(
            "{},{},{},{}",
            self.n, self.trace_distance, self.w1_upper, self.n_times_trace
        );
        for s in &self.singular_values {
            r.push_str(&format!(",{s}"));
        }
        r
    }
}

pub fn slater_bounds_report<T: Real>(a: &OrthonormalFamily<T>, b: &OrthonormalFamily<T>) -> Result<SlaterBoundsReport> {
    Ok(SlaterBoundsReport::from_overlap(&overlap_matrix(a, b)?))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AscentConfig {
    pub max_iter: usize,
    pub rel_tol: f64,
    pub restarts: usize,
}

impl Default for AscentConfig {
    fn default() -> Self {
        Self {
            max_iter: 200,
            rel_tol: 1e-12,
            restarts: 5,
        }
    }
}

/// Polar factor, nudging a singular input by a tiny multiple of the identity.
fn polar<T: Real>(x: &CMatrix<T>) -> CMatrix<T> {
    if let Some(u) = polar_unitary_newton(x) {
        return u;
    }
    let n = x.nrows();
    let scale = x.norm().max(T::one()) * T::tol(1e-13);
    let mut eps = scale;
    for _ in 0..20 {
        let nudged = x + CMatrix::<T>::identity(n, n) * creal(eps);
        if let Some(u) = polar_unitary_newton(&nudged) {
            return u;
        }
        eps *= T::lit(10.0);
    }
    CMatrix::<T>::identity(n, n)
}

fn objective<T: Real>(m: &CMatrix<T>, a: &CMatrix<T>, b: &CMatrix<T>) -> T {
    let t: Complex<T> = (a.adjoint() * m * b).trace();
    (t.re * t.re + t.im * t.im).sqrt()
}

/// Maximises `|tr(A† M B)| / n` over unitaries by alternating polar updates:
/// `A ← polar(M B)`, `B ← polar(M† A)`. The first start is `B = 1`, further
/// restarts draw `B` from the Haar measure.
pub fn alternating_ascent<T: Real, R: Rng + ?Sized>(m: &OverlapMatrix<T>, config: &AscentConfig, rng: &mut R) -> T {
    let n = m.n();
    if n == 0 {
        return T::one();
    }
    let mm = m.matrix();
    let rel_tol = T::lit(config.rel_tol);
    let mut best = T::zero();
    for restart in 0..config.restarts.max(1) {
        let mut b = if restart == 0 {
            CMatrix::<T>::identity(n, n)
        } else {
            haar_unitary::<T, R>(n, rng)
        };
        let mut a = polar(&(mm * &b));
        let mut value = objective(mm, &a, &b);
        for _ in 0..config.max_iter {
            b = polar(&(mm.adjoint() * &a));
            a = polar(&(mm * &b));
            let next = objective(mm, &a, &b);
            let change = (next - value).abs();
            value = next;
            if change <= rel_tol * value.max(T::tol(1e-300)) {
                break;
            }
        }
        best = best.max(value);
    }
    best / T::from_count(n)
}

/// Best `|tr(A† M B)| / n` over `trials` independent Haar pairs. Always a
/// lower bound on the stabilizer maximum.
pub fn random_unitary_probe<T: Real, R: Rng + ?Sized>(m: &OverlapMatrix<T>, trials: usize, rng: &mut R) -> T {
    let n = m.n();
    if n == 0 {
        return T::one();
    }
    let mut best = T::zero();
    for _ in 0..trials {
        let a = haar_unitary::<T, R>(n, rng);
        let b = haar_unitary::<T, R>(n, rng);
        best = best.max(objective(m.matrix(), &a, &b));
    }
    best / T::from_count(n)
}

/// How the perturbation sizes `ε_i` of the gap example are chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EpsilonRule {
    /// `ε_i = ratio^i`
    Geometric { ratio: f64 },
    /// `ε_i = i^{-exponent}`
    PowerLaw { exponent: f64 },
}

impl Default for EpsilonRule {
    fn default() -> Self {
        EpsilonRule::Geometric { ratio: 0.5 }
    }
}

impl EpsilonRule {
    /// `ε_i` for `i >= 1`.
    pub fn epsilon(&self, i: usize) -> f64 {
        match *self {
            EpsilonRule::Geometric { ratio } => ratio.powi(i as i32),
            EpsilonRule::PowerLaw { exponent } => (i as f64).powf(-exponent),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapRow {
    pub n: usize,
    /// `|det M|`
    pub determinant: f64,
    /// `(1/n) Σ_i ⟨ψ_i|φ_i⟩`, the mean overlap with `U = V = 1`
    pub mean_overlap: f64,
    /// `‖M‖_* / n`
    pub stabilizer_overlap: f64,
    pub trace_distance: f64,
    /// `w1_upper_slater / n`
    pub w1_upper_over_n: f64,
}

impl GapRow {
    pub const CSV_HEADER: &'static str =
        "n,determinant,mean_overlap,stabilizer_overlap,trace_distance,w1_upper_over_n";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{}",
            self.n,
            self.determinant,
            self.mean_overlap,
            self.stabilizer_overlap,
            self.trace_distance,
            self.w1_upper_over_n
        )
    }
}

/// The two families of the gap example on `2n` points: `ψ_i` the unit point
/// masses, `φ_i = (1-ε_i) ψ_i + sqrt(1-(1-ε_i)²) ψ_{n+i}`.
pub fn gap_example_families<T: Real>(n: usize, rule: &EpsilonRule) -> Result<(OrthonormalFamily<T>, OrthonormalFamily<T>)> {
    let space = GroundSpace::<T>::uniform(2 * n)?;
    let point = |x| GroundFunction::normalized_indicator(&space, x);
    let psi: Vec<_> = (0..n).map(point).collect();
    let phi: Vec<_> = (0..n)
        .map(|i| {
            let c = T::one() - T::lit(rule.epsilon(i + 1));
            let s = clamped_sqrt(T::one() - c * c);
            let (a, b) = (point(i), point(n + i));
            GroundFunction::new(
                a.values()
                    .iter()
                    .zip(b.values())
                    .map(|(x, y)| *x * creal(c) + *y * creal(s))
                    .collect(),
            )
        })
        .map(|f| {
            // renormalise to machine precision
            let nrm = crate::ground_space::inner_product(&f, &f, &space)
                .map(|z| z.re.sqrt())
                .unwrap_or_else(|_| T::one());
            GroundFunction::new(f.values().iter().map(|z| *z / creal(nrm)).collect())
        })
        .collect();
    let tol = T::tol(1e-12);
    Ok((
        OrthonormalFamily::new(space.clone(), psi, tol)?,
        OrthonormalFamily::new(space, phi, tol)?,
    ))
}

pub fn gap_row<T: Real>(n: usize, rule: &EpsilonRule) -> Result<GapRow> {
    let (psi, phi) = gap_example_families::<T>(n, rule)?;
    let m = overlap_matrix(&psi, &phi)?;
    let mean = m.matrix().trace() / creal(T::from_count(n));
    Ok(GapRow {
        n,
        determinant: slater_fidelity(&m).sqrt().into(),
        mean_overlap: mean.re.into(),
        stabilizer_overlap: stabilizer_max_overlap(&m).into(),
        trace_distance: trace_distance_slater(&m).into(),
        w1_upper_over_n: (w1_upper_slater(&m) / T::from_count(n)).into(),
    })
}

/// Rows `n = 1, ..., n_max` of the gap example.
pub fn example_gap_table(n_max: usize, rule: &EpsilonRule) -> Result<Vec<GapRow>> {
    (1..=n_max).map(|n| gap_row::<f64>(n, rule)).collect()
}

/// `det M` of the gap example in closed form, `Π_{i<=n} (1 - ε_i)`.
pub fn gap_determinant_closed_form(n: usize, rule: &EpsilonRule) -> f64 {
    (1..=n).map(|i| 1.0 - rule.epsilon(i)).product()
}

/// Used by the unit tests and the self-test: in-span recombination of `b`.
pub fn recombined<T: Real, R: Rng + ?Sized>(b: &OrthonormalFamily<T>, rng: &mut R) -> Result<OrthonormalFamily<T>> {
    let u = haar_unitary::<T, R>(b.len(), rng);
    b.recombine(&u)
}

/// Applies `M ↦ A† M B` for unitaries `A`, `B`.
pub fn rotate_overlap<T: Real>(m: &OverlapMatrix<T>, a: &CMatrix<T>, b: &CMatrix<T>) -> Result<OverlapMatrix<T>> {
    OverlapMatrix::new(a.adjoint() * m.matrix() * b)
}

/// Max-entry distance between two overlap matrices.
pub fn overlap_distance<T: Real>(a: &OverlapMatrix<T>, b: &OverlapMatrix<T>) -> T {
    linalg::max_abs(&(a.matrix() - b.matrix()))
}
