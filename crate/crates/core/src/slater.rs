//! Slater determinant states.
//!
//! A family `{ψ_i}` of `n` orthonormal functions defines the antisymmetrised
//! state `Ψ = (n!)^{-1/2} Σ_τ sgn(τ) ⊗_i ψ_{τ(i)}`. Overlaps between two such
//! states reduce to the determinant of the `n × n` overlap matrix
//! `M_ij = ⟨ψ_i|φ_j⟩`, which is what most of this module works with.
//!
//! Trace norm convention: `‖X‖₁ = (1/2) tr|X|` everywhere in the crate, so the
//! trace distance between pure states is `sqrt(1 - |⟨ψ|φ⟩|²)`.

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ground_space::{inner_product, GroundSpace, OrthonormalFamily};
use crate::linalg::{self, hermitian_eigenvalues, hermitize, log_det, CMatrix, CVector};
use crate::scalar::{creal, Real};
use crate::tensor::{digits, partial_trace, total_dim};

/// Upper limit on `|E|^n` for building full tensor-space state vectors.
pub const STATE_VECTOR_CAP: usize = 100_000;

/// Upper limit on the dimension of an explicitly stored density matrix.
pub const DENSITY_DIM_CAP: usize = 4_096;

/// `M_ij = ⟨ψ_i|φ_j⟩` between two orthonormal `n`-families.
#[derive(Debug, Clone, PartialEq)]
pub struct OverlapMatrix<T: Real> {
    entries: CMatrix<T>,
    /// Folded frames `(ψ_i(x) √μ(x))` of both families when the matrix was
    /// built from them; they give the principal-angle sines directly.
    frames: Option<(CMatrix<T>, CMatrix<T>)>,
}

impl<T: Real> OverlapMatrix<T> {
    /// Checks squareness and that no singular value exceeds one (beyond
    /// `1e-9`), as for any block of a unitary change of frame.
    pub fn new(entries: CMatrix<T>) -> Result<Self> {
        if !entries.is_square() {
            return Err(Error::DimensionMismatch {
                expected: entries.nrows(),
                found: entries.ncols(),
            });
        }
        if let Some(&s) = linalg::singular_values(&entries).first() {
            if s > T::one() + T::tol(1e-9) {
                return Err(Error::InvalidArgument(format!(
                    "overlap matrix has singular value {} > 1",
                    Into::<f64>::into(s)
                )));
            }
        }
        Ok(Self { entries, frames: None })
    }

    pub fn identity(n: usize) -> Self {
        Self {
            entries: CMatrix::<T>::identity(n, n),
            frames: None,
        }
    }

    pub fn from_diagonal(d: &[T]) -> Result<Self> {
        let v = CVector::<T>::from_iterator(d.len(), d.iter().map(|&x| creal(x)));
        Self::new(CMatrix::<T>::from_diagonal(&v))
    }

    pub fn n(&self) -> usize {
        self.entries.nrows()
    }

    pub fn matrix(&self) -> &CMatrix<T> {
        &self.entries
    }

    pub fn singular_values(&self) -> Vec<T> {
        linalg::singular_values(&self.entries)
    }

    /// The principal block on `indices` (rows and columns), e.g. the
    /// `(⟨ψ_i|ψ'_j⟩)_{i,j ∈ I}` blocks of mixed-kernel bounds.
    pub fn restrict(&self, indices: &[usize]) -> Self {
        let k = indices.len();
        let cols = |f: &CMatrix<T>| CMatrix::<T>::from_fn(f.nrows(), k, |x, a| f[(x, indices[a])]);
        Self {
            entries: CMatrix::<T>::from_fn(k, k, |a, b| self.entries[(indices[a], indices[b])]),
            frames: self.frames.as_ref().map(|(fa, fb)| (cols(fa), cols(fb))),
        }
    }

    /// Per principal angle, `(1 - cos θ, 1 - cos² θ)`, ordered by decreasing
    /// cosine. Small angles use `sin θ` from the residual `B - A(A†B)` of the
    /// frames, which keeps both quantities accurate near `θ = 0` where
    /// `1 - cos²` from the singular values alone would lose half the digits.
    pub fn angle_defects(&self) -> Vec<(T, T)> {
        let cos: Vec<T> = self.singular_values().into_iter().map(|c| c.min(T::one())).collect();
        let sin: Option<Vec<T>> = self.frames.as_ref().map(|(fa, fb)| {
            let resid = fb - fa * &self.entries;
            let mut s = linalg::singular_values(&resid);
            s.reverse();
            s
        });
        let half = T::lit(0.5);
        cos.iter()
            .enumerate()
            .map(|(i, &c)| match sin.as_ref().and_then(|s| s.get(i)) {
                Some(&sn) if sn * sn < half => {
                    let s2 = sn * sn;
                    (s2 / (T::one() + c), s2)
                }
                _ => (T::one() - c, T::one() - c * c),
            })
            .collect()
    }

    pub fn to_document(&self) -> MatrixDocument {
        MatrixDocument::from_matrix(&self.entries)
    }
}

/// Row-major JSON form of a complex matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixDocument {
    pub rows: usize,
    pub cols: usize,
    pub re: Vec<Vec<f64>>,
    pub im: Vec<Vec<f64>>,
}

impl MatrixDocument {
    pub fn from_matrix<T: Real>(m: &CMatrix<T>) -> Self {
        let grab = |f: &dyn Fn(Complex<T>) -> T| -> Vec<Vec<f64>> {
            (0..m.nrows())
                .map(|i| (0..m.ncols()).map(|j| f(m[(i, j)]).into()).collect())
                .collect()
        };
        Self {
            rows: m.nrows(),
            cols: m.ncols(),
            re: grab(&|z| z.re),
            im: grab(&|z| z.im),
        }
    }

    pub fn to_matrix<T: Real>(&self) -> Result<CMatrix<T>> {
        let shape_ok = self.re.len() == self.rows
            && self.im.len() == self.rows
            && self.re.iter().chain(&self.im).all(|r| r.len() == self.cols);
        if !shape_ok {
            return Err(Error::InvalidArgument("matrix document shape is inconsistent".into()));
        }
        Ok(CMatrix::<T>::from_fn(self.rows, self.cols, |i, j| {
            Complex::new(T::lit(self.re[i][j]), T::lit(self.im[i][j]))
        }))
    }
}

fn check_compatible<T: Real>(a: &OrthonormalFamily<T>, b: &OrthonormalFamily<T>) -> Result<()> {
    if a.space() != b.space() {
        return Err(Error::InvalidArgument("families live on different ground spaces".into()));
    }
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: a.len(),
            found: b.len(),
        });
    }
    Ok(())
}

pub fn overlap_matrix<T: Real>(a: &OrthonormalFamily<T>, b: &OrthonormalFamily<T>) -> Result<OverlapMatrix<T>> {
    check_compatible(a, b)?;
    let n = a.len();
    let mut m = CMatrix::<T>::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            m[(i, j)] = inner_product(&a.functions()[i], &b.functions()[j], a.space())?;
        }
    }
    // Gram-level rounding can push a singular value a hair above one.
    Ok(OverlapMatrix {
        entries: m,
        frames: Some((a.weighted_matrix(), b.weighted_matrix())),
    })
}

/// `|⟨Ψ|Φ⟩|² = |det M|²`, clamped to `[0, 1]`.
pub fn slater_fidelity<T: Real>(m: &OverlapMatrix<T>) -> T {
    log_det(&m.entries).abs_sqr().max(T::zero()).min(T::one())
}

/// `sqrt(1 - |det M|²)`, with `1 - |det M|² = 1 - Π_i cos² θ_i` evaluated
/// from the principal angles.
pub fn trace_distance_slater<T: Real>(m: &OverlapMatrix<T>) -> T {
    let mut log_fid = T::zero();
    for (_, r) in m.angle_defects() {
        if r >= T::one() {
            return T::one();
        }
        log_fid += (-r).ln_1p();
    }
    clamped_sqrt(-log_fid.exp_m1()).min(T::one())
}

/// Square root with small negative radicands treated as zero.
pub(crate) fn clamped_sqrt<T: Real>(x: T) -> T {
    if x <= T::zero() {
        T::zero()
    } else {
        x.sqrt()
    }
}

/// `K(x, x') = Σ_ℓ conj(ψ_ℓ(x)) ψ_ℓ(x')`: the kernel of the orthogonal
/// projection onto `span{ψ_ℓ}` in `L²(E, μ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionKernel<T: Real> {
    space: GroundSpace<T>,
    matrix: CMatrix<T>,
    rank: usize,
}

impl<T: Real> ProjectionKernel<T> {
    pub fn space(&self) -> &GroundSpace<T> {
        &self.space
    }

    pub fn matrix(&self) -> &CMatrix<T> {
        &self.matrix
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn at(&self, x: usize, y: usize) -> Complex<T> {
        self.matrix[(x, y)]
    }

    /// `Σ_x K(x, x) μ(x)`.
    pub fn weighted_trace(&self) -> T {
        (0..self.space.len()).fold(T::zero(), |a, x| a + self.matrix[(x, x)].re * self.space.weight(x))
    }

    /// `K · D · K` with `D = diag(μ)`; equals `K` for a projection.
    pub fn compose_weighted(&self) -> CMatrix<T> {
        let d = CVector::<T>::from_iterator(self.space.len(), self.space.weights().iter().map(|&w| creal(w)));
        &self.matrix * CMatrix::<T>::from_diagonal(&d) * &self.matrix
    }

    /// The projection in weight-folded coordinates,
    /// `P(x, y) = sqrt(μ(x) μ(y)) K(y, x)`, a plain orthogonal projector on
    /// `C^|E|`; the one-body reduced state of the Slater state is `P / n`.
    pub fn folded(&self) -> CMatrix<T> {
        let s = self.space.len();
        CMatrix::<T>::from_fn(s, s, |x, y| {
            self.matrix[(y, x)] * (self.space.weight(x) * self.space.weight(y)).sqrt()
        })
    }
}

pub fn projection_kernel<T: Real>(a: &OrthonormalFamily<T>) -> ProjectionKernel<T> {
    let v = a.value_matrix();
    // K = conj(V) V^T, entry (x, y) = Σ_ℓ conj(ψ_ℓ(x)) ψ_ℓ(y)
    let matrix = v.conjugate() * v.transpose();
    ProjectionKernel {
        space: a.space().clone(),
        matrix: hermitize(&matrix),
        rank: a.len(),
    }
}

/// `Ψ(x_1, ..., x_n) = (n!)^{-1/2} det(ψ_i(x_j))`, weights not folded in.
pub fn slater_amplitude<T: Real>(a: &OrthonormalFamily<T>, tuple: &[usize]) -> Result<Complex<T>> {
    let n = a.len();
    if tuple.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: tuple.len(),
        });
    }
    if let Some(&x) = tuple.iter().find(|&&x| x >= a.space().len()) {
        return Err(Error::InvalidArgument(format!("point index {x} out of range")));
    }
    if has_repeat(tuple) {
        return Ok(creal(T::zero()));
    }
    let m = CMatrix::<T>::from_fn(n, n, |i, j| a.functions()[i].at(tuple[j]));
    Ok(linalg::det(&m) / creal(factorial::<T>(n).sqrt()))
}

pub(crate) fn factorial<T: Real>(n: usize) -> T {
    (1..=n).fold(T::one(), |acc, k| acc * T::from_count(k))
}

/// A pure state on `(C^d)^{⊗n}` stored as its amplitude vector.
#[derive(Debug, Clone, PartialEq)]
pub struct PureState<T: Real> {
    dims: Vec<usize>,
    amplitudes: CVector<T>,
}

impl<T: Real> PureState<T> {
    pub fn new(dims: Vec<usize>, amplitudes: CVector<T>) -> Result<Self> {
        if total_dim(&dims) != amplitudes.len() {
            return Err(Error::DimensionMismatch {
                expected: total_dim(&dims),
                found: amplitudes.len(),
            });
        }
        Ok(Self { dims, amplitudes })
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn amplitudes(&self) -> &CVector<T> {
        &self.amplitudes
    }

    pub fn norm_sqr(&self) -> T {
        self.amplitudes.norm_squared()
    }

    /// `⟨self|other⟩`.
    pub fn overlap(&self, other: &Self) -> Complex<T> {
        self.amplitudes.dotc(&other.amplitudes)
    }

    pub fn density(&self) -> Result<DensityOperator<T>> {
        let d = self.amplitudes.len();
        if d > DENSITY_DIM_CAP {
            return Err(Error::CapExceeded {
                what: "dense density matrix",
                required: d as u128,
                cap: DENSITY_DIM_CAP as u128,
            });
        }
        let m = &self.amplitudes * self.amplitudes.adjoint();
        DensityOperator::new(self.dims.clone(), hermitize(&m))
    }

    /// Reduced state on the first `k` subsystems, computed from the vector
    /// without forming the full density matrix.
    pub fn reduced(&self, k: usize) -> Result<DensityOperator<T>> {
        let n = self.dims.len();
        if k == 0 || k > n {
            return Err(Error::InvalidArgument(format!("k = {k} must lie in 1..={n}")));
        }
        let kept = total_dim(&self.dims[..k]);
        let rest = total_dim(&self.dims[k..]);
        if kept > DENSITY_DIM_CAP {
            return Err(Error::CapExceeded {
                what: "dense density matrix",
                required: kept as u128,
                cap: DENSITY_DIM_CAP as u128,
            });
        }
        // first-subsystem-major layout: amplitude index = a * rest + b
        let psi = CMatrix::<T>::from_fn(kept, rest, |a, b| self.amplitudes[a * rest + b]);
        let rho = &psi * psi.adjoint();
        DensityOperator::new(self.dims[..k].to_vec(), hermitize(&rho))
    }
}

/// The Slater state of `a` on `(C^|E|)^{⊗n}`, with the weights folded into
/// the components (`ψ(x) √μ(x)`) so the standard inner product applies.
pub fn full_state_vector<T: Real>(a: &OrthonormalFamily<T>) -> Result<PureState<T>> {
    full_state_vector_capped(a, STATE_VECTOR_CAP)
}

pub fn full_state_vector_capped<T: Real>(a: &OrthonormalFamily<T>, cap: usize) -> Result<PureState<T>> {
    let n = a.len();
    let e = a.space().len();
    let required = (e as u128).checked_pow(n as u32).unwrap_or(u128::MAX);
    if required > cap as u128 {
        return Err(Error::CapExceeded {
            what: "full Slater state vector",
            required,
            cap: cap as u128,
        });
    }
    let total = required as usize;
    let dims = vec![e; n];
    let v = a.weighted_matrix();
    let norm = creal(T::one() / factorial::<T>(n).sqrt());
    let mut amps = CVector::<T>::zeros(total);
    let mut tuple = vec![0usize; n];
    let mut block = CMatrix::<T>::zeros(n, n);
    for idx in 0..total {
        digits(idx, &dims, &mut tuple);
        if has_repeat(&tuple) {
            continue;
        }
        for i in 0..n {
            for j in 0..n {
                block[(i, j)] = v[(tuple[j], i)];
            }
        }
        amps[idx] = linalg::det(&block) * norm;
    }
    PureState::new(dims, amps)
}

pub(crate) fn has_repeat(tuple: &[usize]) -> bool {
    tuple
        .iter()
        .enumerate()
        .any(|(i, x)| tuple[i + 1..].contains(x))
}

/// Hermitian, positive semidefinite, unit-trace operator on a tensor product.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityOperator<T: Real> {
    dims: Vec<usize>,
    matrix: CMatrix<T>,
}

impl<T: Real> DensityOperator<T> {
    pub fn new(dims: Vec<usize>, matrix: CMatrix<T>) -> Result<Self> {
        let d = total_dim(&dims);
        if matrix.shape() != (d, d) {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: matrix.nrows(),
            });
        }
        let herm_err = linalg::max_abs(&(&matrix - matrix.adjoint()));
        if herm_err > T::tol(1e-10) {
            return Err(Error::InvalidState(format!(
                "not Hermitian (deviation {:e})",
                Into::<f64>::into(herm_err)
            )));
        }
        let tr = matrix.trace().re;
        if (tr - T::one()).abs() > T::tol(1e-10) {
            return Err(Error::InvalidState(format!("trace {} != 1", Into::<f64>::into(tr))));
        }
        if let Some(&lo) = hermitian_eigenvalues(&matrix).first() {
            if lo < -T::tol(1e-10) {
                return Err(Error::InvalidState(format!(
                    "negative eigenvalue {:e}",
                    Into::<f64>::into(lo)
                )));
            }
        }
        Ok(Self {
            dims,
            matrix: hermitize(&matrix),
        })
    }

    /// `|ψ⟩⟨ψ|` for a normalised vector.
    pub fn pure(dims: Vec<usize>, psi: &CVector<T>) -> Result<Self> {
        Self::new(dims, psi * psi.adjoint())
    }

    pub fn maximally_mixed(dims: Vec<usize>) -> Self {
        let d = total_dim(&dims);
        let m = CMatrix::<T>::identity(d, d) * creal(T::one() / T::from_count(d));
        Self { dims, matrix: m }
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn matrix(&self) -> &CMatrix<T> {
        &self.matrix
    }

    pub fn eigenvalues(&self) -> Vec<T> {
        hermitian_eigenvalues(&self.matrix)
    }

    /// `(1/2) tr|ρ - σ|`.
    pub fn trace_distance(&self, other: &Self) -> Result<T> {
        if self.dims != other.dims {
            return Err(Error::InvalidArgument("states on different tensor spaces".into()));
        }
        Ok(linalg::half_trace_norm(&(&self.matrix - &other.matrix)))
    }

    pub fn to_document(&self) -> DensityDocument {
        DensityDocument {
            dims: self.dims.clone(),
            matrix: MatrixDocument::from_matrix(&self.matrix),
        }
    }

    pub fn from_document(doc: &DensityDocument) -> Result<Self> {
        Self::new(doc.dims.clone(), doc.matrix.to_matrix()?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityDocument {
    pub dims: Vec<usize>,
    pub matrix: MatrixDocument,
}

/// Normalised `k`-particle reduced density matrix `binom(n,k)^{-1} Γ^(k)`:
/// the partial trace over subsystems `k+1, ..., n`.
pub fn reduced_density_matrix<T: Real>(state: &DensityOperator<T>, k: usize) -> Result<DensityOperator<T>> {
    let n = state.dims.len();
    if k == 0 || k > n {
        return Err(Error::InvalidArgument(format!("k = {k} must lie in 1..={n}")));
    }
    let traced: Vec<usize> = (k..n).collect();
    let m = partial_trace(&state.matrix, &state.dims, &traced)?;
    DensityOperator::new(state.dims[..k].to_vec(), hermitize(&m))
}

/// Unnormalised `Γ^(k) = binom(n,k) tr_{k+1..n}`.
pub fn gamma_k<T: Real>(state: &DensityOperator<T>, k: usize) -> Result<CMatrix<T>> {
    let n = state.dims.len();
    let r = reduced_density_matrix(state, k)?;
    Ok(r.matrix * creal(binomial::<T>(n, k)))
}

pub(crate) fn binomial<T: Real>(n: usize, k: usize) -> T {
    (0..k).fold(T::one(), |acc, i| acc * T::from_count(n - i) / T::from_count(i + 1))
}

#[cfg(test)]
pub(crate) fn unit_vector<T: Real>(d: usize, i: usize) -> CVector<T> {
    let mut v = nalgebra::DVector::zeros(d);
    v[i] = creal(T::one());
    v
}
