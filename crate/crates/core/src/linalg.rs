//! Dense complex linear-algebra helpers shared by the state and solver code.

use nalgebra::{ComplexField, DMatrix, DVector};
use num_complex::Complex;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::scalar::{cplx, creal, Real};

pub type CMatrix<T> = DMatrix<Complex<T>>;
pub type CVector<T> = DVector<Complex<T>>;

/// Determinant kept as `log|det|` and a unit phase, so long products of
/// factors below one do not underflow.
#[derive(Debug, Clone, Copy)]
pub struct LogDet<T: Real> {
    pub log_abs: T,
    pub phase: Complex<T>,
}

impl<T: Real> LogDet<T> {
    pub fn is_zero(&self) -> bool {
        !self.log_abs.is_finite()
    }

    /// `|det|^2`, computed as `exp(2 log|det|)`.
    pub fn abs_sqr(&self) -> T {
        if self.is_zero() {
            T::zero()
        } else {
            (self.log_abs + self.log_abs).exp()
        }
    }

    pub fn value(&self) -> Complex<T> {
        if self.is_zero() {
            Complex::new(T::zero(), T::zero())
        } else {
            self.phase * self.log_abs.exp()
        }
    }
}

/// LU with partial pivoting, accumulating the determinant in log form.
pub fn log_det<T: Real>(m: &CMatrix<T>) -> LogDet<T> {
    assert!(m.is_square(), "determinant of a non-square matrix");
    if m.nrows() == 0 {
        return LogDet {
            log_abs: T::zero(),
            phase: creal(T::one()),
        };
    }
    let lu = m.clone().lu();
    let u = lu.u();
    let mut log_abs = T::zero();
    let mut phase = lu.p().determinant::<Complex<T>>();
    for i in 0..u.nrows() {
        let d = u[(i, i)];
        let r = d.modulus();
        if r == T::zero() {
            return LogDet {
                log_abs: T::lit(f64::NEG_INFINITY),
                phase: creal(T::one()),
            };
        }
        log_abs += r.ln();
        phase *= d / creal(r);
    }
    LogDet { log_abs, phase }
}

pub fn det<T: Real>(m: &CMatrix<T>) -> Complex<T> {
    log_det(m).value()
}

pub fn singular_values<T: Real>(m: &CMatrix<T>) -> Vec<T> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Vec::new();
    }
    let mut s: Vec<T> = m.clone().singular_values().iter().copied().collect();
    s.sort_by(|a, b| b.partial_cmp(a).unwrap());
    s
}

pub fn nuclear_norm<T: Real>(m: &CMatrix<T>) -> T {
    singular_values(m).into_iter().fold(T::zero(), |a, b| a + b)
}

pub fn hermitize<T: Real>(m: &CMatrix<T>) -> CMatrix<T> {
    (m + m.adjoint()) * creal(T::lit(0.5))
}

/// Eigenvalues of a Hermitian matrix, ascending.
pub fn hermitian_eigenvalues<T: Real>(m: &CMatrix<T>) -> Vec<T> {
    if m.nrows() == 0 {
        return Vec::new();
    }
    let mut ev: Vec<T> = nalgebra::SymmetricEigen::new(hermitize(m))
        .eigenvalues
        .iter()
        .copied()
        .collect();
    ev.sort_by(|a, b| a.partial_cmp(b).unwrap());
    ev
}

/// `(1/2) tr|X|` for Hermitian `X`; the normalised trace norm used throughout.
pub fn half_trace_norm<T: Real>(m: &CMatrix<T>) -> T {
    hermitian_eigenvalues(m)
        .into_iter()
        .fold(T::zero(), |a, l| a + l.abs())
        * T::lit(0.5)
}

/// Operator norm of a Hermitian matrix.
pub fn hermitian_operator_norm<T: Real>(m: &CMatrix<T>) -> T {
    hermitian_eigenvalues(m)
        .into_iter()
        .fold(T::zero(), |a, l| a.max(l.abs()))
}

/// Soft-thresholds the eigenvalues of a Hermitian matrix by `tau`.
pub fn eigen_shrink<T: Real>(m: &CMatrix<T>, tau: T) -> CMatrix<T> {
    let eig = nalgebra::SymmetricEigen::new(hermitize(m));
    let shrunk = eig.eigenvalues.map(|l| {
        let s = if l > tau {
            l - tau
        } else if l < -tau {
            l + tau
        } else {
            T::zero()
        };
        creal(s)
    });
    let v = &eig.eigenvectors;
    let mut scaled = v.clone();
    for (j, &s) in shrunk.iter().enumerate() {
        scaled.column_mut(j).apply(|z| *z *= s);
    }
    hermitize(&(scaled * v.adjoint()))
}

pub fn kron<T: Real>(a: &CMatrix<T>, b: &CMatrix<T>) -> CMatrix<T> {
    a.kronecker(b)
}

pub fn max_abs<T: Real>(m: &CMatrix<T>) -> T {
    m.iter().fold(T::zero(), |a, z| a.max(z.modulus()))
}

pub fn max_abs_diff_identity<T: Real>(m: &CMatrix<T>) -> T {
    let mut worst = T::zero();
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            let target = if i == j { T::one() } else { T::zero() };
            worst = worst.max((m[(i, j)] - creal(target)).modulus());
        }
    }
    worst
}

pub fn complex_gaussian<T: Real, R: Rng + ?Sized>(rng: &mut R) -> Complex<T> {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    let s = std::f64::consts::FRAC_1_SQRT_2;
    cplx(T::lit(re * s), T::lit(im * s))
}

pub fn gaussian_matrix<T: Real, R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> CMatrix<T> {
    let mut m = CMatrix::<T>::zeros(rows, cols);
    // column-major fill keeps the draw order independent of nalgebra internals
    for j in 0..cols {
        for i in 0..rows {
            m[(i, j)] = complex_gaussian(rng);
        }
    }
    m
}

/// Random full-rank density matrix `G G† / tr(G G†)`, `G` complex Ginibre.
pub fn random_density_matrix<T: Real, R: Rng + ?Sized>(d: usize, rng: &mut R) -> CMatrix<T> {
    let g = gaussian_matrix::<T, R>(d, d, rng);
    let m = &g * g.adjoint();
    let t = m.trace();
    m / t
}

/// Haar-distributed unitary: QR of a complex Ginibre matrix with the phases
/// of `diag(R)` absorbed into `Q`.
pub fn haar_unitary<T: Real, R: Rng + ?Sized>(n: usize, rng: &mut R) -> CMatrix<T> {
    let g = gaussian_matrix::<T, R>(n, n, rng);
    let qr = g.qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..n {
        let d = r[(j, j)];
        let nd = d.modulus();
        let ph = if nd > T::zero() { d / creal(nd) } else { creal(T::one()) };
        q.column_mut(j).apply(|z| *z *= ph);
    }
    q
}

/// Unitary polar factor of a nonsingular square matrix by the scaled Newton
/// iteration `X <- (z X + (z X)^{-H}) / 2`. Returns `None` when an iterate is
/// singular or the iteration stalls.
pub fn polar_unitary_newton<T: Real>(m: &CMatrix<T>) -> Option<CMatrix<T>> {
    let mut x = m.clone();
    let half = T::lit(0.5);
    for _ in 0..100 {
        let inv = x.clone().try_inverse()?;
        let nx = x.norm();
        let ni = inv.norm();
        if !(nx.is_finite() && ni.is_finite()) || nx == T::zero() {
            return None;
        }
        let zeta = (ni / nx).sqrt();
        let next = (&x * creal(zeta) + inv.adjoint() * creal(T::one() / zeta)) * creal(half);
        let delta = (&next - &x).norm();
        x = next;
        if delta <= T::tol(1e-15) * x.norm() {
            return Some(x);
        }
    }
    let err = max_abs_diff_identity(&(x.adjoint() * &x));
    (err <= T::tol(1e-10)).then_some(x)
}

pub fn trace<T: Real>(m: &CMatrix<T>) -> Complex<T> {
    m.trace()
}
