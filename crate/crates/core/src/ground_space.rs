//! Finite weighted ground sets, functions on them, and orthonormal families.
//!
//! Every integral over the ground set is a weighted sum
//! `∫ f dμ = Σ_x f(x) μ(x)`, so the inner product on `L²(E, μ)` is
//! `⟨f|g⟩ = Σ_x conj(f(x)) g(x) μ(x)`.

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{complex_gaussian, max_abs_diff_identity, CMatrix};
use crate::rng;
use crate::scalar::{cplx, creal, Real};

/// Default orthonormality tolerance.
pub const DEFAULT_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct GroundSpace<T: Real> {
    labels: Vec<String>,
    weights: Vec<T>,
    coords: Option<Vec<T>>,
}

impl<T: Real> GroundSpace<T> {
    pub fn new(labels: Vec<String>, weights: Vec<T>) -> Result<Self> {
        if labels.len() != weights.len() {
            return Err(Error::DimensionMismatch {
                expected: labels.len(),
                found: weights.len(),
            });
        }
        if labels.is_empty() {
            return Err(Error::InvalidArgument("ground space has no points".into()));
        }
        if let Some(i) = weights.iter().position(|w| !(*w > T::zero())) {
            return Err(Error::InvalidArgument(format!(
                "weight of point {i} is not positive"
            )));
        }
        let mut sorted = labels.clone();
        sorted.sort();
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidArgument("point labels must be distinct".into()));
        }
        Ok(Self {
            labels,
            weights,
            coords: None,
        })
    }

    /// `n` points labelled `0..n` with weights `1/n`.
    pub fn uniform(n: usize) -> Result<Self> {
        let w = T::one() / T::from_count(n.max(1));
        Self::new((0..n).map(|i| i.to_string()).collect(), vec![w; n])
    }

    /// `n` points labelled `0..n` with the given weights.
    pub fn weighted(weights: Vec<T>) -> Result<Self> {
        Self::new((0..weights.len()).map(|i| i.to_string()).collect(), weights)
    }

    pub fn with_coords(mut self, coords: Vec<T>) -> Result<Self> {
        if coords.len() != self.len() {
            return Err(Error::DimensionMismatch {
                expected: self.len(),
                found: coords.len(),
            });
        }
        self.coords = Some(coords);
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    pub fn weight(&self, x: usize) -> T {
        self.weights[x]
    }

    pub fn coords(&self) -> Option<&[T]> {
        self.coords.as_deref()
    }

    pub fn total_mass(&self) -> T {
        self.weights.iter().fold(T::zero(), |a, &w| a + w)
    }
}

/// A complex function on the points of a ground space.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundFunction<T: Real> {
    values: Vec<Complex<T>>,
}

impl<T: Real> GroundFunction<T> {
    pub fn new(values: Vec<Complex<T>>) -> Self {
        Self { values }
    }

    pub fn from_real(values: &[T]) -> Self {
        Self::new(values.iter().map(|&v| creal(v)).collect())
    }

    pub fn constant(len: usize, value: Complex<T>) -> Self {
        Self::new(vec![value; len])
    }

    /// `μ(x)^{-1/2}` at `x`, zero elsewhere: the unit-norm point mass.
    pub fn normalized_indicator(space: &GroundSpace<T>, x: usize) -> Self {
        let mut v = vec![creal(T::zero()); space.len()];
        v[x] = creal(T::one() / space.weight(x).sqrt());
        Self::new(v)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[Complex<T>] {
        &self.values
    }

    pub fn at(&self, x: usize) -> Complex<T> {
        self.values[x]
    }

    pub fn pointwise_mul(&self, other: &Self) -> Self {
        Self::new(self.values.iter().zip(&other.values).map(|(a, b)| a * b).collect())
    }

    fn axpy(&mut self, alpha: Complex<T>, other: &Self) {
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            *a += alpha * b;
        }
    }

    fn scale(&mut self, alpha: Complex<T>) {
        for a in &mut self.values {
            *a *= alpha;
        }
    }
}

/// `⟨f|g⟩ = Σ_x conj(f(x)) g(x) μ(x)`, conjugate-linear in `f`.
pub fn inner_product<T: Real>(
    f: &GroundFunction<T>,
    g: &GroundFunction<T>,
    space: &GroundSpace<T>,
) -> Result<Complex<T>> {
    for h in [f, g] {
        if h.len() != space.len() {
            return Err(Error::DimensionMismatch {
                expected: space.len(),
                found: h.len(),
            });
        }
    }
    Ok(f.values
        .iter()
        .zip(&g.values)
        .zip(&space.weights)
        .fold(creal(T::zero()), |acc, ((a, b), &w)| acc + a.conj() * b * w))
}

pub fn gram_matrix<T: Real>(fns: &[GroundFunction<T>], space: &GroundSpace<T>) -> Result<CMatrix<T>> {
    let n = fns.len();
    let mut g = CMatrix::<T>::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let v = inner_product(&fns[i], &fns[j], space)?;
            g[(i, j)] = v;
            g[(j, i)] = v.conj();
        }
    }
    Ok(g)
}

/// `n` functions on a ground space whose Gram matrix is the identity within
/// `tol`.
#[derive(Debug, Clone, PartialEq)]
pub struct OrthonormalFamily<T: Real> {
    space: GroundSpace<T>,
    functions: Vec<GroundFunction<T>>,
    tol: T,
}

impl<T: Real> OrthonormalFamily<T> {
    /// Wraps `functions` after checking `max |G - I| <= tol`.
    pub fn new(space: GroundSpace<T>, functions: Vec<GroundFunction<T>>, tol: T) -> Result<Self> {
        let g = gram_matrix(&functions, &space)?;
        let deviation = max_abs_diff_identity(&g);
        if deviation > tol {
            return Err(Error::NotOrthonormal {
                deviation: deviation.into(),
                tol: tol.into(),
            });
        }
        Ok(Self {
            space,
            functions,
            tol,
        })
    }

    pub fn space(&self) -> &GroundSpace<T> {
        &self.space
    }

    pub fn functions(&self) -> &[GroundFunction<T>] {
        &self.functions
    }

    pub fn len(&self) -> usize {
        self.functions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.functions.is_empty()
    }

    pub fn tol(&self) -> T {
        self.tol
    }

    pub fn gram(&self) -> CMatrix<T> {
        gram_matrix(&self.functions, &self.space).expect("family functions match their space")
    }

    /// `|E| × n` matrix with entries `ψ_ℓ(x) √μ(x)`. Its columns are
    /// orthonormal for the standard inner product on `C^|E|`.
    pub fn weighted_matrix(&self) -> CMatrix<T> {
        let e = self.space.len();
        CMatrix::<T>::from_fn(e, self.len(), |x, l| {
            self.functions[l].at(x) * self.space.weight(x).sqrt()
        })
    }

    /// `|E| × n` matrix of raw values `ψ_ℓ(x)`.
    pub fn value_matrix(&self) -> CMatrix<T> {
        CMatrix::<T>::from_fn(self.space.len(), self.len(), |x, l| self.functions[l].at(x))
    }

    /// The family `{φ'_j = Σ_i u_ij φ_i}` for an `n × n` unitary `u`: the
    /// action of an in-span unitary, which leaves the spanned subspace (and
    /// hence the Slater state up to a phase) unchanged.
    pub fn recombine(&self, u: &CMatrix<T>) -> Result<Self> {
        let n = self.len();
        if u.shape() != (n, n) {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: u.nrows(),
            });
        }
        let fns = (0..n)
            .map(|j| {
                let mut f = GroundFunction::constant(self.space.len(), creal(T::zero()));
                for i in 0..n {
                    f.axpy(u[(i, j)], &self.functions[i]);
                }
                f
            })
            .collect();
        Self::new(self.space.clone(), fns, self.tol.max(T::tol(1e-9)))
    }

    /// The family restricted to the listed indices (in that order).
    pub fn subfamily(&self, indices: &[usize]) -> Self {
        Self {
            space: self.space.clone(),
            functions: indices.iter().map(|&i| self.functions[i].clone()).collect(),
            tol: self.tol,
        }
    }

    pub fn to_document(&self) -> FamilyDocument {
        FamilyDocument {
            points: self.space.labels.clone(),
            weights: self.space.weights.iter().map(|&w| w.into()).collect(),
            coords: self
                .space
                .coords
                .as_ref()
                .map(|c| c.iter().map(|&v| v.into()).collect()),
            functions: self
                .functions
                .iter()
                .map(|f| f.values.iter().map(|z| [z.re.into(), z.im.into()]).collect())
                .collect(),
        }
    }

    pub fn from_document(doc: &FamilyDocument, tol: T) -> Result<Self> {
        let mut space = GroundSpace::new(
            doc.points.clone(),
            doc.weights.iter().map(|&w| T::lit(w)).collect(),
        )?;
        if let Some(c) = &doc.coords {
            space = space.with_coords(c.iter().map(|&v| T::lit(v)).collect())?;
        }
        let fns = doc
            .functions
            .iter()
            .map(|f| GroundFunction::new(f.iter().map(|[re, im]| cplx(T::lit(*re), T::lit(*im))).collect()))
            .collect();
        Self::new(space, fns, tol)
    }
}

/// JSON form of a ground space together with a family of functions on it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FamilyDocument {
    pub points: Vec<String>,
    pub weights: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coords: Option<Vec<f64>>,
    /// One list of `[re, im]` pairs per function.
    pub functions: Vec<Vec<[f64; 2]>>,
}

/// Modified Gram–Schmidt with one reorthogonalisation pass, in input order.
pub fn orthonormalize<T: Real>(
    fns: &[GroundFunction<T>],
    space: &GroundSpace<T>,
    tol: T,
) -> Result<OrthonormalFamily<T>> {
    let mut basis: Vec<GroundFunction<T>> = Vec::with_capacity(fns.len());
    for (index, f) in fns.iter().enumerate() {
        if f.len() != space.len() {
            return Err(Error::DimensionMismatch {
                expected: space.len(),
                found: f.len(),
            });
        }
        let mut v = f.clone();
        for _pass in 0..2 {
            for q in &basis {
                let c = inner_product(q, &v, space)?;
                v.axpy(-c, q);
            }
        }
        let norm = inner_product(&v, &v, space)?.re.max(T::zero()).sqrt();
        if norm < tol {
            return Err(Error::RankDeficient {
                index,
                residual: norm.into(),
            });
        }
        v.scale(creal(T::one() / norm));
        basis.push(v);
    }
    OrthonormalFamily::new(space.clone(), basis, tol)
}

/// Sign table of the Walsh functions on `2^levels` dyadic cells, sequency
/// order: row `k` changes sign exactly `k` times across `[0, 1]`.
pub fn walsh_signs(levels: u32) -> Vec<Vec<i8>> {
    assert!(levels >= 1, "walsh_signs needs at least one level");
    let cells = 1usize << levels;
    (0..cells)
        .map(|k| {
            // sequency index k corresponds to Paley index gray(k); Paley bit i
            // selects the Rademacher function flipping at scale 2^-(i+1).
            let paley = k ^ (k >> 1);
            (0..cells)
                .map(|cell| {
                    let mut parity = 0u32;
                    for i in 0..levels as usize {
                        if paley >> i & 1 == 1 {
                            parity ^= (cell >> (levels as usize - 1 - i) & 1) as u32;
                        }
                    }
                    if parity == 0 {
                        1
                    } else {
                        -1
                    }
                })
                .collect()
        })
        .collect()
}

/// The uniform dyadic grid of `2^levels` cells on `[0, 1]` (coordinates at
/// the cell midpoints) and the Walsh functions `w_0, ..., w_{2^levels - 1}`.
pub fn walsh_family<T: Real>(levels: u32) -> (GroundSpace<T>, Vec<GroundFunction<T>>) {
    let cells = 1usize << levels;
    let labels = (0..cells).map(|c| format!("[{c}/{cells},{}/{cells})", c + 1)).collect();
    let w = T::one() / T::from_count(cells);
    let mids = (0..cells)
        .map(|c| (T::from_count(c) + T::lit(0.5)) / T::from_count(cells))
        .collect();
    let space = GroundSpace::new(labels, vec![w; cells])
        .and_then(|s| s.with_coords(mids))
        .expect("dyadic grid is a valid ground space");
    let fns = walsh_signs(levels)
        .into_iter()
        .map(|row| GroundFunction::new(row.into_iter().map(|s| creal(T::lit(s as f64))).collect()))
        .collect();
    (space, fns)
}

/// Haar-random orthonormal `n`-frame in `L²(E, μ)`, deterministic in `seed`.
///
/// Draws i.i.d. standard complex Gaussian coordinates in the orthonormal
/// basis `{μ(x)^{-1/2} 1_x}` and orthonormalises them.
pub fn random_orthonormal<T: Real>(space: &GroundSpace<T>, n: usize, seed: u64) -> Result<OrthonormalFamily<T>> {
    if n > space.len() {
        return Err(Error::InvalidArgument(format!(
            "cannot draw {n} orthonormal functions on {} points",
            space.len()
        )));
    }
    let mut rng = rng::stream(seed, 0);
    let fns: Vec<GroundFunction<T>> = (0..n)
        .map(|_| {
            GroundFunction::new(
                (0..space.len())
                    .map(|x| complex_gaussian::<T, _>(&mut rng) / space.weight(x).sqrt())
                    .collect(),
            )
        })
        .collect();
    orthonormalize(&fns, space, T::tol(DEFAULT_TOL))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn uniform4() -> GroundSpace<f64> {
        GroundSpace::uniform(4).unwrap()
    }

    #[test]
    fn constant_function_has_unit_norm() {
        let s = uniform4();
        let one = GroundFunction::constant(4, creal(1.0));
        assert!((inner_product(&one, &one, &s).unwrap() - creal(1.0)).norm() < 1e-15);
    }

    #[test]
    fn walsh_one_and_two_are_orthogonal() {
        let (s, w) = walsh_family::<f64>(2);
        assert_eq!(inner_product(&w[1], &w[2], &s).unwrap(), creal(0.0));
    }

    #[test]
    fn scaled_indicator_is_normalized() {
        let s = GroundSpace::<f64>::weighted(vec![0.1, 0.7, 0.2]).unwrap();
        let f = GroundFunction::normalized_indicator(&s, 1);
        assert!((inner_product(&f, &f, &s).unwrap().re - 1.0).abs() < 1e-14);
    }

    #[test]
    fn inner_product_is_conjugate_linear_in_first_argument() {
        let s = GroundSpace::weighted(vec![0.5, 0.25, 0.25]).unwrap();
        let f = GroundFunction::new(vec![cplx(1.0, 2.0), cplx(0.0, -1.0), cplx(3.0, 0.5)]);
        let g = GroundFunction::new(vec![cplx(-1.0, 0.0), cplx(2.0, 2.0), cplx(0.0, 1.0)]);
        let a = inner_product(&f, &g, &s).unwrap();
        let b = inner_product(&g, &f, &s).unwrap();
        assert!((a - b.conj()).norm() < 1e-14);
        let mut fi = f.clone();
        fi.scale(cplx(0.0, 1.0));
        let c = inner_product(&fi, &g, &s).unwrap();
        assert!((c - a * cplx(0.0, -1.0)).norm() < 1e-14);
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let s = uniform4();
        let f = GroundFunction::constant(3, creal(1.0));
        assert!(matches!(
            inner_product(&f, &f, &s),
            Err(Error::DimensionMismatch { expected: 4, found: 3 })
        ));
    }

    #[test]
    fn gram_examples() {
        let s = uniform4();
        let f = GroundFunction::constant(4, creal(3.0));
        let g = gram_matrix(&[f], &s).unwrap();
        assert!((g[(0, 0)].re - 9.0).abs() < 1e-14);
        let one = GroundFunction::constant(4, creal(1.0));
        let g2 = gram_matrix(&[one.clone(), one], &s).unwrap();
        assert!(g2.iter().all(|z| (z - creal(1.0)).norm() < 1e-15));
    }

    #[test]
    fn orthonormalize_polynomials_on_unequal_weights() {
        let s = GroundSpace::weighted(vec![0.1, 0.2, 0.3, 0.15, 0.25])
            .unwrap()
            .with_coords(vec![0.0, 0.3, 0.5, 0.8, 1.0])
            .unwrap();
        let one = GroundFunction::constant(5, creal(1.0));
        let x = GroundFunction::from_real(s.coords().unwrap());
        let fam = orthonormalize(&[one, x], &s, 1e-9).unwrap();
        assert!(max_abs_diff_identity(&fam.gram()) < 1e-12);
    }

    #[test]
    fn orthonormalize_keeps_orthonormal_input() {
        let (s, w) = walsh_family::<f64>(2);
        let fam = orthonormalize(&w, &s, 1e-9).unwrap();
        for (a, b) in fam.functions().iter().zip(&w) {
            for x in 0..4 {
                assert!((a.at(x) - b.at(x)).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn dependent_input_reports_offending_index() {
        let s = uniform4();
        let f = GroundFunction::from_real(&[1.0, 2.0, 0.0, 1.0]);
        let g = GroundFunction::from_real(&[2.0, 4.0, 0.0, 2.0]);
        let err = orthonormalize(&[f, g], &s, 1e-9).unwrap_err();
        assert!(matches!(err, Error::RankDeficient { index: 1, .. }));
    }

    #[test]
    fn walsh_values_in_sequency_order() {
        let rows = walsh_signs(2);
        assert_eq!(rows[0], vec![1, 1, 1, 1]);
        assert_eq!(rows[1], vec![1, 1, -1, -1]);
        assert_eq!(rows[2], vec![1, -1, -1, 1]);
        assert_eq!(rows[3], vec![1, -1, 1, -1]);
        // w2 * w1 = w3
        let prod: Vec<i8> = rows[1].iter().zip(&rows[2]).map(|(a, b)| a * b).collect();
        assert_eq!(prod, rows[3]);
    }

    #[test]
    fn walsh_rows_are_exactly_orthogonal_with_sequency_counts() {
        for levels in 1..=5 {
            let rows = walsh_signs(levels);
            for (k, r) in rows.iter().enumerate() {
                let changes = r.windows(2).filter(|w| w[0] != w[1]).count();
                assert_eq!(changes, k);
                for other in &rows[k + 1..] {
                    let dot: i64 = r.iter().zip(other).map(|(a, b)| (*a as i64) * (*b as i64)).sum();
                    assert_eq!(dot, 0);
                }
            }
        }
    }

    #[test]
    fn walsh_family_is_orthonormal() {
        let (s, w) = walsh_family::<f64>(3);
        let fam = OrthonormalFamily::new(s, w, 1e-12).unwrap();
        assert_eq!(fam.len(), 8);
    }

    #[test]
    fn random_frame_is_deterministic_and_orthonormal() {
        let s = GroundSpace::<f64>::uniform(5).unwrap();
        let a = random_orthonormal(&s, 5, 9).unwrap();
        let b = random_orthonormal(&s, 5, 9).unwrap();
        assert_eq!(a, b);
        assert!(max_abs_diff_identity(&a.gram()) < 1e-10);
        assert!(random_orthonormal(&s, 6, 9).is_err());
    }

    #[test]
    fn random_frame_works_in_single_precision() {
        let s = GroundSpace::<f32>::weighted(vec![0.2, 0.3, 0.1, 0.4]).unwrap();
        let a = random_orthonormal(&s, 3, 1).unwrap();
        assert!(max_abs_diff_identity(&a.gram()) < 1e-5);
    }

    #[test]
    fn document_round_trip() {
        let s = GroundSpace::<f64>::weighted(vec![0.25, 0.5, 0.25]).unwrap();
        let a = random_orthonormal(&s, 2, 4).unwrap();
        let json = serde_json::to_string(&a.to_document()).unwrap();
        let doc: FamilyDocument = serde_json::from_str(&json).unwrap();
        let b = OrthonormalFamily::from_document(&doc, 1e-9).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn recombination_stays_orthonormal() {
        let s = GroundSpace::<f64>::uniform(6).unwrap();
        let a = random_orthonormal(&s, 3, 2).unwrap();
        let mut r = rng::stream(1, 1);
        let u = crate::linalg::haar_unitary::<f64, _>(3, &mut r);
        let b = a.recombine(&u).unwrap();
        assert!(max_abs_diff_identity(&b.gram()) < 1e-12);
    }
}
