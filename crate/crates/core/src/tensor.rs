//! Index bookkeeping for operators on `H_1 ⊗ ... ⊗ H_n`.
//!
//! Basis index convention: `(x_1, ..., x_n)` maps to
//! `x_1 d_2...d_n + x_2 d_3...d_n + ... + x_n`, i.e. the first subsystem is
//! the most significant digit.

use crate::error::{Error, Result};
use crate::linalg::CMatrix;
use crate::scalar::{creal, Real};

pub fn total_dim(dims: &[usize]) -> usize {
    dims.iter().product()
}

pub(crate) fn digits(mut index: usize, dims: &[usize], out: &mut [usize]) {
    for (slot, &d) in out.iter_mut().zip(dims).rev() {
        *slot = index % d;
        index /= d;
    }
}

fn check(m_dim: usize, dims: &[usize], sites: &[usize]) -> Result<()> {
    if total_dim(dims) != m_dim {
        return Err(Error::DimensionMismatch {
            expected: total_dim(dims),
            found: m_dim,
        });
    }
    if let Some(&bad) = sites.iter().find(|&&s| s >= dims.len()) {
        return Err(Error::InvalidArgument(format!(
            "subsystem index {bad} out of range for {} subsystems",
            dims.len()
        )));
    }
    Ok(())
}

/// For each full basis index, its index in the kept and in the traced factor.
fn split_indices(dims: &[usize], traced: &[usize]) -> (Vec<usize>, Vec<usize>, usize) {
    let n = dims.len();
    let is_traced: Vec<bool> = (0..n).map(|i| traced.contains(&i)).collect();
    let kept_dim: usize = (0..n).filter(|&i| !is_traced[i]).map(|i| dims[i]).product();
    let total = total_dim(dims);
    let mut kept = vec![0; total];
    let mut tr = vec![0; total];
    let mut dig = vec![0; n];
    for idx in 0..total {
        digits(idx, dims, &mut dig);
        let (mut k, mut t) = (0, 0);
        for i in 0..n {
            if is_traced[i] {
                t = t * dims[i] + dig[i];
            } else {
                k = k * dims[i] + dig[i];
            }
        }
        kept[idx] = k;
        tr[idx] = t;
    }
    (kept, tr, kept_dim)
}

/// Traces out the subsystems listed in `traced`; the remaining factors keep
/// their order.
pub fn partial_trace<T: Real>(m: &CMatrix<T>, dims: &[usize], traced: &[usize]) -> Result<CMatrix<T>> {
    check(m.nrows(), dims, traced)?;
    let (kept, tr, kept_dim) = split_indices(dims, traced);
    let total = m.nrows();
    let mut out = CMatrix::<T>::zeros(kept_dim, kept_dim);
    for i in 0..total {
        for j in 0..total {
            if tr[i] == tr[j] {
                out[(kept[i], kept[j])] += m[(i, j)];
            }
        }
    }
    Ok(out)
}

/// `1_site ⊗ g`, where `g` acts on every subsystem except `site`.
pub fn embed_identity<T: Real>(g: &CMatrix<T>, dims: &[usize], site: usize) -> Result<CMatrix<T>> {
    embed_identity_on(g, dims, &[site])
}

/// `1_S ⊗ g`, where `g` acts on the subsystems outside `sites`.
pub fn embed_identity_on<T: Real>(g: &CMatrix<T>, dims: &[usize], sites: &[usize]) -> Result<CMatrix<T>> {
    check(total_dim(dims), dims, sites)?;
    let (rest, local, rest_dim) = split_indices(dims, sites);
    if g.nrows() != rest_dim {
        return Err(Error::DimensionMismatch {
            expected: rest_dim,
            found: g.nrows(),
        });
    }
    let total = total_dim(dims);
    let mut out = CMatrix::<T>::zeros(total, total);
    for i in 0..total {
        for j in 0..total {
            if local[i] == local[j] {
                out[(i, j)] = g[(rest[i], rest[j])];
            }
        }
    }
    Ok(out)
}

/// Orthogonal (Hilbert–Schmidt) projection onto operators of the form
/// `1_site ⊗ G`: `Y ↦ (1/d_site) 1_site ⊗ tr_site Y`.
pub fn identity_component<T: Real>(y: &CMatrix<T>, dims: &[usize], site: usize) -> Result<CMatrix<T>> {
    identity_component_on(y, dims, &[site])
}

/// `Y ↦ (1/d_S) 1_S ⊗ tr_S Y`, the product of the single-site projections
/// over `sites` (they commute). The empty set gives `Y`.
pub fn identity_component_on<T: Real>(y: &CMatrix<T>, dims: &[usize], sites: &[usize]) -> Result<CMatrix<T>> {
    if sites.is_empty() {
        check(y.nrows(), dims, sites)?;
        return Ok(y.clone());
    }
    let reduced = partial_trace(y, dims, sites)?;
    let d: usize = sites.iter().map(|&s| dims[s]).product();
    let scale = creal(T::one() / T::from_count(d));
    embed_identity_on(&(reduced * scale), dims, sites)
}
