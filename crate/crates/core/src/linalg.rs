//! Dense linear-algebra helpers shared by the other modules.
//!
//! Small complex problems (orbital matrices, single-particle operators of
//! dimension `d`) go through nalgebra. The one large problem, the full
//! spectrum of the many-body Hamiltonian, goes through faer.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;

pub(crate) const ZERO: C64 = C64::new(0.0, 0.0);
pub(crate) const ONE: C64 = C64::new(1.0, 0.0);

/// Determinant of the `n x n` row-major matrix in `buf`, destroying it.
///
/// Gaussian elimination with partial pivoting; `n` is the particle number so
/// this is only ever called on tiny matrices.
pub fn det_in_place(buf: &mut [C64], n: usize) -> C64 {
    debug_assert_eq!(buf.len(), n * n);
    match n {
        0 => return ONE,
        1 => return buf[0],
        2 => return buf[0] * buf[3] - buf[1] * buf[2],
        _ => {}
    }
    let mut det = ONE;
    for col in 0..n {
        let mut pivot = col;
        let mut best = buf[col * n + col].norm_sqr();
        for row in col + 1..n {
            let v = buf[row * n + col].norm_sqr();
            if v > best {
                best = v;
                pivot = row;
            }
        }
        if best == 0.0 {
            return ZERO;
        }
        if pivot != col {
            for k in 0..n {
                buf.swap(col * n + k, pivot * n + k);
            }
            det = -det;
        }
        let p = buf[col * n + col];
        det *= p;
        let inv = p.inv();
        for row in col + 1..n {
            let factor = buf[row * n + col] * inv;
            if factor == ZERO {
                continue;
            }
            for k in col + 1..n {
                let sub = factor * buf[col * n + k];
                buf[row * n + k] -= sub;
            }
        }
    }
    det
}

/// Eigendecomposition of a small Hermitian matrix, eigenvalues descending.
pub fn hermitian_eigen_desc(m: &DMatrix<C64>) -> (Vec<f64>, DMatrix<C64>) {
    let n = m.nrows();
    // symmetrize explicitly so round-off in the input cannot leak in
    let h = DMatrix::from_fn(n, n, |i, j| (m[(i, j)] + m[(j, i)].conj()) * 0.5);
    let eig = h.symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let vectors = DMatrix::from_fn(n, n, |i, j| eig.eigenvectors[(i, order[j])]);
    (values, vectors)
}

/// Full eigendecomposition of a dense real symmetric matrix, eigenvalues ascending.
pub fn symmetric_eigen_large(m: &faer::Mat<f64>) -> Result<(Vec<f64>, faer::Mat<f64>)> {
    let eig = m
        .self_adjoint_eigen(faer::Side::Lower)
        .map_err(|e| Error::Eigen(format!("{e:?}")))?;
    let s = eig.S();
    let values = (0..m.nrows()).map(|i| s[i]).collect();
    Ok((values, eig.U().to_owned()))
}

/// Rotate `v` by a global phase so its largest-magnitude entry is real positive.
pub fn fix_phase(v: &mut [C64]) {
    let mut best = 0usize;
    let mut best_norm = -1.0;
    for (i, z) in v.iter().enumerate() {
        let n = z.norm_sqr();
        if n > best_norm * (1.0 + 1e-12) {
            best = i;
            best_norm = n;
        }
    }
    if best_norm <= 0.0 {
        return;
    }
    let phase = v[best].conj() / v[best].norm();
    for z in v.iter_mut() {
        *z *= phase;
    }
    v[best] = C64::new(v[best].re, 0.0);
}

pub fn fix_phase_column(m: &mut DMatrix<C64>, col: usize) {
    let mut v: Vec<C64> = m.column(col).iter().copied().collect();
    fix_phase(&mut v);
    m.column_mut(col).copy_from_slice(&v);
}

/// Largest entry of `|V^dagger V - I|`.
pub fn orthonormality_error(m: &DMatrix<C64>) -> f64 {
    let gram = m.adjoint() * m;
    let mut worst = 0.0f64;
    for i in 0..gram.nrows() {
        for j in 0..gram.ncols() {
            let target = if i == j { ONE } else { ZERO };
            worst = worst.max((gram[(i, j)] - target).norm());
        }
    }
    worst
}

/// Modified Gram-Schmidt with one re-orthogonalization pass, in column order.
///
/// Column `k` of the result spans the same flag as columns `0..=k` of the
/// input, so the orbital order is preserved.
pub fn orthonormalize_columns(m: &mut DMatrix<C64>) -> Result<()> {
    let cols = m.ncols();
    for k in 0..cols {
        let original = m.column(k).norm();
        for _pass in 0..2 {
            for j in 0..k {
                let proj = m.column(j).dotc(&m.column(k));
                let qj = m.column(j).clone_owned();
                m.column_mut(k).axpy(-proj, &qj, ONE);
            }
        }
        let norm = m.column(k).norm();
        if norm <= 1e-13 * original.max(1e-300) || norm == 0.0 {
            return Err(Error::Degenerate(format!(
                "column {k} is linearly dependent on the previous ones"
            )));
        }
        m.column_mut(k).unscale_mut(norm);
    }
    Ok(())
}

/// Cosines of the principal angles between the column spaces of two
/// orthonormal matrices, descending.
pub fn principal_cosines(a: &DMatrix<C64>, b: &DMatrix<C64>) -> Vec<f64> {
    let overlap = a.adjoint() * b;
    let mut s: Vec<f64> = overlap
        .singular_values()
        .iter()
        .map(|x| x.min(1.0))
        .collect();
    s.sort_by(|x, y| y.total_cmp(x));
    s
}

pub(crate) fn vec_norm(v: &[C64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub(crate) fn vdot(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

pub(crate) fn to_dvector(v: &[C64]) -> DVector<C64> {
    DVector::from_column_slice(v)
}
