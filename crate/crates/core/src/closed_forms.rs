//! Analytic companions to the iterative optimizer: the one-particle reduced
//! density matrix and natural orbitals, exact optima for two particles, the
//! natural-occupation upper bound for general `N`, the hole-orbital
//! construction for `N` fermions in `N + 1` orbitals, and the density
//! distance bound.

use std::fmt::Write as _;

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fock::{factorial, FockBasis, WaveFunction};
use crate::lattice::density;
use crate::linalg::{self, C64, ZERO};
use crate::projection::slater_state;

const CHUNK: usize = 512;

/// `rho(x, y) = <f| c_y^dag c_x |f>`, trace `N`.
#[derive(Debug, Clone, PartialEq)]
pub struct ReducedDensityMatrix {
    matrix: DMatrix<C64>,
    n_particles: usize,
}

impl ReducedDensityMatrix {
    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.matrix
    }

    pub fn n_particles(&self) -> usize {
        self.n_particles
    }

    pub fn trace(&self) -> f64 {
        self.matrix.diagonal().iter().map(|z| z.re).sum()
    }

    /// Occupation numbers (descending) and natural orbitals as columns.
    pub fn natural_orbitals(&self) -> (Vec<f64>, DMatrix<C64>) {
        let (values, mut vectors) = linalg::hermitian_eigen_desc(&self.matrix);
        for k in 0..vectors.ncols() {
            linalg::fix_phase_column(&mut vectors, k);
        }
        (values, vectors)
    }

    pub fn occupations(&self) -> Vec<f64> {
        self.natural_orbitals().0
    }

    /// `d` rows of `2d` values, `(re, im)` interleaved.
    pub fn to_csv(&self) -> String {
        let d = self.matrix.nrows();
        let mut out = String::new();
        for i in 0..d {
            let row: Vec<String> = (0..d)
                .flat_map(|j| {
                    let z = self.matrix[(i, j)];
                    [format!("{:.16e}", z.re), format!("{:.16e}", z.im)]
                })
                .collect();
            let _ = writeln!(out, "{}", row.join(","));
        }
        out
    }
}

pub fn one_particle_rdm(f: &WaveFunction) -> ReducedDensityMatrix {
    let d = f.dim();
    let n = f.n_particles();
    let basis = f.basis();
    let amps = f.amplitudes();
    let n_chunks = basis.len().div_ceil(CHUNK);
    let partials: Vec<Vec<C64>> = (0..n_chunks)
        .into_par_iter()
        .map(|c| {
            let mut acc = vec![ZERO; d * d];
            let mut target = vec![0usize; n];
            for k in c * CHUNK..((c + 1) * CHUNK).min(basis.len()) {
                let cx = amps[k];
                if cx == ZERO {
                    continue;
                }
                let x = basis.state(k);
                let mask = x.iter().fold(0u64, |m, &s| m | (1 << s));
                for &from in x {
                    acc[from * d + from] += cx.norm_sqr();
                    for to in 0..d {
                        if mask & (1 << to) != 0 {
                            continue;
                        }
                        let (lo, hi) = (from.min(to), from.max(to));
                        let between = (mask >> (lo + 1)) & ((1u64 << (hi - lo - 1)) - 1);
                        let sign = if between.count_ones().is_multiple_of(2) {
                            1.0
                        } else {
                            -1.0
                        };
                        target.copy_from_slice(x);
                        let p = target.iter().position(|&s| s == from).unwrap();
                        target[p] = to;
                        target.sort_unstable();
                        let k2 = basis.rank_unchecked(&target);
                        // <X'| c_to^dag c_from |X> = sign
                        acc[from * d + to] += amps[k2].conj() * cx * sign;
                    }
                }
            }
            acc
        })
        .collect();
    let mut flat = vec![ZERO; d * d];
    for part in partials {
        for (a, b) in flat.iter_mut().zip(part) {
            *a += b;
        }
    }
    ReducedDensityMatrix {
        matrix: DMatrix::from_fn(d, d, |i, j| flat[i * d + j]),
        n_particles: n,
    }
}

/// Exact optimum for two fermions with an even number of orbitals.
#[derive(Debug, Clone)]
pub struct TwoFermionOptimum {
    /// `sum_{alpha <= M/2} C_alpha`.
    pub value: f64,
    /// Pair occupations `C_alpha`, descending.
    pub pair_occupations: Vec<f64>,
    /// The `M` most occupied natural orbitals.
    pub orbitals: DMatrix<C64>,
    /// `lambda_M - lambda_{M+1}` of `rho`; small values mean an ill-conditioned optimal subspace.
    pub gap: f64,
}

pub fn imax_two_fermion(f: &WaveFunction, m: usize) -> Result<TwoFermionOptimum> {
    if f.n_particles() != 2 {
        return Err(Error::mismatch("N = 2", format!("N = {}", f.n_particles())));
    }
    if m % 2 == 1 {
        return Err(Error::OddOrbitalCount(m));
    }
    let d = f.dim();
    if m == 0 || m > d {
        return Err(Error::InvalidDimension(format!(
            "need 2 <= M <= d, got M={m} d={d}"
        )));
    }
    let rdm = one_particle_rdm(f);
    let (values, vectors) = linalg::hermitian_eigen_desc(rdm.matrix());
    let pair_occupations: Vec<f64> = values
        .chunks(2)
        .map(|p| p.iter().sum::<f64>() / p.len() as f64)
        .collect();
    let value = values[..m].iter().sum::<f64>() / 2.0;
    let mut orbitals = vectors.columns(0, m).clone_owned();
    for k in 0..m {
        let col = orbitals.column(k);
        if let Some(first) = col.iter().copied().find(|z| z.norm() > 1e-12) {
            let phase = first.conj() / first.norm();
            for z in orbitals.column_mut(k).iter_mut() {
                *z *= phase;
            }
        }
    }
    let gap = if m < d {
        values[m - 1] - values[m]
    } else {
        f64::INFINITY
    };
    Ok(TwoFermionOptimum {
        value: value.clamp(0.0, 1.0),
        pair_occupations,
        orbitals,
        gap,
    })
}

/// `sum_{alpha <= M} D_alpha` for a symmetric two-boson amplitude matrix
/// `b(x1, x2)` normalized as `sum |b|^2 = 1`.
pub fn imax_two_boson(b: &DMatrix<C64>, m: usize) -> Result<f64> {
    Ok(boson_occupations(b)?[..m.min(b.nrows())]
        .iter()
        .sum::<f64>()
        .clamp(0.0, 1.0))
}

/// Canonical occupations `D_alpha` of `b = sum sqrt(D) psi psi`, descending.
pub fn boson_occupations(b: &DMatrix<C64>) -> Result<Vec<f64>> {
    if b.nrows() != b.ncols() {
        return Err(Error::mismatch(
            "square matrix",
            format!("{}x{}", b.nrows(), b.ncols()),
        ));
    }
    let asym = (b - b.transpose())
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max);
    if asym > 1e-12 {
        return Err(Error::NotSymmetric(asym));
    }
    let norm2: f64 = b.iter().map(|z| z.norm_sqr()).sum();
    if (norm2 - 1.0).abs() > 1e-10 {
        return Err(Error::NotNormalized(norm2));
    }
    // D_alpha are the squared singular values of b
    let bb = b * b.adjoint();
    let (values, _) = linalg::hermitian_eigen_desc(&bb);
    Ok(values.into_iter().map(|x| x.max(0.0)).collect())
}

/// `(1/N) sum_{i <= M} lambda_i`, clipped to `[0, 1]`.
pub fn upper_bound(f: &WaveFunction, m: usize) -> Result<f64> {
    if m == 0 || m > f.dim() {
        return Err(Error::InvalidDimension(format!(
            "need 1 <= M <= d, got M={m} d={}",
            f.dim()
        )));
    }
    let occ = one_particle_rdm(f).occupations();
    Ok(upper_bound_from_occupations(&occ, f.n_particles(), m))
}

pub fn upper_bound_from_occupations(occupations: &[f64], n: usize, m: usize) -> f64 {
    (occupations[..m].iter().sum::<f64>() / n as f64).clamp(0.0, 1.0)
}

/// Hole orbital of an `N`-fermion state in `N + 1` orbitals.
#[derive(Debug, Clone)]
pub struct HoleDecomposition {
    /// Normalized, `sum_j (-1)^j A_j^* e_j` with `A_j` the coefficient of the
    /// state missing site `j` (1-based).
    pub hole_orbital: Vec<C64>,
    /// Orthonormal basis of the complement, `(N+1) x N`.
    pub complement_orbitals: DMatrix<C64>,
    /// `|| f - e^{i theta} S ||` for the Slater determinant `S` of the complement.
    pub reconstruction_error: f64,
    /// Norm of `sum_{x_N} f(.., x_N) hole^*(x_N)`.
    pub contraction_residual: f64,
}

pub fn hole_decomposition(f: &WaveFunction) -> Result<HoleDecomposition> {
    let n = f.n_particles();
    let d = f.dim();
    if d != n + 1 {
        return Err(Error::mismatch(
            format!("d = N + 1 = {}", n + 1),
            format!("d = {d}"),
        ));
    }
    let basis = f.basis();
    let mut hole = vec![ZERO; d];
    let mut state = Vec::with_capacity(n);
    for (j, h) in hole.iter_mut().enumerate() {
        state.clear();
        state.extend((0..d).filter(|&s| s != j));
        let a = f.amplitudes()[basis.rank_unchecked(&state)];
        // 1-based (-1)^j
        let sign = if (j + 1) % 2 == 0 { 1.0 } else { -1.0 };
        *h = a.conj() * sign;
    }
    let norm = linalg::vec_norm(&hole);
    if norm < 1e-14 {
        return Err(Error::Degenerate("state vanishes identically".into()));
    }
    for h in &mut hole {
        *h /= norm;
    }

    let contraction_residual = contraction_norm(f, &hole);

    let mut q: Vec<Vec<C64>> = vec![hole.clone()];
    for i in 0..d {
        if q.len() == d {
            break;
        }
        let mut r = vec![ZERO; d];
        r[i] = C64::new(1.0, 0.0);
        for _ in 0..2 {
            for qv in &q {
                let p = linalg::vdot(qv, &r);
                for (ri, qi) in r.iter_mut().zip(qv) {
                    *ri -= p * qi;
                }
            }
        }
        let rn = linalg::vec_norm(&r);
        if rn > 1e-6 {
            q.push(r.into_iter().map(|z| z / rn).collect());
        }
    }
    let complement = DMatrix::from_fn(d, n, |i, j| q[j + 1][i]);
    let slater = slater_state(basis.clone(), &complement)?;
    let ov = slater.inner(f)?;
    let phase = if ov.norm() > 0.0 {
        ov / ov.norm()
    } else {
        C64::new(1.0, 0.0)
    };
    let reconstruction_error = f
        .amplitudes()
        .iter()
        .zip(slater.amplitudes())
        .map(|(a, s)| (a - s * phase).norm_sqr())
        .sum::<f64>()
        .sqrt();
    Ok(HoleDecomposition {
        hole_orbital: hole,
        complement_orbitals: complement,
        reconstruction_error,
        contraction_residual,
    })
}

/// `|| sum_x f(y_1..y_{N-1}, x) h^*(x) ||` over ordered `(N-1)`-tuples `y`.
fn contraction_norm(f: &WaveFunction, h: &[C64]) -> f64 {
    let n = f.n_particles();
    if n == 1 {
        return linalg::vdot(h, f.amplitudes()).norm();
    }
    let basis = f.basis();
    let rest = FockBasis::new(f.dim(), n - 1).expect("N - 1 >= 1");
    let scale = 1.0 / factorial(n).sqrt();
    let mut full = vec![0usize; n];
    let mut total = 0.0;
    for y in rest.iter() {
        let mut acc = ZERO;
        for (x, hx) in h.iter().enumerate() {
            if y.contains(&x) {
                continue;
            }
            // moving x from the last slot into sorted position
            let larger = y.iter().filter(|&&s| s > x).count();
            let mut k = 0;
            for &s in y.iter().filter(|&&s| s < x) {
                full[k] = s;
                k += 1;
            }
            full[k] = x;
            for (slot, &s) in full[k + 1..].iter_mut().zip(y.iter().filter(|&&s| s > x)) {
                *slot = s;
            }
            let c = f.amplitudes()[basis.rank_unchecked(&full)] * scale;
            let signed = if larger % 2 == 0 { c } else { -c };
            acc += signed * hx.conj();
        }
        total += acc.norm_sqr();
    }
    total.sqrt()
}

/// Inner-product closeness vs. density closeness of two states.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DensityDistance {
    /// `1 - |<f1|f2>|`.
    pub epsilon: f64,
    /// `(1/N) sum_x |n_1(x) - n_2(x)|`.
    pub delta1: f64,
    /// `sqrt(8 epsilon)`.
    pub bound: f64,
    pub bound_ok: bool,
}

pub fn density_distance_bound_check(
    f1: &WaveFunction,
    f2: &WaveFunction,
) -> Result<DensityDistance> {
    let ov = f1.inner(f2)?;
    // aligning the global phase of f2 makes the overlap |<f1|f2>|
    let epsilon = (1.0 - ov.norm()).max(0.0);
    let n1 = density(f1);
    let n2 = density(f2);
    let delta1 =
        n1.iter().zip(&n2).map(|(a, b)| (a - b).abs()).sum::<f64>() / f1.n_particles() as f64;
    let bound = (8.0 * epsilon).sqrt();
    Ok(DensityDistance {
        epsilon,
        delta1,
        bound,
        bound_ok: delta1 <= bound + 1e-10,
    })
}
