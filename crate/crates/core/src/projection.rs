//! Evaluation of a candidate orbital set against a target state.
//!
//! For orthonormal orbitals `V = [phi_1 .. phi_M]` (a `d x M` matrix) every
//! increasing `N`-tuple `J` of orbital indices defines a Slater determinant
//! `S_J` whose coefficient on the ordered site tuple `X` is `det V[X, J]`.
//! The overlaps `eta_J = <f|S_J>` and the captured weight
//! `I = sum_J |eta_J|^2` are computed here, together with the one-orbital
//! contractions `g_J` that drive the orbital update.

use std::fmt::Write as _;
use std::io::BufRead;
use std::sync::Arc;

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fock::{parse_header, FockBasis, WaveFunction};
use crate::linalg::{self, det_in_place, C64, ZERO};

/// Orthonormality tolerance for [`OrbitalSet`] columns.
pub const ORTHONORMAL_TOL: f64 = 1e-10;

/// Basis states handled per parallel task. Fixed so that the reduction order,
/// and therefore every floating-point result, does not depend on the thread count.
const CHUNK: usize = 512;

/// `M` orthonormal orbitals on a `d`-dimensional single-particle space.
#[derive(Debug, Clone, PartialEq)]
pub struct OrbitalSet {
    matrix: DMatrix<C64>,
}

impl OrbitalSet {
    /// Wrap a `d x M` matrix, checking column orthonormality.
    pub fn new(matrix: DMatrix<C64>) -> Result<Self> {
        if matrix.ncols() == 0 || matrix.ncols() > matrix.nrows() {
            return Err(Error::InvalidDimension(format!(
                "need 1 <= M <= d, got d={} M={}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        let err = linalg::orthonormality_error(&matrix);
        if err > ORTHONORMAL_TOL {
            return Err(Error::NotOrthonormal(err));
        }
        Ok(Self { matrix })
    }

    /// Orthonormalize the columns of an arbitrary full-rank matrix (column order kept).
    pub fn orthonormalized(mut matrix: DMatrix<C64>) -> Result<Self> {
        linalg::orthonormalize_columns(&mut matrix)?;
        Self::new(matrix)
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn n_orbitals(&self) -> usize {
        self.matrix.ncols()
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.matrix
    }

    pub(crate) fn matrix_mut(&mut self) -> &mut DMatrix<C64> {
        &mut self.matrix
    }

    pub fn into_matrix(self) -> DMatrix<C64> {
        self.matrix
    }

    pub fn orbital(&self, k: usize) -> Vec<C64> {
        self.matrix.column(k).iter().copied().collect()
    }

    pub fn orthonormality_error(&self) -> f64 {
        linalg::orthonormality_error(&self.matrix)
    }

    /// Circular shift `phi_i -> phi_{i+1}`: the last orbital moves to slot one.
    pub fn rotate_right(&mut self) {
        let m = self.n_orbitals();
        if m > 1 {
            let last = self.matrix.column(m - 1).clone_owned();
            for k in (1..m).rev() {
                let prev = self.matrix.column(k - 1).clone_owned();
                self.matrix.set_column(k, &prev);
            }
            self.matrix.set_column(0, &last);
        }
    }

    /// Keep only the first `m` orbitals.
    pub fn truncated(&self, m: usize) -> Result<Self> {
        if m == 0 || m > self.n_orbitals() {
            return Err(Error::InvalidDimension(format!(
                "cannot keep {m} of {} orbitals",
                self.n_orbitals()
            )));
        }
        Ok(Self {
            matrix: self.matrix.columns(0, m).clone_owned(),
        })
    }

    /// Text form: `# d=<d> M=<M>`, then `d` rows of `2M` floats (re, im interleaved).
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# d={} M={}", self.dim(), self.n_orbitals());
        for i in 0..self.dim() {
            let row: Vec<String> = (0..self.n_orbitals())
                .flat_map(|j| {
                    let z = self.matrix[(i, j)];
                    [format!("{:.16e}", z.re), format!("{:.16e}", z.im)]
                })
                .collect();
            let _ = writeln!(out, "{}", row.join(" "));
        }
        out
    }

    pub fn read_text<R: BufRead>(reader: R) -> Result<Self> {
        let mut header = None;
        let mut rows: Vec<Vec<f64>> = Vec::new();
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            let t = line.trim();
            if t.is_empty() {
                continue;
            }
            if header.is_none() {
                header = Some(parse_header(t, i + 1, &["d", "M"])?);
                continue;
            }
            let row = t
                .split_whitespace()
                .map(|s| s.parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| Error::Parse {
                    line: i + 1,
                    msg: e.to_string(),
                })?;
            rows.push(row);
        }
        let header = header.ok_or(Error::Parse {
            line: 0,
            msg: "empty orbital file".into(),
        })?;
        let (d, m) = (header[0], header[1]);
        if rows.len() != d || rows.iter().any(|r| r.len() != 2 * m) {
            return Err(Error::Parse {
                line: 0,
                msg: format!("expected {d} rows of {} values", 2 * m),
            });
        }
        Self::new(DMatrix::from_fn(d, m, |i, j| {
            C64::new(rows[i][2 * j], rows[i][2 * j + 1])
        }))
    }
}

/// Overlaps `eta_J` for every increasing `N`-tuple `J` of orbitals, lexicographic.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigAmplitudes {
    tuples: Arc<FockBasis>,
    values: Vec<C64>,
}

impl ConfigAmplitudes {
    /// Orbital tuples, as a basis of `N` particles in `M` "sites".
    pub fn tuples(&self) -> &Arc<FockBasis> {
        &self.tuples
    }

    pub fn values(&self) -> &[C64] {
        &self.values
    }

    pub fn n_orbitals(&self) -> usize {
        self.tuples.dim()
    }

    pub fn n_particles(&self) -> usize {
        self.tuples.n_particles()
    }

    /// `I = sum_J |eta_J|^2`.
    pub fn objective(&self) -> f64 {
        self.values.iter().map(|z| z.norm_sqr()).sum()
    }

    /// CSV with header `j1,...,jN,re,im`; orbital indices are 1-based.
    pub fn to_csv(&self) -> String {
        let n = self.n_particles();
        let mut out = String::new();
        let cols: Vec<String> = (1..=n).map(|k| format!("j{k}")).collect();
        let _ = writeln!(out, "{},re,im", cols.join(","));
        for (tuple, z) in self.tuples.iter().zip(&self.values) {
            let js: Vec<String> = tuple.iter().map(|j| (j + 1).to_string()).collect();
            let _ = writeln!(out, "{},{:.16e},{:.16e}", js.join(","), z.re, z.im);
        }
        out
    }
}

/// An element of the configuration subspace, `W = sum_J C_J S_J`.
#[derive(Debug, Clone)]
pub struct ApproximantState {
    pub orbitals: OrbitalSet,
    pub tuples: Arc<FockBasis>,
    pub coefficients: Vec<C64>,
}

/// Overlaps below this magnitude get a zero coefficient in [`ApproximantState::optimal`].
pub const ETA_CUTOFF: f64 = 1e-15;

impl ApproximantState {
    /// Best state for fixed orbitals: `C_J = eta_J^* / sqrt(I)`.
    pub fn optimal(amps: &ConfigAmplitudes, orbitals: &OrbitalSet) -> Result<Self> {
        if amps.n_orbitals() != orbitals.n_orbitals() {
            return Err(Error::mismatch(
                format!("{} orbitals", amps.n_orbitals()),
                orbitals.n_orbitals(),
            ));
        }
        let mut coefficients: Vec<C64> = amps
            .values
            .iter()
            .map(|z| {
                if z.norm() < ETA_CUTOFF {
                    ZERO
                } else {
                    z.conj()
                }
            })
            .collect();
        let norm = linalg::vec_norm(&coefficients);
        if norm == 0.0 {
            return Err(Error::NoOverlap);
        }
        for c in &mut coefficients {
            *c /= norm;
        }
        Ok(Self {
            orbitals: orbitals.clone(),
            tuples: amps.tuples.clone(),
            coefficients,
        })
    }

    /// Expand into the site basis `basis` (which must have `d` sites and `N` particles).
    pub fn to_wave_function(&self, basis: Arc<FockBasis>) -> Result<WaveFunction> {
        let n = self.tuples.n_particles();
        if basis.dim() != self.orbitals.dim() || basis.n_particles() != n {
            return Err(Error::mismatch(
                format!("basis d={} n={n}", self.orbitals.dim()),
                format!("d={} n={}", basis.dim(), basis.n_particles()),
            ));
        }
        let v = self.orbitals.matrix();
        let active: Vec<(usize, C64)> = self
            .coefficients
            .iter()
            .enumerate()
            .filter(|(_, c)| **c != ZERO)
            .map(|(k, c)| (k, *c))
            .collect();
        let amps = chunked_map(basis.len(), |range| {
            let mut buf = vec![ZERO; n * n];
            range
                .map(|k| {
                    let x = basis.state(k);
                    active
                        .iter()
                        .map(|&(j, c)| c * submatrix_det(v, x, self.tuples.state(j), &mut buf))
                        .sum::<C64>()
                })
                .collect::<Vec<_>>()
        })
        .into_iter()
        .flatten()
        .collect();
        WaveFunction::new(basis, amps)
    }
}

/// Run `f` over fixed-size index chunks in parallel, results in chunk order.
fn chunked_map<T, F>(len: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(std::ops::Range<usize>) -> T + Sync,
{
    let n_chunks = len.div_ceil(CHUNK);
    (0..n_chunks)
        .into_par_iter()
        .map(|c| f(c * CHUNK..((c + 1) * CHUNK).min(len)))
        .collect()
}

/// `det V[rows, cols]`.
fn submatrix_det(v: &DMatrix<C64>, rows: &[usize], cols: &[usize], buf: &mut [C64]) -> C64 {
    let n = rows.len();
    for (a, &r) in rows.iter().enumerate() {
        for (b, &c) in cols.iter().enumerate() {
            buf[a * n + b] = v[(r, c)];
        }
    }
    det_in_place(&mut buf[..n * n], n)
}

fn check_dims(f: &WaveFunction, v: &OrbitalSet) -> Result<()> {
    if f.dim() != v.dim() {
        return Err(Error::mismatch(
            format!("orbitals of dimension d={}", f.dim()),
            v.dim(),
        ));
    }
    if v.n_orbitals() < f.n_particles() {
        return Err(Error::InvalidDimension(format!(
            "need M >= N, got M={} N={}",
            v.n_orbitals(),
            f.n_particles()
        )));
    }
    Ok(())
}

/// `eta_J = sum_X C_X^* det V[X, J]` for every configuration `J`.
pub fn eta_all(f: &WaveFunction, v: &OrbitalSet) -> Result<ConfigAmplitudes> {
    check_dims(f, v)?;
    let n = f.n_particles();
    let tuples = FockBasis::shared(v.n_orbitals(), n)?;
    let basis = f.basis();
    let amps = f.amplitudes();
    let m = v.matrix();
    let partials = chunked_map(basis.len(), |range| {
        let mut acc = vec![ZERO; tuples.len()];
        let mut buf = vec![ZERO; n * n];
        for k in range {
            let c = amps[k].conj();
            if c == ZERO {
                continue;
            }
            let x = basis.state(k);
            for (slot, j) in acc.iter_mut().zip(tuples.iter()) {
                *slot += c * submatrix_det(m, x, j, &mut buf);
            }
        }
        acc
    });
    let mut values = vec![ZERO; tuples.len()];
    for part in partials {
        for (a, b) in values.iter_mut().zip(part) {
            *a += b;
        }
    }
    Ok(ConfigAmplitudes { tuples, values })
}

/// `I = sum_J |eta_J|^2`, the weight of `f` inside the configuration subspace.
pub fn objective(f: &WaveFunction, v: &OrbitalSet) -> Result<f64> {
    Ok(eta_all(f, v)?.objective())
}

/// Contraction of `f` with `N - 1` partner orbitals (the columns of `partners`):
///
/// `g(x) = sqrt(N!) sum_{x_2..x_N} f(x, x_2, ..) phi_2^*(x_2) .. phi_N^*(x_N)`,
///
/// evaluated from ordered tuples only. With this convention
/// `<g|phi> = eta_J` for `J = (phi, partners)`.
pub fn g_function(f: &WaveFunction, partners: &DMatrix<C64>) -> Result<Vec<C64>> {
    let n = f.n_particles();
    if partners.ncols() + 1 != n {
        return Err(Error::mismatch(
            format!("{} partner orbitals", n - 1),
            partners.ncols(),
        ));
    }
    if partners.nrows() != f.dim() {
        return Err(Error::mismatch(
            format!("partners of dimension d={}", f.dim()),
            partners.nrows(),
        ));
    }
    let cols: Vec<usize> = (0..partners.ncols()).collect();
    Ok(g_functions(f, partners, &[cols])
        .pop()
        .expect("one partner set"))
}

/// Several `g` contractions in a single pass over the basis. `partner_sets[s]`
/// lists the columns of `orbitals` that act as partners for output `s`.
pub(crate) fn g_functions(
    f: &WaveFunction,
    orbitals: &DMatrix<C64>,
    partner_sets: &[Vec<usize>],
) -> Vec<Vec<C64>> {
    let n = f.n_particles();
    let d = f.dim();
    let basis = f.basis();
    let amps = f.amplitudes();
    let n_sets = partner_sets.len();
    if n == 1 {
        return vec![amps.to_vec(); n_sets];
    }
    let k = n - 1;
    let partials = chunked_map(basis.len(), |range| {
        let mut acc = vec![ZERO; n_sets * d];
        let mut rows = vec![0usize; k];
        let mut buf = vec![ZERO; k * k];
        for idx in range {
            let c = amps[idx];
            if c == ZERO {
                continue;
            }
            let x = basis.state(idx);
            for m in 0..n {
                // rows of X with x_m deleted
                let mut r = 0;
                for (p, &xp) in x.iter().enumerate() {
                    if p != m {
                        rows[r] = xp;
                        r += 1;
                    }
                }
                let signed = if m % 2 == 0 { c } else { -c };
                for (s, set) in partner_sets.iter().enumerate() {
                    let minor = submatrix_det(orbitals, &rows, set, &mut buf);
                    acc[s * d + x[m]] += signed * minor.conj();
                }
            }
        }
        acc
    });
    let mut out = vec![ZERO; n_sets * d];
    for part in partials {
        for (a, b) in out.iter_mut().zip(part) {
            *a += b;
        }
    }
    out.chunks_exact(d).map(|c| c.to_vec()).collect()
}

/// The optimal in-subspace approximant `W` of `f` for orbitals `v`.
///
/// `<f|W> = sqrt(I)` is real positive.
pub fn reconstruct_w(amps: &ConfigAmplitudes, v: &OrbitalSet) -> Result<WaveFunction> {
    let basis = FockBasis::shared(v.dim(), amps.n_particles())?;
    ApproximantState::optimal(amps, v)?.to_wave_function(basis)
}

/// The Slater determinant of the columns of `orbitals` on `basis`.
pub fn slater_state(basis: Arc<FockBasis>, orbitals: &DMatrix<C64>) -> Result<WaveFunction> {
    let n = basis.n_particles();
    if orbitals.ncols() != n || orbitals.nrows() != basis.dim() {
        return Err(Error::mismatch(
            format!("{}x{} orbital matrix", basis.dim(), n),
            format!("{}x{}", orbitals.nrows(), orbitals.ncols()),
        ));
    }
    let cols: Vec<usize> = (0..n).collect();
    let mut buf = vec![ZERO; n * n];
    let amps = basis
        .iter()
        .map(|x| submatrix_det(orbitals, x, &cols, &mut buf))
        .collect();
    WaveFunction::new(basis, amps)
}
