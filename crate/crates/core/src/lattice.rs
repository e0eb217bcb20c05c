//! Spinless fermions on an open chain with nearest-neighbour interaction,
//!
//! `H = sum_i -(c_i^dag c_{i+1} + h.c.) + U n_i n_{i+1}`,
//!
//! treated by dense exact diagonalization.
//!
//! Operator ordering: a basis tuple `(x_1 < ... < x_N)` stands for
//! `c_{x_1}^dag ... c_{x_N}^dag |0>`. Moving a particle between sites `i`
//! and `j` then picks up `(-1)^(occupied sites strictly between i and j)`.

use std::sync::Arc;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::{FockBasis, WaveFunction};
use crate::linalg::{self, C64};

/// Chain geometry and couplings. The hopping amplitude is fixed to one.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChainSpec {
    pub length: usize,
    pub n_particles: usize,
    pub interaction: f64,
    /// Particles restricted to the leftmost `confinement` sites.
    pub confinement: Option<usize>,
}

impl ChainSpec {
    pub fn new(length: usize, n_particles: usize, interaction: f64) -> Self {
        Self {
            length,
            n_particles,
            interaction,
            confinement: None,
        }
    }

    pub fn confined(mut self, sites: usize) -> Self {
        self.confinement = Some(sites);
        self
    }

    pub fn with_interaction(mut self, interaction: f64) -> Self {
        self.interaction = interaction;
        self
    }

    pub fn released(mut self) -> Self {
        self.confinement = None;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let (l, n) = (self.length, self.n_particles);
        if n < 1 || n > l {
            return Err(Error::InvalidDimension(format!(
                "need 1 <= N <= L, got L={l}, N={n}"
            )));
        }
        if l > 64 {
            return Err(Error::InvalidDimension(format!("L={l} exceeds 64 sites")));
        }
        if let Some(li) = self.confinement {
            if li < n || li > l {
                return Err(Error::InvalidDimension(format!(
                    "need N <= L_i <= L, got L_i={li}, N={n}, L={l}"
                )));
            }
        }
        if !self.interaction.is_finite() {
            return Err(Error::InvalidDimension("U must be finite".into()));
        }
        Ok(())
    }

    /// Number of sites the particles may occupy.
    pub fn active_sites(&self) -> usize {
        self.confinement.unwrap_or(self.length)
    }
}

/// Sparse real-symmetric Hamiltonian over a Fock basis.
#[derive(Debug, Clone)]
pub struct Hamiltonian {
    basis: Arc<FockBasis>,
    diagonal: Vec<f64>,
    // upper-triangle entries (row < col)
    offdiag: Vec<(usize, usize, f64)>,
}

fn occupation_mask(tuple: &[usize]) -> u64 {
    tuple.iter().fold(0u64, |m, &x| m | (1u64 << x))
}

/// Fermionic sign of moving one particle between sites `a` and `b`.
fn hop_sign(mask: u64, a: usize, b: usize) -> f64 {
    let (lo, hi) = if a < b { (a, b) } else { (b, a) };
    let between = if hi - lo > 1 {
        (mask >> (lo + 1)) & ((1u64 << (hi - lo - 1)) - 1)
    } else {
        0
    };
    if between.count_ones().is_multiple_of(2) {
        1.0
    } else {
        -1.0
    }
}

impl Hamiltonian {
    /// Chain Hamiltonian on `sites` sites with `n` particles.
    pub fn chain(sites: usize, n: usize, interaction: f64) -> Result<Self> {
        ChainSpec::new(sites, n, interaction).validate()?;
        let basis = FockBasis::shared(sites, n)?;
        let mut diagonal = Vec::with_capacity(basis.len());
        let mut offdiag = Vec::new();
        let mut moved = vec![0usize; n];
        for (k, tuple) in basis.iter().enumerate() {
            let mask = occupation_mask(tuple);
            let bonds = (mask & (mask >> 1)).count_ones();
            diagonal.push(interaction * bonds as f64);
            for (p, &x) in tuple.iter().enumerate() {
                let target = x + 1;
                if target >= sites || mask & (1 << target) != 0 {
                    continue;
                }
                moved.copy_from_slice(tuple);
                moved[p] = target;
                // moving to an adjacent empty site keeps the tuple sorted
                let k2 = basis.rank_unchecked(&moved);
                offdiag.push((k.min(k2), k.max(k2), -hop_sign(mask, x, target)));
            }
        }
        Ok(Self {
            basis,
            diagonal,
            offdiag,
        })
    }

    pub fn basis(&self) -> &Arc<FockBasis> {
        &self.basis
    }

    pub fn dim(&self) -> usize {
        self.diagonal.len()
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let n = self.dim();
        let mut m = DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(&self.diagonal));
        for &(i, j, v) in &self.offdiag {
            m[(i, j)] += v;
            m[(j, i)] += v;
        }
        debug_assert_eq!(m.nrows(), n);
        m
    }

    fn to_faer(&self) -> faer::Mat<f64> {
        let n = self.dim();
        let mut m = faer::Mat::<f64>::zeros(n, n);
        for (i, &v) in self.diagonal.iter().enumerate() {
            m[(i, i)] = v;
        }
        for &(i, j, v) in &self.offdiag {
            m[(i, j)] += v;
            m[(j, i)] += v;
        }
        m
    }

    pub fn apply(&self, v: &[C64]) -> Vec<C64> {
        let mut out: Vec<C64> = self.diagonal.iter().zip(v).map(|(d, x)| x * d).collect();
        for &(i, j, h) in &self.offdiag {
            out[i] += v[j] * h;
            out[j] += v[i] * h;
        }
        out
    }

    /// `<f|H|f>` for a normalized state.
    pub fn expectation(&self, f: &WaveFunction) -> f64 {
        let hf = self.apply(f.amplitudes());
        linalg::vdot(f.amplitudes(), &hf).re
    }

    pub fn spectral(&self) -> Result<SpectralDecomposition> {
        let (eigenvalues, eigenvectors) = linalg::symmetric_eigen_large(&self.to_faer())?;
        Ok(SpectralDecomposition {
            basis: self.basis.clone(),
            eigenvalues,
            eigenvectors,
        })
    }
}

/// Full spectrum `H v_k = E_k v_k`, eigenvalues ascending.
#[derive(Debug, Clone)]
pub struct SpectralDecomposition {
    basis: Arc<FockBasis>,
    eigenvalues: Vec<f64>,
    eigenvectors: faer::Mat<f64>,
}

/// Eigenvalue spacing below which the ground level counts as degenerate.
pub const DEGENERACY_TOL: f64 = 1e-10;

impl SpectralDecomposition {
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn basis(&self) -> &Arc<FockBasis> {
        &self.basis
    }

    pub fn eigenvector(&self, k: usize) -> Vec<f64> {
        let col = self.eigenvectors.col(k);
        (0..self.eigenvalues.len()).map(|i| col[i]).collect()
    }

    pub fn ground_level_degenerate(&self) -> bool {
        self.eigenvalues.len() > 1 && self.eigenvalues[1] - self.eigenvalues[0] < DEGENERACY_TOL
    }

    /// Lowest eigenvector, phase fixed so the largest amplitude is real positive.
    pub fn ground_state(&self) -> WaveFunction {
        if self.ground_level_degenerate() {
            log::warn!(
                "ground level is degenerate (gap {:.3e}); returning one eigenvector of the lowest level",
                self.eigenvalues[1] - self.eigenvalues[0]
            );
        }
        let mut amps: Vec<C64> = self
            .eigenvector(0)
            .into_iter()
            .map(|x| C64::new(x, 0.0))
            .collect();
        linalg::fix_phase(&mut amps);
        WaveFunction::new(self.basis.clone(), amps).expect("eigenvector length matches basis")
    }

    /// Expansion coefficients `<v_k|psi>`.
    pub fn project(&self, psi: &WaveFunction) -> Result<Vec<C64>> {
        self.check_basis(psi)?;
        let n = self.eigenvalues.len();
        let rhs = faer::Mat::<f64>::from_fn(n, 2, |i, j| {
            let z = psi.amplitudes()[i];
            if j == 0 {
                z.re
            } else {
                z.im
            }
        });
        let c = self.eigenvectors.transpose() * &rhs;
        Ok((0..n).map(|k| C64::new(c[(k, 0)], c[(k, 1)])).collect())
    }

    /// `sum_k v_k exp(-i E_k t) c_k` for precomputed coefficients.
    pub fn evolve_coefficients(&self, coefficients: &[C64], t: f64) -> WaveFunction {
        let n = self.eigenvalues.len();
        let phased = faer::Mat::<f64>::from_fn(n, 2, |k, j| {
            let z = coefficients[k] * C64::from_polar(1.0, -self.eigenvalues[k] * t);
            if j == 0 {
                z.re
            } else {
                z.im
            }
        });
        let out = &self.eigenvectors * &phased;
        let amps = (0..n).map(|i| C64::new(out[(i, 0)], out[(i, 1)])).collect();
        WaveFunction::new(self.basis.clone(), amps).expect("length matches basis")
    }

    /// Exact propagation `exp(-iHt) psi0`.
    pub fn evolve(&self, psi0: &WaveFunction, t: f64) -> Result<WaveFunction> {
        if t == 0.0 {
            self.check_basis(psi0)?;
            return Ok(psi0.clone());
        }
        let c = self.project(psi0)?;
        Ok(self.evolve_coefficients(&c, t))
    }

    fn check_basis(&self, psi: &WaveFunction) -> Result<()> {
        if psi.dim() != self.basis.dim() || psi.n_particles() != self.basis.n_particles() {
            return Err(Error::mismatch(
                format!(
                    "state on d={} n={}",
                    self.basis.dim(),
                    self.basis.n_particles()
                ),
                format!("state on d={} n={}", psi.dim(), psi.n_particles()),
            ));
        }
        Ok(())
    }
}

/// Hamiltonian of the sites the particles may occupy (`L_i` when confined).
pub fn build_hamiltonian(spec: &ChainSpec) -> Result<Hamiltonian> {
    spec.validate()?;
    Hamiltonian::chain(spec.active_sites(), spec.n_particles, spec.interaction)
}

/// Ground state on the active sites of `spec`.
pub fn ground_state(spec: &ChainSpec) -> Result<WaveFunction> {
    Ok(build_hamiltonian(spec)?.spectral()?.ground_state())
}

/// Ground state of the leftmost `L_i` sites, embedded into the full `L`-site basis.
pub fn confined_ground_state(spec: &ChainSpec) -> Result<WaveFunction> {
    spec.validate()?;
    let local = ground_state(spec)?;
    let full = FockBasis::shared(spec.length, spec.n_particles)?;
    embed(&local, full)
}

/// Place a state of the first `d` sites into a larger basis with the same `N`.
pub fn embed(f: &WaveFunction, target: Arc<FockBasis>) -> Result<WaveFunction> {
    if target.n_particles() != f.n_particles() || target.dim() < f.dim() {
        return Err(Error::mismatch(
            format!("basis with n={} and d>={}", f.n_particles(), f.dim()),
            format!("d={} n={}", target.dim(), target.n_particles()),
        ));
    }
    let mut out = WaveFunction::zeros(target);
    for (tuple, &c) in f.basis().iter().zip(f.amplitudes()) {
        let k = out.basis().rank_unchecked(tuple);
        out.amplitudes_mut()[k] = c;
    }
    Ok(out)
}

/// `exp(-iHt) psi0` with `H` the unconfined chain of `spec`.
pub fn evolve(spec: &ChainSpec, psi0: &WaveFunction, t: f64) -> Result<WaveFunction> {
    let h = build_hamiltonian(&spec.released())?;
    h.spectral()?.evolve(psi0, t)
}

/// Site occupations `<n_i>`.
pub fn density(f: &WaveFunction) -> Vec<f64> {
    let mut n = vec![0.0; f.dim()];
    for (tuple, c) in f.basis().iter().zip(f.amplitudes()) {
        let p = c.norm_sqr();
        for &x in tuple {
            n[x] += p;
        }
    }
    n
}

/// `U sum_i <n_i n_{i+1}>`.
pub fn interaction_energy(f: &WaveFunction, interaction: f64) -> f64 {
    let pairs: f64 = f
        .basis()
        .iter()
        .zip(f.amplitudes())
        .map(|(tuple, c)| {
            let mask = occupation_mask(tuple);
            (mask & (mask >> 1)).count_ones() as f64 * c.norm_sqr()
        })
        .sum();
    interaction * pairs
}

/// Expectation of the hopping term alone.
pub fn hopping_energy(f: &WaveFunction) -> Result<f64> {
    let h = Hamiltonian::chain(f.dim(), f.n_particles(), 0.0)?;
    Ok(h.expectation(f))
}

/// Total energy `<f|H|f>` on the full chain of `f`.
pub fn total_energy(f: &WaveFunction, interaction: f64) -> Result<f64> {
    Ok(hopping_energy(f)? + interaction_energy(f, interaction))
}

/// One-particle hopping matrix of the open chain (used for free-fermion checks).
pub fn single_particle_hopping(sites: usize) -> DMatrix<f64> {
    DMatrix::from_fn(
        sites,
        sites,
        |i, j| if i.abs_diff(j) == 1 { -1.0 } else { 0.0 },
    )
}

/// Columns `exp(-iht) e_k`, `k < sites`, with `h` the one-particle chain of
/// `length` sites. A free evolution of a state supported on the first
/// `sites` sites stays inside the span of these orbitals.
pub fn propagated_site_orbitals(length: usize, sites: usize, t: f64) -> Result<DMatrix<C64>> {
    if sites == 0 || sites > length {
        return Err(Error::InvalidDimension(format!(
            "need 1 <= sites <= length, got {sites} and {length}"
        )));
    }
    let eig = single_particle_hopping(length).symmetric_eigen();
    let phases = DMatrix::from_diagonal(&eig.eigenvalues.map(|e| C64::from_polar(1.0, -e * t)));
    let q = eig.eigenvectors.map(|x| C64::new(x, 0.0));
    let u = &q * phases * q.transpose();
    Ok(u.columns(0, sites).clone_owned())
}
