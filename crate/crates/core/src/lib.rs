//! Optimal multi-configuration approximation of N-fermion wave functions.
//!
//! Given a state `f` of `N` fermions on a `d`-dimensional single-particle
//! space, [`optimizer::optimize`] searches for `M >= N` orthonormal orbitals
//! whose `C(M, N)` Slater determinants capture as much of `f` as possible.
//! The [`lattice`] module supplies physical test states (ground states and
//! quench dynamics of a spinless fermion chain), [`closed_forms`] the
//! analytic checks, and [`experiment`] the reproducible experiment runners
//! used by the `slater-forge` CLI.

pub mod closed_forms;
pub mod error;
pub mod experiment;
pub mod fock;
pub mod lattice;
pub mod linalg;
pub mod optimizer;
pub mod projection;

pub use closed_forms::{
    density_distance_bound_check, hole_decomposition, imax_two_boson, imax_two_fermion,
    one_particle_rdm, upper_bound, DensityDistance, HoleDecomposition, ReducedDensityMatrix,
    TwoFermionOptimum,
};
pub use error::{Error, Result};
pub use fock::{FockBasis, WaveFunction};
pub use lattice::{ChainSpec, Hamiltonian, SpectralDecomposition};
pub use linalg::C64;
pub use optimizer::{
    optimize, random_orbitals, sweep, update_slot1, Initialization, OptimizationTrace,
    OptimizeReport, OptimizerConfig,
};
pub use projection::{
    eta_all, g_function, objective, reconstruct_w, slater_state, ApproximantState,
    ConfigAmplitudes, OrbitalSet,
};
