use nalgebra::DMatrix;
use proptest::prelude::*;
use slater_forge_core::closed_forms::{imax_two_fermion, one_particle_rdm, upper_bound};
use slater_forge_core::linalg::principal_cosines;
use slater_forge_core::optimizer::*;
use slater_forge_core::projection::{g_function, objective, slater_state, OrbitalSet};
use slater_forge_core::{lattice, ChainSpec, Error, FockBasis, WaveFunction, C64};

fn random_state(d: usize, n: usize, seed: u64) -> WaveFunction {
    WaveFunction::random(FockBasis::shared(d, n).unwrap(), seed)
}

fn random_slater(d: usize, n: usize, seed: u64) -> WaveFunction {
    let psi = random_orbitals(d, n, seed).unwrap();
    slater_state(FockBasis::shared(d, n).unwrap(), psi.matrix()).unwrap()
}

#[test]
fn random_orbitals_are_orthonormal_and_seeded() {
    let a = random_orbitals(9, 4, 1).unwrap();
    let b = random_orbitals(9, 4, 1).unwrap();
    let c = random_orbitals(9, 4, 2).unwrap();
    assert!(a.orthonormality_error() < 1e-12);
    assert_eq!(a.matrix(), b.matrix());
    let cos = principal_cosines(a.matrix(), c.matrix());
    assert!(cos.iter().copied().fold(f64::INFINITY, f64::min) < 1.0 - 1e-6);
    assert!(matches!(
        random_orbitals(3, 4, 0),
        Err(Error::InvalidDimension(_))
    ));
}

#[test]
fn restart_streams_differ() {
    let a = random_orbitals_stream(6, 3, 5, 0).unwrap();
    let b = random_orbitals_stream(6, 3, 5, 1).unwrap();
    assert_ne!(a.matrix(), b.matrix());
}

#[test]
fn square_update_follows_g() {
    let f = random_state(6, 3, 4);
    let v = random_orbitals(6, 3, 7).unwrap();
    let g = g_function(&f, &v.matrix().columns(1, 2).clone_owned()).unwrap();
    let (v2, i2) = update_slot1(&f, &v).unwrap();
    // g is already orthogonal to the partners, so phi_1 is g up to phase
    let phi = v2.orbital(0);
    let ov: C64 = g.iter().zip(&phi).map(|(a, b)| a.conj() * b).sum();
    let gnorm = g.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    assert!((ov.norm() - gnorm).abs() < 1e-10);
    assert!((i2 - gnorm * gnorm).abs() < 1e-10);
    assert!(v2.orthonormality_error() < 1e-12);
    for k in 1..3 {
        assert_eq!(v2.orbital(k), v.orbital(k));
    }
}

#[test]
fn two_by_two_updates_are_a_power_step() {
    // N = M = 2: two consecutive updates replace phi_2 by rho_1 phi_2
    let f = random_state(5, 2, 3);
    let v = random_orbitals(5, 2, 9).unwrap();
    let rho = one_particle_rdm(&f);
    let target = rho.matrix() * nalgebra::DVector::from_vec(v.orbital(1));
    let (mut w, _) = update_slot1(&f, &v).unwrap();
    w.rotate_right();
    let (w, _) = update_slot1(&f, &w).unwrap();
    let phi = nalgebra::DVector::from_vec(w.orbital(0));
    let cos = (phi.adjoint() * &target)[(0, 0)].norm() / target.norm();
    assert!((cos - 1.0).abs() < 1e-10, "cos {cos}");
}

#[test]
fn single_slater_is_recovered_in_one_sweep() {
    for (d, n, seed) in [(6, 2, 1), (7, 3, 2), (8, 4, 3)] {
        let f = random_slater(d, n, seed);
        let start = random_orbitals(d, n, seed + 100).unwrap();
        let (_, trace) = sweep(&f, &start).unwrap();
        assert!((trace.last().unwrap() - 1.0).abs() < 1e-10, "{trace:?}");
    }
}

#[test]
fn sweep_values_match_objective() {
    let f = random_state(7, 3, 8);
    let v = random_orbitals(7, 5, 8).unwrap();
    let (v2, trace) = sweep(&f, &v).unwrap();
    assert_eq!(trace.len(), 5);
    assert!((trace[4] - objective(&f, &v2).unwrap()).abs() < 1e-12);
    let mut w = v.clone();
    for &expected in &trace {
        let (next, i) = update_slot1(&f, &w).unwrap();
        assert!((i - expected).abs() < 1e-10);
        w = next;
        w.rotate_right();
    }
}

#[test]
fn converged_orbitals_are_a_fixed_point() {
    let f = random_state(6, 2, 5);
    let r = optimize(&f, &OptimizerConfig::new(4).with_restarts(2)).unwrap();
    let best = r.best_trace();
    assert!(best.converged);
    let (_, trace) = sweep(&f, &best.orbitals).unwrap();
    assert!(trace.last().unwrap() - best.final_objective() < 1e-11);
}

#[test]
fn optimize_agrees_with_two_fermion_closed_form() {
    for seed in 0..4 {
        let f = random_state(7, 2, seed);
        for m in [2, 4] {
            let r = optimize(&f, &OptimizerConfig::new(m).with_seed(seed)).unwrap();
            let exact = imax_two_fermion(&f, m).unwrap().value;
            assert!(
                (r.best_objective() - exact).abs() < 1e-8,
                "seed {seed} M {m}"
            );
        }
    }
}

#[test]
fn optimum_respects_upper_bound_and_full_space() {
    let f = random_state(6, 3, 11);
    for m in 3..=6 {
        let r = optimize(&f, &OptimizerConfig::new(m).with_restarts(3)).unwrap();
        assert!(r.best_objective() <= upper_bound(&f, m).unwrap() + 1e-10);
        if m == 6 {
            assert!((r.best_objective() - 1.0).abs() < 1e-12);
        }
    }
}

#[test]
fn optimize_is_deterministic() {
    let f = random_state(7, 3, 21);
    let cfg = OptimizerConfig::new(4).with_restarts(3).with_seed(42);
    let a = optimize(&f, &cfg).unwrap();
    let b = optimize(&f, &cfg).unwrap();
    for (x, y) in a.traces.iter().zip(&b.traces) {
        assert_eq!(x.steps, y.steps);
        assert_eq!(x.orbitals.matrix(), y.orbitals.matrix());
    }
    assert_eq!(a.trace_csv(), b.trace_csv());
}

#[test]
fn trace_csv_layout() {
    let f = random_state(5, 2, 1);
    let r = optimize(&f, &OptimizerConfig::new(3).with_restarts(2)).unwrap();
    let csv = r.trace_csv();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("restart,step,I"));
    let rows = r.traces.iter().map(|t| t.steps.len() + 1).sum::<usize>();
    assert_eq!(csv.lines().count(), rows + 1);
    assert!(csv.contains("\n1,0,"));
}

#[test]
fn natural_orbital_start() {
    let f = random_state(7, 3, 2);
    let mut cfg = OptimizerConfig::new(4).with_restarts(1);
    cfg.init = Initialization::NaturalOrbitals;
    let r = optimize(&f, &cfg).unwrap();
    let rand = optimize(&f, &OptimizerConfig::new(4)).unwrap();
    assert!(r.best_objective() <= rand.best_objective() + 1e-8);
    assert!(r.best_objective() > 0.0);
}

#[test]
fn invalid_problems_are_rejected() {
    let f = random_state(5, 3, 1);
    assert!(optimize(&f, &OptimizerConfig::new(2)).is_err());
    assert!(optimize(&f, &OptimizerConfig::new(6)).is_err());
    assert!(optimize(&f, &OptimizerConfig::new(3).with_restarts(0)).is_err());
    let v = random_orbitals(6, 3, 0).unwrap();
    assert!(update_slot1(&f, &v).is_err());
}

#[test]
fn stagnation_keeps_orbitals() {
    // f lives on sites {0,1}; start with phi_2 outside its support, so T_1 = 0
    let basis = FockBasis::shared(4, 2).unwrap();
    let f = WaveFunction::basis_state(basis, &[0, 1]).unwrap();
    let mut m = DMatrix::<C64>::zeros(4, 2);
    m[(2, 0)] = C64::new(1.0, 0.0);
    m[(3, 1)] = C64::new(1.0, 0.0);
    let v = OrbitalSet::new(m).unwrap();
    let (v2, i) = update_slot1(&f, &v).unwrap();
    assert_eq!(v2.matrix(), v.matrix());
    assert_eq!(i, 0.0);
    let t = run_single(&f, &OptimizerConfig::new(2).with_restarts(1), 0).unwrap();
    assert!((t.final_objective() - 1.0).abs() < 1e-12);
}

#[test]
fn ground_state_converges_quickly() {
    let f = lattice::ground_state(&ChainSpec::new(12, 3, 1.0)).unwrap();
    let r = optimize(&f, &OptimizerConfig::new(3)).unwrap();
    for t in &r.traces {
        assert!(t.converged);
        assert!((t.objective_after(30) - r.best_objective()).abs() < 1e-6);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn updates_never_decrease(seed in 0u64..10_000, m in 3usize..6) {
        let f = random_state(6, 3, seed);
        let cfg = OptimizerConfig::new(m).with_seed(seed).with_restarts(1).with_max_sweeps(10);
        let t = run_single(&f, &cfg, 0).unwrap();
        let mut prev = t.initial;
        for &x in &t.steps {
            prop_assert!(x >= prev - 1e-12);
            prev = x;
        }
        prop_assert!(t.final_objective() <= 1.0 + 1e-12);
    }
}
