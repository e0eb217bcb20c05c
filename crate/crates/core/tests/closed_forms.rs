use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use slater_forge_core::closed_forms::*;
use slater_forge_core::fock::FockBasis;
use slater_forge_core::lattice::{self, density, ChainSpec};
use slater_forge_core::optimizer::random_orbitals;
use slater_forge_core::projection::slater_state;
use slater_forge_core::{Error, WaveFunction, C64};

fn c(re: f64) -> C64 {
    C64::new(re, 0.0)
}

/// `sqrt(a) psi_1^psi_2 + sqrt(b) psi_3^psi_4` for random orthonormal psi.
fn two_pair_state(d: usize, a: f64, b: f64, seed: u64) -> WaveFunction {
    let psi = random_orbitals(d, 4, seed).unwrap();
    let basis = FockBasis::shared(d, 2).unwrap();
    let p1 = slater_state(basis.clone(), &psi.matrix().columns(0, 2).clone_owned()).unwrap();
    let p2 = slater_state(basis.clone(), &psi.matrix().columns(2, 2).clone_owned()).unwrap();
    let amps = p1
        .amplitudes()
        .iter()
        .zip(p2.amplitudes())
        .map(|(x, y)| x * a.sqrt() + y * b.sqrt())
        .collect();
    WaveFunction::new(basis, amps).unwrap()
}

#[test]
fn slater_rdm_is_a_projector() {
    let psi = random_orbitals(7, 3, 1).unwrap();
    let f = slater_state(FockBasis::shared(7, 3).unwrap(), psi.matrix()).unwrap();
    let rdm = one_particle_rdm(&f);
    let projector = psi.matrix() * psi.matrix().adjoint();
    assert!((rdm.matrix() - projector).camax() < 1e-12);
    let occ = rdm.occupations();
    for (k, o) in occ.iter().enumerate() {
        let expected = if k < 3 { 1.0 } else { 0.0 };
        assert!((o - expected).abs() < 1e-12);
    }
}

#[test]
fn two_fermion_rdm_matches_matrix_formula() {
    let basis = FockBasis::shared(6, 2).unwrap();
    let f = WaveFunction::random(basis.clone(), 3);
    // first-quantized f(x, y) as a matrix
    let mut fm = DMatrix::<C64>::zeros(6, 6);
    for (t, a) in basis.iter().zip(f.amplitudes()) {
        fm[(t[0], t[1])] = a / 2f64.sqrt();
        fm[(t[1], t[0])] = -a / 2f64.sqrt();
    }
    let formula = fm.transpose() * fm.conjugate() * c(2.0);
    let rdm = one_particle_rdm(&f);
    assert!((rdm.matrix() - formula).camax() < 1e-12);
}

#[test]
fn rdm_diagonal_is_density_and_trace_is_n() {
    let f = WaveFunction::random(FockBasis::shared(8, 3).unwrap(), 4);
    let rdm = one_particle_rdm(&f);
    let n = density(&f);
    for (i, ni) in n.iter().enumerate() {
        assert!((rdm.matrix()[(i, i)].re - ni).abs() < 1e-12);
    }
    assert!((rdm.trace() - 3.0).abs() < 1e-10);
    assert!((rdm.matrix() - rdm.matrix().adjoint()).camax() < 1e-12);
    let occ = rdm.occupations();
    assert!(occ.iter().all(|&o| o > -1e-12 && o < 1.0 + 1e-12));
}

#[test]
fn rdm_csv_shape() {
    let f = WaveFunction::random(FockBasis::shared(4, 2).unwrap(), 4);
    let csv = one_particle_rdm(&f).to_csv();
    assert_eq!(csv.lines().count(), 4);
    assert!(csv.lines().all(|l| l.split(',').count() == 8));
}

#[test]
fn two_fermion_canonical_read_off() {
    let f = two_pair_state(7, 0.8, 0.2, 9);
    assert!((imax_two_fermion(&f, 2).unwrap().value - 0.8).abs() < 1e-12);
    assert!((imax_two_fermion(&f, 4).unwrap().value - 1.0).abs() < 1e-12);
    let single = two_pair_state(7, 1.0, 0.0, 2);
    for m in [2, 4, 6] {
        assert!((imax_two_fermion(&single, m).unwrap().value - 1.0).abs() < 1e-12);
    }
}

#[test]
fn two_fermion_rejects_odd_and_wrong_n() {
    let f = WaveFunction::random(FockBasis::shared(6, 2).unwrap(), 1);
    assert!(matches!(
        imax_two_fermion(&f, 3),
        Err(Error::OddOrbitalCount(3))
    ));
    let g = WaveFunction::random(FockBasis::shared(6, 3).unwrap(), 1);
    assert!(imax_two_fermion(&g, 4).is_err());
}

#[test]
fn two_fermion_occupations_come_in_pairs() {
    for seed in 0..20 {
        let f = WaveFunction::random(FockBasis::shared(8, 2).unwrap(), seed);
        let occ = one_particle_rdm(&f).occupations();
        for pair in occ.chunks(2) {
            assert!((pair[0] - pair[1]).abs() < 1e-8, "{occ:?}");
        }
    }
}

#[test]
fn two_fermion_natural_orbitals_achieve_the_value() {
    let f = WaveFunction::random(FockBasis::shared(8, 2).unwrap(), 17);
    let opt = imax_two_fermion(&f, 4).unwrap();
    let v = slater_forge_core::OrbitalSet::new(opt.orbitals.clone()).unwrap();
    let i = slater_forge_core::objective(&f, &v).unwrap();
    assert!((i - opt.value).abs() < 1e-10);
    assert!(opt.gap >= 0.0);
}

fn symmetric_boson(d: usize, seed: u64) -> DMatrix<C64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut b = DMatrix::from_fn(d, d, |_, _| {
        C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
    });
    b = (&b + b.transpose()) * c(0.5);
    let norm = b.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    b / c(norm)
}

/// Weight of `b` in the two-boson space of the 2-dim subspace orthogonal to `n`.
fn boson_weight_outside(b: &DMatrix<C64>, n: &nalgebra::DVector<C64>) -> f64 {
    let p = DMatrix::identity(3, 3) - n * n.adjoint();
    // b'(x, y) = sum P(x, x') P(y, y') b(x', y')
    (&p * b * p.transpose()).iter().map(|z| z.norm_sqr()).sum()
}

#[test]
fn two_boson_matches_brute_force_subspace_search() {
    for seed in 0..3 {
        let b = symmetric_boson(3, seed);
        let exact = imax_two_boson(&b, 2).unwrap();
        // grid over unit vectors n in C^3 modulo global phase, then local refinement
        let unit = |a: f64, bb: f64, t1: f64, t2: f64| {
            nalgebra::DVector::from_vec(vec![
                c(a.cos()),
                C64::from_polar(a.sin() * bb.cos(), t1),
                C64::from_polar(a.sin() * bb.sin(), t2),
            ])
        };
        let mut best = (f64::NEG_INFINITY, [0.0; 4]);
        let steps = 24;
        let tau = std::f64::consts::TAU;
        for i in 0..=steps / 2 {
            for j in 0..=steps / 2 {
                for k in 0..steps {
                    for l in 0..steps {
                        let x = [
                            i as f64 * tau / 2.0 / (steps / 2) as f64 / 2.0,
                            j as f64 * tau / 2.0 / (steps / 2) as f64 / 2.0,
                            k as f64 * tau / steps as f64,
                            l as f64 * tau / steps as f64,
                        ];
                        let w = boson_weight_outside(&b, &unit(x[0], x[1], x[2], x[3]));
                        if w > best.0 {
                            best = (w, x);
                        }
                    }
                }
            }
        }
        let mut h = 0.1;
        while h > 1e-9 {
            let mut improved = false;
            for dim in 0..4 {
                for s in [-1.0, 1.0] {
                    let mut x = best.1;
                    x[dim] += s * h;
                    let w = boson_weight_outside(&b, &unit(x[0], x[1], x[2], x[3]));
                    if w > best.0 {
                        best = (w, x);
                        improved = true;
                    }
                }
            }
            if !improved {
                h *= 0.5;
            }
        }
        assert!(
            (best.0 - exact).abs() < 1e-8,
            "brute force {} vs {}",
            best.0,
            exact
        );
    }
}

#[test]
fn two_boson_canonical_read_off() {
    let psi = random_orbitals(4, 2, 3).unwrap();
    let p1 = psi.matrix().column(0).clone_owned();
    let p2 = psi.matrix().column(1).clone_owned();
    let condensate = &p1 * p1.transpose();
    assert!((imax_two_boson(&condensate, 1).unwrap() - 1.0).abs() < 1e-12);
    let mixed = &p1 * p1.transpose() * c(0.6f64.sqrt()) + &p2 * p2.transpose() * c(0.4f64.sqrt());
    assert!((imax_two_boson(&mixed, 1).unwrap() - 0.6).abs() < 1e-12);
    assert!((imax_two_boson(&mixed, 2).unwrap() - 1.0).abs() < 1e-12);
}

#[test]
fn two_boson_rejects_asymmetric() {
    let mut b = symmetric_boson(3, 1);
    b[(0, 1)] += c(0.1);
    assert!(matches!(imax_two_boson(&b, 1), Err(Error::NotSymmetric(_))));
}

#[test]
fn upper_bound_edge_cases() {
    let f = WaveFunction::random(FockBasis::shared(7, 3).unwrap(), 8);
    assert_eq!(upper_bound(&f, 7).unwrap(), 1.0);
    let mut prev = 0.0;
    for m in 1..=7 {
        let b = upper_bound(&f, m).unwrap();
        assert!(b >= prev - 1e-15);
        prev = b;
    }
    let psi = random_orbitals(7, 3, 2).unwrap();
    let s = slater_state(FockBasis::shared(7, 3).unwrap(), psi.matrix()).unwrap();
    assert!((upper_bound(&s, 3).unwrap() - 1.0).abs() < 1e-12);
}

#[test]
fn hole_of_basis_state() {
    // A = (1, 0, 0, 0): the state missing site 0
    let basis = FockBasis::shared(4, 3).unwrap();
    let f = WaveFunction::basis_state(basis, &[1, 2, 3]).unwrap();
    let h = hole_decomposition(&f).unwrap();
    assert_eq!(h.hole_orbital, vec![c(-1.0), c(0.0), c(0.0), c(0.0)]);
    assert!(h.reconstruction_error < 1e-12);
}

#[test]
fn hole_is_rdm_kernel_for_random_states() {
    for (n, seed) in [(2, 1), (3, 2), (4, 3), (5, 4)] {
        let f = WaveFunction::random(FockBasis::shared(n + 1, n).unwrap(), seed);
        let h = hole_decomposition(&f).unwrap();
        assert!(h.reconstruction_error < 1e-10);
        assert!(h.contraction_residual < 1e-10);
        for k in 0..n {
            let ov: C64 = h
                .complement_orbitals
                .column(k)
                .iter()
                .zip(&h.hole_orbital)
                .map(|(a, b)| a.conj() * b)
                .sum();
            assert!(ov.norm() < 1e-10);
        }
        let rdm = one_particle_rdm(&f);
        let hv = nalgebra::DVector::from_vec(h.hole_orbital.clone());
        assert!((rdm.matrix() * &hv).norm() < 1e-10);
        let occ = rdm.occupations();
        assert!(occ[n].abs() < 1e-10 && (occ[n - 1] - 1.0).abs() < 1e-10);
    }
}

#[test]
fn hole_of_chain_ground_states() {
    for u in [-3.0, 1.0, 10.0] {
        let f = lattice::ground_state(&ChainSpec::new(5, 4, u)).unwrap();
        assert!(hole_decomposition(&f).unwrap().reconstruction_error < 1e-10);
    }
}

#[test]
fn hole_errors() {
    let f = WaveFunction::random(FockBasis::shared(6, 3).unwrap(), 1);
    assert!(matches!(
        hole_decomposition(&f),
        Err(Error::DimensionMismatch { .. })
    ));
    let zero = WaveFunction::zeros(FockBasis::shared(4, 3).unwrap());
    assert!(matches!(
        hole_decomposition(&zero),
        Err(Error::Degenerate(_))
    ));
}

#[test]
fn identical_states_have_zero_distance() {
    let f = WaveFunction::random(FockBasis::shared(6, 3).unwrap(), 5);
    let r = density_distance_bound_check(&f, &f).unwrap();
    assert!(r.epsilon.abs() < 1e-15 && r.delta1.abs() < 1e-15 && r.bound_ok);
    let g = WaveFunction::random(FockBasis::shared(6, 2).unwrap(), 5);
    assert!(density_distance_bound_check(&f, &g).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn density_distance_bound_holds_for_near_pairs(seed in 0u64..1_000_000, scale in 1e-6f64..0.3) {
        let basis = FockBasis::shared(7, 3).unwrap();
        let f1 = WaveFunction::random(basis.clone(), seed);
        let noise = WaveFunction::random(basis.clone(), seed + 1);
        let phase = C64::from_polar(1.0, seed as f64);
        let amps = f1.amplitudes().iter().zip(noise.amplitudes()).map(|(a, b)| (a + b * scale) * phase).collect();
        let mut f2 = WaveFunction::new(basis, amps).unwrap();
        f2.normalize();
        let r = density_distance_bound_check(&f1, &f2).unwrap();
        prop_assert!(r.bound_ok, "{:?}", r);
    }
}
