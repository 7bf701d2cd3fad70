//! Property tests for the structural invariants of each module.

use std::f64::consts::PI;

use dilute_bose::bogoliubov::{kernels_eff, mode_ground_energy};
use dilute_bose::born::m_beta;
use dilute_bose::fock::{self, FockBasis, LanczosConfig, ModeSet, Sector, Variant};
use dilute_bose::jastrow::{log_psi, local_energy, local_kinetic, Configuration, JastrowState};
use dilute_bose::lattice::{correction_summand, norm2, MomentumLattice};
use dilute_bose::potential::RadialPotential;
use dilute_bose::scattering::solve_hard_core;
use dilute_bose::Error;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn binomial(n: u64, k: u64) -> u64 {
    (1..=k).fold(1, |acc, i| acc * (n + 1 - i) / i)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn soft_sphere_transform_bounded_and_even(kappa in 0.01f64..50.0, radius in 0.1f64..3.0, p in 0.0f64..200.0) {
        let v = RadialPotential::soft_sphere(kappa, radius).unwrap();
        let v0 = v.fourier_hat(0.0).unwrap();
        let vp = v.fourier_hat(p).unwrap();
        prop_assert!((v0 - kappa * 4.0 * PI * radius.powi(3) / 3.0).abs() <= 1e-12 * v0);
        prop_assert!(vp.abs() <= v0 * (1.0 + 1e-12));
        prop_assert_eq!(vp, v.fourier_hat(-p).unwrap_or(vp));
        let near = v.fourier_hat(1e-8).unwrap();
        prop_assert!((near - v0).abs() <= 1e-10 * v0);
    }

    #[test]
    fn potentials_nonnegative_with_compact_support(kappa in 0.0f64..10.0, radius in 0.1f64..3.0, r in 0.0f64..10.0) {
        let v = RadialPotential::soft_sphere(kappa, radius).unwrap();
        prop_assert!(v.value(r) >= 0.0);
        if r > v.support_radius() {
            prop_assert_eq!(v.value(r), 0.0);
        }
    }

    #[test]
    fn tabulated_matches_analytic(kappa in 0.1f64..5.0, p in 0.0f64..40.0) {
        let grid: Vec<f64> = (0..=400).map(|i| i as f64 / 400.0).collect();
        let vals = vec![kappa; grid.len()];
        let tab = RadialPotential::tabulated(grid, vals).unwrap();
        let exact = RadialPotential::soft_sphere(kappa, 1.0).unwrap().fourier_hat(p).unwrap();
        prop_assert!((tab.fourier_hat(p).unwrap() - exact).abs() <= 1e-9 * kappa);
    }

    #[test]
    fn hard_core_profile_shape(a in 0.1f64..2.0, n in 10u64..100_000, frac in 0.0f64..1.0) {
        let core = a / n as f64;
        let ell = core * 1.5 + frac * (0.45 - core * 1.5);
        let sol = solve_hard_core(a, n, ell).unwrap();
        prop_assert!((sol.value(ell) - 1.0).abs() < 1e-12);
        prop_assert!(sol.derivative(ell).unwrap().abs() < 1e-8 * ell.recip());
        prop_assert_eq!(sol.value(core * 0.5), 0.0);
        for i in 0..=32 {
            let r = core + (ell - core) * i as f64 / 32.0;
            let f = sol.value(r);
            prop_assert!((-1e-15..=1.0 + 1e-12).contains(&f));
        }
    }

    #[test]
    fn hard_core_eigenvalue_decreases_in_radius(a in 0.1f64..2.0, n in 100u64..100_000, ell in 0.01f64..0.4) {
        let small = solve_hard_core(a, n, ell).unwrap().lambda;
        let large = solve_hard_core(a, n, ell * 1.1).unwrap().lambda;
        prop_assert!(large < small);
    }

    #[test]
    fn born_order_count(beta in 0.01f64..0.99) {
        let m = m_beta(beta).unwrap() as f64;
        let bound = 1.0 / (1.0 - beta) + 0.5f64.min(beta / (1.0 - beta));
        prop_assert!(m <= bound + 1e-12 && m + 1.0 > bound);
    }

    #[test]
    fn correction_summand_is_negative_and_matches_raw(a in 0.1f64..100.0, n2 in 1u64..50) {
        let p2 = 4.0 * PI * PI * n2 as f64;
        let s = correction_summand(a, p2);
        prop_assert!(s < 0.0);
        let raw = p2 + a - (p2 * p2 + 2.0 * a * p2).sqrt() - a * a / (2.0 * p2);
        prop_assert!((s - raw).abs() <= 1e-9 * (a * a / p2));
    }

    #[test]
    fn pair_ground_energy_matches_closed_form(f in 0.1f64..100.0, ratio in -0.999f64..0.999) {
        let g = ratio * f;
        let e = mode_ground_energy(f, g).unwrap();
        prop_assert!((2.0 * e - (-f + (f * f - g * g).sqrt())).abs() <= 1e-12 * f);
        let formula = fock::pair_formula(&[f, f], &[g, g]).unwrap();
        prop_assert!((formula - 2.0 * e).abs() <= 1e-14 * f);
    }

    #[test]
    fn fock_basis_round_trip(pairs in 1usize..4, n_max in 0u32..10, full in any::<bool>()) {
        let sector = if full { Sector::Full } else { Sector::PairDiagonal };
        let basis = FockBasis::new(ModeSet::first_pairs(pairs).unwrap(), n_max, sector).unwrap();
        let expected = if full {
            binomial(n_max as u64 + 2 * pairs as u64, 2 * pairs as u64)
        } else {
            binomial(n_max as u64 / 2 + pairs as u64, pairs as u64)
        };
        prop_assert_eq!(basis.dimension() as u64, expected);
        for i in 0..basis.dimension() {
            prop_assert_eq!(basis.encode(basis.decode(i)), Some(i));
        }
    }

    #[test]
    fn quadratic_forms_symmetric_and_match_formula(f in 1.0f64..10.0, ratio in -0.8f64..0.8) {
        let g = ratio * f;
        let basis = FockBasis::new(ModeSet::first_pairs(1).unwrap(), 96, Sector::PairDiagonal).unwrap();
        let q = fock::build_quadratic(&[f, f], &[g, g], &basis, Variant::A, None).unwrap();
        prop_assert!(q.symmetry_defect() <= 1e-12);
        let e = fock::ground_state(&q, &LanczosConfig::default()).unwrap().energy;
        prop_assert!((e - fock::pair_formula(&[f, f], &[g, g]).unwrap()).abs() <= 1e-8 * f);
    }

    #[test]
    fn jastrow_relabeling_and_translation(seed in any::<u64>(), shift in -4i32..4) {
        let st = JastrowState::new(8, 0.5, 0.3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let c = Configuration::random_packing(8, st.core(), &mut rng).unwrap();
        prop_assert!(c.min_distance() > st.core());
        let mut perm = c.clone();
        perm.positions.rotate_left(seed as usize % 8);
        prop_assert_eq!(log_psi(&st, &c), log_psi(&st, &perm));
        prop_assert_eq!(local_kinetic(&st, &c), local_kinetic(&st, &perm));
        prop_assert_eq!(local_energy(&st, &c), local_energy(&st, &perm));
        // dyadic shifts keep every coordinate difference exact
        let t = shift as f64 / 8.0;
        let moved = Configuration::new(c.positions.iter().map(|p| p.map(|x| x + t)).collect());
        let lp = log_psi(&st, &c);
        prop_assert!((log_psi(&st, &moved) - lp).abs() <= 1e-12 * lp.abs().max(1.0));
    }
}

#[test]
fn hard_core_has_no_transform() {
    let v = RadialPotential::hard_core(1.0).unwrap();
    assert!(matches!(v.fourier_hat(0.0), Err(Error::NonIntegrablePotential(_))));
}

#[test]
fn lattice_excludes_zero_and_is_closed_under_negation() {
    for lattice in [MomentumLattice::euclidean(5.0 * 2.0 * PI).unwrap(), MomentumLattice::cube(4).unwrap()] {
        let points = lattice.points();
        assert!(!points.contains(&[0, 0, 0]));
        assert!(points.iter().all(|n| lattice.contains([-n[0], -n[1], -n[2]])));
        let by_shells: u64 = lattice.shells().iter().map(|s| s.count).sum();
        assert_eq!(by_shells, points.len() as u64);
    }
    let k = 6i64;
    let mut direct = 0u64;
    for x in -k..=k {
        for y in -k..=k {
            for z in -k..=k {
                let n2 = norm2([x, y, z]);
                direct += u64::from(n2 > 0 && n2 <= (k * k) as u64);
            }
        }
    }
    assert_eq!(MomentumLattice::euclidean(k as f64 * 2.0 * PI).unwrap().len(), direct);
}

#[test]
fn effective_kernels_satisfy_structural_identities() {
    let lattice = MomentumLattice::euclidean(20.0 * 2.0 * PI).unwrap();
    let (kernels, data) = kernels_eff(1.0, 1000, 0.05, 0.1, &lattice).unwrap();
    for k in &kernels.points {
        assert!((k.gamma * k.gamma - k.sigma * k.sigma - 1.0).abs() <= 1e-12 * k.gamma * k.gamma);
        assert!(k.diagonal > 0.0 && k.pairing.abs() < k.diagonal);
        assert!(k.dispersion > 0.0);
        let rot = (k.diagonal * (2.0 * k.tau).sinh() + k.pairing * (2.0 * k.tau).cosh()).abs();
        assert!(rot <= 1e-10 * k.diagonal, "{k:?}");
    }
    assert!(data.v_ell_hat_zero > 0.0);
}
