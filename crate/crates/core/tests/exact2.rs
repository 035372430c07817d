mod common;

use comcheck::exact2::{exact_spdm, ground_state};
use comcheck::model::make_grid;

#[test]
fn com_variance_from_pair_density_is_interaction_independent() {
    let grid = make_grid(14.0, 701, 0.0).unwrap();
    for g in [-1.0, -2.0, -3.1623] {
        let (sr2, _) = common::exact_pair_variances(g, &grid).unwrap();
        assert!((sr2 - 0.25).abs() < 1e-6, "g={g}: sigma_R^2 = {sr2}");
    }
}

#[test]
fn density_variance_adds_relative_spread() {
    let grid = make_grid(14.0, 701, 0.0).unwrap();
    for g in [-0.5, -2.0, -3.1623] {
        let (_, sn2) = common::exact_pair_variances(g, &grid).unwrap();
        let ex = ground_state(g, &grid).unwrap();
        assert!((sn2 - ex.density_variance()).abs() < 1e-6, "g={g}: {sn2} vs {}", ex.density_variance());
        assert!(sn2 >= 0.25);
    }
}

/// Away from the cusp the relative wave function solves
/// `-phi'' + r^2/4 phi = (nu + 1/2) phi`, and at the origin
/// `phi'(0+) - phi'(0-) = g phi(0)`.
#[test]
fn relative_wave_function_solves_the_contact_problem() {
    for g in [-1.0, -2.0, -3.1623] {
        let grid = make_grid(14.0, 2801, 0.0).unwrap();
        let ex = ground_state(g, &grid).unwrap();
        let dx = grid.spacing();
        let mid = grid.n_points() - 1;
        let phi = &ex.phi0;
        let e_rel = ex.nu + 0.5;
        let peak = phi[mid].abs();
        let mut worst: f64 = 0.0;
        for b in (mid + 40)..(mid + 1600) {
            let r = (b as f64 - mid as f64) * dx;
            let lap = (phi[b + 1] - 2.0 * phi[b] + phi[b - 1]) / (dx * dx);
            worst = worst.max((-lap + 0.25 * r * r * phi[b] - e_rel * phi[b]).abs() / peak);
        }
        assert!(worst < 1e-4, "g={g}: ODE residual {worst:e}");
        let slope = (-3.0 * phi[mid] + 4.0 * phi[mid + 1] - phi[mid + 2]) / (2.0 * dx);
        let jump = 2.0 * slope;
        assert!((jump - g * phi[mid]).abs() < 1e-4 * peak * g.abs(), "g={g}: cusp {jump} vs {}", g * phi[mid]);
    }
}

#[test]
fn occupancies_are_physical_and_refinement_stable() {
    let coarse = make_grid(14.0, 701, 0.0).unwrap();
    let fine = make_grid(14.0, 1401, 0.0).unwrap();
    for g in [-2.0, -3.1623] {
        let a = exact_spdm(&ground_state(g, &coarse).unwrap(), 2).unwrap();
        let b = exact_spdm(&ground_state(g, &fine).unwrap(), 2).unwrap();
        for spec in [&a, &b] {
            let min = spec.occupations.iter().copied().fold(f64::INFINITY, f64::min);
            assert!(min >= -1e-8 * 2.0, "g={g}: occupation {min:e}");
            assert!((spec.total() - 2.0).abs() < 1e-6);
            assert!(spec.occupations.windows(2).all(|w| w[0] >= w[1]));
        }
        for k in 0..4 {
            let d = (a.occupations[k] - b.occupations[k]).abs() / 2.0;
            assert!(d < 1e-4, "g={g}: n_{} moved by {d:e} under refinement", k + 1);
        }
        let x = b.orbitals[0].iter().zip(b.orbitals[1].iter()).map(|(p, q)| p.conj() * q).sum::<num_complex::Complex64>()
            * fine.spacing();
        assert!(x.norm() < 1e-8, "natural orbitals not orthogonal");
    }
}
