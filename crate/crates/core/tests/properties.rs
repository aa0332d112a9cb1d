//! Property tests over randomized parameters for the structural invariants:
//! operator algebra, gauge-sector structure, trace preservation, and the
//! semiclassical band confinement.

use proptest::prelude::*;

use dimersim_core::fock::{
    annihilation, build_hamiltonian, number_operator, DimerParams, FockBasis, OperatorMatrix, Site,
};
use dimersim_core::liouvillian::{lindbladian_superop, sector_pairs, sector_size};
use dimersim_core::semiclassical::{
    critical_ratio, integrate_sc, turning_point, SCParams, SCState,
};
use num_complex::Complex64 as C64;

fn rate_pair() -> impl Strategy<Value = (f64, f64)> {
    // loss in [1e-3, 1e-1], pump strictly below it
    (1e-3f64..1e-1, 0.0f64..0.9).prop_map(|(gamma, frac)| (gamma, gamma * frac))
}

fn params_strategy() -> impl Strategy<Value = DimerParams> {
    (
        0.5f64..2.0,
        0.0f64..0.5,
        0.0f64..0.5,
        rate_pair(),
        rate_pair(),
    )
        .prop_map(|(omega0, u, j, (gl, pl), (gr, pr))| {
            DimerParams::new(omega0, u, j, gl, gr, pl, pr).unwrap()
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn creation_is_the_conjugate_transpose_of_annihilation(
        cutoff in 1usize..6,
        site_right in proptest::bool::ANY,
    ) {
        let basis = FockBasis::enumerate(cutoff).unwrap();
        let site = if site_right { Site::R } else { Site::L };
        let a = annihilation(&basis, site);
        let adag = a.dagger();
        for (r, c, v) in a.iter() {
            prop_assert_eq!(adag.get(c, r), v.conj());
        }
        // a^+ a equals the number operator inside the truncated space
        let n = number_operator(&basis, site);
        prop_assert!(adag.matmul(&a).max_abs_diff(&n) < 1e-13);
    }

    #[test]
    fn hamiltonian_commutes_with_total_photon_number(
        cutoff in 1usize..5,
        params in params_strategy(),
    ) {
        let basis = FockBasis::enumerate(cutoff).unwrap();
        let h = build_hamiltonian(&basis, &params);
        prop_assert!(h.is_hermitian(1e-12));
        let n_tot = number_operator(&basis, Site::L).add(&number_operator(&basis, Site::R));
        let comm = h.matmul(&n_tot).add(&n_tot.matmul(&h).scaled(C64::new(-1.0, 0.0)));
        prop_assert!(comm.max_abs_diff(&OperatorMatrix::zeros(basis.dim())) < 1e-12);
    }

    #[test]
    fn index_map_inverts_the_state_list(cutoff in 1usize..9) {
        let basis = FockBasis::enumerate(cutoff).unwrap();
        prop_assert_eq!(basis.dim(), (cutoff + 1) * (cutoff + 1));
        for (k, &(n_l, n_r)) in basis.states().iter().enumerate() {
            prop_assert_eq!(basis.index_of(n_l, n_r), Some(k));
        }
    }

    #[test]
    fn lindbladian_annihilates_the_trace_functional(
        cutoff in 1usize..4,
        params in params_strategy(),
    ) {
        let basis = FockBasis::enumerate(cutoff).unwrap();
        let sop = lindbladian_superop(&basis, &params).unwrap();
        prop_assert!(sop.identity_left_residual() < 1e-11);
    }

    #[test]
    fn sector_sizes_add_up_to_the_vectorized_dimension(cutoff in 1usize..6) {
        let basis = FockBasis::enumerate(cutoff).unwrap();
        let max_nu = 2 * cutoff as i64;
        let mut total = 0usize;
        for nu in -max_nu..=max_nu {
            let pairs = sector_pairs(&basis, nu);
            prop_assert_eq!(pairs.len(), sector_size(cutoff, nu));
            prop_assert!(pairs.iter().all(|p| p.nu == nu));
            total += pairs.len();
        }
        prop_assert_eq!(total, basis.dim() * basis.dim());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn closed_orbits_conserve_number_and_stay_in_the_allowed_band(
        n0 in 1.0f64..5.0,
        z_frac in 0.05f64..0.8,
        ratio_frac in 0.2f64..2.0,
    ) {
        let z0 = z_frac * n0;
        let u = 0.1;
        let c = critical_ratio(n0, z0).unwrap();
        let j_over_u = ratio_frac * c;
        // orbits that graze a turning point with |Z1| close to N are skipped:
        // the equations are singular on the |Z| = N boundary
        let z1_sq = turning_point(n0, z0, j_over_u).unwrap();
        prop_assume!((z1_sq.abs() - n0 * n0).abs() > 1e-3 * n0 * n0);
        prop_assume!(z1_sq < 0.98 * n0 * n0);
        prop_assume!((j_over_u - c).abs() > 1e-3 * c);

        let params = SCParams::closed(u, j_over_u * u).unwrap();
        let s0 = SCState::new(n0, z0, 0.0).unwrap();
        let traj = integrate_sc(&s0, &params, 300.0).unwrap();

        let (band_lo, band_hi) = if z1_sq < 0.0 {
            (-z0, z0)
        } else {
            let z1 = z1_sq.sqrt();
            (z0.min(z1), z0.max(z1))
        };
        for (_, n, z, _) in traj.sample(600) {
            prop_assert!((n - n0).abs() < 1e-7 * n0);
            prop_assert!(z > band_lo - 1e-5 && z < band_hi + 1e-5,
                "Z = {z} outside [{band_lo}, {band_hi}]");
        }
    }
}
