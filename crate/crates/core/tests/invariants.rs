//! Property tests over random diagonal and coupled point operators, where the
//! expected integers follow from counting signs.

use callias_core::bvp::{
    aps_condition, assemble_bvp, check_condition_change, compute_index, IndexOptions, IndexRoute, Side,
};
use callias_core::flow_eta::{
    default_cobordism, relative_eta, relative_eta_heat, spectral_flow_both, EtaOptions, FamilySpec, HeatOptions,
};
use callias_core::grid::{BoundarySlice, TimeGrid};
use callias_core::linalg::{CsrMatrix, C64};
use callias_core::ops::{BoundaryOperator, CylinderOperator};
use callias_core::spectral::{eigendecompose, DenseEigensolver, SpectralData};
use proptest::prelude::*;

/// Entries bounded away from zero so no kernel appears.
fn entry() -> impl Strategy<Value = f64> {
    (0.2f64..3.0, any::<bool>()).prop_map(|(m, neg)| if neg { -m } else { m })
}

fn diagonal(max_points: usize) -> impl Strategy<Value = Vec<f64>> {
    (1..=max_points).prop_flat_map(|k| prop::collection::vec(entry(), 2 * k))
}

fn diag_pair(max_points: usize) -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    (1..=max_points).prop_flat_map(|k| (prop::collection::vec(entry(), 2 * k), prop::collection::vec(entry(), 2 * k)))
}

fn op(d: &[f64]) -> BoundaryOperator {
    BoundaryOperator::points_diagonal(d).unwrap()
}

fn negatives(d: &[f64]) -> i64 {
    d.iter().filter(|&&x| x < 0.0).count() as i64
}

/// Coupled point operator: graded diagonal plus Dirac couplings between
/// opposite grading components.
fn coupled() -> impl Strategy<Value = BoundaryOperator> {
    (1usize..=3)
        .prop_flat_map(|k| {
            (
                prop::collection::vec(entry(), 2 * k),
                prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), k * k),
            )
        })
        .prop_map(|(d, z)| {
            let k = d.len() / 2;
            let n = 2 * k;
            let pot: Vec<_> = d.iter().enumerate().map(|(i, &v)| (i, i, C64::new(v, 0.0))).collect();
            let mut dirac = Vec::new();
            for s in 0..k {
                for t in 0..k {
                    let (re, im) = z[s * k + t];
                    let w = C64::new(re, im);
                    dirac.push((2 * s, 2 * t + 1, w));
                    dirac.push((2 * t + 1, 2 * s, w.conj()));
                }
            }
            BoundaryOperator::from_parts(
                BoundarySlice::points(k, 2).unwrap(),
                CsrMatrix::from_triplets(n, n, dirac).unwrap(),
                CsrMatrix::from_triplets(n, n, pot).unwrap(),
                "coupled",
            )
            .unwrap()
        })
}

fn kernel_free(s: &SpectralData) -> bool {
    s.eigenvalues().iter().all(|l| l.abs() > 1e-3)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn decomposition_is_sorted_with_small_residuals(a in coupled()) {
        let s = eigendecompose(&a).unwrap();
        prop_assert_eq!(s.eigenvalues().len(), a.dim());
        prop_assert!(s.eigenvalues().windows(2).all(|w| w[0] <= w[1]));
        prop_assert!(s.residuals().iter().all(|&r| r < 1e-12));
    }

    #[test]
    fn spectral_bytes_round_trip(a in coupled()) {
        let s = eigendecompose(&a).unwrap();
        let back = SpectralData::from_bytes(&s.to_bytes()).unwrap();
        prop_assert_eq!(back.to_bytes(), s.to_bytes());
        prop_assert!(back == s);
    }

    #[test]
    fn lerp_hits_both_ends_exactly((d0, d1) in diag_pair(3)) {
        let (a, b) = (op(&d0), op(&d1));
        prop_assert!(BoundaryOperator::lerp(&a, &b, 0.0).unwrap().matrix() == a.matrix());
        prop_assert!(BoundaryOperator::lerp(&a, &b, 1.0).unwrap().matrix() == b.matrix());
    }

    /// For kernel-free diagonal ends, eta(A1, A0) = 2 (n_<(A0) - n_<(A1)) and the
    /// flow of the straight line has the same sign count.
    #[test]
    fn eta_and_flow_of_diagonal_pairs((d0, d1) in diag_pair(3)) {
        let (a0, a1) = (op(&d0), op(&d1));
        let expected = negatives(&d0) - negatives(&d1);
        let opts = EtaOptions { second_intervals: None, ..EtaOptions::default() };
        let r = relative_eta(&a0, &a1, None, &DenseEigensolver, &opts).unwrap();
        prop_assert_eq!(r.eta, 2 * expected);
        prop_assert!(r.consistent());
        let back = relative_eta(&a1, &a0, None, &DenseEigensolver, &opts).unwrap();
        prop_assert_eq!(back.eta, -r.eta);
        let flow = spectral_flow_both(&FamilySpec::linear(&a0, &a1, 12).unwrap(), &DenseEigensolver).unwrap();
        prop_assert!(flow.agree);
        prop_assert_eq!(flow.crossing.sf, expected);
    }

    #[test]
    fn heat_route_counts_signs((d0, d1) in diag_pair(3)) {
        let (s0, s1) = (eigendecompose(&op(&d0)).unwrap(), eigendecompose(&op(&d1)).unwrap());
        let h = relative_eta_heat(&s0, &s1, HeatOptions::default()).unwrap();
        let expected = 2.0 * (negatives(&d0) - negatives(&d1)) as f64;
        prop_assert!((h - expected).abs() < 1e-6, "{} vs {}", h, expected);
    }

    #[test]
    fn index_routes_agree_on_coupled_cylinders(a0 in coupled(), seed in 0u64..1000) {
        // Second end: same structure, shifted diagonal.
        let shift = 0.37 + (seed % 7) as f64 * 0.11;
        let n = a0.dim();
        let pot: Vec<_> = (0..n).map(|i| (i, i, C64::new(if i % 2 == 0 { shift } else { -shift }, 0.0))).collect();
        let bump = CsrMatrix::from_triplets(n, n, pot).unwrap();
        let a1 = BoundaryOperator::from_parts(
            a0.slice().clone(),
            a0.dirac_part().clone(),
            a0.potential_part().add(&bump).unwrap(),
            "shifted",
        ).unwrap();
        let (s0, s1) = (eigendecompose(&a0).unwrap(), eigendecompose(&a1).unwrap());
        prop_assume!(kernel_free(&s0) && kernel_free(&s1));
        let d = default_cobordism(&a0, &a1, 9).unwrap();
        let p = assemble_bvp(&d, &aps_condition(&s0, 0.0, Side::Left).unwrap(), &aps_condition(&s1, 0.0, Side::Right).unwrap()).unwrap();
        let dense = compute_index(&p, &IndexOptions { route: IndexRoute::Dense, ..IndexOptions::default() }).unwrap();
        let transfer = compute_index(&p, &IndexOptions { route: IndexRoute::Transfer, ..IndexOptions::default() }).unwrap();
        prop_assert!(dense.consistent && transfer.consistent);
        prop_assert_eq!((dense.dim_ker, dense.dim_coker), (transfer.dim_ker, transfer.dim_coker));
    }

    /// On a product cylinder moving the left APS cut from a to b adds the number
    /// of diagonal entries in [a, b).
    #[test]
    fn condition_change_on_product_cylinders(d in diagonal(4), a in -3.0f64..3.0, w in 0.05f64..3.0) {
        let b = a + w;
        prop_assume!(d.iter().all(|x| (x - a).abs() > 1e-6 && (x - b).abs() > 1e-6));
        let cyl = CylinderOperator::product(&op(&d), TimeGrid::new(1.0, 6).unwrap()).unwrap();
        let v = check_condition_change(&cyl, &DenseEigensolver, a, b, &IndexOptions::default()).unwrap();
        let count = d.iter().filter(|&&x| x >= a && x < b).count();
        prop_assert_eq!(v.count, count);
        prop_assert!(v.holds);
    }
}
