//! Killed Green functions against Neumann series, brute-force boundary
//! scans, and closed forms.

use std::collections::BTreeSet;

use proptest::prelude::*;
use rwre_core::dirichlet::WeightVector;
use rwre_core::environment::{EnvironmentView, TransitionRows};
use rwre_core::green::{
    green_fourier_origin, green_killed, green_series_origin, homogeneous_stats, symmetrize_check,
    KilledGreenOperator,
};
use rwre_core::lattice::{make_box, FiniteDomain, Link, Site};

/// `sum_k delta^k Q^k` row from `source`, summed by doubling:
/// `S_2n = S_n + A^n S_n` with `A = delta Q`, until `A^n` has died out.
fn neumann_row(domain: &FiniteDomain, rows: &TransitionRows, delta: f64, source: usize) -> Vec<f64> {
    let n = domain.len();
    let mul = |a: &[Vec<f64>], b: &[Vec<f64>]| -> Vec<Vec<f64>> {
        (0..n).map(|i| (0..n).map(|j| (0..n).map(|k| a[i][k] * b[k][j]).sum()).collect()).collect()
    };
    let mut power = vec![vec![0.0; n]; n];
    for (x, row) in power.iter_mut().enumerate() {
        for dir in 0..rows.directions() {
            if let Link::Interior(y) = domain.link(x, dir) {
                row[y] += delta * rows.get(x, dir);
            }
        }
    }
    let mut sum: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect();
    for _ in 0..64 {
        let shifted = mul(&power, &sum);
        for (a, b) in sum.iter_mut().zip(&shifted) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
        power = mul(&power, &power);
        if power.iter().flatten().all(|v| *v < 1e-300) {
            break;
        }
    }
    sum.swap_remove(source)
}

fn instance() -> impl Strategy<Value = (WeightVector, u32, u64, f64)> {
    (1usize..=2, 1u32..=3, any::<u64>(), prop_oneof![Just(0.5), Just(0.9), Just(1.0)]).prop_flat_map(
        |(d, r, seed, delta)| {
            proptest::collection::vec(0.3f64..4.0, 2 * d)
                .prop_map(move |a| (WeightVector::new(d, a).unwrap(), r, seed, delta))
        },
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn lu_matches_neumann_series((w, r, seed, delta) in instance()) {
        let domain = make_box(&Site::origin(w.dim()), r);
        let rows = TransitionRows::from_view(&EnvironmentView::new(seed, w), &domain);
        let s = domain.interior_index(&Site::origin(domain.dim())).unwrap();
        let want = neumann_row(&domain, &rows, delta, s);
        let got = green_killed(&rows, &domain, delta, &Site::origin(domain.dim())).unwrap();
        for (a, b) in got.interior.iter().zip(&want) {
            prop_assert!((a - b).abs() <= 1e-9 * b.max(1.0), "{a} vs {b}");
        }
        // mass leaving through the boundary plus killed mass is one
        let out: f64 = got.boundary.iter().sum::<f64>() + (1.0 - delta) * got.interior.iter().sum::<f64>();
        prop_assert!((out - 1.0).abs() <= 1e-10);
    }

    #[test]
    fn return_identity_holds((w, r, seed, delta) in instance()) {
        let domain = make_box(&Site::origin(w.dim()), r);
        let rows = TransitionRows::from_view(&EnvironmentView::new(seed, w), &domain);
        let op = KilledGreenOperator::solve(&domain, &rows, delta).unwrap();
        prop_assert!(op.return_identity_residual(&rows) <= 1e-10);
        // hand-written form of the identity at the first interior site
        let z = &domain.interior()[0];
        let mut lhs = 0.0;
        for k in 0..rows.directions() {
            lhs += delta * rows.get(0, k) * op.entry(&z.step(k), z);
        }
        prop_assert!((lhs - (op.entry(z, z) - 1.0)).abs() <= 1e-10);
    }

    #[test]
    fn symmetrization_holds(d in 1usize..=2, delta in 0.05f64..0.98, a in proptest::collection::vec(0.5f64..5.0, 4)) {
        let w = WeightVector::new(d, a[..2 * d].to_vec()).unwrap();
        let dev = symmetrize_check(&homogeneous_stats(&w), delta, &make_box(&Site::origin(d), 2)).unwrap();
        prop_assert!(dev <= 1e-10);
    }
}

#[test]
fn boundary_matches_a_brute_force_scan() {
    let sites: Vec<Site> = [[0, 0], [1, 0], [2, 0], [2, 1], [2, 2], [0, 1]].iter().map(|c| Site::new(c.to_vec())).collect();
    let domain = FiniteDomain::from_sites(2, sites.clone()).unwrap();
    let inside: BTreeSet<Vec<i64>> = sites.iter().map(|s| s.coords().to_vec()).collect();
    let mut want = BTreeSet::new();
    for x in -2..=4 {
        for y in -2..=4 {
            let c = vec![x, y];
            if inside.contains(&c) {
                continue;
            }
            let adjacent = inside.iter().any(|s| (s[0] - x).abs() + (s[1] - y).abs() == 1);
            if adjacent {
                want.insert(c);
            }
        }
    }
    let got: BTreeSet<Vec<i64>> = domain.boundary().iter().map(|s| s.coords().to_vec()).collect();
    assert_eq!(got, want);
}

#[test]
fn two_site_closed_form() {
    let w = WeightVector::new(1, vec![2.0, 1.0]).unwrap();
    let domain = FiniteDomain::from_sites(1, vec![Site::new(vec![0]), Site::new(vec![1])]).unwrap();
    for seed in 0..20 {
        let rows = TransitionRows::from_view(&EnvironmentView::new(seed, w.clone()), &domain);
        let (right, left) = (rows.get(0, 0), rows.get(1, 1));
        for delta in [0.3, 0.9, 1.0] {
            let g = green_killed(&rows, &domain, delta, &Site::new(vec![0])).unwrap();
            let want = 1.0 / (1.0 - delta * delta * right * left);
            assert!((g.interior[0] - want).abs() <= 1e-12 * want);
            assert!((g.interior[1] - delta * right * want).abs() <= 1e-12 * want);
        }
    }
}

#[test]
fn one_dimensional_green_values() {
    for (p, q) in [(3.0, 1.0), (5.0, 2.0), (1.0, 4.0), (10.0, 9.5)] {
        let w = WeightVector::new(1, vec![p, q]).unwrap();
        let want = (p + q) / (p - q as f64).abs();
        let got = green_fourier_origin(&homogeneous_stats(&w)).unwrap();
        assert!((got - want).abs() <= 1e-10 * want, "{got} vs {want}");
        let s = green_series_origin(&homogeneous_stats(&w), None).unwrap();
        assert!((s.value - want).abs() <= s.tail_bound + 1e-10);
    }
}

#[test]
fn fourier_agrees_with_series_in_three_dimensions() {
    let w = WeightVector::new(3, vec![3.0, 1.0, 2.0, 2.0, 1.5, 1.0]).unwrap();
    let k = homogeneous_stats(&w);
    assert!(k.k_m < 0.99);
    let f = green_fourier_origin(&k).unwrap();
    let s = green_series_origin(&k, None).unwrap();
    assert!((f - s.value).abs() <= s.tail_bound + 1e-8, "{f} vs {}", s.value);
}

proptest! {
    #[test]
    fn green_is_nondecreasing_in_delta((w, r, seed, _) in instance()) {
        let domain = make_box(&Site::origin(w.dim()), r);
        let rows = TransitionRows::from_view(&EnvironmentView::new(seed, w), &domain);
        for source in domain.interior() {
            let low = green_killed(&rows, &domain, 0.5, source).unwrap();
            let high = green_killed(&rows, &domain, 0.9, source).unwrap();
            for (a, b) in low.interior.iter().chain(&low.boundary).zip(high.interior.iter().chain(&high.boundary)) {
                prop_assert!(*b >= *a * (1.0 - 1e-12), "{a} > {b}");
            }
        }
    }
}
