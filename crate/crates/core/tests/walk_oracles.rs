//! Annealed path laws against an urn computed directly in the test, and the
//! quenched sampler against exact transition products.

use std::collections::HashMap;

use proptest::prelude::*;
use rwre_core::dirichlet::WeightVector;
use rwre_core::environment::{env_at, EnvironmentView};
use rwre_core::lattice::Site;
use rwre_core::rng::{CounterRng, StreamTag};
use rwre_core::walk::{
    annealed_path_logprob, crossing_counts, enumerate_paths, estimate_velocity, reinforced_path_logprob,
    run_displacement, run_quenched, run_reinforced, Path,
};

/// Probability of a path for the urn walk: at each visit of `x` pick
/// direction `i` with weight `alpha_i + (past exits from x along i)`.
fn urn_probability(w: &WeightVector, path: &Path) -> f64 {
    let mut counts: HashMap<Vec<i64>, Vec<f64>> = HashMap::new();
    let mut x = vec![0i64; w.dim()];
    let mut p = 1.0;
    for &d in path.directions() {
        let c = counts.entry(x.clone()).or_insert_with(|| w.alphas().to_vec());
        p *= c[d as usize] / c.iter().sum::<f64>();
        c[d as usize] += 1.0;
        let d = d as usize;
        if d < w.dim() {
            x[d] += 1;
        } else {
            x[d - w.dim()] -= 1;
        }
    }
    p
}

fn weights() -> impl Strategy<Value = WeightVector> {
    (1usize..=3).prop_flat_map(|d| {
        proptest::collection::vec(0.1f64..6.0, 2 * d).prop_map(move |a| WeightVector::new(d, a).unwrap())
    })
}

fn path_for(w: &WeightVector, len: usize) -> impl Strategy<Value = Path> {
    let (dim, k) = (w.dim(), w.directions() as u8);
    proptest::collection::vec(0u8..k, len).prop_map(move |dirs| Path::from_directions(dim, dirs).unwrap())
}

proptest! {
    #[test]
    fn annealed_law_is_the_urn((w, p) in weights().prop_flat_map(|w| (Just(w.clone()), path_for(&w, 14)))) {
        let want = urn_probability(&w, &p).ln();
        prop_assert!((annealed_path_logprob(&w, &p) - want).abs() <= 1e-11);
        prop_assert!((reinforced_path_logprob(&w, &p) - want).abs() <= 1e-11);
    }

    #[test]
    fn enumeration_sums_to_one(w in weights(), n in 0usize..5) {
        prop_assume!(w.dim() < 3 || n <= 3);
        let total: f64 = enumerate_paths(w.dim(), n).iter().map(|p| annealed_path_logprob(&w, p).exp()).sum();
        prop_assert!((total - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn crossing_counts_add_up(p in weights().prop_flat_map(|w| path_for(&w, 20))) {
        let c = crossing_counts(&p);
        prop_assert_eq!(c.total(), p.len() as u64);
        let sites = p.sites();
        for s in &sites[..sites.len() - 1] {
            let visits = sites[..sites.len() - 1].iter().filter(|t| *t == s).count() as u32;
            prop_assert_eq!(c.departures(s), visits);
        }
    }
}

#[test]
fn reinforced_sampler_matches_urn_frequencies() {
    let w = WeightVector::new(1, vec![1.5, 0.8]).unwrap();
    let n = 5;
    let paths = enumerate_paths(1, n);
    let runs = 200_000;
    let mut counts = vec![0u64; paths.len()];
    for r in 0..runs {
        let p = run_reinforced(&w, n, &mut CounterRng::indexed(8, StreamTag::Walk, r));
        counts[p.directions().iter().fold(0, |a, &d| a * 2 + d as usize)] += 1;
    }
    let chi2: f64 = paths
        .iter()
        .zip(&counts)
        .map(|(p, &c)| {
            let e = urn_probability(&w, p) * runs as f64;
            (c as f64 - e).powi(2) / e
        })
        .sum();
    // 31 degrees of freedom, 99.9% quantile 61.1
    assert!(chi2 < 61.1, "chi2 = {chi2}");
}

#[test]
fn quenched_sampler_follows_the_environment() {
    let w = WeightVector::new(2, vec![1.0, 2.0, 0.5, 1.5]).unwrap();
    let view = EnvironmentView::new(31, w);
    let runs = 100_000;
    let n = 2;
    let mut counts = vec![0u64; 16];
    for r in 0..runs {
        let p = run_quenched(&view, n, &mut CounterRng::indexed(31, StreamTag::Walk, r));
        counts[p.directions().iter().fold(0, |a, &d| a * 4 + d as usize)] += 1;
    }
    let mut chi2 = 0.0;
    for (idx, &c) in counts.iter().enumerate() {
        let (d0, d1) = (idx / 4, idx % 4);
        let x1 = Site::origin(2).step(d0);
        let prob = env_at(&view, &Site::origin(2)).get(d0) * env_at(&view, &x1).get(d1);
        let e = prob * runs as f64;
        chi2 += (c as f64 - e).powi(2) / e;
    }
    // 15 degrees of freedom, 99.9% quantile 37.7
    assert!(chi2 < 37.7, "chi2 = {chi2}");
}

#[test]
fn runs_are_reproducible_and_distinct() {
    let w = WeightVector::new(2, vec![2.0, 1.0, 1.0, 1.0]).unwrap();
    assert_eq!(run_displacement(&w, 500, 3, 7), run_displacement(&w, 500, 3, 7));
    assert_ne!(run_displacement(&w, 500, 3, 7), run_displacement(&w, 500, 3, 8));
    let path = run_reinforced(&w, 500, &mut CounterRng::indexed(3, StreamTag::Walk, 7));
    assert_eq!(path.end().coords(), run_displacement(&w, 500, 3, 7).as_slice());
    let a = estimate_velocity(&w, 200, 20, 4).unwrap();
    let b = estimate_velocity(&w, 200, 20, 4).unwrap();
    assert_eq!(a, b);
}
