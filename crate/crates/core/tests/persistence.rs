mod support;

use lacuna_core::fingerprint::DistanceMatrix;
use lacuna_core::persistence::{max_lifespan, rips_persistence, rips_persistence_full};
use proptest::prelude::*;
use support::oracle::{naive_rips, prim_weights};

fn flatten(d: &lacuna_core::persistence::PersistenceDiagram) -> Vec<(u8, f64, f64)> {
    d.pairs.iter().map(|p| (p.degree, p.birth, p.death)).collect()
}

fn matrix(n: usize, values: &[u8]) -> DistanceMatrix {
    // small integer grid keeps many ties, which stresses the tie-break
    let mut k = 0;
    DistanceMatrix::from_fn(n, |_, _| {
        let v = values[k % values.len()] as f64 / 8.0 + 0.125;
        k += 1;
        v
    })
}

fn circle(n: usize) -> DistanceMatrix {
    let pts: Vec<(f64, f64)> = (0..n)
        .map(|i| {
            let t = std::f64::consts::TAU * i as f64 / n as f64;
            (t.cos(), t.sin())
        })
        .collect();
    DistanceMatrix::from_fn(n, |i, j| {
        ((pts[i].0 - pts[j].0).powi(2) + (pts[i].1 - pts[j].1).powi(2)).sqrt()
    })
}

#[test]
fn circle_has_one_dominant_loop() {
    let diag = rips_persistence_full(&circle(20), 1).unwrap();
    let mut spans: Vec<f64> = diag.degree(1).map(|p| p.lifespan()).collect();
    spans.sort_by(|a, b| b.total_cmp(a));
    assert!(!spans.is_empty());
    assert!(spans.len() == 1 || spans[0] >= 5.0 * spans[1], "{spans:?}");
}

#[test]
fn square_matches_oracle() {
    let s2 = 2f64.sqrt();
    let d = DistanceMatrix::from_rows(vec![
        vec![0.0, 1.0, s2, 1.0],
        vec![1.0, 0.0, 1.0, s2],
        vec![s2, 1.0, 0.0, 1.0],
        vec![1.0, s2, 1.0, 0.0],
    ]);
    let fast = flatten(&rips_persistence_full(&d, 1).unwrap());
    assert_eq!(fast, naive_rips(&d, s2));
    assert!(fast.contains(&(1, 1.0, s2)));
    assert!((max_lifespan(&rips_persistence_full(&d, 1).unwrap(), 1).unwrap() - (s2 - 1.0)).abs() < 1e-15);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn matches_naive_reduction(n in 3usize..=7, values in prop::collection::vec(0u8..6, 21), frac in 0.3f64..1.0) {
        let d = matrix(n, &values);
        let full = d.max_value();
        prop_assert_eq!(flatten(&rips_persistence(&d, 1, full).unwrap()), naive_rips(&d, full));
        let partial = full * frac;
        prop_assert_eq!(flatten(&rips_persistence(&d, 1, partial).unwrap()), naive_rips(&d, partial));
    }

    #[test]
    fn duplicate_points_match_naive(n in 3usize..=7, values in prop::collection::vec(0u8..3, 21)) {
        let mut k = 0;
        let d = DistanceMatrix::from_fn(n, |_, _| { k += 1; values[k - 1] as f64 });
        prop_assert_eq!(flatten(&rips_persistence(&d, 1, 2.0).unwrap()), naive_rips(&d, 2.0));
    }

    #[test]
    fn continuous_values_match_naive(n in 3usize..=7, values in prop::collection::vec(0.01f64..1.0, 21)) {
        let mut k = 0;
        let d = DistanceMatrix::from_fn(n, |_, _| { k += 1; values[k - 1] });
        prop_assert_eq!(flatten(&rips_persistence_full(&d, 1).unwrap()), naive_rips(&d, d.max_value()));
    }

    #[test]
    fn h0_is_mst(n in 2usize..=12, values in prop::collection::vec(0.01f64..1.0, 66)) {
        let mut k = 0;
        let d = DistanceMatrix::from_fn(n, |_, _| { k += 1; values[k - 1] });
        let diag = rips_persistence_full(&d, 0).unwrap();
        prop_assert_eq!(diag.degree(0).count(), n);
        let deaths: Vec<f64> = diag.degree(0).filter(|p| p.is_finite()).map(|p| p.death).collect();
        prop_assert_eq!(deaths, prim_weights(&d));
    }

    #[test]
    fn small_perturbation_is_stable(n in 3usize..=7, values in prop::collection::vec(0.1f64..1.0, 21), noise in prop::collection::vec(-0.01f64..0.01, 21)) {
        let mut k = 0;
        let d = DistanceMatrix::from_fn(n, |_, _| { k += 1; values[k - 1] });
        let mut k = 0;
        let e = DistanceMatrix::from_fn(n, |_, _| { k += 1; values[k - 1] + noise[k - 1] });
        // bottleneck distance ≤ ε; with few points the H0 deaths pair up by rank
        let a: Vec<f64> = rips_persistence(&d, 0, 2.0).unwrap().degree(0).filter(|p| p.is_finite()).map(|p| p.death).collect();
        let b: Vec<f64> = rips_persistence(&e, 0, 2.0).unwrap().degree(0).filter(|p| p.is_finite()).map(|p| p.death).collect();
        prop_assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(&b) {
            prop_assert!((x - y).abs() <= 0.01 + 1e-12);
        }
    }
}
