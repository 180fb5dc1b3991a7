use lacuna_core::fingerprint::BitFingerprint;
use lacuna_core::mapper::{build_cover, build_mapper, detect_features, MapperGraph, SpectralParams};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Uniform};

fn noisy_circle(seed: u64) -> Vec<[f64; 2]> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, 0.05).unwrap();
    let angle = Uniform::new(0.0, std::f64::consts::TAU).unwrap();
    (0..200)
        .map(|_| {
            let t: f64 = angle.sample(&mut rng);
            let r = 1.0 + noise.sample(&mut rng);
            [r * t.cos(), r * t.sin()]
        })
        .collect()
}

fn circle_graph(seed: u64, params: &SpectralParams) -> MapperGraph {
    let pts = noisy_circle(seed);
    let lens: Vec<f64> = pts.iter().map(|p| p[0]).collect();
    let cover = build_cover(&lens, 8, 0.5).unwrap();
    build_mapper(pts.as_slice(), &lens, &cover, params).unwrap()
}

#[test]
fn noisy_circle_has_one_loop() {
    let hits = (0..20)
        .filter(|&seed| {
            let params = SpectralParams {
                seed,
                ..Default::default()
            };
            let f = detect_features(&circle_graph(seed, &params), 2);
            f.loops == 1 && f.component_count() == 1
        })
        .count();
    assert!(hits >= 18, "{hits}/20");
}

#[test]
fn forced_split_severs_the_circle() {
    let params = SpectralParams {
        min_gap_ratio: 0.0,
        ..Default::default()
    };
    let f = detect_features(&circle_graph(0, &params), 2);
    assert_eq!(f.loops, 0);
    assert_eq!(f.component_count(), 2);
}

#[test]
fn deterministic_serialization() {
    let params = SpectralParams {
        seed: 4,
        ..Default::default()
    };
    let ids: Vec<String> = (0..200).map(|i| i.to_string()).collect();
    let a = circle_graph(3, &params).to_text(&ids);
    let b = circle_graph(3, &params).to_text(&ids);
    assert_eq!(a, b);
    assert_eq!(circle_graph(3, &params).to_dot(), circle_graph(3, &params).to_dot());
}

fn random_fingerprints(seed: u64, n: usize) -> (Vec<BitFingerprint>, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let bit = Uniform::new(0usize, 64).unwrap();
    let unit = Uniform::new(0.0, 1.0).unwrap();
    let fps = (0..n)
        .map(|_| BitFingerprint::from_bits(64, (0..8).map(|_| bit.sample(&mut rng))))
        .collect();
    let lens = (0..n).map(|_| unit.sample(&mut rng)).collect();
    (fps, lens)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn nerve_and_coverage(seed in 0u64..1000, n in 5usize..60, intervals in 1usize..8, overlap in 0.0f64..0.6) {
        let (fps, lens) = random_fingerprints(seed, n);
        let cover = build_cover(&lens, intervals, overlap).unwrap();
        let g = build_mapper(fps.as_slice(), &lens, &cover, &SpectralParams { gamma: 0.1, seed, ..Default::default() }).unwrap();
        for a in 0..g.nodes.len() {
            prop_assert!(!g.nodes[a].members.is_empty());
            for &m in &g.nodes[a].members {
                prop_assert!(cover.contains(g.nodes[a].interval_index, lens[m]));
            }
            for b in (a + 1)..g.nodes.len() {
                let shared = g.nodes[a].members.iter().filter(|m| g.nodes[b].members.contains(m)).count();
                prop_assert_eq!(shared > 0, g.has_edge(a, b));
                if shared > 0 {
                    let e = g.edges.iter().find(|e| e.u == a && e.v == b).unwrap();
                    prop_assert_eq!(e.intersection, shared);
                }
            }
        }
        for r in 0..n {
            prop_assert!(!g.nodes_of(r).is_empty());
        }
        let f = detect_features(&g, 2);
        prop_assert_eq!(f.loops + g.nodes.len(), g.edges.len() + f.component_count());
    }
}
