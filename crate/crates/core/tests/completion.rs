use lacuna_core::chem::parse_smiles;
use lacuna_core::completion::*;
use lacuna_core::dataset::ONIUM_CORPUS;
use lacuna_core::fingerprint::{dice_distance, BitFingerprint, FingerprintParams};
use lacuna_core::fixture::{FixtureConfig, SquareLacuna};
use lacuna_core::mapper::{MapperGraph, MapperNode};
use proptest::prelude::*;

fn node(id: usize, interval: usize, members: Vec<usize>) -> MapperNode {
    MapperNode {
        id,
        interval_index: interval,
        cluster_index: 0,
        members,
        mean_lens: 0.0,
    }
}

fn lacuna(seed: u64) -> SquareLacuna {
    SquareLacuna::build(&FixtureConfig {
        seed,
        ..Default::default()
    })
    .unwrap()
}

/// A corpus cation inside the target interval and farther than the downsample
/// range from every withheld record.
fn distant_in_interval(l: &SquareLacuna, planted: &[BitFingerprint]) -> BitFingerprint {
    let params = FingerprintParams::default();
    ONIUM_CORPUS
        .lines()
        .map(|s| params.fingerprint(&parse_smiles(s).unwrap()).unwrap())
        .find(|fp| {
            l.interval.contains(l.forest.score(fp).unwrap().0)
                && planted.iter().all(|p| dice_distance(p, fp).unwrap() > 0.6)
        })
        .expect("corpus has a distant cation in the interval")
}

#[test]
fn dense_duplicates_collapse_the_square() {
    for seed in 0..5 {
        let l = lacuna(seed);
        let ctx = l.context();
        let planted: Vec<BitFingerprint> = l
            .spec
            .removed
            .iter()
            .map(|&i| l.dataset.records[i].fingerprint.clone())
            .collect();
        let both = ctx.evaluate("planted", &planted).unwrap();
        assert_eq!(both.restored, l.spec.target_edges, "seed {seed}");

        let mut skewed = planted.clone();
        skewed.extend(std::iter::repeat_n(distant_in_interval(&l, &planted), 100));
        let rows = ctx
            .evaluate_variants(&skewed, &[DownsampleRule::MaxNeighbors(50)], (0.0, 0.6))
            .unwrap();
        assert_eq!(rows[0].restored.len(), 1, "seed {seed}: {:?}", rows[0]);
        assert_eq!(rows[1].added, planted.len());
        assert_eq!(rows[1].restored, l.spec.target_edges, "seed {seed}: {:?}", rows[1]);
    }
}

#[test]
fn nothing_added_restores_nothing() {
    for seed in 0..3 {
        let l = lacuna(seed);
        let row = l.context().evaluate("empty", &[]).unwrap();
        assert!(row.restored.is_empty());
        assert_eq!(row.restored, l.post_surgery.restored);
    }
}

#[test]
fn removed_records_are_the_edge_intersections() {
    let l = lacuna(0);
    let [u1, u2, v1, v2] = l.square;
    let mut expected = Vec::new();
    for (a, b) in [(u1, v2), (u2, v1)] {
        let mb = &l.graph.nodes[b].members;
        expected.extend(l.graph.nodes[a].members.iter().filter(|m| mb.contains(m)));
    }
    expected.sort_unstable();
    expected.dedup();
    assert_eq!(l.spec.removed, expected);
    assert_eq!(l.spec.removed_ids.len(), l.spec.removed.len());
    assert_eq!(l.kept.len() + l.spec.removed.len(), l.dataset.len());
}

#[test]
fn square_finder_on_a_ladder() {
    // two chains over three intervals: 0-2-4 and 1-3-5
    let g = MapperGraph::from_nodes(vec![
        node(0, 0, vec![0, 1]),
        node(1, 0, vec![10, 11]),
        node(2, 1, vec![1, 2]),
        node(3, 1, vec![11, 12]),
        node(4, 2, vec![2, 3]),
        node(5, 2, vec![12, 13]),
    ]);
    assert_eq!(square_lacunae(&g), vec![[2, 3, 5, 4], [0, 1, 3, 2]]);
    let crossed = MapperGraph::from_nodes(vec![
        node(0, 0, vec![0, 1]),
        node(1, 0, vec![2]),
        node(2, 1, vec![1, 2]),
    ]);
    assert!(square_lacunae(&crossed).is_empty());
}

#[test]
fn quantile_thresholds() {
    let counts = [5, 1, 3, 9, 7];
    assert_eq!(DownsampleRule::Quantile(1.0).threshold(&counts), 9);
    assert_eq!(DownsampleRule::Quantile(0.5).threshold(&counts), 5);
    assert_eq!(DownsampleRule::Quantile(0.0).threshold(&counts), 1);
    assert_eq!(DownsampleRule::Quantile(0.6).threshold(&[]), 0);
    assert_eq!(DownsampleRule::MaxNeighbors(300).threshold(&counts), 300);
    assert_eq!(DownsampleRule::MaxNeighbors(300).label(), "max-300");
}

fn fingerprints() -> impl Strategy<Value = Vec<BitFingerprint>> {
    prop::collection::vec(prop::collection::btree_set(0usize..32, 1..8), 0..30)
        .prop_map(|sets| sets.into_iter().map(|s| BitFingerprint::from_bits(32, s)).collect())
}

proptest! {
    #[test]
    fn filter_is_sound(scores in prop::collection::vec(0.0f64..1.0, 0..50), lo in 0.0f64..0.5, w in 0.01f64..0.5) {
        let iv = ScoreInterval { lo, hi: lo + w };
        let kept = filter_scores(&scores, &iv);
        for (i, &s) in scores.iter().enumerate() {
            prop_assert_eq!(kept.contains(&i), lo < s && s < lo + w);
        }
    }

    #[test]
    fn downsample_is_idempotent(fps in fingerprints(), max in 0usize..10) {
        let kept = downsample_by_neighbors(&fps, max, (0.0, 0.6));
        let sub: Vec<BitFingerprint> = kept.iter().map(|&i| fps[i].clone()).collect();
        if neighbor_counts(&sub, (0.0, 0.6)).iter().all(|&c| c <= max) {
            prop_assert_eq!(downsample_by_neighbors(&sub, max, (0.0, 0.6)).len(), sub.len());
        }
        let counts = neighbor_counts(&fps, (0.0, 0.6));
        for (i, &c) in counts.iter().enumerate() {
            prop_assert_eq!(kept.contains(&i), c <= max);
        }
    }

    #[test]
    fn restored_edges_are_targets(mut members in prop::collection::vec(prop::collection::btree_set(0usize..20, 1..10), 4)) {
        // clusters within one interval are disjoint
        for i in [1, 3] {
            let sibling = members[i - 1].clone();
            members[i].retain(|m| !sibling.contains(m));
        }
        prop_assume!(members.iter().all(|m| !m.is_empty()));
        let nodes: Vec<MapperNode> = members
            .iter()
            .enumerate()
            .map(|(i, m)| node(i, i / 2, m.iter().copied().collect()))
            .collect();
        let g = MapperGraph::from_nodes(nodes);
        let smiles: Vec<String> = (1..=20).map(|n| "C".repeat(n)).collect();
        let d = lacuna_core::dataset::Dataset::from_smiles(&smiles, FingerprintParams::default()).unwrap();
        let edges: Vec<(usize, usize)> = g.edges.iter().map(|e| (e.u, e.v)).collect();
        let (reduced, kept, spec) = remove_edge_intersections(&g, &d, &edges).unwrap();
        prop_assert_eq!(reduced.len() + spec.removed.len(), d.len());
        prop_assert_eq!(kept.len(), reduced.len());
        let origin: Vec<Option<usize>> = (0..d.len()).map(Some).collect();
        let r = check_restoration(&g, &g, &origin, &spec);
        prop_assert_eq!(&r.restored, &spec.target_edges);
    }
}
