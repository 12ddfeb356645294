use ndarray::{Array2, Array3};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use spectemp::graph::Adjacency;
use spectemp::model::{embed, AdjacencyMode, ModelConfig, ModelState, Variant};
use spectemp::temporal::WeightSharing;
use spectemp::twl::{
    check_spectral_conditions, distinguishable, fixtures, init_colors, parse_dtdg, refine, refine_to_fixpoint,
    wl_test, write_dtdg, ColoringState, Dtdg, Verdict,
};

/// Partition of the nodes of snapshot `t` as a same-color relation matrix.
fn same_color(s: &ColoringState, t: usize) -> Vec<Vec<bool>> {
    let row = &s.colors[t];
    row.iter().map(|a| row.iter().map(|b| a == b).collect()).collect()
}

#[test]
fn failing_example_merges_triangle_and_square_nodes() {
    let g = fixtures::failing_example();
    let s = refine_to_fixpoint(&g, 7 * 2);
    // A (triangle) and C (square) are not isomorphic yet share a color.
    assert_eq!(s.colors[1][0], s.colors[1][2]);
    assert_eq!(s.distinct(1), 1);
    assert!(!distinguishable(&g, 0, 2, 1, 14).unwrap());
}

#[test]
fn separating_example_splits_every_pair() {
    let g = fixtures::separating_example();
    for u in 0..4 {
        for v in 0..4 {
            assert_eq!(distinguishable(&g, u, v, 1, 8).unwrap(), u != v, "pair ({u},{v})");
        }
    }
}

#[test]
fn fixtures_are_told_apart_by_the_paired_test() {
    // Pad the smaller example to the same size with isolated nodes.
    let right = fixtures::separating_example();
    let snaps: Vec<Vec<(usize, usize)>> = right.snapshots().iter().map(|s| s.edges().to_vec()).collect();
    let right7 = Dtdg::from_edges(7, snaps).unwrap();
    let out = wl_test(&fixtures::failing_example(), &right7, None).unwrap();
    assert_eq!(out.verdict, Verdict::NonIsomorphic);
    assert_eq!(out.separating_step, Some(1));
}

#[test]
fn fixtures_roundtrip_through_text() {
    for g in [fixtures::failing_example(), fixtures::separating_example()] {
        let mut buf = Vec::new();
        write_dtdg(&mut buf, &g).unwrap();
        assert_eq!(parse_dtdg(std::str::from_utf8(&buf).unwrap()).unwrap(), g);
    }
}

#[test]
fn random_features_on_a_path_have_no_missing_components() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let n = 6;
    let path: Vec<(usize, usize)> = (0..n - 1).map(|i| (i, i + 1)).collect();
    let mut clean = 0;
    for _ in 0..200 {
        let x = Array2::from_shape_fn((n, 1), |_| StandardNormal.sample(&mut rng));
        let g = Dtdg::new(n, vec![(path.clone(), x)]).unwrap();
        let r = check_spectral_conditions(&g, 1e-8).unwrap();
        assert!(!r.repeated_eigenvalues);
        if r.satisfied() {
            clean += 1;
        }
    }
    assert_eq!(clean, 200);
}

#[test]
fn wl_equal_symmetric_nodes_get_equal_embeddings() {
    // Path 0-1-2-3-4 has the reflection v -> 4 - v. With features symmetric
    // under it, nodes 0 and 4 are WL-equal and a model whose weights do not
    // depend on node identity must embed them identically.
    let n = 5;
    let lookback = 16;
    let edges: Vec<(usize, usize)> = (0..n - 1).map(|i| (i, i + 1)).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut x = Array3::<f64>::zeros((n, lookback, 1));
    for v in 0..=n / 2 {
        for t in 0..lookback {
            let val: f64 = StandardNormal.sample(&mut rng);
            x[[v, t, 0]] = val;
            x[[n - 1 - v, t, 0]] = val;
        }
    }
    let snaps = (0..lookback).map(|t| (edges.clone(), x.slice(ndarray::s![.., t, ..]).to_owned())).collect();
    let g = Dtdg::new(n, snaps).unwrap();
    let degree = 3;
    assert!(!distinguishable(&g, 0, 4, lookback - 1, degree + 1).unwrap());
    assert!(distinguishable(&g, 0, 2, lookback - 1, degree + 1).unwrap());

    let config = ModelConfig {
        variant: Variant::Linear,
        adjacency: AdjacencyMode::Provided,
        lookback,
        degree,
        modes: 6,
        blocks: 2,
        coarse_sharing: WeightSharing::SharedVariables,
        fine_sharing: WeightSharing::SharedVariables,
        init_noise: 0.5,
        ..ModelConfig::default()
    };
    let adj = Adjacency::from_edges(n, &edges).unwrap();
    let state = ModelState::init(&config, n, Some(&adj), &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
    let z = embed(&state, &x).unwrap();
    let (a, b) = (z.slice(ndarray::s![0, .., ..]), z.slice(ndarray::s![4, .., ..]));
    let gap = (&a - &b).iter().fold(0.0f64, |m, v| m.max(v.abs()));
    assert!(gap < 1e-8, "symmetric nodes differ by {gap}");
    let other = (&a - &z.slice(ndarray::s![2, .., ..])).iter().fold(0.0f64, |m, v| m.max(v.abs()));
    assert!(other > 1e-6);
}

fn arb_dtdg() -> impl Strategy<Value = Dtdg> {
    (1usize..=8, 1usize..=4).prop_flat_map(|(n, t)| {
        let pairs: Vec<(usize, usize)> = (0..n).flat_map(|u| ((u + 1)..n).map(move |v| (u, v))).collect();
        let m = pairs.len();
        (
            prop::collection::vec(prop::collection::vec(any::<bool>(), m), t),
            prop::collection::vec(prop::collection::vec(0u8..3, n), t),
            any::<bool>(),
        )
            .prop_map(move |(masks, feats, featured)| {
                let snaps = masks
                    .iter()
                    .zip(&feats)
                    .map(|(mask, f)| {
                        let edges = pairs.iter().zip(mask).filter(|(_, &k)| k).map(|(&e, _)| e).collect();
                        let x = if featured {
                            Array2::from_shape_fn((n, 1), |(v, _)| f[v] as f64)
                        } else {
                            Array2::zeros((n, 0))
                        };
                        (edges, x)
                    })
                    .collect();
                Dtdg::new(n, snaps).unwrap()
            })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn refinement_never_coarsens(g in arb_dtdg()) {
        let mut state = init_colors(&g);
        for _ in 0..g.nodes() * g.steps() {
            let next = refine(&g, &state);
            for t in 0..g.steps() {
                let (before, after) = (same_color(&state, t), same_color(&next, t));
                for u in 0..g.nodes() {
                    for v in 0..g.nodes() {
                        // Same color after implies same color before.
                        prop_assert!(!after[u][v] || before[u][v]);
                    }
                }
            }
            state = next;
        }
    }

    #[test]
    fn partition_stabilizes_within_cap(g in arb_dtdg()) {
        let cap = g.nodes() * g.steps();
        let mut state = init_colors(&g);
        for _ in 0..cap {
            state = refine(&g, &state);
        }
        let next = refine(&g, &state);
        prop_assert_eq!(next.classes, state.classes);
    }

    #[test]
    fn relabelled_graphs_are_never_separated(g in arb_dtdg(), seed in any::<u64>()) {
        use rand::seq::SliceRandom;
        let mut perm: Vec<usize> = (0..g.nodes()).collect();
        perm.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let h = g.permute(&perm).unwrap();
        let out = wl_test(&g, &h, None).unwrap();
        prop_assert_eq!(out.verdict, Verdict::Inconclusive);
    }
}
