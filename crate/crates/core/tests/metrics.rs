mod common;

use approx::assert_abs_diff_eq;
use proptest::prelude::*;
use rand::Rng;

use common::{
    betweenness_oracle, pagerank_oracle, pagerank_power_oracle, random_connected_graph, random_graph, rng,
};
use tasknet::metrics::{
    clustering_coefficient, edge_betweenness, pagerank, weighted_degree, EdgeLength, PageRankOptions,
};
use tasknet::netbuild::Network;

#[test]
fn pagerank_matches_linear_solve() {
    let mut r = rng(1);
    for _ in 0..100 {
        let n = r.random_range(2..=30);
        let density = r.random_range(0.05..0.6);
        let net = random_graph(n, density, &mut r);
        let pr = pagerank(&net, &PageRankOptions::default()).unwrap();
        let oracle = pagerank_oracle(&net, 0.85);
        for (a, b) in pr.iter().zip(&oracle) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-8);
        }
    }
}

#[test]
fn pagerank_matches_power_oracle() {
    let mut r = rng(2);
    for _ in 0..10 {
        let net = random_graph(12, 0.3, &mut r);
        let pr = pagerank(&net, &PageRankOptions::default()).unwrap();
        for (a, b) in pr.iter().zip(pagerank_power_oracle(&net, 0.85, 500)) {
            assert_abs_diff_eq!(*a, b, epsilon = 1e-8);
        }
    }
}

#[test]
fn betweenness_matches_path_enumeration() {
    let mut r = rng(3);
    for n in 2..=7 {
        for trial in 0..12 {
            let integer = trial % 2 == 0;
            let net = random_connected_graph(n, 0.35, integer, &mut r);
            for (length, f) in [
                (EdgeLength::Inverse, (|w: f64| 1.0 / w) as fn(f64) -> f64),
                (EdgeLength::InverseLog, |w: f64| 1.0 / w.ln_1p()),
            ] {
                let got = edge_betweenness(&net, length);
                let want = betweenness_oracle(&net, f);
                for (a, b) in got.iter().zip(&want) {
                    assert_abs_diff_eq!(a, b, epsilon = 1e-10);
                }
            }
        }
    }
}

#[test]
fn betweenness_on_disconnected_graph() {
    let net = Network::from_edges(5, &[(0, 1, 1.0), (2, 3, 2.0), (3, 4, 2.0)]).unwrap();
    let got = edge_betweenness(&net, EdgeLength::Inverse);
    let want = betweenness_oracle(&net, |w| 1.0 / w);
    for (a, b) in got.iter().zip(&want) {
        assert_abs_diff_eq!(a, b, epsilon = 1e-12);
    }
}

fn arb_network() -> impl Strategy<Value = Network<f64>> {
    (3usize..9).prop_flat_map(|n| {
        proptest::collection::vec(prop_oneof![Just(0.0), 0.5f64..5.0], n * (n - 1) / 2).prop_map(move |w| {
            let mut net = Network::empty(n);
            let mut k = 0;
            for i in 0..n {
                for j in i + 1..n {
                    net.set_weight(i, j, w[k]);
                    k += 1;
                }
            }
            net
        })
    })
}

proptest! {
    #[test]
    fn pagerank_is_a_positive_distribution(net in arb_network()) {
        let pr = pagerank(&net, &PageRankOptions::default()).unwrap();
        prop_assert!((pr.iter().sum::<f64>() - 1.0).abs() < 1e-10);
        prop_assert!(pr.iter().all(|&x| x > 0.0));
    }

    #[test]
    fn measures_are_scale_invariant(net in arb_network(), c in 0.1f64..20.0) {
        let big = net.scaled(c);
        for (a, b) in clustering_coefficient(&net).iter().zip(clustering_coefficient(&big)) {
            prop_assert!((a - b).abs() < 1e-12);
        }
        for (a, b) in pagerank(&net, &PageRankOptions::default()).unwrap().iter()
            .zip(pagerank(&big, &PageRankOptions::default()).unwrap()) {
            prop_assert!((a - b).abs() < 1e-9);
        }
        let (ea, eb) = (edge_betweenness(&net, EdgeLength::Inverse), edge_betweenness(&big, EdgeLength::Inverse));
        for (a, b) in ea.iter().zip(&eb) {
            prop_assert!((a - b).abs() < 1e-9);
        }
        for (a, b) in weighted_degree(&net).iter().zip(weighted_degree(&big)) {
            prop_assert!((a * c - b).abs() < 1e-9);
        }
    }

    #[test]
    fn clustering_is_bounded(net in arb_network()) {
        for c in clustering_coefficient(&net) {
            prop_assert!((0.0..=1.0 + 1e-12).contains(&c));
        }
    }

    #[test]
    fn node_relabeling_permutes_measures(net in arb_network(), seed in any::<u64>()) {
        let n = net.n();
        let mut r = rng(seed);
        let mut perm: Vec<usize> = (0..n).collect();
        for i in (1..n).rev() {
            perm.swap(i, r.random_range(0..=i));
        }
        let moved = net.permuted(&perm).unwrap();
        let (a, b) = (
            pagerank(&net, &PageRankOptions::default()).unwrap(),
            pagerank(&moved, &PageRankOptions::default()).unwrap(),
        );
        for i in 0..n {
            prop_assert!((a[i] - b[perm[i]]).abs() < 1e-10);
        }
    }
}
