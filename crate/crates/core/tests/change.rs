mod common;

use std::collections::BTreeSet;

use approx::assert_abs_diff_eq;
use proptest::prelude::*;
use rand::Rng;

use common::{eigenvalues_oracle, emi_oracle, random_graph, rng};
use tasknet::change::{
    ami, ari, bootstrap_stability, change_series, dist_to_sim, expected_mutual_information, laplacian,
    overlap_index, sim_to_dist, spectral_distance, spectrum, symmetric_kl, BootstrapOptions, ChangeOptions,
    Distribution, Level, SpectralMatrix,
};
use tasknet::community::{louvain, modularity, LouvainOptions, Partition};
use tasknet::netbuild::Network;
use tasknet::synth::{generate_network, sample_tag_sets, BlockModel, PlantedModel};

#[test]
fn emi_matches_permutation_average() {
    let fixtures: [(&[usize], &[usize]); 4] = [
        (&[0, 0, 1, 1, 2, 2, 2], &[0, 1, 1, 0, 0, 1, 1]),
        (&[0, 0, 0, 1, 1, 2, 3, 3], &[0, 0, 1, 1, 1, 1, 2, 2]),
        (&[0, 1, 2, 3, 4, 5], &[0, 0, 0, 1, 1, 1]),
        (&[0, 0, 0, 0, 1], &[0, 1, 0, 1, 0]),
    ];
    for (a, b) in fixtures {
        let (pa, pb) = (Partition::new(a.to_vec()), Partition::new(b.to_vec()));
        let got: f64 = expected_mutual_information(&pa.sizes(), &pb.sizes()).unwrap();
        assert_abs_diff_eq!(got, emi_oracle(a, b), epsilon = 1e-10);
    }
}

#[test]
fn chance_corrected_indices_average_zero() {
    let mut r = rng(20);
    let (mut sa, mut sm) = (0.0, 0.0);
    let trials = 1000;
    for _ in 0..trials {
        let a: Vec<usize> = (0..27).map(|_| r.random_range(0..3)).collect();
        let b: Vec<usize> = (0..27).map(|_| r.random_range(0..3)).collect();
        let (pa, pb) = (Partition::new(a), Partition::new(b));
        sa += ari::<f64>(&pa, &pb).unwrap();
        sm += ami::<f64>(&pa, &pb).unwrap();
    }
    assert!((sa / trials as f64).abs() <= 0.05);
    assert!((sm / trials as f64).abs() <= 0.05);
}

#[test]
fn spectra_match_dense_oracle() {
    let mut r = rng(21);
    for _ in 0..20 {
        let net = random_graph(r.random_range(2..15), 0.4, &mut r);
        let n = net.n();
        let adj = spectrum(&net, SpectralMatrix::Adjacency).unwrap();
        for (a, b) in adj.iter().zip(eigenvalues_oracle(n, net.adjacency())) {
            assert_abs_diff_eq!(*a, b, epsilon = 1e-9);
        }
        let lap = laplacian(&net);
        for (a, b) in spectrum(&net, SpectralMatrix::Laplacian)
            .unwrap()
            .iter()
            .zip(eigenvalues_oracle(n, lap.as_slice()))
        {
            assert_abs_diff_eq!(*a, b, epsilon = 1e-9);
        }
    }
}

#[test]
fn same_model_closer_than_different_model() {
    let a = PlantedModel::new(BlockModel::equal(27, 3, 0.8, 0.05));
    // Unequal blocks so that node importance differs as well.
    let blocks = (0..27)
        .map(|i| {
            if i < 15 {
                0
            } else if i < 23 {
                1
            } else {
                2
            }
        })
        .collect();
    let b = PlantedModel::new(BlockModel {
        blocks,
        p_in: 0.8,
        p_out: 0.05,
    });
    let (a0, a1) = (
        generate_network::<f64>(&a, 0, 1).unwrap(),
        generate_network::<f64>(&a, 0, 2).unwrap(),
    );
    let b0 = generate_network::<f64>(&b, 0, 3).unwrap();
    let same = change_series(&[(0, &a0), (1, &a1)], &ChangeOptions::default()).unwrap();
    let diff = change_series(&[(0, &a0), (1, &b0)], &ChangeOptions::default()).unwrap();
    for (s, d) in same.distances.iter().zip(&diff.distances) {
        if s.period == 1 {
            assert!(
                s.value < d.value,
                "{} {}: {} vs {}",
                s.level,
                s.metric,
                s.value,
                d.value
            );
        }
    }
}

#[test]
fn drift_raises_spectral_distance() {
    let mut m = PlantedModel::new(BlockModel::equal(27, 3, 0.8, 0.05));
    m.periods = 5;
    m.entries_per_period = 4000;
    m.drift_schedule = vec![0.0, 0.25, 0.5, 0.75, 1.0];
    m.drift_target = Some(BlockModel::equal(27, 9, 0.8, 0.05));
    let nets: Vec<Network<f64>> = (0..5).map(|p| generate_network(&m, p, 7).unwrap()).collect();
    let periods: Vec<(usize, &Network<f64>)> = nets.iter().enumerate().collect();
    let s = change_series(&periods, &ChangeOptions::default()).unwrap();
    for metric in ["adjacency_spectral", "laplacian_spectral"] {
        let vals: Vec<f64> = (0..5).map(|p| s.value(p, metric).unwrap()).collect();
        for w in vals.windows(2) {
            assert!(w[0] <= w[1], "{metric}: {vals:?}");
        }
    }
    let replicate = generate_network::<f64>(&m, 0, 8).unwrap();
    let noise = spectral_distance(&nets[0], &replicate, SpectralMatrix::Adjacency).unwrap();
    let far = spectral_distance(&nets[0], &nets[4], SpectralMatrix::Adjacency).unwrap();
    assert!(far > noise);
}

#[test]
fn series_forms_are_consistent() {
    let m = PlantedModel::new(BlockModel::equal(27, 3, 0.8, 0.05));
    let nets: Vec<Network<f64>> = (0..3).map(|s| generate_network(&m, 0, s).unwrap()).collect();
    let periods: Vec<(usize, &Network<f64>)> = nets.iter().enumerate().collect();
    let s = change_series(&periods, &ChangeOptions::default()).unwrap();
    assert_eq!(s.reference, 0);
    assert_eq!(s.distances.len(), 3 * 8);
    for (d, sim) in s.distances.iter().zip(&s.similarities) {
        assert_abs_diff_eq!(dist_to_sim(d.value).unwrap(), sim.value, epsilon = 1e-15);
        if d.period == 0 {
            assert_abs_diff_eq!(d.value, 0.0, epsilon = 1e-6);
        }
    }
    let levels: BTreeSet<Level> = s.distances.iter().map(|r| r.level).collect();
    assert_eq!(levels.len(), 4);
    let mut csv = Vec::new();
    s.write_csv(&mut csv).unwrap();
    let text = String::from_utf8(csv).unwrap();
    assert!(text.starts_with("period,level,metric,value\n0,node,relative_entropy,0\n"));
}

#[test]
fn bootstrap_interval_shrinks_with_more_entries() {
    let mut m = PlantedModel::new(BlockModel::equal(27, 3, 0.8, 0.05));
    let labels: Vec<String> = (0..27).map(|i| format!("p{i}")).collect();
    let stat = |net: &Network<f64>| modularity(net, &louvain(net, &LouvainOptions::default()));
    let opts = BootstrapOptions {
        n_resamples: 100,
        seed: 3,
        ..Default::default()
    };
    m.entries_per_period = 500;
    let small = bootstrap_stability(&sample_tag_sets(&m, 0, 1).unwrap(), &labels, stat, &opts).unwrap();
    m.entries_per_period = 2000;
    let large = bootstrap_stability(&sample_tag_sets(&m, 0, 1).unwrap(), &labels, stat, &opts).unwrap();
    let ratio = (large.p97_5 - large.p2_5) / (small.p97_5 - small.p2_5);
    assert!(ratio > 0.3 && ratio < 0.75, "width ratio {ratio}");
    let again = bootstrap_stability(&sample_tag_sets(&m, 0, 1).unwrap(), &labels, stat, &opts).unwrap();
    assert_eq!(again, large);
}

fn arb_dist(n: usize) -> impl Strategy<Value = Distribution<f64>> {
    proptest::collection::vec(0.0f64..1.0, n)
        .prop_filter_map("zero mass", |w| Distribution::from_weights(w).ok())
}

proptest! {
    #[test]
    fn kl_symmetric_non_negative(p in arb_dist(6), q in arb_dist(6)) {
        let a = symmetric_kl(&p, &q, 1e-12).unwrap();
        let b = symmetric_kl(&q, &p, 1e-12).unwrap();
        prop_assert!(a >= 0.0);
        prop_assert!((a - b).abs() <= 1e-12 * a.max(1.0));
        prop_assert_eq!(symmetric_kl(&p, &p, 1e-12).unwrap(), 0.0);
    }

    #[test]
    fn overlap_identity(p in arb_dist(8), q in arb_dist(8)) {
        let oi = overlap_index(&p, &q).unwrap();
        let half_l1: f64 = p.values().iter().zip(q.values()).map(|(a, b)| (a - b).abs()).sum::<f64>() / 2.0;
        prop_assert!((oi + half_l1 - 1.0).abs() < 1e-12);
        prop_assert!((oi - overlap_index(&q, &p).unwrap()).abs() < 1e-15);
    }

    #[test]
    fn kernel_round_trip(s in 1e-6f64..=1.0) {
        prop_assert!((dist_to_sim(sim_to_dist(s).unwrap()).unwrap() - s).abs() <= 1e-12);
    }

    #[test]
    fn indices_ignore_relabeling(a in proptest::collection::vec(0usize..4, 2..20), shift in 1usize..7) {
        let b: Vec<usize> = a.iter().map(|x| (x * 3 + shift) % 11).collect();
        let (pa, pb) = (Partition::new(a.clone()), Partition::new(b));
        let other = Partition::new(a.iter().rev().copied().collect());
        prop_assert!((ari::<f64>(&pa, &other).unwrap() - ari::<f64>(&pb, &other).unwrap()).abs() < 1e-12);
        prop_assert!((ami::<f64>(&pa, &other).unwrap() - ami::<f64>(&pb, &other).unwrap()).abs() < 1e-12);
        prop_assert!((ari::<f64>(&pa, &pb).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn spectral_distance_metric_properties(seed in any::<u64>()) {
        let mut r = rng(seed);
        let nets: Vec<Network<f64>> = (0..3).map(|_| random_graph(6, 0.5, &mut r)).collect();
        for m in [SpectralMatrix::Adjacency, SpectralMatrix::Laplacian] {
            let d = |i: usize, j: usize| spectral_distance(&nets[i], &nets[j], m).unwrap();
            prop_assert!((d(0, 1) - d(1, 0)).abs() < 1e-12);
            prop_assert!(d(0, 2) <= d(0, 1) + d(1, 2) + 1e-12);
            let moved = nets[0].permuted(&[5, 4, 3, 2, 1, 0]).unwrap();
            prop_assert!(spectral_distance(&nets[0], &moved, m).unwrap() < 1e-9);
        }
    }
}
