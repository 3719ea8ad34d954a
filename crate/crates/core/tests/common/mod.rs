//! Independent reference implementations used to check the library.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use tasknet::netbuild::{EdgeIndex, Network};

/// Random weighted graph; each pair is an edge with probability `density`.
pub fn random_graph(n: usize, density: f64, rng: &mut ChaCha8Rng) -> Network<f64> {
    let mut net = Network::empty(n);
    for i in 0..n {
        for j in i + 1..n {
            if rng.random::<f64>() < density {
                net.set_weight(i, j, rng.random_range(0.1..10.0));
            }
        }
    }
    net
}

/// Random connected weighted graph: a random spanning tree plus extra edges.
pub fn random_connected_graph(n: usize, extra: f64, integer: bool, rng: &mut ChaCha8Rng) -> Network<f64> {
    let weight = |rng: &mut ChaCha8Rng| {
        if integer {
            rng.random_range(1..=3) as f64
        } else {
            rng.random_range(0.1..10.0)
        }
    };
    let mut net = Network::empty(n);
    for v in 1..n {
        let u = rng.random_range(0..v);
        let w = weight(rng);
        net.set_weight(u, v, w);
    }
    for i in 0..n {
        for j in i + 1..n {
            if net.weight(i, j) == 0.0 && rng.random::<f64>() < extra {
                let w = weight(rng);
                net.set_weight(i, j, w);
            }
        }
    }
    net
}

/// Stationary vector of the Google matrix by a direct linear solve of
/// `(I − d Pᵀ) r = (1 − d)/n · 1`; nodes without edges link uniformly.
pub fn pagerank_oracle(net: &Network<f64>, d: f64) -> Vec<f64> {
    let n = net.n();
    let mut p = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        let k: f64 = (0..n).map(|j| net.weight(i, j)).sum();
        for j in 0..n {
            p[(i, j)] = if k > 0.0 {
                net.weight(i, j) / k
            } else {
                1.0 / n as f64
            };
        }
    }
    let a = DMatrix::<f64>::identity(n, n) - p.transpose() * d;
    let b = DVector::<f64>::from_element(n, (1.0 - d) / n as f64);
    let r = a.lu().solve(&b).expect("nonsingular");
    r.iter().copied().collect()
}

/// Dense power iteration on the explicit Google matrix.
pub fn pagerank_power_oracle(net: &Network<f64>, d: f64, steps: usize) -> Vec<f64> {
    let n = net.n();
    let mut g = vec![vec![0.0; n]; n];
    for i in 0..n {
        let k: f64 = (0..n).map(|j| net.weight(i, j)).sum();
        for j in 0..n {
            let pij = if k > 0.0 {
                net.weight(i, j) / k
            } else {
                1.0 / n as f64
            };
            g[i][j] = (1.0 - d) / n as f64 + d * pij;
        }
    }
    let mut r = vec![1.0 / n as f64; n];
    for _ in 0..steps {
        let mut next = vec![0.0; n];
        for i in 0..n {
            for j in 0..n {
                next[j] += r[i] * g[i][j];
            }
        }
        r = next;
    }
    r
}

/// Edge betweenness by enumerating every simple path of every ordered pair.
pub fn betweenness_oracle(net: &Network<f64>, length: impl Fn(f64) -> f64) -> Vec<f64> {
    let n = net.n();
    let index = EdgeIndex::new(n);
    let mut scores = vec![0.0; index.len()];
    let mut pairs = 0usize;
    for s in 0..n {
        for t in 0..n {
            if s == t {
                continue;
            }
            let mut paths: Vec<(f64, Vec<usize>)> = Vec::new();
            let mut stack = vec![s];
            let mut on = vec![false; n];
            on[s] = true;
            enumerate(net, t, &mut stack, &mut on, 0.0, &length, &mut paths);
            if paths.is_empty() {
                continue;
            }
            pairs += 1;
            let best = paths.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
            let shortest: Vec<&Vec<usize>> = paths
                .iter()
                .filter(|p| (p.0 - best).abs() <= 1e-9 * best.max(1.0))
                .map(|p| &p.1)
                .collect();
            let share = 1.0 / shortest.len() as f64;
            for path in shortest {
                for w in path.windows(2) {
                    scores[index.id(w[0], w[1])] += share;
                }
            }
        }
    }
    if pairs > 0 {
        scores.iter_mut().for_each(|x| *x /= pairs as f64);
    }
    scores
}

fn enumerate(
    net: &Network<f64>,
    target: usize,
    stack: &mut Vec<usize>,
    on: &mut Vec<bool>,
    len: f64,
    length: &impl Fn(f64) -> f64,
    out: &mut Vec<(f64, Vec<usize>)>,
) {
    let u = *stack.last().unwrap();
    if u == target {
        out.push((len, stack.clone()));
        return;
    }
    for v in 0..net.n() {
        let w = net.weight(u, v);
        if w > 0.0 && !on[v] {
            on[v] = true;
            stack.push(v);
            enumerate(net, target, stack, on, len + length(w), length, out);
            stack.pop();
            on[v] = false;
        }
    }
}

/// Modularity straight from the double-sum definition.
pub fn modularity_oracle(net: &Network<f64>, labels: &[usize]) -> f64 {
    let n = net.n();
    let k: Vec<f64> = (0..n).map(|i| (0..n).map(|j| net.weight(i, j)).sum()).collect();
    let two_m: f64 = k.iter().sum();
    let mut q = 0.0;
    for i in 0..n {
        for j in 0..n {
            if labels[i] == labels[j] {
                q += net.weight(i, j) - k[i] * k[j] / two_m;
            }
        }
    }
    q / two_m
}

/// Maximum modularity over every set partition (restricted growth strings).
pub fn max_modularity(net: &Network<f64>) -> (f64, Vec<usize>) {
    let n = net.n();
    let k: Vec<f64> = (0..n).map(|i| (0..n).map(|j| net.weight(i, j)).sum()).collect();
    let two_m: f64 = k.iter().sum();
    let b: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| net.weight(i, j) - k[i] * k[j] / two_m).collect())
        .collect();
    let mut labels = vec![0usize; n];
    let mut best = (f64::NEG_INFINITY, labels.clone());
    // score[i] = contribution of nodes 0..i placed so far.
    fn rec(
        i: usize,
        max_label: usize,
        labels: &mut Vec<usize>,
        acc: f64,
        b: &[Vec<f64>],
        two_m: f64,
        best: &mut (f64, Vec<usize>),
    ) {
        let n = labels.len();
        if i == n {
            let q = acc / two_m;
            if q > best.0 {
                *best = (q, labels.clone());
            }
            return;
        }
        for c in 0..=max_label + 1 {
            if i == 0 && c > 0 {
                break;
            }
            labels[i] = c;
            let mut add = b[i][i];
            for j in 0..i {
                if labels[j] == c {
                    add += 2.0 * b[i][j];
                }
            }
            let next_max = if i == 0 { 0 } else { max_label.max(c) };
            rec(i + 1, next_max, labels, acc + add, b, two_m, best);
        }
    }
    rec(0, 0, &mut labels, 0.0, &b, two_m, &mut best);
    best
}

fn mi_of(a: &[usize], b: &[usize]) -> f64 {
    let n = a.len() as f64;
    let ka = a.iter().max().unwrap() + 1;
    let kb = b.iter().max().unwrap() + 1;
    let mut t = vec![vec![0.0; kb]; ka];
    let mut ra = vec![0.0; ka];
    let mut cb = vec![0.0; kb];
    for (&x, &y) in a.iter().zip(b) {
        t[x][y] += 1.0;
        ra[x] += 1.0;
        cb[y] += 1.0;
    }
    let mut mi = 0.0;
    for i in 0..ka {
        for j in 0..kb {
            if t[i][j] > 0.0 {
                mi += t[i][j] / n * (n * t[i][j] / (ra[i] * cb[j])).ln();
            }
        }
    }
    mi
}

/// Expected mutual information averaged over every permutation of the
/// second labelling (feasible for up to about 9 nodes).
pub fn emi_oracle(a: &[usize], b: &[usize]) -> f64 {
    let n = b.len();
    let mut perm: Vec<usize> = (0..n).collect();
    let mut total = 0.0;
    let mut count = 0usize;
    // Heap's algorithm.
    let mut c = vec![0usize; n];
    let mut visit = |perm: &[usize]| {
        let pb: Vec<usize> = perm.iter().map(|&i| b[i]).collect();
        total += mi_of(a, &pb);
        count += 1;
    };
    visit(&perm);
    let mut i = 0;
    while i < n {
        if c[i] < i {
            if i % 2 == 0 {
                perm.swap(0, i);
            } else {
                perm.swap(c[i], i);
            }
            visit(&perm);
            c[i] += 1;
            i = 0;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
    total / count as f64
}

/// Singular values by dense eigen-decomposition of the Gram matrix.
pub fn singular_values_oracle(rows: usize, cols: usize, data: &[f64]) -> Vec<f64> {
    let a = DMatrix::from_row_slice(rows, cols, data);
    let gram = a.transpose() * &a;
    let mut ev: Vec<f64> = gram
        .symmetric_eigen()
        .eigenvalues
        .iter()
        .map(|&x| x.max(0.0).sqrt())
        .collect();
    ev.sort_by(|a, b| b.partial_cmp(a).unwrap());
    ev
}

/// Eigenvalues of a dense symmetric matrix, descending.
pub fn eigenvalues_oracle(n: usize, data: &[f64]) -> Vec<f64> {
    let a = DMatrix::from_row_slice(n, n, data);
    let mut ev: Vec<f64> = a.symmetric_eigen().eigenvalues.iter().copied().collect();
    ev.sort_by(|a, b| b.partial_cmp(a).unwrap());
    ev
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
