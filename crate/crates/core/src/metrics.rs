//! Node- and edge-level network measures.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::community::Partition;
use crate::error::{Error, Result};
use crate::netbuild::{EdgeIndex, Network};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PageRankOptions {
    pub damping: f64,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for PageRankOptions {
    fn default() -> Self {
        Self {
            damping: 0.85,
            tol: 1e-10,
            max_iter: 10_000,
        }
    }
}

/// Weighted PageRank by power iteration on the row-normalized adjacency.
/// Nodes without edges teleport uniformly. Stops when the L1 change falls
/// below `tol`.
pub fn pagerank<T: Scalar>(net: &Network<T>, opts: &PageRankOptions) -> Result<Vec<T>> {
    let n = net.n();
    if n == 0 {
        return Err(Error::invalid("PageRank needs at least one node"));
    }
    if !(0.0..=1.0).contains(&opts.damping) {
        return Err(Error::invalid(format!("damping {} outside [0, 1]", opts.damping)));
    }
    let d = T::of(opts.damping);
    let tol = T::tolerance(opts.tol);
    let nf = T::count(n);
    let strength: Vec<T> = (0..n).map(|i| net.strength(i)).collect();
    let mut rank = vec![T::one() / nf; n];
    let mut next = vec![T::zero(); n];
    let mut change = T::infinity();
    for _ in 0..opts.max_iter {
        let dangling: T = (0..n)
            .filter(|&i| strength[i] == T::zero())
            .map(|i| rank[i])
            .sum();
        let base = (T::one() - d) / nf + d * dangling / nf;
        next.iter_mut().for_each(|x| *x = base);
        for i in 0..n {
            if strength[i] == T::zero() {
                continue;
            }
            let share = d * rank[i] / strength[i];
            for (j, w) in net.neighbors(i) {
                next[j] += share * w;
            }
        }
        change = rank.iter().zip(&next).map(|(a, b)| (*a - *b).abs()).sum();
        std::mem::swap(&mut rank, &mut next);
        if change < tol {
            let total: T = rank.iter().copied().sum();
            rank.iter_mut().for_each(|x| *x /= total);
            return Ok(rank);
        }
    }
    Err(Error::NonConvergence {
        what: "PageRank",
        iterations: opts.max_iter,
        residual: change.as_f64(),
    })
}

/// Node strengths `Σ_j w(i, j)`.
pub fn weighted_degree<T: Scalar>(net: &Network<T>) -> Vec<T> {
    (0..net.n()).map(|i| net.strength(i)).collect()
}

/// Weighted clustering coefficient: total weight among a node's neighbours
/// over the number of neighbour pairs times the network's maximum weight.
pub fn clustering_coefficient<T: Scalar>(net: &Network<T>) -> Vec<T> {
    let w_max = net.max_weight();
    (0..net.n())
        .map(|i| {
            let nbrs: Vec<usize> = net.neighbors(i).map(|(j, _)| j).collect();
            let deg = nbrs.len();
            if deg < 2 || w_max == T::zero() {
                return T::zero();
            }
            let mut among = T::zero();
            for (a, &j) in nbrs.iter().enumerate() {
                for &k in &nbrs[a + 1..] {
                    among += net.weight(j, k);
                }
            }
            among / (T::count(deg * (deg - 1) / 2) * w_max)
        })
        .collect()
}

/// Conversion from edge weight to shortest-path length.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EdgeLength {
    /// `1 / w`
    #[default]
    Inverse,
    /// `1 / ln(1 + w)`
    InverseLog,
}

impl EdgeLength {
    #[inline]
    pub fn length<T: Scalar>(self, w: T) -> T {
        match self {
            EdgeLength::Inverse => T::one() / w,
            EdgeLength::InverseLog => T::one() / w.ln_1p(),
        }
    }
}

#[inline]
fn same_length<T: Scalar>(a: T, b: T) -> bool {
    (a - b).abs() <= T::epsilon() * T::of(128.0) * a.abs().max(b.abs())
}

/// Shortest-path edge betweenness (Brandes accumulation over weighted
/// Dijkstra), indexed by [`EdgeIndex`]. Each ordered pair `(s, t)` with a
/// path spreads one unit of credit evenly over its shortest paths; the sum is
/// divided by the number of such pairs.
pub fn edge_betweenness<T: Scalar>(net: &Network<T>, length: EdgeLength) -> Vec<T> {
    let n = net.n();
    let index = EdgeIndex::new(n);
    let per_source: Vec<(Vec<T>, usize)> = (0..n)
        .into_par_iter()
        .map(|s| single_source_dependencies(net, s, length, &index))
        .collect();
    let mut scores = vec![T::zero(); index.len()];
    let mut pairs = 0usize;
    for (dep, reached) in per_source {
        pairs += reached;
        for (acc, d) in scores.iter_mut().zip(dep) {
            *acc += d;
        }
    }
    if pairs > 0 {
        let p = T::count(pairs);
        scores.iter_mut().for_each(|x| *x /= p);
    }
    scores
}

/// Edge dependencies of source `s` and the number of targets it reaches.
fn single_source_dependencies<T: Scalar>(
    net: &Network<T>,
    s: usize,
    length: EdgeLength,
    index: &EdgeIndex,
) -> (Vec<T>, usize) {
    let n = net.n();
    let mut dist = vec![T::infinity(); n];
    let mut sigma = vec![T::zero(); n];
    let mut preds: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut settled = vec![false; n];
    let mut order = Vec::with_capacity(n);
    dist[s] = T::zero();
    sigma[s] = T::one();
    loop {
        let mut u = None;
        for v in 0..n {
            if !settled[v] && dist[v].is_finite() && u.is_none_or(|b: usize| dist[v] < dist[b]) {
                u = Some(v);
            }
        }
        let Some(u) = u else { break };
        settled[u] = true;
        order.push(u);
        for (v, w) in net.neighbors(u) {
            if settled[v] {
                continue;
            }
            let alt = dist[u] + length.length(w);
            if dist[v].is_finite() && same_length(alt, dist[v]) {
                let su = sigma[u];
                sigma[v] += su;
                preds[v].push(u);
            } else if alt < dist[v] {
                dist[v] = alt;
                sigma[v] = sigma[u];
                preds[v].clear();
                preds[v].push(u);
            }
        }
    }
    let mut delta = vec![T::zero(); n];
    let mut dep = vec![T::zero(); index.len()];
    for &w in order.iter().rev() {
        for &v in &preds[w] {
            let c = sigma[v] / sigma[w] * (T::one() + delta[w]);
            dep[index.id(v, w)] += c;
            delta[v] += c;
        }
    }
    (dep, order.len() - 1)
}

/// Mean weight of positive edges crossing communities divided by the mean
/// weight of positive edges inside communities.
pub fn community_weight_ratio<T: Scalar>(net: &Network<T>, partition: &Partition) -> Result<T> {
    if partition.len() != net.n() {
        return Err(Error::DimensionMismatch {
            expected: net.n(),
            found: partition.len(),
        });
    }
    let (mut in_sum, mut in_n, mut out_sum, mut out_n) = (T::zero(), 0usize, T::zero(), 0usize);
    for (i, j, w) in net.edges() {
        if partition.label(i) == partition.label(j) {
            in_sum += w;
            in_n += 1;
        } else {
            out_sum += w;
            out_n += 1;
        }
    }
    if in_n == 0 {
        return Err(Error::invalid("no positive-weight edge inside any community"));
    }
    let in_mean = in_sum / T::count(in_n);
    let out_mean = if out_n == 0 {
        T::zero()
    } else {
        out_sum / T::count(out_n)
    };
    Ok(out_mean / in_mean)
}
