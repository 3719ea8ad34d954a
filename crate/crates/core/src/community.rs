//! Community detection, modularity and agglomerative hierarchies.

use std::collections::BTreeMap;
use std::io::Write;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{symmetric_eigen, DenseMatrix};
use crate::metrics::{edge_betweenness, EdgeLength};
use crate::netbuild::{csv_field, format_real, EdgeIndex, Network};
use crate::scalar::Scalar;

/// Community label per node, relabelled so that labels appear in order of
/// first occurrence starting from 0.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Partition {
    labels: Vec<usize>,
    count: usize,
}

impl Partition {
    pub fn new(labels: Vec<usize>) -> Self {
        let mut map = BTreeMap::new();
        let labels: Vec<usize> = labels
            .into_iter()
            .map(|l| {
                let next = map.len();
                *map.entry(l).or_insert(next)
            })
            .collect();
        Self {
            count: map.len(),
            labels,
        }
    }

    pub fn singletons(n: usize) -> Self {
        Self {
            labels: (0..n).collect(),
            count: n,
        }
    }

    pub fn single(n: usize) -> Self {
        Self {
            labels: vec![0; n],
            count: usize::from(n > 0),
        }
    }

    /// Builds a partition from explicit groups; every node `0..n` must appear
    /// exactly once.
    pub fn from_groups(n: usize, groups: &[Vec<usize>]) -> Result<Self> {
        let mut labels = vec![usize::MAX; n];
        for (g, members) in groups.iter().enumerate() {
            for &v in members {
                if v >= n || labels[v] != usize::MAX {
                    return Err(Error::invalid(format!("node {v} missing from range or repeated")));
                }
                labels[v] = g;
            }
        }
        if labels.contains(&usize::MAX) {
            return Err(Error::invalid("groups do not cover every node"));
        }
        Ok(Self::new(labels))
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn label(&self, node: usize) -> usize {
        self.labels[node]
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn members(&self, community: usize) -> Vec<usize> {
        (0..self.len()).filter(|&v| self.labels[v] == community).collect()
    }

    pub fn groups(&self) -> Vec<Vec<usize>> {
        let mut groups = vec![Vec::new(); self.count];
        for (v, &c) in self.labels.iter().enumerate() {
            groups[c].push(v);
        }
        groups
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.count];
        for &c in &self.labels {
            sizes[c] += 1;
        }
        sizes
    }
}

/// Writes `node_label,community` rows.
pub fn write_partition_csv<W: Write>(partition: &Partition, labels: &[String], mut w: W) -> Result<()> {
    if labels.len() != partition.len() {
        return Err(Error::DimensionMismatch {
            expected: partition.len(),
            found: labels.len(),
        });
    }
    writeln!(w, "node_label,community")?;
    for (label, c) in labels.iter().zip(partition.labels()) {
        writeln!(w, "{},{}", csv_field(label), c)?;
    }
    Ok(())
}

pub fn modularity<T: Scalar>(net: &Network<T>, partition: &Partition) -> Result<T> {
    modularity_with_resolution(net, partition, T::one())
}

/// `Q = (1/2m) Σ_ij [A_ij − γ k_i k_j / 2m] δ(c_i, c_j)`.
pub fn modularity_with_resolution<T: Scalar>(
    net: &Network<T>,
    partition: &Partition,
    resolution: T,
) -> Result<T> {
    if partition.len() != net.n() {
        return Err(Error::DimensionMismatch {
            expected: net.n(),
            found: partition.len(),
        });
    }
    let two_m = net.total_weight() * T::of(2.0);
    if two_m <= T::zero() {
        return Err(Error::ZeroWeight);
    }
    let mut inside = vec![T::zero(); partition.count()];
    let mut tot = vec![T::zero(); partition.count()];
    for i in 0..net.n() {
        let ci = partition.label(i);
        tot[ci] += net.strength(i);
        for (j, w) in net.neighbors(i) {
            if partition.label(j) == ci {
                inside[ci] += w;
            }
        }
    }
    let q = inside
        .iter()
        .zip(&tot)
        .map(|(&a, &t)| a / two_m - resolution * (t / two_m) * (t / two_m))
        .sum();
    Ok(q)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LouvainOptions {
    pub resolution: f64,
    pub seed: u64,
    /// Independent runs from singletons, each with its own node order.
    pub restarts: usize,
    /// Perturb-and-reoptimise rounds applied to the best run.
    pub kicks: usize,
}

impl Default for LouvainOptions {
    fn default() -> Self {
        Self {
            resolution: 1.0,
            seed: 0,
            restarts: 10,
            kicks: 100,
        }
    }
}

/// Louvain modularity optimisation: repeated local moves in a seeded node
/// order, then aggregation of communities into super-nodes, until a level
/// leaves every node where it started.
///
/// The result is fed back in as the starting point of another pass over the
/// original nodes until a whole pass changes nothing. The best of
/// `restarts` such runs is then kicked `kicks` times (one node moved to
/// another or a new community, or two communities merged) and reoptimised,
/// keeping any improvement. Ties keep the earlier partition. Networks
/// without edges come back as singletons.
pub fn louvain<T: Scalar>(net: &Network<T>, opts: &LouvainOptions) -> Partition {
    let n = net.n();
    let two_m = net.total_weight() * T::of(2.0);
    if n == 0 || two_m <= T::zero() {
        return Partition::singletons(n);
    }
    let gamma = T::of(opts.resolution);
    let mut mover = Mover {
        gamma,
        two_m,
        gain_tol: T::epsilon() * T::of(64.0) * two_m,
        rng: ChaCha8Rng::seed_from_u64(opts.seed),
    };
    let score = |p: &Partition| modularity_with_resolution(net, p, gamma).expect("non-empty network");
    let better = |a: T, b: T| a > b + T::epsilon() * T::of(64.0);

    let mut best: Option<(Partition, T)> = None;
    for r in 0..opts.restarts.max(1) {
        mover.rng = ChaCha8Rng::seed_from_u64(opts.seed);
        mover.rng.set_stream(r as u64);
        let p = mover.optimise(net, (0..n).collect());
        let q = score(&p);
        if best.as_ref().is_none_or(|(_, bq)| better(q, *bq)) {
            best = Some((p, q));
        }
    }
    let (mut best, mut best_q) = best.expect("at least one run");
    mover.rng = ChaCha8Rng::seed_from_u64(opts.seed);
    mover.rng.set_stream(u64::MAX);
    for _ in 0..opts.kicks {
        let mut labels = best.labels().to_vec();
        let k = best.count();
        if k > 1 && mover.rng.random_bool(0.5) {
            let a = mover.rng.random_range(0..k);
            let b = (a + mover.rng.random_range(1..k)) % k;
            labels.iter_mut().filter(|l| **l == b).for_each(|l| *l = a);
        } else {
            let i = mover.rng.random_range(0..n);
            labels[i] = (labels[i] + mover.rng.random_range(1..=k)) % (k + 1);
        }
        let p = mover.optimise(net, labels);
        let q = score(&p);
        if better(q, best_q) {
            best = p;
            best_q = q;
        }
    }
    best
}

struct Mover<T> {
    gamma: T,
    two_m: T,
    gain_tol: T,
    rng: ChaCha8Rng,
}

impl<T: Scalar> Mover<T> {
    /// Local moves and aggregation from `membership`, repeated from the
    /// result until a pass over the original nodes moves nothing.
    fn optimise(&mut self, net: &Network<T>, mut membership: Vec<usize>) -> Partition {
        let n = net.n();
        loop {
            let mut graph = net.adjacency().to_vec();
            let mut size = n;
            let mut comm = Partition::new(membership.clone()).labels().to_vec();
            let mut levels = 0;
            while self.local_moves(&graph, size, &mut comm) {
                let level = Partition::new(std::mem::take(&mut comm));
                if levels == 0 {
                    membership = level.labels().to_vec();
                } else {
                    for m in membership.iter_mut() {
                        *m = level.label(*m);
                    }
                }
                let k = level.count();
                let mut next = vec![T::zero(); k * k];
                for i in 0..size {
                    let ci = level.label(i);
                    for j in 0..size {
                        let w = graph[i * size + j];
                        if w != T::zero() {
                            next[ci * k + level.label(j)] += w;
                        }
                    }
                }
                graph = next;
                size = k;
                comm = (0..k).collect();
                levels += 1;
                if size == 1 {
                    break;
                }
            }
            // Every pass that moves a node raises modularity, so this ends.
            if levels == 0 {
                return Partition::new(membership);
            }
        }
    }

    /// Moves single nodes of the `size`-node `graph` between the communities
    /// in `comm` while that raises modularity. Returns whether any node moved.
    fn local_moves(&mut self, graph: &[T], size: usize, comm: &mut [usize]) -> bool {
        let strength: Vec<T> = (0..size)
            .map(|i| graph[i * size..(i + 1) * size].iter().copied().sum())
            .collect();
        let mut tot = vec![T::zero(); size];
        for (i, &c) in comm.iter().enumerate() {
            tot[c] += strength[i];
        }
        let mut order: Vec<usize> = (0..size).collect();
        order.shuffle(&mut self.rng);
        let mut links = vec![T::zero(); size];
        let mut touched: Vec<usize> = Vec::new();
        let mut improved = false;
        loop {
            let mut moved = false;
            for &i in &order {
                let ci = comm[i];
                let row = &graph[i * size..(i + 1) * size];
                for (j, &w) in row.iter().enumerate() {
                    if j != i && w > T::zero() {
                        let c = comm[j];
                        if links[c] == T::zero() {
                            touched.push(c);
                        }
                        links[c] += w;
                    }
                }
                let ki = strength[i];
                tot[ci] -= ki;
                let mut best = ci;
                let mut best_gain = links[ci] - self.gamma * tot[ci] * ki / self.two_m;
                touched.sort_unstable();
                for &c in &touched {
                    let gain = links[c] - self.gamma * tot[c] * ki / self.two_m;
                    if gain > best_gain + self.gain_tol {
                        best = c;
                        best_gain = gain;
                    }
                }
                tot[best] += ki;
                if best != ci {
                    comm[i] = best;
                    moved = true;
                    improved = true;
                }
                for &c in &touched {
                    links[c] = T::zero();
                }
                links[ci] = T::zero();
                touched.clear();
            }
            if !moved {
                return improved;
            }
        }
    }
}

/// One recorded level of the Girvan–Newman process.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GirvanNewmanLevel<T> {
    pub partition: Partition,
    pub modularity: T,
    pub edges_removed: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GirvanNewman<T> {
    pub levels: Vec<GirvanNewmanLevel<T>>,
    /// Removed edges in order.
    pub removed: Vec<(usize, usize)>,
    /// Index into `levels` of the maximum-modularity partition.
    pub best: usize,
}

impl<T: Scalar> GirvanNewman<T> {
    pub fn best_partition(&self) -> &Partition {
        &self.levels[self.best].partition
    }

    pub fn best_modularity(&self) -> T {
        self.levels[self.best].modularity
    }
}

/// Divisive clustering by repeated removal of the highest-betweenness edge
/// (lowest edge id on ties). Partitions are the connected components,
/// recorded whenever their number changes and scored on the original network.
pub fn girvan_newman<T: Scalar>(net: &Network<T>, length: EdgeLength) -> Result<GirvanNewman<T>> {
    let n = net.n();
    let index = EdgeIndex::new(n);
    let mut work = net.clone();
    let record = |work: &Network<T>, removed: usize| -> Result<GirvanNewmanLevel<T>> {
        let partition = Partition::new(work.components());
        let modularity = modularity(net, &partition)?;
        Ok(GirvanNewmanLevel {
            partition,
            modularity,
            edges_removed: removed,
        })
    };
    let mut levels = vec![record(&work, 0)?];
    let mut removed = Vec::new();
    let mut count = levels[0].partition.count();
    while work.edges().next().is_some() {
        let scores = edge_betweenness(&work, length);
        let mut best: Option<usize> = None;
        for (i, j, _) in work.edges() {
            let id = index.id(i, j);
            if best.is_none_or(|b| scores[id] > scores[b]) {
                best = Some(id);
            }
        }
        let (i, j) = index.pair(best.expect("edge present"));
        work.set_weight(i, j, T::zero());
        removed.push((i, j));
        let c = work.component_count();
        if c != count {
            count = c;
            levels.push(record(&work, removed.len())?);
        }
    }
    let mut best = 0;
    for (idx, level) in levels.iter().enumerate() {
        if level.modularity > levels[best].modularity {
            best = idx;
        }
    }
    Ok(GirvanNewman {
        levels,
        removed,
        best,
    })
}

/// `I − D^{-1/2} A D^{-1/2}`; isolated nodes get a zero row.
pub fn normalized_laplacian<T: Scalar>(net: &Network<T>) -> DenseMatrix<T> {
    let n = net.n();
    let inv_sqrt: Vec<T> = (0..n)
        .map(|i| {
            let k = net.strength(i);
            if k > T::zero() {
                T::one() / k.sqrt()
            } else {
                T::zero()
            }
        })
        .collect();
    DenseMatrix::from_fn(n, n, |i, j| {
        let off = -net.weight(i, j) * inv_sqrt[i] * inv_sqrt[j];
        if i == j && inv_sqrt[i] > T::zero() {
            T::one() + off
        } else {
            off
        }
    })
}

/// Rows of the `d` eigenvectors with smallest eigenvalues of the normalized
/// Laplacian, each row scaled to unit length.
pub fn spectral_embedding<T: Scalar>(net: &Network<T>, d: usize) -> Result<Vec<Vec<T>>> {
    let n = net.n();
    if d == 0 || d > n {
        return Err(Error::invalid(format!("embedding dimension {d} outside 1..={n}")));
    }
    let eig = symmetric_eigen(&normalized_laplacian(net))?;
    let cols: Vec<usize> = (0..d).map(|c| n - 1 - c).collect();
    Ok((0..n)
        .map(|i| {
            let mut row: Vec<T> = cols.iter().map(|&c| eig.vectors[(i, c)]).collect();
            let len = crate::linalg::norm(&row);
            if len > T::zero() {
                row.iter_mut().for_each(|x| *x /= len);
            }
            row
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct SpectralOptions {
    pub k: usize,
    pub seed: u64,
    pub restarts: usize,
    pub max_iter: usize,
}

impl Default for SpectralOptions {
    fn default() -> Self {
        Self {
            k: 3,
            seed: 0,
            restarts: 50,
            max_iter: 300,
        }
    }
}

/// Spectral clustering: k-means on the row-normalized spectral embedding.
pub fn spectral_clustering<T: Scalar>(net: &Network<T>, opts: &SpectralOptions) -> Result<Partition> {
    let n = net.n();
    let k = opts.k;
    if k < 2 || k > n {
        return Err(Error::invalid(format!("k = {k} outside 2..={n}")));
    }
    let components = net.component_count();
    if components > k {
        return Err(Error::TooManyComponents { components, k });
    }
    let points = spectral_embedding(net, k)?;
    let fit = kmeans(&points, k, opts.seed, opts.restarts, opts.max_iter)?;
    Ok(Partition::new(fit.labels))
}

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansFit<T> {
    pub labels: Vec<usize>,
    pub centers: Vec<Vec<T>>,
    pub inertia: T,
}

fn sq_dist<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(x, y)| (*x - *y) * (*x - *y)).sum()
}

/// Lloyd's k-means with k-means++ seeding; keeps the restart with the lowest
/// inertia (earliest on ties). Restart `r` uses its own stream derived from
/// `seed`, so results do not depend on scheduling.
pub fn kmeans<T: Scalar>(
    points: &[Vec<T>],
    k: usize,
    seed: u64,
    restarts: usize,
    max_iter: usize,
) -> Result<KMeansFit<T>> {
    if k == 0 || k > points.len() {
        return Err(Error::invalid(format!("k = {k} outside 1..={}", points.len())));
    }
    let fits: Vec<KMeansFit<T>> = (0..restarts.max(1))
        .into_par_iter()
        .map(|r| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(r as u64);
            lloyd(points, k, &mut rng, max_iter)
        })
        .collect();
    let mut best = None;
    for fit in fits {
        match &best {
            Some(KMeansFit { inertia, .. }) if fit.inertia >= *inertia => {}
            _ => best = Some(fit),
        }
    }
    Ok(best.expect("at least one restart"))
}

fn lloyd<T: Scalar>(points: &[Vec<T>], k: usize, rng: &mut ChaCha8Rng, max_iter: usize) -> KMeansFit<T> {
    let n = points.len();
    let mut centers: Vec<Vec<T>> = Vec::with_capacity(k);
    centers.push(points[rng.random_range(0..n)].clone());
    let mut nearest: Vec<T> = points.iter().map(|p| sq_dist(p, &centers[0])).collect();
    while centers.len() < k {
        let total: f64 = nearest.iter().map(|d| d.as_f64()).sum();
        let pick = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut pick = n - 1;
            for (i, d) in nearest.iter().enumerate() {
                target -= d.as_f64();
                if target < 0.0 {
                    pick = i;
                    break;
                }
            }
            pick
        } else {
            rng.random_range(0..n)
        };
        centers.push(points[pick].clone());
        let c = centers.last().expect("just pushed");
        for (d, p) in nearest.iter_mut().zip(points) {
            let nd = sq_dist(p, c);
            if nd < *d {
                *d = nd;
            }
        }
    }

    let dim = points[0].len();
    let mut labels = vec![usize::MAX; n];
    for _ in 0..max_iter {
        let mut changed = false;
        for (i, p) in points.iter().enumerate() {
            let mut best = 0;
            let mut best_d = sq_dist(p, &centers[0]);
            for (c, center) in centers.iter().enumerate().skip(1) {
                let d = sq_dist(p, center);
                if d < best_d {
                    best = c;
                    best_d = d;
                }
            }
            if labels[i] != best {
                labels[i] = best;
                changed = true;
            }
        }
        if !changed {
            break;
        }
        let mut sums = vec![vec![T::zero(); dim]; k];
        let mut counts = vec![0usize; k];
        for (p, &l) in points.iter().zip(&labels) {
            counts[l] += 1;
            for (s, x) in sums[l].iter_mut().zip(p) {
                *s += *x;
            }
        }
        for c in 0..k {
            if counts[c] == 0 {
                // Reseed an empty cluster at the point farthest from its center.
                let (far, _) = points
                    .iter()
                    .enumerate()
                    .map(|(i, p)| (i, sq_dist(p, &centers[labels[i]])))
                    .fold((0, T::neg_infinity()), |a, b| if b.1 > a.1 { b } else { a });
                centers[c] = points[far].clone();
                labels[far] = c;
            } else {
                let cnt = T::count(counts[c]);
                centers[c] = sums[c].iter().map(|&s| s / cnt).collect();
            }
        }
    }
    let inertia = points
        .iter()
        .zip(&labels)
        .map(|(p, &l)| sq_dist(p, &centers[l]))
        .sum();
    KMeansFit {
        labels,
        centers,
        inertia,
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Linkage {
    Complete,
    #[default]
    Average,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Embedding {
    /// Euclidean distance between rows of a `d`-dimensional spectral embedding.
    Spectral { dims: usize },
    /// Shortest-path distance with edge lengths `1 / w`.
    InverseWeight,
}

impl Default for Embedding {
    fn default() -> Self {
        Embedding::Spectral { dims: 3 }
    }
}

/// One merge step. Leaves are `0..n`, the cluster formed at step `s` has
/// id `n + s`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Merge<T> {
    pub a: usize,
    pub b: usize,
    pub distance: T,
    pub size: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dendrogram<T> {
    pub leaves: usize,
    pub merges: Vec<Merge<T>>,
}

impl<T: Scalar> Dendrogram<T> {
    /// Merge list as `cluster_a,cluster_b,distance,size`, the layout of a
    /// standard linkage matrix.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "cluster_a,cluster_b,distance,size")?;
        for m in &self.merges {
            writeln!(w, "{},{},{},{}", m.a, m.b, format_real(m.distance), m.size)?;
        }
        Ok(())
    }
}

/// Euclidean distance matrix between points.
pub fn pairwise_distances<T: Scalar>(points: &[Vec<T>]) -> DenseMatrix<T> {
    let n = points.len();
    DenseMatrix::from_fn(n, n, |i, j| sq_dist(&points[i], &points[j]).sqrt())
}

/// All-pairs shortest paths with edge lengths `1 / w`; unreachable pairs are
/// infinite.
pub fn inverse_weight_distances<T: Scalar>(net: &Network<T>) -> DenseMatrix<T> {
    let n = net.n();
    let mut d = DenseMatrix::from_fn(n, n, |i, j| {
        let w = net.weight(i, j);
        if i == j {
            T::zero()
        } else if w > T::zero() {
            T::one() / w
        } else {
            T::infinity()
        }
    });
    for k in 0..n {
        for i in 0..n {
            let dik = d[(i, k)];
            if !dik.is_finite() {
                continue;
            }
            for j in 0..n {
                let alt = dik + d[(k, j)];
                if alt < d[(i, j)] {
                    d[(i, j)] = alt;
                }
            }
        }
    }
    d
}

/// Agglomerative clustering of a symmetric distance matrix with
/// Lance–Williams updates. The closest pair is merged first, lowest ids
/// winning ties.
pub fn linkage<T: Scalar>(distances: &DenseMatrix<T>, method: Linkage) -> Result<Dendrogram<T>> {
    let n = distances.rows();
    if distances.cols() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: distances.cols(),
        });
    }
    if n < 2 {
        return Err(Error::invalid("hierarchy needs at least two points"));
    }
    if (0..n).any(|i| (0..n).any(|j| distances[(i, j)].is_nan() || distances[(i, j)] < T::zero())) {
        return Err(Error::invalid("distances must be non-negative numbers"));
    }
    let mut d = distances.clone();
    let mut ids: Vec<usize> = (0..n).collect();
    let mut sizes = vec![1usize; n];
    let mut active = vec![true; n];
    let mut merges = Vec::with_capacity(n - 1);
    for step in 0..n - 1 {
        let mut best: Option<(usize, usize)> = None;
        for i in 0..n {
            if !active[i] {
                continue;
            }
            for j in i + 1..n {
                if !active[j] {
                    continue;
                }
                let better = match best {
                    None => true,
                    Some((bi, bj)) => {
                        let (cur, old) = (d[(i, j)], d[(bi, bj)]);
                        cur < old || (cur == old && ids[i].min(ids[j]) < ids[bi].min(ids[bj]))
                    }
                };
                if better {
                    best = Some((i, j));
                }
            }
        }
        let (i, j) = best.expect("two active clusters");
        let (na, nb) = (sizes[i], sizes[j]);
        let dist = d[(i, j)];
        merges.push(Merge {
            a: ids[i].min(ids[j]),
            b: ids[i].max(ids[j]),
            distance: dist,
            size: na + nb,
        });
        for k in 0..n {
            if !active[k] || k == i || k == j {
                continue;
            }
            let (dik, djk) = (d[(i, k)], d[(j, k)]);
            let merged = match method {
                Linkage::Complete => dik.max(djk),
                Linkage::Average => {
                    if dik.is_infinite() || djk.is_infinite() {
                        T::infinity()
                    } else {
                        (T::count(na) * dik + T::count(nb) * djk) / T::count(na + nb)
                    }
                }
            };
            d[(i, k)] = merged;
            d[(k, i)] = merged;
        }
        active[j] = false;
        sizes[i] = na + nb;
        ids[i] = n + step;
    }
    Ok(Dendrogram { leaves: n, merges })
}

/// Hierarchy of the network's nodes under the chosen embedding and linkage.
pub fn agglomerative<T: Scalar>(
    net: &Network<T>,
    method: Linkage,
    embedding: Embedding,
) -> Result<Dendrogram<T>> {
    let distances = match embedding {
        Embedding::Spectral { dims } => pairwise_distances(&spectral_embedding(net, dims.min(net.n()))?),
        Embedding::InverseWeight => inverse_weight_distances(net),
    };
    linkage(&distances, method)
}

/// The partition left after applying the first `n − k` merges.
pub fn cut_dendrogram<T: Scalar>(dendrogram: &Dendrogram<T>, k: usize) -> Result<Partition> {
    let n = dendrogram.leaves;
    if k == 0 || k > n {
        return Err(Error::invalid(format!("k = {k} outside 1..={n}")));
    }
    // Representative leaf of every cluster id.
    let mut rep: Vec<usize> = (0..n).collect();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    for m in dendrogram.merges.iter().take(n - k) {
        let (ra, rb) = (find(&mut parent, rep[m.a]), find(&mut parent, rep[m.b]));
        parent[rb] = ra;
        rep.push(ra);
    }
    let labels = (0..n).map(|v| find(&mut parent, v)).collect();
    Ok(Partition::new(labels))
}
