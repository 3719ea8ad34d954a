//! Distances between distributions, partitions and networks, and change
//! series against a reference period.

use std::collections::BTreeSet;
use std::fmt;
use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::community::{louvain, LouvainOptions, Partition};
use crate::error::{Error, Result};
use crate::linalg::{symmetric_eigenvalues, DenseMatrix};
use crate::metrics::{pagerank, PageRankOptions};
use crate::netbuild::{edge_distribution, format_real, sum_networks, Network};
use crate::scalar::Scalar;

/// A discrete probability distribution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Distribution<T>(Vec<T>);

impl<T: Scalar> Distribution<T> {
    /// Checks non-negativity and unit mass.
    pub fn new(values: Vec<T>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::invalid("empty distribution"));
        }
        if values.iter().any(|x| !x.is_finite() || *x < T::zero()) {
            return Err(Error::invalid(
                "distribution values must be finite and non-negative",
            ));
        }
        let total: T = values.iter().copied().sum();
        let tol = T::tolerance(1e-12) * T::count(values.len()).sqrt();
        if (total - T::one()).abs() > tol {
            return Err(Error::invalid(format!("distribution sums to {total}, not 1")));
        }
        Ok(Self(values))
    }

    /// Normalizes non-negative weights to unit mass.
    pub fn from_weights(weights: Vec<T>) -> Result<Self> {
        if weights.iter().any(|x| !x.is_finite() || *x < T::zero()) {
            return Err(Error::invalid("weights must be finite and non-negative"));
        }
        let total: T = weights.iter().copied().sum();
        if total <= T::zero() {
            return Err(Error::ZeroWeight);
        }
        Ok(Self(weights.into_iter().map(|w| w / total).collect()))
    }

    pub fn values(&self) -> &[T] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

fn same_dim<T>(p: &Distribution<T>, q: &Distribution<T>) -> Result<()> {
    if p.0.len() != q.0.len() {
        return Err(Error::DimensionMismatch {
            expected: p.0.len(),
            found: q.0.len(),
        });
    }
    Ok(())
}

fn kl<T: Scalar>(p: &[T], q: &[T]) -> T {
    p.iter()
        .zip(q)
        .filter(|(a, _)| **a > T::zero())
        .map(|(a, b)| *a * (*a / *b).ln())
        .sum()
}

/// Mean of `KL(p‖q)` and `KL(q‖p)` in nats after adding `epsilon` to every
/// bin and renormalizing.
pub fn symmetric_kl<T: Scalar>(p: &Distribution<T>, q: &Distribution<T>, epsilon: T) -> Result<T> {
    same_dim(p, q)?;
    if epsilon < T::zero() {
        return Err(Error::invalid("epsilon must be non-negative"));
    }
    let smooth = |d: &Distribution<T>| -> Vec<T> {
        let total: T = d.0.iter().map(|&x| x + epsilon).sum();
        d.0.iter().map(|&x| (x + epsilon) / total).collect()
    };
    let (ps, qs) = (smooth(p), smooth(q));
    let value = (kl(&ps, &qs) + kl(&qs, &ps)) / T::of(2.0);
    Ok(value.max(T::zero()))
}

/// `Σ min(p_i, q_i)`.
pub fn overlap_index<T: Scalar>(p: &Distribution<T>, q: &Distribution<T>) -> Result<T> {
    same_dim(p, q)?;
    if p.0 == q.0 {
        // exact, so a distribution compared with itself sits at distance zero
        return Ok(T::one());
    }
    Ok(p.0.iter().zip(&q.0).map(|(a, b)| a.min(*b)).sum())
}

/// Contingency counts `n_ij = |C_i ∩ C'_j|`.
pub fn contingency(a: &Partition, b: &Partition) -> Result<Vec<Vec<usize>>> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: a.len(),
            found: b.len(),
        });
    }
    let mut table = vec![vec![0usize; b.count()]; a.count()];
    for (&x, &y) in a.labels().iter().zip(b.labels()) {
        table[x][y] += 1;
    }
    Ok(table)
}

fn choose2<T: Scalar>(x: usize) -> T {
    T::count(x) * T::count(x.saturating_sub(1)) / T::of(2.0)
}

/// Adjusted Rand index.
pub fn ari<T: Scalar>(a: &Partition, b: &Partition) -> Result<T> {
    let table = contingency(a, b)?;
    let n = a.len();
    if n < 2 {
        return Err(Error::invalid("adjusted Rand index needs at least two nodes"));
    }
    let index: T = table.iter().flatten().map(|&x| choose2::<T>(x)).sum();
    let rows: T = a.sizes().into_iter().map(choose2::<T>).sum();
    let cols: T = b.sizes().into_iter().map(choose2::<T>).sum();
    let expected = rows * cols / choose2::<T>(n);
    let max = (rows + cols) / T::of(2.0);
    let denom = max - expected;
    if denom == T::zero() {
        // Both partitions trivial in the same way.
        return Ok(T::one());
    }
    Ok((index - expected) / denom)
}

fn entropy<T: Scalar>(sizes: &[usize], n: usize) -> T {
    let nf = T::count(n);
    sizes
        .iter()
        .filter(|&&s| s > 0)
        .map(|&s| {
            let p = T::count(s) / nf;
            -p * p.ln()
        })
        .sum()
}

pub fn mutual_information<T: Scalar>(a: &Partition, b: &Partition) -> Result<T> {
    let table = contingency(a, b)?;
    let n = a.len();
    let nf = T::count(n);
    let (ra, cb) = (a.sizes(), b.sizes());
    let mut mi = T::zero();
    for (i, row) in table.iter().enumerate() {
        for (j, &nij) in row.iter().enumerate() {
            if nij > 0 {
                let x = T::count(nij);
                mi += x / nf * (nf * x / (T::count(ra[i]) * T::count(cb[j]))).ln();
            }
        }
    }
    Ok(mi.max(T::zero()))
}

/// Exact expectation of mutual information between random partitions with
/// the given community sizes (hypergeometric model).
pub fn expected_mutual_information<T: Scalar>(a_sizes: &[usize], b_sizes: &[usize]) -> Result<T> {
    let n: usize = a_sizes.iter().sum();
    if n != b_sizes.iter().sum::<usize>() {
        return Err(Error::invalid("size vectors cover different node counts"));
    }
    if n == 0 {
        return Ok(T::zero());
    }
    let mut lf = vec![T::zero(); n + 1];
    for i in 1..=n {
        lf[i] = lf[i - 1] + T::count(i).ln();
    }
    let nf = T::count(n);
    let mut emi = T::zero();
    for &ai in a_sizes.iter().filter(|&&s| s > 0) {
        for &bj in b_sizes.iter().filter(|&&s| s > 0) {
            let lo = (ai + bj).saturating_sub(n).max(1);
            let hi = ai.min(bj);
            let fixed = lf[ai] + lf[bj] + lf[n - ai] + lf[n - bj] - lf[n];
            for nij in lo..=hi {
                let x = T::count(nij);
                let term = x / nf * (nf * x / (T::count(ai) * T::count(bj))).ln();
                let log_p = fixed - lf[nij] - lf[ai - nij] - lf[bj - nij] - lf[n + nij - ai - bj];
                emi += term * log_p.exp();
            }
        }
    }
    Ok(emi)
}

/// Adjusted mutual information with max-entropy normalization. Two
/// single-community partitions count as identical.
pub fn ami<T: Scalar>(a: &Partition, b: &Partition) -> Result<T> {
    let mi = mutual_information::<T>(a, b)?;
    let (sa, sb) = (a.sizes(), b.sizes());
    if sa.len() <= 1 && sb.len() <= 1 {
        return Ok(T::one());
    }
    let n = a.len();
    let h = entropy::<T>(&sa, n).max(entropy::<T>(&sb, n));
    let emi = expected_mutual_information::<T>(&sa, &sb)?;
    let denom = h - emi;
    if denom.abs() <= T::epsilon() * T::of(16.0) * h.max(T::one()) {
        return Ok(if a == b { T::one() } else { T::zero() });
    }
    Ok((mi - emi) / denom)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpectralMatrix {
    Adjacency,
    /// `D − W`
    #[default]
    Laplacian,
    /// `I − D^{-1/2} W D^{-1/2}`
    NormalizedLaplacian,
}

pub fn laplacian<T: Scalar>(net: &Network<T>) -> DenseMatrix<T> {
    let n = net.n();
    DenseMatrix::from_fn(n, n, |i, j| {
        if i == j {
            net.strength(i) - net.weight(i, i)
        } else {
            -net.weight(i, j)
        }
    })
}

/// Eigenvalues of the chosen matrix, descending.
pub fn spectrum<T: Scalar>(net: &Network<T>, matrix: SpectralMatrix) -> Result<Vec<T>> {
    let m = match matrix {
        SpectralMatrix::Adjacency => DenseMatrix::from_row_major(net.n(), net.n(), net.adjacency().to_vec())?,
        SpectralMatrix::Laplacian => laplacian(net),
        SpectralMatrix::NormalizedLaplacian => crate::community::normalized_laplacian(net),
    };
    symmetric_eigenvalues(&m)
}

/// L2 distance between the descending spectra of the two networks.
pub fn spectral_distance<T: Scalar>(a: &Network<T>, b: &Network<T>, matrix: SpectralMatrix) -> Result<T> {
    if a.n() != b.n() {
        return Err(Error::DimensionMismatch {
            expected: a.n(),
            found: b.n(),
        });
    }
    let (sa, sb) = (spectrum(a, matrix)?, spectrum(b, matrix)?);
    Ok(spectral_distance_of(&sa, &sb))
}

fn spectral_distance_of<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter()
        .zip(b)
        .map(|(x, y)| (*x - *y) * (*x - *y))
        .sum::<T>()
        .sqrt()
}

/// `e^{−d²}`
pub fn dist_to_sim<T: Scalar>(d: T) -> Result<T> {
    if d.is_nan() || d < T::zero() {
        return Err(Error::invalid(format!("distance {d} must be non-negative")));
    }
    Ok((-d * d).exp())
}

/// `√(−ln s)`
pub fn sim_to_dist<T: Scalar>(s: T) -> Result<T> {
    if s.is_nan() || s <= T::zero() || s > T::one() {
        return Err(Error::invalid(format!("similarity {s} outside (0, 1]")));
    }
    Ok((-s.ln()).max(T::zero()).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Level {
    Node,
    Edge,
    Community,
    Network,
}

impl fmt::Display for Level {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Level::Node => "node",
            Level::Edge => "edge",
            Level::Community => "community",
            Level::Network => "network",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChangeRecord<T> {
    pub period: usize,
    pub level: Level,
    pub metric: String,
    pub value: T,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChangeSeries<T> {
    pub reference: usize,
    /// Distance form of every metric.
    pub distances: Vec<ChangeRecord<T>>,
    /// Similarity form: `dist_to_sim` of each distance.
    pub similarities: Vec<ChangeRecord<T>>,
}

impl<T: Scalar> ChangeSeries<T> {
    pub fn value(&self, period: usize, metric: &str) -> Option<T> {
        self.distances
            .iter()
            .find(|r| r.period == period && r.metric == metric)
            .map(|r| r.value)
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        write_records(&self.distances, w)
    }

    pub fn write_similarity_csv<W: Write>(&self, w: W) -> Result<()> {
        write_records(&self.similarities, w)
    }
}

fn write_records<T: Scalar, W: Write>(records: &[ChangeRecord<T>], mut w: W) -> Result<()> {
    writeln!(w, "period,level,metric,value")?;
    for r in records {
        writeln!(
            w,
            "{},{},{},{}",
            r.period,
            r.level,
            r.metric,
            format_real(r.value)
        )?;
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ChangeOptions {
    pub pagerank: PageRankOptions,
    pub louvain: LouvainOptions,
    pub kl_epsilon: f64,
    /// Matrix used for the second whole-network distance.
    pub laplacian: SpectralMatrix,
    /// Similarities are clamped to `[floor, 1]` before conversion so that
    /// negative adjusted indices stay finite.
    pub similarity_floor: f64,
}

impl Default for ChangeOptions {
    fn default() -> Self {
        Self {
            pagerank: PageRankOptions::default(),
            louvain: LouvainOptions::default(),
            kl_epsilon: 1e-12,
            laplacian: SpectralMatrix::Laplacian,
            similarity_floor: 1e-12,
        }
    }
}

struct Summary<T> {
    rank: Distribution<T>,
    edges: Distribution<T>,
    partition: Partition,
    adjacency: Vec<T>,
    laplacian: Vec<T>,
}

fn summarize<T: Scalar>(net: &Network<T>, opts: &ChangeOptions) -> Result<Summary<T>> {
    Ok(Summary {
        rank: Distribution::from_weights(pagerank(net, &opts.pagerank)?)?,
        edges: Distribution::from_weights(edge_distribution(net)?)?,
        partition: louvain(net, &opts.louvain),
        adjacency: spectrum(net, SpectralMatrix::Adjacency)?,
        laplacian: spectrum(net, opts.laplacian)?,
    })
}

/// Change of every period's network relative to the first one, at node,
/// edge, community and whole-network level.
pub fn change_series<T: Scalar>(
    periods: &[(usize, &Network<T>)],
    opts: &ChangeOptions,
) -> Result<ChangeSeries<T>> {
    if periods.len() < 2 {
        return Err(Error::invalid("change series needs at least two periods"));
    }
    let n = periods[0].1.n();
    if let Some((_, bad)) = periods.iter().find(|(_, net)| net.n() != n) {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: bad.n(),
        });
    }
    if periods[0].1.total_weight() <= T::zero() {
        return Err(Error::ZeroWeight);
    }
    let summaries: Vec<Summary<T>> = periods
        .par_iter()
        .map(|(_, net)| summarize(net, opts))
        .collect::<Result<_>>()?;
    let reference = &summaries[0];
    let eps = T::of(opts.kl_epsilon);
    let floor = T::of(opts.similarity_floor);
    let to_dist = |s: T| sim_to_dist(s.max(floor).min(T::one()));

    let mut distances = Vec::new();
    for ((period, _), s) in periods.iter().zip(&summaries) {
        let mut push = |level, metric: &str, value| {
            distances.push(ChangeRecord {
                period: *period,
                level,
                metric: metric.to_string(),
                value,
            })
        };
        push(
            Level::Node,
            "relative_entropy",
            symmetric_kl(&reference.rank, &s.rank, eps)?,
        );
        push(
            Level::Node,
            "overlap",
            to_dist(overlap_index(&reference.rank, &s.rank)?)?,
        );
        push(
            Level::Edge,
            "relative_entropy",
            symmetric_kl(&reference.edges, &s.edges, eps)?,
        );
        push(
            Level::Edge,
            "overlap",
            to_dist(overlap_index(&reference.edges, &s.edges)?)?,
        );
        push(
            Level::Community,
            "ari",
            to_dist(ari(&reference.partition, &s.partition)?)?,
        );
        push(
            Level::Community,
            "ami",
            to_dist(ami(&reference.partition, &s.partition)?)?,
        );
        push(
            Level::Network,
            "adjacency_spectral",
            spectral_distance_of(&reference.adjacency, &s.adjacency),
        );
        push(
            Level::Network,
            "laplacian_spectral",
            spectral_distance_of(&reference.laplacian, &s.laplacian),
        );
    }
    let similarities = distances
        .iter()
        .map(|r| {
            Ok(ChangeRecord {
                value: dist_to_sim(r.value)?,
                ..r.clone()
            })
        })
        .collect::<Result<_>>()?;
    Ok(ChangeSeries {
        reference: periods[0].0,
        distances,
        similarities,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct BootstrapOptions {
    pub n_resamples: usize,
    pub seed: u64,
    /// Largest tolerated fraction of failed resamples.
    pub max_skip_fraction_permille: u32,
}

impl Default for BootstrapOptions {
    fn default() -> Self {
        Self {
            n_resamples: 200,
            seed: 0,
            max_skip_fraction_permille: 200,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapReport<T> {
    pub mean: T,
    pub std: T,
    pub p2_5: T,
    pub p97_5: T,
    pub evaluated: usize,
    pub skipped: usize,
}

impl<T: Scalar> fmt::Display for BootstrapReport<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "mean = {}", format_real(self.mean))?;
        writeln!(f, "std = {}", format_real(self.std))?;
        writeln!(f, "p2.5 = {}", format_real(self.p2_5))?;
        writeln!(f, "p97.5 = {}", format_real(self.p97_5))?;
        writeln!(f, "evaluated = {}", self.evaluated)?;
        writeln!(f, "skipped = {}", self.skipped)
    }
}

/// Linear-interpolated percentile of sorted data, `q` in `[0, 1]`.
fn percentile<T: Scalar>(sorted: &[T], q: f64) -> T {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = T::of(pos - lo as f64);
    sorted[lo] + (sorted[hi] - sorted[lo]) * frac
}

/// Resamples entries with replacement, rebuilds the network over
/// `labels.len()` parameters and evaluates `statistic` on each replicate.
pub fn bootstrap_stability<T, F>(
    entries: &[BTreeSet<usize>],
    labels: &[String],
    statistic: F,
    opts: &BootstrapOptions,
) -> Result<BootstrapReport<T>>
where
    T: Scalar,
    F: Fn(&Network<T>) -> Result<T> + Sync,
{
    if entries.is_empty() {
        return Err(Error::invalid("bootstrap needs at least one entry"));
    }
    if opts.n_resamples == 0 {
        return Err(Error::invalid("bootstrap needs at least one resample"));
    }
    let outcomes: Vec<Option<T>> = (0..opts.n_resamples)
        .into_par_iter()
        .map(|r| {
            let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
            rng.set_stream(r as u64);
            let sample: Vec<BTreeSet<usize>> = (0..entries.len())
                .map(|_| entries[rng.random_range(0..entries.len())].clone())
                .collect();
            let net = sum_networks::<T>(&sample, labels.to_vec()).ok()?;
            statistic(&net).ok().filter(|v| v.is_finite())
        })
        .collect();
    let mut values: Vec<T> = outcomes.iter().flatten().copied().collect();
    let skipped = opts.n_resamples - values.len();
    if values.is_empty() || skipped * 1000 > opts.n_resamples * opts.max_skip_fraction_permille as usize {
        return Err(Error::BootstrapFailures {
            skipped,
            total: opts.n_resamples,
        });
    }
    if skipped > 0 {
        log::warn!("bootstrap skipped {skipped} of {} resamples", opts.n_resamples);
    }
    let count = T::count(values.len());
    let mean = values.iter().copied().sum::<T>() / count;
    let var = if values.len() > 1 {
        values.iter().map(|&v| (v - mean) * (v - mean)).sum::<T>() / T::count(values.len() - 1)
    } else {
        T::zero()
    };
    values.sort_by(|a, b| a.partial_cmp(b).expect("finite values"));
    Ok(BootstrapReport {
        mean,
        std: var.sqrt(),
        p2_5: percentile(&values, 0.025),
        p97_5: percentile(&values, 0.975),
        evaluated: values.len(),
        skipped,
    })
}
