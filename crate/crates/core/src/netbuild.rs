//! Weighted undirected co-occurrence networks over task parameters, built by
//! summing per-entry collocation matrices.

use std::collections::BTreeSet;
use std::io::{BufRead, Write};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Symmetric, zero-diagonal, non-negative weighted adjacency over `n` nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct Network<T> {
    n: usize,
    adjacency: Vec<T>,
    labels: Vec<String>,
}

impl<T: Scalar> Network<T> {
    /// Empty network with labels `"0"`, `"1"`, ...
    pub fn empty(n: usize) -> Self {
        Self::with_labels((0..n).map(|i| i.to_string()).collect())
    }

    pub fn with_labels(labels: Vec<String>) -> Self {
        let n = labels.len();
        Self {
            n,
            adjacency: vec![T::zero(); n * n],
            labels,
        }
    }

    /// Builds from a row-major `n × n` matrix, checking every invariant.
    pub fn from_dense(n: usize, adjacency: Vec<T>, labels: Option<Vec<String>>) -> Result<Self> {
        if adjacency.len() != n * n {
            return Err(Error::DimensionMismatch {
                expected: n * n,
                found: adjacency.len(),
            });
        }
        let labels = labels.unwrap_or_else(|| (0..n).map(|i| i.to_string()).collect());
        if labels.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: labels.len(),
            });
        }
        for i in 0..n {
            if adjacency[i * n + i] != T::zero() {
                return Err(Error::invalid(format!("non-zero diagonal at node {i}")));
            }
            for j in 0..n {
                let w = adjacency[i * n + j];
                if !(w >= T::zero()) || !w.is_finite() {
                    return Err(Error::invalid(format!("invalid weight {w} at ({i}, {j})")));
                }
                if w != adjacency[j * n + i] {
                    return Err(Error::invalid(format!("asymmetric weight at ({i}, {j})")));
                }
            }
        }
        Ok(Self { n, adjacency, labels })
    }

    /// Builds from an edge list; repeated pairs accumulate.
    pub fn from_edges(n: usize, edges: &[(usize, usize, T)]) -> Result<Self> {
        let mut net = Self::empty(n);
        for &(i, j, w) in edges {
            if i >= n || j >= n {
                return Err(Error::invalid(format!(
                    "edge ({i}, {j}) out of range for n = {n}"
                )));
            }
            if i == j {
                return Err(Error::invalid("self-loops are not allowed"));
            }
            if !(w >= T::zero()) {
                return Err(Error::invalid("negative edge weight"));
            }
            net.add_weight(i, j, w);
        }
        Ok(net)
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn set_labels(&mut self, labels: Vec<String>) -> Result<()> {
        if labels.len() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                found: labels.len(),
            });
        }
        self.labels = labels;
        Ok(())
    }

    #[inline]
    pub fn weight(&self, i: usize, j: usize) -> T {
        self.adjacency[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.adjacency[i * self.n..(i + 1) * self.n]
    }

    pub fn adjacency(&self) -> &[T] {
        &self.adjacency
    }

    pub fn add_weight(&mut self, i: usize, j: usize, w: T) {
        debug_assert!(i != j);
        self.adjacency[i * self.n + j] += w;
        self.adjacency[j * self.n + i] += w;
    }

    pub fn set_weight(&mut self, i: usize, j: usize, w: T) {
        debug_assert!(i != j);
        self.adjacency[i * self.n + j] = w;
        self.adjacency[j * self.n + i] = w;
    }

    /// Sum of `w(i, j)` over unordered pairs.
    pub fn total_weight(&self) -> T {
        self.edges().map(|(_, _, w)| w).sum()
    }

    pub fn strength(&self, i: usize) -> T {
        self.row(i).iter().copied().sum()
    }

    pub fn max_weight(&self) -> T {
        self.adjacency.iter().copied().fold(T::zero(), T::max)
    }

    /// Positive-weight edges `(i, j, w)` with `i < j`, lexicographic.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize, T)> + '_ {
        (0..self.n).flat_map(move |i| {
            (i + 1..self.n).filter_map(move |j| {
                let w = self.weight(i, j);
                (w > T::zero()).then_some((i, j, w))
            })
        })
    }

    pub fn neighbors(&self, i: usize) -> impl Iterator<Item = (usize, T)> + '_ {
        self.row(i)
            .iter()
            .enumerate()
            .filter(|(_, w)| **w > T::zero())
            .map(|(j, &w)| (j, w))
    }

    pub fn scaled(&self, c: T) -> Self {
        Self {
            n: self.n,
            adjacency: self.adjacency.iter().map(|&w| w * c).collect(),
            labels: self.labels.clone(),
        }
    }

    /// Relabels nodes: node `i` of `self` becomes node `perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        let n = self.n;
        let mut check = perm.to_vec();
        check.sort_unstable();
        if check != (0..n).collect::<Vec<_>>() {
            return Err(Error::invalid("not a permutation of the node set"));
        }
        let mut out = Self::empty(n);
        let mut labels = vec![String::new(); n];
        for i in 0..n {
            labels[perm[i]] = self.labels[i].clone();
            for j in 0..n {
                out.adjacency[perm[i] * n + perm[j]] = self.weight(i, j);
            }
        }
        out.labels = labels;
        Ok(out)
    }

    /// Elementwise sum; both networks must have the same node count.
    pub fn try_add(&self, other: &Self) -> Result<Self> {
        if self.n != other.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                found: other.n,
            });
        }
        Ok(Self {
            n: self.n,
            adjacency: self
                .adjacency
                .iter()
                .zip(&other.adjacency)
                .map(|(&a, &b)| a + b)
                .collect(),
            labels: self.labels.clone(),
        })
    }

    /// Connected components (positive-weight edges), labelled by first node.
    pub fn components(&self) -> Vec<usize> {
        let mut comp = vec![usize::MAX; self.n];
        let mut next = 0;
        for s in 0..self.n {
            if comp[s] != usize::MAX {
                continue;
            }
            let mut stack = vec![s];
            comp[s] = next;
            while let Some(u) = stack.pop() {
                for (v, _) in self.neighbors(u) {
                    if comp[v] == usize::MAX {
                        comp[v] = next;
                        stack.push(v);
                    }
                }
            }
            next += 1;
        }
        comp
    }

    pub fn component_count(&self) -> usize {
        self.components().into_iter().max().map_or(0, |m| m + 1)
    }
}

/// Bijection between edge ids and node pairs `(i, j)`, `i < j`, in
/// lexicographic order: edge 0 is `(0, 1)`, edge 1 is `(0, 2)`, ...
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EdgeIndex {
    n: usize,
}

impl EdgeIndex {
    pub fn new(n: usize) -> Self {
        Self { n }
    }

    pub fn nodes(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.n * self.n.saturating_sub(1) / 2
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn id(&self, i: usize, j: usize) -> usize {
        let (i, j) = if i < j { (i, j) } else { (j, i) };
        debug_assert!(j < self.n && i != j);
        // Edges before row i: sum_{r < i} (n - 1 - r).
        i * (2 * self.n - i - 1) / 2 + (j - i - 1)
    }

    pub fn pair(&self, id: usize) -> (usize, usize) {
        debug_assert!(id < self.len());
        let mut i = 0;
        let mut start = 0;
        loop {
            let row = self.n - 1 - i;
            if id < start + row {
                return (i, i + 1 + id - start);
            }
            start += row;
            i += 1;
        }
    }

    pub fn pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.n).flat_map(move |i| (i + 1..self.n).map(move |j| (i, j)))
    }
}

/// 0/1 collocation matrix of one entry's tagged parameter set.
pub fn entry_adjacency<T: Scalar>(parameters: &BTreeSet<usize>, n: usize) -> Result<Network<T>> {
    if let Some(&bad) = parameters.iter().find(|&&p| p >= n) {
        return Err(Error::invalid(format!("parameter id {bad} out of range 0..{n}")));
    }
    let mut net = Network::empty(n);
    let ids: Vec<usize> = parameters.iter().copied().collect();
    for (a, &i) in ids.iter().enumerate() {
        for &j in &ids[a + 1..] {
            net.set_weight(i, j, T::one());
        }
    }
    Ok(net)
}

/// Sums the collocation matrices of every entry. Reduction is over
/// fixed-size chunks in input order, so the result is bit-reproducible.
pub fn sum_networks<T: Scalar>(entries: &[BTreeSet<usize>], labels: Vec<String>) -> Result<Network<T>> {
    let n = labels.len();
    let partials = entries
        .par_chunks(256)
        .map(|chunk| {
            let mut net = Network::<T>::empty(n);
            for params in chunk {
                if let Some(&bad) = params.iter().find(|&&p| p >= n) {
                    return Err(Error::invalid(format!("parameter id {bad} out of range 0..{n}")));
                }
                let ids: Vec<usize> = params.iter().copied().collect();
                for (a, &i) in ids.iter().enumerate() {
                    for &j in &ids[a + 1..] {
                        net.add_weight(i, j, T::one());
                    }
                }
            }
            Ok(net)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut total = Network::with_labels(labels);
    for p in &partials {
        for (t, &w) in total.adjacency.iter_mut().zip(&p.adjacency) {
            *t += w;
        }
    }
    Ok(total)
}

/// Edge weights normalized to a probability distribution over all
/// `n(n-1)/2` edge ids.
pub fn edge_distribution<T: Scalar>(net: &Network<T>) -> Result<Vec<T>> {
    let total = net.total_weight();
    if total <= T::zero() {
        return Err(Error::ZeroWeight);
    }
    Ok(EdgeIndex::new(net.n())
        .pairs()
        .map(|(i, j)| net.weight(i, j) / total)
        .collect())
}

/// Dense adjacency CSV: a header of node labels, then one row per node.
pub fn write_adjacency_csv<T: Scalar, W: Write>(net: &Network<T>, mut w: W) -> Result<()> {
    let header: Vec<String> = net.labels().iter().map(|l| csv_field(l)).collect();
    writeln!(w, "{}", header.join(","))?;
    for i in 0..net.n() {
        let row: Vec<String> = net.row(i).iter().map(|x| format_real(*x)).collect();
        writeln!(w, "{}", row.join(","))?;
    }
    Ok(())
}

pub fn read_adjacency_csv<T: Scalar, R: BufRead>(r: R) -> Result<Network<T>> {
    let mut lines = r.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::invalid("adjacency CSV is empty"))??;
    let labels = split_csv_line(&header);
    let n = labels.len();
    let mut adjacency = Vec::with_capacity(n * n);
    let mut rows = 0;
    for (i, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != n {
            return Err(Error::Parse {
                line: i + 2,
                reason: format!("expected {n} fields, found {}", fields.len()),
            });
        }
        for f in fields {
            let v: f64 = f.trim().parse().map_err(|_| Error::Parse {
                line: i + 2,
                reason: format!("bad weight {f:?}"),
            })?;
            adjacency.push(T::of(v));
        }
        rows += 1;
    }
    if rows != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: rows,
        });
    }
    Network::from_dense(n, adjacency, Some(labels))
}

pub fn write_graphml<T: Scalar, W: Write>(net: &Network<T>, mut w: W) -> Result<()> {
    writeln!(w, r#"<?xml version="1.0" encoding="UTF-8"?>"#)?;
    writeln!(w, r#"<graphml xmlns="http://graphml.graphdrawing.org/xmlns">"#)?;
    writeln!(
        w,
        r#"  <key id="label" for="node" attr.name="label" attr.type="string"/>"#
    )?;
    writeln!(
        w,
        r#"  <key id="weight" for="edge" attr.name="weight" attr.type="double"/>"#
    )?;
    writeln!(w, r#"  <graph id="G" edgedefault="undirected">"#)?;
    for (i, l) in net.labels().iter().enumerate() {
        writeln!(
            w,
            r#"    <node id="n{i}"><data key="label">{}</data></node>"#,
            xml_escape(l)
        )?;
    }
    for (i, j, wt) in net.edges() {
        writeln!(
            w,
            r#"    <edge source="n{i}" target="n{j}"><data key="weight">{}</data></edge>"#,
            format_real(wt)
        )?;
    }
    writeln!(w, "  </graph>")?;
    writeln!(w, "</graphml>")?;
    Ok(())
}

pub fn write_dot<T: Scalar, W: Write>(net: &Network<T>, mut w: W) -> Result<()> {
    writeln!(w, "graph tasknet {{")?;
    for (i, l) in net.labels().iter().enumerate() {
        writeln!(
            w,
            "  n{i} [label=\"{}\"];",
            l.replace('\\', "\\\\").replace('"', "\\\"")
        )?;
    }
    for (i, j, wt) in net.edges() {
        writeln!(w, "  n{i} -- n{j} [weight={}];", format_real(wt))?;
    }
    writeln!(w, "}}")?;
    Ok(())
}

/// Shortest round-trip decimal form of a real.
pub fn format_real<T: Scalar>(x: T) -> String {
    let v = x.as_f64();
    if v == v.trunc() && v.abs() < 1e15 {
        format!("{}", v as i64)
    } else {
        format!("{v}")
    }
}

pub fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_owned()
    }
}

/// Splits one CSV line, honouring double-quoted fields.
pub fn split_csv_line(line: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut cur = String::new();
    let mut quoted = false;
    let mut chars = line.chars().peekable();
    while let Some(c) = chars.next() {
        match (c, quoted) {
            ('"', true) if chars.peek() == Some(&'"') => {
                cur.push('"');
                chars.next();
            }
            ('"', _) => quoted = !quoted,
            (',', false) => out.push(std::mem::take(&mut cur)),
            _ => cur.push(c),
        }
    }
    out.push(cur);
    out
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}
