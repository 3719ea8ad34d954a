//! Latent semantic indexing: TF-IDF document-term matrices, truncated SVD,
//! fold-in projection and cosine similarity.
//!
//! Documents are rows (`m` documents by `n` terms). The factorization is
//! stored in term-topic form, `Mᵀ ≈ U · diag(S) · Vt` with `U` of shape
//! `n × k` and `Vt` of shape `k × m`, so a training document's topic vector is
//! its column of `Vt`.
//!
//! # Persisted factor layout
//!
//! All integers and reals little-endian; reals are written as `f64`
//! regardless of the in-memory scalar.
//!
//! | offset | size      | content                           |
//! |--------|-----------|-----------------------------------|
//! | 0      | 8         | magic `b"TNLSIFAC"`               |
//! | 8      | 4         | format version, `u32` = 1         |
//! | 12     | 4         | bytes per stored real, `u32` = 8  |
//! | 16     | 8 × 3     | `k`, `m`, `n` as `u64`            |
//! | 40     | 8·k       | singular values `S`               |
//! |        | 8·n·k     | `U`, row-major (term by topic)    |
//! |        | 8·k·m     | `Vt`, row-major (topic by doc)    |

use std::collections::{BTreeMap, HashMap};
use std::io::{BufRead, Read, Write};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::{dot, norm, orthonormalize, symmetric_eigen, DenseMatrix};
use crate::scalar::Scalar;

/// Term dictionary with document frequencies from the fitting corpus.
#[derive(Debug, Clone, PartialEq)]
pub struct Vocabulary {
    terms: Vec<String>,
    index: HashMap<String, usize>,
    document_frequencies: Vec<usize>,
    n_documents: usize,
}

impl Vocabulary {
    /// Builds the vocabulary of `documents`; terms are indexed in sorted order.
    pub fn fit<D: AsRef<[String]>>(documents: &[D]) -> Self {
        let mut df: BTreeMap<&str, usize> = BTreeMap::new();
        for doc in documents {
            let mut seen: Vec<&str> = doc.as_ref().iter().map(String::as_str).collect();
            seen.sort_unstable();
            seen.dedup();
            for t in seen {
                *df.entry(t).or_insert(0) += 1;
            }
        }
        let terms: Vec<String> = df.keys().map(|t| (*t).to_owned()).collect();
        let document_frequencies = df.values().copied().collect();
        let index = terms.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
        Self {
            terms,
            index,
            document_frequencies,
            n_documents: documents.len(),
        }
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn n_documents(&self) -> usize {
        self.n_documents
    }

    pub fn index_of(&self, term: &str) -> Option<usize> {
        self.index.get(term).copied()
    }

    pub fn term(&self, index: usize) -> &str {
        &self.terms[index]
    }

    pub fn document_frequency(&self, index: usize) -> usize {
        self.document_frequencies[index]
    }

    /// Natural-log inverse document frequency `ln(N / df)`.
    pub fn idf<T: Scalar>(&self, index: usize) -> T {
        let n = T::count(self.n_documents);
        let df = T::count(self.document_frequencies[index]);
        (n / df).ln()
    }

    /// TF-IDF vector of a token list. Out-of-vocabulary tokens count towards
    /// the document length but contribute no column.
    pub fn vectorize<T: Scalar>(&self, tokens: &[String]) -> Result<SparseVector<T>> {
        if tokens.is_empty() {
            return Err(Error::EmptyDocument(String::from("<unnamed>")));
        }
        let mut counts: BTreeMap<usize, usize> = BTreeMap::new();
        for t in tokens {
            if let Some(i) = self.index_of(t) {
                *counts.entry(i).or_insert(0) += 1;
            }
        }
        let len = T::count(tokens.len());
        let mut indices = Vec::with_capacity(counts.len());
        let mut values = Vec::with_capacity(counts.len());
        for (i, c) in counts {
            let v = T::count(c) / len * self.idf::<T>(i);
            if v != T::zero() {
                indices.push(i);
                values.push(v);
            }
        }
        Ok(SparseVector {
            dim: self.len(),
            indices,
            values,
        })
    }

    /// One `term<TAB>index<TAB>df` line per term after a `#documents<TAB>N` header.
    pub fn write<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "#documents\t{}", self.n_documents)?;
        for (i, t) in self.terms.iter().enumerate() {
            writeln!(w, "{t}\t{i}\t{}", self.document_frequencies[i])?;
        }
        Ok(())
    }

    pub fn read<R: BufRead>(r: R) -> Result<Self> {
        let mut n_documents = None;
        let mut terms = Vec::new();
        let mut dfs = Vec::new();
        for (line_no, line) in r.lines().enumerate() {
            let line = line?;
            let bad = |reason: &str| Error::Parse {
                line: line_no + 1,
                reason: reason.to_owned(),
            };
            if let Some(rest) = line.strip_prefix("#documents\t") {
                n_documents = Some(rest.trim().parse().map_err(|_| bad("bad document count"))?);
                continue;
            }
            if line.trim().is_empty() {
                continue;
            }
            let mut parts = line.split('\t');
            let (Some(term), Some(idx), Some(df)) = (parts.next(), parts.next(), parts.next()) else {
                return Err(bad("expected term, index, df"));
            };
            let idx: usize = idx.parse().map_err(|_| bad("bad index"))?;
            if idx != terms.len() {
                return Err(bad("indices must be contiguous from 0"));
            }
            let df: usize = df.parse().map_err(|_| bad("bad df"))?;
            if df == 0 {
                return Err(bad("document frequency must be positive"));
            }
            terms.push(term.to_owned());
            dfs.push(df);
        }
        let n_documents =
            n_documents.ok_or_else(|| Error::invalid("vocabulary missing #documents header"))?;
        let index = terms.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
        Ok(Self {
            terms,
            index,
            document_frequencies: dfs,
            n_documents,
        })
    }
}

/// Sparse vector with strictly increasing indices.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseVector<T> {
    pub dim: usize,
    pub indices: Vec<usize>,
    pub values: Vec<T>,
}

impl<T: Scalar> SparseVector<T> {
    pub fn from_dense(dense: &[T]) -> Self {
        let (indices, values) = dense
            .iter()
            .enumerate()
            .filter(|(_, v)| **v != T::zero())
            .map(|(i, &v)| (i, v))
            .unzip();
        Self {
            dim: dense.len(),
            indices,
            values,
        }
    }

    pub fn to_dense(&self) -> Vec<T> {
        let mut out = vec![T::zero(); self.dim];
        for (&i, &v) in self.indices.iter().zip(&self.values) {
            out[i] = v;
        }
        out
    }

    pub fn scaled(&self, c: T) -> Self {
        Self {
            dim: self.dim,
            indices: self.indices.clone(),
            values: self.values.iter().map(|&v| v * c).collect(),
        }
    }
}

/// CSR document-term matrix of TF-IDF weights.
#[derive(Debug, Clone, PartialEq)]
pub struct DocTermMatrix<T> {
    n_cols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<T>,
}

impl<T: Scalar> DocTermMatrix<T> {
    pub fn from_rows(n_cols: usize, rows: &[SparseVector<T>]) -> Result<Self> {
        let mut indptr = Vec::with_capacity(rows.len() + 1);
        let mut indices = Vec::new();
        let mut values = Vec::new();
        indptr.push(0);
        for r in rows {
            if r.dim != n_cols {
                return Err(Error::DimensionMismatch {
                    expected: n_cols,
                    found: r.dim,
                });
            }
            indices.extend_from_slice(&r.indices);
            values.extend_from_slice(&r.values);
            indptr.push(indices.len());
        }
        Ok(Self {
            n_cols,
            indptr,
            indices,
            values,
        })
    }

    pub fn from_dense(m: &DenseMatrix<T>) -> Self {
        let rows: Vec<_> = (0..m.rows())
            .map(|i| SparseVector::from_dense(m.row(i)))
            .collect();
        Self::from_rows(m.cols(), &rows).expect("rows share the matrix width")
    }

    pub fn rows(&self) -> usize {
        self.indptr.len() - 1
    }

    pub fn cols(&self) -> usize {
        self.n_cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, i: usize) -> SparseVector<T> {
        let range = self.indptr[i]..self.indptr[i + 1];
        SparseVector {
            dim: self.n_cols,
            indices: self.indices[range.clone()].to_vec(),
            values: self.values[range].to_vec(),
        }
    }

    pub fn to_dense(&self) -> DenseMatrix<T> {
        let mut m = DenseMatrix::zeros(self.rows(), self.n_cols);
        for i in 0..self.rows() {
            for k in self.indptr[i]..self.indptr[i + 1] {
                m[(i, self.indices[k])] = self.values[k];
            }
        }
        m
    }

    /// `M x` for a dense `x` of length `cols`.
    pub fn mul_vec(&self, x: &[T]) -> Vec<T> {
        (0..self.rows())
            .map(|i| {
                (self.indptr[i]..self.indptr[i + 1])
                    .map(|k| self.values[k] * x[self.indices[k]])
                    .sum()
            })
            .collect()
    }

    /// `Mᵀ y` for a dense `y` of length `rows`.
    pub fn mul_t_vec(&self, y: &[T]) -> Vec<T> {
        let mut out = vec![T::zero(); self.n_cols];
        for (i, &yi) in y.iter().enumerate() {
            if yi == T::zero() {
                continue;
            }
            for k in self.indptr[i]..self.indptr[i + 1] {
                out[self.indices[k]] += self.values[k] * yi;
            }
        }
        out
    }

    pub fn frobenius_norm(&self) -> T {
        self.values.iter().map(|&v| v * v).sum::<T>().sqrt()
    }
}

/// Builds the vocabulary and TF-IDF matrix of `documents`, one row per
/// document in the given order. `tf = count / |d|`, `idf = ln(N / df)`.
pub fn build_tfidf<T: Scalar, D: AsRef<[String]> + Sync>(
    documents: &[D],
) -> Result<(Vocabulary, DocTermMatrix<T>)> {
    if documents.is_empty() {
        return Err(Error::invalid("TF-IDF needs at least one document"));
    }
    if let Some(i) = documents.iter().position(|d| d.as_ref().is_empty()) {
        return Err(Error::EmptyDocument(format!("#{i}")));
    }
    let vocab = Vocabulary::fit(documents);
    let rows = documents
        .par_iter()
        .map(|d| vocab.vectorize(d.as_ref()))
        .collect::<Result<Vec<_>>>()?;
    let m = DocTermMatrix::from_rows(vocab.len(), &rows)?;
    Ok((vocab, m))
}

/// Truncated SVD factors; see the module docs for orientation.
#[derive(Debug, Clone, PartialEq)]
pub struct SvdFactors<T> {
    /// `n × k` term-topic matrix with orthonormal columns.
    pub u: DenseMatrix<T>,
    /// `k` singular values, non-increasing.
    pub s: Vec<T>,
    /// `k × m` topic-document matrix with orthonormal rows.
    pub vt: DenseMatrix<T>,
}

impl<T: Scalar> SvdFactors<T> {
    pub fn k(&self) -> usize {
        self.s.len()
    }

    pub fn n_terms(&self) -> usize {
        self.u.rows()
    }

    pub fn n_documents(&self) -> usize {
        self.vt.cols()
    }

    /// `‖M − (U S Vt)ᵀ‖_F`, evaluated densely.
    pub fn reconstruction_error(&self, m: &DocTermMatrix<T>) -> T {
        let dense = m.to_dense();
        let mut err = T::zero();
        for d in 0..dense.rows() {
            for t in 0..dense.cols() {
                let approx: T = (0..self.k())
                    .map(|c| self.u[(t, c)] * self.s[c] * self.vt[(c, d)])
                    .sum();
                let diff = dense[(d, t)] - approx;
                err += diff * diff;
            }
        }
        err.sqrt()
    }

    pub fn write<W: Write>(&self, mut w: W) -> Result<()> {
        let (k, m, n) = (self.k(), self.n_documents(), self.n_terms());
        w.write_all(FACTORS_MAGIC)?;
        w.write_all(&1u32.to_le_bytes())?;
        w.write_all(&8u32.to_le_bytes())?;
        for d in [k, m, n] {
            w.write_all(&(d as u64).to_le_bytes())?;
        }
        let reals = self.s.iter().chain(self.u.as_slice()).chain(self.vt.as_slice());
        for &x in reals {
            w.write_all(&x.as_f64().to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read<R: Read>(mut r: R) -> Result<Self> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != FACTORS_MAGIC {
            return Err(Error::invalid("not an LSI factor file (bad magic)"));
        }
        let version = read_u32(&mut r)?;
        let width = read_u32(&mut r)?;
        if version != 1 || width != 8 {
            return Err(Error::invalid(format!(
                "unsupported factor file version {version} / width {width}"
            )));
        }
        let k = read_u64(&mut r)? as usize;
        let m = read_u64(&mut r)? as usize;
        let n = read_u64(&mut r)? as usize;
        let mut take = |count: usize| -> Result<Vec<T>> {
            let mut out = Vec::with_capacity(count);
            let mut buf = [0u8; 8];
            for _ in 0..count {
                r.read_exact(&mut buf)?;
                out.push(T::of(f64::from_le_bytes(buf)));
            }
            Ok(out)
        };
        let s = take(k)?;
        let u = DenseMatrix::from_row_major(n, k, take(n * k)?)?;
        let vt = DenseMatrix::from_row_major(k, m, take(k * m)?)?;
        Ok(Self { u, s, vt })
    }
}

const FACTORS_MAGIC: &[u8; 8] = b"TNLSIFAC";

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64<R: Read>(r: &mut R) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

#[derive(Debug, Clone, Copy)]
pub struct SvdOptions<T> {
    /// Relative tolerance on singular-value change and on Ritz residuals.
    pub tol: T,
    pub max_iter: usize,
    /// Extra subspace dimensions beyond `2k`.
    pub oversample: usize,
    pub seed: u64,
}

impl<T: Scalar> Default for SvdOptions<T> {
    fn default() -> Self {
        Self {
            tol: T::tolerance(1e-10),
            max_iter: 1000,
            oversample: 10,
            seed: 0x5eed_15a1,
        }
    }
}

pub fn truncated_svd<T: Scalar>(m: &DocTermMatrix<T>, k: usize) -> Result<SvdFactors<T>> {
    truncated_svd_with(m, k, &SvdOptions::default())
}

/// Rank-`k` SVD by block subspace iteration with Rayleigh-Ritz extraction on
/// the smaller Gram matrix (`MᵀM` or `MMᵀ`), applied through sparse products.
pub fn truncated_svd_with<T: Scalar>(
    m: &DocTermMatrix<T>,
    k: usize,
    opts: &SvdOptions<T>,
) -> Result<SvdFactors<T>> {
    let (rows, cols) = (m.rows(), m.cols());
    let small = rows.min(cols);
    if k == 0 || k > small {
        return Err(Error::invalid(format!(
            "k = {k} must satisfy 1 <= k <= min(m, n) = {small}"
        )));
    }
    // Term-side Gram when there are no more terms than documents.
    let term_side = cols <= rows;
    let dim = if term_side { cols } else { rows };
    let apply = |x: &Vec<T>| -> Vec<T> {
        if term_side {
            m.mul_t_vec(&m.mul_vec(x))
        } else {
            m.mul_vec(&m.mul_t_vec(x))
        }
    };
    let block = dim.min(2 * k + opts.oversample);

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut q: Vec<Vec<T>> = (0..block)
        .map(|_| (0..dim).map(|_| T::of(StandardNormal.sample(&mut rng))).collect())
        .collect();
    orthonormalize(&mut q);

    let mut prev: Option<Vec<T>> = None;
    let mut last_residual = f64::INFINITY;
    let mut ritz: Option<(Vec<T>, Vec<Vec<T>>)> = None;
    for _ in 0..opts.max_iter {
        let gq: Vec<Vec<T>> = q.par_iter().map(apply).collect();
        let h = DenseMatrix::from_fn(block, block, |i, j| {
            let a = dot(&q[i], &gq[j]);
            let b = dot(&q[j], &gq[i]);
            (a + b) / T::of(2.0)
        });
        let eig = symmetric_eigen(&h)?;
        let combine = |basis: &[Vec<T>], c: usize| -> Vec<T> {
            let mut out = vec![T::zero(); dim];
            for (i, v) in basis.iter().enumerate() {
                let w = eig.vectors[(i, c)];
                if w != T::zero() {
                    crate::linalg::axpy(w, v, &mut out);
                }
            }
            out
        };
        let new_q: Vec<Vec<T>> = (0..block).map(|c| combine(&q, c)).collect();
        let new_gq: Vec<Vec<T>> = (0..block).map(|c| combine(&gq, c)).collect();
        let lambda: Vec<T> = eig.values.iter().map(|&l| l.max(T::zero())).collect();
        let sigma: Vec<T> = lambda[..k].iter().map(|l| l.sqrt()).collect();
        let scale = lambda[0].max(T::min_positive_value());
        let residual = (0..k)
            .map(|c| {
                let r: Vec<T> = new_gq[c]
                    .iter()
                    .zip(&new_q[c])
                    .map(|(&g, &x)| g - lambda[c] * x)
                    .collect();
                norm(&r) / scale
            })
            .fold(T::zero(), T::max);
        let change = prev.as_ref().map(|p| {
            let s0 = sigma[0].max(T::min_positive_value());
            sigma
                .iter()
                .zip(p)
                .map(|(&a, &b)| (a - b).abs() / s0)
                .fold(T::zero(), T::max)
        });
        last_residual = residual.as_f64();
        if lambda[0] == T::zero() || matches!(change, Some(c) if c <= opts.tol && residual <= opts.tol) {
            ritz = Some((sigma, new_q[..k].to_vec()));
            break;
        }
        prev = Some(sigma);
        q = new_gq;
        orthonormalize(&mut q);
    }
    let (mut sigma, vectors) = ritz.ok_or(Error::NonConvergence {
        what: "truncated SVD",
        iterations: opts.max_iter,
        residual: last_residual,
    })?;

    let rank_tol = sigma[0] * T::epsilon() * T::count(rows.max(cols));
    for s in sigma.iter_mut() {
        if *s <= rank_tol {
            *s = T::zero();
        }
    }
    // Partner vectors: M x / σ (or Mᵀ x / σ); zero-σ partners are completed
    // to an orthonormal set.
    let mut partners: Vec<Vec<T>> = vectors
        .iter()
        .zip(&sigma)
        .map(|(x, &s)| {
            let len = if term_side { rows } else { cols };
            if s == T::zero() {
                return vec![T::zero(); len];
            }
            let y = if term_side { m.mul_vec(x) } else { m.mul_t_vec(x) };
            y.into_iter().map(|v| v / s).collect()
        })
        .collect();
    orthonormalize(&mut partners);

    let (mut left, mut right) = if term_side {
        (vectors, partners)
    } else {
        (partners, vectors)
    };
    // Largest-magnitude component of every term-side vector is positive.
    for (u, v) in left.iter_mut().zip(right.iter_mut()) {
        let mut best = 0;
        for (i, x) in u.iter().enumerate() {
            if x.abs() > u[best].abs() {
                best = i;
            }
        }
        if u[best] < T::zero() {
            u.iter_mut().for_each(|x| *x = -*x);
            v.iter_mut().for_each(|x| *x = -*x);
        }
    }
    let u = DenseMatrix::from_fn(cols, k, |t, c| left[c][t]);
    let vt = DenseMatrix::from_fn(k, rows, |c, d| right[c][d]);
    Ok(SvdFactors { u, s: sigma, vt })
}

/// A document's coordinates in topic space.
#[derive(Debug, Clone, PartialEq)]
pub struct TopicVector<T>(pub Vec<T>);

impl<T: Scalar> TopicVector<T> {
    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn norm(&self) -> T {
        norm(&self.0)
    }
}

/// Fold-in `S⁻¹ Uᵀ d`; topics with zero singular value get coordinate 0.
pub fn project<T: Scalar>(doc: &SparseVector<T>, factors: &SvdFactors<T>) -> Result<TopicVector<T>> {
    if doc.dim != factors.n_terms() {
        return Err(Error::DimensionMismatch {
            expected: factors.n_terms(),
            found: doc.dim,
        });
    }
    let k = factors.k();
    let mut out = vec![T::zero(); k];
    for (&t, &v) in doc.indices.iter().zip(&doc.values) {
        for (o, &u) in out.iter_mut().zip(factors.u.row(t)) {
            *o += u * v;
        }
    }
    for (o, &s) in out.iter_mut().zip(&factors.s) {
        *o = if s > T::zero() { *o / s } else { T::zero() };
    }
    Ok(TopicVector(out))
}

/// Cosine similarity. A zero vector on either side yields 0 (with a warning).
pub fn cosine<T: Scalar>(a: &TopicVector<T>, b: &TopicVector<T>) -> Result<T> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            expected: a.dim(),
            found: b.dim(),
        });
    }
    let (na, nb) = (a.norm(), b.norm());
    if na == T::zero() || nb == T::zero() {
        log::warn!("cosine similarity with a zero vector; returning 0");
        return Ok(T::zero());
    }
    let c = dot(&a.0, &b.0) / (na * nb);
    Ok(c.max(-T::one()).min(T::one()))
}
