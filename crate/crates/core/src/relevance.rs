//! Relevance filtering against a reference article and parameter tagging.

use std::collections::BTreeSet;
use std::fs;
use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::Preprocessor;
use crate::error::{Error, Result};
use crate::lsi::{cosine, project, SvdFactors, TopicVector, Vocabulary};
use crate::scalar::Scalar;

const PARAMETER_TABLE: &str = include_str!("../data/parameters.tsv");

/// Names of the shipped 27-parameter catalog, indexed by id.
pub fn builtin_parameter_names() -> Vec<String> {
    PARAMETER_TABLE
        .lines()
        .skip(1)
        .filter_map(|l| l.split_once('\t'))
        .map(|(_, name)| name.to_string())
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CatalogEntry {
    pub id: usize,
    pub name: String,
    pub reference_text: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParameterCatalog {
    entries: Vec<CatalogEntry>,
}

impl ParameterCatalog {
    /// Entries are reordered by id; ids must be exactly `0..n`.
    pub fn new(mut entries: Vec<CatalogEntry>) -> Result<Self> {
        entries.sort_by_key(|e| e.id);
        for (i, e) in entries.iter().enumerate() {
            if e.id != i {
                return Err(Error::invalid(format!(
                    "catalog ids must be 0..{} without gaps or repeats",
                    entries.len()
                )));
            }
        }
        if entries.is_empty() {
            return Err(Error::invalid("empty parameter catalog"));
        }
        Ok(Self { entries })
    }

    /// The shipped parameter names with synthetic reference vocabulary.
    pub fn builtin() -> Self {
        let vocab = crate::synth::parameter_vocabulary(27, crate::synth::WORDS_PER_PARAMETER);
        let entries = builtin_parameter_names()
            .into_iter()
            .zip(vocab)
            .enumerate()
            .map(|(id, (name, reference_text))| CatalogEntry {
                id,
                name,
                reference_text,
            })
            .collect();
        Self::new(entries).expect("shipped table is contiguous")
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[CatalogEntry] {
        &self.entries
    }

    pub fn names(&self) -> Vec<String> {
        self.entries.iter().map(|e| e.name.clone()).collect()
    }

    /// Reads `id<TAB>name<TAB>reference_text_path` rows after a header line.
    /// Relative paths resolve against the catalog file's directory; texts are
    /// tokenized with `tokenizer`.
    pub fn read_tsv(path: &Path, tokenizer: &Preprocessor) -> Result<Self> {
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        let text = fs::read_to_string(path)?;
        let mut entries = Vec::new();
        for (no, line) in text.lines().enumerate().skip(1) {
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            if fields.len() != 3 {
                return Err(Error::Parse {
                    line: no + 1,
                    reason: format!("expected 3 tab-separated fields, found {}", fields.len()),
                });
            }
            let id = fields[0].trim().parse().map_err(|_| Error::Parse {
                line: no + 1,
                reason: format!("bad id {:?}", fields[0]),
            })?;
            let ref_path = PathBuf::from(fields[2].trim());
            let ref_path = if ref_path.is_absolute() {
                ref_path
            } else {
                base.join(ref_path)
            };
            let reference = fs::read_to_string(&ref_path)?;
            entries.push(CatalogEntry {
                id,
                name: fields[1].to_string(),
                reference_text: tokenizer.tokenize(&reference),
            });
        }
        Self::new(entries)
    }

    /// The catalog table and one reference file per parameter, as
    /// `(relative path, contents)` pairs; the table comes first.
    pub fn tsv_files(&self) -> Vec<(PathBuf, String)> {
        let mut table = String::from("id\tname\treference_text_path\n");
        let mut files = Vec::new();
        for e in &self.entries {
            let rel = format!("references/{:02}.txt", e.id);
            table.push_str(&format!("{}\t{}\t{}\n", e.id, e.name, rel));
            files.push((PathBuf::from(rel), e.reference_text.join(" ") + "\n"));
        }
        files.insert(0, (PathBuf::from("catalog.tsv"), table));
        files
    }

    /// Writes `catalog.tsv` plus one reference file per parameter under `dir`.
    pub fn write_tsv(&self, dir: &Path) -> Result<PathBuf> {
        fs::create_dir_all(dir.join("references"))?;
        for (rel, text) in self.tsv_files() {
            fs::write(dir.join(rel), text)?;
        }
        Ok(dir.join("catalog.tsv"))
    }
}

/// Coordinates used when comparing documents in topic space.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TopicWeighting {
    /// Fold-in coordinates multiplied by the singular values (`Uᵀd`).
    #[default]
    Scaled,
    /// Raw fold-in coordinates (`S⁻¹Uᵀd`).
    FoldIn,
}

/// Vocabulary and factors of a fitted topic model.
#[derive(Debug, Clone, PartialEq)]
pub struct TopicSpace<T> {
    pub vocabulary: Vocabulary,
    pub factors: SvdFactors<T>,
    pub weighting: TopicWeighting,
}

impl<T: Scalar> TopicSpace<T> {
    pub fn new(vocabulary: Vocabulary, factors: SvdFactors<T>) -> Result<Self> {
        if vocabulary.len() != factors.n_terms() {
            return Err(Error::DimensionMismatch {
                expected: vocabulary.len(),
                found: factors.n_terms(),
            });
        }
        Ok(Self {
            vocabulary,
            factors,
            weighting: TopicWeighting::default(),
        })
    }

    pub fn with_weighting(mut self, weighting: TopicWeighting) -> Self {
        self.weighting = weighting;
        self
    }

    pub fn embed(&self, tokens: &[String]) -> Result<TopicVector<T>> {
        let mut v = project(&self.vocabulary.vectorize(tokens)?, &self.factors)?;
        if self.weighting == TopicWeighting::Scaled {
            v.0.iter_mut().zip(&self.factors.s).for_each(|(x, &s)| *x *= s);
        }
        Ok(v)
    }

    pub fn embed_all<D: AsRef<[String]> + Sync>(&self, documents: &[D]) -> Result<Vec<TopicVector<T>>> {
        documents.par_iter().map(|d| self.embed(d.as_ref())).collect()
    }
}

fn check_threshold(threshold: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&threshold) {
        return Err(Error::invalid(format!("threshold {threshold} outside [0, 1]")));
    }
    Ok(())
}

/// Indices and cosines of entries with similarity at least `threshold` to
/// the article, in input order.
pub fn filter_relevant<T: Scalar>(
    entries: &[TopicVector<T>],
    article: &TopicVector<T>,
    threshold: f64,
) -> Result<Vec<(usize, T)>> {
    check_threshold(threshold)?;
    let t = T::of(threshold);
    let scores: Vec<T> = entries
        .par_iter()
        .map(|e| cosine(e, article))
        .collect::<Result<_>>()?;
    Ok(scores.into_iter().enumerate().filter(|(_, s)| *s >= t).collect())
}

/// Reference vectors of every catalog parameter and the tagging threshold.
#[derive(Debug, Clone, PartialEq)]
pub struct ParameterTagger<T> {
    references: Vec<TopicVector<T>>,
    threshold: T,
}

impl<T: Scalar> ParameterTagger<T> {
    pub fn new(catalog: &ParameterCatalog, space: &TopicSpace<T>, threshold: f64) -> Result<Self> {
        check_threshold(threshold)?;
        let references = catalog
            .entries()
            .iter()
            .map(|e| space.embed(&e.reference_text))
            .collect::<Result<_>>()?;
        Ok(Self {
            references,
            threshold: T::of(threshold),
        })
    }

    pub fn references(&self) -> &[TopicVector<T>] {
        &self.references
    }

    /// Parameters whose reference cosine is at least the threshold.
    pub fn tag(&self, entry: &TopicVector<T>) -> Result<BTreeSet<usize>> {
        let mut out = BTreeSet::new();
        for (id, r) in self.references.iter().enumerate() {
            if cosine(entry, r)? >= self.threshold {
                out.insert(id);
            }
        }
        Ok(out)
    }
}

pub fn tag_parameters<T: Scalar>(
    entry: &TopicVector<T>,
    catalog: &ParameterCatalog,
    space: &TopicSpace<T>,
    threshold: f64,
) -> Result<BTreeSet<usize>> {
    ParameterTagger::new(catalog, space, threshold)?.tag(entry)
}

/// A relevant entry with its similarity to the article and its parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaggedEntry {
    pub entry_id: String,
    pub relevance: f64,
    pub parameter_ids: BTreeSet<usize>,
}

pub fn write_tagged<W: Write>(mut w: W, entries: &[TaggedEntry]) -> Result<()> {
    for e in entries {
        serde_json::to_writer(&mut w, e).map_err(|e| Error::invalid(e.to_string()))?;
        writeln!(w)?;
    }
    Ok(())
}

pub fn read_tagged<R: BufRead>(reader: R) -> Result<Vec<TaggedEntry>> {
    let mut out = Vec::new();
    for (no, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| Error::Parse {
            line: no + 1,
            reason: e.to_string(),
        })?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::PreprocessConfig;
    use crate::lsi::{build_tfidf, truncated_svd};

    fn toks(s: &str) -> Vec<String> {
        s.split_whitespace().map(String::from).collect()
    }

    fn space_for(catalog: &ParameterCatalog, extra: &[Vec<String>]) -> TopicSpace<f64> {
        let mut docs: Vec<Vec<String>> = extra.to_vec();
        docs.extend(catalog.entries().iter().map(|e| e.reference_text.clone()));
        let (vocab, m) = build_tfidf::<f64, _>(&docs).unwrap();
        let factors = truncated_svd(&m, 27.min(docs.len())).unwrap();
        TopicSpace::new(vocab, factors).unwrap()
    }

    #[test]
    fn builtin_catalog_shape() {
        let c = ParameterCatalog::builtin();
        assert_eq!(c.len(), 27);
        assert_eq!(c.entries()[0].name, "LASER iris position");
        assert_eq!(c.entries()[24].name, "Undulator Launch");
        assert_eq!(c.entries()[26].name, "Undulator Taper");
    }

    #[test]
    fn catalog_rejects_gaps() {
        let e = |id| CatalogEntry {
            id,
            name: String::new(),
            reference_text: vec![],
        };
        assert!(ParameterCatalog::new(vec![e(0), e(2)]).is_err());
        assert!(ParameterCatalog::new(vec![e(1), e(0)]).is_ok());
    }

    #[test]
    fn catalog_round_trip() {
        let dir = std::env::temp_dir().join(format!("tasknet-catalog-{}", std::process::id()));
        let c = ParameterCatalog::builtin();
        let path = c.write_tsv(&dir).unwrap();
        let pre = Preprocessor::new(PreprocessConfig::default()).unwrap();
        assert_eq!(ParameterCatalog::read_tsv(&path, &pre).unwrap(), c);
        fs::remove_dir_all(dir).unwrap();
    }

    #[test]
    fn tagging_examples() {
        let catalog = ParameterCatalog::builtin();
        let space = space_for(&catalog, &[]);
        let tagger = ParameterTagger::new(&catalog, &space, 0.3).unwrap();
        let own = space.embed(&catalog.entries()[24].reference_text).unwrap();
        assert!(tagger.tag(&own).unwrap().contains(&24));

        let mut both = catalog.entries()[14].reference_text.clone();
        both.extend(catalog.entries()[24].reference_text.iter().cloned());
        let tags = tagger.tag(&space.embed(&both).unwrap()).unwrap();
        assert!(tags.contains(&14) && tags.contains(&24), "{tags:?}");

        let orth = space.embed(&toks("unrelatedword another")).unwrap();
        assert!(tagger.tag(&orth).unwrap().is_empty());
    }

    #[test]
    fn filter_threshold_is_inclusive() {
        let article = TopicVector(vec![1.0, 0.0]);
        let at = |c: f64| TopicVector(vec![c, (1.0 - c * c).sqrt()]);
        let kept = filter_relevant(&[at(0.29), at(0.3), at(1.0)], &article, 0.3).unwrap();
        let idx: Vec<usize> = kept.iter().map(|k| k.0).collect();
        assert_eq!(idx, vec![1, 2]);
        assert!((kept[1].1 - 1.0).abs() < 1e-15);
        assert!(filter_relevant(&[at(0.5)], &article, 1.5).is_err());
    }

    #[test]
    fn tagged_round_trip() {
        let t = vec![TaggedEntry {
            entry_id: "a".into(),
            relevance: 0.5,
            parameter_ids: [3, 1].into(),
        }];
        let mut buf = Vec::new();
        write_tagged(&mut buf, &t).unwrap();
        assert_eq!(
            String::from_utf8(buf.clone()).unwrap(),
            "{\"entry_id\":\"a\",\"relevance\":0.5,\"parameter_ids\":[1,3]}\n"
        );
        assert_eq!(read_tagged(&buf[..]).unwrap(), t);
    }
}
