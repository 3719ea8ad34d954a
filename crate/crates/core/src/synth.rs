//! Synthetic corpora and networks with planted community structure.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution as _;
use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Poisson;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::community::Partition;
use crate::corpus::{default_stopwords, RawEntry, SECONDS_PER_YEAR};
use crate::error::{Error, Result};
use crate::netbuild::{csv_field, sum_networks, EdgeIndex, Network};
use crate::relevance::{builtin_parameter_names, CatalogEntry, ParameterCatalog};
use crate::scalar::Scalar;

/// Words shared by the reference article and every tuning entry.
pub const TUNING_WORDS: &[&str] = &[
    "tuning",
    "tuned",
    "tune",
    "beam",
    "brightness",
    "pulse",
    "energy",
    "gain",
    "optimized",
    "improved",
    "adjusted",
    "scan",
    "scanned",
    "knob",
    "intensity",
    "fel",
    "xray",
    "photon",
    "lasing",
    "peaked",
];

/// Generic logbook words mixed into every kind of entry.
pub const SHARED_NOISE_WORDS: &[&str] = &[
    "shift", "checked", "called", "noted", "status", "restored", "request", "reported", "control", "room",
    "screen", "display", "software", "meeting", "program", "users", "operator", "handoff", "summary",
    "started",
];

const CONSONANTS: &[u8] = b"bdfgklmnprstvz";
const VOWELS: &[u8] = b"aeiou";

/// Deterministic pronounceable pseudo-words, distinct from everything in
/// `taken` (which is extended) and from the stopword list.
pub fn pseudo_words(stream: u64, count: usize, taken: &mut BTreeSet<String>) -> Vec<String> {
    let stop = default_stopwords();
    let mut rng = ChaCha8Rng::seed_from_u64(0x7a5c_0ca8);
    rng.set_stream(stream);
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let syllables = rng.random_range(2..=3);
        let mut w = String::new();
        for _ in 0..syllables {
            w.push(*CONSONANTS.choose(&mut rng).expect("non-empty") as char);
            w.push(*VOWELS.choose(&mut rng).expect("non-empty") as char);
        }
        w.push(*CONSONANTS.choose(&mut rng).expect("non-empty") as char);
        if stop.contains(&w) || !taken.insert(w.clone()) {
            continue;
        }
        out.push(w);
    }
    out
}

fn reserved_words() -> BTreeSet<String> {
    TUNING_WORDS
        .iter()
        .chain(SHARED_NOISE_WORDS)
        .map(|w| w.to_string())
        .collect()
}

/// Distinct vocabulary of `words` pseudo-words for each of `n` parameters.
pub fn parameter_vocabulary(n: usize, words: usize) -> Vec<Vec<String>> {
    let mut taken = reserved_words();
    (0..n)
        .map(|i| pseudo_words(1000 + i as u64, words, &mut taken))
        .collect()
}

/// Vocabulary for entries unrelated to tuning, disjoint from
/// [`parameter_vocabulary`] for up to `n_params` parameters.
pub fn unrelated_vocabulary(n_params: usize, param_words: usize, count: usize) -> Vec<String> {
    let mut taken = reserved_words();
    for words in parameter_vocabulary(n_params, param_words) {
        taken.extend(words);
    }
    pseudo_words(1, count, &mut taken)
}

/// Block assignment with within- and cross-block pair propensities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockModel {
    pub blocks: Vec<usize>,
    pub p_in: f64,
    pub p_out: f64,
}

impl BlockModel {
    /// `n` parameters split into `k` contiguous blocks of near-equal size.
    pub fn equal(n: usize, k: usize, p_in: f64, p_out: f64) -> Self {
        let blocks = (0..n).map(|i| i * k / n.max(1)).collect();
        Self { blocks, p_in, p_out }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0 <= self.p_out && self.p_out <= self.p_in && self.p_in <= 1.0 && self.p_in > 0.0) {
            return Err(Error::invalid(format!(
                "need 0 <= p_out <= p_in <= 1 and p_in > 0, got p_in = {}, p_out = {}",
                self.p_in, self.p_out
            )));
        }
        if Partition::new(self.blocks.clone()).labels() != self.blocks.as_slice() {
            return Err(Error::invalid(
                "block labels must be contiguous in order of first use",
            ));
        }
        Ok(())
    }

    pub fn partition(&self) -> Partition {
        Partition::new(self.blocks.clone())
    }

    #[inline]
    fn propensity(&self, i: usize, j: usize) -> f64 {
        if self.blocks[i] == self.blocks[j] {
            self.p_in
        } else {
            self.p_out
        }
    }

    /// Probability of each unordered pair, in [`EdgeIndex`] order.
    pub fn pair_probabilities(&self) -> Vec<f64> {
        let index = EdgeIndex::new(self.blocks.len());
        let raw: Vec<f64> = index.pairs().map(|(i, j)| self.propensity(i, j)).collect();
        let total: f64 = raw.iter().sum();
        raw.into_iter().map(|p| p / total).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TagSampling {
    /// Exactly two parameters per entry.
    Pair,
    /// `2 + Poisson(extra_mean)` parameters, grown from a sampled pair.
    Poisson { extra_mean: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantedModel {
    pub base: BlockModel,
    /// Per-parameter vocabulary used for entry text and reference texts.
    pub vocabulary: Vec<Vec<String>>,
    pub entries_per_period: usize,
    pub periods: usize,
    /// Per-period interpolation weight towards `drift_target`; empty means no
    /// drift.
    pub drift_schedule: Vec<f64>,
    pub drift_target: Option<BlockModel>,
    pub sampling: TagSampling,
}

/// Pseudo-words per parameter in the default vocabulary.
pub const WORDS_PER_PARAMETER: usize = 12;

impl PlantedModel {
    pub fn new(base: BlockModel) -> Self {
        let n = base.blocks.len();
        Self {
            base,
            vocabulary: parameter_vocabulary(n, WORDS_PER_PARAMETER),
            entries_per_period: 500,
            periods: 1,
            drift_schedule: Vec::new(),
            drift_target: None,
            sampling: TagSampling::Pair,
        }
    }

    pub fn n_params(&self) -> usize {
        self.base.blocks.len()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n_params();
        if n < 2 {
            return Err(Error::invalid("planted model needs at least two parameters"));
        }
        self.base.validate()?;
        if self.vocabulary.len() != n || self.vocabulary.iter().any(Vec::is_empty) {
            return Err(Error::invalid("every parameter needs a non-empty vocabulary"));
        }
        if self.periods == 0 {
            return Err(Error::invalid("planted model needs at least one period"));
        }
        if !self.drift_schedule.is_empty() {
            if self.drift_schedule.len() != self.periods {
                return Err(Error::DimensionMismatch {
                    expected: self.periods,
                    found: self.drift_schedule.len(),
                });
            }
            if self.drift_schedule.iter().any(|f| !(0.0..=1.0).contains(f)) {
                return Err(Error::invalid("drift weights must lie in [0, 1]"));
            }
            match &self.drift_target {
                None if self.drift_schedule.iter().any(|&f| f > 0.0) => {
                    return Err(Error::invalid("drift schedule without a drift target"));
                }
                Some(t) if t.blocks.len() != n => {
                    return Err(Error::DimensionMismatch {
                        expected: n,
                        found: t.blocks.len(),
                    });
                }
                Some(t) => t.validate()?,
                None => {}
            }
        }
        if let TagSampling::Poisson { extra_mean } = self.sampling {
            if !(extra_mean > 0.0 && extra_mean.is_finite()) {
                return Err(Error::invalid("Poisson mean must be positive"));
            }
        }
        Ok(())
    }

    pub fn drift(&self, period: usize) -> f64 {
        self.drift_schedule.get(period).copied().unwrap_or(0.0)
    }

    /// Pair probabilities for `period`, mixing base and target models.
    pub fn pair_probabilities(&self, period: usize) -> Vec<f64> {
        let base = self.base.pair_probabilities();
        let f = self.drift(period);
        match (&self.drift_target, f > 0.0) {
            (Some(target), true) => base
                .iter()
                .zip(target.pair_probabilities())
                .map(|(a, b)| (1.0 - f) * a + f * b)
                .collect(),
            _ => base,
        }
    }
}

struct TagSampler {
    index: EdgeIndex,
    probs: Vec<f64>,
    pairs: WeightedIndex<f64>,
    sampling: TagSampling,
}

impl TagSampler {
    fn new(model: &PlantedModel, period: usize) -> Result<Self> {
        let probs = model.pair_probabilities(period);
        let pairs = WeightedIndex::new(&probs).map_err(|e| Error::invalid(e.to_string()))?;
        Ok(Self {
            index: EdgeIndex::new(model.n_params()),
            probs,
            pairs,
            sampling: model.sampling,
        })
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> BTreeSet<usize> {
        let (i, j) = self.index.pair(self.pairs.sample(rng));
        let mut set = BTreeSet::from([i, j]);
        if let TagSampling::Poisson { extra_mean } = self.sampling {
            let extra = Poisson::new(extra_mean).expect("validated mean").sample(rng) as usize;
            let n = self.index.nodes();
            for _ in 0..extra.min(n - 2) {
                let weights: Vec<f64> = (0..n)
                    .map(|x| {
                        if set.contains(&x) {
                            0.0
                        } else {
                            set.iter().map(|&m| self.probs[self.index.id(m, x)]).sum()
                        }
                    })
                    .collect();
                let Ok(pick) = WeightedIndex::new(&weights) else {
                    break;
                };
                set.insert(pick.sample(rng));
            }
        }
        set
    }
}

fn entry_rng(seed: u64, period: usize, entry: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((period as u64) << 32) | entry as u64);
    rng
}

/// Tag sets for one period, sampled directly from the model.
pub fn sample_tag_sets(model: &PlantedModel, period: usize, seed: u64) -> Result<Vec<BTreeSet<usize>>> {
    model.validate()?;
    let sampler = TagSampler::new(model, period)?;
    Ok((0..model.entries_per_period)
        .into_par_iter()
        .map(|e| sampler.sample(&mut entry_rng(seed, period, e)))
        .collect())
}

/// Co-tag network for one period without going through text.
pub fn generate_network<T: Scalar>(model: &PlantedModel, period: usize, seed: u64) -> Result<Network<T>> {
    let sets = sample_tag_sets(model, period, seed)?;
    let labels = (0..model.n_params()).map(|i| format!("p{i}")).collect();
    sum_networks(&sets, labels)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CorpusOptions {
    /// Fraction of each period's entries that are unrelated to tuning.
    pub noise_fraction: f64,
    /// Shared logbook words per content word.
    pub shared_noise_rate: f64,
    /// Tokens drawn from each tagged parameter's vocabulary.
    pub words_per_parameter: usize,
    /// Tuning words per relevant entry.
    pub tuning_words: usize,
    /// Token count range of unrelated entries.
    pub unrelated_tokens: (usize, usize),
    pub n_authors: usize,
    pub bin_width_years: f64,
    /// Unix time of the first author's first entry.
    pub start: i64,
}

impl Default for CorpusOptions {
    fn default() -> Self {
        Self {
            noise_fraction: 0.0,
            shared_noise_rate: 0.2,
            words_per_parameter: 6,
            tuning_words: 3,
            unrelated_tokens: (14, 22),
            n_authors: 12,
            bin_width_years: 0.5,
            start: 1_262_304_000,
        }
    }
}

impl CorpusOptions {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.noise_fraction) {
            return Err(Error::invalid("noise fraction must lie in [0, 1)"));
        }
        if !(0.0..=1.0).contains(&self.shared_noise_rate) {
            return Err(Error::invalid("shared noise rate must lie in [0, 1]"));
        }
        if self.words_per_parameter * 2 + self.tuning_words < 10 || self.unrelated_tokens.0 < 10 {
            return Err(Error::invalid("entries would fall below ten tokens"));
        }
        if self.unrelated_tokens.0 > self.unrelated_tokens.1 {
            return Err(Error::invalid("unrelated token range is empty"));
        }
        if self.n_authors == 0 || !(self.bin_width_years > 0.0) {
            return Err(Error::invalid(
                "need at least one author and a positive bin width",
            ));
        }
        Ok(())
    }
}

/// Ground truth for one generated entry.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EntryTruth {
    pub id: String,
    pub period: usize,
    pub relevant: bool,
    pub parameters: BTreeSet<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticCorpus {
    pub entries: Vec<RawEntry>,
    pub truth: Vec<EntryTruth>,
    pub partition: Partition,
    pub catalog: ParameterCatalog,
    /// Reference text: a tuning preamble followed by one section per parameter.
    pub article: String,
}

impl SyntheticCorpus {
    /// `entry_id,period,relevant,parameters` with parameters `;`-separated.
    pub fn write_truth_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "entry_id,period,relevant,parameters")?;
        for t in &self.truth {
            let params: Vec<String> = t.parameters.iter().map(|p| p.to_string()).collect();
            writeln!(
                w,
                "{},{},{},{}",
                csv_field(&t.id),
                t.period,
                t.relevant,
                params.join(";")
            )?;
        }
        Ok(())
    }
}

/// The catalog matching a model's vocabulary.
pub fn model_catalog(model: &PlantedModel) -> ParameterCatalog {
    let n = model.n_params();
    let builtin = builtin_parameter_names();
    let entries = (0..n)
        .map(|id| CatalogEntry {
            id,
            name: if n == builtin.len() {
                builtin[id].clone()
            } else {
                format!("parameter {id}")
            },
            reference_text: model.vocabulary[id].clone(),
        })
        .collect();
    ParameterCatalog::new(entries).expect("contiguous ids")
}

/// Article text for a catalog: the tuning words, then one paragraph per
/// parameter containing its reference words.
pub fn synthetic_article(catalog: &ParameterCatalog) -> String {
    let mut out = TUNING_WORDS.join(" ");
    out.push('\n');
    for e in catalog.entries() {
        out.push('\n');
        out.push_str(&e.reference_text.join(" "));
        out.push('\n');
    }
    out
}

fn draw<'a>(words: &'a [String], count: usize, rng: &mut ChaCha8Rng) -> impl Iterator<Item = String> + 'a {
    let picks: Vec<usize> = (0..count).map(|_| rng.random_range(0..words.len())).collect();
    picks.into_iter().map(move |i| words[i].clone())
}

/// Generates logbook entries whose tag sets follow the planted model, plus
/// unrelated entries, with authors and timestamps spread over the periods.
pub fn generate_corpus(model: &PlantedModel, opts: &CorpusOptions, seed: u64) -> Result<SyntheticCorpus> {
    model.validate()?;
    opts.validate()?;
    let catalog = model_catalog(model);
    let article = synthetic_article(&catalog);
    let tuning: Vec<String> = TUNING_WORDS.iter().map(|w| w.to_string()).collect();
    let shared: Vec<String> = SHARED_NOISE_WORDS.iter().map(|w| w.to_string()).collect();
    let unrelated = unrelated_vocabulary(model.n_params(), WORDS_PER_PARAMETER, 400);
    let authors: Vec<String> = (0..opts.n_authors).map(|a| format!("operator{a:02}")).collect();
    let mut start_rng = ChaCha8Rng::seed_from_u64(seed);
    start_rng.set_stream(u64::MAX);
    let starts: Vec<i64> = (0..opts.n_authors)
        .map(|_| opts.start + start_rng.random_range(0..(30 * 86_400)))
        .collect();
    let noise_per_period = (opts.noise_fraction * model.entries_per_period as f64).round() as usize;
    let bin_secs = opts.bin_width_years * SECONDS_PER_YEAR;

    let mut generated: Vec<(RawEntry, EntryTruth)> = Vec::new();
    for period in 0..model.periods {
        let sampler = TagSampler::new(model, period)?;
        let batch: Vec<(RawEntry, EntryTruth)> = (0..model.entries_per_period)
            .into_par_iter()
            .map(|e| {
                let mut rng = entry_rng(seed, period, e);
                let relevant = e >= noise_per_period;
                let (parameters, mut words) = if relevant {
                    let set = sampler.sample(&mut rng);
                    let mut words: Vec<String> = Vec::new();
                    for &p in &set {
                        words.extend(draw(&model.vocabulary[p], opts.words_per_parameter, &mut rng));
                    }
                    words.extend(draw(&tuning, opts.tuning_words, &mut rng));
                    (set, words)
                } else {
                    let len = rng.random_range(opts.unrelated_tokens.0..=opts.unrelated_tokens.1);
                    (BTreeSet::new(), draw(&unrelated, len, &mut rng).collect())
                };
                let extra = (opts.shared_noise_rate * words.len() as f64).round() as usize;
                words.extend(draw(&shared, extra, &mut rng));
                words.shuffle(&mut rng);
                let author = rng.random_range(0..opts.n_authors);
                let offset = (period as f64 + rng.random::<f64>()) * bin_secs;
                let id = format!("p{period:02}-e{e:05}");
                let title = words[..2].join(" ");
                let body = words[2..].join(" ");
                let raw = RawEntry {
                    id: id.clone(),
                    author: authors[author].clone(),
                    timestamp: starts[author] + offset as i64,
                    title,
                    body,
                    tags: Vec::new(),
                    predecessor_ref: None,
                };
                let truth = EntryTruth {
                    id,
                    period,
                    relevant,
                    parameters,
                };
                (raw, truth)
            })
            .collect();
        generated.extend(batch);
    }
    // Each author's earliest entry defines their start, so pin it there.
    let mut first: BTreeMap<&str, usize> = BTreeMap::new();
    for (i, (raw, _)) in generated.iter().enumerate() {
        let slot = first.entry(raw.author.as_str()).or_insert(i);
        if raw.timestamp < generated[*slot].0.timestamp {
            *slot = i;
        }
    }
    let pins: Vec<(usize, i64)> = first
        .values()
        .map(|&i| {
            let a = authors
                .iter()
                .position(|x| *x == generated[i].0.author)
                .expect("known author");
            (i, starts[a])
        })
        .collect();
    for (i, t) in pins {
        generated[i].0.timestamp = t;
    }
    generated.sort_by(|a, b| {
        a.0.timestamp
            .cmp(&b.0.timestamp)
            .then_with(|| a.0.id.cmp(&b.0.id))
    });
    let (entries, truth) = generated.into_iter().unzip();
    Ok(SyntheticCorpus {
        entries,
        truth,
        partition: model.base.partition(),
        catalog,
        article,
    })
}
