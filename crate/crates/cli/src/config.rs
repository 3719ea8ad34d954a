use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use tasknet::change::{BootstrapOptions, ChangeOptions, SpectralMatrix};
use tasknet::community::{Embedding, Linkage, LouvainOptions, SpectralOptions};
use tasknet::corpus::{default_stopwords, CohortSpec, PreprocessConfig};
use tasknet::metrics::{EdgeLength, PageRankOptions};
use tasknet::relevance::TopicWeighting;
use tasknet::synth::{BlockModel, CorpusOptions, PlantedModel, TagSampling};

use crate::fail::{CliError, CliResult};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    /// Raw line-delimited entries.
    pub corpus: Option<PathBuf>,
    /// Reference article text.
    pub article: Option<PathBuf>,
    /// Catalog table (`id<TAB>name<TAB>reference_text_path`).
    pub catalog: Option<PathBuf>,
    pub output: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PreprocessSection {
    pub min_tokens: usize,
    pub machine_authors: Vec<String>,
    pub excluded_tags: Vec<String>,
    /// One stopword per line; the shipped English list when absent.
    pub stopwords: Option<PathBuf>,
}

impl Default for PreprocessSection {
    fn default() -> Self {
        let base = PreprocessConfig::default();
        Self {
            min_tokens: base.min_tokens,
            machine_authors: Vec::new(),
            excluded_tags: Vec::new(),
            stopwords: None,
        }
    }
}

impl PreprocessSection {
    pub fn build(&self) -> CliResult<PreprocessConfig> {
        let stopword_list = match &self.stopwords {
            None => default_stopwords(),
            Some(p) => {
                let text = fs::read_to_string(p)
                    .map_err(|e| CliError::Usage(format!("cannot read stopwords {}: {e}", p.display())))?;
                text.lines()
                    .map(str::trim)
                    .filter(|l| !l.is_empty() && !l.starts_with('#'))
                    .map(str::to_lowercase)
                    .collect()
            }
        };
        Ok(PreprocessConfig {
            min_tokens: self.min_tokens,
            machine_authors: self.machine_authors.iter().cloned().collect(),
            excluded_tags: self.excluded_tags.iter().cloned().collect::<BTreeSet<_>>(),
            stopword_list,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSection {
    pub k_topics: usize,
    pub weighting: TopicWeighting,
}

impl Default for ModelSection {
    fn default() -> Self {
        Self {
            k_topics: 100,
            weighting: TopicWeighting::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RelevanceSection {
    pub threshold: f64,
    pub tag_threshold: f64,
}

impl Default for RelevanceSection {
    fn default() -> Self {
        Self {
            threshold: 0.3,
            tag_threshold: 0.3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CommunitySection {
    pub resolution: f64,
    pub louvain_restarts: usize,
    pub louvain_kicks: usize,
    pub spectral_k: usize,
    pub kmeans_restarts: usize,
    pub linkage: Linkage,
    pub embedding: Embedding,
    pub edge_length: EdgeLength,
}

impl Default for CommunitySection {
    fn default() -> Self {
        let s = SpectralOptions::default();
        let l = LouvainOptions::default();
        Self {
            resolution: l.resolution,
            louvain_restarts: l.restarts,
            louvain_kicks: l.kicks,
            spectral_k: s.k,
            kmeans_restarts: s.restarts,
            linkage: Linkage::default(),
            embedding: Embedding::default(),
            edge_length: EdgeLength::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChangeSection {
    pub kl_epsilon: f64,
    pub laplacian: SpectralMatrix,
    pub similarity_floor: f64,
    /// Resamples for the modularity stability report; 0 disables it.
    pub bootstrap_resamples: usize,
}

impl Default for ChangeSection {
    fn default() -> Self {
        let c = ChangeOptions::default();
        Self {
            kl_epsilon: c.kl_epsilon,
            laplacian: c.laplacian,
            similarity_floor: c.similarity_floor,
            bootstrap_resamples: BootstrapOptions::default().n_resamples,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthSection {
    pub n_params: usize,
    pub blocks: usize,
    pub p_in: f64,
    pub p_out: f64,
    pub entries_per_period: usize,
    pub periods: usize,
    pub noise_fraction: f64,
    /// Per-period weight towards the drift target; empty for none.
    pub drift_schedule: Vec<f64>,
    /// Block count of the drift target.
    pub drift_blocks: usize,
    pub sampling: TagSampling,
    pub n_authors: usize,
}

impl Default for SynthSection {
    fn default() -> Self {
        let c = CorpusOptions::default();
        Self {
            n_params: 27,
            blocks: 3,
            p_in: 0.8,
            p_out: 0.05,
            entries_per_period: 2000,
            periods: 1,
            noise_fraction: 0.4,
            drift_schedule: Vec::new(),
            drift_blocks: 9,
            sampling: TagSampling::Pair,
            n_authors: c.n_authors,
        }
    }
}

impl SynthSection {
    pub fn model(&self) -> PlantedModel {
        let mut m = PlantedModel::new(BlockModel::equal(
            self.n_params,
            self.blocks,
            self.p_in,
            self.p_out,
        ));
        m.entries_per_period = self.entries_per_period;
        m.periods = self.periods;
        m.sampling = self.sampling;
        if !self.drift_schedule.is_empty() {
            m.drift_schedule = self.drift_schedule.clone();
            m.drift_target = Some(BlockModel::equal(
                self.n_params,
                self.drift_blocks,
                self.p_in,
                self.p_out,
            ));
        }
        m
    }

    pub fn corpus_options(&self, bin_width_years: f64) -> CorpusOptions {
        CorpusOptions {
            noise_fraction: self.noise_fraction,
            n_authors: self.n_authors,
            bin_width_years,
            ..Default::default()
        }
    }
}

/// Every setting of a pipeline run. Loaded from TOML; command-line flags
/// override individual fields.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub seed: u64,
    pub paths: Paths,
    pub preprocess: PreprocessSection,
    pub cohort: CohortSpec,
    pub model: ModelSection,
    pub relevance: RelevanceSection,
    pub pagerank: PageRankOptions,
    pub community: CommunitySection,
    pub change: ChangeSection,
    pub synth: SynthSection,
}

impl PipelineConfig {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| CliError::Usage(format!("config {}: {e}", path.display())))
    }

    pub fn validate(&self) -> CliResult<()> {
        let usage = |m: String| Err(CliError::Usage(m));
        for (name, t) in [
            ("relevance.threshold", self.relevance.threshold),
            ("relevance.tag_threshold", self.relevance.tag_threshold),
        ] {
            if !(0.0..=1.0).contains(&t) {
                return usage(format!("{name} = {t} must lie in [0, 1]"));
            }
        }
        if self.model.k_topics == 0 {
            return usage("model.k_topics must be positive".into());
        }
        if self.community.louvain_restarts == 0 || self.community.kmeans_restarts == 0 {
            return usage("community restarts must be positive".into());
        }
        if self.community.resolution.is_nan() || self.community.resolution <= 0.0 {
            return usage("community.resolution must be positive".into());
        }
        if self.community.spectral_k < 2 {
            return usage("community.spectral_k must be at least 2".into());
        }
        self.cohort
            .validate()
            .map_err(|e| CliError::Usage(e.to_string()))?;
        Ok(())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn sha256(&self) -> String {
        hex(&Sha256::digest(self.to_toml().as_bytes()))
    }

    pub fn louvain(&self) -> LouvainOptions {
        LouvainOptions {
            resolution: self.community.resolution,
            seed: self.seed,
            restarts: self.community.louvain_restarts,
            kicks: self.community.louvain_kicks,
        }
    }

    pub fn spectral(&self) -> SpectralOptions {
        SpectralOptions {
            k: self.community.spectral_k,
            seed: self.seed,
            restarts: self.community.kmeans_restarts,
            ..Default::default()
        }
    }

    pub fn change(&self) -> ChangeOptions {
        ChangeOptions {
            pagerank: self.pagerank,
            louvain: self.louvain(),
            kl_epsilon: self.change.kl_epsilon,
            laplacian: self.change.laplacian,
            similarity_floor: self.change.similarity_floor,
        }
    }

    pub fn bootstrap(&self) -> BootstrapOptions {
        BootstrapOptions {
            n_resamples: self.change.bootstrap_resamples,
            seed: self.seed,
            ..Default::default()
        }
    }
}

pub fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}
