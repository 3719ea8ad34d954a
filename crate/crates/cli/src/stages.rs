//! Pipeline stages as in-memory transformations, shared by the individual
//! subcommands and by `reproduce`.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;

use serde::{Deserialize, Serialize};

use tasknet::change::change_series;
use tasknet::community::{
    agglomerative, cut_dendrogram, girvan_newman, louvain, modularity, spectral_clustering,
    write_partition_csv, Partition,
};
use tasknet::corpus::{
    bin_by_period, compute_experience, group_by_expertise, parse_entries, CleanEntry, CohortSpec, DropReason,
    ExpertiseGroup, Preprocessor, Reject,
};
use tasknet::lsi::{build_tfidf, cosine, truncated_svd};
use tasknet::metrics::{
    clustering_coefficient, community_weight_ratio, edge_betweenness, pagerank, weighted_degree,
};
use tasknet::netbuild::{csv_field, edge_distribution, format_real, sum_networks, EdgeIndex};
use tasknet::relevance::{filter_relevant, ParameterCatalog, ParameterTagger, TaggedEntry, TopicSpace};
use tasknet::{ChangeSeries64, Network64};

use crate::config::PipelineConfig;
use crate::fail::{CliError, CliResult};

pub struct Ingested {
    pub clean: Vec<CleanEntry>,
    pub rejects: Vec<Reject>,
    pub dropped: Vec<(String, DropReason)>,
}

pub fn ingest(raw: &str, pre: &Preprocessor) -> CliResult<Ingested> {
    let parsed = parse_entries(raw.as_bytes())?;
    let outcome = pre.preprocess_all(&parsed.entries);
    let mut clean = outcome.kept;
    compute_experience(&mut clean);
    Ok(Ingested {
        clean,
        rejects: parsed.rejects,
        dropped: outcome.dropped,
    })
}

/// TF-IDF over the entries plus the article, reduced to `k` topics.
pub fn fit_model(
    clean: &[CleanEntry],
    article: &[String],
    config: &PipelineConfig,
) -> CliResult<TopicSpace<f64>> {
    if clean.is_empty() {
        return Err(CliError::Data("no entries survived preprocessing".into()));
    }
    let mut docs: Vec<&[String]> = clean.iter().map(|e| e.tokens.as_slice()).collect();
    docs.push(article);
    let (vocab, m) = build_tfidf::<f64, _>(&docs)?;
    let k = config.model.k_topics;
    let limit = m.rows().min(m.cols());
    if k > limit {
        return Err(CliError::Data(format!(
            "k_topics = {k} exceeds the rank bound min(documents, terms) = {limit}"
        )));
    }
    let factors = truncated_svd(&m, k)?;
    Ok(TopicSpace::new(vocab, factors)?.with_weighting(config.model.weighting))
}

/// Relevance scores of every entry, and the relevant entries with their tags.
pub fn filter(
    clean: &[CleanEntry],
    article: &[String],
    space: &TopicSpace<f64>,
    catalog: &ParameterCatalog,
    config: &PipelineConfig,
) -> CliResult<(Vec<f64>, Vec<TaggedEntry>)> {
    let vectors = space.embed_all(&clean.iter().map(|e| e.tokens.as_slice()).collect::<Vec<_>>())?;
    let art = space.embed(article)?;
    let scores = vectors
        .iter()
        .map(|v| cosine(v, &art))
        .collect::<Result<Vec<f64>, _>>()?;
    let kept = filter_relevant(&vectors, &art, config.relevance.threshold)?;
    let tagger = ParameterTagger::new(catalog, space, config.relevance.tag_threshold)?;
    let tagged = kept
        .into_iter()
        .map(|(i, relevance)| {
            Ok(TaggedEntry {
                entry_id: clean[i].id.clone(),
                relevance,
                parameter_ids: tagger.tag(&vectors[i])?,
            })
        })
        .collect::<CliResult<_>>()?;
    Ok((scores, tagged))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CohortKind {
    All,
    Period,
    Group,
}

pub struct Cohort {
    pub name: String,
    pub kind: CohortKind,
    pub period: Option<usize>,
    pub included: bool,
    pub tag_sets: Vec<BTreeSet<usize>>,
    pub network: Network64,
}

/// Parameter tag sets of one cohort, persisted so that stability checks can
/// resample entries.
#[derive(Debug, Serialize, Deserialize)]
pub struct Members {
    pub network: String,
    pub tag_sets: Vec<BTreeSet<usize>>,
}

pub fn period_name(p: usize) -> String {
    format!("period_{p:02}")
}

/// Networks of all relevant entries, of every experience period and of the
/// three expertise groups.
pub fn build(
    clean: &[CleanEntry],
    tagged: &[TaggedEntry],
    catalog: &ParameterCatalog,
    spec: &CohortSpec,
) -> CliResult<Vec<Cohort>> {
    let by_id: BTreeMap<&str, &CleanEntry> = clean.iter().map(|e| (e.id.as_str(), e)).collect();
    let relevant: Vec<CleanEntry> = tagged
        .iter()
        .map(|t| {
            by_id
                .get(t.entry_id.as_str())
                .map(|e| (*e).clone())
                .ok_or_else(|| {
                    CliError::Data(format!("tagged entry {} is not in the clean corpus", t.entry_id))
                })
        })
        .collect::<CliResult<_>>()?;
    let labels = catalog.names();
    let sets = |idx: &[usize]| -> Vec<BTreeSet<usize>> {
        idx.iter().map(|&i| tagged[i].parameter_ids.clone()).collect()
    };
    let make = |name: String, kind, period, included, tag_sets: Vec<BTreeSet<usize>>| -> CliResult<Cohort> {
        let network = sum_networks(&tag_sets, labels.clone())?;
        Ok(Cohort {
            name,
            kind,
            period,
            included,
            tag_sets,
            network,
        })
    };
    let all: Vec<usize> = (0..tagged.len()).collect();
    let mut out = vec![make(
        "all".into(),
        CohortKind::All,
        None,
        !all.is_empty(),
        sets(&all),
    )?];
    for bin in bin_by_period(&relevant, spec) {
        out.push(make(
            period_name(bin.index),
            CohortKind::Period,
            Some(bin.index),
            bin.included,
            sets(&bin.entries),
        )?);
    }
    let groups = group_by_expertise(&relevant, spec);
    for g in ExpertiseGroup::ALL {
        let idx = groups.get(g);
        out.push(make(
            g.name().into(),
            CohortKind::Group,
            None,
            !idx.is_empty(),
            sets(idx),
        )?);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CommunitySummary {
    pub communities: usize,
    pub modularity: f64,
    pub sizes: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub network: String,
    pub nodes: usize,
    pub edges: usize,
    pub total_weight: f64,
    pub louvain: CommunitySummary,
    pub spectral: Option<CommunitySummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub spectral_error: Option<String>,
    pub girvan_newman: CommunitySummary,
    pub hierarchy: Option<CommunitySummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hierarchy_error: Option<String>,
    /// Mean cross-community over mean within-community edge weight under
    /// the Louvain partition.
    pub out_in_weight_ratio: Option<f64>,
}

pub struct Analysis {
    pub summary: Summary,
    /// Relative file name and contents.
    pub files: Vec<(String, Vec<u8>)>,
}

fn community_summary(net: &Network64, p: &Partition) -> CliResult<CommunitySummary> {
    Ok(CommunitySummary {
        communities: p.count(),
        modularity: modularity(net, p)?,
        sizes: p.sizes(),
    })
}

fn partition_bytes(p: &Partition, labels: &[String]) -> CliResult<Vec<u8>> {
    let mut buf = Vec::new();
    write_partition_csv(p, labels, &mut buf)?;
    Ok(buf)
}

#[derive(Serialize)]
struct MetricRecord<'a> {
    measure: &'a str,
    id: String,
    value: f64,
}

/// Node, edge, community and hierarchy reports of one network.
pub fn analyze(name: &str, net: &Network64, config: &PipelineConfig) -> CliResult<Analysis> {
    if net.total_weight() <= 0.0 {
        return Err(CliError::Data(format!("network {name} has no edges")));
    }
    let labels = net.labels().to_vec();
    let n = net.n();
    let rank = pagerank(net, &config.pagerank)?;
    let degree = weighted_degree(net);
    let clustering = clustering_coefficient(net);
    let between = edge_betweenness(net, config.community.edge_length);
    let probability = edge_distribution(net)?;

    let lv = louvain(net, &config.louvain());
    let spectral = spectral_clustering(net, &config.spectral());
    let gn = girvan_newman(net, config.community.edge_length)?;
    let dendrogram = agglomerative(net, config.community.linkage, config.community.embedding);
    let hierarchy = dendrogram
        .as_ref()
        .map_err(|e| e.to_string())
        .and_then(|d| cut_dendrogram(d, config.community.spectral_k.min(n)).map_err(|e| e.to_string()));

    let mut files = Vec::new();
    let mut nodes = String::from("node,label,pagerank,weighted_degree,clustering,louvain\n");
    for i in 0..n {
        nodes.push_str(&format!(
            "{i},{},{},{},{},{}\n",
            csv_field(&labels[i]),
            format_real(rank[i]),
            format_real(degree[i]),
            format_real(clustering[i]),
            lv.label(i)
        ));
    }
    files.push(("nodes.csv".to_string(), nodes.into_bytes()));

    let index = EdgeIndex::new(n);
    let mut edges = String::from("edge,source,target,weight,probability,betweenness\n");
    for (e, (i, j)) in index.pairs().enumerate() {
        edges.push_str(&format!(
            "{e},{i},{j},{},{},{}\n",
            format_real(net.weight(i, j)),
            format_real(probability[e]),
            format_real(between[e])
        ));
    }
    files.push(("edges.csv".to_string(), edges.into_bytes()));

    let mut records = Vec::new();
    for (measure, values) in [
        ("pagerank", &rank),
        ("weighted_degree", &degree),
        ("clustering", &clustering),
    ] {
        for (i, v) in values.iter().enumerate() {
            records.push(MetricRecord {
                measure,
                id: labels[i].clone(),
                value: *v,
            });
        }
    }
    for (measure, values) in [("edge_probability", &probability), ("edge_betweenness", &between)] {
        for (e, v) in values.iter().enumerate() {
            records.push(MetricRecord {
                measure,
                id: e.to_string(),
                value: *v,
            });
        }
    }
    let mut report = Vec::new();
    for r in &records {
        serde_json::to_writer(&mut report, r).expect("record serializes");
        report.push(b'\n');
    }
    files.push(("metrics.jsonl".to_string(), report));

    files.push((
        "partition_louvain.csv".to_string(),
        partition_bytes(&lv, &labels)?,
    ));
    files.push((
        "partition_girvan_newman.csv".to_string(),
        partition_bytes(gn.best_partition(), &labels)?,
    ));
    let mut levels = String::from("level,edges_removed,communities,modularity\n");
    for (l, level) in gn.levels.iter().enumerate() {
        levels.push_str(&format!(
            "{l},{},{},{}\n",
            level.edges_removed,
            level.partition.count(),
            format_real(level.modularity)
        ));
    }
    files.push(("girvan_newman_levels.csv".to_string(), levels.into_bytes()));
    if let Ok(p) = &spectral {
        files.push(("partition_spectral.csv".to_string(), partition_bytes(p, &labels)?));
    }
    if let Ok(d) = &dendrogram {
        let mut buf = Vec::new();
        d.write_csv(&mut buf)?;
        files.push(("dendrogram.csv".to_string(), buf));
    }
    if let Ok(p) = &hierarchy {
        files.push((
            "partition_hierarchy.csv".to_string(),
            partition_bytes(p, &labels)?,
        ));
    }

    let summary = Summary {
        network: name.to_string(),
        nodes: n,
        edges: net.edges().count(),
        total_weight: net.total_weight(),
        louvain: community_summary(net, &lv)?,
        spectral: spectral
            .as_ref()
            .ok()
            .map(|p| community_summary(net, p))
            .transpose()?,
        spectral_error: spectral.as_ref().err().map(|e| e.to_string()),
        girvan_newman: community_summary(net, gn.best_partition())?,
        hierarchy: hierarchy
            .as_ref()
            .ok()
            .map(|p| community_summary(net, p))
            .transpose()?,
        hierarchy_error: hierarchy.as_ref().err().cloned(),
        out_in_weight_ratio: community_weight_ratio(net, &lv).ok(),
    };
    let json = serde_json::to_string_pretty(&summary).expect("summary serializes") + "\n";
    files.push(("summary.json".to_string(), json.into_bytes()));
    Ok(Analysis { summary, files })
}

/// Change of each period network relative to the first, as distance and
/// similarity CSVs.
pub fn series(periods: &[(usize, Network64)], config: &PipelineConfig) -> CliResult<ChangeSeries64> {
    if periods.len() < 2 {
        return Err(CliError::Data(format!(
            "a change series needs at least two included periods, found {}",
            periods.len()
        )));
    }
    let refs: Vec<(usize, &Network64)> = periods.iter().map(|(p, n)| (*p, n)).collect();
    Ok(change_series(&refs, &config.change())?)
}

/// Distances between two networks in `level,metric,distance,similarity` form.
pub fn compare(a: &Network64, b: &Network64, config: &PipelineConfig) -> CliResult<Vec<u8>> {
    let s = change_series(&[(0, a), (1, b)], &config.change())?;
    let mut out = Vec::new();
    writeln!(out, "level,metric,distance,similarity")?;
    for (d, sim) in s
        .distances
        .iter()
        .zip(&s.similarities)
        .filter(|(d, _)| d.period == 1)
    {
        writeln!(
            out,
            "{},{},{},{}",
            d.level,
            d.metric,
            format_real(d.value),
            format_real(sim.value)
        )?;
    }
    Ok(out)
}
