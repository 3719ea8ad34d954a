use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::Args;
use serde::Serialize;

use tasknet::change::bootstrap_stability;
use tasknet::community::{louvain, modularity, write_partition_csv};
use tasknet::corpus::{
    bin_by_period, group_by_expertise, read_clean_entries, write_clean_entries, write_rejects, CleanEntry,
    ExpertiseGroup, Preprocessor,
};
use tasknet::lsi::{SvdFactors, Vocabulary};
use tasknet::netbuild::{
    format_real, read_adjacency_csv, split_csv_line, sum_networks, write_adjacency_csv, write_dot,
    write_graphml,
};
use tasknet::relevance::{read_tagged, write_tagged, ParameterCatalog, TaggedEntry, TopicSpace};
use tasknet::synth::{generate_corpus, model_catalog, sample_tag_sets};
use tasknet::Network64;

use crate::config::PipelineConfig;
use crate::fail::{CliError, CliResult, Context};
use crate::outputs::{require, Run};
use crate::stages::{self, period_name, Cohort, CohortKind, Members};
use crate::Command;

const CLEAN: &str = "corpus/clean.jsonl";
const VOCABULARY: &str = "model/vocabulary.tsv";
const FACTORS: &str = "model/factors.bin";
const TAGGED: &str = "filter/tagged.jsonl";
const COHORTS: &str = "networks/cohorts.csv";
const MEMBERS: &str = "networks/members.jsonl";
/// Topic count suited to generated vocabularies.
const SYNTH_TOPICS: usize = 30;

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Entries per period.
    #[arg(long)]
    entries: Option<usize>,
    #[arg(long)]
    periods: Option<usize>,
    /// Fraction of unrelated entries per period.
    #[arg(long)]
    noise: Option<f64>,
    /// Comma-separated per-period weights towards the drift target.
    #[arg(long, value_delimiter = ',')]
    drift: Option<Vec<f64>>,
    /// Emit period networks sampled directly from the model instead of text.
    #[arg(long)]
    networks: bool,
}

#[derive(Debug, Args)]
pub struct ModelArgs {
    /// Number of topics.
    #[arg(long)]
    k: Option<usize>,
}

#[derive(Debug, Args)]
pub struct FilterArgs {
    /// Relevance threshold on the cosine to the article.
    #[arg(long)]
    threshold: Option<f64>,
    /// Tagging threshold on the cosine to each parameter reference.
    #[arg(long)]
    tag_threshold: Option<f64>,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    /// Adjacency CSVs to analyze; defaults to every included cohort network.
    networks: Vec<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    a: PathBuf,
    b: PathBuf,
}

pub fn apply_overrides(command: &Command, config: &mut PipelineConfig) {
    match command {
        Command::Synth(a) => {
            let s = &mut config.synth;
            if let Some(v) = a.entries {
                s.entries_per_period = v;
            }
            if let Some(v) = a.periods {
                s.periods = v;
            }
            if let Some(v) = a.noise {
                s.noise_fraction = v;
            }
            if let Some(v) = &a.drift {
                s.drift_schedule = v.clone();
            }
        }
        Command::Model(a) => {
            if let Some(k) = a.k {
                config.model.k_topics = k;
            }
        }
        Command::Filter(a) => {
            if let Some(t) = a.threshold {
                config.relevance.threshold = t;
            }
            if let Some(t) = a.tag_threshold {
                config.relevance.tag_threshold = t;
            }
        }
        _ => {}
    }
}

pub fn dispatch(command: &Command, config: &PipelineConfig) -> CliResult<()> {
    let mut run = Run::new(&config.paths.output);
    let name = match command {
        Command::Synth(a) => {
            synth(&mut run, config, a.networks)?;
            "synth"
        }
        Command::Ingest => {
            ingest(&mut run, config)?;
            "ingest"
        }
        Command::Model(_) => {
            model(&mut run, config)?;
            "model"
        }
        Command::Filter(_) => {
            filter(&mut run, config)?;
            "filter"
        }
        Command::Build => {
            build(&mut run, config)?;
            "build"
        }
        Command::Analyze(a) => {
            analyze(&mut run, config, &a.networks)?;
            "analyze"
        }
        Command::Compare(a) => {
            compare(&mut run, config, &a.a, &a.b)?;
            "compare"
        }
        Command::Series => {
            series(&mut run, config)?;
            "series"
        }
        Command::Reproduce => {
            reproduce(&mut run, config)?;
            "reproduce"
        }
    };
    run.commit(name, config)
}

fn preprocessor(config: &PipelineConfig) -> CliResult<Preprocessor> {
    Preprocessor::new(config.preprocess.build()?).map_err(|e| CliError::Usage(e.to_string()))
}

fn intermediate(run: &Run, rel: &str) -> PathBuf {
    run.root().join(rel)
}

fn read_clean(run: &mut Run) -> CliResult<Vec<CleanEntry>> {
    let path = intermediate(run, CLEAN);
    let text = run.read(&path)?;
    read_clean_entries(text.as_bytes()).at(&path)
}

fn read_catalog(run: &mut Run, config: &PipelineConfig, pre: &Preprocessor) -> CliResult<ParameterCatalog> {
    let path = require(config.paths.catalog.as_deref(), "catalog")?;
    run.read(&path)?;
    ParameterCatalog::read_tsv(&path, pre).at(&path)
}

fn read_article(run: &mut Run, config: &PipelineConfig, pre: &Preprocessor) -> CliResult<Vec<String>> {
    let path = require(config.paths.article.as_deref(), "article")?;
    let tokens = pre.tokenize(&run.read(&path)?);
    if tokens.is_empty() {
        return Err(CliError::Data(format!(
            "article {} has no tokens",
            path.display()
        )));
    }
    Ok(tokens)
}

fn put_network(run: &mut Run, stem: &str, net: &Network64) -> CliResult<()> {
    write_adjacency_csv(net, run.file(format!("networks/{stem}.csv")))?;
    write_graphml(net, run.file(format!("networks/{stem}.graphml")))?;
    write_dot(net, run.file(format!("networks/{stem}.dot")))?;
    Ok(())
}

fn put_cohorts(run: &mut Run, cohorts: &[Cohort]) -> CliResult<()> {
    let mut table = String::from("network,kind,period,entries,included\n");
    let mut members = Vec::new();
    for c in cohorts {
        put_network(run, &c.name, &c.network)?;
        let kind = match c.kind {
            CohortKind::All => "all",
            CohortKind::Period => "period",
            CohortKind::Group => "group",
        };
        let period = c.period.map(|p| p.to_string()).unwrap_or_default();
        table.push_str(&format!(
            "{},{kind},{period},{},{}\n",
            c.name,
            c.tag_sets.len(),
            c.included
        ));
        let m = Members {
            network: c.name.clone(),
            tag_sets: c.tag_sets.clone(),
        };
        serde_json::to_writer(&mut members, &m).expect("members serialize");
        members.push(b'\n');
    }
    run.put(COHORTS, table.into_bytes());
    run.put(MEMBERS, members);
    Ok(())
}

fn synth(run: &mut Run, config: &PipelineConfig, networks: bool) -> CliResult<()> {
    let s = &config.synth;
    let model = s.model();
    model.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    let catalog = model_catalog(&model);
    let labels = catalog.names();
    write_partition_csv(&model.base.partition(), &labels, run.file("synth/partition.csv"))?;
    if networks {
        let cohorts = (0..model.periods)
            .map(|p| {
                let tag_sets = sample_tag_sets(&model, p, config.seed)?;
                Ok(Cohort {
                    name: period_name(p),
                    kind: CohortKind::Period,
                    period: Some(p),
                    included: true,
                    network: sum_networks(&tag_sets, labels.clone())?,
                    tag_sets,
                })
            })
            .collect::<CliResult<Vec<_>>>()?;
        return put_cohorts(run, &cohorts);
    }
    let corpus = generate_corpus(
        &model,
        &s.corpus_options(config.cohort.bin_width_years),
        config.seed,
    )
    .map_err(|e| CliError::Usage(e.to_string()))?;
    let entries = run.file("synth/entries.jsonl");
    for e in &corpus.entries {
        writeln!(entries, "{}", e.to_record_line())?;
    }
    corpus.write_truth_csv(run.file("synth/truth.csv"))?;
    run.put("synth/article.txt", corpus.article.clone().into_bytes());
    for (rel, text) in corpus.catalog.tsv_files() {
        run.put(Path::new("synth/catalog").join(rel), text.into_bytes());
    }
    // Config for running the rest of the pipeline on the generated files.
    let mut next = config.clone();
    let root = &config.paths.output;
    next.paths.corpus = Some(root.join("synth/entries.jsonl"));
    next.paths.article = Some(root.join("synth/article.txt"));
    next.paths.catalog = Some(root.join("synth/catalog/catalog.tsv"));
    next.model.k_topics = next.model.k_topics.min(SYNTH_TOPICS);
    run.put("synth/pipeline.toml", next.to_toml().into_bytes());
    log::info!("generated {} entries", corpus.entries.len());
    Ok(())
}

fn ingest(run: &mut Run, config: &PipelineConfig) -> CliResult<()> {
    let path = require(config.paths.corpus.as_deref(), "corpus")?;
    let pre = preprocessor(config)?;
    let text = run.read(&path)?;
    let out = stages::ingest(&text, &pre)?;
    log::info!(
        "{} entries kept, {} dropped, {} rejected",
        out.clean.len(),
        out.dropped.len(),
        out.rejects.len()
    );
    write_clean_entries(run.file(CLEAN), &out.clean)?;
    write_rejects(run.file("corpus/rejects.jsonl"), &out.rejects)?;
    let mut dropped = String::from("entry_id,reason\n");
    for (id, reason) in &out.dropped {
        dropped.push_str(&format!("{},{reason}\n", tasknet::netbuild::csv_field(id)));
    }
    run.put("corpus/dropped.csv", dropped.into_bytes());
    let mut periods = String::from("period,entries,included\n");
    for b in bin_by_period(&out.clean, &config.cohort) {
        periods.push_str(&format!("{},{},{}\n", b.index, b.entries.len(), b.included));
    }
    run.put("corpus/periods.csv", periods.into_bytes());
    let groups = group_by_expertise(&out.clean, &config.cohort);
    let mut table = String::from("group,entries\n");
    for g in ExpertiseGroup::ALL {
        table.push_str(&format!("{},{}\n", g.name(), groups.get(g).len()));
    }
    run.put("corpus/groups.csv", table.into_bytes());
    Ok(())
}

fn model(run: &mut Run, config: &PipelineConfig) -> CliResult<()> {
    let pre = preprocessor(config)?;
    let article = read_article(run, config, &pre)?;
    let clean = read_clean(run)?;
    let space = stages::fit_model(&clean, &article, config)?;
    space.vocabulary.write(run.file(VOCABULARY))?;
    space.factors.write(run.file(FACTORS))?;
    let mut sv = String::from("topic,singular_value\n");
    for (i, s) in space.factors.s.iter().enumerate() {
        sv.push_str(&format!("{i},{}\n", format_real(*s)));
    }
    run.put("model/singular_values.csv", sv.into_bytes());
    log::info!(
        "{} terms, {} documents, {} topics",
        space.vocabulary.len(),
        space.factors.n_documents(),
        space.factors.k()
    );
    Ok(())
}

fn read_space(run: &mut Run, config: &PipelineConfig) -> CliResult<TopicSpace<f64>> {
    let vpath = intermediate(run, VOCABULARY);
    let vocab = Vocabulary::read(run.read(&vpath)?.as_bytes()).at(&vpath)?;
    let fpath = intermediate(run, FACTORS);
    let factors = SvdFactors::<f64>::read(&run.read_bytes(&fpath)?[..]).at(&fpath)?;
    Ok(TopicSpace::new(vocab, factors)?.with_weighting(config.model.weighting))
}

fn filter(run: &mut Run, config: &PipelineConfig) -> CliResult<()> {
    let pre = preprocessor(config)?;
    let catalog = read_catalog(run, config, &pre)?;
    let article = read_article(run, config, &pre)?;
    let clean = read_clean(run)?;
    let space = read_space(run, config)?;
    let (scores, tagged) = stages::filter(&clean, &article, &space, &catalog, config)?;
    log::info!("{} of {} entries relevant", tagged.len(), clean.len());
    write_tagged(run.file(TAGGED), &tagged)?;
    let mut table = String::from("entry_id,relevance,relevant\n");
    for (e, s) in clean.iter().zip(&scores) {
        let relevant = *s >= config.relevance.threshold;
        table.push_str(&format!(
            "{},{},{relevant}\n",
            tasknet::netbuild::csv_field(&e.id),
            format_real(*s)
        ));
    }
    run.put("filter/relevance.csv", table.into_bytes());
    Ok(())
}

fn read_tagged_entries(run: &mut Run) -> CliResult<Vec<TaggedEntry>> {
    let path = intermediate(run, TAGGED);
    let text = run.read(&path)?;
    read_tagged(text.as_bytes()).at(&path)
}

fn build(run: &mut Run, config: &PipelineConfig) -> CliResult<()> {
    let pre = preprocessor(config)?;
    let catalog = read_catalog(run, config, &pre)?;
    let clean = read_clean(run)?;
    let tagged = read_tagged_entries(run)?;
    let cohorts = stages::build(&clean, &tagged, &catalog, &config.cohort)?;
    put_cohorts(run, &cohorts)
}

struct CohortRow {
    network: String,
    period: Option<usize>,
    included: bool,
}

fn read_cohorts(run: &mut Run) -> CliResult<Vec<CohortRow>> {
    let path = intermediate(run, COHORTS);
    let text = run.read(&path)?;
    text.lines()
        .skip(1)
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            let f = split_csv_line(l);
            if f.len() != 5 {
                return Err(CliError::Data(format!("{}: malformed row {l:?}", path.display())));
            }
            Ok(CohortRow {
                network: f[0].clone(),
                period: f[2].parse().ok(),
                included: f[4] == "true",
            })
        })
        .collect()
}

fn read_network(run: &mut Run, path: &Path) -> CliResult<Network64> {
    let text = run.read(path)?;
    read_adjacency_csv(text.as_bytes()).at(path)
}

fn analyze(run: &mut Run, config: &PipelineConfig, paths: &[PathBuf]) -> CliResult<()> {
    let pre = preprocessor(config)?;
    let catalog = read_catalog(run, config, &pre)?;
    let targets: Vec<(String, PathBuf)> = if paths.is_empty() {
        read_cohorts(run)?
            .into_iter()
            .filter(|c| c.included)
            .map(|c| {
                let p = intermediate(run, &format!("networks/{}.csv", c.network));
                (c.network, p)
            })
            .collect()
    } else {
        for p in paths {
            require(Some(p), "network")?;
        }
        paths
            .iter()
            .map(|p| {
                let stem = p
                    .file_stem()
                    .map(|s| s.to_string_lossy().into_owned())
                    .unwrap_or_default();
                (stem, p.clone())
            })
            .collect()
    };
    let members: BTreeMap<String, Members> = {
        let path = intermediate(run, MEMBERS);
        if config.change.bootstrap_resamples > 0 && path.exists() {
            run.read(&path)?
                .lines()
                .filter(|l| !l.trim().is_empty())
                .map(|l| {
                    serde_json::from_str::<Members>(l)
                        .map(|m| (m.network.clone(), m))
                        .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
                })
                .collect::<CliResult<_>>()?
        } else {
            BTreeMap::new()
        }
    };
    let names = catalog.names();
    let mut index = String::from("network,status,communities,modularity,spectral_communities,spectral_modularity,out_in_weight_ratio\n");
    for (name, path) in &targets {
        let net = read_network(run, path)?;
        if net.labels() != names.as_slice() {
            return Err(CliError::Data(format!(
                "{}: node labels do not match the catalog",
                path.display()
            )));
        }
        if net.total_weight() <= 0.0 {
            log::warn!("skipping {name}: no edges");
            index.push_str(&format!("{name},no_edges,,,,,\n"));
            continue;
        }
        let a = stages::analyze(name, &net, config)?;
        for (file, bytes) in a.files {
            run.put(format!("analysis/{name}/{file}"), bytes);
        }
        if let Some(m) = members.get(name) {
            let opts = config.bootstrap();
            let louvain_opts = config.louvain();
            let stat = |net: &Network64| modularity(net, &louvain(net, &louvain_opts));
            match bootstrap_stability(&m.tag_sets, &names, stat, &opts) {
                Ok(report) => {
                    let text = format!(
                        "statistic = louvain_modularity\nresamples = {}\n{report}",
                        opts.n_resamples
                    );
                    run.put(format!("analysis/{name}/bootstrap.txt"), text.into_bytes());
                }
                Err(e) if e.is_numerical() => log::warn!("{name}: bootstrap failed: {e}"),
                Err(e) => return Err(e.into()),
            }
        }
        let s = &a.summary;
        let opt = |x: Option<String>| x.unwrap_or_default();
        index.push_str(&format!(
            "{name},ok,{},{},{},{},{}\n",
            s.louvain.communities,
            format_real(s.louvain.modularity),
            opt(s.spectral.as_ref().map(|c| c.communities.to_string())),
            opt(s.spectral.as_ref().map(|c| format_real(c.modularity))),
            opt(s.out_in_weight_ratio.map(format_real)),
        ));
        log::info!(
            "{name}: {} communities, modularity {:.4}",
            s.louvain.communities,
            s.louvain.modularity
        );
    }
    run.put("analysis/index.csv", index.into_bytes());
    Ok(())
}

fn compare(run: &mut Run, config: &PipelineConfig, a: &Path, b: &Path) -> CliResult<()> {
    require(Some(a), "network")?;
    require(Some(b), "network")?;
    let (na, nb) = (read_network(run, a)?, read_network(run, b)?);
    let stem = |p: &Path| {
        p.file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default()
    };
    let bytes = stages::compare(&na, &nb, config)?;
    run.put(format!("compare/{}__{}.csv", stem(a), stem(b)), bytes);
    Ok(())
}

fn series(run: &mut Run, config: &PipelineConfig) -> CliResult<()> {
    let mut rows: Vec<(usize, String)> = read_cohorts(run)?
        .into_iter()
        .filter(|c| c.included)
        .filter_map(|c| c.period.map(|p| (p, c.network)))
        .collect();
    rows.sort();
    let mut periods = Vec::new();
    for (p, name) in rows {
        let path = intermediate(run, &format!("networks/{name}.csv"));
        periods.push((p, read_network(run, &path)?));
    }
    let s = stages::series(&periods, config)?;
    s.write_csv(run.file("series/series.csv"))?;
    s.write_similarity_csv(run.file("series/series_similarity.csv"))?;
    Ok(())
}

#[derive(Serialize)]
struct Check {
    name: String,
    observed: f64,
    target: f64,
    tolerance: f64,
    within: bool,
}

#[derive(Serialize)]
struct Reproduction {
    entries_kept: usize,
    relevant_entries: usize,
    checks: Vec<Check>,
    group_ratios_increasing: bool,
}

fn check(name: &str, observed: f64, target: f64, tolerance: f64) -> Check {
    Check {
        name: name.to_string(),
        observed,
        target,
        tolerance,
        within: (observed - target).abs() <= tolerance,
    }
}

/// Runs every stage on the configured dataset and compares the headline
/// figures with the published ones. Deviations are reported, not failed.
fn reproduce(run: &mut Run, config: &PipelineConfig) -> CliResult<()> {
    let corpus = require(config.paths.corpus.as_deref(), "corpus")?;
    let pre = preprocessor(config)?;
    let catalog = read_catalog(run, config, &pre)?;
    let article = read_article(run, config, &pre)?;
    let text = run.read(&corpus)?;
    let ingested = stages::ingest(&text, &pre)?;
    let space = stages::fit_model(&ingested.clean, &article, config)?;
    let (_, tagged) = stages::filter(&ingested.clean, &article, &space, &catalog, config)?;
    let cohorts = stages::build(&ingested.clean, &tagged, &catalog, &config.cohort)?;

    let mut checks = vec![check(
        "relevant_entries",
        tagged.len() as f64,
        2088.0,
        0.15 * 2088.0,
    )];
    let mut ratios = Vec::new();
    let targets = [("novice", 0.27), ("intermediate", 0.31), ("expert", 0.43)];
    for c in &cohorts {
        if c.network.total_weight() <= 0.0 {
            continue;
        }
        let a = stages::analyze(&c.name, &c.network, config)?;
        for (file, bytes) in a.files {
            run.put(format!("reproduce/analysis/{}/{file}", c.name), bytes);
        }
        let s = a.summary;
        if c.kind == CohortKind::All {
            checks.push(check("all_louvain_modularity", s.louvain.modularity, 0.34, 0.04));
            if let Some(sp) = &s.spectral {
                checks.push(check("all_spectral_modularity", sp.modularity, 0.338, 0.04));
            }
        }
        if let Some((_, t)) = targets.iter().find(|(g, _)| *g == c.name) {
            checks.push(check(
                &format!("{}_communities", c.name),
                s.louvain.communities as f64,
                3.0,
                0.0,
            ));
            if let Some(r) = s.out_in_weight_ratio {
                checks.push(check(&format!("{}_out_in_weight_ratio", c.name), r, *t, 0.05));
                ratios.push(r);
            }
        }
    }
    let report = Reproduction {
        entries_kept: ingested.clean.len(),
        relevant_entries: tagged.len(),
        group_ratios_increasing: ratios.len() == 3 && ratios.windows(2).all(|w| w[0] < w[1]),
        checks,
    };
    for c in &report.checks {
        let verdict = if c.within { "within" } else { "DEVIATES" };
        log::info!(
            "{}: observed {} target {} ± {} {verdict}",
            c.name,
            c.observed,
            c.target,
            c.tolerance
        );
    }
    run.put(
        "reproduce/report.toml",
        toml::to_string(&report).expect("report serializes").into_bytes(),
    );
    Ok(())
}
