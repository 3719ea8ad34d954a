//! Log-entry ingestion: parsing, text cleaning, author experience and
//! cohort binning.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt;
use std::io::{BufRead, Write};

use chrono::{DateTime, NaiveDateTime, SecondsFormat, TimeZone, Utc};
use rayon::prelude::*;
use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Seconds in a year of 365.25 days.
pub const SECONDS_PER_YEAR: f64 = 365.25 * 86_400.0;

/// URLs: an explicit scheme or a `www.` prefix, up to the next whitespace.
pub const URL_PATTERN: &str = r"(?i)\b(?:[a-z][a-z0-9+.\-]*://|www\.)\S+";
/// E-mail addresses: `local@domain.tld`.
pub const EMAIL_PATTERN: &str = r"(?i)\b[a-z0-9._%+\-]+@[a-z0-9\-]+(?:\.[a-z0-9\-]+)+\b";
/// Stand-alone numbers, including decimals, digit grouping and exponents.
/// Identifiers mixing letters and digits (`qa01`, `21q201`) do not match.
pub const NUMBER_PATTERN: &str = r"\b\d+(?:[.,]\d+)*(?:[eE][+\-]?\d+)?\b";

const DEFAULT_STOPWORDS: &str = include_str!("../data/stopwords_en.txt");

/// The shipped English stopword list.
pub fn default_stopwords() -> BTreeSet<String> {
    DEFAULT_STOPWORDS
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(str::to_owned)
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawEntry {
    pub id: String,
    pub author: String,
    /// UTC seconds since the epoch.
    pub timestamp: i64,
    pub title: String,
    pub body: String,
    pub tags: Vec<String>,
    pub predecessor_ref: Option<String>,
}

/// Line-delimited wire form of a [`RawEntry`]; the timestamp is ISO-8601.
#[derive(Debug, Serialize, Deserialize)]
struct RawRecord {
    id: String,
    author: String,
    timestamp: String,
    #[serde(default)]
    title: String,
    #[serde(default)]
    body: String,
    #[serde(default)]
    tags: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    predecessor_ref: Option<String>,
}

impl RawEntry {
    /// Serializes to one line of the ingestion format (no trailing newline).
    pub fn to_record_line(&self) -> String {
        let record = RawRecord {
            id: self.id.clone(),
            author: self.author.clone(),
            timestamp: format_timestamp(self.timestamp),
            title: self.title.clone(),
            body: self.body.clone(),
            tags: self.tags.clone(),
            predecessor_ref: self.predecessor_ref.clone(),
        };
        serde_json::to_string(&record).expect("raw record serializes")
    }
}

pub fn format_timestamp(secs: i64) -> String {
    Utc.timestamp_opt(secs, 0)
        .single()
        .map(|t| t.to_rfc3339_opts(SecondsFormat::Secs, true))
        .unwrap_or_else(|| secs.to_string())
}

/// Parses RFC 3339 timestamps, or naive `YYYY-MM-DD[T ]HH:MM:SS` taken as UTC.
pub fn parse_timestamp(text: &str) -> Option<i64> {
    let text = text.trim();
    if let Ok(t) = DateTime::parse_from_rfc3339(text) {
        return Some(t.timestamp());
    }
    ["%Y-%m-%dT%H:%M:%S", "%Y-%m-%d %H:%M:%S", "%Y-%m-%dT%H:%M:%S%.f"]
        .iter()
        .find_map(|fmt| NaiveDateTime::parse_from_str(text, fmt).ok())
        .map(|t| t.and_utc().timestamp())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Reject {
    pub line_no: usize,
    pub reason: String,
}

#[derive(Debug, Default)]
pub struct ParseOutcome {
    pub entries: Vec<RawEntry>,
    pub rejects: Vec<Reject>,
}

/// Reads one JSON record per line. Blank lines are skipped; malformed lines
/// are reported in `rejects` (1-based line numbers) and parsing continues.
pub fn parse_entries<R: BufRead>(reader: R) -> Result<ParseOutcome> {
    let mut out = ParseOutcome::default();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        match parse_line(&line) {
            Ok(entry) => out.entries.push(entry),
            Err(reason) => out.rejects.push(Reject {
                line_no: i + 1,
                reason,
            }),
        }
    }
    Ok(out)
}

fn parse_line(line: &str) -> std::result::Result<RawEntry, String> {
    let record: RawRecord = serde_json::from_str(line).map_err(|e| e.to_string())?;
    if record.id.trim().is_empty() {
        return Err("empty id".into());
    }
    let timestamp = parse_timestamp(&record.timestamp)
        .ok_or_else(|| format!("unparseable timestamp {:?}", record.timestamp))?;
    if timestamp <= 0 {
        return Err(format!("timestamp {timestamp} is not positive"));
    }
    Ok(RawEntry {
        id: record.id,
        author: record.author,
        timestamp,
        title: record.title,
        body: record.body,
        tags: record.tags,
        predecessor_ref: record.predecessor_ref,
    })
}

pub fn write_rejects<W: Write>(mut w: W, rejects: &[Reject]) -> Result<()> {
    for r in rejects {
        writeln!(w, "{}", serde_json::to_string(r).expect("reject serializes"))?;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CleanEntry {
    pub id: String,
    pub author: String,
    pub timestamp: i64,
    pub tokens: Vec<String>,
    #[serde(default)]
    pub experience_years: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PreprocessConfig {
    pub min_tokens: usize,
    pub machine_authors: BTreeSet<String>,
    pub excluded_tags: BTreeSet<String>,
    pub stopword_list: BTreeSet<String>,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        Self {
            min_tokens: 10,
            machine_authors: BTreeSet::new(),
            excluded_tags: BTreeSet::new(),
            stopword_list: default_stopwords(),
        }
    }
}

impl PreprocessConfig {
    pub fn validate(&self) -> Result<()> {
        if self.min_tokens < 1 {
            return Err(Error::invalid("min_tokens must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DropReason {
    MachineAuthor,
    DuplicateId,
    TooShort,
    ExcludedTag,
}

impl fmt::Display for DropReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            DropReason::MachineAuthor => "machine_author",
            DropReason::DuplicateId => "duplicate_id",
            DropReason::TooShort => "too_short",
            DropReason::ExcludedTag => "excluded_tag",
        };
        f.write_str(s)
    }
}

/// Regex-based cleaner: strips URLs, e-mail addresses, numbers and
/// punctuation, lowercases, splits on whitespace and removes stopwords.
#[derive(Debug, Clone)]
pub struct TextCleaner {
    url: Regex,
    email: Regex,
    number: Regex,
}

impl Default for TextCleaner {
    fn default() -> Self {
        Self {
            url: Regex::new(URL_PATTERN).expect("url pattern compiles"),
            email: Regex::new(EMAIL_PATTERN).expect("email pattern compiles"),
            number: Regex::new(NUMBER_PATTERN).expect("number pattern compiles"),
        }
    }
}

impl TextCleaner {
    pub fn tokens(&self, text: &str, stopwords: &BTreeSet<String>) -> Vec<String> {
        let text = self.url.replace_all(text, " ");
        let text = self.email.replace_all(&text, " ");
        let text = self.number.replace_all(&text, " ");
        let lowered: String = text
            .chars()
            .map(|c| if c.is_alphanumeric() { c } else { ' ' })
            .flat_map(char::to_lowercase)
            .collect();
        lowered
            .split_whitespace()
            .filter(|t| !t.chars().all(|c| c.is_numeric()))
            .filter(|t| !stopwords.contains(*t))
            .map(str::to_owned)
            .collect()
    }
}

#[derive(Debug, Clone)]
pub struct Preprocessor {
    config: PreprocessConfig,
    cleaner: TextCleaner,
}

#[derive(Debug, Default)]
pub struct PreprocessOutcome {
    pub kept: Vec<CleanEntry>,
    pub dropped: Vec<(String, DropReason)>,
}

impl Preprocessor {
    pub fn new(config: PreprocessConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            config,
            cleaner: TextCleaner::default(),
        })
    }

    pub fn config(&self) -> &PreprocessConfig {
        &self.config
    }

    /// Cleans one entry. Duplicate ids are only detectable across entries, see
    /// [`Preprocessor::preprocess_all`].
    pub fn preprocess(&self, raw: &RawEntry) -> std::result::Result<CleanEntry, DropReason> {
        if self.config.machine_authors.contains(&raw.author) {
            return Err(DropReason::MachineAuthor);
        }
        if raw.tags.iter().any(|t| self.config.excluded_tags.contains(t)) {
            return Err(DropReason::ExcludedTag);
        }
        let text = format!("{}\n{}", raw.title, raw.body);
        let tokens = self.cleaner.tokens(&text, &self.config.stopword_list);
        if tokens.len() < self.config.min_tokens {
            return Err(DropReason::TooShort);
        }
        Ok(CleanEntry {
            id: raw.id.clone(),
            author: raw.author.clone(),
            timestamp: raw.timestamp,
            tokens,
            experience_years: 0.0,
        })
    }

    /// Tokenizes free text (e.g. reference documents) with the same rules.
    pub fn tokenize(&self, text: &str) -> Vec<String> {
        self.cleaner.tokens(text, &self.config.stopword_list)
    }

    /// Cleans every entry in parallel, then drops repeated ids in one
    /// sequential pass (the first occurrence in input order wins).
    pub fn preprocess_all(&self, raws: &[RawEntry]) -> PreprocessOutcome {
        let results: Vec<_> = raws.par_iter().map(|r| self.preprocess(r)).collect();
        let mut seen = HashSet::new();
        let mut out = PreprocessOutcome::default();
        for (raw, result) in raws.iter().zip(results) {
            if !seen.insert(raw.id.as_str()) {
                out.dropped.push((raw.id.clone(), DropReason::DuplicateId));
                continue;
            }
            match result {
                Ok(clean) => out.kept.push(clean),
                Err(reason) => out.dropped.push((raw.id.clone(), reason)),
            }
        }
        out
    }
}

/// One-shot convenience around [`Preprocessor::preprocess`].
pub fn preprocess(
    raw: &RawEntry,
    config: &PreprocessConfig,
) -> Result<std::result::Result<CleanEntry, DropReason>> {
    Ok(Preprocessor::new(config.clone())?.preprocess(raw))
}

/// Sets `experience_years` to the time since each author's earliest entry.
pub fn compute_experience(entries: &mut [CleanEntry]) {
    let mut first: HashMap<&str, i64> = HashMap::new();
    for e in entries.iter() {
        first
            .entry(e.author.as_str())
            .and_modify(|t| *t = (*t).min(e.timestamp))
            .or_insert(e.timestamp);
    }
    let first: HashMap<String, i64> = first.into_iter().map(|(k, v)| (k.to_owned(), v)).collect();
    for e in entries.iter_mut() {
        let start = first[&e.author];
        e.experience_years = (e.timestamp - start) as f64 / SECONDS_PER_YEAR;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CohortSpec {
    pub bin_width_years: f64,
    pub min_entries_per_bin: usize,
    pub group_cuts_years: (f64, f64),
}

impl Default for CohortSpec {
    fn default() -> Self {
        Self {
            bin_width_years: 0.5,
            min_entries_per_bin: 50,
            group_cuts_years: (1.0, 4.0),
        }
    }
}

impl CohortSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.bin_width_years > 0.0) {
            return Err(Error::invalid("bin_width_years must be positive"));
        }
        let (a, b) = self.group_cuts_years;
        if !(a < b) {
            return Err(Error::invalid("group_cuts_years must be strictly increasing"));
        }
        Ok(())
    }

    pub fn period_of(&self, experience_years: f64) -> usize {
        (experience_years / self.bin_width_years).floor().max(0.0) as usize
    }

    pub fn group_of(&self, experience_years: f64) -> ExpertiseGroup {
        let (novice_max, expert_min) = self.group_cuts_years;
        if experience_years <= novice_max {
            ExpertiseGroup::Novice
        } else if experience_years >= expert_min {
            ExpertiseGroup::Expert
        } else {
            ExpertiseGroup::Intermediate
        }
    }
}

/// Entries (as indices into the binned slice) sharing one experience period.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PeriodBin {
    pub index: usize,
    pub entries: Vec<usize>,
    pub included: bool,
}

/// Bins entries by `floor(experience / bin_width)`. Bins are contiguous from
/// 0 to the last occupied period; empty or small bins are flagged excluded.
pub fn bin_by_period(entries: &[CleanEntry], spec: &CohortSpec) -> Vec<PeriodBin> {
    let mut bins: Vec<PeriodBin> = Vec::new();
    for (i, e) in entries.iter().enumerate() {
        let p = spec.period_of(e.experience_years);
        while bins.len() <= p {
            bins.push(PeriodBin {
                index: bins.len(),
                entries: Vec::new(),
                included: false,
            });
        }
        bins[p].entries.push(i);
    }
    for b in &mut bins {
        b.included = b.entries.len() >= spec.min_entries_per_bin && !b.entries.is_empty();
    }
    bins
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExpertiseGroup {
    Novice,
    Intermediate,
    Expert,
}

impl ExpertiseGroup {
    pub const ALL: [ExpertiseGroup; 3] = [
        ExpertiseGroup::Novice,
        ExpertiseGroup::Intermediate,
        ExpertiseGroup::Expert,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ExpertiseGroup::Novice => "novice",
            ExpertiseGroup::Intermediate => "intermediate",
            ExpertiseGroup::Expert => "expert",
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ExpertiseGroups {
    pub novice: Vec<usize>,
    pub intermediate: Vec<usize>,
    pub expert: Vec<usize>,
}

impl ExpertiseGroups {
    pub fn get(&self, g: ExpertiseGroup) -> &[usize] {
        match g {
            ExpertiseGroup::Novice => &self.novice,
            ExpertiseGroup::Intermediate => &self.intermediate,
            ExpertiseGroup::Expert => &self.expert,
        }
    }
}

/// Splits entries into novice (`e <= cut1`), intermediate and expert
/// (`e >= cut2`) index sets.
pub fn group_by_expertise(entries: &[CleanEntry], spec: &CohortSpec) -> ExpertiseGroups {
    let mut groups = ExpertiseGroups::default();
    for (i, e) in entries.iter().enumerate() {
        match spec.group_of(e.experience_years) {
            ExpertiseGroup::Novice => groups.novice.push(i),
            ExpertiseGroup::Intermediate => groups.intermediate.push(i),
            ExpertiseGroup::Expert => groups.expert.push(i),
        }
    }
    groups
}

pub fn read_clean_entries<R: BufRead>(reader: R) -> Result<Vec<CleanEntry>> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let e: CleanEntry = serde_json::from_str(&line).map_err(|e| Error::Parse {
            line: i + 1,
            reason: e.to_string(),
        })?;
        out.push(e);
    }
    Ok(out)
}

pub fn write_clean_entries<W: Write>(mut w: W, entries: &[CleanEntry]) -> Result<()> {
    for e in entries {
        writeln!(w, "{}", serde_json::to_string(e).expect("clean entry serializes"))?;
    }
    Ok(())
}
