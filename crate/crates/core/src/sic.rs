//! Similar-issue retrieval: issue text, embeddings, filtered cosine search and cues.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;
use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::domain::{CategoricalFilters, Issue, IssueStore};
use crate::error::{Error, Result};
use crate::index::tokenize_identifiers;

/// Default number of similar issues retrieved.
pub const DEFAULT_K: usize = 5;

/// Which issue text is embedded.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum SicMode {
    /// Title and description as written.
    Embed,
    /// A normalized summary of every populated field.
    Summ,
}

impl fmt::Display for SicMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SicMode::Embed => "EMBED",
            SicMode::Summ => "SUMM",
        })
    }
}

impl FromStr for SicMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "embed" => Ok(SicMode::Embed),
            "summ" | "summary" => Ok(SicMode::Summ),
            _ => Err(Error::Config(format!("unknown retrieval mode {s:?}"))),
        }
    }
}

/// Deterministic text → unit vector mapping of fixed dimension.
pub trait Embedder: Send + Sync {
    fn dimension(&self) -> usize;
    /// Identifies the embedding function; indexes refuse queries from a different one.
    fn fingerprint(&self) -> String;
    fn embed(&self, text: &str) -> Vec<f64>;
}

pub trait Summarizer: Send + Sync {
    fn summarize(&self, issue: &Issue) -> String;
}

/// Hashed bag of identifier subtokens, term-frequency weighted and L2-normalized.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HashedEmbedder {
    dimension: usize,
}

impl HashedEmbedder {
    pub fn new(dimension: usize) -> Self {
        assert!(dimension > 0, "embedding dimension must be positive");
        Self { dimension }
    }
}

impl Default for HashedEmbedder {
    fn default() -> Self {
        Self::new(256)
    }
}

fn fnv1a64(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xcbf2_9ce4_8422_2325, |h, &b| (h ^ u64::from(b)).wrapping_mul(0x0100_0000_01b3))
}

impl Embedder for HashedEmbedder {
    fn dimension(&self) -> usize {
        self.dimension
    }

    fn fingerprint(&self) -> String {
        format!("hashed-bow-fnv1a64-d{}", self.dimension)
    }

    fn embed(&self, text: &str) -> Vec<f64> {
        let mut v = vec![0.0; self.dimension];
        for token in tokenize_identifiers(text) {
            v[(fnv1a64(token.as_bytes()) % self.dimension as u64) as usize] += 1.0;
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 {
            v[0] = 1.0;
        } else {
            v.iter_mut().for_each(|x| *x /= norm);
        }
        v
    }
}

static HEX_ADDR: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"0x[0-9a-f]+").unwrap());
static LONG_NUM: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"[0-9]{5,}").unwrap());

/// Lowercases, collapses whitespace and masks addresses and long numbers.
pub fn normalize_text(text: &str) -> String {
    let lower = text.to_lowercase();
    let collapsed = lower.split_whitespace().collect::<Vec<_>>().join(" ");
    let masked = HEX_ADDR.replace_all(&collapsed, "<addr>");
    LONG_NUM.replace_all(&masked, "<num>").into_owned()
}

/// Offline summarizer: normalized fields in a fixed order.
#[derive(Debug, Clone, Copy, Default)]
pub struct NormalizingSummarizer;

impl Summarizer for NormalizingSummarizer {
    fn summarize(&self, issue: &Issue) -> String {
        let mut parts = vec![normalize_text(&issue.title), normalize_text(&issue.description)];
        let labeled: [(&str, Option<String>); 7] = [
            ("root cause", issue.root_cause.clone()),
            ("feature summary", issue.feature_summary.clone()),
            ("root cause category", issue.root_cause_category.clone()),
            ("product family", issue.product_family.clone()),
            ("product name", issue.product_name.clone()),
            ("priority", issue.priority.map(|p| p.to_string())),
            ("severity", issue.severity.map(|s| s.to_string())),
        ];
        for (label, value) in labeled {
            if let Some(v) = value.map(|v| normalize_text(&v)).filter(|v| !v.is_empty()) {
                parts.push(format!("{label}: {v}"));
            }
        }
        parts.retain(|p| !p.is_empty());
        parts.join("\n")
    }
}

pub fn build_issue_text(issue: &Issue, mode: SicMode, summarizer: &dyn Summarizer) -> String {
    match mode {
        SicMode::Embed => format!("{}\n{}", issue.title, issue.description),
        SicMode::Summ => summarizer.summarize(issue),
    }
}

/// Cosines equal to 12 decimal places rank as ties, so rounding noise cannot beat the id order.
fn tie_key(score: f64) -> i64 {
    (score * 1e12).round() as i64
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexEntry {
    pub issue_id: String,
    pub vector: Vec<f64>,
    pub filters: CategoricalFilters,
    pub mode: SicMode,
}

/// Embedded historical issues for one retrieval mode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IssueIndex {
    pub mode: SicMode,
    pub dimension: usize,
    pub embedder_fingerprint: String,
    pub entries: Vec<IndexEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub snapshot_id: Option<String>,
}

pub fn index_issues(
    issues: &[Issue],
    mode: SicMode,
    embedder: &dyn Embedder,
    summarizer: &dyn Summarizer,
) -> Result<IssueIndex> {
    let mut seen = std::collections::HashSet::new();
    let mut entries = Vec::with_capacity(issues.len());
    for issue in issues {
        if !seen.insert(issue.id.as_str()) {
            return Err(Error::DuplicateIssueId(issue.id.clone()));
        }
        let vector = embedder.embed(&build_issue_text(issue, mode, summarizer));
        if vector.len() != embedder.dimension() {
            return Err(Error::DimensionMismatch { expected: embedder.dimension(), actual: vector.len() });
        }
        entries.push(IndexEntry { issue_id: issue.id.clone(), vector, filters: issue.filters(), mode });
    }
    entries.sort_by(|a, b| a.issue_id.cmp(&b.issue_id));
    Ok(IssueIndex {
        mode,
        dimension: embedder.dimension(),
        embedder_fingerprint: embedder.fingerprint(),
        entries,
        snapshot_id: None,
    })
}

impl IssueIndex {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn check_embedder(&self, embedder: &dyn Embedder) -> Result<()> {
        if embedder.fingerprint() != self.embedder_fingerprint {
            return Err(Error::FingerprintMismatch {
                index: self.embedder_fingerprint.clone(),
                query: embedder.fingerprint(),
            });
        }
        if embedder.dimension() != self.dimension {
            return Err(Error::DimensionMismatch { expected: self.dimension, actual: embedder.dimension() });
        }
        Ok(())
    }

    /// Top `k` entries sharing all three filters with `query`, by cosine then id.
    pub fn retrieve(
        &self,
        query: &Issue,
        k: usize,
        embedder: &dyn Embedder,
        summarizer: &dyn Summarizer,
    ) -> Result<Vec<(String, f64)>> {
        self.check_embedder(embedder)?;
        let vector = embedder.embed(&build_issue_text(query, self.mode, summarizer));
        Ok(self.search(&vector, &query.filters(), Some(&query.id), k))
    }

    /// Exact scan over entries matching `filters`, skipping `exclude`.
    pub fn search(
        &self,
        vector: &[f64],
        filters: &CategoricalFilters,
        exclude: Option<&str>,
        k: usize,
    ) -> Vec<(String, f64)> {
        let mut hits: Vec<(String, f64)> = self
            .entries
            .iter()
            .filter(|e| &e.filters == filters && Some(e.issue_id.as_str()) != exclude)
            .map(|e| (e.issue_id.clone(), dot(&e.vector, vector)))
            .collect();
        hits.sort_by(|a, b| tie_key(b.1).cmp(&tie_key(a.1)).then_with(|| a.0.cmp(&b.0)));
        hits.truncate(k);
        hits
    }

    pub fn to_json(&self) -> String {
        let mut out = serde_json::to_string_pretty(self).expect("index serializes");
        out.push('\n');
        out
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let idx: Self =
            serde_json::from_str(text).map_err(|source| Error::Json { context: "issue index".into(), source })?;
        if let Some(e) = idx.entries.iter().find(|e| e.vector.len() != idx.dimension) {
            return Err(Error::DimensionMismatch { expected: idx.dimension, actual: e.vector.len() });
        }
        Ok(idx)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }

    /// Loads an index and checks it was built with `embedder`.
    pub fn load(path: &Path, embedder: &dyn Embedder) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let idx = Self::from_json(&text)?;
        idx.check_embedder(embedder)?;
        Ok(idx)
    }
}

/// What the retrieved issues say about where to look.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SicCue {
    pub similar_issues: Vec<(String, f64)>,
    /// Counts are summed over retrieved issues.
    pub candidate_components: BTreeMap<String, usize>,
    pub candidate_directories: BTreeMap<String, usize>,
    pub candidate_files: BTreeMap<String, usize>,
    pub summaries: Vec<String>,
}

impl SicCue {
    pub fn is_empty(&self) -> bool {
        self.candidate_files.is_empty()
    }
}

/// Expands the changed files of retrieved issues into component, directory and file counts.
///
/// A path listed twice by the same issue counts once for that issue.
pub fn extract_cues(retrieved: &[(String, f64)], store: &IssueStore, summarizer: &dyn Summarizer) -> Result<SicCue> {
    let mut cue = SicCue { similar_issues: retrieved.to_vec(), ..SicCue::default() };
    for (id, _) in retrieved {
        let issue = store.get(id).ok_or_else(|| Error::UnknownIssue(id.clone()))?;
        let mut components = std::collections::BTreeSet::new();
        let mut dirs = std::collections::BTreeSet::new();
        let mut files = std::collections::BTreeSet::new();
        for path in &issue.changed_files {
            components.insert(path.component().to_string());
            dirs.extend(path.directory_prefixes());
            files.insert(path.to_string());
        }
        for c in components {
            *cue.candidate_components.entry(c).or_default() += 1;
        }
        for d in dirs {
            *cue.candidate_directories.entry(d).or_default() += 1;
        }
        for f in files {
            *cue.candidate_files.entry(f).or_default() += 1;
        }
        cue.summaries.push(summarizer.summarize(issue));
    }
    Ok(cue)
}
