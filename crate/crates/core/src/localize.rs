//! Fixed localization policy: similar-issue cues narrow a BM25 search whose
//! top files are expanded one hop through the graph.
//!
//! Every tool invocation is appended to a ledger, which is the tool-call
//! count reported per result.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::Config;
use crate::domain::{path_has_prefix, EntityKind, Issue, IssueStore, RelationKind};
use crate::error::{Error, Result};
use crate::graph::{traverse, DependencyGraph, Direction};
use crate::index::{tokenize_identifiers, Bm25Index};
use crate::sic::{extract_cues, Embedder, IssueIndex, SicCue, Summarizer};

/// Which signals a run combines.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Variant {
    /// BM25 over the whole repository.
    CodeSearch,
    /// Similar-issue cues, then BM25 inside the cue scope.
    SicPlusCodeSearch,
    /// BM25 over the whole repository plus one-hop graph expansion.
    GraphOnly,
    /// Cues, scoped BM25 and graph expansion.
    Full,
}

impl Variant {
    pub const ALL: [Variant; 4] = [Variant::CodeSearch, Variant::SicPlusCodeSearch, Variant::GraphOnly, Variant::Full];

    pub fn uses_sic(self) -> bool {
        matches!(self, Variant::SicPlusCodeSearch | Variant::Full)
    }

    pub fn uses_graph(self) -> bool {
        matches!(self, Variant::GraphOnly | Variant::Full)
    }

    pub fn cli_name(self) -> &'static str {
        match self {
            Variant::CodeSearch => "code-search",
            Variant::SicPlusCodeSearch => "sic-code-search",
            Variant::GraphOnly => "graph-only",
            Variant::Full => "full",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Variant::CodeSearch => "CODE_SEARCH",
            Variant::SicPlusCodeSearch => "SIC_PLUS_CODE_SEARCH",
            Variant::GraphOnly => "GRAPH_ONLY",
            Variant::Full => "FULL",
        })
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.to_ascii_lowercase().replace('_', "-");
        Variant::ALL
            .into_iter()
            .find(|v| v.cli_name() == norm || v.to_string().to_ascii_lowercase().replace('_', "-") == norm)
            .ok_or_else(|| Error::Config(format!("unknown variant {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Tool {
    SicRetrieve,
    GraphFind,
    GraphTraverse,
    Bm25Query,
    ReadEntity,
}

impl Tool {
    pub fn name(self) -> &'static str {
        match self {
            Tool::SicRetrieve => "sic_retrieve",
            Tool::GraphFind => "graph_find",
            Tool::GraphTraverse => "graph_traverse",
            Tool::Bm25Query => "bm25_query",
            Tool::ReadEntity => "read_entity",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LedgerEntry {
    /// Position in the run; stands in for a wall-clock timestamp so runs are reproducible.
    pub seq: usize,
    pub tool: Tool,
    pub args_digest: String,
}

/// Ordered log of tool invocations for one run.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ToolLedger {
    entries: Vec<LedgerEntry>,
    counters: BTreeMap<Tool, usize>,
}

impl ToolLedger {
    pub fn record(&mut self, tool: Tool, args: &str) {
        let digest = hex::encode(&Sha256::digest(args.as_bytes())[..8]);
        self.entries.push(LedgerEntry { seq: self.entries.len(), tool, args_digest: digest });
        *self.counters.entry(tool).or_default() += 1;
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[LedgerEntry] {
        &self.entries
    }

    pub fn counters(&self) -> &BTreeMap<Tool, usize> {
        &self.counters
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Provenance {
    SicFile,
    SicDir,
    Bm25,
    GraphExpand,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedFile {
    pub path: String,
    pub score: f64,
    pub provenance: BTreeSet<Provenance>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalizationResult {
    pub issue_id: String,
    pub variant: Variant,
    pub ranked_files: Vec<RankedFile>,
    pub tool_calls: usize,
    pub tool_counts: BTreeMap<Tool, usize>,
    pub ledger: Vec<LedgerEntry>,
    /// Path prefixes the search was confined to; empty means the whole repository.
    pub scope_used: Vec<String>,
    pub similar_issues: Vec<(String, f64)>,
}

impl LocalizationResult {
    pub fn files(&self) -> Vec<&str> {
        self.ranked_files.iter().map(|f| f.path.as_str()).collect()
    }
}

/// Everything a localization run reads; borrowed, immutable.
pub struct Localizer<'a> {
    graph: &'a DependencyGraph,
    bm25: &'a Bm25Index,
    sic: Option<&'a IssueIndex>,
    history: &'a IssueStore,
    embedder: &'a dyn Embedder,
    summarizer: &'a dyn Summarizer,
    config: &'a Config,
}

impl<'a> Localizer<'a> {
    /// Checks that both indexes were built from `graph` and the SIC index from `embedder`.
    pub fn new(
        graph: &'a DependencyGraph,
        bm25: &'a Bm25Index,
        sic: Option<&'a IssueIndex>,
        history: &'a IssueStore,
        embedder: &'a dyn Embedder,
        summarizer: &'a dyn Summarizer,
        config: &'a Config,
    ) -> Result<Self> {
        config.validate()?;
        let snapshot = graph.snapshot_id();
        let stamps = [bm25.snapshot_id.as_ref(), sic.and_then(|s| s.snapshot_id.as_ref())];
        for stamp in stamps.into_iter().flatten() {
            if *stamp != snapshot {
                return Err(Error::IndexMismatch { index: stamp.clone(), graph: snapshot });
            }
        }
        if let Some(idx) = sic {
            idx.check_embedder(embedder)?;
        }
        Ok(Self { graph, bm25, sic, history, embedder, summarizer, config })
    }

    /// Runs every variant on the same issue.
    pub fn ablation_variants(&self, issue: &Issue) -> Result<BTreeMap<Variant, LocalizationResult>> {
        Variant::ALL.into_iter().map(|v| Ok((v, self.localize(issue, v)?))).collect()
    }

    /// Plain lexical search over the whole repository.
    pub fn localize_baseline(&self, issue: &Issue) -> Result<LocalizationResult> {
        self.localize(issue, Variant::CodeSearch)
    }

    pub fn localize(&self, issue: &Issue, variant: Variant) -> Result<LocalizationResult> {
        let cfg = self.config;
        let mut ledger = ToolLedger::default();
        let mut evidence: BTreeMap<String, Evidence> = BTreeMap::new();

        let mut cue = SicCue::default();
        if variant.uses_sic() {
            ledger.record(Tool::SicRetrieve, &format!("{}|k={}", issue.id, cfg.k));
            if let Some(idx) = self.sic {
                let hits = idx.retrieve(issue, cfg.k, self.embedder, self.summarizer)?;
                cue = extract_cues(&hits, self.history, self.summarizer)?;
            }
        }
        let scope = if variant.uses_sic() { self.scope_from(&cue) } else { Vec::new() };

        let max_freq = cue.candidate_files.values().copied().max().unwrap_or(0);
        for (file, count) in &cue.candidate_files {
            if self.graph.node(file).is_some_and(|n| n.kind == EntityKind::File) {
                let e = evidence.entry(file.clone()).or_default();
                e.sic = *count as f64 / max_freq as f64;
                e.provenance.insert(Provenance::SicFile);
            }
        }

        let query = tokenize_identifiers(&format!("{}\n{}", issue.title, issue.description));
        ledger.record(Tool::Bm25Query, &format!("{}|scope={}", query.join(" "), scope.join(",")));
        let scope_filter = (!scope.is_empty()).then_some(scope.as_slice());
        let hits = self.bm25.query_files(&query, cfg.bm25_candidates, scope_filter);
        let (lo, hi) =
            hits.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), (_, s)| (lo.min(*s), hi.max(*s)));
        for (file, s) in &hits {
            let e = evidence.entry(file.clone()).or_default();
            e.bm25 = if hi > lo { (s - lo) / (hi - lo) } else { 1.0 };
            e.provenance.insert(Provenance::Bm25);
            if scope_filter.is_some() && !cue.candidate_files.contains_key(file) {
                e.provenance.insert(Provenance::SicDir);
            }
        }

        if variant.uses_graph() {
            let seeds: Vec<&str> = hits.iter().take(cfg.expand_from).map(|(f, _)| f.as_str()).collect();
            let mut touched: BTreeMap<String, usize> = BTreeMap::new();
            for seed in &seeds {
                ledger.record(Tool::GraphTraverse, &format!("{seed}|IMPORTS,CONTAINS|BOTH|1"));
                let sub =
                    traverse(self.graph, seed, &[RelationKind::Imports, RelationKind::Contains], Direction::Both, 1)?;
                let neighbors: BTreeSet<&str> =
                    sub.depth.keys().filter_map(|id| self.graph.file_of(id)).filter(|f| f != seed).collect();
                for n in neighbors {
                    *touched.entry(n.to_string()).or_default() += 1;
                }
            }
            for (file, count) in touched {
                let e = evidence.entry(file).or_default();
                e.graph = count as f64 / seeds.len() as f64;
                e.provenance.insert(Provenance::GraphExpand);
            }
        }

        let w = cfg.weights;
        let mut ranked: Vec<RankedFile> = evidence
            .into_iter()
            .map(|(path, e)| RankedFile {
                score: w.sic * e.sic + w.bm25 * e.bm25 + w.graph * e.graph,
                path,
                provenance: e.provenance,
            })
            .collect();
        ranked.sort_by(|a, b| b.score.total_cmp(&a.score).then_with(|| a.path.cmp(&b.path)));
        ranked.truncate(cfg.max_results);

        Ok(LocalizationResult {
            issue_id: issue.id.clone(),
            variant,
            ranked_files: ranked,
            tool_calls: ledger.len(),
            tool_counts: ledger.counters().clone(),
            ledger: ledger.entries().to_vec(),
            scope_used: scope,
            similar_issues: cue.similar_issues,
        })
    }

    /// Directories holding cue files, else cue components, else nothing (whole repository).
    fn scope_from(&self, cue: &SicCue) -> Vec<String> {
        let is_dir = |p: &str| self.graph.node(p).is_some_and(|n| n.kind == EntityKind::Directory);
        let dirs: BTreeSet<String> = cue
            .candidate_files
            .keys()
            .filter_map(|f| f.rsplit_once('/').map(|(d, _)| d.to_string()))
            .filter(|d| is_dir(d))
            .collect();
        let chosen: BTreeSet<String> = if !dirs.is_empty() {
            dirs
        } else {
            cue.candidate_components.keys().filter(|c| is_dir(c)).cloned().collect()
        };
        // Drop entries already covered by a broader one.
        chosen.iter().filter(|d| !chosen.iter().any(|o| o != *d && path_has_prefix(d, o))).cloned().collect()
    }
}

#[derive(Debug, Default)]
struct Evidence {
    sic: f64,
    bm25: f64,
    graph: f64,
    provenance: BTreeSet<Provenance>,
}

/// Writes results as JSON lines.
pub fn results_to_jsonl(results: &[LocalizationResult]) -> String {
    results.iter().map(|r| serde_json::to_string(r).expect("result serializes") + "\n").collect()
}

pub fn results_from_jsonl(text: &str) -> Result<Vec<LocalizationResult>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|source| Error::Json { context: format!("results line {}", i + 1), source })
        })
        .collect()
}
