//! Localization metrics, issue richness and code-term statistics.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::domain::{Issue, IssueStore, Richness, RichnessLabel};
use crate::error::{Error, Result};
use crate::index::count_code_terms;
use crate::localize::{LocalizationResult, Variant};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRecord {
    pub issue_id: String,
    pub ground_truth: Vec<String>,
    /// Ranked predictions, best first.
    pub predicted: Vec<String>,
    pub tool_calls: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub richness: Option<RichnessLabel>,
}

impl EvalRecord {
    pub fn hit_at(&self, k: usize) -> bool {
        self.predicted.iter().take(k).any(|p| self.ground_truth.contains(p))
    }
}

/// Fraction of records with a ground-truth file among the first `k` predictions.
///
/// ```
/// use polyloc::eval::{acc_at_k, EvalRecord};
/// let r = EvalRecord {
///     issue_id: "1".into(),
///     ground_truth: vec!["app/src/a.py".into()],
///     predicted: vec!["app/src/b.py".into(), "app/src/a.py".into()],
///     tool_calls: 2,
///     richness: None,
/// };
/// assert_eq!(acc_at_k(&[r.clone()], 1).unwrap(), 0.0);
/// assert_eq!(acc_at_k(&[r], 2).unwrap(), 1.0);
/// ```
pub fn acc_at_k(records: &[EvalRecord], k: usize) -> Result<f64> {
    if records.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let hits = records.iter().filter(|r| r.hit_at(k)).count();
    Ok(hits as f64 / records.len() as f64)
}

/// Fraction of queries where some retrieved issue changed a file whose name
/// matches a ground-truth filename.
pub fn sic_match_rate(
    queries: &[&Issue],
    retrieved: &BTreeMap<String, Vec<String>>,
    corpus: &IssueStore,
) -> Result<f64> {
    if queries.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let mut matched = 0;
    for q in queries {
        let mut hit = false;
        for id in retrieved.get(&q.id).into_iter().flatten() {
            let similar = corpus.get(id).ok_or_else(|| Error::UnknownIssue(id.clone()))?;
            hit |= q.changed_files.iter().any(|g| similar.changed_files.iter().any(|s| s.filename() == g.filename()));
        }
        matched += usize::from(hit);
    }
    Ok(matched as f64 / queries.len() as f64)
}

/// Optional fields that count toward completeness.
pub const OPTIONAL_FIELDS: usize = 7;

fn populated_optional_fields(issue: &Issue) -> usize {
    let text = [
        &issue.root_cause,
        &issue.feature_summary,
        &issue.root_cause_category,
        &issue.product_family,
        &issue.product_name,
    ];
    text.iter().filter(|f| f.as_deref().is_some_and(|s| !s.trim().is_empty())).count()
        + usize::from(issue.priority.is_some())
        + usize::from(issue.severity.is_some())
}

/// Averages field completeness with description verbosity; RICH at or above `threshold`.
pub fn classify_richness(issue: &Issue, threshold: f64, verbosity_tokens: usize) -> RichnessLabel {
    let completeness = populated_optional_fields(issue) as f64 / OPTIONAL_FIELDS as f64;
    let words = issue.description.split_whitespace().count() as f64;
    let verbosity = (words / verbosity_tokens.max(1) as f64).min(1.0);
    let score = (completeness + verbosity) / 2.0;
    RichnessLabel {
        label: if score >= threshold { Richness::Rich } else { Richness::Sparse },
        completeness_score: score,
    }
}

/// Issues bucketed by how many code terms their title and description hold.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CodeTermHistogram {
    pub zero: usize,
    pub one: usize,
    pub two_to_five: usize,
    pub more_than_five: usize,
}

impl CodeTermHistogram {
    pub fn total(&self) -> usize {
        self.zero + self.one + self.two_to_five + self.more_than_five
    }

    pub fn add(&mut self, count: usize) {
        match count {
            0 => self.zero += 1,
            1 => self.one += 1,
            2..=5 => self.two_to_five += 1,
            _ => self.more_than_five += 1,
        }
    }
}

pub fn code_term_histogram<'a>(issues: impl IntoIterator<Item = &'a Issue>) -> CodeTermHistogram {
    let mut h = CodeTermHistogram::default();
    for issue in issues {
        h.add(count_code_terms(&format!("{} {}", issue.title, issue.description)));
    }
    h
}

/// Pairs each result with the ground truth of its issue.
pub fn records_for(
    results: &[LocalizationResult],
    issues: &IssueStore,
    threshold: f64,
    verbosity_tokens: usize,
) -> Result<Vec<EvalRecord>> {
    results
        .iter()
        .map(|r| {
            let issue = issues.get(&r.issue_id).ok_or_else(|| Error::UnknownIssue(r.issue_id.clone()))?;
            Ok(EvalRecord {
                issue_id: r.issue_id.clone(),
                ground_truth: issue.changed_files.iter().map(ToString::to_string).collect(),
                predicted: r.ranked_files.iter().map(|f| f.path.clone()).collect(),
                tool_calls: r.tool_calls,
                richness: Some(classify_richness(issue, threshold, verbosity_tokens)),
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariantSummary {
    pub records: usize,
    /// Acc@k keyed by k.
    pub acc_at_k: BTreeMap<usize, f64>,
    pub mean_tool_calls: f64,
    /// Acc@k restricted to RICH and SPARSE issues, when any exist.
    pub acc_at_k_by_richness: BTreeMap<String, BTreeMap<usize, f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub variants: BTreeMap<String, VariantSummary>,
    pub code_terms: CodeTermHistogram,
    pub richness_counts: BTreeMap<String, usize>,
    pub richness_threshold: f64,
    pub richness_verbosity_tokens: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sic_match_rate: Option<f64>,
}

fn acc_table(records: &[EvalRecord], ks: &[usize]) -> Result<BTreeMap<usize, f64>> {
    ks.iter().map(|&k| Ok((k, acc_at_k(records, k)?))).collect()
}

pub fn summarize_variant(records: &[EvalRecord], ks: &[usize]) -> Result<VariantSummary> {
    let acc = acc_table(records, ks)?;
    let mut by_richness = BTreeMap::new();
    for (label, name) in [(Richness::Rich, "RICH"), (Richness::Sparse, "SPARSE")] {
        let subset: Vec<EvalRecord> =
            records.iter().filter(|r| r.richness.is_some_and(|l| l.label == label)).cloned().collect();
        if !subset.is_empty() {
            by_richness.insert(name.to_string(), acc_table(&subset, ks)?);
        }
    }
    Ok(VariantSummary {
        records: records.len(),
        acc_at_k: acc,
        mean_tool_calls: records.iter().map(|r| r.tool_calls as f64).sum::<f64>() / records.len() as f64,
        acc_at_k_by_richness: by_richness,
    })
}

/// Builds the report over per-variant records and the query issues they came from.
pub fn build_report(
    by_variant: &BTreeMap<Variant, Vec<EvalRecord>>,
    queries: &[&Issue],
    ks: &[usize],
    threshold: f64,
    verbosity_tokens: usize,
) -> Result<EvalReport> {
    if by_variant.values().all(Vec::is_empty) || queries.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let mut variants = BTreeMap::new();
    for (v, records) in by_variant {
        if !records.is_empty() {
            variants.insert(v.to_string(), summarize_variant(records, ks)?);
        }
    }
    let mut richness_counts = BTreeMap::new();
    for q in queries {
        let label = classify_richness(q, threshold, verbosity_tokens).label;
        let name = if label == Richness::Rich { "RICH" } else { "SPARSE" };
        *richness_counts.entry(name.to_string()).or_default() += 1;
    }
    Ok(EvalReport {
        variants,
        code_terms: code_term_histogram(queries.iter().copied()),
        richness_counts,
        richness_threshold: threshold,
        richness_verbosity_tokens: verbosity_tokens,
        sic_match_rate: None,
    })
}
