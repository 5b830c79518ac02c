//! Five-level path similarity between the changed files of two issues.
//!
//! A root file is compared with every file of a similar issue, the best
//! match is kept, and level scores are averaged first over root files, then
//! over the similar issues of one root issue, then over root issues.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::domain::RepoPath;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairLevelScores {
    pub component_match: f64,
    pub top_dir_match: f64,
    pub directory_similarity: f64,
    pub extension_match: f64,
    pub exact_file_match: f64,
    pub total_score: f64,
}

impl PairLevelScores {
    pub fn levels(&self) -> [f64; 5] {
        [
            self.component_match,
            self.top_dir_match,
            self.directory_similarity,
            self.extension_match,
            self.exact_file_match,
        ]
    }
}

fn indicator(b: bool) -> f64 {
    if b {
        1.0
    } else {
        0.0
    }
}

/// Scores `candidate` against root file `root`; the directory term is
/// normalized by the root's directory depth.
///
/// ```
/// use polyloc::domain::parse_repo_path;
/// use polyloc::similarity::score_file_pair;
/// let a = parse_repo_path("ui/src/widgets/b.qml").unwrap();
/// let b = parse_repo_path("ui/src/forms/c.qml").unwrap();
/// assert_eq!(score_file_pair(&a, &b).total_score, 3.5);
/// ```
pub fn score_file_pair(root: &RepoPath, candidate: &RepoPath) -> PairLevelScores {
    let component_match = indicator(root.component() == candidate.component());
    let top_dir_match = match (root.top_dir(), candidate.top_dir()) {
        (Some(a), Some(b)) => indicator(a == b),
        (None, None) => component_match,
        _ => 0.0,
    };
    let (rs, cs) = (root.segments(), candidate.segments());
    let directory_similarity = if rs.is_empty() {
        if cs.is_empty() {
            component_match
        } else {
            0.0
        }
    } else {
        let shared = rs.iter().zip(cs).take_while(|(a, b)| a == b).count();
        shared as f64 / rs.len() as f64
    };
    let extension_match = indicator(root.extension().eq_ignore_ascii_case(candidate.extension()));
    let exact_file_match = indicator(root.filename() == candidate.filename());
    PairLevelScores {
        component_match,
        top_dir_match,
        directory_similarity,
        extension_match,
        exact_file_match,
        total_score: component_match + top_dir_match + directory_similarity + extension_match + exact_file_match,
    }
}

/// Highest-scoring candidate for `root`; equal totals go to the smaller path.
pub fn best_match<'a>(root: &RepoPath, candidates: &'a [RepoPath]) -> Result<(&'a RepoPath, PairLevelScores)> {
    let mut best: Option<(&RepoPath, String, PairLevelScores)> = None;
    for c in candidates {
        let s = score_file_pair(root, c);
        let key = c.to_string();
        let better = match &best {
            None => true,
            Some((_, bkey, bs)) => s.total_score > bs.total_score || (s.total_score == bs.total_score && key < *bkey),
        };
        if better {
            best = Some((c, key, s));
        }
    }
    best.map(|(c, _, s)| (c, s)).ok_or(Error::EmptyCandidateSet)
}

/// Sum in ascending order so results do not depend on input order.
fn mean(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut v: Vec<f64> = values.into_iter().collect();
    if v.is_empty() {
        return 0.0;
    }
    v.sort_by(f64::total_cmp);
    v.iter().sum::<f64>() / v.len() as f64
}

/// Per-level fractions, serialized with upper-case level names.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub struct LevelRates {
    pub component: f64,
    pub top_dir: f64,
    pub directory: f64,
    pub extension: f64,
    pub file: f64,
}

impl LevelRates {
    pub fn as_array(&self) -> [f64; 5] {
        [self.component, self.top_dir, self.directory, self.extension, self.file]
    }

    fn from_array(a: [f64; 5]) -> Self {
        Self { component: a[0], top_dir: a[1], directory: a[2], extension: a[3], file: a[4] }
    }

    fn mean_of(items: &[LevelRates]) -> Self {
        Self::from_array(std::array::from_fn(|i| mean(items.iter().map(|r| r.as_array()[i]))))
    }
}

/// Scores for one root issue against one similar issue.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IssuePairScores {
    /// Best-match level scores averaged over root files; `file` is the
    /// averaged exact filename term.
    pub averages: LevelRates,
    /// Whether any root file shares its filename with any similar-issue file.
    pub file_match: bool,
    pub file_pairs: usize,
}

impl IssuePairScores {
    /// The levels reported upward: best-match averages with FILE replaced by `file_match`.
    pub fn reported(&self) -> LevelRates {
        LevelRates { file: indicator(self.file_match), ..self.averages }
    }
}

pub fn score_issue_pair(root_files: &[RepoPath], similar_files: &[RepoPath]) -> Result<IssuePairScores> {
    if root_files.is_empty() {
        return Err(Error::EmptyRootFiles);
    }
    if similar_files.is_empty() {
        return Ok(IssuePairScores { averages: LevelRates::default(), file_match: false, file_pairs: 0 });
    }
    let mut per_root = Vec::with_capacity(root_files.len());
    for r in root_files {
        let (_, s) = best_match(r, similar_files)?;
        per_root.push(LevelRates::from_array(s.levels()));
    }
    let file_match = root_files.iter().any(|r| similar_files.iter().any(|s| r.filename() == s.filename()));
    Ok(IssuePairScores {
        averages: LevelRates::mean_of(&per_root),
        file_match,
        file_pairs: root_files.len() * similar_files.len(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimilarityReport {
    pub per_level_rates: LevelRates,
    pub per_issue_scores: BTreeMap<String, LevelRates>,
    pub issue_pair_count: usize,
    pub file_pair_count: usize,
}

/// Averages pair scores per root issue, then across root issues.
pub fn aggregate_report(pairs: &[(String, Vec<IssuePairScores>)]) -> Result<SimilarityReport> {
    let mut grouped: BTreeMap<&str, Vec<&IssuePairScores>> = BTreeMap::new();
    for (id, scored) in pairs {
        if scored.is_empty() {
            return Err(Error::NoScoredPairs(id.clone()));
        }
        grouped.entry(id).or_default().extend(scored);
    }
    let per_issue_scores: BTreeMap<String, LevelRates> = grouped
        .iter()
        .map(|(id, scored)| {
            let reported: Vec<LevelRates> = scored.iter().map(|s| s.reported()).collect();
            (id.to_string(), LevelRates::mean_of(&reported))
        })
        .collect();
    let all: Vec<LevelRates> = per_issue_scores.values().copied().collect();
    Ok(SimilarityReport {
        per_level_rates: LevelRates::mean_of(&all),
        issue_pair_count: grouped.values().map(Vec::len).sum(),
        file_pair_count: grouped.values().flatten().map(|s| s.file_pairs).sum(),
        per_issue_scores,
    })
}
