//! Identifier tokenization and the BM25 index over code units.

use std::collections::{BTreeMap, HashMap};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::domain::{path_has_prefix, EntityKind};
use crate::error::{Error, Result};
use crate::graph::DependencyGraph;

/// Splits text into identifier runs and expands each into its lowercased
/// compound followed by its snake/camel/acronym/digit subtokens.
///
/// ```
/// use polyloc::index::tokenize_identifiers;
/// assert_eq!(tokenize_identifiers("HTTPServer2"), ["httpserver2", "http", "server", "2"]);
/// ```
pub fn tokenize_identifiers(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    for run in text.split(|c: char| !(c.is_alphanumeric() || c == '_')) {
        if !run.chars().any(char::is_alphanumeric) {
            continue;
        }
        let compound = run.to_lowercase();
        let subs: Vec<String> = run.split('_').flat_map(split_case).map(|s| s.to_lowercase()).collect();
        if subs.len() == 1 && subs[0] == compound {
            out.push(compound);
        } else {
            out.push(compound);
            out.extend(subs);
        }
    }
    out
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum CharClass {
    Lower,
    Upper,
    Digit,
}

fn class_of(c: char) -> CharClass {
    if c.is_numeric() {
        CharClass::Digit
    } else if c.is_uppercase() {
        CharClass::Upper
    } else {
        CharClass::Lower
    }
}

/// Camel-case, acronym and letter/digit boundaries of one underscore-free part.
fn split_case(part: &str) -> Vec<&str> {
    let chars: Vec<(usize, char)> = part.char_indices().collect();
    let mut pieces = Vec::new();
    let mut start = 0;
    for i in 1..chars.len() {
        let prev = class_of(chars[i - 1].1);
        let cur = class_of(chars[i].1);
        let next = chars.get(i + 1).map(|&(_, c)| class_of(c));
        let boundary = match (prev, cur) {
            (CharClass::Lower, CharClass::Upper) => true,
            (CharClass::Upper, CharClass::Upper) => next == Some(CharClass::Lower),
            (CharClass::Digit, CharClass::Digit) => false,
            (CharClass::Digit, _) | (_, CharClass::Digit) => true,
            _ => false,
        };
        if boundary {
            pieces.push(&part[start..chars[i].0]);
            start = chars[i].0;
        }
    }
    if start < part.len() {
        pieces.push(&part[start..]);
    }
    pieces
}

/// Counts whitespace tokens shaped like snake_case or CamelCase identifiers.
///
/// ```
/// use polyloc::index::count_code_terms;
/// assert_eq!(count_code_terms("NullPointer in parse_header during RenderLoop"), 3);
/// ```
pub fn count_code_terms(text: &str) -> usize {
    text.split_whitespace()
        .filter(|raw| {
            let token: Vec<char> = raw.chars().filter(|c| c.is_ascii_alphanumeric() || *c == '_').collect();
            if !token.iter().any(char::is_ascii_alphabetic) {
                return false;
            }
            token.windows(3).any(|w| w[0].is_ascii_alphanumeric() && w[1] == '_' && w[2].is_ascii_alphanumeric())
                || token.windows(2).any(|w| w[0].is_ascii_lowercase() && w[1].is_ascii_uppercase())
        })
        .count()
}

/// One searchable document: an entity body or a whole file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IndexableUnit {
    pub unit_id: String,
    pub file: String,
    pub kind: EntityKind,
    pub tokens: Vec<String>,
}

/// Maps a logical repository path (`component/...`) back under `root`.
pub fn source_path(root: &Path, logical: &str) -> PathBuf {
    let rest = logical.split_once('/').map_or("", |(_, r)| r);
    if rest.is_empty() {
        root.to_path_buf()
    } else {
        root.join(rest)
    }
}

/// Units for every FILE node and every CLASS, FUNCTION and QML_COMPONENT node.
pub fn collect_units(g: &DependencyGraph, root: &Path) -> Result<Vec<IndexableUnit>> {
    let mut sources: HashMap<&str, String> = HashMap::new();
    for file in g.files() {
        let path = source_path(root, file);
        let bytes = std::fs::read(&path).map_err(|e| Error::io(&path, e))?;
        sources.insert(file, String::from_utf8_lossy(&bytes).into_owned());
    }
    let mut units = Vec::new();
    for (id, node) in g.nodes() {
        let tokens = match node.kind {
            EntityKind::Directory => continue,
            EntityKind::File => {
                let mut t = tokenize_identifiers(id);
                t.extend(tokenize_identifiers(&sources[id]));
                t
            }
            _ => {
                let Some(text) = sources.get(node.path.as_str()) else { continue };
                let mut t = tokenize_identifiers(&node.name);
                if let Some(span) = node.span {
                    let lines = text.lines().skip(span.start as usize - 1).take((span.end - span.start + 1) as usize);
                    for line in lines {
                        t.extend(tokenize_identifiers(line));
                    }
                }
                t
            }
        };
        units.push(IndexableUnit { unit_id: id.to_string(), file: node.path.clone(), kind: node.kind, tokens });
    }
    Ok(units)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bm25Params {
    pub k1: f64,
    pub b: f64,
}

impl Default for Bm25Params {
    fn default() -> Self {
        Self { k1: 1.2, b: 0.75 }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DocMeta {
    pub file: String,
    pub kind: EntityKind,
    pub length: u32,
}

/// Okapi BM25 statistics over a fixed set of units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bm25Index {
    pub params: Bm25Params,
    pub docs: BTreeMap<String, DocMeta>,
    pub avg_doc_length: f64,
    /// term → (unit_id, term frequency), sorted by unit_id.
    pub postings: BTreeMap<String, Vec<(String, u32)>>,
    /// Snapshot id of the graph the units came from, when built from one.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub snapshot_id: Option<String>,
}

pub fn build_bm25(units: &[IndexableUnit], params: Bm25Params) -> Result<Bm25Index> {
    let mut docs = BTreeMap::new();
    let mut postings: BTreeMap<String, BTreeMap<String, u32>> = BTreeMap::new();
    for u in units {
        let meta = DocMeta { file: u.file.clone(), kind: u.kind, length: u.tokens.len() as u32 };
        if docs.insert(u.unit_id.clone(), meta).is_some() {
            return Err(Error::DuplicateUnit(u.unit_id.clone()));
        }
        for t in &u.tokens {
            *postings.entry(t.clone()).or_default().entry(u.unit_id.clone()).or_default() += 1;
        }
    }
    let total: u64 = docs.values().map(|d: &DocMeta| u64::from(d.length)).sum();
    let avg_doc_length = if docs.is_empty() { 0.0 } else { total as f64 / docs.len() as f64 };
    Ok(Bm25Index {
        params,
        docs,
        avg_doc_length,
        postings: postings.into_iter().map(|(t, p)| (t, p.into_iter().collect())).collect(),
        snapshot_id: None,
    })
}

impl Bm25Index {
    pub fn len(&self) -> usize {
        self.docs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.docs.is_empty()
    }

    /// Non-negative Robertson–Spärck Jones weight.
    pub fn idf(&self, term: &str) -> f64 {
        let n = self.docs.len() as f64;
        let df = self.postings.get(term).map_or(0, Vec::len) as f64;
        ((n - df + 0.5) / (df + 0.5) + 1.0).ln()
    }

    fn term_weight(&self, tf: u32, length: u32) -> f64 {
        let Bm25Params { k1, b } = self.params;
        let tf = f64::from(tf);
        let norm = if self.avg_doc_length > 0.0 { f64::from(length) / self.avg_doc_length } else { 1.0 };
        tf * (k1 + 1.0) / (tf + k1 * (1.0 - b + b * norm))
    }

    /// Every unit with a positive score, before ranking; repeated query terms count again.
    fn scores(&self, query: &[String], scope: Option<&[String]>) -> HashMap<&str, f64> {
        let mut acc: HashMap<&str, f64> = HashMap::new();
        for term in query {
            let Some(list) = self.postings.get(term) else { continue };
            let idf = self.idf(term);
            for (unit, tf) in list {
                let meta = &self.docs[unit];
                *acc.entry(unit.as_str()).or_default() += idf * self.term_weight(*tf, meta.length);
            }
        }
        acc.retain(|unit, score| {
            *score > 0.0
                && scope.is_none_or(|prefixes| {
                    let file = &self.docs[*unit].file;
                    prefixes.iter().any(|p| path_has_prefix(file, p))
                })
        });
        acc
    }

    /// Top `top_n` units by score, ties by unit id.
    pub fn query(&self, query: &[String], top_n: usize, scope: Option<&[String]>) -> Vec<(String, f64)> {
        rank(self.scores(query, scope).into_iter().map(|(u, s)| (u.to_string(), s)), top_n)
    }

    /// Top `top_n` files, each scored by its best unit.
    pub fn query_files(&self, query: &[String], top_n: usize, scope: Option<&[String]>) -> Vec<(String, f64)> {
        let mut best: HashMap<&str, f64> = HashMap::new();
        for (unit, score) in self.scores(query, scope) {
            let file = self.docs[unit].file.as_str();
            let slot = best.entry(file).or_insert(score);
            *slot = slot.max(score);
        }
        rank(best.into_iter().map(|(f, s)| (f.to_string(), s)), top_n)
    }

    pub fn to_json(&self) -> String {
        let mut out = serde_json::to_string_pretty(self).expect("index serializes");
        out.push('\n');
        out
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|source| Error::Json { context: "bm25 index".into(), source })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}

fn rank(items: impl Iterator<Item = (String, f64)>, top_n: usize) -> Vec<(String, f64)> {
    let mut v: Vec<(String, f64)> = items.collect();
    v.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    v.truncate(top_n);
    v
}

/// Builds the index for a graph, stamping it with the graph's snapshot id.
pub fn index_graph(g: &DependencyGraph, root: &Path, params: Bm25Params) -> Result<Bm25Index> {
    let units = collect_units(g, root)?;
    let mut idx = build_bm25(&units, params)?;
    idx.snapshot_id = Some(g.snapshot_id());
    Ok(idx)
}
