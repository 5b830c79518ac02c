//! Repository paths, languages, entity and relation kinds, and issue records.
//!
//! Every other module speaks in these types. Paths are always stored
//! component-qualified: the first segment names the repository (component),
//! the last segment is the file name, and everything in between is the
//! directory chain.

use std::collections::BTreeMap;
use std::fmt;
use std::io::BufRead;
use std::path::Path;
use std::str::FromStr;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Errors raised while decomposing a raw path string.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PathError {
    #[error("path is empty")]
    EmptyPath,
    #[error("illegal path segment {segment:?} in {raw:?}")]
    IllegalSegment { raw: String, segment: String },
    #[error("path {0:?} has no file name below its component")]
    MissingFilename(String),
}

/// A component-qualified file path split into its hierarchical levels.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct RepoPath {
    component: String,
    segments: Vec<String>,
    filename: String,
}

impl RepoPath {
    /// Builds a path from already-validated parts.
    pub fn new(
        component: impl Into<String>,
        segments: Vec<String>,
        filename: impl Into<String>,
    ) -> std::result::Result<Self, PathError> {
        let component = component.into();
        let filename = filename.into();
        let raw = || {
            let mut parts = vec![component.clone()];
            parts.extend(segments.iter().cloned());
            parts.push(filename.clone());
            parts.join("/")
        };
        for part in std::iter::once(&component).chain(segments.iter()).chain(std::iter::once(&filename)) {
            if part.is_empty() || part.contains(['/', '\\']) {
                return Err(PathError::IllegalSegment { raw: raw(), segment: part.clone() });
            }
            if part == "." || part == ".." {
                return Err(PathError::IllegalSegment { raw: raw(), segment: part.clone() });
            }
        }
        Ok(Self { component, segments, filename })
    }

    pub fn component(&self) -> &str {
        &self.component
    }

    /// Directory segments between the component and the file name.
    pub fn segments(&self) -> &[String] {
        &self.segments
    }

    pub fn filename(&self) -> &str {
        &self.filename
    }

    /// Text after the last `.` of the file name, or `""`.
    pub fn extension(&self) -> &str {
        match self.filename.rfind('.') {
            Some(idx) => &self.filename[idx + 1..],
            None => "",
        }
    }

    /// First directory below the component, if any.
    pub fn top_dir(&self) -> Option<&str> {
        self.segments.first().map(String::as_str)
    }

    /// Canonical `/`-joined directory holding the file (component included).
    pub fn parent_dir(&self) -> String {
        let mut out = self.component.clone();
        for seg in &self.segments {
            out.push('/');
            out.push_str(seg);
        }
        out
    }

    /// All directory prefixes from the component down to the parent directory.
    pub fn directory_prefixes(&self) -> Vec<String> {
        let mut out = Vec::with_capacity(self.segments.len() + 1);
        let mut cur = self.component.clone();
        out.push(cur.clone());
        for seg in &self.segments {
            cur.push('/');
            cur.push_str(seg);
            out.push(cur.clone());
        }
        out
    }

    /// True when `prefix` names this path or one of its ancestor directories.
    pub fn has_prefix(&self, prefix: &str) -> bool {
        path_has_prefix(&self.to_string(), prefix)
    }
}

/// Segment-aware prefix test on canonical `/`-separated path strings.
pub fn path_has_prefix(path: &str, prefix: &str) -> bool {
    let prefix = prefix.trim_end_matches('/');
    if prefix.is_empty() {
        return false;
    }
    path == prefix || (path.starts_with(prefix) && path.as_bytes().get(prefix.len()) == Some(&b'/'))
}

impl fmt::Display for RepoPath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.component)?;
        for seg in &self.segments {
            write!(f, "/{seg}")?;
        }
        write!(f, "/{}", self.filename)
    }
}

impl FromStr for RepoPath {
    type Err = PathError;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        parse_repo_path(s)
    }
}

impl Serialize for RepoPath {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for RepoPath {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let raw = String::deserialize(deserializer)?;
        parse_repo_path(&raw).map_err(serde::de::Error::custom)
    }
}

/// Splits a raw path on either separator style into component, directory
/// segments and file name.
///
/// Empty segments produced by repeated or trailing separators are dropped.
pub fn parse_repo_path(raw: &str) -> std::result::Result<RepoPath, PathError> {
    let parts: Vec<&str> = raw.split(['/', '\\']).filter(|p| !p.is_empty()).collect();
    if parts.is_empty() {
        return Err(PathError::EmptyPath);
    }
    if let Some(bad) = parts.iter().find(|p| **p == "." || **p == "..") {
        return Err(PathError::IllegalSegment { raw: raw.to_string(), segment: bad.to_string() });
    }
    if parts.len() < 2 {
        return Err(PathError::MissingFilename(raw.to_string()));
    }
    let component = parts[0].to_string();
    let filename = parts[parts.len() - 1].to_string();
    let segments = parts[1..parts.len() - 1].iter().map(|s| s.to_string()).collect();
    Ok(RepoPath { component, segments, filename })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Language {
    Python,
    Cpp,
    Qml,
    Other,
}

impl Language {
    pub fn from_extension(ext: &str) -> Self {
        match ext.to_ascii_lowercase().as_str() {
            "py" => Language::Python,
            "cpp" | "cc" | "cxx" | "h" | "hpp" => Language::Cpp,
            "qml" => Language::Qml,
            _ => Language::Other,
        }
    }

    /// Whether this language may carry the given relation kind.
    pub fn allows(self, kind: RelationKind) -> bool {
        match kind {
            RelationKind::Contains | RelationKind::Imports => true,
            RelationKind::Inherits | RelationKind::Invokes => {
                matches!(self, Language::Python | Language::Cpp)
            }
        }
    }
}

/// Classifies a path by its (case-insensitive) extension.
pub fn detect_language(path: &RepoPath) -> Language {
    Language::from_extension(path.extension())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum EntityKind {
    Directory,
    File,
    Class,
    Function,
    QmlComponent,
}

impl FromStr for EntityKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "directory" | "dir" => Ok(EntityKind::Directory),
            "file" => Ok(EntityKind::File),
            "class" => Ok(EntityKind::Class),
            "function" | "fn" => Ok(EntityKind::Function),
            "qml_component" | "component" => Ok(EntityKind::QmlComponent),
            other => Err(format!("unknown entity kind {other:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum RelationKind {
    Contains,
    Imports,
    Inherits,
    Invokes,
}

impl FromStr for RelationKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "contains" => Ok(RelationKind::Contains),
            "imports" => Ok(RelationKind::Imports),
            "inherits" => Ok(RelationKind::Inherits),
            "invokes" => Ok(RelationKind::Invokes),
            other => Err(format!("unknown relation kind {other:?}")),
        }
    }
}

/// A historical or incoming issue ticket.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Issue {
    pub id: String,
    pub title: String,
    pub description: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub root_cause: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub feature_summary: Option<String>,
    pub program_name: String,
    pub triage_category: String,
    pub triage_assignment: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub priority: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub severity: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub root_cause_category: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub product_family: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub product_name: Option<String>,
    pub created_at: DateTime<Utc>,
    #[serde(default)]
    pub changed_files: Vec<RepoPath>,
}

/// The three categorical attributes retrieval filters on.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct CategoricalFilters {
    pub program_name: String,
    pub triage_category: String,
    pub triage_assignment: String,
}

impl Issue {
    pub fn filters(&self) -> CategoricalFilters {
        CategoricalFilters {
            program_name: self.program_name.clone(),
            triage_category: self.triage_category.clone(),
            triage_assignment: self.triage_assignment.clone(),
        }
    }

    /// Checks the fields that ingestion requires to be populated.
    pub fn validate(&self) -> Result<()> {
        let required = [
            ("id", &self.id),
            ("title", &self.title),
            ("description", &self.description),
            ("program_name", &self.program_name),
            ("triage_category", &self.triage_category),
            ("triage_assignment", &self.triage_assignment),
        ];
        for (field, value) in required {
            if value.trim().is_empty() {
                return Err(Error::InvalidIssue { id: self.id.clone(), field });
            }
        }
        Ok(())
    }
}

/// Reads a JSON-lines issue corpus, validating every record.
pub fn read_issues_jsonl(path: &Path) -> Result<Vec<Issue>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let reader = std::io::BufReader::new(file);
    let mut issues = Vec::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let issue: Issue = serde_json::from_str(&line)
            .map_err(|source| Error::Json { context: format!("{}:{}", path.display(), lineno + 1), source })?;
        issue.validate()?;
        issues.push(issue);
    }
    Ok(issues)
}

/// Writes issues as JSON-lines in the given order.
pub fn write_issues_jsonl(path: &Path, issues: &[Issue]) -> Result<()> {
    let mut out = String::new();
    for issue in issues {
        out.push_str(&serde_json::to_string(issue).map_err(|source| Error::Json { context: "issue".into(), source })?);
        out.push('\n');
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Issues keyed by id.
#[derive(Debug, Clone, Default)]
pub struct IssueStore {
    issues: BTreeMap<String, Issue>,
}

impl IssueStore {
    pub fn new(issues: impl IntoIterator<Item = Issue>) -> Result<Self> {
        let mut map = BTreeMap::new();
        for issue in issues {
            issue.validate()?;
            if map.contains_key(&issue.id) {
                return Err(Error::DuplicateIssueId(issue.id));
            }
            map.insert(issue.id.clone(), issue);
        }
        Ok(Self { issues: map })
    }

    pub fn get(&self, id: &str) -> Option<&Issue> {
        self.issues.get(id)
    }

    pub fn len(&self) -> usize {
        self.issues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.issues.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Issue> {
        self.issues.values()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Richness {
    Rich,
    Sparse,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RichnessLabel {
    pub label: Richness,
    pub completeness_score: f64,
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn p(raw: &str) -> RepoPath {
        parse_repo_path(raw).unwrap()
    }

    #[test]
    fn decomposes_nested_path() {
        let path = p("ui-repo/src/widgets/button.qml");
        assert_eq!(path.component(), "ui-repo");
        assert_eq!(path.segments(), ["src", "widgets"]);
        assert_eq!(path.filename(), "button.qml");
        assert_eq!(path.extension(), "qml");
    }

    #[test]
    fn zero_directory_segments() {
        let path = p("core/main.cpp");
        assert_eq!(path.component(), "core");
        assert!(path.segments().is_empty());
        assert_eq!(path.filename(), "main.cpp");
    }

    #[test]
    fn backslash_separators_match_forward_slashes() {
        // Oracle: rewrite every separator to '/' and compare.
        let raw = "a\\b\\c.py";
        let normalized = raw.replace('\\', "/");
        assert_eq!(p(raw), p(&normalized));
        assert_eq!(p(raw).component(), "a");
        assert_eq!(p(raw).segments(), ["b"]);
        assert_eq!(p(raw).filename(), "c.py");
        assert_eq!(p(raw).to_string(), "a/b/c.py");
    }

    #[test]
    fn rejects_empty_and_dot_segments() {
        assert_eq!(parse_repo_path(""), Err(PathError::EmptyPath));
        assert_eq!(parse_repo_path("//\\"), Err(PathError::EmptyPath));
        assert!(matches!(parse_repo_path("a/../b.py"), Err(PathError::IllegalSegment { .. })));
        assert!(matches!(parse_repo_path("a/./b.py"), Err(PathError::IllegalSegment { .. })));
        assert!(matches!(parse_repo_path("lonely.py"), Err(PathError::MissingFilename(_))));
    }

    #[test]
    fn extension_edge_cases() {
        assert_eq!(p("c/Makefile").extension(), "");
        assert_eq!(p("c/archive.tar.gz").extension(), "gz");
        assert_eq!(detect_language(&p("c/main.CPP")), Language::Cpp);
    }

    #[test]
    fn language_table() {
        assert_eq!(detect_language(&p("core/util.hpp")), Language::Cpp);
        assert_eq!(detect_language(&p("ui/Main.qml")), Language::Qml);
        assert_eq!(detect_language(&p("docs/readme.md")), Language::Other);
        assert_eq!(detect_language(&p("x/y.py")), Language::Python);
        for ext in ["cc", "cxx", "h"] {
            assert_eq!(detect_language(&p(&format!("x/y.{ext}"))), Language::Cpp);
        }
    }

    #[test]
    fn relation_legality_matrix() {
        assert!(Language::Qml.allows(RelationKind::Contains));
        assert!(Language::Qml.allows(RelationKind::Imports));
        assert!(!Language::Qml.allows(RelationKind::Inherits));
        assert!(!Language::Qml.allows(RelationKind::Invokes));
        assert!(Language::Cpp.allows(RelationKind::Inherits));
        assert!(Language::Python.allows(RelationKind::Invokes));
    }

    #[test]
    fn prefix_matching_respects_segments() {
        assert!(path_has_prefix("ui/src/a.qml", "ui/src"));
        assert!(path_has_prefix("ui/src", "ui/src/"));
        assert!(!path_has_prefix("ui/srcx/a.qml", "ui/src"));
        assert!(!path_has_prefix("ui/src/a.qml", ""));
    }

    #[test]
    fn issue_validation_and_jsonl() {
        let line = r#"{"id":"I-1","title":"t","description":"d","program_name":"p","triage_category":"c","triage_assignment":"a","created_at":"2024-01-02T03:04:05Z","changed_files":["ui/src/a.qml"]}"#;
        let issue: Issue = serde_json::from_str(line).unwrap();
        assert!(issue.validate().is_ok());
        assert_eq!(issue.changed_files[0].to_string(), "ui/src/a.qml");

        let mut bad = issue.clone();
        bad.triage_assignment = " ".into();
        assert!(matches!(bad.validate(), Err(Error::InvalidIssue { field: "triage_assignment", .. })));

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("issues.jsonl");
        write_issues_jsonl(&path, std::slice::from_ref(&issue)).unwrap();
        assert_eq!(read_issues_jsonl(&path).unwrap(), vec![issue]);
    }

    #[test]
    fn store_rejects_duplicates() {
        let line = r#"{"id":"I-1","title":"t","description":"d","program_name":"p","triage_category":"c","triage_assignment":"a","created_at":"2024-01-02T03:04:05Z"}"#;
        let issue: Issue = serde_json::from_str(line).unwrap();
        assert!(matches!(IssueStore::new(vec![issue.clone(), issue]), Err(Error::DuplicateIssueId(_))));
    }

    fn segment() -> impl Strategy<Value = String> {
        "[A-Za-z0-9_-]{1,8}(\\.[a-z]{1,3})?".prop_filter("dot segments", |s| s != "." && s != "..")
    }

    proptest! {
        #[test]
        fn reserialization_roundtrips(
            component in segment(),
            segments in prop::collection::vec(segment(), 0..6),
            filename in segment(),
        ) {
            let path = RepoPath::new(component, segments, filename).unwrap();
            prop_assert_eq!(parse_repo_path(&path.to_string()).unwrap(), path);
        }

        #[test]
        fn language_ignores_directories(
            dirs_a in prop::collection::vec(segment(), 0..4),
            dirs_b in prop::collection::vec(segment(), 0..4),
            ext in "(py|cpp|hpp|qml|md|txt|H|QML)",
        ) {
            let a = RepoPath::new("c", dirs_a, format!("f.{ext}")).unwrap();
            let b = RepoPath::new("d", dirs_b, format!("f.{ext}")).unwrap();
            prop_assert_eq!(detect_language(&a), detect_language(&b));
        }
    }
}
