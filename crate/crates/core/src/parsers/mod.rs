//! Per-language structural extraction.
//!
//! Each parser turns `(path, source)` into a [`ParsedUnit`]: a flat list of
//! entities with qualified ids plus the relations between them. Targets that
//! live outside the unit (imported modules, base classes, callees) are kept as
//! unresolved references; the graph builder resolves or drops them.

mod cpp;
mod python;
mod qml;

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::domain::{detect_language, EntityKind, Language, RelationKind, RepoPath};

pub use cpp::parse_cpp;
pub use python::parse_python;
pub use qml::{parse_qml, parse_qml_fallback, parse_qml_grammar};

/// Inclusive 1-based line range.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Span {
    pub start: u32,
    pub end: u32,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Entity {
    pub kind: EntityKind,
    pub name: String,
    pub span: Span,
    pub qualified_id: String,
    pub attrs: BTreeMap<String, String>,
}

/// Where a relation points.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Target {
    /// An entity of this same unit, by qualified id.
    Local(String),
    /// A name or module reference still to be resolved against the repository.
    Reference(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Relation {
    pub kind: RelationKind,
    pub src: String,
    pub dst: Target,
    pub attrs: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParsedUnit {
    pub file: RepoPath,
    pub language: Language,
    pub entities: Vec<Entity>,
    pub relations: Vec<Relation>,
    pub line_count: u32,
    /// Regions that could not be parsed and were skipped.
    pub parse_warnings: usize,
    /// Set when the QML grammar parse failed and the pattern extractor ran.
    pub fallback_used: bool,
}

impl ParsedUnit {
    pub fn file_id(&self) -> String {
        self.file.to_string()
    }

    pub fn entity(&self, qualified_id: &str) -> Option<&Entity> {
        self.entities.iter().find(|e| e.qualified_id == qualified_id)
    }

    /// Entities that no CONTAINS relation in the unit points at.
    pub fn top_level(&self) -> impl Iterator<Item = &Entity> {
        let contained: std::collections::HashSet<&str> = self
            .relations
            .iter()
            .filter(|r| r.kind == RelationKind::Contains)
            .filter_map(|r| match &r.dst {
                Target::Local(id) => Some(id.as_str()),
                Target::Reference(_) => None,
            })
            .collect();
        self.entities.iter().filter(move |e| !contained.contains(e.qualified_id.as_str()))
    }
}

/// Dispatches to the parser for the file's language; `None` for OTHER files.
pub fn parse_file(file: &RepoPath, source: &str) -> Option<ParsedUnit> {
    match detect_language(file) {
        Language::Python => Some(parse_python(file, source)),
        Language::Cpp => Some(parse_cpp(file, source)),
        Language::Qml => Some(parse_qml(file, source)),
        Language::Other => None,
    }
}

/// How a parser treats a second entity that would get an existing id.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Duplicates {
    /// Re-declarations (overloads, out-of-line definitions) fold into the first.
    Merge,
    /// Siblings are distinct objects; later ones get an `@n` suffix.
    Number,
}

/// Accumulates entities and relations while enforcing unique ids.
pub(crate) struct UnitBuilder {
    file: RepoPath,
    file_id: String,
    language: Language,
    duplicates: Duplicates,
    entities: Vec<Entity>,
    index: HashMap<String, usize>,
    seen_names: HashMap<String, usize>,
    relations: Vec<Relation>,
    pub warnings: usize,
}

impl UnitBuilder {
    pub fn new(file: &RepoPath, language: Language, duplicates: Duplicates) -> Self {
        Self {
            file: file.clone(),
            file_id: file.to_string(),
            language,
            duplicates,
            entities: Vec::new(),
            index: HashMap::new(),
            seen_names: HashMap::new(),
            relations: Vec::new(),
            warnings: 0,
        }
    }

    pub fn file_id(&self) -> &str {
        &self.file_id
    }

    /// Adds an entity named `name` under the `outer` qualification chain
    /// (for example `"geo::Shape"`), returning its qualified id.
    pub fn entity(&mut self, kind: EntityKind, name: &str, outer: &str, span: Span) -> String {
        let base = if outer.is_empty() {
            format!("{}::{}", self.file_id, name)
        } else {
            format!("{}::{}::{}", self.file_id, outer, name)
        };
        let id = match self.duplicates {
            Duplicates::Merge => base,
            Duplicates::Number => {
                let count = self.seen_names.entry(base.clone()).or_insert(0);
                *count += 1;
                if *count == 1 {
                    base
                } else {
                    format!("{base}@{count}")
                }
            }
        };
        if let Some(&idx) = self.index.get(&id) {
            let existing = &mut self.entities[idx];
            if existing.kind == EntityKind::Function && kind == EntityKind::Function {
                // Prefer the span of a definition with a body over a one-line declaration.
                if span.end > span.start && existing.span.end == existing.span.start {
                    existing.span = span;
                }
            }
            return id;
        }
        self.index.insert(id.clone(), self.entities.len());
        self.entities.push(Entity {
            kind,
            name: name.to_string(),
            span,
            qualified_id: id.clone(),
            attrs: BTreeMap::new(),
        });
        id
    }

    pub fn set_end(&mut self, id: &str, end: u32) {
        if let Some(&idx) = self.index.get(id) {
            let span = &mut self.entities[idx].span;
            span.end = span.end.max(end).max(span.start);
        }
    }

    pub fn set_attr(&mut self, id: &str, key: &str, value: String) {
        if let Some(&idx) = self.index.get(id) {
            self.entities[idx].attrs.insert(key.to_string(), value);
        }
    }

    pub fn contains(&mut self, parent: &str, child: &str) {
        if parent == child || parent == self.file_id {
            return;
        }
        let rel = Relation {
            kind: RelationKind::Contains,
            src: parent.to_string(),
            dst: Target::Local(child.to_string()),
            attrs: BTreeMap::new(),
        };
        if !self.relations.contains(&rel) {
            self.relations.push(rel);
        }
    }

    pub fn reference(&mut self, kind: RelationKind, src: &str, dst_ref: &str, attrs: BTreeMap<String, String>) {
        debug_assert!(self.language.allows(kind));
        if dst_ref.is_empty() || !self.language.allows(kind) {
            return;
        }
        let rel = Relation { kind, src: src.to_string(), dst: Target::Reference(dst_ref.to_string()), attrs };
        if !self.relations.contains(&rel) {
            self.relations.push(rel);
        }
    }

    pub fn finish(self, line_count: u32, fallback_used: bool) -> ParsedUnit {
        let mut entities = self.entities;
        for e in &mut entities {
            e.span.end = e.span.end.min(line_count.max(1)).max(e.span.start);
        }
        ParsedUnit {
            file: self.file,
            language: self.language,
            entities,
            relations: self.relations,
            line_count,
            parse_warnings: self.warnings,
            fallback_used,
        }
    }
}

pub(crate) fn line_count(source: &str) -> u32 {
    if source.is_empty() {
        0
    } else {
        source.lines().count().max(1) as u32
    }
}
