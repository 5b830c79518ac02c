//! The typed dependency graph: construction, merging and traversal.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::domain::{parse_repo_path, path_has_prefix, EntityKind, Language, RelationKind, RepoPath};
use crate::error::{Error, Result};
use crate::parsers::{parse_file, ParsedUnit, Span, Target};

pub type Attrs = BTreeMap<String, String>;

/// Which languages a build parses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum GraphMode {
    PythonOnly,
    CppOnly,
    QmlOnly,
    Mixed,
}

impl GraphMode {
    pub const ALL: [GraphMode; 4] = [GraphMode::PythonOnly, GraphMode::CppOnly, GraphMode::QmlOnly, GraphMode::Mixed];

    pub fn languages(self) -> &'static [Language] {
        match self {
            GraphMode::PythonOnly => &[Language::Python],
            GraphMode::CppOnly => &[Language::Cpp],
            GraphMode::QmlOnly => &[Language::Qml],
            GraphMode::Mixed => &[Language::Python, Language::Cpp, Language::Qml],
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            GraphMode::PythonOnly => "PYTHON_ONLY",
            GraphMode::CppOnly => "CPP_ONLY",
            GraphMode::QmlOnly => "QML_ONLY",
            GraphMode::Mixed => "MIXED",
        }
    }
}

impl fmt::Display for GraphMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for GraphMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "python_only" | "python" | "py" => Ok(GraphMode::PythonOnly),
            "cpp_only" | "cpp" | "c++" => Ok(GraphMode::CppOnly),
            "qml_only" | "qml" => Ok(GraphMode::QmlOnly),
            "mixed" | "all" => Ok(GraphMode::Mixed),
            _ => Err(Error::Config(format!("unknown graph mode {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Node {
    pub kind: EntityKind,
    pub language: Language,
    /// Repository path of the directory, file, or file holding the entity.
    pub path: String,
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub span: Option<Span>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub attrs: Attrs,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct EdgeKey {
    pub src: String,
    pub dst: String,
    pub kind: RelationKind,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Edge {
    pub src: String,
    pub dst: String,
    pub kind: RelationKind,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub attrs: Attrs,
}

/// Nodes keyed by qualified id; edges unique per `(src, dst, kind)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(into = "GraphDoc", try_from = "GraphDoc")]
pub struct DependencyGraph {
    mode: GraphMode,
    nodes: BTreeMap<String, Node>,
    edges: BTreeMap<EdgeKey, Attrs>,
}

#[derive(Serialize, Deserialize)]
struct NodeDoc {
    id: String,
    #[serde(flatten)]
    node: Node,
}

#[derive(Serialize, Deserialize)]
struct GraphDoc {
    mode: GraphMode,
    nodes: Vec<NodeDoc>,
    edges: Vec<Edge>,
}

impl From<DependencyGraph> for GraphDoc {
    fn from(g: DependencyGraph) -> Self {
        GraphDoc {
            mode: g.mode,
            nodes: g.nodes.into_iter().map(|(id, node)| NodeDoc { id, node }).collect(),
            edges: g.edges.into_iter().map(|(k, attrs)| Edge { src: k.src, dst: k.dst, kind: k.kind, attrs }).collect(),
        }
    }
}

impl TryFrom<GraphDoc> for DependencyGraph {
    type Error = Error;

    fn try_from(doc: GraphDoc) -> Result<Self> {
        let mut g = DependencyGraph::new(doc.mode);
        for NodeDoc { id, node } in doc.nodes {
            g.add_node(id, node)?;
        }
        for e in doc.edges {
            g.add_edge(&e.src, &e.dst, e.kind, e.attrs)?;
        }
        Ok(g)
    }
}

impl DependencyGraph {
    pub fn new(mode: GraphMode) -> Self {
        Self { mode, nodes: BTreeMap::new(), edges: BTreeMap::new() }
    }

    pub fn mode(&self) -> GraphMode {
        self.mode
    }

    pub fn node(&self, id: &str) -> Option<&Node> {
        self.nodes.get(id)
    }

    pub fn contains_node(&self, id: &str) -> bool {
        self.nodes.contains_key(id)
    }

    /// Nodes in id order.
    pub fn nodes(&self) -> impl Iterator<Item = (&str, &Node)> {
        self.nodes.iter().map(|(id, n)| (id.as_str(), n))
    }

    /// Edges in `(src, dst, kind)` order.
    pub fn edges(&self) -> impl Iterator<Item = (&EdgeKey, &Attrs)> {
        self.edges.iter()
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn has_edge(&self, src: &str, dst: &str, kind: RelationKind) -> bool {
        self.edges.contains_key(&EdgeKey { src: src.into(), dst: dst.into(), kind })
    }

    /// Inserts a node, merging attrs into an existing node of the same kind.
    pub fn add_node(&mut self, id: String, node: Node) -> Result<()> {
        match self.nodes.get_mut(&id) {
            Some(existing) if existing.kind != node.kind => {
                Err(Error::ConflictingKind { id, left: existing.kind, right: node.kind })
            }
            Some(existing) => {
                existing.attrs.extend(node.attrs);
                Ok(())
            }
            None => {
                self.nodes.insert(id, node);
                Ok(())
            }
        }
    }

    /// Inserts an edge between existing nodes; a repeated edge merges attrs.
    pub fn add_edge(&mut self, src: &str, dst: &str, kind: RelationKind, attrs: Attrs) -> Result<()> {
        for id in [src, dst] {
            if !self.nodes.contains_key(id) {
                return Err(Error::UnknownNode(id.to_string()));
            }
        }
        self.edges.entry(EdgeKey { src: src.into(), dst: dst.into(), kind }).or_default().extend(attrs);
        Ok(())
    }

    /// FILE nodes in id order.
    pub fn files(&self) -> impl Iterator<Item = &str> {
        self.nodes.iter().filter(|(_, n)| n.kind == EntityKind::File).map(|(id, _)| id.as_str())
    }

    /// The FILE node an entity lives in (the node itself for files).
    pub fn file_of(&self, id: &str) -> Option<&str> {
        let node = self.nodes.get(id)?;
        match node.kind {
            EntityKind::Directory => None,
            _ => self.nodes.get_key_value(node.path.as_str()).map(|(k, _)| k.as_str()),
        }
    }

    pub fn to_json(&self) -> String {
        let mut out = serde_json::to_string_pretty(self).expect("graph serializes");
        out.push('\n');
        out
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|source| Error::Json { context: "graph".into(), source })
    }

    /// SHA-256 of the canonical JSON form; identifies the build in sibling artifacts.
    pub fn snapshot_id(&self) -> String {
        hex::encode(Sha256::digest(self.to_json().as_bytes()))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    /// Checks that CONTAINS over DIRECTORY/FILE nodes is a forest.
    pub fn check_skeleton_forest(&self) -> std::result::Result<(), String> {
        let structural = |id: &str| matches!(self.nodes[id].kind, EntityKind::Directory | EntityKind::File);
        let mut parent: BTreeMap<&str, &str> = BTreeMap::new();
        for key in self.edges.keys() {
            if key.kind != RelationKind::Contains || !structural(&key.src) || !structural(&key.dst) {
                continue;
            }
            if let Some(prev) = parent.insert(&key.dst, &key.src) {
                return Err(format!("{} has two parents: {prev} and {}", key.dst, key.src));
            }
        }
        for start in parent.keys() {
            let mut seen = BTreeSet::new();
            let mut cur = *start;
            while let Some(&p) = parent.get(cur) {
                if !seen.insert(cur) {
                    return Err(format!("containment cycle through {cur}"));
                }
                cur = p;
            }
        }
        Ok(())
    }
}

/// Counters gathered during a build.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct BuildStats {
    pub files_by_language: BTreeMap<Language, usize>,
    pub parsed_files: usize,
    pub parse_warnings: usize,
    pub fallback_files: usize,
    pub unresolved_references: usize,
}

/// Walks `root`, parses files for `mode`, and returns the unified graph.
pub fn build_graph(root: &Path, mode: GraphMode) -> Result<DependencyGraph> {
    build_graph_with_stats(root, mode).map(|(g, _)| g)
}

pub fn build_graph_with_stats(root: &Path, mode: GraphMode) -> Result<(DependencyGraph, BuildStats)> {
    let tree = SourceTree::scan(root)?;
    let mut stats = BuildStats::default();
    for (path, _) in &tree.files {
        *stats.files_by_language.entry(Language::from_extension(path.extension())).or_default() += 1;
    }
    if mode != GraphMode::Mixed {
        let g = build_for_languages(&tree, mode, &mut stats)?;
        return Ok((g, stats));
    }
    let parts = [GraphMode::PythonOnly, GraphMode::CppOnly, GraphMode::QmlOnly]
        .into_iter()
        .map(|m| build_for_languages(&tree, m, &mut stats))
        .collect::<Result<Vec<_>>>()?;
    Ok((merge_graphs(&parts)?, stats))
}

/// The directory/file skeleton of a repository root.
struct SourceTree {
    dirs: Vec<String>,
    files: Vec<(RepoPath, PathBuf)>,
}

fn is_hidden(entry: &walkdir::DirEntry) -> bool {
    entry.depth() > 0 && entry.file_name().to_str().is_some_and(|n| n.starts_with('.'))
}

impl SourceTree {
    fn scan(root: &Path) -> Result<Self> {
        let meta = std::fs::metadata(root).map_err(|e| Error::io(root, e))?;
        if !meta.is_dir() {
            return Err(Error::io(
                root,
                std::io::Error::new(std::io::ErrorKind::NotADirectory, "root is not a directory"),
            ));
        }
        let canonical = root.canonicalize().map_err(|e| Error::io(root, e))?;
        let component =
            canonical.file_name().and_then(|n| n.to_str()).filter(|n| !n.is_empty()).unwrap_or("root").to_string();

        let mut dirs = Vec::new();
        let mut files = Vec::new();
        let walker = walkdir::WalkDir::new(root).sort_by_file_name().into_iter();
        for entry in walker.filter_entry(|e| !is_hidden(e)) {
            let entry = entry.map_err(|e| {
                let path = e.path().unwrap_or(root).to_path_buf();
                Error::io(&path, e.into())
            })?;
            let Ok(rel) = entry.path().strip_prefix(root) else { continue };
            let Some(rel) = rel.to_str() else { continue };
            let logical =
                if rel.is_empty() { component.clone() } else { format!("{component}/{}", rel.replace('\\', "/")) };
            let ft = entry.file_type();
            if ft.is_dir() {
                dirs.push(logical);
            } else if ft.is_file() {
                if let Ok(path) = parse_repo_path(&logical) {
                    files.push((path, entry.path().to_path_buf()));
                }
            }
        }
        Ok(Self { dirs, files })
    }

    fn skeleton(&self, mode: GraphMode) -> Result<DependencyGraph> {
        let mut g = DependencyGraph::new(mode);
        for dir in &self.dirs {
            let name = dir.rsplit('/').next().unwrap_or(dir).to_string();
            g.add_node(dir.clone(), structural_node(EntityKind::Directory, Language::Other, dir, name))?;
            if let Some((parent, _)) = dir.rsplit_once('/') {
                g.add_edge(parent, dir, RelationKind::Contains, Attrs::new())?;
            }
        }
        for (path, _) in &self.files {
            let id = path.to_string();
            let lang = Language::from_extension(path.extension());
            g.add_node(id.clone(), structural_node(EntityKind::File, lang, &id, path.filename().into()))?;
            g.add_edge(&path.parent_dir(), &id, RelationKind::Contains, Attrs::new())?;
        }
        Ok(g)
    }
}

fn structural_node(kind: EntityKind, language: Language, path: &str, name: String) -> Node {
    Node { kind, language, path: path.to_string(), name, span: None, attrs: Attrs::new() }
}

fn build_for_languages(tree: &SourceTree, mode: GraphMode, stats: &mut BuildStats) -> Result<DependencyGraph> {
    let mut g = tree.skeleton(mode)?;
    let langs = mode.languages();
    let selected: Vec<&(RepoPath, PathBuf)> =
        tree.files.iter().filter(|(p, _)| langs.contains(&Language::from_extension(p.extension()))).collect();
    let units: Vec<ParsedUnit> = selected
        .par_iter()
        .map(|(path, abs)| {
            let bytes = std::fs::read(abs).map_err(|e| Error::io(abs, e))?;
            Ok(parse_file(path, &String::from_utf8_lossy(&bytes)))
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .flatten()
        .collect();

    for unit in &units {
        stats.parsed_files += 1;
        stats.parse_warnings += unit.parse_warnings;
        stats.fallback_files += usize::from(unit.fallback_used);
        add_unit_entities(&mut g, unit)?;
    }
    let resolver = Resolver::new(&g);
    let mut pending = Vec::new();
    for unit in &units {
        for rel in &unit.relations {
            match &rel.dst {
                Target::Local(dst) => pending.push((rel.src.clone(), dst.clone(), rel.kind, rel.attrs.clone())),
                Target::Reference(name) => {
                    let targets = resolver.resolve(unit, rel.kind, &rel.src, name, &rel.attrs);
                    if targets.is_empty() {
                        stats.unresolved_references += 1;
                    }
                    let attrs = match rel.kind {
                        RelationKind::Inherits => rel.attrs.clone(),
                        _ => Attrs::new(),
                    };
                    for dst in targets {
                        if dst != rel.src {
                            pending.push((rel.src.clone(), dst, rel.kind, attrs.clone()));
                        }
                    }
                }
            }
        }
    }
    for (src, dst, kind, attrs) in pending {
        g.add_edge(&src, &dst, kind, attrs)?;
    }
    Ok(g)
}

fn add_unit_entities(g: &mut DependencyGraph, unit: &ParsedUnit) -> Result<()> {
    let file_id = unit.file_id();
    for e in &unit.entities {
        g.add_node(
            e.qualified_id.clone(),
            Node {
                kind: e.kind,
                language: unit.language,
                path: file_id.clone(),
                name: e.name.clone(),
                span: Some(e.span),
                attrs: e.attrs.clone(),
            },
        )?;
    }
    let top: Vec<String> = unit.top_level().map(|e| e.qualified_id.clone()).collect();
    for id in top {
        g.add_edge(&file_id, &id, RelationKind::Contains, Attrs::new())?;
    }
    Ok(())
}

/// Lexical `.`/`..` normalization; `None` when the path climbs above the root.
fn normalize(path: &str) -> Option<String> {
    let mut out: Vec<&str> = Vec::new();
    for part in path.split('/') {
        match part {
            "" | "." => {}
            ".." => {
                out.pop()?;
            }
            p => out.push(p),
        }
    }
    (!out.is_empty()).then(|| out.join("/"))
}

fn parent_of(path: &str) -> &str {
    path.rsplit_once('/').map_or("", |(p, _)| p)
}

struct Resolver<'g> {
    graph: &'g DependencyGraph,
    by_name: BTreeMap<&'g str, Vec<&'g str>>,
}

impl<'g> Resolver<'g> {
    fn new(graph: &'g DependencyGraph) -> Self {
        let mut by_name: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
        for (id, node) in &graph.nodes {
            if matches!(node.kind, EntityKind::Class | EntityKind::Function) {
                by_name.entry(node.name.as_str()).or_default().push(id.as_str());
            }
        }
        Self { graph, by_name }
    }

    fn is_kind(&self, id: &str, kind: EntityKind) -> bool {
        self.graph.nodes.get(id).is_some_and(|n| n.kind == kind)
    }

    fn resolve(&self, unit: &ParsedUnit, kind: RelationKind, src: &str, name: &str, attrs: &Attrs) -> Vec<String> {
        let file = unit.file_id();
        let mut out = match (kind, unit.language) {
            (RelationKind::Imports, Language::Cpp) => self.cpp_include(&file, name, attrs),
            (RelationKind::Imports, Language::Python) => self.python_import(&file, name, attrs),
            (RelationKind::Imports, Language::Qml) => self.qml_import(&file, name),
            (RelationKind::Inherits, _) => self.symbol(name, &[EntityKind::Class]),
            (RelationKind::Invokes, _) => self.symbol(name, &[EntityKind::Function, EntityKind::Class]),
            _ => Vec::new(),
        };
        out.retain(|d| d != src);
        out.sort();
        out.dedup();
        out
    }

    fn cpp_include(&self, file: &str, name: &str, attrs: &Attrs) -> Vec<String> {
        if attrs.get("system").is_some_and(|v| v == "true") {
            return Vec::new();
        }
        let component = file.split('/').next().unwrap_or_default();
        for base in [parent_of(file), component] {
            if let Some(p) = normalize(&format!("{base}/{name}")) {
                if self.is_kind(&p, EntityKind::File) {
                    return vec![p];
                }
            }
        }
        let tail: Vec<&str> = name.split('/').filter(|s| !matches!(*s, "" | "." | "..")).collect();
        if tail.is_empty() {
            return Vec::new();
        }
        let suffix = format!("/{}", tail.join("/"));
        self.graph
            .files()
            .filter(|f| f.ends_with(&suffix))
            .filter(|f| self.graph.nodes[*f].language == Language::Cpp)
            .map(str::to_string)
            .collect()
    }

    fn python_module(&self, dir: &str) -> Option<String> {
        let file = format!("{dir}.py");
        if self.is_kind(&file, EntityKind::File) {
            return Some(file);
        }
        let init = format!("{dir}/__init__.py");
        self.is_kind(&init, EntityKind::File).then_some(init)
    }

    fn python_import(&self, file: &str, module: &str, attrs: &Attrs) -> Vec<String> {
        let dots = module.chars().take_while(|&c| c == '.').count();
        let rest = &module[dots..];
        let component = file.split('/').next().unwrap_or_default().to_string();
        let bases: Vec<String> = if dots > 0 {
            let mut base = parent_of(file).to_string();
            for _ in 1..dots {
                base = parent_of(&base).to_string();
            }
            if base.is_empty() {
                return Vec::new();
            }
            vec![base]
        } else {
            let mut bases = vec![component];
            let own = parent_of(file).to_string();
            if !bases.contains(&own) {
                bases.push(own);
            }
            bases
        };
        let names: Vec<&str> = attrs
            .get("names")
            .map(|n| n.split(',').map(str::trim).filter(|s| !s.is_empty() && *s != "*").collect())
            .unwrap_or_default();
        let rel = rest.replace('.', "/");
        for base in bases {
            let module_dir = if rel.is_empty() { base.clone() } else { format!("{base}/{rel}") };
            let submodules: Vec<String> =
                names.iter().filter_map(|n| self.python_module(&format!("{module_dir}/{n}"))).collect();
            if !submodules.is_empty() {
                return submodules;
            }
            if !rel.is_empty() {
                if let Some(m) = self.python_module(&module_dir) {
                    return vec![m];
                }
            } else if let Some(m) = self.python_module(&module_dir).filter(|_| dots > 0) {
                return vec![m];
            }
        }
        Vec::new()
    }

    fn qml_files_in(&self, dir: &str) -> Vec<String> {
        self.graph
            .edges
            .range(EdgeKey { src: dir.into(), dst: String::new(), kind: RelationKind::Contains }..)
            .take_while(|(k, _)| k.src == dir)
            .filter(|(k, _)| k.kind == RelationKind::Contains)
            .filter(|(k, _)| {
                let n = &self.graph.nodes[&k.dst];
                n.kind == EntityKind::File && n.language == Language::Qml
            })
            .map(|(k, _)| k.dst.clone())
            .collect()
    }

    fn qml_import(&self, file: &str, name: &str) -> Vec<String> {
        let component = file.split('/').next().unwrap_or_default();
        let candidate =
            if name.contains('/') || name.starts_with('.') || name.ends_with(".qml") || name.ends_with(".js") {
                normalize(&format!("{}/{name}", parent_of(file)))
            } else if name.contains('.') {
                normalize(&format!("{component}/{}", name.replace('.', "/")))
            } else {
                normalize(&format!("{}/{name}", parent_of(file)))
                    .filter(|p| self.graph.nodes.contains_key(p))
                    .or_else(|| normalize(&format!("{component}/{name}")))
            };
        let Some(path) = candidate else { return Vec::new() };
        match self.graph.nodes.get(&path).map(|n| n.kind) {
            Some(EntityKind::File) => vec![path],
            Some(EntityKind::Directory) => self.qml_files_in(&path),
            _ => Vec::new(),
        }
    }

    fn symbol(&self, reference: &str, kinds: &[EntityKind]) -> Vec<String> {
        let parts: Vec<&str> = reference.split("::").flat_map(|p| p.split('.')).filter(|p| !p.is_empty()).collect();
        let Some(terminal) = parts.last() else { return Vec::new() };
        let candidates: Vec<&str> = self
            .by_name
            .get(terminal)
            .into_iter()
            .flatten()
            .copied()
            .filter(|id| kinds.contains(&self.graph.nodes[*id].kind))
            .collect();
        if parts.len() > 1 {
            let suffix = format!("::{}", parts.join("::"));
            let qualified: Vec<String> =
                candidates.iter().filter(|id| id.ends_with(&suffix)).map(|s| s.to_string()).collect();
            if !qualified.is_empty() {
                return qualified;
            }
        }
        candidates.into_iter().map(str::to_string).collect()
    }
}

/// Unions parts by node id and deduplicates edges; later parts win attr conflicts.
pub fn merge_graphs(parts: &[DependencyGraph]) -> Result<DependencyGraph> {
    let mut out = DependencyGraph::new(GraphMode::Mixed);
    for part in parts {
        for (id, node) in &part.nodes {
            out.add_node(id.clone(), node.clone())?;
        }
    }
    for part in parts {
        for (key, attrs) in &part.edges {
            out.add_edge(&key.src, &key.dst, key.kind, attrs.clone())?;
        }
    }
    Ok(out)
}

/// Ids whose name equals `query` ignoring case, optionally of one kind.
pub fn find_entities(g: &DependencyGraph, query: &str, kind: Option<EntityKind>) -> Vec<String> {
    if query.is_empty() {
        return Vec::new();
    }
    let needle = query.to_lowercase();
    g.nodes
        .iter()
        .filter(|(_, n)| kind.is_none_or(|k| n.kind == k))
        .filter(|(_, n)| n.name.to_lowercase() == needle)
        .map(|(id, _)| id.clone())
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Direction {
    Out,
    In,
    Both,
}

impl FromStr for Direction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "out" => Ok(Direction::Out),
            "in" => Ok(Direction::In),
            "both" => Ok(Direction::Both),
            _ => Err(Error::Config(format!("unknown direction {s:?}"))),
        }
    }
}

/// Nodes reached by a traversal with their hop depth, and the induced edges.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Subgraph {
    pub depth: BTreeMap<String, usize>,
    pub edges: Vec<EdgeKey>,
}

impl Subgraph {
    pub fn contains(&self, id: &str) -> bool {
        self.depth.contains_key(id)
    }

    /// Reached ids at exactly `d` hops.
    pub fn at_depth(&self, d: usize) -> Vec<&str> {
        self.depth.iter().filter(|(_, &x)| x == d).map(|(id, _)| id.as_str()).collect()
    }
}

/// Breadth-first expansion from `start` over edges of `kinds`, up to `hops` steps.
pub fn traverse(
    g: &DependencyGraph,
    start: &str,
    kinds: &[RelationKind],
    direction: Direction,
    hops: usize,
) -> Result<Subgraph> {
    if !g.contains_node(start) {
        return Err(Error::UnknownNode(start.to_string()));
    }
    let mut adjacency: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
    for key in g.edges.keys().filter(|k| kinds.contains(&k.kind)) {
        if matches!(direction, Direction::Out | Direction::Both) {
            adjacency.entry(&key.src).or_default().push(&key.dst);
        }
        if matches!(direction, Direction::In | Direction::Both) {
            adjacency.entry(&key.dst).or_default().push(&key.src);
        }
    }
    let mut depth: BTreeMap<String, usize> = BTreeMap::from([(start.to_string(), 0)]);
    let mut queue = VecDeque::from([(start, 0usize)]);
    while let Some((id, d)) = queue.pop_front() {
        if d == hops {
            continue;
        }
        for &next in adjacency.get(id).into_iter().flatten() {
            if !depth.contains_key(next) {
                depth.insert(next.to_string(), d + 1);
                queue.push_back((next, d + 1));
            }
        }
    }
    let edges = g
        .edges
        .keys()
        .filter(|k| kinds.contains(&k.kind) && depth.contains_key(&k.src) && depth.contains_key(&k.dst))
        .cloned()
        .collect();
    Ok(Subgraph { depth, edges })
}

/// Induced subgraph of nodes under any prefix, plus their ancestor directories.
pub fn restrict_scope(g: &DependencyGraph, prefixes: &[String]) -> DependencyGraph {
    let mut keep: BTreeSet<&str> = BTreeSet::new();
    for (id, node) in &g.nodes {
        if prefixes.iter().any(|p| path_has_prefix(&node.path, p)) {
            keep.insert(id);
            let mut cur = node.path.as_str();
            while let Some((parent, _)) = cur.rsplit_once('/') {
                if let Some((pid, _)) = g.nodes.get_key_value(parent) {
                    keep.insert(pid);
                }
                cur = parent;
            }
            if node.kind != EntityKind::Directory {
                if let Some((pid, _)) = g.nodes.get_key_value(node.path.as_str()) {
                    keep.insert(pid);
                }
            }
        }
    }
    let mut out = DependencyGraph::new(g.mode);
    out.nodes = keep.iter().map(|id| (id.to_string(), g.nodes[*id].clone())).collect();
    out.edges = g
        .edges
        .iter()
        .filter(|(k, _)| keep.contains(k.src.as_str()) && keep.contains(k.dst.as_str()))
        .map(|(k, a)| (k.clone(), a.clone()))
        .collect();
    out
}
