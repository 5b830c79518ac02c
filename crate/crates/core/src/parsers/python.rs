//! Indentation-driven Python extractor.
//!
//! Source is first folded into logical lines (bracket continuation, backslash
//! continuation, strings blanked, comments removed), then `class`/`def`
//! headers open scopes that close on dedent.

use std::collections::BTreeMap;
use std::sync::OnceLock;

use regex::Regex;

use super::{line_count, Duplicates, ParsedUnit, Span, UnitBuilder};
use crate::domain::{EntityKind, Language, RelationKind, RepoPath};

const KEYWORDS: &[&str] = &[
    "and", "as", "assert", "async", "await", "break", "class", "continue", "def", "del", "elif", "else", "except",
    "finally", "for", "from", "global", "if", "import", "in", "is", "lambda", "nonlocal", "not", "or", "pass", "raise",
    "return", "try", "while", "with", "yield", "print",
];

struct LogicalLine {
    text: String,
    start: u32,
    end: u32,
    indent: usize,
}

/// Folds physical lines into logical lines; returns the lines and the number
/// of malformed regions (unterminated strings, unbalanced brackets).
fn logical_lines(source: &str) -> (Vec<LogicalLine>, usize) {
    let chars: Vec<char> = source.chars().collect();
    let mut out = Vec::new();
    let mut warnings = 0;
    let mut i = 0;
    let mut line: u32 = 1;
    let mut text = String::new();
    let mut start = 1;
    let mut indent = 0;
    let mut at_line_start = true;
    let mut depth: i32 = 0;

    let flush = |text: &mut String, out: &mut Vec<LogicalLine>, start: u32, end: u32, indent: usize| {
        if !text.trim().is_empty() {
            out.push(LogicalLine { text: text.trim().to_string(), start, end, indent });
        }
        text.clear();
    };

    while i < chars.len() {
        let c = chars[i];
        if at_line_start {
            let mut col = 0;
            while i < chars.len() && (chars[i] == ' ' || chars[i] == '\t') {
                col = if chars[i] == '\t' { (col / 8 + 1) * 8 } else { col + 1 };
                i += 1;
            }
            indent = col;
            start = line;
            at_line_start = false;
            continue;
        }
        match c {
            '#' => {
                while i < chars.len() && chars[i] != '\n' {
                    i += 1;
                }
            }
            '\'' | '"' => {
                let triple = i + 2 < chars.len() && chars[i + 1] == c && chars[i + 2] == c;
                let quote_len = if triple { 3 } else { 1 };
                i += quote_len;
                let mut closed = false;
                while i < chars.len() {
                    if chars[i] == '\\' {
                        if i + 1 < chars.len() && chars[i + 1] == '\n' {
                            line += 1;
                        }
                        i += 2;
                        continue;
                    }
                    if chars[i] == '\n' {
                        if !triple {
                            break;
                        }
                        line += 1;
                    }
                    if chars[i] == c && (!triple || (i + 2 < chars.len() && chars[i + 1] == c && chars[i + 2] == c)) {
                        i += quote_len;
                        closed = true;
                        break;
                    }
                    i += 1;
                }
                if !closed {
                    warnings += 1;
                }
                text.push_str("\"\"");
            }
            '\\' if i + 1 < chars.len() && chars[i + 1] == '\n' => {
                i += 2;
                line += 1;
                text.push(' ');
            }
            '\n' => {
                i += 1;
                if depth > 0 && starts_statement(&chars[i..], indent) {
                    // An unclosed bracket would swallow the next definition; cut the
                    // broken line here instead.
                    warnings += 1;
                    depth = 0;
                }
                if depth > 0 {
                    line += 1;
                    text.push(' ');
                } else {
                    flush(&mut text, &mut out, start, line, indent);
                    line += 1;
                    at_line_start = true;
                }
            }
            '(' | '[' | '{' => {
                depth += 1;
                text.push(c);
                i += 1;
            }
            ')' | ']' | '}' => {
                depth -= 1;
                if depth < 0 {
                    warnings += 1;
                    depth = 0;
                }
                text.push(c);
                i += 1;
            }
            _ => {
                text.push(c);
                i += 1;
            }
        }
    }
    if depth > 0 {
        // Unclosed bracket swallowed the rest of the file; drop that region.
        warnings += 1;
        text.clear();
    }
    flush(&mut text, &mut out, start, line, indent);
    (out, warnings)
}

/// True when the physical line at `rest` starts a def/class/import at or left
/// of `indent`.
fn starts_statement(rest: &[char], indent: usize) -> bool {
    let mut col = 0;
    let mut i = 0;
    while i < rest.len() && (rest[i] == ' ' || rest[i] == '\t') {
        col = if rest[i] == '\t' { (col / 8 + 1) * 8 } else { col + 1 };
        i += 1;
    }
    if col > indent {
        return false;
    }
    let head: String = rest[i..].iter().take(12).collect();
    ["def ", "class ", "async def ", "import ", "from ", "@"].iter().any(|kw| head.starts_with(kw))
}

fn def_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"^(?:async\s+)?def\s+([A-Za-z_]\w*)\s*\(").unwrap())
}

fn class_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"^class\s+([A-Za-z_]\w*)\s*(\(|:)").unwrap())
}

fn call_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"([A-Za-z_]\w*)\s*\(").unwrap())
}

/// Position just past the bracket group opened at `open`, if it closes.
fn close_of(text: &str, open: usize) -> Option<usize> {
    let mut depth = 0i32;
    for (idx, ch) in text[open..].char_indices() {
        match ch {
            '(' | '[' | '{' => depth += 1,
            ')' | ']' | '}' => {
                depth -= 1;
                if depth == 0 {
                    return Some(open + idx + 1);
                }
            }
            _ => {}
        }
    }
    None
}

/// Splits on top-level commas.
fn split_top(text: &str) -> Vec<&str> {
    let mut parts = Vec::new();
    let mut depth = 0i32;
    let mut last = 0;
    for (idx, ch) in text.char_indices() {
        match ch {
            '(' | '[' | '{' => depth += 1,
            ')' | ']' | '}' => depth -= 1,
            ',' if depth == 0 => {
                parts.push(text[last..idx].trim());
                last = idx + 1;
            }
            _ => {}
        }
    }
    parts.push(text[last..].trim());
    parts.into_iter().filter(|p| !p.is_empty()).collect()
}

struct Scope {
    indent: usize,
    id: String,
    /// Qualification chain used for children (`"A::f"`).
    chain: String,
    is_function: bool,
}

pub fn parse_python(file: &RepoPath, source: &str) -> ParsedUnit {
    let mut unit = UnitBuilder::new(file, Language::Python, Duplicates::Merge);
    let (lines, warnings) = logical_lines(source);
    unit.warnings += warnings;
    let file_id = unit.file_id().to_string();
    let mut stack: Vec<Scope> = Vec::new();

    for line in &lines {
        while stack.last().is_some_and(|s| s.indent >= line.indent) {
            stack.pop();
        }
        for scope in &stack {
            unit.set_end(&scope.id, line.end);
        }
        let text = line.text.as_str();
        if text.starts_with('@') {
            continue;
        }
        let outer = stack.last().map(|s| s.chain.clone()).unwrap_or_default();
        let parent = stack.last().map(|s| s.id.clone());

        if let Some(caps) = def_re().captures(text) {
            let name = caps.get(1).unwrap().as_str();
            let open = caps.get(0).unwrap().end() - 1;
            let Some(close) = close_of(text, open) else {
                unit.warnings += 1;
                continue;
            };
            let Some(colon) = header_colon(text, close) else {
                unit.warnings += 1;
                continue;
            };
            let id = unit.entity(EntityKind::Function, name, &outer, Span { start: line.start, end: line.end });
            if let Some(parent) = &parent {
                unit.contains(parent, &id);
            }
            let chain = join_chain(&outer, name);
            let body = &text[colon + 1..];
            record_calls(&mut unit, &id, body);
            stack.push(Scope { indent: line.indent, id, chain, is_function: true });
            continue;
        }

        if let Some(caps) = class_re().captures(text) {
            let name = caps.get(1).unwrap().as_str();
            let marker = caps.get(2).unwrap();
            let (bases, after) = if marker.as_str() == "(" {
                let open = marker.start();
                let Some(close) = close_of(text, open) else {
                    unit.warnings += 1;
                    continue;
                };
                (split_top(&text[open + 1..close - 1]), close)
            } else {
                (Vec::new(), marker.start())
            };
            let Some(colon) = header_colon(text, after) else {
                unit.warnings += 1;
                continue;
            };
            let id = unit.entity(EntityKind::Class, name, &outer, Span { start: line.start, end: line.end });
            if let Some(parent) = &parent {
                unit.contains(parent, &id);
            }
            for base in bases {
                if base.contains('=') || base.starts_with('*') {
                    continue;
                }
                let base = base.split('[').next().unwrap_or(base).trim();
                if is_dotted_name(base) && base != "object" {
                    unit.reference(RelationKind::Inherits, &id, base, BTreeMap::new());
                }
            }
            let chain = join_chain(&outer, name);
            record_calls(&mut unit, &id, &text[colon + 1..]);
            stack.push(Scope { indent: line.indent, id, chain, is_function: false });
            continue;
        }

        if let Some(rest) = text.strip_prefix("import ") {
            for item in split_top(rest) {
                let module = item.split_whitespace().next().unwrap_or("");
                if is_module_ref(module) {
                    unit.reference(RelationKind::Imports, &file_id, module, BTreeMap::new());
                }
            }
            continue;
        }
        if let Some(rest) = text.strip_prefix("from ") {
            let mut words = rest.splitn(2, " import ");
            let module = words.next().unwrap_or("").trim();
            let names = words.next().unwrap_or("").trim().trim_start_matches('(').trim_end_matches(')');
            if is_module_ref(module) {
                let names: Vec<&str> = split_top(names)
                    .into_iter()
                    .filter_map(|n| n.split_whitespace().next())
                    .filter(|n| *n != "*")
                    .collect();
                let mut attrs = BTreeMap::new();
                if !names.is_empty() {
                    attrs.insert("names".to_string(), names.join(","));
                }
                unit.reference(RelationKind::Imports, &file_id, module, attrs);
            } else {
                unit.warnings += 1;
            }
            continue;
        }

        let caller = stack
            .iter()
            .rev()
            .find(|s| s.is_function)
            .or(stack.last())
            .map(|s| s.id.clone())
            .unwrap_or_else(|| file_id.clone());
        record_calls(&mut unit, &caller, text);
    }
    unit.finish(line_count(source), false)
}

/// Finds the `:` ending a def/class header at bracket depth 0 after `from`.
fn header_colon(text: &str, from: usize) -> Option<usize> {
    let mut depth = 0i32;
    for (idx, ch) in text[from..].char_indices() {
        match ch {
            '(' | '[' | '{' => depth += 1,
            ')' | ']' | '}' => depth -= 1,
            ':' if depth == 0 => return Some(from + idx),
            _ => {}
        }
    }
    None
}

fn join_chain(outer: &str, name: &str) -> String {
    if outer.is_empty() {
        name.to_string()
    } else {
        format!("{outer}::{name}")
    }
}

fn is_dotted_name(s: &str) -> bool {
    !s.is_empty()
        && s.split('.').all(|part| {
            let mut chars = part.chars();
            matches!(chars.next(), Some(c) if c.is_alphabetic() || c == '_')
                && chars.all(|c| c.is_alphanumeric() || c == '_')
        })
}

fn is_module_ref(s: &str) -> bool {
    let trimmed = s.trim_start_matches('.');
    (trimmed.is_empty() && !s.is_empty()) || is_dotted_name(trimmed)
}

fn record_calls(unit: &mut UnitBuilder, caller: &str, text: &str) {
    for caps in call_re().captures_iter(text) {
        let name = caps.get(1).unwrap().as_str();
        if KEYWORDS.contains(&name) {
            continue;
        }
        unit.reference(RelationKind::Invokes, caller, name, BTreeMap::new());
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parsers::test_support::*;
    use crate::parsers::Target;

    #[test]
    fn class_with_method() {
        let unit = parse_python(&path("pkg/m.py"), "class A:\n  def f(self): pass\n");
        check_invariants(&unit);
        assert_eq!(names(&unit), vec![(EntityKind::Class, "A".into()), (EntityKind::Function, "A::f".into())]);
        assert_eq!(local_edges(&unit, RelationKind::Contains), vec![("A".into(), "A::f".into())]);
        assert_eq!(unit.entities[0].span, Span { start: 1, end: 2 });
    }

    #[test]
    fn external_import_is_a_reference() {
        let unit = parse_python(&path("pkg/m.py"), "import os\n");
        let rel = &unit.relations[0];
        assert_eq!(rel.kind, RelationKind::Imports);
        assert_eq!(rel.src, "pkg/m.py");
        assert_eq!(rel.dst, Target::Reference("os".into()));
    }

    #[test]
    fn inheritance_fixture() {
        // Hand-enumerated class graph: B(A), C(B, mixins.Log), D(metaclass=M).
        let src = "class A:\n    pass\n\nclass B(A): ...\n\nclass C(B, mixins.Log):\n    x = 1\n\nclass D(metaclass=M):\n    pass\n";
        let unit = parse_python(&path("pkg/h.py"), src);
        check_invariants(&unit);
        let mut edges = local_edges(&unit, RelationKind::Inherits);
        edges.sort();
        assert_eq!(
            edges,
            vec![
                ("B".to_string(), "A".to_string()),
                ("C".to_string(), "B".to_string()),
                ("C".to_string(), "mixins.Log".to_string()),
            ]
        );
    }

    #[test]
    fn from_imports_record_names() {
        let unit = parse_python(
            &path("pkg/m.py"),
            "from app.util import (\n    Loader,\n    read_text as rt,\n)\nfrom . import sibling\n",
        );
        assert_eq!(unit.relations.len(), 2);
        assert_eq!(unit.relations[0].dst, Target::Reference("app.util".into()));
        assert_eq!(unit.relations[0].attrs["names"], "Loader,read_text");
        assert_eq!(unit.relations[1].dst, Target::Reference(".".into()));
        assert_eq!(unit.relations[1].attrs["names"], "sibling");
    }

    #[test]
    fn calls_are_attributed_to_innermost_function() {
        let src = "def outer():\n    helper()\n    def inner():\n        obj.method(x)\n    return inner\n\nsetup()\n";
        let unit = parse_python(&path("pkg/c.py"), src);
        check_invariants(&unit);
        let edges = local_edges(&unit, RelationKind::Invokes);
        assert!(edges.contains(&("outer".into(), "helper".into())));
        assert!(edges.contains(&("outer::inner".into(), "method".into())));
        assert!(edges.contains(&("pkg/c.py".into(), "setup".into())));
        assert!(!edges.iter().any(|(_, callee)| callee == "return"));
    }

    #[test]
    fn strings_and_comments_hide_code() {
        let src = "def f():\n    \"\"\"calls g() in prose\n    class Fake:\n    \"\"\"\n    # h()\n    return 'k()'\n";
        let unit = parse_python(&path("pkg/s.py"), src);
        check_invariants(&unit);
        assert_eq!(names(&unit), vec![(EntityKind::Function, "f".into())]);
        assert!(local_edges(&unit, RelationKind::Invokes).is_empty());
        assert_eq!(unit.entities[0].span, Span { start: 1, end: 6 });
    }

    #[test]
    fn broken_regions_are_skipped_with_warnings() {
        let src = "def ok():\n    pass\n\ndef broken(:\n    pass\n\nclass Good:\n    pass\n\nx = call(1, 2\n";
        let unit = parse_python(&path("pkg/b.py"), src);
        check_invariants(&unit);
        assert!(unit.parse_warnings >= 1);
        let found: Vec<String> = names(&unit).into_iter().map(|(_, n)| n).collect();
        assert!(found.contains(&"ok".to_string()));
        assert!(found.contains(&"Good".to_string()));
    }

    #[test]
    fn redefinitions_merge() {
        let src = "class P:\n    @property\n    def x(self):\n        return 1\n    @x.setter\n    def x(self, v):\n        pass\n";
        let unit = parse_python(&path("pkg/p.py"), src);
        check_invariants(&unit);
        assert_eq!(unit.entities.len(), 2);
    }

    #[test]
    fn deterministic() {
        let src = "import a\nclass A(B):\n    def f(self):\n        g()\n";
        assert_eq!(parse_python(&path("p/x.py"), src), parse_python(&path("p/x.py"), src));
    }
}
