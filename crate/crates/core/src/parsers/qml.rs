//! QML extraction: a recursive-descent parse of the document grammar, and a
//! brace-tracking pattern extractor used when the grammar parse fails.
//!
//! Object nesting becomes CONTAINS. Declared properties, bindings and the
//! object `id` are recorded as attributes on the component entity; they do
//! not create edges.

use std::collections::BTreeMap;
use std::sync::OnceLock;

use regex::Regex;

use super::{line_count, Duplicates, ParsedUnit, Span, UnitBuilder};
use crate::domain::{EntityKind, Language, RelationKind, RepoPath};

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Str(String),
    Num,
    Punct(char),
    Newline,
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    line: u32,
}

/// Tokenizes QML/JS; comments vanish, string bodies are kept (imports need them).
fn tokenize(source: &str) -> Result<Vec<Token>, String> {
    let chars: Vec<char> = source.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    let mut line = 1;
    while i < chars.len() {
        let c = chars[i];
        match c {
            '\n' => {
                out.push(Token { tok: Tok::Newline, line });
                line += 1;
                i += 1;
            }
            c if c.is_whitespace() => i += 1,
            '/' if chars.get(i + 1) == Some(&'/') => {
                while i < chars.len() && chars[i] != '\n' {
                    i += 1;
                }
            }
            '/' if chars.get(i + 1) == Some(&'*') => {
                let start_line = line;
                i += 2;
                loop {
                    if i + 1 >= chars.len() {
                        return Err(format!("unterminated comment from line {start_line}"));
                    }
                    if chars[i] == '*' && chars[i + 1] == '/' {
                        i += 2;
                        break;
                    }
                    if chars[i] == '\n' {
                        line += 1;
                    }
                    i += 1;
                }
            }
            '"' | '\'' | '`' => {
                let start_line = line;
                let mut body = String::new();
                i += 1;
                loop {
                    let Some(&ch) = chars.get(i) else {
                        return Err(format!("unterminated string from line {start_line}"));
                    };
                    if ch == '\\' {
                        if let Some(&next) = chars.get(i + 1) {
                            body.push(next);
                        }
                        i += 2;
                        continue;
                    }
                    if ch == c {
                        i += 1;
                        break;
                    }
                    if ch == '\n' {
                        if c != '`' {
                            return Err(format!("newline in string on line {line}"));
                        }
                        line += 1;
                    }
                    body.push(ch);
                    i += 1;
                }
                out.push(Token { tok: Tok::Str(body), line: start_line });
            }
            c if c.is_alphabetic() || c == '_' || c == '$' => {
                let start = i;
                while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_' || chars[i] == '$') {
                    i += 1;
                }
                out.push(Token { tok: Tok::Ident(chars[start..i].iter().collect()), line });
            }
            c if c.is_ascii_digit() => {
                while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '.') {
                    i += 1;
                }
                out.push(Token { tok: Tok::Num, line });
            }
            _ => {
                out.push(Token { tok: Tok::Punct(c), line });
                i += 1;
            }
        }
    }
    Ok(out)
}

type ParseResult<T> = Result<T, String>;

struct Grammar<'a> {
    toks: &'a [Token],
    pos: usize,
    unit: UnitBuilder,
}

impl<'a> Grammar<'a> {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|t| &t.tok)
    }

    fn peek_at(&self, offset: usize) -> Option<&Tok> {
        self.toks.get(self.pos + offset).map(|t| &t.tok)
    }

    fn line(&self) -> u32 {
        self.toks.get(self.pos).or_else(|| self.toks.last()).map(|t| t.line).unwrap_or(1)
    }

    fn skip_newlines(&mut self) {
        while matches!(self.peek(), Some(Tok::Newline) | Some(Tok::Punct(';'))) {
            self.pos += 1;
        }
    }

    fn is_punct(&self, c: char) -> bool {
        self.peek() == Some(&Tok::Punct(c))
    }

    fn expect_punct(&mut self, c: char) -> ParseResult<u32> {
        if self.is_punct(c) {
            let line = self.line();
            self.pos += 1;
            Ok(line)
        } else {
            Err(format!("expected {c:?} on line {}, found {:?}", self.line(), self.peek()))
        }
    }

    fn ident(&mut self) -> ParseResult<String> {
        match self.peek() {
            Some(Tok::Ident(s)) => {
                let s = s.clone();
                self.pos += 1;
                Ok(s)
            }
            other => Err(format!("expected identifier on line {}, found {other:?}", self.line())),
        }
    }

    /// Dotted identifier starting at `pos + offset`; returns (name, token count).
    fn dotted_at(&self, offset: usize) -> Option<(String, usize)> {
        let mut name = match self.peek_at(offset)? {
            Tok::Ident(s) => s.clone(),
            _ => return None,
        };
        let mut n = 1;
        while self.peek_at(offset + n) == Some(&Tok::Punct('.')) {
            match self.peek_at(offset + n + 1) {
                Some(Tok::Ident(s)) => {
                    name.push('.');
                    name.push_str(s);
                    n += 2;
                }
                _ => break,
            }
        }
        Some((name, n))
    }

    /// Whether an object declaration (`Type {` or `Type on prop {`) starts at `pos`.
    fn object_ahead(&self) -> bool {
        let Some((name, n)) = self.dotted_at(0) else { return false };
        if !is_type_name(&name) {
            return false;
        }
        match self.peek_at(n) {
            Some(Tok::Punct('{')) => true,
            Some(Tok::Ident(on)) if on == "on" => true,
            _ => false,
        }
    }

    fn document(&mut self) -> ParseResult<()> {
        let file_id = self.unit.file_id().to_string();
        loop {
            self.skip_newlines();
            match self.peek() {
                Some(Tok::Ident(kw)) if kw == "import" => {
                    self.pos += 1;
                    let target = match self.peek() {
                        Some(Tok::Str(s)) => {
                            let s = s.clone();
                            self.pos += 1;
                            s
                        }
                        _ => self
                            .dotted_at(0)
                            .map(|(name, n)| {
                                self.pos += n;
                                name
                            })
                            .ok_or_else(|| format!("bad import on line {}", self.line()))?,
                    };
                    while !matches!(self.peek(), None | Some(Tok::Newline) | Some(Tok::Punct(';'))) {
                        self.pos += 1;
                    }
                    self.unit.reference(RelationKind::Imports, &file_id, &target, BTreeMap::new());
                }
                Some(Tok::Ident(kw)) if kw == "pragma" => {
                    while !matches!(self.peek(), None | Some(Tok::Newline)) {
                        self.pos += 1;
                    }
                }
                _ => break,
            }
        }
        if self.peek().is_none() {
            return Ok(());
        }
        if !self.object_ahead() {
            return Err(format!("expected root object on line {}", self.line()));
        }
        self.object(None, "")?;
        self.skip_newlines();
        if self.peek().is_some() {
            return Err(format!("trailing content on line {}", self.line()));
        }
        Ok(())
    }

    /// Parses `Type [on prop] { members }`; returns the entity id.
    fn object(&mut self, parent: Option<&str>, chain: &str) -> ParseResult<String> {
        let (name, n) = self.dotted_at(0).ok_or("expected type name")?;
        let start = self.line();
        self.pos += n;
        if matches!(self.peek(), Some(Tok::Ident(on)) if on == "on") {
            self.pos += 1;
            let (_, m) = self.dotted_at(0).ok_or("expected property after `on`")?;
            self.pos += m;
        }
        self.object_body(&name, parent, chain, start)
    }

    fn object_body(&mut self, name: &str, parent: Option<&str>, chain: &str, start: u32) -> ParseResult<String> {
        self.expect_punct('{')?;
        let id = self.unit.entity(EntityKind::QmlComponent, name, chain, Span { start, end: start });
        if let Some(parent) = parent {
            self.unit.contains(parent, &id);
        }
        let own_chain = id.strip_prefix(&format!("{}::", self.unit.file_id())).unwrap_or(&id).to_string();
        let mut bindings = Vec::new();
        let mut properties = Vec::new();
        let mut qml_id = None;
        loop {
            self.skip_newlines();
            if self.is_punct(',') {
                self.pos += 1;
                continue;
            }
            if self.is_punct('}') {
                let end = self.expect_punct('}')?;
                self.unit.set_end(&id, end);
                break;
            }
            if self.peek().is_none() {
                return Err(format!("unterminated object {name} opened on line {start}"));
            }
            self.member(&id, &own_chain, &mut bindings, &mut properties, &mut qml_id)?;
        }
        if let Some(qml_id) = qml_id {
            self.unit.set_attr(&id, "qml_id", qml_id);
        }
        if !bindings.is_empty() {
            bindings.sort();
            bindings.dedup();
            self.unit.set_attr(&id, "bindings", bindings.join(","));
        }
        if !properties.is_empty() {
            self.unit.set_attr(&id, "properties", properties.join(","));
        }
        Ok(id)
    }

    fn member(
        &mut self,
        id: &str,
        chain: &str,
        bindings: &mut Vec<String>,
        properties: &mut Vec<String>,
        qml_id: &mut Option<String>,
    ) -> ParseResult<()> {
        if self.object_ahead() {
            self.object(Some(id), chain)?;
            return Ok(());
        }
        let word = match self.peek() {
            Some(Tok::Ident(w)) => w.clone(),
            other => return Err(format!("unexpected {other:?} on line {}", self.line())),
        };
        match word.as_str() {
            "default" | "readonly" | "required" | "property" if self.property_decl_ahead() => {
                while matches!(self.peek(), Some(Tok::Ident(w)) if w != "property") {
                    self.pos += 1;
                }
                self.pos += 1; // property
                               // type, possibly list<T>
                self.ident()?;
                if self.is_punct('<') {
                    while !self.is_punct('>') {
                        if self.peek().is_none() {
                            return Err("unterminated property type".into());
                        }
                        self.pos += 1;
                    }
                    self.pos += 1;
                }
                let prop = self.ident()?;
                properties.push(prop);
                if self.is_punct(':') {
                    self.pos += 1;
                    self.value(id, chain)?;
                }
                Ok(())
            }
            "required" => {
                self.pos += 1;
                self.ident()?;
                Ok(())
            }
            "signal" => {
                self.pos += 1;
                self.ident()?;
                if self.is_punct('(') {
                    self.balanced('(', ')')?;
                }
                Ok(())
            }
            "function" => {
                let start = self.line();
                self.pos += 1;
                let fname = self.ident()?;
                self.balanced('(', ')')?;
                if self.is_punct(':') {
                    self.pos += 1;
                    self.ident()?;
                }
                let fid = self.unit.entity(EntityKind::Function, &fname, chain, Span { start, end: start });
                self.unit.contains(id, &fid);
                let end = self.balanced('{', '}')?;
                self.unit.set_end(&fid, end);
                Ok(())
            }
            "enum" => {
                self.pos += 1;
                self.ident()?;
                self.balanced('{', '}')?;
                Ok(())
            }
            "component"
                if matches!(self.peek_at(1), Some(Tok::Ident(_))) && self.peek_at(2) == Some(&Tok::Punct(':')) =>
            {
                let start = self.line();
                self.pos += 1;
                let cname = self.ident()?;
                self.expect_punct(':')?;
                let (base, n) = self.dotted_at(0).ok_or("expected component base type")?;
                self.pos += n;
                let cid = self.object_body(&cname, Some(id), chain, start)?;
                self.unit.set_attr(&cid, "base", base);
                Ok(())
            }
            _ => {
                let (name, n) = self.dotted_at(0).ok_or("expected binding name")?;
                self.pos += n;
                self.expect_punct(':')?;
                if name == "id" {
                    *qml_id = Some(self.ident()?);
                } else {
                    bindings.push(name);
                    self.value(id, chain)?;
                }
                Ok(())
            }
        }
    }

    fn property_decl_ahead(&self) -> bool {
        let mut k = 0;
        while let Some(Tok::Ident(w)) = self.peek_at(k) {
            if w == "property" {
                return matches!(self.peek_at(k + 1), Some(Tok::Ident(_)));
            }
            if !matches!(w.as_str(), "default" | "readonly" | "required") {
                return false;
            }
            k += 1;
        }
        false
    }

    /// Consumes a balanced group starting at the current `open`; returns the
    /// line of the closing token.
    fn balanced(&mut self, open: char, close: char) -> ParseResult<u32> {
        let start = self.line();
        self.expect_punct(open)?;
        let mut depth = 1;
        while let Some(tok) = self.peek() {
            match tok {
                Tok::Punct(c) if *c == open => depth += 1,
                Tok::Punct(c) if *c == close => {
                    depth -= 1;
                    if depth == 0 {
                        let line = self.line();
                        self.pos += 1;
                        return Ok(line);
                    }
                }
                _ => {}
            }
            self.pos += 1;
        }
        Err(format!("unbalanced {open:?} opened on line {start}"))
    }

    /// Right-hand side of a binding: object, list, JS block or expression.
    fn value(&mut self, parent: &str, chain: &str) -> ParseResult<()> {
        if self.object_ahead() {
            self.object(Some(parent), chain)?;
            return Ok(());
        }
        if self.is_punct('[') {
            self.pos += 1;
            loop {
                self.skip_newlines_only();
                if self.is_punct(']') {
                    self.pos += 1;
                    return Ok(());
                }
                if self.is_punct(',') {
                    self.pos += 1;
                    continue;
                }
                if self.object_ahead() {
                    self.object(Some(parent), chain)?;
                } else {
                    self.expression(&[',', ']'])?;
                }
                if self.peek().is_none() {
                    return Err("unterminated list".into());
                }
            }
        }
        if self.is_punct('{') {
            self.balanced('{', '}')?;
            return Ok(());
        }
        self.expression(&[';', '}'])
    }

    fn skip_newlines_only(&mut self) {
        while matches!(self.peek(), Some(Tok::Newline)) {
            self.pos += 1;
        }
    }

    /// JS expression up to a newline or one of `stops` at nesting depth 0.
    fn expression(&mut self, stops: &[char]) -> ParseResult<()> {
        let mut depth = 0i32;
        let mut consumed = 0;
        let mut last: Option<Tok> = None;
        while let Some(tok) = self.peek().cloned() {
            match &tok {
                Tok::Punct('(' | '[' | '{') => depth += 1,
                Tok::Punct(')' | ']' | '}') if depth > 0 => depth -= 1,
                Tok::Punct(c) if depth == 0 && stops.contains(c) => break,
                Tok::Punct(')' | ']' | '}') => return Err(format!("unbalanced closer on line {}", self.line())),
                Tok::Newline if depth == 0 => {
                    let continues = matches!(
                        &last,
                        Some(Tok::Punct(c)) if !matches!(c, ')' | ']' | '}')
                    ) || consumed == 0;
                    if !continues {
                        break;
                    }
                }
                _ => {}
            }
            if tok != Tok::Newline {
                last = Some(tok);
                consumed += 1;
            }
            self.pos += 1;
        }
        if depth != 0 {
            return Err("unbalanced expression".into());
        }
        if consumed == 0 {
            return Err(format!("empty binding value on line {}", self.line()));
        }
        Ok(())
    }
}

fn is_type_name(dotted: &str) -> bool {
    dotted.rsplit('.').next().and_then(|s| s.chars().next()).is_some_and(|c| c.is_uppercase())
}

/// Grammar-based parse; `Err` carries the reason the document was rejected.
pub fn parse_qml_grammar(file: &RepoPath, source: &str) -> Result<ParsedUnit, String> {
    let toks = tokenize(source)?;
    let mut grammar = Grammar { toks: &toks, pos: 0, unit: UnitBuilder::new(file, Language::Qml, Duplicates::Number) };
    grammar.document()?;
    Ok(grammar.unit.finish(line_count(source), false))
}

fn fallback_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(concat!(
            r"(?P<enum>\benum\s+\w+\s*\{)",
            r"|(?P<inline>\bcomponent\s+(?P<iname>\w+)\s*:\s*[\w.]+\s*\{)",
            r"|(?P<func>\bfunction\s+(?P<fname>\w+)\s*\()",
            r"|(?P<import>(?m:^)\s*import\s+(?P<target>[\w.]+|\x22[^\x22\n]*\x22))",
            r"|(?P<object>(?P<otype>\b[A-Z]\w*(?:\.\w+)*)(?:\s+on\s+[\w.]+)?\s*\{)",
            r"|(?P<open>\{)",
            r"|(?P<close>\})",
        ))
        .unwrap()
    })
}

/// Blanks comments and string bodies (keeping quotes and newlines) so that
/// byte offsets and line numbers survive.
fn blank_comments_and_strings(source: &str) -> String {
    let chars: Vec<char> = source.chars().collect();
    let mut out = String::with_capacity(source.len());
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c == '/' && chars.get(i + 1) == Some(&'/') {
            while i < chars.len() && chars[i] != '\n' {
                out.push(' ');
                i += 1;
            }
        } else if c == '/' && chars.get(i + 1) == Some(&'*') {
            while i < chars.len() && !(chars[i] == '*' && chars.get(i + 1) == Some(&'/')) {
                out.push(if chars[i] == '\n' { '\n' } else { ' ' });
                i += 1;
            }
            i += 2;
            out.push_str("  ");
        } else if c == '"' || c == '\'' || c == '`' {
            out.push(c);
            i += 1;
            let keep = c == '"';
            while i < chars.len() && chars[i] != c && (c == '`' || chars[i] != '\n') {
                if chars[i] == '\\' && i + 1 < chars.len() {
                    out.push_str("  ");
                    i += 2;
                    continue;
                }
                // Import paths are double-quoted; their text is needed.
                out.push(if chars[i] == '\n' {
                    '\n'
                } else if keep {
                    chars[i]
                } else {
                    ' '
                });
                i += 1;
            }
            if i < chars.len() && chars[i] == c {
                out.push(c);
                i += 1;
            }
        } else {
            out.push(c);
            i += 1;
        }
    }
    out
}

enum FallbackFrame {
    Component { id: String, chain: String },
    Opaque,
}

/// Pattern-based extractor: finds `Type {`, `function name(` and `import`
/// occurrences and tracks braces. Anything below an unrecognized brace is
/// ignored, so on well-formed input it finds a subset of the grammar parse.
pub fn parse_qml_fallback(file: &RepoPath, source: &str) -> ParsedUnit {
    let text = blank_comments_and_strings(source);
    let mut unit = UnitBuilder::new(file, Language::Qml, Duplicates::Number);
    let file_id = unit.file_id().to_string();
    let line_of = |offset: usize| text[..offset].matches('\n').count() as u32 + 1;
    let mut frames: Vec<FallbackFrame> = Vec::new();
    let clean = |frames: &Vec<FallbackFrame>| frames.iter().all(|f| matches!(f, FallbackFrame::Component { .. }));
    let current = |frames: &Vec<FallbackFrame>| match frames.last() {
        Some(FallbackFrame::Component { id, chain }) => Some((id.clone(), chain.clone())),
        _ => None,
    };

    for caps in fallback_re().captures_iter(&text) {
        let whole = caps.get(0).unwrap();
        let line = line_of(whole.start());
        if caps.name("import").is_some() {
            if frames.is_empty() {
                let target = caps["target"].trim_matches('"').to_string();
                unit.reference(RelationKind::Imports, &file_id, &target, BTreeMap::new());
            }
        } else if caps.name("enum").is_some() {
            frames.push(FallbackFrame::Opaque);
        } else if caps.name("func").is_some() {
            if clean(&frames) {
                if let Some((parent, chain)) = current(&frames) {
                    let fid =
                        unit.entity(EntityKind::Function, &caps["fname"], &chain, Span { start: line, end: line });
                    unit.contains(&parent, &fid);
                }
            }
        } else if let Some(name) = caps.name("iname").or_else(|| caps.name("otype")) {
            if clean(&frames) {
                let (parent, chain) = current(&frames).unzip();
                let chain = chain.unwrap_or_default();
                let id = unit.entity(EntityKind::QmlComponent, name.as_str(), &chain, Span { start: line, end: line });
                if let Some(parent) = parent {
                    unit.contains(&parent, &id);
                }
                let own_chain = id.strip_prefix(&format!("{file_id}::")).unwrap_or(&id).to_string();
                frames.push(FallbackFrame::Component { id, chain: own_chain });
            } else {
                frames.push(FallbackFrame::Opaque);
            }
        } else if caps.name("open").is_some() {
            frames.push(FallbackFrame::Opaque);
        } else if caps.name("close").is_some() {
            match frames.pop() {
                Some(FallbackFrame::Component { id, .. }) => unit.set_end(&id, line),
                Some(FallbackFrame::Opaque) => {}
                None => unit.warnings += 1,
            }
        }
    }
    if !frames.is_empty() {
        unit.warnings += 1;
        let last = line_count(source);
        for frame in frames {
            if let FallbackFrame::Component { id, .. } = frame {
                unit.set_end(&id, last);
            }
        }
    }
    unit.finish(line_count(source), true)
}

/// Grammar parse with pattern fallback; a fallback run counts one warning.
pub fn parse_qml(file: &RepoPath, source: &str) -> ParsedUnit {
    match parse_qml_grammar(file, source) {
        Ok(unit) => unit,
        Err(_) => {
            let mut unit = parse_qml_fallback(file, source);
            unit.parse_warnings += 1;
            unit
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parsers::test_support::*;
    use crate::parsers::Target;

    #[test]
    fn one_nesting_level() {
        let unit = parse_qml(&path("ui/A.qml"), "Rectangle { Button { } }");
        check_invariants(&unit);
        assert!(!unit.fallback_used);
        assert_eq!(
            names(&unit),
            vec![
                (EntityKind::QmlComponent, "Rectangle".into()),
                (EntityKind::QmlComponent, "Rectangle::Button".into()),
            ]
        );
        assert_eq!(local_edges(&unit, RelationKind::Contains), vec![("Rectangle".into(), "Rectangle::Button".into())]);
    }

    #[test]
    fn module_import() {
        let unit = parse_qml(&path("ui/A.qml"), "import QtQuick 2.15\nItem {}\n");
        assert_eq!(unit.relations[0].kind, RelationKind::Imports);
        assert_eq!(unit.relations[0].dst, Target::Reference("QtQuick".into()));
    }

    const NESTED: &str = r#"import QtQuick 2.15
import "controls" as C

Item {
    id: root
    property int count: 0
    readonly property list<Item> extras

    function bump(step) {
        count += step
        if (count > 3) { reset() }
    }

    Column {
        spacing: 4
        Text {
            text: "count: " + root.count
            function label() { return text }
        }
    }

    Component.onCompleted: {
        bump(1)
    }
}
"#;

    #[test]
    fn hand_enumerated_fixture() {
        // 3 nested components (Item, Column, Text) + 2 JS functions (bump,
        // label): 5 entities, 4 CONTAINS edges.
        let unit = parse_qml(&path("ui/N.qml"), NESTED);
        check_invariants(&unit);
        assert!(!unit.fallback_used);
        assert_eq!(
            names(&unit),
            vec![
                (EntityKind::QmlComponent, "Item".into()),
                (EntityKind::Function, "Item::bump".into()),
                (EntityKind::QmlComponent, "Item::Column".into()),
                (EntityKind::QmlComponent, "Item::Column::Text".into()),
                (EntityKind::Function, "Item::Column::Text::label".into()),
            ]
        );
        assert_eq!(local_edges(&unit, RelationKind::Contains).len(), 4);
        assert_eq!(
            local_edges(&unit, RelationKind::Imports),
            vec![("ui/N.qml".into(), "QtQuick".into()), ("ui/N.qml".into(), "controls".into()),]
        );
        let root = unit.entity("ui/N.qml::Item").unwrap();
        assert_eq!(root.attrs["qml_id"], "root");
        assert_eq!(root.attrs["properties"], "count,extras");
        assert_eq!(root.attrs["bindings"], "Component.onCompleted");
        assert_eq!(root.span, Span { start: 4, end: 25 });
    }

    #[test]
    fn no_inheritance_or_invocation_edges() {
        let unit = parse_qml(&path("ui/N.qml"), NESTED);
        assert!(unit.relations.iter().all(|r| matches!(r.kind, RelationKind::Contains | RelationKind::Imports)));
    }

    #[test]
    fn siblings_of_same_type_are_numbered() {
        let src = "Row {\n  Button { text: \"a\" }\n  Button { text: \"b\" }\n  delegate: Button {}\n}\n";
        let unit = parse_qml(&path("ui/R.qml"), src);
        check_invariants(&unit);
        let found: Vec<String> = names(&unit).into_iter().map(|(_, n)| n).collect();
        assert_eq!(found, vec!["Row", "Row::Button", "Row::Button@2", "Row::Button@3"]);
    }

    #[test]
    fn malformed_file_uses_fallback() {
        let src = "import QtQuick 2.15\nItem {\n  width: (\n  Rectangle { color: \"red\" }\n}\n";
        let unit = parse_qml(&path("ui/Bad.qml"), src);
        check_invariants(&unit);
        assert!(unit.fallback_used);
        assert_eq!(unit.parse_warnings, 1);
        assert!(unit.entity("ui/Bad.qml::Item").is_some());
    }

    #[test]
    fn empty_and_comment_only_files_are_valid() {
        for src in ["", "// nothing here\n", "import QtQuick 2.15\n"] {
            let unit = parse_qml(&path("ui/E.qml"), src);
            check_invariants(&unit);
            assert!(unit.entities.is_empty());
        }
    }

    #[test]
    fn inline_components_behaviors_lists_and_enums() {
        let src = r#"Item {
    enum Mode { Idle, Busy }
    component Badge: Rectangle { radius: 2 }
    Behavior on opacity { NumberAnimation { duration: 100 } }
    states: [
        State { name: "a" },
        State { name: "b" }
    ]
    property var lookup: ({ Key: 1 })
    Layout.fillWidth: true
}
"#;
        let unit = parse_qml(&path("ui/I.qml"), src);
        check_invariants(&unit);
        assert!(!unit.fallback_used, "grammar should accept this file");
        let found: Vec<String> = names(&unit).into_iter().map(|(_, n)| n).collect();
        assert_eq!(
            found,
            vec![
                "Item",
                "Item::Badge",
                "Item::Behavior",
                "Item::Behavior::NumberAnimation",
                "Item::State",
                "Item::State@2",
            ]
        );
    }

    fn entity_set(unit: &ParsedUnit) -> std::collections::BTreeSet<(EntityKind, String)> {
        unit.entities.iter().map(|e| (e.kind, e.qualified_id.clone())).collect()
    }

    #[test]
    fn fallback_is_subset_of_grammar_on_well_formed_input() {
        let samples = [
            NESTED,
            "Rectangle { Button { } }",
            "Row {\n  Button { text: \"a\" }\n  Button { text: \"b\" }\n}\n",
            "Item {\n  component Badge: Rectangle { }\n  enum E { A }\n  Behavior on x { NumberAnimation {} }\n}\n",
        ];
        for src in samples {
            let grammar = parse_qml_grammar(&path("ui/S.qml"), src).unwrap();
            let fallback = parse_qml_fallback(&path("ui/S.qml"), src);
            let g = entity_set(&grammar);
            let f = entity_set(&fallback);
            assert!(f.is_subset(&g), "fallback {f:?} not within grammar {g:?}");
            assert!(!f.is_empty());
            check_invariants(&fallback);
        }
    }
}
