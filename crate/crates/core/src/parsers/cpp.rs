//! Token-level C++ extractor.
//!
//! Not a C++ parser in any strict sense: the source is tokenized (comments,
//! literals and preprocessor lines handled), then statements are cut at
//! `;`, `{` and `}` and classified as namespace, class or function headers.
//! Both arms of preprocessor conditionals are read; unbalanced braces are
//! tolerated and counted as warnings.

use std::collections::BTreeMap;

use super::{line_count, Duplicates, ParsedUnit, Span, UnitBuilder};
use crate::domain::{EntityKind, Language, RelationKind, RepoPath};

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok {
    Ident(String),
    Punct(&'static str),
    Literal,
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    line: u32,
}

impl Token {
    fn ident(&self) -> Option<&str> {
        match &self.tok {
            Tok::Ident(s) => Some(s),
            _ => None,
        }
    }

    fn is(&self, p: &str) -> bool {
        matches!(&self.tok, Tok::Punct(q) if *q == p)
    }

    fn is_kw(&self, kw: &str) -> bool {
        self.ident() == Some(kw)
    }
}

struct Include {
    target: String,
    system: bool,
}

const PUNCTS: &[&str] = &[
    "::", "->", "(", ")", "{", "}", "[", "]", "<", ">", ";", ",", ":", "=", "~", "*", "&", ".", "+", "-", "/", "%",
    "!", "?", "|", "^", "#",
];

fn tokenize(source: &str) -> (Vec<Token>, Vec<Include>) {
    let chars: Vec<char> = source.chars().collect();
    let mut tokens = Vec::new();
    let mut includes = Vec::new();
    let mut i = 0;
    let mut line: u32 = 1;
    let mut line_start = true;

    while i < chars.len() {
        let c = chars[i];
        if c == '\n' {
            line += 1;
            line_start = true;
            i += 1;
            continue;
        }
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        if c == '/' && chars.get(i + 1) == Some(&'/') {
            while i < chars.len() && chars[i] != '\n' {
                i += 1;
            }
            continue;
        }
        if c == '/' && chars.get(i + 1) == Some(&'*') {
            i += 2;
            while i < chars.len() && !(chars[i] == '*' && chars.get(i + 1) == Some(&'/')) {
                if chars[i] == '\n' {
                    line += 1;
                }
                i += 1;
            }
            i += 2;
            continue;
        }
        if c == '#' && line_start {
            let mut directive = String::new();
            while i < chars.len() && chars[i] != '\n' {
                if chars[i] == '\\' && chars.get(i + 1) == Some(&'\n') {
                    line += 1;
                    i += 2;
                    continue;
                }
                directive.push(chars[i]);
                i += 1;
            }
            if let Some(inc) = parse_include(&directive) {
                includes.push(inc);
            }
            continue;
        }
        line_start = false;
        if c == 'R' && chars.get(i + 1) == Some(&'"') {
            // Raw string R"delim( ... )delim"
            let mut j = i + 2;
            let mut delim = String::new();
            while j < chars.len() && chars[j] != '(' && delim.len() < 16 {
                delim.push(chars[j]);
                j += 1;
            }
            let close: Vec<char> = format!("){delim}\"").chars().collect();
            j += 1;
            while j < chars.len() && chars[j..].iter().take(close.len()).ne(close.iter()) {
                if chars[j] == '\n' {
                    line += 1;
                }
                j += 1;
            }
            i = (j + close.len()).min(chars.len());
            tokens.push(Token { tok: Tok::Literal, line });
            continue;
        }
        if c.is_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            let word: String = chars[start..i].iter().collect();
            // String literal prefixes (u8"..", L"..") fold into the literal.
            if matches!(chars.get(i), Some('"')) && matches!(word.as_str(), "u8" | "u" | "U" | "L") {
                continue;
            }
            tokens.push(Token { tok: Tok::Ident(word), line });
            continue;
        }
        if c.is_ascii_digit() {
            while i < chars.len()
                && (chars[i].is_alphanumeric() || chars[i] == '_' || chars[i] == '.' || chars[i] == '\'')
            {
                i += 1;
            }
            tokens.push(Token { tok: Tok::Literal, line });
            continue;
        }
        if c == '"' || c == '\'' {
            i += 1;
            while i < chars.len() && chars[i] != c && chars[i] != '\n' {
                if chars[i] == '\\' {
                    i += 1;
                }
                i += 1;
            }
            i += 1;
            tokens.push(Token { tok: Tok::Literal, line });
            continue;
        }
        let two: String = chars[i..].iter().take(2).collect();
        if let Some(p) = PUNCTS.iter().find(|p| p.len() == 2 && **p == two) {
            tokens.push(Token { tok: Tok::Punct(p), line });
            i += 2;
            continue;
        }
        let one = c.to_string();
        match PUNCTS.iter().find(|p| **p == one) {
            Some(p) => tokens.push(Token { tok: Tok::Punct(p), line }),
            None => tokens.push(Token { tok: Tok::Literal, line }),
        }
        i += 1;
    }
    (tokens, includes)
}

fn parse_include(directive: &str) -> Option<Include> {
    let rest = directive.trim_start_matches('#').trim_start();
    let rest = rest.strip_prefix("include")?.trim_start();
    if let Some(body) = rest.strip_prefix('"') {
        let end = body.find('"')?;
        return Some(Include { target: body[..end].to_string(), system: false });
    }
    if let Some(body) = rest.strip_prefix('<') {
        let end = body.find('>')?;
        return Some(Include { target: body[..end].to_string(), system: true });
    }
    None
}

const NOT_CALLABLE: &[&str] = &[
    "if",
    "for",
    "while",
    "switch",
    "return",
    "sizeof",
    "alignof",
    "decltype",
    "catch",
    "throw",
    "typeid",
    "noexcept",
    "static_cast",
    "dynamic_cast",
    "const_cast",
    "reinterpret_cast",
    "static_assert",
    "delete",
    "new",
    "do",
    "else",
    "case",
    "default",
    "void",
    "int",
    "char",
    "bool",
    "float",
    "double",
    "long",
    "short",
    "unsigned",
    "signed",
    "auto",
    "const",
    "operator",
    "co_await",
    "co_return",
    "co_yield",
    "requires",
    "alignas",
    "using",
    "typedef",
    "template",
    "typename",
    "class",
    "struct",
    "union",
    "enum",
    "namespace",
    "public",
    "private",
    "protected",
    "virtual",
    "explicit",
    "inline",
    "static",
    "extern",
    "constexpr",
    "volatile",
    "mutable",
    "friend",
    "goto",
    "this",
    "true",
    "false",
    "nullptr",
];

const ACCESS: &[&str] = &["public", "protected", "private", "signals", "slots", "Q_SIGNALS", "Q_SLOTS"];

#[derive(Debug)]
enum Frame {
    Namespace {
        chain: String,
    },
    Class {
        id: String,
        chain: String,
    },
    Function {
        id: String,
    },
    /// Braces whose content is not scanned for declarations (enums,
    /// initializers, blocks nested in function bodies).
    Opaque,
}

struct CppParser<'a> {
    unit: UnitBuilder,
    tokens: &'a [Token],
    frames: Vec<Frame>,
}

impl<'a> CppParser<'a> {
    fn chain(&self) -> String {
        for frame in self.frames.iter().rev() {
            match frame {
                Frame::Namespace { chain } | Frame::Class { chain, .. } => return chain.clone(),
                _ => {}
            }
        }
        String::new()
    }

    fn current_class(&self) -> Option<&str> {
        match self.frames.last() {
            Some(Frame::Class { id, .. }) => Some(id),
            _ => None,
        }
    }

    /// Innermost function frame, if the cursor is inside a body.
    fn enclosing_function(&self) -> Option<&str> {
        self.frames.iter().rev().find_map(|f| match f {
            Frame::Function { id } => Some(id.as_str()),
            _ => None,
        })
    }

    fn run(mut self, line_count: u32) -> ParsedUnit {
        let mut stmt: Vec<Token> = Vec::new();
        let mut brace_init_depth = 0usize;
        let mut i = 0;
        while i < self.tokens.len() {
            let tok = &self.tokens[i];
            i += 1;

            if let Some(func) = self.enclosing_function().map(str::to_string) {
                if tok.is("{") {
                    self.frames.push(Frame::Opaque);
                } else if tok.is("}") {
                    self.close_frame(tok.line);
                } else if let Some(name) = tok.ident() {
                    let next_is_paren = self.tokens.get(i).is_some_and(|t| t.is("("));
                    if next_is_paren && !NOT_CALLABLE.contains(&name) {
                        self.unit.reference(RelationKind::Invokes, &func, name, BTreeMap::new());
                    }
                }
                continue;
            }
            if matches!(self.frames.last(), Some(Frame::Opaque)) {
                if tok.is("{") {
                    self.frames.push(Frame::Opaque);
                } else if tok.is("}") {
                    self.close_frame(tok.line);
                }
                continue;
            }

            if brace_init_depth > 0 {
                if tok.is("{") {
                    brace_init_depth += 1;
                } else if tok.is("}") {
                    brace_init_depth -= 1;
                }
                stmt.push(tok.clone());
                continue;
            }

            if tok.is(";") {
                self.declaration(&stmt);
                stmt.clear();
            } else if tok.is("{") {
                if in_ctor_init_list(&stmt) {
                    brace_init_depth = 1;
                    stmt.push(tok.clone());
                    continue;
                }
                let frame = self.header(&stmt);
                self.frames.push(frame);
                stmt.clear();
            } else if tok.is("}") {
                stmt.clear();
                self.close_frame(tok.line);
            } else if tok.is(":") && stmt.last().and_then(Token::ident).is_some_and(|w| ACCESS.contains(&w)) {
                stmt.clear();
            } else {
                stmt.push(tok.clone());
            }
        }
        self.unit.warnings += self.frames.iter().filter(|f| !matches!(f, Frame::Opaque)).count().min(1);
        let last = line_count.max(1);
        while !self.frames.is_empty() {
            self.close_frame(last);
        }
        self.unit.finish(line_count, false)
    }

    fn close_frame(&mut self, line: u32) {
        match self.frames.pop() {
            Some(Frame::Class { id, .. }) | Some(Frame::Function { id }) => self.unit.set_end(&id, line),
            Some(_) => {}
            None => self.unit.warnings += 1,
        }
    }

    /// Classifies the statement preceding a `{`.
    fn header(&mut self, stmt: &[Token]) -> Frame {
        let stmt = strip_macro_calls(stmt);
        if stmt.is_empty() {
            return Frame::Opaque;
        }
        if let Some(pos) = stmt.iter().position(|t| t.is_kw("namespace")) {
            let mut chain = self.chain();
            for t in &stmt[pos + 1..] {
                if let Some(name) = t.ident() {
                    if name != "inline" {
                        chain = join(&chain, name);
                    }
                }
            }
            return Frame::Namespace { chain };
        }
        if stmt.first().is_some_and(|t| t.is_kw("extern")) && stmt.len() <= 2 {
            return Frame::Namespace { chain: self.chain() };
        }
        if let Some(frame) = self.class_header(&stmt) {
            return frame;
        }
        if let Some((name, outer_parts, line)) = function_name(&stmt) {
            let mut outer = self.chain();
            for part in &outer_parts {
                outer = join(&outer, part);
            }
            let id = self.unit.entity(EntityKind::Function, &name, &outer, Span { start: line, end: line });
            if outer_parts.is_empty() {
                if let Some(class_id) = self.current_class().map(str::to_string) {
                    self.unit.contains(&class_id, &id);
                }
            }
            return Frame::Function { id };
        }
        Frame::Opaque
    }

    fn class_header(&mut self, stmt: &[Token]) -> Option<Frame> {
        let mut angle = 0i32;
        let mut kw_pos = None;
        for (idx, t) in stmt.iter().enumerate() {
            if t.is("<") {
                angle += 1;
            } else if t.is(">") {
                angle -= 1;
            } else if angle == 0 && (t.is_kw("class") || t.is_kw("struct")) {
                kw_pos = Some(idx);
                break;
            } else if angle == 0 && (t.is_kw("enum") || t.is_kw("union") || t.is("=") || t.is("(")) {
                return None;
            }
        }
        let kw_pos = kw_pos?;
        let default_access = if stmt[kw_pos].is_kw("class") { "private" } else { "public" };
        let rest = &stmt[kw_pos + 1..];
        let colon = rest.iter().position(|t| t.is(":"));
        let head = &rest[..colon.unwrap_or(rest.len())];
        let name_tok = head
            .iter()
            .take_while(|t| !t.is("<"))
            .filter(|t| t.ident().is_some_and(|w| w != "final" && w != "alignas"))
            .last()?;
        let name = name_tok.ident()?.to_string();
        let line = name_tok.line;
        let outer = self.chain();
        let id = self.unit.entity(EntityKind::Class, &name, &outer, Span { start: line, end: line });
        if let Some(parent) = self.current_class().map(str::to_string) {
            self.unit.contains(&parent, &id);
        }
        if let Some(colon) = colon {
            for base in split_commas(&rest[colon + 1..]) {
                let mut access = default_access;
                let mut parts: Vec<&str> = Vec::new();
                let mut angle = 0i32;
                for t in base {
                    if t.is("<") {
                        angle += 1;
                    } else if t.is(">") {
                        angle -= 1;
                    } else if angle == 0 {
                        match t.ident() {
                            Some(a @ ("public" | "protected" | "private")) => access = a,
                            Some("virtual") => {}
                            Some(w) => parts.push(w),
                            None => {}
                        }
                    }
                }
                if parts.is_empty() {
                    continue;
                }
                let mut attrs = BTreeMap::new();
                attrs.insert("access".to_string(), access.to_string());
                self.unit.reference(RelationKind::Inherits, &id, &parts.join("::"), attrs);
            }
        }
        Some(Frame::Class { id, chain: join(&outer, &name) })
    }

    /// Member function declarations inside a class body.
    fn declaration(&mut self, stmt: &[Token]) {
        let Some(class_id) = self.current_class().map(str::to_string) else {
            return;
        };
        let stmt = strip_macro_calls(stmt);
        let Some(first) = stmt.first().and_then(Token::ident) else {
            return;
        };
        if matches!(first, "using" | "typedef" | "friend" | "static_assert" | "enum" | "template")
            && !(first == "template" && stmt.iter().any(|t| t.is("(")))
        {
            return;
        }
        if let Some((name, outer_parts, line)) = function_name(&stmt) {
            if !outer_parts.is_empty() {
                return;
            }
            let outer = self.chain();
            let end = stmt.last().map(|t| t.line).unwrap_or(line);
            let id = self.unit.entity(EntityKind::Function, &name, &outer, Span { start: line, end });
            self.unit.contains(&class_id, &id);
        }
    }
}

fn join(chain: &str, name: &str) -> String {
    if chain.is_empty() {
        name.to_string()
    } else {
        format!("{chain}::{name}")
    }
}

fn is_macro_name(name: &str) -> bool {
    name.len() >= 2
        && name.chars().all(|c| c.is_ascii_uppercase() || c.is_ascii_digit() || c == '_')
        && name.chars().any(|c| c.is_ascii_uppercase())
}

/// Drops leading `MACRO(...)` groups and bare all-caps macro words.
fn strip_macro_calls(stmt: &[Token]) -> Vec<Token> {
    let mut i = 0;
    while i < stmt.len() {
        let Some(name) = stmt[i].ident() else { break };
        if !is_macro_name(name) {
            break;
        }
        if stmt.get(i + 1).is_some_and(|t| t.is("(")) {
            match matching(stmt, i + 1, "(", ")") {
                // A macro whose parenthesized group is directly followed by the
                // body is probably a function-like definition (e.g. TEST(a, b) { }).
                Some(close) if close + 1 < stmt.len() => i = close + 1,
                _ => break,
            }
        } else if stmt.get(i + 1).and_then(Token::ident).is_some() {
            i += 1;
        } else {
            break;
        }
    }
    stmt[i..].to_vec()
}

fn matching(tokens: &[Token], open_idx: usize, open: &str, close: &str) -> Option<usize> {
    let mut depth = 0;
    for (idx, t) in tokens.iter().enumerate().skip(open_idx) {
        if t.is(open) {
            depth += 1;
        } else if t.is(close) {
            depth -= 1;
            if depth == 0 {
                return Some(idx);
            }
        }
    }
    None
}

fn split_commas(tokens: &[Token]) -> Vec<&[Token]> {
    let mut out = Vec::new();
    let mut depth = 0i32;
    let mut last = 0;
    for (idx, t) in tokens.iter().enumerate() {
        if t.is("<") || t.is("(") {
            depth += 1;
        } else if t.is(">") || t.is(")") {
            depth -= 1;
        } else if t.is(",") && depth == 0 {
            out.push(&tokens[last..idx]);
            last = idx + 1;
        }
    }
    out.push(&tokens[last..]);
    out
}

/// True when the statement is a constructor header whose member initializer
/// list is still open, so the next `{` is a brace initializer.
fn in_ctor_init_list(stmt: &[Token]) -> bool {
    let Some(last) = stmt.last() else { return false };
    if last.ident().is_none() && !last.is(">") {
        return false;
    }
    let Some(open) = first_paren(stmt) else { return false };
    let Some(close) = matching(stmt, open, "(", ")") else { return false };
    stmt[close + 1..].iter().any(|t| t.is(":")) && stmt[..open].iter().all(|t| !t.is("="))
}

/// Index of the first `(` outside template angle brackets.
fn first_paren(stmt: &[Token]) -> Option<usize> {
    let mut angle = 0i32;
    for (idx, t) in stmt.iter().enumerate() {
        if t.is("<") && idx > 0 && !stmt[idx - 1].is_kw("operator") {
            angle += 1;
        } else if t.is(">") && angle > 0 {
            angle -= 1;
        } else if t.is("(") && angle == 0 {
            return Some(idx);
        }
    }
    None
}

/// Extracts `(name, qualifier parts, line)` from a function header or
/// declaration, e.g. `double Circle::area() const` -> ("area", ["Circle"]).
fn function_name(stmt: &[Token]) -> Option<(String, Vec<String>, u32)> {
    if let Some(op) = stmt.iter().position(|t| t.is_kw("operator")) {
        let mut name = String::from("operator");
        let mut j = op + 1;
        if stmt.get(j).is_some_and(|t| t.is("(")) && stmt.get(j + 1).is_some_and(|t| t.is(")")) {
            name.push_str("()");
            j += 2;
        } else {
            while j < stmt.len() && !stmt[j].is("(") {
                match &stmt[j].tok {
                    Tok::Punct(p) => name.push_str(p),
                    Tok::Ident(w) => {
                        name.push(' ');
                        name.push_str(w);
                    }
                    Tok::Literal => {}
                }
                j += 1;
            }
        }
        if !stmt.get(j).is_some_and(|t| t.is("(")) {
            return None;
        }
        let quals = qualifiers_before(stmt, op);
        return Some((name, quals, stmt[op].line));
    }

    let open = first_paren(stmt)?;
    if open == 0 || stmt[..open].iter().any(|t| t.is("=")) {
        return None;
    }
    matching(stmt, open, "(", ")")?;
    let name_tok = &stmt[open - 1];
    let name = name_tok.ident()?;
    if NOT_CALLABLE.contains(&name) {
        return None;
    }
    let mut full = name.to_string();
    let mut name_idx = open - 1;
    if name_idx > 0 && stmt[name_idx - 1].is("~") {
        full = format!("~{name}");
        name_idx -= 1;
    }
    let quals = qualifiers_before(stmt, name_idx);
    Some((full, quals, name_tok.line))
}

/// Walks back over `A<T>::B::` before index `idx`.
fn qualifiers_before(stmt: &[Token], idx: usize) -> Vec<String> {
    let mut quals = Vec::new();
    let mut j = idx;
    while j >= 2 && stmt[j - 1].is("::") {
        let mut k = j - 2;
        if stmt[k].is(">") {
            let mut depth = 0;
            loop {
                if stmt[k].is(">") {
                    depth += 1;
                } else if stmt[k].is("<") {
                    depth -= 1;
                    if depth == 0 {
                        break;
                    }
                }
                if k == 0 {
                    return quals;
                }
                k -= 1;
            }
            if k == 0 {
                break;
            }
            k -= 1;
        }
        match stmt[k].ident() {
            Some(q) => quals.push(q.to_string()),
            None => break,
        }
        j = k;
    }
    quals.reverse();
    quals
}

pub fn parse_cpp(file: &RepoPath, source: &str) -> ParsedUnit {
    let (tokens, includes) = tokenize(source);
    let mut unit = UnitBuilder::new(file, Language::Cpp, Duplicates::Merge);
    let file_id = unit.file_id().to_string();
    for inc in &includes {
        let mut attrs = BTreeMap::new();
        attrs.insert("system".to_string(), inc.system.to_string());
        unit.reference(RelationKind::Imports, &file_id, &inc.target, attrs);
    }
    let parser = CppParser { unit, tokens: &tokens, frames: Vec::new() };
    parser.run(line_count(source))
}
