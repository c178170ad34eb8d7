//! Tolerant lexical scanner for Java source files.
//!
//! Recognizes type declarations, anonymous class bodies, method
//! declarations with their modifiers and line numbers, and call tokens
//! inside method bodies. It does no name or type resolution; brace
//! tracking plus a handful of lookahead rules is enough for call-path
//! screening.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::signature::MethodSignature;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, PartialOrd, Ord)]
#[serde(rename_all = "lowercase")]
pub enum Visibility {
    Public,
    Protected,
    Package,
    Private,
}

impl Visibility {
    pub fn as_str(self) -> &'static str {
        match self {
            Visibility::Public => "public",
            Visibility::Protected => "protected",
            Visibility::Package => "package",
            Visibility::Private => "private",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "public" => Some(Visibility::Public),
            "protected" => Some(Visibility::Protected),
            "package" | "package-private" | "default" => Some(Visibility::Package),
            "private" => Some(Visibility::Private),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, PartialOrd, Ord)]
#[serde(rename_all = "snake_case")]
pub enum EnclosingKind {
    NamedType,
    AnonymousType,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CallSite {
    pub name: String,
    pub arity: usize,
    pub line: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MethodDecl {
    pub name: String,
    pub params: Vec<String>,
    pub visibility: Visibility,
    pub enclosing_kind: EnclosingKind,
    /// Dotted type path inside the file; anonymous bodies appear as `Outer$N`.
    pub enclosing_type: String,
    pub annotations: Vec<String>,
    /// Line of the first modifier or annotation.
    pub decl_line: usize,
    /// Line of the method name token.
    pub name_line: usize,
    pub end_line: usize,
    pub calls: Vec<CallSite>,
}

impl MethodDecl {
    pub fn calls_name(&self, name: &str) -> bool {
        self.calls.iter().any(|c| c.name == name)
    }

    /// True when some call site targets `name` with a matching arity
    /// (any arity when `arity` is `None`).
    pub fn calls_with_arity(&self, name: &str, arity: Option<usize>) -> bool {
        self.calls
            .iter()
            .any(|c| c.name == name && arity.is_none_or(|a| a == c.arity))
    }

    pub fn signature(&self, package: Option<&str>) -> MethodSignature {
        let mut qual: Vec<String> = package
            .map(|p| p.split('.').map(str::to_string).collect())
            .unwrap_or_default();
        qual.extend(self.enclosing_type.split('.').map(str::to_string));
        MethodSignature::new(qual, self.name.clone(), self.params.clone())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct JavaFile {
    pub package: Option<String>,
    pub methods: Vec<MethodDecl>,
}

impl JavaFile {
    pub fn methods_named<'a>(&'a self, name: &'a str) -> impl Iterator<Item = &'a MethodDecl> + 'a {
        self.methods.iter().filter(move |m| m.name == name)
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Punct(char),
    Literal,
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    line: usize,
}

fn tokenize(src: &str) -> Vec<Token> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    let mut line = 1;
    while i < chars.len() {
        let c = chars[i];
        if c == '\n' {
            line += 1;
            i += 1;
        } else if c.is_whitespace() {
            i += 1;
        } else if c == '/' && chars.get(i + 1) == Some(&'/') {
            while i < chars.len() && chars[i] != '\n' {
                i += 1;
            }
        } else if c == '/' && chars.get(i + 1) == Some(&'*') {
            i += 2;
            while i < chars.len() && !(chars[i] == '*' && chars.get(i + 1) == Some(&'/')) {
                if chars[i] == '\n' {
                    line += 1;
                }
                i += 1;
            }
            i += 2;
        } else if c == '"' && chars.get(i + 1) == Some(&'"') && chars.get(i + 2) == Some(&'"') {
            let start_line = line;
            i += 3;
            while i < chars.len()
                && !(chars[i] == '"' && chars.get(i + 1) == Some(&'"') && chars.get(i + 2) == Some(&'"'))
            {
                if chars[i] == '\\' {
                    i += 1;
                }
                if chars.get(i) == Some(&'\n') {
                    line += 1;
                }
                i += 1;
            }
            i += 3;
            out.push(Token { tok: Tok::Literal, line: start_line });
        } else if c == '"' || c == '\'' {
            let start_line = line;
            i += 1;
            while i < chars.len() && chars[i] != c && chars[i] != '\n' {
                if chars[i] == '\\' {
                    i += 1;
                }
                i += 1;
            }
            i += 1;
            out.push(Token { tok: Tok::Literal, line: start_line });
        } else if c.is_ascii_digit() {
            while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_' || chars[i] == '.') {
                i += 1;
            }
            out.push(Token { tok: Tok::Literal, line });
        } else if c.is_alphabetic() || c == '_' || c == '$' {
            let start = i;
            while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_' || chars[i] == '$') {
                i += 1;
            }
            out.push(Token {
                tok: Tok::Ident(chars[start..i].iter().collect()),
                line,
            });
        } else {
            out.push(Token { tok: Tok::Punct(c), line });
            i += 1;
        }
    }
    out
}

const NON_CALL_KEYWORDS: &[&str] = &[
    "if", "for", "while", "switch", "catch", "synchronized", "return", "new", "throw", "super",
    "this", "try", "else", "do", "assert", "case", "yield", "instanceof",
];

#[derive(Debug)]
enum Frame {
    Type { name: String, kind: EnclosingKind, is_interface: bool },
    Method(usize),
    Block,
}

#[derive(Debug)]
enum Pending {
    Type { name: String, is_interface: bool },
    Method(usize),
}

struct Scanner {
    toks: Vec<Token>,
    frames: Vec<Frame>,
    methods: Vec<MethodDecl>,
    pending: Option<Pending>,
    anon_brace: HashSet<usize>,
    ctor_names: HashSet<usize>,
    anon_counter: usize,
}

impl Scanner {
    fn ident(&self, i: usize) -> Option<&str> {
        match self.toks.get(i).map(|t| &t.tok) {
            Some(Tok::Ident(s)) => Some(s),
            _ => None,
        }
    }

    fn is_punct(&self, i: usize, c: char) -> bool {
        matches!(self.toks.get(i).map(|t| &t.tok), Some(Tok::Punct(p)) if *p == c)
    }

    /// Index of the bracket closing the one at `open`.
    fn matching(&self, open: usize, o: char, c: char) -> Option<usize> {
        let mut depth = 0usize;
        for j in open..self.toks.len() {
            if self.is_punct(j, o) {
                depth += 1;
            } else if self.is_punct(j, c) {
                depth -= 1;
                if depth == 0 {
                    return Some(j);
                }
            }
        }
        None
    }

    fn current_type_path(&self) -> String {
        self.frames
            .iter()
            .rev()
            .find_map(|f| match f {
                Frame::Type { name, .. } => Some(name.clone()),
                _ => None,
            })
            .unwrap_or_default()
    }

    fn named_type_path(&self) -> String {
        self.frames
            .iter()
            .rev()
            .find_map(|f| match f {
                Frame::Type { name, kind: EnclosingKind::NamedType, .. } => Some(name.clone()),
                _ => None,
            })
            .unwrap_or_default()
    }

    fn at_type_level(&self) -> Option<(EnclosingKind, bool)> {
        match self.frames.last() {
            Some(Frame::Type { kind, is_interface, .. }) => Some((*kind, *is_interface)),
            _ => None,
        }
    }

    /// Nearest enclosing method, stopping at the first type boundary.
    fn current_method(&self) -> Option<usize> {
        for f in self.frames.iter().rev() {
            match f {
                Frame::Method(idx) => return Some(*idx),
                Frame::Type { .. } => return None,
                Frame::Block => {}
            }
        }
        None
    }

    fn call_arity(&self, open: usize, close: usize) -> usize {
        if close == open + 1 {
            return 0;
        }
        let mut depth = 0i32;
        let mut commas = 0;
        for j in open + 1..close {
            match &self.toks[j].tok {
                Tok::Punct('(' | '[' | '{') => depth += 1,
                Tok::Punct(')' | ']' | '}') => depth -= 1,
                Tok::Punct(',') if depth == 0 => commas += 1,
                _ => {}
            }
        }
        commas + 1
    }

    fn params(&self, open: usize, close: usize) -> Vec<String> {
        let mut groups: Vec<Vec<&Token>> = vec![Vec::new()];
        let mut depth = 0i32;
        for t in &self.toks[open + 1..close] {
            match &t.tok {
                Tok::Punct('<' | '(') => depth += 1,
                Tok::Punct('>' | ')') => depth -= 1,
                Tok::Punct(',') if depth == 0 => {
                    groups.push(Vec::new());
                    continue;
                }
                _ => {}
            }
            groups.last_mut().unwrap().push(t);
        }
        groups
            .into_iter()
            .filter(|g| !g.is_empty())
            .map(|g| param_type_text(&g))
            .collect()
    }

    fn try_method_decl(&mut self, i: usize) -> Option<usize> {
        let (kind, is_interface) = self.at_type_level()?;
        let close = self.matching(i + 1, '(', ')')?;
        let mut j = close + 1;
        if self.ident(j) == Some("throws") {
            j += 1;
            while j < self.toks.len() && !self.is_punct(j, '{') && !self.is_punct(j, ';') {
                j += 1;
            }
        }
        if self.is_punct(j, ';') {
            return Some(j);
        }
        if !self.is_punct(j, '{') {
            return None;
        }

        let mut start = i;
        let mut depth = 0i32;
        let mut k = i;
        while k > 0 {
            k -= 1;
            match &self.toks[k].tok {
                Tok::Punct(')') => depth += 1,
                Tok::Punct('(') => depth -= 1,
                Tok::Punct(';' | '{' | '}') if depth == 0 => break,
                _ => {}
            }
            start = k;
        }
        let mut visibility = None;
        let mut annotations = Vec::new();
        let mut depth = 0i32;
        for k in start..i {
            match &self.toks[k].tok {
                Tok::Punct('(') => depth += 1,
                Tok::Punct(')') => depth -= 1,
                Tok::Punct('@') if depth == 0 => {
                    if let Some(name) = self.ident(k + 1) {
                        annotations.push(name.to_string());
                    }
                }
                Tok::Ident(s) if depth == 0 && (k == 0 || !self.is_punct(k - 1, '@')) => {
                    if let Some(v) = Visibility::parse(s).filter(|_| s != "package" && s != "default") {
                        visibility = Some(v);
                    }
                }
                _ => {}
            }
        }
        let visibility = visibility.unwrap_or(if is_interface {
            Visibility::Public
        } else {
            Visibility::Package
        });

        let decl = MethodDecl {
            name: self.ident(i).unwrap_or_default().to_string(),
            params: self.params(i + 1, close),
            visibility,
            enclosing_kind: kind,
            enclosing_type: self.current_type_path(),
            annotations,
            decl_line: self.toks[start].line,
            name_line: self.toks[i].line,
            end_line: self.toks[i].line,
            calls: Vec::new(),
        };
        self.methods.push(decl);
        self.pending = Some(Pending::Method(self.methods.len() - 1));
        Some(j)
    }

    fn run(mut self) -> JavaFile {
        let mut package = None;
        let mut i = 0;
        while i < self.toks.len() {
            match self.toks[i].tok.clone() {
                Tok::Punct('{') => {
                    let frame = match self.pending.take() {
                        Some(Pending::Type { name, is_interface }) => Frame::Type {
                            name,
                            kind: EnclosingKind::NamedType,
                            is_interface,
                        },
                        Some(Pending::Method(idx)) => Frame::Method(idx),
                        None if self.anon_brace.contains(&i) => {
                            self.anon_counter += 1;
                            let outer = self.named_type_path();
                            Frame::Type {
                                name: format!("{outer}${}", self.anon_counter),
                                kind: EnclosingKind::AnonymousType,
                                is_interface: false,
                            }
                        }
                        None => Frame::Block,
                    };
                    self.frames.push(frame);
                }
                Tok::Punct('}') => {
                    if let Some(Frame::Method(idx)) = self.frames.pop() {
                        self.methods[idx].end_line = self.toks[i].line;
                    }
                }
                Tok::Punct(';') => {
                    if matches!(self.pending, Some(Pending::Method(_))) {
                        self.pending = None;
                    }
                }
                Tok::Ident(word) => {
                    let prev_dot = i > 0 && self.is_punct(i - 1, '.');
                    if word == "package" && self.frames.is_empty() && package.is_none() {
                        let mut parts = Vec::new();
                        let mut j = i + 1;
                        while let Some(id) = self.ident(j) {
                            parts.push(id.to_string());
                            if self.is_punct(j + 1, '.') {
                                j += 2;
                            } else {
                                break;
                            }
                        }
                        package = Some(parts.join("."));
                        i = j + 1;
                        continue;
                    }
                    if matches!(word.as_str(), "class" | "interface" | "enum" | "record") && !prev_dot {
                        if let Some(name) = self.ident(i + 1).map(str::to_string) {
                            let is_record_decl = word != "record"
                                || self.is_punct(i + 2, '(')
                                || self.is_punct(i + 2, '<');
                            if is_record_decl {
                                let outer = self.current_type_path();
                                let path = if outer.is_empty() { name } else { format!("{outer}.{name}") };
                                self.pending = Some(Pending::Type {
                                    name: path,
                                    is_interface: word == "interface",
                                });
                                i += 2;
                                continue;
                            }
                        }
                    }
                    if word == "new" {
                        self.scan_new(i);
                    } else if self.is_punct(i + 1, '(')
                        && !prev_dot_new(&self, i)
                        && !self.ctor_names.contains(&i)
                        && !NON_CALL_KEYWORDS.contains(&word.as_str())
                    {
                        if self.pending.is_none() && !prev_dot {
                            if let Some(next) = self.try_method_decl(i) {
                                i = next;
                                continue;
                            }
                        }
                        if matches!(self.pending, Some(Pending::Type { .. })) {
                            i += 1;
                            continue;
                        }
                        if let Some(midx) = self.current_method() {
                            if let Some(close) = self.matching(i + 1, '(', ')') {
                                let arity = self.call_arity(i + 1, close);
                                self.methods[midx].calls.push(CallSite {
                                    name: word.clone(),
                                    arity,
                                    line: self.toks[i].line,
                                });
                            }
                        }
                    }
                }
                _ => {}
            }
            i += 1;
        }
        JavaFile {
            package,
            methods: self.methods,
        }
    }

    /// `new a.b.C<T>(args) {` marks an anonymous class body.
    fn scan_new(&mut self, i: usize) {
        let mut j = i + 1;
        let mut last_name = None;
        while self.ident(j).is_some() {
            last_name = Some(j);
            if self.is_punct(j + 1, '.') {
                j += 2;
            } else {
                j += 1;
                break;
            }
        }
        if self.is_punct(j, '<') {
            let mut depth = 0;
            while j < self.toks.len() {
                if self.is_punct(j, '<') {
                    depth += 1;
                } else if self.is_punct(j, '>') {
                    depth -= 1;
                    if depth == 0 {
                        j += 1;
                        break;
                    }
                }
                j += 1;
            }
        }
        if let Some(n) = last_name {
            self.ctor_names.insert(n);
        }
        if self.is_punct(j, '(') {
            if let Some(close) = self.matching(j, '(', ')') {
                if self.is_punct(close + 1, '{') {
                    self.anon_brace.insert(close + 1);
                }
            }
        }
    }
}

fn prev_dot_new(s: &Scanner, i: usize) -> bool {
    i > 0 && s.ident(i - 1) == Some("new")
}

fn param_type_text(tokens: &[&Token]) -> String {
    // Drop annotations, `final`, and the trailing parameter name.
    let mut parts: Vec<&Token> = Vec::new();
    let mut k = 0;
    while k < tokens.len() {
        match &tokens[k].tok {
            Tok::Punct('@') => {
                k += 2;
                if matches!(tokens.get(k).map(|t| &t.tok), Some(Tok::Punct('('))) {
                    let mut depth = 0;
                    while k < tokens.len() {
                        match tokens[k].tok {
                            Tok::Punct('(') => depth += 1,
                            Tok::Punct(')') => {
                                depth -= 1;
                                if depth == 0 {
                                    k += 1;
                                    break;
                                }
                            }
                            _ => {}
                        }
                        k += 1;
                    }
                }
                continue;
            }
            Tok::Ident(s) if s == "final" => {}
            _ => parts.push(tokens[k]),
        }
        k += 1;
    }
    if parts.len() > 1 && matches!(parts.last().map(|t| &t.tok), Some(Tok::Ident(_))) {
        parts.pop();
    }
    let mut text = String::new();
    let mut prev_ident = false;
    for t in parts {
        match &t.tok {
            Tok::Ident(s) => {
                if prev_ident {
                    text.push(' ');
                }
                text.push_str(s);
                prev_ident = true;
            }
            Tok::Punct(c) => {
                text.push(*c);
                prev_ident = false;
            }
            Tok::Literal => prev_ident = false,
        }
    }
    text.replace(',', ", ")
}

/// Scan one Java compilation unit.
pub fn scan(src: &str) -> JavaFile {
    Scanner {
        toks: tokenize(src),
        frames: Vec::new(),
        methods: Vec::new(),
        pending: None,
        anon_brace: HashSet::new(),
        ctor_names: HashSet::new(),
        anon_counter: 0,
    }
    .run()
}
