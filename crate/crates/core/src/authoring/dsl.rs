//! Line-oriented scenario language.
//!
//! ```text
//! file      = { line } ;
//! line      = [ statement ] [ "#" comment ] newline ;
//! statement = header | meta | node | edge ;
//! header    = "graph" value { attr } ;                  (* mode, start, id *)
//! meta      = "meta" value value ;
//! node      = "node" value { attr } ;                   (* avatar, desc, terminal, provenance *)
//! edge      = "edge" value value "->" value { attr } ;  (* intent, desc, examples, provenance *)
//! attr      = word "=" ( value | list ) ;
//! list      = "[" [ value { "," value } ] "]" ;
//! value     = word | string ;
//! word      = char - ( space | '"' | "=" | "[" | "]" | "," | "#" ), { idem } ;
//! string    = '"' { char | "\\" ( '"' | "\\" | "n" | "r" | "t" | "u{" hex "}" ) } '"' ;
//! ```
//!
//! Example:
//!
//! ```text
//! graph "Demo" mode=flexible start=n0
//! node n0 avatar="Hello" terminal=false
//! node n1 avatar="Bye" terminal=true
//! edge e1 n0 -> n1 intent=patient desc="stay calm" examples=["sorry for the wait"]
//! ```
//!
//! Each line is parsed on its own; a malformed line yields one diagnostic and
//! parsing continues with the next line. A graph is returned only when no
//! error-severity diagnostic was produced.

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{
    DialogueMode, GraphError, Mutation, NarrativeGraph, Provenance, ResponseIntent, SceneNode,
    TransitionEdge,
};
use crate::ids::{GraphId, NodeId};
use crate::validate::{self, Diagnostic, Severity};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParseDiagnostic {
    pub line: usize,
    pub column: usize,
    pub message: String,
    pub severity: Severity,
}

impl ParseDiagnostic {
    fn error(line: usize, column: usize, message: impl Into<String>) -> Self {
        Self {
            line,
            column,
            message: message.into(),
            severity: Severity::Error,
        }
    }

    fn warning(line: usize, column: usize, message: impl Into<String>) -> Self {
        Self {
            line,
            column,
            message: message.into(),
            severity: Severity::Warning,
        }
    }

    pub fn is_error(&self) -> bool {
        self.severity == Severity::Error
    }
}

impl fmt::Display for ParseDiagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sev = match self.severity {
            Severity::Error => "error",
            Severity::Warning => "warning",
        };
        write!(f, "{}:{}: {sev}: {}", self.line, self.column, self.message)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RenderError {
    #[error("graph has {} error diagnostic(s)", .0.len())]
    InvalidGraph(Vec<Diagnostic>),
}

// ---------------------------------------------------------------------------
// Lexing

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Word(String),
    Str(String),
    Eq,
    Arrow,
    LBrack,
    RBrack,
    Comma,
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    col: usize,
}

fn is_word_char(c: char) -> bool {
    !c.is_whitespace() && !matches!(c, '"' | '=' | '[' | ']' | ',' | '#')
}

fn lex(line: &str, lineno: usize) -> Result<Vec<Token>, ParseDiagnostic> {
    let chars: Vec<char> = line.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let col = i + 1;
        match c {
            c if c.is_whitespace() => i += 1,
            '#' => break,
            '=' => {
                out.push(Token { tok: Tok::Eq, col });
                i += 1;
            }
            '[' => {
                out.push(Token { tok: Tok::LBrack, col });
                i += 1;
            }
            ']' => {
                out.push(Token { tok: Tok::RBrack, col });
                i += 1;
            }
            ',' => {
                out.push(Token { tok: Tok::Comma, col });
                i += 1;
            }
            '"' => {
                let (s, next) = lex_string(&chars, i, lineno)?;
                out.push(Token { tok: Tok::Str(s), col });
                i = next;
            }
            _ => {
                let start = i;
                while i < chars.len() && is_word_char(chars[i]) {
                    i += 1;
                }
                let word: String = chars[start..i].iter().collect();
                let tok = if word == "->" { Tok::Arrow } else { Tok::Word(word) };
                out.push(Token { tok, col });
            }
        }
    }
    Ok(out)
}

fn lex_string(chars: &[char], open: usize, lineno: usize) -> Result<(String, usize), ParseDiagnostic> {
    let mut s = String::new();
    let mut i = open + 1;
    while i < chars.len() {
        match chars[i] {
            '"' => return Ok((s, i + 1)),
            '\\' => {
                let col = i + 1;
                let esc = chars.get(i + 1).copied();
                match esc {
                    Some('"') => s.push('"'),
                    Some('\\') => s.push('\\'),
                    Some('n') => s.push('\n'),
                    Some('r') => s.push('\r'),
                    Some('t') => s.push('\t'),
                    Some('u') if chars.get(i + 2) == Some(&'{') => {
                        let close = chars[i + 3..]
                            .iter()
                            .position(|&c| c == '}')
                            .map(|p| p + i + 3)
                            .ok_or_else(|| ParseDiagnostic::error(lineno, col, "unterminated \\u{...} escape"))?;
                        let hex: String = chars[i + 3..close].iter().collect();
                        let ch = u32::from_str_radix(&hex, 16)
                            .ok()
                            .and_then(char::from_u32)
                            .ok_or_else(|| {
                                ParseDiagnostic::error(lineno, col, format!("invalid escape \\u{{{hex}}}"))
                            })?;
                        s.push(ch);
                        i = close + 1;
                        continue;
                    }
                    _ => {
                        return Err(ParseDiagnostic::error(lineno, col, "invalid escape sequence"));
                    }
                }
                i += 2;
            }
            c => {
                s.push(c);
                i += 1;
            }
        }
    }
    Err(ParseDiagnostic::error(lineno, open + 1, "unterminated string"))
}

// ---------------------------------------------------------------------------
// Statements

#[derive(Debug, Clone)]
struct Spanned {
    text: String,
    col: usize,
}

#[derive(Debug, Clone)]
enum AttrValue {
    One(Spanned),
    List(Vec<String>),
}

#[derive(Debug)]
struct Attrs {
    lineno: usize,
    map: BTreeMap<String, (usize, AttrValue)>,
}

impl Attrs {
    fn take_one(&mut self, key: &str) -> Result<Option<Spanned>, ParseDiagnostic> {
        match self.map.remove(key) {
            None => Ok(None),
            Some((_, AttrValue::One(v))) => Ok(Some(v)),
            Some((col, AttrValue::List(_))) => Err(ParseDiagnostic::error(
                self.lineno,
                col,
                format!("`{key}` takes a single value, not a list"),
            )),
        }
    }

    fn take_list(&mut self, key: &str) -> Result<Option<Vec<String>>, ParseDiagnostic> {
        match self.map.remove(key) {
            None => Ok(None),
            Some((_, AttrValue::List(v))) => Ok(Some(v)),
            Some((col, AttrValue::One(_))) => Err(ParseDiagnostic::error(
                self.lineno,
                col,
                format!("`{key}` takes a list like [\"a\", \"b\"]"),
            )),
        }
    }

    fn take_bool(&mut self, key: &str) -> Result<Option<bool>, ParseDiagnostic> {
        let Some(v) = self.take_one(key)? else {
            return Ok(None);
        };
        match v.text.as_str() {
            "true" => Ok(Some(true)),
            "false" => Ok(Some(false)),
            other => Err(ParseDiagnostic::error(
                self.lineno,
                v.col,
                format!("`{key}` must be true or false, found `{other}`"),
            )),
        }
    }

    fn take_provenance(&mut self) -> Result<Provenance, ParseDiagnostic> {
        let Some(v) = self.take_one("provenance")? else {
            return Ok(Provenance::Authored);
        };
        Provenance::parse(&v.text).ok_or_else(|| {
            ParseDiagnostic::error(
                self.lineno,
                v.col,
                format!("unknown provenance `{}` (authored, generated, template)", v.text),
            )
        })
    }

    fn finish(self) -> Result<(), ParseDiagnostic> {
        match self.map.into_iter().next() {
            None => Ok(()),
            Some((key, (col, _))) => Err(ParseDiagnostic::error(
                self.lineno,
                col,
                format!("unknown attribute `{key}`"),
            )),
        }
    }
}

struct Cursor<'a> {
    toks: &'a [Token],
    pos: usize,
    lineno: usize,
    eol_col: usize,
}

impl<'a> Cursor<'a> {
    fn here(&self) -> usize {
        self.toks.get(self.pos).map_or(self.eol_col, |t| t.col)
    }

    fn value(&mut self, what: &str) -> Result<Spanned, ParseDiagnostic> {
        match self.toks.get(self.pos) {
            Some(Token { tok: Tok::Word(s) | Tok::Str(s), col }) => {
                self.pos += 1;
                Ok(Spanned { text: s.clone(), col: *col })
            }
            _ => Err(ParseDiagnostic::error(self.lineno, self.here(), format!("expected {what}"))),
        }
    }

    fn expect(&mut self, tok: Tok, what: &str) -> Result<(), ParseDiagnostic> {
        match self.toks.get(self.pos) {
            Some(t) if t.tok == tok => {
                self.pos += 1;
                Ok(())
            }
            _ => Err(ParseDiagnostic::error(self.lineno, self.here(), format!("expected {what}"))),
        }
    }

    fn attrs(&mut self) -> Result<Attrs, ParseDiagnostic> {
        let mut map = BTreeMap::new();
        while self.pos < self.toks.len() {
            let col = self.here();
            let key = match &self.toks[self.pos].tok {
                Tok::Word(w) => w.clone(),
                _ => return Err(ParseDiagnostic::error(self.lineno, col, "expected attribute name")),
            };
            self.pos += 1;
            self.expect(Tok::Eq, &format!("`=` after `{key}`"))?;
            let value = if self.toks.get(self.pos).map(|t| &t.tok) == Some(&Tok::LBrack) {
                self.pos += 1;
                AttrValue::List(self.list()?)
            } else {
                AttrValue::One(self.value(&format!("a value for `{key}`"))?)
            };
            if map.insert(key.clone(), (col, value)).is_some() {
                return Err(ParseDiagnostic::error(self.lineno, col, format!("attribute `{key}` given twice")));
            }
        }
        Ok(Attrs { lineno: self.lineno, map })
    }

    fn list(&mut self) -> Result<Vec<String>, ParseDiagnostic> {
        let mut items = Vec::new();
        if self.toks.get(self.pos).map(|t| &t.tok) == Some(&Tok::RBrack) {
            self.pos += 1;
            return Ok(items);
        }
        loop {
            items.push(self.value("a list item")?.text);
            match self.toks.get(self.pos).map(|t| &t.tok) {
                Some(Tok::Comma) => self.pos += 1,
                Some(Tok::RBrack) => {
                    self.pos += 1;
                    return Ok(items);
                }
                _ => return Err(ParseDiagnostic::error(self.lineno, self.here(), "expected `,` or `]`")),
            }
        }
    }
}

#[derive(Debug)]
struct Header {
    line: usize,
    title: String,
    mode: DialogueMode,
    start: Option<Spanned>,
    id: Option<String>,
}

#[derive(Debug)]
struct EdgeDecl {
    line: usize,
    edge: TransitionEdge,
    from_col: usize,
    to_col: usize,
}

#[derive(Debug)]
enum Statement {
    Header(Header),
    Meta(String, String),
    Node(SceneNode),
    Edge(EdgeDecl),
}

fn parse_line(line: &str, lineno: usize) -> Result<Option<Statement>, ParseDiagnostic> {
    let toks = lex(line, lineno)?;
    let Some(first) = toks.first() else {
        return Ok(None);
    };
    let keyword = match &first.tok {
        Tok::Word(w) => w.as_str(),
        _ => return Err(ParseDiagnostic::error(lineno, first.col, "expected `graph`, `meta`, `node` or `edge`")),
    };
    let mut cur = Cursor {
        toks: &toks,
        pos: 1,
        lineno,
        eol_col: line.chars().count() + 1,
    };
    match keyword {
        "graph" => {
            let title = cur.value("a graph title")?;
            if title.text.is_empty() {
                return Err(ParseDiagnostic::error(lineno, title.col, "graph title must not be empty"));
            }
            let mut attrs = cur.attrs()?;
            let mode = match attrs.take_one("mode")? {
                None => DialogueMode::Flexible,
                Some(v) => DialogueMode::parse(&v.text).ok_or_else(|| {
                    ParseDiagnostic::error(lineno, v.col, format!("unknown mode `{}` (strict, flexible)", v.text))
                })?,
            };
            let start = attrs.take_one("start")?;
            let id = attrs.take_one("id")?.map(|v| v.text);
            attrs.finish()?;
            Ok(Some(Statement::Header(Header {
                line: lineno,
                title: title.text,
                mode,
                start,
                id,
            })))
        }
        "meta" => {
            let key = cur.value("a metadata key")?;
            let value = cur.value("a metadata value")?;
            if cur.pos < toks.len() {
                return Err(ParseDiagnostic::error(lineno, cur.here(), "unexpected trailing input"));
            }
            Ok(Some(Statement::Meta(key.text, value.text)))
        }
        "node" => {
            let id = cur.value("a node id")?;
            let mut attrs = cur.attrs()?;
            let avatar = attrs
                .take_one("avatar")?
                .ok_or_else(|| ParseDiagnostic::error(lineno, first.col, "node needs avatar=\"...\""))?;
            let desc = attrs.take_one("desc")?.map(|v| v.text).unwrap_or_default();
            let terminal = attrs.take_bool("terminal")?.unwrap_or(false);
            let provenance = attrs.take_provenance()?;
            attrs.finish()?;
            Ok(Some(Statement::Node(SceneNode {
                id: NodeId::from(id.text),
                avatar_utterance: avatar.text,
                description: desc,
                terminal,
                provenance,
            })))
        }
        "edge" => {
            let id = cur.value("an edge id")?;
            let from = cur.value("a source node id")?;
            cur.expect(Tok::Arrow, "`->`")?;
            let to = cur.value("a target node id")?;
            let mut attrs = cur.attrs()?;
            let label = attrs
                .take_one("intent")?
                .ok_or_else(|| ParseDiagnostic::error(lineno, first.col, "edge needs intent=..."))?;
            let desc = attrs.take_one("desc")?.map(|v| v.text).unwrap_or_default();
            let examples = attrs.take_list("examples")?.unwrap_or_default();
            let provenance = attrs.take_provenance()?;
            attrs.finish()?;
            let intent = ResponseIntent {
                label: label.text,
                description: desc,
                examples,
            };
            Ok(Some(Statement::Edge(EdgeDecl {
                line: lineno,
                from_col: from.col,
                to_col: to.col,
                edge: TransitionEdge {
                    id: id.text.into(),
                    from: from.text.into(),
                    to: to.text.into(),
                    intent,
                    provenance,
                },
            })))
        }
        other => Err(ParseDiagnostic::error(
            lineno,
            first.col,
            format!("unknown statement `{other}` (expected graph, meta, node or edge)"),
        )),
    }
}

/// Parses scenario text. Returns the graph only when no error was reported.
pub fn parse_dsl(text: &str) -> (Option<NarrativeGraph>, Vec<ParseDiagnostic>) {
    let mut diags = Vec::new();
    let mut header: Option<Header> = None;
    let mut metadata = BTreeMap::new();
    let mut nodes: Vec<(usize, SceneNode)> = Vec::new();
    let mut edges: Vec<EdgeDecl> = Vec::new();

    for (i, line) in text.lines().enumerate() {
        let lineno = i + 1;
        match parse_line(line, lineno) {
            Ok(None) => {}
            Ok(Some(Statement::Header(h))) => {
                if let Some(prev) = &header {
                    diags.push(ParseDiagnostic::error(
                        lineno,
                        1,
                        format!("second `graph` header (first on line {})", prev.line),
                    ));
                } else {
                    header = Some(h);
                }
            }
            Ok(Some(Statement::Meta(k, v))) => {
                if metadata.insert(k.clone(), v).is_some() {
                    diags.push(ParseDiagnostic::warning(lineno, 1, format!("metadata key `{k}` overrides an earlier value")));
                }
            }
            Ok(Some(Statement::Node(n))) => nodes.push((lineno, n)),
            Ok(Some(Statement::Edge(e))) => edges.push(e),
            Err(d) => diags.push(d),
        }
    }

    let Some(header) = header else {
        diags.push(ParseDiagnostic::error(1, 1, "missing `graph \"Title\" ...` header"));
        return (None, diags);
    };

    let mut graph = match NarrativeGraph::new(header.title.clone(), header.mode) {
        Ok(g) => g,
        Err(e) => {
            diags.push(ParseDiagnostic::error(header.line, 1, e.to_string()));
            return (None, diags);
        }
    };
    if let Some(id) = &header.id {
        graph.id = GraphId::from(id.as_str());
    }
    graph.metadata = metadata;

    for (lineno, node) in nodes {
        match graph.apply(Mutation::AddNode(node)) {
            Ok(g) => graph = g,
            Err(e) => diags.push(ParseDiagnostic::error(lineno, 6, e.to_string())),
        }
    }
    for decl in edges {
        match graph.apply(Mutation::AddEdge(decl.edge.clone())) {
            Ok(g) => graph = g,
            Err(GraphError::UnknownNode(id)) => {
                let col = if id == decl.edge.from { decl.from_col } else { decl.to_col };
                diags.push(ParseDiagnostic::error(decl.line, col, format!("undeclared node `{id}`")));
            }
            Err(e) => diags.push(ParseDiagnostic::error(decl.line, 6, e.to_string())),
        }
    }
    match header.start {
        Some(start) => match graph.apply(Mutation::SetStart(NodeId::from(start.text.as_str()))) {
            Ok(g) => graph = g,
            Err(_) => diags.push(ParseDiagnostic::error(
                header.line,
                start.col,
                format!("start node `{}` is not declared", start.text),
            )),
        },
        None if !graph.nodes.is_empty() => {
            let first = graph.start_node.clone().expect("first AddNode sets the start");
            diags.push(ParseDiagnostic::warning(
                header.line,
                1,
                format!("no start= given; starting at `{first}`"),
            ));
        }
        None => {}
    }
    graph.version = 1;

    diags.sort_by_key(|d| (d.line, d.column));
    if diags.iter().any(ParseDiagnostic::is_error) {
        (None, diags)
    } else {
        (Some(graph), diags)
    }
}

// ---------------------------------------------------------------------------
// Rendering

fn needs_quotes(s: &str) -> bool {
    s.is_empty() || s == "->" || !s.chars().all(is_word_char) || s.chars().any(char::is_control)
}

fn quoted(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            '\t' => out.push_str("\\t"),
            c if c.is_control() => {
                let _ = write!(out, "\\u{{{:x}}}", c as u32);
            }
            c => out.push(c),
        }
    }
    out.push('"');
    out
}

fn value(s: &str) -> String {
    if needs_quotes(s) {
        quoted(s)
    } else {
        s.to_string()
    }
}

/// Canonical scenario text for a graph without error diagnostics.
pub fn render_dsl(graph: &NarrativeGraph) -> Result<String, RenderError> {
    let errors: Vec<_> = validate::validate(graph).into_iter().filter(Diagnostic::is_error).collect();
    if !errors.is_empty() {
        return Err(RenderError::InvalidGraph(errors));
    }
    let mut out = String::new();
    let _ = write!(out, "graph {} mode={}", quoted(&graph.title), graph.mode.as_str());
    if let Some(start) = &graph.start_node {
        let _ = write!(out, " start={}", value(start.as_str()));
    }
    let _ = writeln!(out, " id={}", value(graph.id.as_str()));
    for (k, v) in &graph.metadata {
        let _ = writeln!(out, "meta {} {}", value(k), quoted(v));
    }
    if !graph.nodes.is_empty() {
        out.push('\n');
    }
    for node in graph.nodes.values() {
        let _ = write!(out, "node {} avatar={}", value(node.id.as_str()), quoted(&node.avatar_utterance));
        if !node.description.is_empty() {
            let _ = write!(out, " desc={}", quoted(&node.description));
        }
        let _ = write!(out, " terminal={}", node.terminal);
        if node.provenance != Provenance::Authored {
            let _ = write!(out, " provenance={}", node.provenance.as_str());
        }
        out.push('\n');
    }
    if !graph.edges.is_empty() {
        out.push('\n');
    }
    for edge in &graph.edges {
        let _ = write!(
            out,
            "edge {} {} -> {} intent={}",
            value(edge.id.as_str()),
            value(edge.from.as_str()),
            value(edge.to.as_str()),
            value(&edge.intent.label)
        );
        if !edge.intent.description.is_empty() {
            let _ = write!(out, " desc={}", quoted(&edge.intent.description));
        }
        if !edge.intent.examples.is_empty() {
            let items: Vec<_> = edge.intent.examples.iter().map(|e| quoted(e)).collect();
            let _ = write!(out, " examples=[{}]", items.join(", "));
        }
        if edge.provenance != Provenance::Authored {
            let _ = write!(out, " provenance={}", edge.provenance.as_str());
        }
        out.push('\n');
    }
    Ok(out)
}
