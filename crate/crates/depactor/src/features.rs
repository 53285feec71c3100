//! Feature structures and their unification subformalism.
//!
//! A value is an atomic term, a value disjunction over atoms, a complex term
//! mapping labels to values, or the inconsistent element bottom. Structure
//! sharing (coreference) is first-class: two labels may point at the same
//! node, and unifying new information into one position is observable at the
//! other. All values are immutable; every operation returns a fresh structure.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use thiserror::Error;

/// Reserved label naming the word itself inside its own feature structure.
pub const SELF_LABEL: &str = "self";

#[derive(Debug, Clone)]
enum Node {
    Atom(String),
    /// Invariant: at least two alternatives (singletons collapse to `Atom`).
    Disj(BTreeSet<String>),
    Complex(BTreeMap<String, usize>),
}

/// An immutable feature structure. Sharing is represented as a DAG: several
/// labels may map to the same node index.
#[derive(Clone)]
pub struct FeatureStructure {
    repr: Repr,
}

#[derive(Clone)]
enum Repr {
    Bottom,
    Graph { nodes: Vec<Node>, root: usize },
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum FsError {
    #[error("disjunction must contain at least one alternative")]
    EmptyDisjunction,
    #[error("duplicate label `{0}` in complex term")]
    DuplicateLabel(String),
    #[error("feature graph contains a cycle")]
    Cyclic,
    #[error("dangling node reference in builder")]
    DanglingRef,
}

/// Syntax error produced by [`parse_fs`], with 1-based line/column.
#[derive(Debug, Error, PartialEq, Eq)]
#[error("parse error at {line}:{col}: {msg}")]
pub struct FsParseError {
    pub line: u32,
    pub col: u32,
    pub msg: String,
}

impl FeatureStructure {
    /// The inconsistent element.
    pub fn bottom() -> Self {
        FeatureStructure { repr: Repr::Bottom }
    }

    /// The empty complex term; the identity element of unification.
    pub fn top() -> Self {
        FeatureStructure {
            repr: Repr::Graph {
                nodes: vec![Node::Complex(BTreeMap::new())],
                root: 0,
            },
        }
    }

    pub fn atom(sym: impl Into<String>) -> Self {
        FeatureStructure {
            repr: Repr::Graph {
                nodes: vec![Node::Atom(sym.into())],
                root: 0,
            },
        }
    }

    pub fn disjunction<I, S>(alts: I) -> Result<Self, FsError>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let set: BTreeSet<String> = alts.into_iter().map(Into::into).collect();
        match set.len() {
            0 => Err(FsError::EmptyDisjunction),
            1 => Ok(Self::atom(set.into_iter().next().unwrap())),
            _ => Ok(FeatureStructure {
                repr: Repr::Graph {
                    nodes: vec![Node::Disj(set)],
                    root: 0,
                },
            }),
        }
    }

    /// Builds a complex term from label/value pairs. Values are copied in;
    /// sharing across the supplied pairs is not preserved (use [`FsBuilder`]
    /// or the textual notation for coreferences).
    pub fn complex<I, S>(entries: I) -> Result<Self, FsError>
    where
        I: IntoIterator<Item = (S, FeatureStructure)>,
        S: Into<String>,
    {
        let mut nodes = Vec::new();
        let mut map = BTreeMap::new();
        for (label, value) in entries {
            let label = label.into();
            let Repr::Graph {
                nodes: vnodes,
                root,
            } = &value.repr
            else {
                return Err(FsError::Cyclic); // bottom cannot be embedded
            };
            let offset = nodes.len();
            nodes.extend(vnodes.iter().cloned().map(|n| shift_node(n, offset)));
            if map.insert(label.clone(), root + offset).is_some() {
                return Err(FsError::DuplicateLabel(label));
            }
        }
        let root = nodes.len();
        nodes.push(Node::Complex(map));
        Ok(FeatureStructure {
            repr: Repr::Graph { nodes, root },
        }
        .compact())
    }

    pub fn is_bottom(&self) -> bool {
        matches!(self.repr, Repr::Bottom)
    }

    /// True for the empty complex term.
    pub fn is_top(&self) -> bool {
        match &self.repr {
            Repr::Graph { nodes, root } => {
                matches!(&nodes[*root], Node::Complex(m) if m.is_empty())
            }
            Repr::Bottom => false,
        }
    }

    /// Labels present at the top level, if the root is a complex term.
    pub fn top_labels(&self) -> Vec<&str> {
        match &self.repr {
            Repr::Graph { nodes, root } => match &nodes[*root] {
                Node::Complex(m) => m.keys().map(|s| s.as_str()).collect(),
                _ => Vec::new(),
            },
            Repr::Bottom => Vec::new(),
        }
    }

    /// Drops unreachable nodes and renumbers in a canonical DFS order.
    fn compact(self) -> Self {
        let Repr::Graph { nodes, root } = &self.repr else {
            return self;
        };
        let mut memo: HashMap<usize, usize> = HashMap::new();
        let mut out: Vec<Node> = Vec::new();
        let new_root = copy_subgraph(nodes, *root, &mut memo, &mut out, |i| i);
        FeatureStructure {
            repr: Repr::Graph {
                nodes: out,
                root: new_root,
            },
        }
    }
}

fn shift_node(node: Node, offset: usize) -> Node {
    match node {
        Node::Complex(m) => Node::Complex(m.into_iter().map(|(l, v)| (l, v + offset)).collect()),
        other => other,
    }
}

/// Copies the subgraph rooted at `root` into `out`, preserving sharing.
/// `resolve` maps raw child ids to canonical ids (identity outside unify).
fn copy_subgraph(
    nodes: &[Node],
    root: usize,
    memo: &mut HashMap<usize, usize>,
    out: &mut Vec<Node>,
    resolve: impl Fn(usize) -> usize + Copy,
) -> usize {
    let root = resolve(root);
    if let Some(&id) = memo.get(&root) {
        return id;
    }
    let new_id = out.len();
    out.push(Node::Atom(String::new())); // placeholder, patched below
    memo.insert(root, new_id);
    let node = match &nodes[root] {
        Node::Atom(a) => Node::Atom(a.clone()),
        Node::Disj(d) => Node::Disj(d.clone()),
        Node::Complex(m) => Node::Complex(
            m.iter()
                .map(|(l, v)| (l.clone(), copy_subgraph(nodes, *v, memo, out, resolve)))
                .collect(),
        ),
    };
    out[new_id] = node;
    new_id
}

// ---------------------------------------------------------------------------
// Unification
// ---------------------------------------------------------------------------

struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind {
            parent: (0..n).collect(),
        }
    }
    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }
    fn union_into(&mut self, keep: usize, absorb: usize) {
        self.parent[absorb] = keep;
    }
}

/// Unifies two structures, returning the most general structure subsumed by
/// both. Inconsistency is the value bottom, never an error. Coreferenced
/// positions are unified once and stay shared in the result. A unification
/// that would create a cyclic structure yields bottom.
pub fn unify(a: &FeatureStructure, b: &FeatureStructure) -> FeatureStructure {
    let (
        Repr::Graph {
            nodes: an,
            root: ar,
        },
        Repr::Graph {
            nodes: bn,
            root: br,
        },
    ) = (&a.repr, &b.repr)
    else {
        return FeatureStructure::bottom();
    };

    let offset = an.len();
    let mut nodes: Vec<Node> = an.clone();
    nodes.extend(bn.iter().cloned().map(|n| shift_node(n, offset)));
    let mut uf = UnionFind::new(nodes.len());

    let mut work = vec![(*ar, br + offset)];
    while let Some((x, y)) = work.pop() {
        let rx = uf.find(x);
        let ry = uf.find(y);
        if rx == ry {
            continue;
        }
        let merged = match (&nodes[rx], &nodes[ry]) {
            (Node::Atom(p), Node::Atom(q)) => {
                if p == q {
                    Node::Atom(p.clone())
                } else {
                    return FeatureStructure::bottom();
                }
            }
            (Node::Atom(p), Node::Disj(d)) | (Node::Disj(d), Node::Atom(p)) => {
                if d.contains(p) {
                    Node::Atom(p.clone())
                } else {
                    return FeatureStructure::bottom();
                }
            }
            (Node::Disj(d1), Node::Disj(d2)) => {
                let inter: BTreeSet<String> = d1.intersection(d2).cloned().collect();
                match inter.len() {
                    0 => return FeatureStructure::bottom(),
                    1 => Node::Atom(inter.into_iter().next().unwrap()),
                    _ => Node::Disj(inter),
                }
            }
            (Node::Complex(m), other) if m.is_empty() => other.clone(),
            (other, Node::Complex(m)) if m.is_empty() => other.clone(),
            (Node::Complex(m1), Node::Complex(m2)) => {
                let mut merged = m1.clone();
                for (label, v2) in m2 {
                    if let Some(&v1) = merged.get(label) {
                        work.push((v1, *v2));
                    } else {
                        merged.insert(label.clone(), *v2);
                    }
                }
                Node::Complex(merged)
            }
            _ => return FeatureStructure::bottom(),
        };
        uf.union_into(rx, ry);
        nodes[rx] = merged;
    }

    // Read the merged graph back out; a node revisited while still on the
    // DFS stack means the unification produced a cycle.
    let root = uf.find(*ar);
    let mut out: Vec<Node> = Vec::new();
    let mut state: HashMap<usize, Option<usize>> = HashMap::new(); // None = in progress
    match read_back(&mut nodes, &mut uf, root, &mut state, &mut out) {
        Ok(new_root) => FeatureStructure {
            repr: Repr::Graph {
                nodes: out,
                root: new_root,
            },
        },
        Err(()) => FeatureStructure::bottom(),
    }
}

fn read_back(
    nodes: &mut Vec<Node>,
    uf: &mut UnionFind,
    class: usize,
    state: &mut HashMap<usize, Option<usize>>,
    out: &mut Vec<Node>,
) -> Result<usize, ()> {
    let class = uf.find(class);
    match state.get(&class) {
        Some(Some(id)) => return Ok(*id),
        Some(None) => return Err(()), // occurs-check failure
        None => {}
    }
    state.insert(class, None);
    let node = match nodes[class].clone() {
        Node::Atom(a) => Node::Atom(a),
        Node::Disj(d) => Node::Disj(d),
        Node::Complex(m) => {
            let mut rebuilt = BTreeMap::new();
            for (label, child) in m {
                rebuilt.insert(label, read_back(nodes, uf, child, state, out)?);
            }
            Node::Complex(rebuilt)
        }
    };
    let id = out.len();
    out.push(node);
    state.insert(class, Some(id));
    Ok(id)
}

/// The complex term containing only `label`, with value `value`.
/// Expanding bottom yields bottom.
pub fn expand(label: &str, value: &FeatureStructure) -> FeatureStructure {
    match &value.repr {
        Repr::Bottom => FeatureStructure::bottom(),
        Repr::Graph { nodes, root } => {
            let mut out = nodes.clone();
            let mut map = BTreeMap::new();
            map.insert(label.to_string(), *root);
            let new_root = out.len();
            out.push(Node::Complex(map));
            FeatureStructure {
                repr: Repr::Graph {
                    nodes: out,
                    root: new_root,
                },
            }
        }
    }
}

/// The value of `label` at the top level of `value`, as a self-contained
/// structure (sharing internal to the extracted part is preserved; sharing
/// with the rest of the source is dropped). Yields bottom in all other cases.
pub fn extract(value: &FeatureStructure, label: &str) -> FeatureStructure {
    let Repr::Graph { nodes, root } = &value.repr else {
        return FeatureStructure::bottom();
    };
    let Node::Complex(map) = &nodes[*root] else {
        return FeatureStructure::bottom();
    };
    let Some(&child) = map.get(label) else {
        return FeatureStructure::bottom();
    };
    let mut memo = HashMap::new();
    let mut out = Vec::new();
    let new_root = copy_subgraph(nodes, child, &mut memo, &mut out, |i| i);
    FeatureStructure {
        repr: Repr::Graph {
            nodes: out,
            root: new_root,
        },
    }
}

/// Equality up to coreference-tag renumbering and label ordering.
pub fn equivalent(a: &FeatureStructure, b: &FeatureStructure) -> bool {
    render_fs(a) == render_fs(b)
}

impl PartialEq for FeatureStructure {
    fn eq(&self, other: &Self) -> bool {
        equivalent(self, other)
    }
}
impl Eq for FeatureStructure {}

impl Default for FeatureStructure {
    /// The identity element (empty complex term).
    fn default() -> Self {
        FeatureStructure::top()
    }
}

impl fmt::Display for FeatureStructure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&render_fs(self))
    }
}

impl fmt::Debug for FeatureStructure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&render_fs(self))
    }
}

// ---------------------------------------------------------------------------
// Rendering
// ---------------------------------------------------------------------------

/// Deterministic canonical rendering: labels sorted, coreference tags
/// renumbered in first-occurrence order. Two structures are equivalent iff
/// they render identically. Bottom renders as `⊥` (not parseable).
pub fn render_fs(fs: &FeatureStructure) -> String {
    let Repr::Graph { nodes, root } = &fs.repr else {
        return "⊥".to_string();
    };
    // Shared atoms are semantically indistinguishable from copies, so tags
    // are emitted for complex and disjunction nodes only.
    let mut refs: HashMap<usize, usize> = HashMap::new();
    count_refs(nodes, *root, &mut refs);
    let mut tags: HashMap<usize, u32> = HashMap::new();
    let mut next_tag = 1u32;
    let mut seen: BTreeSet<usize> = BTreeSet::new();
    let mut buf = String::new();
    render_node(
        nodes,
        *root,
        &refs,
        &mut tags,
        &mut next_tag,
        &mut seen,
        &mut buf,
    );
    buf
}

fn count_refs(nodes: &[Node], root: usize, refs: &mut HashMap<usize, usize>) {
    let entry = refs.entry(root).or_insert(0);
    *entry += 1;
    if *entry > 1 {
        return;
    }
    if let Node::Complex(m) = &nodes[root] {
        for &v in m.values() {
            count_refs(nodes, v, refs);
        }
    }
}

fn render_node(
    nodes: &[Node],
    id: usize,
    refs: &HashMap<usize, usize>,
    tags: &mut HashMap<usize, u32>,
    next_tag: &mut u32,
    seen: &mut BTreeSet<usize>,
    buf: &mut String,
) {
    let shared = refs.get(&id).copied().unwrap_or(0) > 1 && !matches!(&nodes[id], Node::Atom(_));
    if shared {
        if seen.contains(&id) {
            buf.push_str(&format!("<{}>", tags[&id]));
            return;
        }
        let tag = *next_tag;
        *next_tag += 1;
        tags.insert(id, tag);
        seen.insert(id);
        buf.push_str(&format!("<{}>=", tag));
    }
    match &nodes[id] {
        Node::Atom(a) => buf.push_str(a),
        Node::Disj(d) => {
            buf.push('{');
            for (i, alt) in d.iter().enumerate() {
                if i > 0 {
                    buf.push_str(", ");
                }
                buf.push_str(alt);
            }
            buf.push('}');
        }
        Node::Complex(m) => {
            buf.push('[');
            for (i, (label, v)) in m.iter().enumerate() {
                if i > 0 {
                    buf.push_str(", ");
                }
                buf.push_str(label);
                buf.push_str(": ");
                render_node(nodes, *v, refs, tags, next_tag, seen, buf);
            }
            buf.push(']');
        }
    }
}

// ---------------------------------------------------------------------------
// Parsing
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    LBracket,
    RBracket,
    LBrace,
    RBrace,
    Colon,
    Comma,
    Tag(u32),
    Eq,
}

struct Lexer<'a> {
    src: &'a [u8],
    pos: usize,
    line: u32,
    col: u32,
}

impl<'a> Lexer<'a> {
    fn new(src: &'a str) -> Self {
        Lexer {
            src: src.as_bytes(),
            pos: 0,
            line: 1,
            col: 1,
        }
    }

    fn err(&self, msg: impl Into<String>) -> FsParseError {
        FsParseError {
            line: self.line,
            col: self.col,
            msg: msg.into(),
        }
    }

    fn bump(&mut self) -> Option<u8> {
        let c = self.src.get(self.pos).copied()?;
        self.pos += 1;
        if c == b'\n' {
            self.line += 1;
            self.col = 1;
        } else {
            self.col += 1;
        }
        Some(c)
    }

    fn tokens(mut self) -> Result<Vec<(Tok, u32, u32)>, FsParseError> {
        let mut out = Vec::new();
        loop {
            while matches!(self.src.get(self.pos), Some(c) if c.is_ascii_whitespace()) {
                self.bump();
            }
            let (line, col) = (self.line, self.col);
            let Some(&c) = self.src.get(self.pos) else {
                break;
            };
            let tok = match c {
                b'[' => {
                    self.bump();
                    Tok::LBracket
                }
                b']' => {
                    self.bump();
                    Tok::RBracket
                }
                b'{' => {
                    self.bump();
                    Tok::LBrace
                }
                b'}' => {
                    self.bump();
                    Tok::RBrace
                }
                b':' => {
                    self.bump();
                    Tok::Colon
                }
                b',' => {
                    self.bump();
                    Tok::Comma
                }
                b'=' => {
                    self.bump();
                    Tok::Eq
                }
                b'<' => {
                    self.bump();
                    let mut n: u32 = 0;
                    let mut any = false;
                    while matches!(self.src.get(self.pos), Some(d) if d.is_ascii_digit()) {
                        n = n * 10 + u32::from(self.bump().unwrap() - b'0');
                        any = true;
                    }
                    if !any {
                        return Err(self.err("expected digits in coreference tag"));
                    }
                    if self.src.get(self.pos) != Some(&b'>') {
                        return Err(self.err("expected `>` closing coreference tag"));
                    }
                    self.bump();
                    if n == 0 {
                        return Err(self.err("coreference tags are positive integers"));
                    }
                    Tok::Tag(n)
                }
                c if is_ident_char(c) => {
                    let mut s = String::new();
                    while matches!(self.src.get(self.pos), Some(&d) if is_ident_char(d)) {
                        s.push(self.bump().unwrap() as char);
                    }
                    Tok::Ident(s)
                }
                other => return Err(self.err(format!("unexpected character `{}`", other as char))),
            };
            out.push((tok, line, col));
        }
        Ok(out)
    }
}

fn is_ident_char(c: u8) -> bool {
    c.is_ascii_alphanumeric() || c == b'_' || c == b'-'
}

enum Ast {
    Atom(String),
    Disj(Vec<String>, u32, u32),
    Complex(Vec<(String, Ast)>, u32, u32),
    TagRef(u32, u32, u32),
    TagDef(u32, Box<Ast>, u32, u32),
}

struct Parser {
    toks: Vec<(Tok, u32, u32)>,
    at: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.at).map(|(t, _, _)| t)
    }

    fn pos(&self) -> (u32, u32) {
        self.toks
            .get(self.at)
            .or_else(|| self.toks.last())
            .map(|&(_, l, c)| (l, c))
            .unwrap_or((1, 1))
    }

    fn err(&self, msg: impl Into<String>) -> FsParseError {
        let (line, col) = self.pos();
        FsParseError {
            line,
            col,
            msg: msg.into(),
        }
    }

    fn next(&mut self) -> Option<Tok> {
        let t = self.toks.get(self.at).map(|(t, _, _)| t.clone());
        self.at += 1;
        t
    }

    fn expect(&mut self, want: Tok, what: &str) -> Result<(), FsParseError> {
        if self.peek() == Some(&want) {
            self.at += 1;
            Ok(())
        } else {
            Err(self.err(format!("expected {what}")))
        }
    }

    fn fs(&mut self) -> Result<Ast, FsParseError> {
        let (line, col) = self.pos();
        match self.next() {
            Some(Tok::Ident(s)) => Ok(Ast::Atom(s)),
            Some(Tok::LBrace) => {
                let mut alts = Vec::new();
                loop {
                    match self.next() {
                        Some(Tok::Ident(s)) => alts.push(s),
                        _ => return Err(self.err("expected atom in disjunction")),
                    }
                    match self.next() {
                        Some(Tok::Comma) => continue,
                        Some(Tok::RBrace) => break,
                        _ => return Err(self.err("expected `,` or `}` in disjunction")),
                    }
                }
                Ok(Ast::Disj(alts, line, col))
            }
            Some(Tok::LBracket) => {
                let mut entries = Vec::new();
                if self.peek() == Some(&Tok::RBracket) {
                    self.at += 1;
                    return Ok(Ast::Complex(entries, line, col));
                }
                loop {
                    let label = match self.next() {
                        Some(Tok::Ident(s)) => s,
                        _ => return Err(self.err("expected label")),
                    };
                    self.expect(Tok::Colon, "`:` after label")?;
                    let value = self.fs()?;
                    entries.push((label, value));
                    match self.next() {
                        Some(Tok::Comma) => continue,
                        Some(Tok::RBracket) => break,
                        _ => return Err(self.err("expected `,` or `]` in complex term")),
                    }
                }
                Ok(Ast::Complex(entries, line, col))
            }
            Some(Tok::Tag(n)) => {
                if self.peek() == Some(&Tok::Eq) {
                    self.at += 1;
                    let inner = self.fs()?;
                    Ok(Ast::TagDef(n, Box::new(inner), line, col))
                } else {
                    Ok(Ast::TagRef(n, line, col))
                }
            }
            _ => Err(self.err("expected feature structure")),
        }
    }
}

/// Parses the textual notation:
/// `FS := Atom | '{' Atom (',' Atom)* '}' | '[' Pair (',' Pair)* ']' | '<' INT '>' ('=' FS)?`.
pub fn parse_fs(text: &str) -> Result<FeatureStructure, FsParseError> {
    let toks = Lexer::new(text).tokens()?;
    let mut parser = Parser { toks, at: 0 };
    let ast = parser.fs()?;
    if parser.at != parser.toks.len() {
        return Err(parser.err("trailing input after feature structure"));
    }

    // Collect tag definitions, then resolve with cycle detection so that
    // forward references work and self-referential tags are rejected.
    let mut defs: HashMap<u32, (&Ast, u32, u32)> = HashMap::new();
    collect_defs(&ast, &mut defs)?;

    let mut nodes: Vec<Node> = Vec::new();
    let mut resolved: HashMap<u32, Option<usize>> = HashMap::new();
    let root = resolve_ast(&ast, &defs, &mut resolved, &mut nodes)?;
    Ok(FeatureStructure {
        repr: Repr::Graph { nodes, root },
    })
}

fn collect_defs<'a>(
    ast: &'a Ast,
    defs: &mut HashMap<u32, (&'a Ast, u32, u32)>,
) -> Result<(), FsParseError> {
    match ast {
        Ast::TagDef(n, inner, line, col) => {
            if defs.insert(*n, (inner, *line, *col)).is_some() {
                return Err(FsParseError {
                    line: *line,
                    col: *col,
                    msg: format!("coreference tag <{n}> bound more than once"),
                });
            }
            collect_defs(inner, defs)
        }
        Ast::Complex(entries, _, _) => {
            for (_, v) in entries {
                collect_defs(v, defs)?;
            }
            Ok(())
        }
        _ => Ok(()),
    }
}

fn resolve_ast(
    ast: &Ast,
    defs: &HashMap<u32, (&Ast, u32, u32)>,
    resolved: &mut HashMap<u32, Option<usize>>,
    nodes: &mut Vec<Node>,
) -> Result<usize, FsParseError> {
    match ast {
        Ast::Atom(s) => {
            nodes.push(Node::Atom(s.clone()));
            Ok(nodes.len() - 1)
        }
        Ast::Disj(alts, line, col) => {
            let set: BTreeSet<String> = alts.iter().cloned().collect();
            if set.is_empty() {
                return Err(FsParseError {
                    line: *line,
                    col: *col,
                    msg: "empty disjunction".into(),
                });
            }
            if set.len() == 1 {
                nodes.push(Node::Atom(set.into_iter().next().unwrap()));
            } else {
                nodes.push(Node::Disj(set));
            }
            Ok(nodes.len() - 1)
        }
        Ast::Complex(entries, line, col) => {
            let mut map = BTreeMap::new();
            for (label, value) in entries {
                let id = resolve_ast(value, defs, resolved, nodes)?;
                if map.insert(label.clone(), id).is_some() {
                    return Err(FsParseError {
                        line: *line,
                        col: *col,
                        msg: format!("duplicate label `{label}`"),
                    });
                }
            }
            nodes.push(Node::Complex(map));
            Ok(nodes.len() - 1)
        }
        Ast::TagRef(n, line, col) | Ast::TagDef(n, _, line, col) => {
            resolve_tag(*n, *line, *col, defs, resolved, nodes)
        }
    }
}

fn resolve_tag(
    n: u32,
    line: u32,
    col: u32,
    defs: &HashMap<u32, (&Ast, u32, u32)>,
    resolved: &mut HashMap<u32, Option<usize>>,
    nodes: &mut Vec<Node>,
) -> Result<usize, FsParseError> {
    match resolved.get(&n) {
        Some(Some(id)) => return Ok(*id),
        Some(None) => {
            return Err(FsParseError {
                line,
                col,
                msg: format!("coreference tag <{n}> is cyclic"),
            })
        }
        None => {}
    }
    let Some(&(inner, dline, dcol)) = defs.get(&n) else {
        return Err(FsParseError {
            line,
            col,
            msg: format!("coreference tag <{n}> is never bound"),
        });
    };
    resolved.insert(n, None);
    let id = match inner {
        // A tag bound directly to another tag is resolved through it.
        Ast::TagRef(m, l, c) => resolve_tag(*m, *l, *c, defs, resolved, nodes)?,
        other => resolve_ast_inner(other, defs, resolved, nodes, dline, dcol)?,
    };
    resolved.insert(n, Some(id));
    Ok(id)
}

fn resolve_ast_inner(
    ast: &Ast,
    defs: &HashMap<u32, (&Ast, u32, u32)>,
    resolved: &mut HashMap<u32, Option<usize>>,
    nodes: &mut Vec<Node>,
    _line: u32,
    _col: u32,
) -> Result<usize, FsParseError> {
    resolve_ast(ast, defs, resolved, nodes)
}

// ---------------------------------------------------------------------------
// Graph builder (programmatic construction with explicit sharing)
// ---------------------------------------------------------------------------

/// Bottom-up builder for structures with explicit sharing, mainly used by
/// generators in tests.
#[derive(Default)]
pub struct FsBuilder {
    nodes: Vec<Node>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NodeId(usize);

impl FsBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn atom(&mut self, sym: impl Into<String>) -> NodeId {
        self.nodes.push(Node::Atom(sym.into()));
        NodeId(self.nodes.len() - 1)
    }

    pub fn disj<I, S>(&mut self, alts: I) -> Result<NodeId, FsError>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let set: BTreeSet<String> = alts.into_iter().map(Into::into).collect();
        match set.len() {
            0 => Err(FsError::EmptyDisjunction),
            1 => Ok(self.atom(set.into_iter().next().unwrap())),
            _ => {
                self.nodes.push(Node::Disj(set));
                Ok(NodeId(self.nodes.len() - 1))
            }
        }
    }

    pub fn complex<I, S>(&mut self, entries: I) -> Result<NodeId, FsError>
    where
        I: IntoIterator<Item = (S, NodeId)>,
        S: Into<String>,
    {
        let mut map = BTreeMap::new();
        for (label, NodeId(v)) in entries {
            if v >= self.nodes.len() {
                return Err(FsError::DanglingRef);
            }
            let label = label.into();
            if map.insert(label.clone(), v).is_some() {
                return Err(FsError::DuplicateLabel(label));
            }
        }
        self.nodes.push(Node::Complex(map));
        Ok(NodeId(self.nodes.len() - 1))
    }

    /// Nodes may only reference earlier nodes, so the graph is acyclic by
    /// construction.
    pub fn finish(self, NodeId(root): NodeId) -> Result<FeatureStructure, FsError> {
        if root >= self.nodes.len() {
            return Err(FsError::DanglingRef);
        }
        Ok(FeatureStructure {
            repr: Repr::Graph {
                nodes: self.nodes,
                root,
            },
        }
        .compact())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fs(s: &str) -> FeatureStructure {
        parse_fs(s).unwrap()
    }

    #[test]
    fn empty_complex_is_identity() {
        let x = fs("[case: acc]");
        assert!(equivalent(&unify(&x, &FeatureStructure::top()), &x));
        assert!(equivalent(&unify(&FeatureStructure::top(), &x), &x));
        // identity holds for non-complex values too
        let a = fs("acc");
        assert!(equivalent(&unify(&a, &FeatureStructure::top()), &a));
    }

    #[test]
    fn atomic_clash_is_bottom() {
        assert!(unify(&fs("[case: acc]"), &fs("[case: dat]")).is_bottom());
    }

    #[test]
    fn disjunction_meets_by_intersection() {
        let r = unify(&fs("[case: {dat, acc}]"), &fs("[case: {acc, nom}]"));
        assert!(equivalent(&r, &fs("[case: acc]")));
        assert!(unify(&fs("[case: {dat, gen}]"), &fs("[case: {acc, nom}]")).is_bottom());
    }

    #[test]
    fn singleton_disjunction_collapses() {
        assert!(equivalent(&fs("[case: {dat}]"), &fs("[case: dat]")));
    }

    #[test]
    fn noun_head_unification_keeps_coreference() {
        // Possible head before and after taking a prepositional modifier.
        let prior = fs("[self: [agr: <1>=[case: acc, gen: mas, num: sg]], spec: [agr: <1>]]");
        let addition = fs("[ppatt: [form: mit]]");
        let after = unify(&prior, &addition);
        let expected = fs(
            "[ppatt: [form: mit], self: [agr: <1>=[case: acc, gen: mas, num: sg]], spec: [agr: <1>]]",
        );
        assert!(equivalent(&after, &expected));
    }

    #[test]
    fn expand_and_extract() {
        assert!(equivalent(
            &expand("agr", &fs("[case: dat]")),
            &fs("[agr: [case: dat]]")
        ));
        assert!(equivalent(
            &expand("ppatt", &fs("[form: mit]")),
            &fs("[ppatt: [form: mit]]")
        ));
        assert!(expand("case", &FeatureStructure::bottom()).is_bottom());

        assert!(equivalent(
            &extract(&fs("[agr: [case: dat]]"), "agr"),
            &fs("[case: dat]")
        ));
        assert!(extract(&fs("[case: dat]"), "agr").is_bottom());
        let mit = fs("[self: [form: mit], pobj: [agr: [case: dat, gen: fem, num: sg]]]");
        assert!(equivalent(&extract(&mit, "self"), &fs("[form: mit]")));
        assert!(extract(&fs("atomvalue"), "agr").is_bottom());
    }

    #[test]
    fn extract_after_expand_is_identity() {
        for s in ["[case: dat]", "acc", "{nom, acc}", "[a: [b: c]]"] {
            let u = fs(s);
            assert!(equivalent(&extract(&expand("l", &u), "l"), &u));
        }
    }

    #[test]
    fn equivalence_ignores_order_and_tag_names() {
        assert!(equivalent(&fs("[a: x, b: y]"), &fs("[b: y, a: x]")));
        assert!(equivalent(
            &fs("[p: <1>=[v: x], q: <1>]"),
            &fs("[p: <7>=[v: x], q: <7>]")
        ));
        assert!(!equivalent(
            &fs("[p: <1>=[v: x], q: <1>]"),
            &fs("[p: [v: x], q: [v: x]]")
        ));
    }

    #[test]
    fn sharing_is_observable_under_unification() {
        // Adding information at one shared position must surface at the other;
        // with plain copies it must not.
        let shared = fs("[p: <1>=[v: x], q: <1>]");
        let copied = fs("[p: [v: x], q: [v: x]]");
        let probe = fs("[p: [w: fresh]]");

        let shared_result = unify(&shared, &probe);
        assert!(equivalent(
            &extract(&shared_result, "q"),
            &fs("[v: x, w: fresh]")
        ));

        let copied_result = unify(&copied, &probe);
        assert!(equivalent(&extract(&copied_result, "q"), &fs("[v: x]")));
    }

    #[test]
    fn bottom_is_absorbing() {
        let b = FeatureStructure::bottom();
        for s in ["[case: acc]", "x", "{a, b}"] {
            assert!(unify(&fs(s), &b).is_bottom());
            assert!(unify(&b, &fs(s)).is_bottom());
        }
        assert!(unify(&b, &b).is_bottom());
    }

    #[test]
    fn unify_detects_created_cycles() {
        // Merging makes the shared node a descendant of itself.
        let a = fs("[p: <1>=[f: []], q: <1>]");
        let b = fs("[p: [f: <2>=[]], q: <2>]");
        assert!(unify(&a, &b).is_bottom());
    }

    #[test]
    fn type_clash_complex_vs_atom() {
        assert!(unify(&fs("[a: x]"), &fs("atom")).is_bottom());
        assert!(unify(&fs("[k: [a: x]]"), &fs("[k: atom]")).is_bottom());
    }

    #[test]
    fn parse_errors_carry_position() {
        let e = parse_fs("[case acc]").unwrap_err();
        assert_eq!((e.line, e.col), (1, 7));
        let e = parse_fs("[a: x,\n b y]").unwrap_err();
        assert_eq!(e.line, 2);
        assert!(parse_fs("<1>").unwrap_err().msg.contains("never bound"));
        assert!(parse_fs("[a: <1>=[x: y], b: <1>=[x: y]]")
            .unwrap_err()
            .msg
            .contains("more than once"));
        assert!(parse_fs("<1>=[a: <1>]").unwrap_err().msg.contains("cyclic"));
        assert!(parse_fs("[a: x] trailing").is_err());
    }

    #[test]
    fn render_is_canonical() {
        let a = fs("[b: y, a: <3>=[k: v], c: <3>]");
        assert_eq!(render_fs(&a), "[a: <1>=[k: v], b: y, c: <1>]");
        assert_eq!(render_fs(&fs("{z, a}")), "{a, z}");
        assert_eq!(render_fs(&FeatureStructure::top()), "[]");
        assert_eq!(render_fs(&FeatureStructure::bottom()), "⊥");
    }

    #[test]
    fn builder_shares_nodes() {
        let mut b = FsBuilder::new();
        let leaf = b.atom("x");
        let inner = b.complex(vec![("v", leaf)]).unwrap();
        let root = b.complex(vec![("p", inner), ("q", inner)]).unwrap();
        let built = b.finish(root).unwrap();
        assert!(equivalent(&built, &fs("[p: <1>=[v: x], q: <1>]")));
    }
}
