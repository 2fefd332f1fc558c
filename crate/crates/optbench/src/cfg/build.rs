//! Token-level CFG construction for a C-like translation unit.

use std::collections::{BTreeMap, HashSet, VecDeque};
use std::ops::Range;

use super::{BasicBlock, Cfg, CfgError, Edge, EdgeKind, NodeKind};

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Sym(char),
    Lit,
}

impl Tok {
    fn is_sym(&self, c: char) -> bool {
        matches!(self, Tok::Sym(s) if *s == c)
    }

    fn ident(&self) -> Option<&str> {
        match self {
            Tok::Ident(s) => Some(s),
            _ => None,
        }
    }
}

/// Strip //, /* */ comments and preprocessor lines (with continuations),
/// keeping string and char literals opaque.
fn strip_source(src: &str) -> String {
    let bytes: Vec<char> = src.chars().collect();
    let mut out = String::with_capacity(src.len());
    let mut i = 0;
    let mut at_line_start = true;
    while i < bytes.len() {
        let c = bytes[i];
        if at_line_start && c == '#' {
            // preprocessor line, honoring backslash continuations
            while i < bytes.len() {
                if bytes[i] == '\\' && i + 1 < bytes.len() && bytes[i + 1] == '\n' {
                    i += 2;
                    continue;
                }
                if bytes[i] == '\n' {
                    break;
                }
                i += 1;
            }
            out.push('\n');
            i += 1;
            at_line_start = true;
            continue;
        }
        if !c.is_whitespace() {
            at_line_start = false;
        }
        if c == '\n' {
            at_line_start = true;
        }
        match c {
            '/' if i + 1 < bytes.len() && bytes[i + 1] == '/' => {
                while i < bytes.len() && bytes[i] != '\n' {
                    i += 1;
                }
            }
            '/' if i + 1 < bytes.len() && bytes[i + 1] == '*' => {
                i += 2;
                while i + 1 < bytes.len() && !(bytes[i] == '*' && bytes[i + 1] == '/') {
                    i += 1;
                }
                i += 2;
                out.push(' ');
            }
            '"' | '\'' => {
                let quote = c;
                out.push('\u{1}'); // literal placeholder
                i += 1;
                while i < bytes.len() && bytes[i] != quote {
                    if bytes[i] == '\\' {
                        i += 1;
                    }
                    i += 1;
                }
                i += 1;
            }
            _ => {
                out.push(c);
                i += 1;
            }
        }
    }
    out
}

fn tokenize(stripped: &str) -> Vec<Tok> {
    let chars: Vec<char> = stripped.chars().collect();
    let mut toks = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            i += 1;
        } else if c == '\u{1}' {
            toks.push(Tok::Lit);
            i += 1;
        } else if c.is_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            toks.push(Tok::Ident(chars[start..i].iter().collect()));
        } else if c.is_ascii_digit() {
            while i < chars.len()
                && (chars[i].is_alphanumeric() || chars[i] == '.' || chars[i] == '_')
            {
                i += 1;
            }
            toks.push(Tok::Lit);
        } else {
            toks.push(Tok::Sym(c));
            i += 1;
        }
    }
    toks
}

/// Position of the symbol matching the opener at `open` (which must be an
/// opening paren/brace/bracket). Returns None when unbalanced.
fn matching(toks: &[Tok], open: usize) -> Option<usize> {
    let (o, c) = match &toks[open] {
        Tok::Sym('(') => ('(', ')'),
        Tok::Sym('{') => ('{', '}'),
        Tok::Sym('[') => ('[', ']'),
        _ => return None,
    };
    let mut depth = 0usize;
    for (i, t) in toks.iter().enumerate().skip(open) {
        if t.is_sym(o) {
            depth += 1;
        } else if t.is_sym(c) {
            depth -= 1;
            if depth == 0 {
                return Some(i);
            }
        }
    }
    None
}

/// Top-level function definitions: name plus token range of the body
/// (inside the braces).
fn extract_functions(toks: &[Tok]) -> BTreeMap<String, Range<usize>> {
    let mut funcs = BTreeMap::new();
    let mut depth = 0usize;
    let mut i = 0;
    while i < toks.len() {
        match &toks[i] {
            Tok::Sym('{') => {
                depth += 1;
                i += 1;
            }
            Tok::Sym('}') => {
                depth = depth.saturating_sub(1);
                i += 1;
            }
            Tok::Ident(name) if depth == 0 => {
                // pattern: ident ( ... ) { ... }
                if i + 1 < toks.len() && toks[i + 1].is_sym('(') {
                    if let Some(close) = matching(toks, i + 1) {
                        if close + 1 < toks.len() && toks[close + 1].is_sym('{') {
                            if let Some(body_end) = matching(toks, close + 1) {
                                funcs.insert(name.clone(), (close + 2)..body_end);
                                i = body_end + 1;
                                continue;
                            }
                        }
                    }
                }
                i += 1;
            }
            _ => {
                i += 1;
            }
        }
    }
    funcs
}

const KEYWORDS: &[&str] = &[
    "if", "else", "while", "for", "do", "switch", "return", "break", "continue", "goto", "case",
    "default",
];

#[derive(PartialEq)]
enum ScopeKind {
    Loop,
    DoLoop,
    Switch,
}

struct LoopCtx {
    kind: ScopeKind,
    /// Target of `continue`; None for switch scopes and do-loops whose
    /// condition node is built after the body.
    head: Option<usize>,
    breaks: Vec<(usize, EdgeKind)>,
    continues: Vec<(usize, EdgeKind)>,
}

impl LoopCtx {
    fn new(kind: ScopeKind, head: Option<usize>) -> Self {
        LoopCtx {
            kind,
            head,
            breaks: Vec::new(),
            continues: Vec::new(),
        }
    }
}

struct Builder {
    toks: Vec<Tok>,
    nodes: Vec<BasicBlock>,
    edges: Vec<Edge>,
    exit_id: usize,
    fn_bodies: BTreeMap<String, Range<usize>>,
    component_entry: BTreeMap<String, usize>,
    loop_stack: Vec<LoopCtx>,
}

type Frontier = Vec<(usize, EdgeKind)>;

impl Builder {
    fn new_node(&mut self, kind: NodeKind) -> usize {
        let id = self.nodes.len();
        self.nodes.push(BasicBlock {
            id,
            kind,
            stmt_count: 0,
        });
        id
    }

    fn attach(&mut self, frontier: &Frontier, to: usize) {
        for (from, kind) in frontier {
            self.add_edge(*from, to, *kind);
        }
    }

    fn attach_back(&mut self, frontier: &Frontier, to: usize) {
        for (from, _) in frontier {
            self.add_edge(*from, to, EdgeKind::Back);
        }
    }

    fn add_edge(&mut self, from: usize, to: usize, kind: EdgeKind) {
        if !self.edges.iter().any(|e| e.from == from && e.to == to) {
            self.edges.push(Edge { from, to, kind });
        }
    }

    /// Entry block of the component for a defined function, built on demand.
    fn ensure_component(&mut self, name: &str) -> Option<usize> {
        if let Some(&id) = self.component_entry.get(name) {
            return Some(id);
        }
        let body = self.fn_bodies.get(name)?.clone();
        let anchor = self.new_node(NodeKind::Straight);
        self.component_entry.insert(name.to_string(), anchor);
        let saved_stack = std::mem::take(&mut self.loop_stack);
        let (_, ends) = self.build_stmts(body, vec![(anchor, EdgeKind::Fallthrough)], false);
        self.loop_stack = saved_stack;
        let exit = self.exit_id;
        self.attach(&ends, exit);
        Some(anchor)
    }

    /// Build the statements in `range`, entered through `frontier`.
    /// Returns the first node created (if any) and the dangling exits.
    fn build_stmts(
        &mut self,
        range: Range<usize>,
        frontier: Frontier,
        materialize_empty: bool,
    ) -> (Option<usize>, Frontier) {
        let mut frontier = frontier;
        let mut entry: Option<usize> = None;
        let mut cur: Option<usize> = None;
        let mut i = range.start;

        macro_rules! close_cur {
            () => {
                cur = None;
            };
        }

        while i < range.end {
            let kw = self.toks[i].ident().map(|s| s.to_string());
            match kw.as_deref() {
                Some("if") => {
                    close_cur!();
                    let branch = self.new_node(NodeKind::Branch);
                    self.nodes[branch].stmt_count = 1;
                    self.attach(&frontier, branch);
                    entry.get_or_insert(branch);
                    let cond_end = self.cond_end(i + 1, range.end);
                    let (arm_range, next) = self.arm_range(cond_end, range.end);
                    let (_, then_ends) =
                        self.build_stmts(arm_range, vec![(branch, EdgeKind::True)], true);
                    let mut after = then_ends;
                    let mut rest = next;
                    if rest < range.end && self.toks[rest].ident() == Some("else") {
                        let (else_range, next2) = self.arm_range(rest + 1, range.end);
                        let (_, else_ends) =
                            self.build_stmts(else_range, vec![(branch, EdgeKind::False)], true);
                        after.extend(else_ends);
                        rest = next2;
                    } else {
                        after.push((branch, EdgeKind::False));
                    }
                    frontier = after;
                    i = rest;
                }
                Some("while") => {
                    close_cur!();
                    let head = self.new_node(NodeKind::LoopHead);
                    self.nodes[head].stmt_count = 1;
                    self.attach(&frontier, head);
                    entry.get_or_insert(head);
                    let cond_end = self.cond_end(i + 1, range.end);
                    let (body_range, next) = self.arm_range(cond_end, range.end);
                    self.loop_stack
                        .push(LoopCtx::new(ScopeKind::Loop, Some(head)));
                    let (_, body_ends) =
                        self.build_stmts(body_range, vec![(head, EdgeKind::True)], true);
                    self.attach_back(&body_ends, head);
                    let ctx = self.loop_stack.pop().unwrap();
                    frontier = vec![(head, EdgeKind::False)];
                    frontier.extend(ctx.breaks);
                    i = next;
                }
                Some("for") => {
                    close_cur!();
                    // for (init; cond; inc): init joins the preceding block,
                    // cond+inc fold into the loop head
                    let (init_stmts, inc_present, cond_end) = self.for_header(i + 1, range.end);
                    if init_stmts > 0 {
                        let block = self.stmt_block(&mut cur, &mut frontier, &mut entry);
                        self.nodes[block].stmt_count += init_stmts;
                        close_cur!();
                    }
                    let head = self.new_node(NodeKind::LoopHead);
                    self.nodes[head].stmt_count = 1 + usize::from(inc_present);
                    self.attach(&frontier, head);
                    entry.get_or_insert(head);
                    let (body_range, next) = self.arm_range(cond_end, range.end);
                    self.loop_stack
                        .push(LoopCtx::new(ScopeKind::Loop, Some(head)));
                    let (_, body_ends) =
                        self.build_stmts(body_range, vec![(head, EdgeKind::True)], true);
                    self.attach_back(&body_ends, head);
                    let ctx = self.loop_stack.pop().unwrap();
                    frontier = vec![(head, EdgeKind::False)];
                    frontier.extend(ctx.breaks);
                    i = next;
                }
                Some("do") => {
                    close_cur!();
                    let (body_range, next) = self.arm_range(i + 1, range.end);
                    self.loop_stack.push(LoopCtx::new(ScopeKind::DoLoop, None));
                    let (body_entry, body_ends) =
                        self.build_stmts(body_range, std::mem::take(&mut frontier), true);
                    let body_entry = body_entry.expect("materialized body");
                    entry.get_or_insert(body_entry);
                    let head = self.new_node(NodeKind::LoopHead);
                    self.nodes[head].stmt_count = 1;
                    self.attach(&body_ends, head);
                    self.add_edge(head, body_entry, EdgeKind::Back);
                    let ctx = self.loop_stack.pop().unwrap();
                    // continue inside a do-while jumps forward to the condition
                    self.attach(&ctx.continues, head);
                    frontier = vec![(head, EdgeKind::False)];
                    frontier.extend(ctx.breaks);
                    // skip: while ( ... ) ;
                    let mut j = next;
                    if j < range.end && self.toks[j].ident() == Some("while") {
                        j = self.cond_end(j + 1, range.end);
                        if j < range.end && self.toks[j].is_sym(';') {
                            j += 1;
                        }
                    }
                    i = j;
                }
                Some("switch") => {
                    close_cur!();
                    let branch = self.new_node(NodeKind::Branch);
                    self.nodes[branch].stmt_count = 1;
                    self.attach(&frontier, branch);
                    entry.get_or_insert(branch);
                    let cond_end = self.cond_end(i + 1, range.end);
                    let (body_range, next) = self.arm_range(cond_end, range.end);
                    self.loop_stack.push(LoopCtx::new(ScopeKind::Switch, None));
                    let (_, body_ends) =
                        self.build_stmts(body_range, vec![(branch, EdgeKind::True)], true);
                    let ctx = self.loop_stack.pop().unwrap();
                    frontier = vec![(branch, EdgeKind::False)];
                    frontier.extend(body_ends);
                    frontier.extend(ctx.breaks);
                    i = next;
                }
                Some("case") => {
                    // label only; skip to the colon
                    while i < range.end && !self.toks[i].is_sym(':') {
                        i += 1;
                    }
                    i += 1;
                }
                Some("default") => {
                    while i < range.end && !self.toks[i].is_sym(':') {
                        i += 1;
                    }
                    i += 1;
                }
                Some("return") => {
                    let block = self.stmt_block(&mut cur, &mut frontier, &mut entry);
                    self.nodes[block].stmt_count += 1;
                    let exit = self.exit_id;
                    self.add_edge(block, exit, EdgeKind::Fallthrough);
                    frontier = Vec::new();
                    close_cur!();
                    i = self.skip_stmt(i, range.end);
                }
                Some("break") => {
                    let block = self.stmt_block(&mut cur, &mut frontier, &mut entry);
                    self.nodes[block].stmt_count += 1;
                    if let Some(ctx) = self.loop_stack.last_mut() {
                        ctx.breaks.push((block, EdgeKind::Fallthrough));
                    }
                    frontier = Vec::new();
                    close_cur!();
                    i = self.skip_stmt(i, range.end);
                }
                Some("continue") => {
                    let block = self.stmt_block(&mut cur, &mut frontier, &mut entry);
                    self.nodes[block].stmt_count += 1;
                    // innermost enclosing loop scope (switch is transparent)
                    let target = self
                        .loop_stack
                        .iter()
                        .rposition(|c| c.kind != ScopeKind::Switch);
                    if let Some(idx) = target {
                        match self.loop_stack[idx].head {
                            Some(head) => self.add_edge(block, head, EdgeKind::Back),
                            None => self.loop_stack[idx]
                                .continues
                                .push((block, EdgeKind::Fallthrough)),
                        }
                    }
                    frontier = Vec::new();
                    close_cur!();
                    i = self.skip_stmt(i, range.end);
                }
                Some("goto") => {
                    // token-level: ends the block, falls through
                    let block = self.stmt_block(&mut cur, &mut frontier, &mut entry);
                    self.nodes[block].stmt_count += 1;
                    close_cur!();
                    frontier = vec![(block, EdgeKind::Fallthrough)];
                    i = self.skip_stmt(i, range.end);
                }
                _ => {
                    if self.toks[i].is_sym('{') {
                        // nested plain block
                        if let Some(close) = matching(&self.toks, i) {
                            close_cur!();
                            let (sub_entry, ends) = self.build_stmts(
                                (i + 1)..close,
                                std::mem::take(&mut frontier),
                                false,
                            );
                            if let Some(e) = sub_entry {
                                entry.get_or_insert(e);
                            }
                            frontier = ends;
                            i = close + 1;
                            continue;
                        }
                        i += 1;
                        continue;
                    }
                    if self.toks[i].is_sym(';') {
                        i += 1;
                        continue;
                    }
                    // goto label "name:"?
                    if self.toks[i].ident().is_some()
                        && i + 1 < range.end
                        && self.toks[i + 1].is_sym(':')
                        && !(i + 2 < range.end && self.toks[i + 2].is_sym(':'))
                    {
                        i += 2;
                        continue;
                    }
                    // plain statement: consume to `;`, detecting calls to
                    // functions defined in this translation unit
                    let end = self.skip_stmt(i, range.end);
                    let callee = self.find_callee(i, end);
                    if let Some(name) = callee {
                        close_cur!();
                        let call = self.new_node(NodeKind::Call);
                        self.nodes[call].stmt_count = 1;
                        self.attach(&frontier, call);
                        entry.get_or_insert(call);
                        if let Some(target) = self.ensure_component(&name) {
                            self.add_edge(call, target, EdgeKind::Fallthrough);
                        }
                        frontier = vec![(call, EdgeKind::Fallthrough)];
                    } else {
                        let block = self.stmt_block(&mut cur, &mut frontier, &mut entry);
                        self.nodes[block].stmt_count += 1;
                    }
                    i = end;
                }
            }
        }

        if entry.is_none() && materialize_empty {
            let block = self.stmt_block(&mut cur, &mut frontier, &mut entry);
            let _ = block;
        }
        (entry, frontier)
    }

    /// The Straight block currently accumulating statements, creating and
    /// wiring one if needed.
    fn stmt_block(
        &mut self,
        cur: &mut Option<usize>,
        frontier: &mut Frontier,
        entry: &mut Option<usize>,
    ) -> usize {
        if let Some(id) = *cur {
            return id;
        }
        let id = self.new_node(NodeKind::Straight);
        self.attach(frontier, id);
        *frontier = vec![(id, EdgeKind::Fallthrough)];
        *cur = Some(id);
        entry.get_or_insert(id);
        id
    }

    /// Inspect a `for (init; cond; inc)` header starting at or after `i`.
    /// Returns (statements in init, whether an increment exists, position
    /// just past the closing paren).
    fn for_header(&self, i: usize, end: usize) -> (usize, bool, usize) {
        let mut j = i;
        while j < end && !self.toks[j].is_sym('(') {
            j += 1;
        }
        if j >= end {
            return (0, false, end);
        }
        let close = match matching(&self.toks, j) {
            Some(c) => c,
            None => return (0, false, end),
        };
        // split the header on top-level semicolons
        let mut sections: Vec<(usize, usize)> = Vec::new();
        let mut start = j + 1;
        let mut k = j + 1;
        while k < close {
            match &self.toks[k] {
                Tok::Sym('(') | Tok::Sym('[') | Tok::Sym('{') => {
                    k = matching(&self.toks, k).map(|c| c + 1).unwrap_or(close);
                }
                Tok::Sym(';') => {
                    sections.push((start, k));
                    start = k + 1;
                    k += 1;
                }
                _ => k += 1,
            }
        }
        sections.push((start, close));
        let init_stmts = match sections.first() {
            Some((s, e)) if e > s => 1,
            _ => 0,
        };
        let inc_present = match sections.get(2) {
            Some((s, e)) => e > s,
            None => false,
        };
        (init_stmts, inc_present, close + 1)
    }

    /// Position just past the `( ... )` condition starting at or after `i`.
    fn cond_end(&self, i: usize, end: usize) -> usize {
        let mut j = i;
        while j < end && !self.toks[j].is_sym('(') {
            j += 1;
        }
        if j >= end {
            return end;
        }
        matching(&self.toks, j).map(|c| c + 1).unwrap_or(end)
    }

    /// Range of an arm (block or single statement) starting at `i`, plus the
    /// position following it.
    fn arm_range(&self, i: usize, end: usize) -> (Range<usize>, usize) {
        if i >= end {
            return (end..end, end);
        }
        if self.toks[i].is_sym('{') {
            if let Some(close) = matching(&self.toks, i) {
                return ((i + 1)..close, close + 1);
            }
            return ((i + 1)..end, end);
        }
        // single statement; control keywords consume their whole construct
        let stop = self.skip_one_construct(i, end);
        (i..stop, stop)
    }

    /// End position of one construct starting at `i` (used for unbraced arms).
    fn skip_one_construct(&self, i: usize, end: usize) -> usize {
        match self.toks[i].ident() {
            Some("if") => {
                let c = self.cond_end(i + 1, end);
                let (_, mut next) = self.arm_range(c, end);
                if next < end && self.toks[next].ident() == Some("else") {
                    let (_, n2) = self.arm_range(next + 1, end);
                    next = n2;
                }
                next
            }
            Some("while") | Some("for") | Some("switch") => {
                let c = self.cond_end(i + 1, end);
                let (_, next) = self.arm_range(c, end);
                next
            }
            Some("do") => {
                let (_, mut next) = self.arm_range(i + 1, end);
                if next < end && self.toks[next].ident() == Some("while") {
                    next = self.cond_end(next + 1, end);
                    if next < end && self.toks[next].is_sym(';') {
                        next += 1;
                    }
                }
                next
            }
            _ => self.skip_stmt(i, end),
        }
    }

    /// Position just past the `;` ending the statement at `i`, skipping over
    /// nested parens/brackets/braces (initializer lists, lambdas).
    fn skip_stmt(&self, i: usize, end: usize) -> usize {
        let mut j = i;
        while j < end {
            match &self.toks[j] {
                Tok::Sym('(') | Tok::Sym('[') | Tok::Sym('{') => {
                    j = matching(&self.toks, j).map(|c| c + 1).unwrap_or(end);
                }
                Tok::Sym(';') => return j + 1,
                _ => j += 1,
            }
        }
        end
    }

    /// First call to a locally defined function inside the statement span.
    fn find_callee(&self, start: usize, end: usize) -> Option<String> {
        let mut j = start;
        while j + 1 < end {
            if let Tok::Ident(name) = &self.toks[j] {
                if !KEYWORDS.contains(&name.as_str())
                    && self.toks[j + 1].is_sym('(')
                    && self.fn_bodies.contains_key(name)
                {
                    return Some(name.clone());
                }
            }
            j += 1;
        }
        None
    }
}

/// Build the CFG of the `main`-containing translation unit.
pub fn build_cfg(source: &str) -> Result<Cfg, CfgError> {
    let stripped = strip_source(source);
    let toks = tokenize(&stripped);
    if toks.is_empty() {
        return Err(CfgError::EmptySource);
    }
    let mut depth: i64 = 0;
    for t in &toks {
        if t.is_sym('{') {
            depth += 1;
        } else if t.is_sym('}') {
            depth -= 1;
            if depth < 0 {
                return Err(CfgError::UnbalancedBraces);
            }
        }
    }
    if depth != 0 {
        return Err(CfgError::UnbalancedBraces);
    }

    let fn_bodies = extract_functions(&toks);
    let mut b = Builder {
        toks,
        nodes: Vec::new(),
        edges: Vec::new(),
        exit_id: 0,
        fn_bodies,
        component_entry: BTreeMap::new(),
        loop_stack: Vec::new(),
    };
    let entry = b.new_node(NodeKind::Entry);
    let exit = b.new_node(NodeKind::Exit);
    b.exit_id = exit;

    let root = b
        .fn_bodies
        .get("main")
        .cloned()
        .or_else(|| b.fn_bodies.values().next().cloned());
    let frontier = vec![(entry, EdgeKind::Fallthrough)];
    let ends = match root {
        Some(body) => {
            let (_, ends) = b.build_stmts(body, frontier, false);
            ends
        }
        None => {
            // no recognizable function: collapse everything into one block
            let range = 0..b.toks.len();
            let block = b.new_node(NodeKind::Straight);
            let mut j = range.start;
            let mut stmts = 0;
            while j < range.end {
                j = b.skip_stmt(j, range.end);
                stmts += 1;
            }
            b.nodes[block].stmt_count = stmts;
            b.attach(&frontier, block);
            vec![(block, EdgeKind::Fallthrough)]
        }
    };
    b.attach(&ends, exit);

    Ok(prune_unreachable(b.nodes, b.edges, entry, exit))
}

/// Drop nodes unreachable from the entry and renumber compactly, keeping the
/// exit alive even when no path reaches it.
fn prune_unreachable(nodes: Vec<BasicBlock>, edges: Vec<Edge>, entry: usize, exit: usize) -> Cfg {
    let mut adj: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for e in &edges {
        adj.entry(e.from).or_default().push(e.to);
    }
    let mut reach = HashSet::new();
    let mut queue = VecDeque::from([entry]);
    reach.insert(entry);
    while let Some(n) = queue.pop_front() {
        for &m in adj.get(&n).into_iter().flatten() {
            if reach.insert(m) {
                queue.push_back(m);
            }
        }
    }
    let mut extra_edge = None;
    if !reach.contains(&exit) {
        reach.insert(exit);
        extra_edge = Some(Edge {
            from: entry,
            to: exit,
            kind: EdgeKind::Fallthrough,
        });
    }
    let mut remap = BTreeMap::new();
    let mut new_nodes = Vec::new();
    for n in nodes {
        if reach.contains(&n.id) {
            let new_id = new_nodes.len();
            remap.insert(n.id, new_id);
            new_nodes.push(BasicBlock {
                id: new_id,
                kind: n.kind,
                stmt_count: n.stmt_count,
            });
        }
    }
    let mut new_edges: Vec<Edge> = edges
        .into_iter()
        .chain(extra_edge)
        .filter(|e| reach.contains(&e.from) && reach.contains(&e.to))
        .map(|e| Edge {
            from: remap[&e.from],
            to: remap[&e.to],
            kind: e.kind,
        })
        .collect();
    new_edges.sort_by_key(|e| (e.from, e.to));
    Cfg {
        nodes: new_nodes,
        edges: new_edges,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_program_three_nodes() {
        let cfg = build_cfg("int main(){return 0;}").unwrap();
        assert_eq!(cfg.node_count(), 3);
        let kinds: Vec<NodeKind> = cfg.nodes.iter().map(|n| n.kind).collect();
        assert_eq!(
            kinds,
            vec![NodeKind::Entry, NodeKind::Exit, NodeKind::Straight]
        );
        assert_eq!(cfg.nodes[2].stmt_count, 1);
        assert_eq!(cfg.edges.len(), 2);
    }

    #[test]
    fn if_else_six_nodes() {
        let src = "int main(){ if (x > 0) { a = 1; } else { a = 2; } return a; }";
        let cfg = build_cfg(src).unwrap();
        assert_eq!(cfg.node_count(), 6);
        let branch = cfg
            .nodes
            .iter()
            .find(|n| n.kind == NodeKind::Branch)
            .unwrap();
        assert_eq!(cfg.out_degree(branch.id), 2);
        let straights = cfg
            .nodes
            .iter()
            .filter(|n| n.kind == NodeKind::Straight)
            .count();
        assert_eq!(straights, 3); // two arms plus the join
    }

    #[test]
    fn while_loop_has_one_back_edge() {
        let src = "int main(){ int i = 0; while (i < n) { i++; } return 0; }";
        let cfg = build_cfg(src).unwrap();
        assert_eq!(cfg.count_edges(EdgeKind::Back), 1);
        assert_eq!(
            cfg.nodes
                .iter()
                .filter(|n| n.kind == NodeKind::LoopHead)
                .count(),
            1
        );
    }

    #[test]
    fn for_loop_structure() {
        let src = "int main(){ for (int i = 0; i < n; i++) { s += i; } return s; }";
        let cfg = build_cfg(src).unwrap();
        assert_eq!(cfg.count_edges(EdgeKind::Back), 1);
        let head = cfg
            .nodes
            .iter()
            .find(|n| n.kind == NodeKind::LoopHead)
            .unwrap();
        // condition plus increment folded into the head
        assert_eq!(head.stmt_count, 2);
    }

    #[test]
    fn nested_loops_two_back_edges() {
        let src = "int main(){ for (i=0;i<n;i++) { for (j=0;j<n;j++) { s+=j; } } return 0; }";
        let cfg = build_cfg(src).unwrap();
        assert_eq!(cfg.count_edges(EdgeKind::Back), 2);
        assert_eq!(
            cfg.nodes
                .iter()
                .filter(|n| n.kind == NodeKind::LoopHead)
                .count(),
            2
        );
    }

    #[test]
    fn straight_nodes_out_degree_at_most_one() {
        let src = r#"
            int helper(int x) { if (x > 2) return x; return 0; }
            int main(){
                int s = 0;
                for (int i = 0; i < 10; i++) {
                    if (i % 2) { s += i; } else { s -= i; continue; }
                    if (s > 100) break;
                }
                helper(s);
                do { s--; } while (s > 0);
                switch (s) { case 0: s = 1; break; default: s = 2; }
                return s;
            }
        "#;
        let cfg = build_cfg(src).unwrap();
        assert_eq!(
            cfg.nodes
                .iter()
                .filter(|n| n.kind == NodeKind::Entry)
                .count(),
            1
        );
        assert_eq!(
            cfg.nodes
                .iter()
                .filter(|n| n.kind == NodeKind::Exit)
                .count(),
            1
        );
        for n in &cfg.nodes {
            if n.kind == NodeKind::Straight {
                assert!(cfg.out_degree(n.id) <= 1, "straight node {} fans out", n.id);
            }
            if n.kind == NodeKind::Branch {
                assert_eq!(cfg.out_degree(n.id), 2, "branch node {} degree", n.id);
            }
        }
        // the helper component is reachable through the call node
        assert!(cfg.nodes.iter().any(|n| n.kind == NodeKind::Call));
        assert_reachable(&cfg);
    }

    #[test]
    fn call_nodes_link_components() {
        let src = "void f() { x = 1; }\nint main(){ f(); return 0; }";
        let cfg = build_cfg(src).unwrap();
        let call = cfg.nodes.iter().find(|n| n.kind == NodeKind::Call).unwrap();
        assert_eq!(cfg.out_degree(call.id), 2); // continuation + component
        assert_reachable(&cfg);
    }

    #[test]
    fn errors() {
        assert_eq!(
            build_cfg("int main(){").unwrap_err(),
            CfgError::UnbalancedBraces
        );
        assert_eq!(build_cfg("}{").unwrap_err(), CfgError::UnbalancedBraces);
        assert_eq!(build_cfg("  \n\t ").unwrap_err(), CfgError::EmptySource);
        assert_eq!(
            build_cfg("// just a comment\n").unwrap_err(),
            CfgError::EmptySource
        );
    }

    #[test]
    fn preprocessor_and_comments_are_stripped() {
        let src = "#include <cstdio>\n#define N 10 \\\n  + 2\n/* block { */ int main(){ /* x */ return 0; } // tail }";
        let cfg = build_cfg(src).unwrap();
        assert_eq!(cfg.node_count(), 3);
    }

    #[test]
    fn braces_inside_strings_do_not_confuse() {
        let src = r#"int main(){ printf("{{{"); return 0; }"#;
        let cfg = build_cfg(src).unwrap();
        assert_eq!(cfg.node_count(), 3);
        assert_eq!(cfg.nodes[2].stmt_count, 2);
    }

    #[test]
    fn no_function_collapses_to_single_block() {
        let cfg = build_cfg("int x = 1; int y = 2;").unwrap();
        assert_eq!(cfg.node_count(), 3);
        assert_eq!(cfg.nodes[2].stmt_count, 2);
    }

    fn assert_reachable(cfg: &Cfg) {
        let mut reach = vec![false; cfg.node_count()];
        let entry = cfg
            .nodes
            .iter()
            .find(|n| n.kind == NodeKind::Entry)
            .unwrap()
            .id;
        let mut stack = vec![entry];
        reach[entry] = true;
        while let Some(n) = stack.pop() {
            for e in cfg.edges.iter().filter(|e| e.from == n) {
                if !reach[e.to] {
                    reach[e.to] = true;
                    stack.push(e.to);
                }
            }
        }
        assert!(reach.iter().all(|r| *r), "unreachable nodes remain");
    }
}
