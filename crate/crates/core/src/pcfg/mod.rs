//! Parse forests of weighted CNF grammars as case-factor diagrams.
//!
//! For a sentence of `n` words (positions `1..=n`, spans `i..k` with
//! `1 <= i < k <= n + 1`) there are three kinds of Boolean variables:
//!
//! * phrase `X_i,k`: the parse has an `X` spanning words `i..k-1`;
//! * branch `X_i,k->Y_i,j Z_j,k`: that phrase uses `X -> Y Z` split at `j`;
//! * terminal `X_i,i+1->a`: word `i` is produced by `X -> a`.
//!
//! `D(X_i,k) = case(X_i,k, B(X_i,k), empty)` where `B` is a multi-branch case
//! over the branch variables of the span (rules in declaration order, split
//! points ascending), each branch leading to the factor of the two child
//! phrases. Phrase diagrams are memoized per `(X, i, k)`, giving `O(|G| n^3)`
//! nodes.

pub mod grammar;

use std::collections::{HashMap, HashSet};

use thiserror::Error;

pub use grammar::{catalan, CnfGrammar, GrammarError, Rhs, Rule};

use crate::assignment::Assignment;
use crate::inference::EnergyFn;
use crate::store::{CfdError, CfdStore, NodeRef, VarId};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PcfgError {
    #[error("sentence is empty")]
    EmptySentence,
    #[error(transparent)]
    Grammar(#[from] GrammarError),
    #[error("assignment is not a parse: {0}")]
    MalformedAssignment(String),
    #[error(transparent)]
    Cfd(#[from] CfdError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ParseVar {
    Phrase { nt: usize, i: usize, k: usize },
    Branch { rule: usize, i: usize, j: usize, k: usize },
    Terminal { rule: usize, i: usize },
}

/// The Boolean variables created for one grammar and sentence.
#[derive(Clone, Debug)]
pub struct ParseVarScheme {
    n: usize,
    start: usize,
    rules: Vec<Rule>,
    by_var: HashMap<VarId, ParseVar>,
    by_key: HashMap<ParseVar, VarId>,
}

impl ParseVarScheme {
    pub fn sentence_len(&self) -> usize {
        self.n
    }

    pub fn phrase(&self, nt: usize, i: usize, k: usize) -> Option<VarId> {
        self.by_key.get(&ParseVar::Phrase { nt, i, k }).copied()
    }

    pub fn branch(&self, rule: usize, i: usize, j: usize, k: usize) -> Option<VarId> {
        self.by_key.get(&ParseVar::Branch { rule, i, j, k }).copied()
    }

    pub fn terminal(&self, rule: usize, i: usize) -> Option<VarId> {
        self.by_key.get(&ParseVar::Terminal { rule, i }).copied()
    }

    pub fn classify(&self, v: VarId) -> Option<ParseVar> {
        self.by_var.get(&v).copied()
    }

    /// All phrase variables, as `(nt, i, k, var)`.
    pub fn phrases(&self) -> impl Iterator<Item = (usize, usize, usize, VarId)> + '_ {
        self.by_key.iter().filter_map(|(key, &v)| match *key {
            ParseVar::Phrase { nt, i, k } => Some((nt, i, k, v)),
            _ => None,
        })
    }

    fn insert(&mut self, key: ParseVar, v: VarId) {
        self.by_var.insert(v, key);
        self.by_key.insert(key, v);
    }
}

/// A parse tree; `span` is `(i, k)` with 1-based word positions.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct ParseTree {
    pub rule: usize,
    pub span: (usize, usize),
    pub children: Vec<ParseTree>,
}

impl ParseTree {
    pub fn energy(&self, g: &CnfGrammar) -> f64 {
        g.rules()[self.rule].energy + self.children.iter().map(|c| c.energy(g)).sum::<f64>()
    }

    pub fn yield_terminals(&self, g: &CnfGrammar) -> Vec<String> {
        let mut out = Vec::new();
        self.collect_yield(g, &mut out);
        out
    }

    fn collect_yield(&self, g: &CnfGrammar, out: &mut Vec<String>) {
        match g.rules()[self.rule].rhs {
            Rhs::Lexical(a) => out.push(g.terminal_name(a).to_owned()),
            Rhs::Binary(..) => self.children.iter().for_each(|c| c.collect_yield(g, out)),
        }
    }

    /// Bracketed rendering, e.g. `(S (S a) (S a))`.
    pub fn render(&self, g: &CnfGrammar) -> String {
        let r = g.rules()[self.rule];
        match r.rhs {
            Rhs::Lexical(a) => format!("({} {})", g.nt_name(r.lhs), g.terminal_name(a)),
            Rhs::Binary(..) => {
                let kids: Vec<String> = self.children.iter().map(|c| c.render(g)).collect();
                format!("({} {})", g.nt_name(r.lhs), kids.join(" "))
            }
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct CompileOptions {
    /// Drop branches and phrases that cannot derive their span instead of
    /// building `case(v, empty, empty)` for them. The feasible set is the
    /// same either way.
    pub prune: bool,
}

impl Default for CompileOptions {
    fn default() -> Self {
        CompileOptions { prune: true }
    }
}

#[derive(Clone, Debug)]
pub struct PcfgCompilation {
    pub root: NodeRef,
    pub energy: EnergyFn,
    pub scheme: ParseVarScheme,
}

pub fn phrase_name(g: &CnfGrammar, nt: usize, i: usize, k: usize) -> String {
    format!("{}_{i},{k}", g.nt_name(nt))
}

pub fn branch_name(g: &CnfGrammar, rule: usize, i: usize, j: usize, k: usize) -> String {
    let r = g.rules()[rule];
    let Rhs::Binary(y, z) = r.rhs else { panic!("branch variables come from binary rules") };
    format!(
        "{}->{} {}",
        phrase_name(g, r.lhs, i, k),
        phrase_name(g, y, i, j),
        phrase_name(g, z, j, k)
    )
}

pub fn terminal_name(g: &CnfGrammar, rule: usize, i: usize) -> String {
    let r = g.rules()[rule];
    let Rhs::Lexical(a) = r.rhs else { panic!("terminal variables come from lexical rules") };
    format!("{}->{}", phrase_name(g, r.lhs, i, i + 1), g.terminal_name(a))
}

pub fn compile(store: &mut CfdStore, g: &CnfGrammar, sentence: &[&str]) -> Result<PcfgCompilation, PcfgError> {
    compile_with(store, g, sentence, CompileOptions::default())
}

/// Builds `D(S_1,n+1)` for the sentence, bottom-up by span length.
pub fn compile_with(
    store: &mut CfdStore,
    g: &CnfGrammar,
    sentence: &[&str],
    opts: CompileOptions,
) -> Result<PcfgCompilation, PcfgError> {
    let n = sentence.len();
    if n == 0 {
        return Err(PcfgError::EmptySentence);
    }
    let words: Vec<Option<usize>> = sentence.iter().map(|w| g.lookup_terminal(w)).collect();
    let mut lexical: HashMap<(usize, usize), usize> = HashMap::new();
    let mut binary: Vec<Vec<(usize, usize, usize)>> = vec![Vec::new(); g.nonterminals().len()];
    for (idx, r) in g.rules().iter().enumerate() {
        match r.rhs {
            Rhs::Lexical(a) => {
                lexical.insert((r.lhs, a), idx);
            }
            Rhs::Binary(y, z) => binary[r.lhs].push((idx, y, z)),
        }
    }

    let mut scheme = ParseVarScheme {
        n,
        start: g.start(),
        rules: g.rules().to_vec(),
        by_var: HashMap::new(),
        by_key: HashMap::new(),
    };
    let mut energy = EnergyFn::new();
    let mut var = |store: &mut CfdStore, key: ParseVar, name: String, e: f64| {
        let v = store.var(&name);
        energy.set(v, e);
        scheme.insert(key, v);
        v
    };

    let nts = g.nonterminals().len();
    let mut phrase: HashMap<(usize, usize, usize), NodeRef> = HashMap::new();
    for len in 1..=n {
        for i in 1..=n + 1 - len {
            let k = i + len;
            for x in 0..nts {
                let b = if len == 1 {
                    match words[i - 1].and_then(|a| lexical.get(&(x, a))) {
                        Some(&rule) => {
                            let e = g.rules()[rule].energy;
                            let t = var(store, ParseVar::Terminal { rule, i }, terminal_name(g, rule, i), e);
                            store.mk_case(t, NodeRef::UNIT, NodeRef::EMPTY)?
                        }
                        None => NodeRef::EMPTY,
                    }
                } else {
                    let mut branches = Vec::new();
                    for &(rule, y, z) in &binary[x] {
                        for j in i + 1..k {
                            let (left, right) = (phrase[&(y, i, j)], phrase[&(z, j, k)]);
                            if opts.prune && (left == NodeRef::EMPTY || right == NodeRef::EMPTY) {
                                continue;
                            }
                            let e = g.rules()[rule].energy;
                            let bv = var(store, ParseVar::Branch { rule, i, j, k }, branch_name(g, rule, i, j, k), e);
                            let f = store.mk_factor(left, right)?;
                            branches.push((bv, f));
                        }
                    }
                    store.multi_case(&branches)?
                };
                let node = if opts.prune && b == NodeRef::EMPTY {
                    NodeRef::EMPTY
                } else {
                    let pv = var(store, ParseVar::Phrase { nt: x, i, k }, phrase_name(g, x, i, k), 0.0);
                    store.mk_case(pv, b, NodeRef::EMPTY)?
                };
                phrase.insert((x, i, k), node);
            }
        }
    }
    let root = phrase.get(&(g.start(), 1, n + 1)).copied().unwrap_or(NodeRef::EMPTY);
    Ok(PcfgCompilation { root, energy, scheme })
}

/// The truth assignment of a parse tree.
pub fn encode_parse(scheme: &ParseVarScheme, tree: &ParseTree) -> Result<Assignment, PcfgError> {
    let mut support = Vec::new();
    let mut stack = vec![tree];
    let missing = || PcfgError::MalformedAssignment("tree uses a variable the diagram lacks".into());
    while let Some(t) = stack.pop() {
        let r = scheme.rules.get(t.rule).ok_or_else(missing)?;
        let (i, k) = t.span;
        support.push(scheme.phrase(r.lhs, i, k).ok_or_else(missing)?);
        match (r.rhs, t.children.as_slice()) {
            (Rhs::Lexical(_), []) if k == i + 1 => support.push(scheme.terminal(t.rule, i).ok_or_else(missing)?),
            (Rhs::Binary(..), [l, rt]) if l.span.0 == i && l.span.1 == rt.span.0 && rt.span.1 == k => {
                support.push(scheme.branch(t.rule, i, l.span.1, k).ok_or_else(missing)?);
                stack.push(l);
                stack.push(rt);
            }
            _ => return Err(PcfgError::MalformedAssignment("tree shape does not match its rules".into())),
        }
    }
    Ok(Assignment::from_vars(support))
}

/// The parse tree whose truth assignment is `rho`.
pub fn decode_parse(scheme: &ParseVarScheme, rho: &Assignment) -> Result<ParseTree, PcfgError> {
    let bad = |msg: String| PcfgError::MalformedAssignment(msg);
    let mut phrases: HashSet<(usize, usize, usize)> = HashSet::new();
    let mut branches: HashMap<(usize, usize, usize), Vec<(usize, usize)>> = HashMap::new();
    let mut terminals: HashMap<(usize, usize), Vec<usize>> = HashMap::new();
    for v in rho.iter() {
        match scheme.classify(v) {
            Some(ParseVar::Phrase { nt, i, k }) => {
                phrases.insert((nt, i, k));
            }
            Some(ParseVar::Branch { rule, i, j, k }) => {
                branches.entry((scheme.rules[rule].lhs, i, k)).or_default().push((rule, j));
            }
            Some(ParseVar::Terminal { rule, i }) => {
                terminals.entry((scheme.rules[rule].lhs, i)).or_default().push(rule);
            }
            None => return Err(bad(format!("{v} is not a parse variable"))),
        }
    }

    let mut used = 0;
    let build = |nt: usize, i: usize, k: usize, used: &mut usize| -> Result<ParseTree, PcfgError> {
        // Iterative to keep deep trees off the call stack.
        enum Frame {
            Open(usize, usize, usize),
            Close(usize, (usize, usize)),
        }
        let mut frames = vec![Frame::Open(nt, i, k)];
        let mut done: Vec<ParseTree> = Vec::new();
        while let Some(f) = frames.pop() {
            match f {
                Frame::Open(x, i, k) => {
                    if !phrases.contains(&(x, i, k)) {
                        return Err(bad(format!("phrase ({x},{i},{k}) is not set")));
                    }
                    *used += 1;
                    if k == i + 1 {
                        let [rule] = terminals.get(&(x, i)).map(Vec::as_slice).unwrap_or(&[]) else {
                            return Err(bad(format!("need exactly one terminal rule at ({x},{i})")));
                        };
                        *used += 1;
                        done.push(ParseTree { rule: *rule, span: (i, k), children: Vec::new() });
                    } else {
                        let [(rule, j)] = branches.get(&(x, i, k)).map(Vec::as_slice).unwrap_or(&[]) else {
                            return Err(bad(format!("need exactly one branch at ({x},{i},{k})")));
                        };
                        *used += 1;
                        let Rhs::Binary(y, z) = scheme.rules[*rule].rhs else { unreachable!() };
                        frames.push(Frame::Close(*rule, (i, k)));
                        frames.push(Frame::Open(z, *j, k));
                        frames.push(Frame::Open(y, i, *j));
                    }
                }
                Frame::Close(rule, span) => {
                    let right = done.pop().expect("right child built");
                    let left = done.pop().expect("left child built");
                    done.push(ParseTree { rule, span, children: vec![left, right] });
                }
            }
        }
        Ok(done.pop().expect("root built"))
    };
    let tree = build(scheme.start, 1, scheme.n + 1, &mut used)?;
    if used != rho.len() {
        return Err(bad(format!("{} variables are set outside the tree", rho.len() - used)));
    }
    Ok(tree)
}

/// Compiled size against `|G| · n^3`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PcfgSizeReport {
    pub nodes: usize,
    pub rules: usize,
    pub sentence_len: usize,
    pub bound: f64,
}

impl PcfgSizeReport {
    pub fn ratio(&self) -> f64 {
        self.nodes as f64 / self.bound
    }
}

pub fn size_bound_report(store: &CfdStore, g: &CnfGrammar, sentence_len: usize, root: NodeRef) -> PcfgSizeReport {
    let rules = g.rules().len();
    PcfgSizeReport {
        nodes: store.size(root),
        rules,
        sentence_len,
        bound: rules as f64 * (sentence_len as f64).powi(3),
    }
}
