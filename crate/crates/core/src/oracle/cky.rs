//! Chart parsing over CNF grammars, independent of the diagram code.
//!
//! Spans are `(i, k)` with 1-based word positions, `1 <= i < k <= n + 1`,
//! matching the parse-forest variable names.

use std::collections::HashMap;

use super::OracleError;
use crate::logspace::log_add_exp;
use crate::pcfg::{CnfGrammar, ParseTree, Rhs};

struct Chart {
    n: usize,
    nts: usize,
    cells: Vec<f64>,
}

impl Chart {
    fn new(n: usize, nts: usize, fill: f64) -> Self {
        Chart { n, nts, cells: vec![fill; (n + 2) * (n + 2) * nts] }
    }

    fn at(&self, x: usize, i: usize, k: usize) -> usize {
        (i * (self.n + 2) + k) * self.nts + x
    }

    fn get(&self, x: usize, i: usize, k: usize) -> f64 {
        self.cells[self.at(x, i, k)]
    }

    fn slot(&mut self, x: usize, i: usize, k: usize) -> &mut f64 {
        let at = self.at(x, i, k);
        &mut self.cells[at]
    }
}

fn word_ids(g: &CnfGrammar, words: &[&str]) -> Vec<Option<usize>> {
    words.iter().map(|w| g.lookup_terminal(w)).collect()
}

/// Inside chart in the log domain: `ln Σ e^{-Ψ(tree)}` per `(X, i, k)`.
fn inside_chart(g: &CnfGrammar, words: &[&str]) -> Chart {
    let n = words.len();
    let ids = word_ids(g, words);
    let mut c = Chart::new(n, g.nonterminals().len(), f64::NEG_INFINITY);
    for len in 1..=n {
        for i in 1..=n + 1 - len {
            let k = i + len;
            for r in g.rules() {
                let add = match r.rhs {
                    Rhs::Lexical(a) if len == 1 && ids[i - 1] == Some(a) => -r.energy,
                    Rhs::Binary(y, z) if len > 1 => {
                        let mut acc = f64::NEG_INFINITY;
                        for j in i + 1..k {
                            acc = log_add_exp(acc, c.get(y, i, j) + c.get(z, j, k));
                        }
                        acc - r.energy
                    }
                    _ => continue,
                };
                let s = c.slot(r.lhs, i, k);
                *s = log_add_exp(*s, add);
            }
        }
    }
    c
}

fn check_sentence(words: &[&str]) -> Result<(), OracleError> {
    if words.is_empty() {
        return Err(OracleError::TooLarge("empty sentence has no parses to chart".into()));
    }
    Ok(())
}

/// `ln Σ_{y : yield(y) = x} e^{-Ψ(y)}`; `-inf` when the sentence has no
/// parse.
pub fn cky_inside(g: &CnfGrammar, words: &[&str]) -> Result<f64, OracleError> {
    check_sentence(words)?;
    Ok(inside_chart(g, words).get(g.start(), 1, words.len() + 1))
}

/// Minimum-energy parse. Ties go to the earlier rule, then the smaller split
/// point.
pub fn cky_viterbi(g: &CnfGrammar, words: &[&str]) -> Result<Option<(f64, ParseTree)>, OracleError> {
    check_sentence(words)?;
    let n = words.len();
    let ids = word_ids(g, words);
    let mut best = Chart::new(n, g.nonterminals().len(), f64::INFINITY);
    let mut back: HashMap<(usize, usize, usize), (usize, usize)> = HashMap::new();
    for len in 1..=n {
        for i in 1..=n + 1 - len {
            let k = i + len;
            for (idx, r) in g.rules().iter().enumerate() {
                match r.rhs {
                    Rhs::Lexical(a) if len == 1 && ids[i - 1] == Some(a) => {
                        if r.energy < best.get(r.lhs, i, k) {
                            *best.slot(r.lhs, i, k) = r.energy;
                            back.insert((r.lhs, i, k), (idx, 0));
                        }
                    }
                    Rhs::Binary(y, z) if len > 1 => {
                        for j in i + 1..k {
                            let e = r.energy + best.get(y, i, j) + best.get(z, j, k);
                            if e < best.get(r.lhs, i, k) {
                                *best.slot(r.lhs, i, k) = e;
                                back.insert((r.lhs, i, k), (idx, j));
                            }
                        }
                    }
                    _ => {}
                }
            }
        }
    }
    let energy = best.get(g.start(), 1, n + 1);
    if energy == f64::INFINITY {
        return Ok(None);
    }
    fn rebuild(g: &CnfGrammar, back: &HashMap<(usize, usize, usize), (usize, usize)>, x: usize, i: usize, k: usize) -> ParseTree {
        let (rule, j) = back[&(x, i, k)];
        let children = match g.rules()[rule].rhs {
            Rhs::Lexical(_) => Vec::new(),
            Rhs::Binary(y, z) => vec![rebuild(g, back, y, i, j), rebuild(g, back, z, j, k)],
        };
        ParseTree { rule, span: (i, k), children }
    }
    Ok(Some((energy, rebuild(g, &back, g.start(), 1, n + 1))))
}

/// `P(X spans i..k | x)` for every `(X, i, k)` with nonzero posterior, by
/// inside-outside over the chart.
pub fn cky_span_posteriors(g: &CnfGrammar, words: &[&str]) -> Result<HashMap<(usize, usize, usize), f64>, OracleError> {
    check_sentence(words)?;
    let n = words.len();
    let inside = inside_chart(g, words);
    let log_z = inside.get(g.start(), 1, n + 1);
    let mut out = HashMap::new();
    if log_z == f64::NEG_INFINITY {
        return Ok(out);
    }
    let mut outside = Chart::new(n, g.nonterminals().len(), f64::NEG_INFINITY);
    *outside.slot(g.start(), 1, n + 1) = 0.0;
    for len in (2..=n).rev() {
        for i in 1..=n + 1 - len {
            let k = i + len;
            for r in g.rules() {
                let Rhs::Binary(y, z) = r.rhs else { continue };
                let o = outside.get(r.lhs, i, k);
                if o == f64::NEG_INFINITY {
                    continue;
                }
                for j in i + 1..k {
                    let to_y = o - r.energy + inside.get(z, j, k);
                    let to_z = o - r.energy + inside.get(y, i, j);
                    let s = outside.slot(y, i, j);
                    *s = log_add_exp(*s, to_y);
                    let s = outside.slot(z, j, k);
                    *s = log_add_exp(*s, to_z);
                }
            }
        }
    }
    for len in 1..=n {
        for i in 1..=n + 1 - len {
            let k = i + len;
            for x in 0..g.nonterminals().len() {
                let p = (outside.get(x, i, k) + inside.get(x, i, k) - log_z).exp();
                if p > 0.0 {
                    out.insert((x, i, k), p);
                }
            }
        }
    }
    Ok(out)
}

/// Every parse of the sentence, by exhaustive expansion. Errors once more
/// than `limit` trees are produced for any span.
pub fn all_parses(g: &CnfGrammar, words: &[&str], limit: usize) -> Result<Vec<ParseTree>, OracleError> {
    check_sentence(words)?;
    let n = words.len();
    let ids = word_ids(g, words);
    let mut memo: HashMap<(usize, usize, usize), Vec<ParseTree>> = HashMap::new();
    for len in 1..=n {
        for i in 1..=n + 1 - len {
            let k = i + len;
            for x in 0..g.nonterminals().len() {
                let mut trees = Vec::new();
                for (idx, r) in g.rules().iter().enumerate().filter(|(_, r)| r.lhs == x) {
                    match r.rhs {
                        Rhs::Lexical(a) if len == 1 && ids[i - 1] == Some(a) => {
                            trees.push(ParseTree { rule: idx, span: (i, k), children: Vec::new() });
                        }
                        Rhs::Binary(y, z) if len > 1 => {
                            for j in i + 1..k {
                                for l in &memo[&(y, i, j)] {
                                    for rt in &memo[&(z, j, k)] {
                                        trees.push(ParseTree { rule: idx, span: (i, k), children: vec![l.clone(), rt.clone()] });
                                    }
                                }
                                if trees.len() > limit {
                                    return Err(OracleError::TooLarge(format!("more than {limit} parses")));
                                }
                            }
                        }
                        _ => {}
                    }
                }
                memo.insert((x, i, k), trees);
            }
        }
    }
    Ok(memo.remove(&(g.start(), 1, n + 1)).unwrap_or_default())
}
