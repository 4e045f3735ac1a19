//! Weighted grammars in Chomsky normal form and their text format.
//!
//! One rule per line:
//!
//! ```text
//! # comment
//! start: S
//! S -> S S @ 0.0
//! S -> 'a' @ 0.5
//! ```
//!
//! Terminals are quoted, nonterminals are bare. The `start:` header is
//! optional; without it the left-hand side of the first rule is the start
//! symbol.

use std::collections::{HashMap, HashSet};
use std::fmt::Write as _;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GrammarError {
    #[error("line {line}: rule is not in Chomsky normal form: {message}")]
    NotCnf { line: usize, message: String },
    #[error("line {line}: {message}")]
    Format { line: usize, message: String },
    #[error("duplicate rule {0}")]
    DuplicateRule(String),
    #[error("rule {0} has a non-finite energy")]
    NonFiniteEnergy(String),
    #[error("grammar has no rules and no start symbol")]
    NoStart,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Rhs {
    /// Two nonterminals.
    Binary(usize, usize),
    /// A single terminal.
    Lexical(usize),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Rule {
    pub lhs: usize,
    pub rhs: Rhs,
    pub energy: f64,
}

/// A CNF grammar with energies on its rules. Rules keep their declaration
/// order, which fixes the branch order of compiled diagrams.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct CnfGrammar {
    nonterminals: Vec<String>,
    nt_index: HashMap<String, usize>,
    terminals: Vec<String>,
    t_index: HashMap<String, usize>,
    start: Option<usize>,
    rules: Vec<Rule>,
    seen: HashSet<(usize, Rhs)>,
}

impl CnfGrammar {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn nonterminal(&mut self, name: &str) -> usize {
        intern(&mut self.nonterminals, &mut self.nt_index, name)
    }

    pub fn terminal(&mut self, name: &str) -> usize {
        intern(&mut self.terminals, &mut self.t_index, name)
    }

    pub fn set_start(&mut self, name: &str) {
        self.start = Some(self.nonterminal(name));
    }

    pub fn add_binary(&mut self, lhs: &str, left: &str, right: &str, energy: f64) -> Result<usize, GrammarError> {
        let rule = Rule {
            lhs: self.nonterminal(lhs),
            rhs: Rhs::Binary(self.nonterminal(left), self.nonterminal(right)),
            energy,
        };
        self.push(rule)
    }

    pub fn add_lexical(&mut self, lhs: &str, terminal: &str, energy: f64) -> Result<usize, GrammarError> {
        let rule = Rule { lhs: self.nonterminal(lhs), rhs: Rhs::Lexical(self.terminal(terminal)), energy };
        self.push(rule)
    }

    fn push(&mut self, rule: Rule) -> Result<usize, GrammarError> {
        if !rule.energy.is_finite() {
            return Err(GrammarError::NonFiniteEnergy(self.rule_text(&rule)));
        }
        if !self.seen.insert((rule.lhs, rule.rhs)) {
            return Err(GrammarError::DuplicateRule(self.rule_text(&rule)));
        }
        if self.start.is_none() {
            self.start = Some(rule.lhs);
        }
        self.rules.push(rule);
        Ok(self.rules.len() - 1)
    }

    pub fn start(&self) -> usize {
        self.start.expect("grammar has a start symbol")
    }

    pub fn rules(&self) -> &[Rule] {
        &self.rules
    }

    pub fn nonterminals(&self) -> &[String] {
        &self.nonterminals
    }

    pub fn terminals(&self) -> &[String] {
        &self.terminals
    }

    pub fn nt_name(&self, x: usize) -> &str {
        &self.nonterminals[x]
    }

    pub fn terminal_name(&self, a: usize) -> &str {
        &self.terminals[a]
    }

    pub fn lookup_terminal(&self, name: &str) -> Option<usize> {
        self.t_index.get(name).copied()
    }

    pub fn rule_text(&self, r: &Rule) -> String {
        match r.rhs {
            Rhs::Binary(y, z) => format!("{} -> {} {}", self.nonterminals[r.lhs], self.nonterminals[y], self.nonterminals[z]),
            Rhs::Lexical(a) => format!("{} -> '{}'", self.nonterminals[r.lhs], self.terminals[a]),
        }
    }

    pub fn parse(text: &str) -> Result<CnfGrammar, GrammarError> {
        let mut g = CnfGrammar::new();
        let mut header_start = None;
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix("start:") {
                let name = rest.trim();
                if name.is_empty() || name.contains(char::is_whitespace) || name.contains('\'') {
                    return Err(GrammarError::Format { line: line_no, message: "bad start header".into() });
                }
                header_start = Some(name.to_owned());
                continue;
            }
            let format_err = |message: &str| GrammarError::Format { line: line_no, message: message.into() };
            let (rule, energy) = line.rsplit_once('@').ok_or_else(|| format_err("missing `@ energy`"))?;
            let energy: f64 = energy.trim().parse().map_err(|_| format_err("energy is not a number"))?;
            let (lhs, rhs) = rule.split_once("->").ok_or_else(|| format_err("missing `->`"))?;
            let lhs = lhs.trim();
            if lhs.is_empty() || lhs.contains(char::is_whitespace) || lhs.starts_with('\'') {
                return Err(GrammarError::NotCnf { line: line_no, message: format!("bad left-hand side `{lhs}`") });
            }
            let symbols: Vec<&str> = rhs.split_whitespace().collect();
            let not_cnf = |message: String| GrammarError::NotCnf { line: line_no, message };
            match symbols.as_slice() {
                [t] if is_quoted(t) => {
                    g.add_lexical(lhs, &t[1..t.len() - 1], energy)?;
                }
                [y, z] if !y.starts_with('\'') && !z.starts_with('\'') => {
                    g.add_binary(lhs, y, z, energy)?;
                }
                _ => return Err(not_cnf(format!("right-hand side `{}`", rhs.trim()))),
            }
        }
        if let Some(s) = header_start {
            g.set_start(&s);
        }
        if g.start.is_none() {
            return Err(GrammarError::NoStart);
        }
        Ok(g)
    }

    pub fn write(&self) -> String {
        let mut out = String::new();
        writeln!(out, "start: {}", self.nonterminals[self.start()]).unwrap();
        for r in &self.rules {
            writeln!(out, "{} @ {:?}", self.rule_text(r), r.energy).unwrap();
        }
        out
    }
}

fn is_quoted(s: &str) -> bool {
    s.len() >= 3 && s.starts_with('\'') && s.ends_with('\'')
}

fn intern(names: &mut Vec<String>, index: &mut HashMap<String, usize>, name: &str) -> usize {
    if let Some(&i) = index.get(name) {
        return i;
    }
    names.push(name.to_owned());
    index.insert(name.to_owned(), names.len() - 1);
    names.len() - 1
}

/// `S -> S S`, `S -> 'a'`, both with zero energy: parses of `a^n` are the
/// binary bracketings of `n` leaves.
pub fn catalan() -> CnfGrammar {
    let mut g = CnfGrammar::new();
    g.add_binary("S", "S", "S", 0.0).expect("fresh grammar");
    g.add_lexical("S", "a", 0.0).expect("fresh grammar");
    g
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_rules_and_header() {
        let g = CnfGrammar::parse("# toy\nNP -> D N @ 1.5\nstart: S\nS -> NP VP @ -0.25\nD -> 'the' @ 0\n").unwrap();
        assert_eq!(g.nt_name(g.start()), "S");
        assert_eq!(g.rules().len(), 3);
        assert_eq!(g.rules()[1].energy, -0.25);
        assert_eq!(g.rules()[2].rhs, Rhs::Lexical(0));
        assert_eq!(CnfGrammar::parse(&g.write()).unwrap().rules(), g.rules());
    }

    #[test]
    fn start_defaults_to_first_lhs() {
        let g = CnfGrammar::parse("A -> B C @ 0\nB -> 'b' @ 0").unwrap();
        assert_eq!(g.nt_name(g.start()), "A");
    }

    #[test]
    fn rejects_non_cnf_and_bad_lines() {
        for (text, cnf) in [
            ("S -> A @ 0", true),
            ("S -> A B C @ 0", true),
            ("S -> 'a' B @ 0", true),
            ("S -> 'a' 'b' @ 0", true),
            ("S -> @ 0", true),
            ("S -> A B", false),
            ("S A B @ 0", false),
            ("S -> A B @ x", false),
        ] {
            let err = CnfGrammar::parse(text).unwrap_err();
            assert_eq!(matches!(err, GrammarError::NotCnf { .. }), cnf, "{text}: {err}");
        }
        assert!(matches!(
            CnfGrammar::parse("S -> S S @ 0\nS -> S S @ 1"),
            Err(GrammarError::DuplicateRule(_))
        ));
        assert!(matches!(CnfGrammar::parse("S -> S S @ inf"), Err(GrammarError::NonFiniteEnergy(_))));
        assert_eq!(CnfGrammar::parse("# nothing\n"), Err(GrammarError::NoStart));
    }
}
