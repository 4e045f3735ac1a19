//! UAI-style MRF files with energies instead of probabilities.
//!
//! ```text
//! MARKOV          # optional preamble
//! 3               # number of variables
//! 2 2 3           # domain sizes
//! 2               # number of terms
//! 2 0 1           # scope of term 0: arity, then variable indices
//! 2 1 2           # scope of term 1
//! 4               # term 0: entry count, then energies
//!  0.0 1.0
//!  1.0 0.0
//! 6
//!  0.5 0.0 0.5
//!  0.0 0.5 0.0
//! ```
//!
//! Tokens are whitespace separated and `#` starts a comment. Tables are
//! row-major over the scope as listed: the last scope variable varies
//! fastest. Variables are named `y0, y1, ...` with values `0..size`.

use std::fmt::Write as _;
use std::str::FromStr;

use super::{Mrf, MrfError};

struct Tokens<'a> {
    items: Vec<(usize, &'a str)>,
    pos: usize,
}

impl<'a> Tokens<'a> {
    fn new(text: &'a str) -> Self {
        let items = text
            .lines()
            .enumerate()
            .flat_map(|(i, line)| {
                let line = line.split('#').next().unwrap_or("");
                line.split_whitespace().map(move |t| (i + 1, t))
            })
            .collect();
        Tokens { items, pos: 0 }
    }

    fn peek(&self) -> Option<&'a str> {
        self.items.get(self.pos).map(|&(_, t)| t)
    }

    fn next<T: FromStr>(&mut self, what: &str) -> Result<T, MrfError> {
        let Some(&(line, tok)) = self.items.get(self.pos) else {
            let line = self.items.last().map_or(1, |&(l, _)| l);
            return Err(MrfError::Format { line, message: format!("unexpected end of file, expected {what}") });
        };
        self.pos += 1;
        tok.parse()
            .map_err(|_| MrfError::Format { line, message: format!("expected {what}, found `{tok}`") })
    }

    fn finish(&self) -> Result<(), MrfError> {
        match self.items.get(self.pos) {
            None => Ok(()),
            Some(&(line, tok)) => Err(MrfError::Format { line, message: format!("trailing token `{tok}`") }),
        }
    }
}

pub fn parse(text: &str) -> Result<Mrf, MrfError> {
    let mut toks = Tokens::new(text);
    if toks.peek() == Some("MARKOV") {
        toks.pos += 1;
    }
    let nvars: usize = toks.next("variable count")?;
    let sizes = (0..nvars).map(|_| toks.next("domain size")).collect::<Result<Vec<usize>, _>>()?;
    let mut m = Mrf::with_domain_sizes(&sizes);
    m.validate()?;
    let nterms: usize = toks.next("term count")?;
    let mut scopes = Vec::with_capacity(nterms);
    for _ in 0..nterms {
        let arity: usize = toks.next("scope arity")?;
        scopes.push((0..arity).map(|_| toks.next("variable index")).collect::<Result<Vec<usize>, _>>()?);
    }
    for scope in scopes {
        let entries: usize = toks.next("table entry count")?;
        let table = (0..entries).map(|_| toks.next("energy")).collect::<Result<Vec<f64>, _>>()?;
        m.add_term(scope, table)?;
    }
    toks.finish()?;
    Ok(m)
}

pub fn write(m: &Mrf) -> String {
    let mut out = String::from("MARKOV\n");
    let sizes: Vec<String> = m.variables.iter().map(|v| v.domain.len().to_string()).collect();
    writeln!(out, "{}\n{}\n{}", m.variables.len(), sizes.join(" "), m.terms.len()).unwrap();
    for t in &m.terms {
        let scope: Vec<String> = t.scope.iter().map(usize::to_string).collect();
        writeln!(out, "{} {}", t.scope.len(), scope.join(" ")).unwrap();
    }
    for t in &m.terms {
        let table: Vec<String> = t.table.iter().map(|e| format!("{e:?}")).collect();
        writeln!(out, "{}\n {}", t.table.len(), table.join(" ")).unwrap();
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = "MARKOV\n3\n2 2 3\n2\n2 0 1\n2 1 2\n4\n 0.0 1.0\n 1.0 0.0\n6 # pairwise\n 0.5 0.0 0.5\n 0.0 0.5 0.0\n";

    #[test]
    fn parses_sample() {
        let m = parse(SAMPLE).unwrap();
        assert_eq!(m.variables.len(), 3);
        assert_eq!(m.variables[2].domain.len(), 3);
        assert_eq!(m.terms[1].scope, vec![1, 2]);
        assert_eq!(m.terms[1].table[4], 0.5);
        assert_eq!(parse(&write(&m)).unwrap(), m);
    }

    #[test]
    fn reports_line_of_bad_token() {
        let bad = SAMPLE.replace("0.5 0.0 0.5", "0.5 zero 0.5");
        match parse(&bad) {
            Err(MrfError::Format { line, .. }) => assert_eq!(line, 11),
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(parse("2\n2 2\n1\n1 0\n3\n0 0 0\n"), Err(MrfError::TableSize { .. })));
        assert!(matches!(parse("1\n2\n0\nextra"), Err(MrfError::Format { .. })));
        assert!(matches!(parse("2\n2"), Err(MrfError::Format { .. })));
    }
}
