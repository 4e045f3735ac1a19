//! Energy files: one `name energy` pair per line.
//!
//! ```text
//! # comment
//! *default* 0.5
//! *offset* -1.25
//! S_1,2->a 0.0
//! X_1,4->Y_1,2 Z_2,4 1.5
//! ```
//!
//! The energy is the last whitespace-separated token; everything before it
//! is the variable name, so names may contain spaces. `*default*` sets the
//! energy of unlisted variables (0 if absent). `*offset*` is a constant
//! added to every assignment's energy; MRF compilation uses it for terms
//! that do not depend on any variable. Lines starting with `#` are comments.

use std::collections::HashSet;
use std::fmt::Write as _;

use thiserror::Error;

use crate::inference::EnergyFn;
use crate::store::{CfdStore, VarId};

pub const DEFAULT_KEY: &str = "*default*";
pub const OFFSET_KEY: &str = "*offset*";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EnergyFileError {
    #[error("line {line}: {message}")]
    Format { line: usize, message: String },
    #[error("line {line}: `{name}` listed twice")]
    Duplicate { line: usize, name: String },
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct EnergyFile {
    pub energy: EnergyFn,
    pub offset: f64,
}

/// Parses an energy file, interning every listed name in `store`.
pub fn parse(store: &mut CfdStore, text: &str) -> Result<EnergyFile, EnergyFileError> {
    let mut entries: Vec<(VarId, f64)> = Vec::new();
    let mut default = None;
    let mut offset = None;
    let mut seen = HashSet::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let line_no = i + 1;
        let err = |message: String| EnergyFileError::Format { line: line_no, message };
        let (name, value) = line
            .rsplit_once(char::is_whitespace)
            .ok_or_else(|| err("expected `name energy`".into()))?;
        let name = name.trim_end();
        let value: f64 = value.parse().map_err(|_| err(format!("`{value}` is not a number")))?;
        if !value.is_finite() {
            return Err(err(format!("energy of `{name}` is not finite")));
        }
        if !seen.insert(name.to_owned()) {
            return Err(EnergyFileError::Duplicate { line: line_no, name: name.to_owned() });
        }
        match name {
            DEFAULT_KEY => default = Some(value),
            OFFSET_KEY => offset = Some(value),
            _ => entries.push((store.var(name), value)),
        }
    }
    let mut energy = EnergyFn::with_default(default.unwrap_or(0.0));
    for (v, e) in entries {
        energy.set(v, e);
    }
    Ok(EnergyFile { energy, offset: offset.unwrap_or(0.0) })
}

/// Renders `psi` with entries in variable order. Floats use the shortest
/// text that parses back to the same value.
pub fn write(store: &CfdStore, psi: &EnergyFn, offset: f64) -> String {
    let mut out = String::new();
    if psi.default_energy() != 0.0 {
        writeln!(out, "{DEFAULT_KEY} {:?}", psi.default_energy()).unwrap();
    }
    if offset != 0.0 {
        writeln!(out, "{OFFSET_KEY} {offset:?}").unwrap();
    }
    let mut entries: Vec<(VarId, f64)> = psi.entries().collect();
    entries.sort_by_key(|&(v, _)| v);
    for (v, e) in entries {
        writeln!(out, "{} {e:?}", store.var_name(v)).unwrap();
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_is_zero() {
        let mut s = CfdStore::new();
        let f = parse(&mut s, "").unwrap();
        assert_eq!(f.energy, EnergyFn::new());
        assert_eq!(f.offset, 0.0);
    }

    #[test]
    fn names_with_spaces_and_directives() {
        let mut s = CfdStore::new();
        let text = "# c\n*default* 0.5\nX_1,4->Y_1,2 Z_2,4  1.5\n*offset* -2\n";
        let f = parse(&mut s, text).unwrap();
        let v = s.lookup_var("X_1,4->Y_1,2 Z_2,4").unwrap();
        assert_eq!(f.energy.get(v), 1.5);
        assert_eq!(f.energy.default_energy(), 0.5);
        assert_eq!(f.offset, -2.0);
        let text = write(&s, &f.energy, f.offset);
        let again = parse(&mut s, &text).unwrap();
        assert_eq!(again, f);
    }

    #[test]
    fn rejects_bad_lines() {
        let mut s = CfdStore::new();
        assert!(matches!(parse(&mut s, "a 1\nb 2\na 3"), Err(EnergyFileError::Duplicate { line: 3, .. })));
        assert!(matches!(parse(&mut s, "lonely"), Err(EnergyFileError::Format { line: 1, .. })));
        assert!(matches!(parse(&mut s, "a x"), Err(EnergyFileError::Format { .. })));
        assert!(matches!(parse(&mut s, "a inf"), Err(EnergyFileError::Format { .. })));
    }
}
