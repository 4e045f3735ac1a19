//! S-expression text format for diagrams.
//!
//! ```text
//! ; comments run to end of line
//! (def 0 (case "x1" unit unit))
//! (def 1 (case "x2" (ref 0) (ref 0)))
//! (ref 1)
//! ```
//!
//! A file holds any number of `(def k <node>)` forms followed by exactly one
//! root expression. A node is `unit`, `empty`, `(ref k)`,
//! `(case "var" <hi> <lo>)` or `(factor <left> <right>)`; a `ref` may only
//! name a `def` that appears earlier in the file. The printer emits one `def`
//! per internal node, children first, so printing and re-parsing reproduces
//! the diagram node for node.

use std::collections::HashMap;
use std::fmt::Write as _;

use lexpr::Value;
use thiserror::Error;

use crate::store::{CfdError, CfdStore, Node, NodeRef};

#[derive(Debug, Error)]
pub enum ParseError {
    #[error("syntax error: {0}")]
    Syntax(#[from] lexpr::parse::Error),
    #[error("malformed diagram: {0}")]
    Malformed(String),
    #[error(transparent)]
    Constraint(#[from] CfdError),
}

fn malformed(msg: impl Into<String>) -> ParseError {
    ParseError::Malformed(msg.into())
}

/// Renders the diagram rooted at `root`.
pub fn print(store: &CfdStore, root: NodeRef) -> String {
    let mut out = String::new();
    let mut ids: HashMap<NodeRef, usize> = HashMap::new();
    let name = |ids: &HashMap<NodeRef, usize>, n: NodeRef| match store.node(n) {
        Node::Unit => "unit".to_owned(),
        Node::Empty => "empty".to_owned(),
        _ => format!("(ref {})", ids[&n]),
    };
    for n in store.reachable(root) {
        let body = match store.node(n) {
            Node::Unit | Node::Empty => continue,
            Node::Case { var, hi, lo } => format!(
                "(case {} {} {})",
                Value::string(store.var_name(var)),
                name(&ids, hi),
                name(&ids, lo)
            ),
            Node::Factor { left, right } => {
                format!("(factor {} {})", name(&ids, left), name(&ids, right))
            }
        };
        let k = ids.len();
        ids.insert(n, k);
        writeln!(out, "(def {k} {body})").expect("writing to a String");
    }
    out.push_str(&name(&ids, root));
    out.push('\n');
    out
}

/// Parses a diagram into `store`, interning its variables.
pub fn parse(store: &mut CfdStore, text: &str) -> Result<NodeRef, ParseError> {
    let mut defs: HashMap<u64, NodeRef> = HashMap::new();
    let mut root = None;
    for datum in lexpr::Parser::from_str(text).value_iter() {
        let datum = datum?;
        if root.is_some() {
            return Err(malformed("content after the root expression"));
        }
        if head(&datum) == Some("def") {
            let items = list(&datum)?;
            let [_, k, body] = items.as_slice() else {
                return Err(malformed("def takes an id and a node"));
            };
            let k = k.as_u64().ok_or_else(|| malformed("def id must be a non-negative integer"))?;
            let n = node(store, &defs, body)?;
            if defs.insert(k, n).is_some() {
                return Err(malformed(format!("def {k} given twice")));
            }
        } else {
            root = Some(node(store, &defs, &datum)?);
        }
    }
    root.ok_or_else(|| malformed("missing root expression"))
}

fn head(v: &Value) -> Option<&str> {
    v.as_cons().and_then(|c| c.car().as_symbol())
}

fn list(v: &Value) -> Result<Vec<&Value>, ParseError> {
    let items: Option<Vec<&Value>> = v.list_iter().map(Iterator::collect);
    match items {
        Some(items) if v.is_list() => Ok(items),
        _ => Err(malformed(format!("expected a proper list, found {v}"))),
    }
}

fn node(store: &mut CfdStore, defs: &HashMap<u64, NodeRef>, v: &Value) -> Result<NodeRef, ParseError> {
    if let Some(sym) = v.as_symbol() {
        return match sym {
            "unit" => Ok(NodeRef::UNIT),
            "empty" => Ok(NodeRef::EMPTY),
            other => Err(malformed(format!("unknown atom `{other}`"))),
        };
    }
    let items = list(v)?;
    match (head(v), items.as_slice()) {
        (Some("ref"), [_, k]) => {
            let k = k.as_u64().ok_or_else(|| malformed("ref id must be a non-negative integer"))?;
            defs.get(&k).copied().ok_or_else(|| malformed(format!("ref {k} has no earlier def")))
        }
        (Some("case"), [_, var, hi, lo]) => {
            let var = var.as_str().ok_or_else(|| malformed("case variable must be a string"))?;
            let var = store.var(var);
            let hi = node(store, defs, hi)?;
            let lo = node(store, defs, lo)?;
            Ok(store.mk_case(var, hi, lo)?)
        }
        (Some("factor"), [_, left, right]) => {
            let left = node(store, defs, left)?;
            let right = node(store, defs, right)?;
            Ok(store.mk_factor(left, right)?)
        }
        _ => Err(malformed(format!("unrecognized node {v}"))),
    }
}

/// Whether two diagrams, possibly in different stores, have the same shape
/// and variable names.
pub fn same_structure(a: &CfdStore, ra: NodeRef, b: &CfdStore, rb: NodeRef) -> bool {
    let mut memo: HashMap<(NodeRef, NodeRef), bool> = HashMap::new();
    let mut stack = vec![(ra, rb, false)];
    while let Some((x, y, expanded)) = stack.pop() {
        if memo.contains_key(&(x, y)) {
            continue;
        }
        let pair = match (a.node(x), b.node(y)) {
            (Node::Unit, Node::Unit) | (Node::Empty, Node::Empty) => {
                memo.insert((x, y), true);
                continue;
            }
            (Node::Case { var: v1, hi: h1, lo: l1 }, Node::Case { var: v2, hi: h2, lo: l2 }) => {
                if a.var_name(v1) != b.var_name(v2) {
                    return false;
                }
                [(h1, h2), (l1, l2)]
            }
            (Node::Factor { left: l1, right: r1 }, Node::Factor { left: l2, right: r2 }) => {
                [(l1, l2), (r1, r2)]
            }
            _ => return false,
        };
        if expanded {
            let ok = pair.iter().all(|p| memo[p]);
            if !ok {
                return false;
            }
            memo.insert((x, y), true);
        } else {
            stack.push((x, y, true));
            for (c1, c2) in pair {
                stack.push((c1, c2, false));
            }
        }
    }
    memo[&(ra, rb)]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::families;
    use crate::store::Mode;

    #[test]
    fn roundtrip_in_same_store_is_identity() {
        let mut s = CfdStore::new();
        let b4 = families::b(&mut s, 4);
        let text = print(&s, b4);
        assert_eq!(parse(&mut s, &text).unwrap(), b4);
    }

    #[test]
    fn roundtrip_into_fresh_store() {
        let mut s = CfdStore::new();
        let (x, y) = (s.var("odd \"name\"\\"), s.var("X_1,4->Y_1,2 Z_2,4"));
        let inner = s.mk_case(y, NodeRef::UNIT, NodeRef::EMPTY).unwrap();
        let root = s.mk_case(x, inner, inner).unwrap();
        let text = print(&s, root);
        let mut fresh = CfdStore::new();
        let back = parse(&mut fresh, &text).unwrap();
        assert!(same_structure(&s, root, &fresh, back));
        assert_eq!(fresh.size(back), s.size(root));
    }

    #[test]
    fn constants_and_inline_nodes() {
        let mut s = CfdStore::new();
        assert_eq!(parse(&mut s, "unit").unwrap(), NodeRef::UNIT);
        assert_eq!(parse(&mut s, "; nothing\nempty\n").unwrap(), NodeRef::EMPTY);
        let n = parse(&mut s, r#"(factor (case "a" unit unit) (case "b" unit empty))"#).unwrap();
        assert_eq!(s.vars(n).len(), 2);
    }

    #[test]
    fn rejects_bad_input() {
        let mut s = CfdStore::new();
        for bad in [
            "",
            "(ref 3)",
            "(case x unit unit)",
            "(bogus)",
            "unit unit",
            "(def 0 unit) (def 0 empty) unit",
            "(case \"a\" unit",
        ] {
            assert!(parse(&mut s, bad).is_err(), "{bad:?} should fail");
        }
        let shared = r#"(factor (case "a" unit unit) (case "a" unit unit))"#;
        assert!(matches!(parse(&mut s, shared), Err(ParseError::Constraint(_))));

        let mut loose = CfdStore::with_mode(Mode::Unchecked);
        let n = parse(&mut loose, shared).unwrap();
        assert_eq!(loose.validate(n).len(), 1);
    }
}
