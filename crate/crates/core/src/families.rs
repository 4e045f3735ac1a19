//! Small diagram families over variables `x1, x2, ...`, used as worked
//! examples and as oracle self-checks.

use crate::store::{CfdStore, NodeRef};

/// `A_0 = unit`, `A_{i+1} = case(x_{i+1}, A_i, A_i)`: all 2^i assignments
/// over `x1..xi`, with only `i + 1` nodes.
pub fn a(store: &mut CfdStore, i: usize) -> NodeRef {
    let mut d = NodeRef::UNIT;
    for k in 1..=i {
        let x = store.var(&format!("x{k}"));
        d = store.mk_case(x, d, d).expect("A_i is well formed");
    }
    d
}

/// `B_0 = unit`, `B_{i+1} = factor(case(x_{i+1}, unit, unit), B_i)`: the
/// same feasible set as `A_i`, built from independent factors.
pub fn b(store: &mut CfdStore, i: usize) -> NodeRef {
    let mut d = NodeRef::UNIT;
    for k in 1..=i {
        let x = store.var(&format!("x{k}"));
        let free = store.mk_case(x, NodeRef::UNIT, NodeRef::UNIT).expect("well formed");
        d = store.mk_factor(free, d).expect("B_i is well formed");
    }
    d
}

/// `C_0 = unit`, `C_{i+1} = case(x_{i+1}, C_i, empty)`: the single
/// assignment setting `x1..xi` true.
pub fn c(store: &mut CfdStore, i: usize) -> NodeRef {
    let mut d = NodeRef::UNIT;
    for k in 1..=i {
        let x = store.var(&format!("x{k}"));
        d = store.mk_case(x, d, NodeRef::EMPTY).expect("C_i is well formed");
    }
    d
}
