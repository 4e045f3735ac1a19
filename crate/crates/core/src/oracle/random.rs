//! Seeded instance generators for property tests.
//!
//! Every generator is a pure function of its seed and bounds.

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::assignment::PartialAssignment;
use crate::inference::EnergyFn;
use crate::mrf::Mrf;
use crate::pcfg::CnfGrammar;
use crate::store::{CfdStore, NodeRef, VarId};

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// An energy in `[-3, 3]`. On even seeds energies sit on a 0.25 grid, so
/// sums are exact and ties between alternatives are common.
fn energy(r: &mut ChaCha8Rng, grid: bool) -> f64 {
    if grid {
        r.random_range(-12i32..=12) as f64 * 0.25
    } else {
        r.random_range(-3.0..=3.0)
    }
}

struct CfdGen<'a> {
    store: &'a mut CfdStore,
    rng: ChaCha8Rng,
    pool: Vec<NodeRef>,
}

impl CfdGen<'_> {
    fn leaf(&mut self) -> NodeRef {
        if self.rng.random_bool(0.1) {
            NodeRef::EMPTY
        } else {
            NodeRef::UNIT
        }
    }

    fn reuse(&mut self, avail: &[VarId]) -> Option<NodeRef> {
        let fits: Vec<NodeRef> = self
            .pool
            .iter()
            .copied()
            .filter(|&n| self.store.vars(n).iter().all(|v| avail.contains(v)))
            .collect();
        (!fits.is_empty()).then(|| fits[self.rng.random_range(0..fits.len())])
    }

    fn subset(&mut self, vars: &[VarId]) -> Vec<VarId> {
        vars.iter().copied().filter(|_| self.rng.random_bool(0.85)).collect()
    }

    fn node(&mut self, avail: &[VarId], depth: usize) -> NodeRef {
        if depth == 0 || avail.is_empty() {
            return self.leaf();
        }
        if self.rng.random_bool(0.2) {
            if let Some(n) = self.reuse(avail) {
                return n;
            }
        }
        let roll: f64 = self.rng.random_range(0.0..1.0);
        let n = if roll < 0.55 {
            let pick = self.rng.random_range(0..avail.len());
            let x = avail[pick];
            let rest: Vec<VarId> = avail.iter().copied().filter(|&v| v != x).collect();
            let (a, b) = (self.subset(&rest), self.subset(&rest));
            let hi = self.node(&a, depth - 1);
            let lo = if self.rng.random_bool(0.15) { hi } else { self.node(&b, depth - 1) };
            self.store.mk_case(x, hi, lo).expect("case variable is outside both children")
        } else if roll < 0.95 && avail.len() >= 2 {
            let mut left = Vec::new();
            let mut right = Vec::new();
            for &v in avail {
                if self.rng.random_bool(0.5) {
                    left.push(v);
                } else {
                    right.push(v);
                }
            }
            let l = self.node(&left, depth - 1);
            let r = self.node(&right, depth - 1);
            self.store.mk_factor(l, r).expect("factor children use disjoint variables")
        } else {
            self.leaf()
        };
        if n.index() > NodeRef::UNIT.index() {
            self.pool.push(n);
        }
        n
    }
}

/// A valid diagram over variables `v0, v1, ...` (at most `max_vars` of them)
/// with depth at most `max_depth`. Case variables are drawn outside the
/// children's variables and factor children get disjoint variables, so the
/// result is valid by construction. Subdiagrams are reused across branches.
pub fn random_cfd(store: &mut CfdStore, seed: u64, max_vars: usize, max_depth: usize) -> NodeRef {
    assert!(max_vars > 0 && max_depth > 0, "bounds must be positive");
    let mut r = rng(seed);
    let count = r.random_range(max_vars.div_ceil(2)..=max_vars);
    let vars: Vec<VarId> = (0..count).map(|i| store.var(&format!("v{i}"))).collect();
    let mut g = CfdGen { store, rng: r, pool: Vec::new() };
    // A bare leaf at the root makes a dull instance; draw again a few times.
    let mut root = g.node(&vars, max_depth);
    for _ in 0..8 {
        if g.store.is_open(root) {
            break;
        }
        root = g.node(&vars, max_depth);
    }
    root
}

/// Energies in `[-3, 3]` for the given variables.
pub fn random_energies(seed: u64, vars: impl IntoIterator<Item = VarId>) -> EnergyFn {
    let mut r = rng(seed ^ 0x5eed_e4e6);
    let grid = seed % 2 == 0;
    let mut psi = EnergyFn::new();
    for v in vars {
        psi.set(v, energy(&mut r, grid));
    }
    psi
}

/// A partial assignment over up to three of `vars`, biased towards
/// conditions that keep some mass.
pub fn random_condition(seed: u64, vars: &[VarId]) -> PartialAssignment {
    let mut r = rng(seed ^ 0xc0de);
    let mut sigma = PartialAssignment::new();
    if vars.is_empty() {
        return sigma;
    }
    for _ in 0..r.random_range(0..=3usize) {
        let v = vars[r.random_range(0..vars.len())];
        sigma.set(v, r.random_bool(0.4));
    }
    sigma
}

/// An MRF with at most `max_vars` variables, domains of size `1..=max_domain`
/// (mostly at least 2) and at most `max_terms` terms of arity 1 to 3.
pub fn random_mrf(seed: u64, max_vars: usize, max_domain: usize, max_terms: usize) -> Mrf {
    assert!(max_vars > 0 && max_domain > 0 && max_terms > 0, "bounds must be positive");
    let mut r = rng(seed);
    let grid = seed % 2 == 0;
    let n = r.random_range(1..=max_vars);
    let sizes: Vec<usize> = (0..n)
        .map(|_| if max_domain > 1 && r.random_bool(0.9) { r.random_range(2..=max_domain) } else { 1 })
        .collect();
    let mut m = Mrf::with_domain_sizes(&sizes);
    for _ in 0..r.random_range(1..=max_terms) {
        let arity = r.random_range(1..=n.min(3));
        let mut scope = Vec::new();
        while scope.len() < arity {
            let y = r.random_range(0..n);
            if !scope.contains(&y) {
                scope.push(y);
            }
        }
        let entries: usize = scope.iter().map(|&y| sizes[y]).product();
        let table = (0..entries).map(|_| energy(&mut r, grid)).collect();
        m.add_term(scope, table).expect("generated terms are well formed");
    }
    m
}

/// A CNF grammar over `N0..` (start `N0`) with at most `max_nts`
/// nonterminals and at most `max_rules` rules. Every terminal gets at least
/// one lexical rule so most sentences have some parse.
pub fn random_grammar(seed: u64, max_nts: usize, max_rules: usize, terminals: &[&str]) -> CnfGrammar {
    assert!(max_nts > 0 && max_rules > terminals.len() && !terminals.is_empty(), "bounds must be positive");
    let mut r = rng(seed);
    let grid = seed % 2 == 0;
    let nts = r.random_range(1..=max_nts);
    let name = |x: usize| format!("N{x}");
    let mut g = CnfGrammar::new();
    g.set_start(&name(0));
    for x in 1..nts {
        g.nonterminal(&name(x));
    }
    for t in terminals {
        let x = r.random_range(0..nts);
        g.add_lexical(&name(x), t, energy(&mut r, grid)).expect("first rule for this terminal");
    }
    let target = r.random_range(terminals.len() + 1..=max_rules);
    let mut attempts = 0;
    while g.rules().len() < target && attempts < 100 {
        attempts += 1;
        let lhs = name(r.random_range(0..nts));
        let e = energy(&mut r, grid);
        let _ = if r.random_bool(0.75) {
            g.add_binary(&lhs, &name(r.random_range(0..nts)), &name(r.random_range(0..nts)), e)
        } else {
            g.add_lexical(&lhs, terminals[r.random_range(0..terminals.len())], e)
        };
    }
    g
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sexpr;

    #[test]
    fn deterministic_per_seed() {
        let mut s1 = CfdStore::new();
        let mut s2 = CfdStore::new();
        let a = random_cfd(&mut s1, 42, 8, 5);
        let b = random_cfd(&mut s2, 42, 8, 5);
        assert_eq!(sexpr::print(&s1, a), sexpr::print(&s2, b));
        assert_eq!(random_cfd(&mut s1, 42, 8, 5), a);
        assert_eq!(random_mrf(7, 8, 3, 8), random_mrf(7, 8, 3, 8));
        assert_eq!(random_grammar(3, 5, 8, &["a", "b"]), random_grammar(3, 5, 8, &["a", "b"]));
    }

    #[test]
    fn generated_instances_are_valid() {
        let mut s = CfdStore::new();
        for seed in 0..1000 {
            let d = random_cfd(&mut s, seed, 12, 6);
            assert!(s.validate(d).is_empty());
            assert!(s.vars(d).len() <= 12);
        }
        for seed in 0..200 {
            random_mrf(seed, 8, 3, 8).validate().unwrap();
            let g = random_grammar(seed, 5, 8, &["a", "b"]);
            assert!(g.nonterminals().len() <= 5 && g.rules().len() <= 8);
        }
    }
}
