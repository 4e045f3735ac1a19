//! Markov random fields as Boolean models, compiled to case-factor diagrams.
//!
//! An MRF configuration becomes a truth assignment over two kinds of Boolean
//! variables: a value variable `"y=v"` per (variable, value), and a term
//! variable per (energy term, scope tuple) that is true exactly when the
//! configuration agrees with the tuple. Term variables carry the term's
//! energy; value variables carry none.
//!
//! Compilation follows the case-factor process under the declared variable
//! order: split the residual terms into independent components when the
//! unassigned variables disconnect them, emit the term variable when a lone
//! term is fully assigned, and otherwise branch on every value of the
//! earliest unassigned variable.

pub mod uai;

use std::collections::HashMap;

use thiserror::Error;

use crate::assignment::Assignment;
use crate::inference::EnergyFn;
use crate::store::{CfdError, CfdStore, NodeRef, VarId};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MrfError {
    #[error("variable {0} has an empty domain")]
    EmptyDomain(usize),
    #[error("term {term} refers to variable {var}, but there are only {count} variables")]
    ScopeOutOfRange { term: usize, var: usize, count: usize },
    #[error("term {term} lists variable {var} twice")]
    DuplicateScopeVar { term: usize, var: usize },
    #[error("term {term} has {found} table entries, expected {expected}")]
    TableSize { term: usize, expected: usize, found: usize },
    #[error("term {term} has a non-finite energy")]
    NonFinite { term: usize },
    #[error("line {line}: {message}")]
    Format { line: usize, message: String },
}

#[derive(Clone, Debug, PartialEq)]
pub struct MrfVariable {
    pub name: String,
    pub domain: Vec<String>,
}

/// A tabulated energy term. The table is row-major over `scope` in the
/// order given: the last scope variable varies fastest.
#[derive(Clone, Debug, PartialEq)]
pub struct EnergyTerm {
    pub scope: Vec<usize>,
    pub table: Vec<f64>,
}

impl EnergyTerm {
    fn lookup(&self, variables: &[MrfVariable], config: &[usize]) -> f64 {
        let mut idx = 0;
        for &y in &self.scope {
            idx = idx * variables[y].domain.len() + config[y];
        }
        self.table[idx]
    }
}

/// Variables with finite domains, in a fixed order, plus energy terms.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Mrf {
    pub variables: Vec<MrfVariable>,
    pub terms: Vec<EnergyTerm>,
}

impl Mrf {
    pub fn new(variables: Vec<MrfVariable>) -> Self {
        Mrf { variables, terms: Vec::new() }
    }

    /// Variables `y0, y1, ...` with values `0..size`.
    pub fn with_domain_sizes(sizes: &[usize]) -> Self {
        Mrf::new(
            sizes
                .iter()
                .enumerate()
                .map(|(i, &d)| MrfVariable {
                    name: format!("y{i}"),
                    domain: (0..d).map(|v| v.to_string()).collect(),
                })
                .collect(),
        )
    }

    pub fn add_term(&mut self, scope: Vec<usize>, table: Vec<f64>) -> Result<(), MrfError> {
        self.terms.push(EnergyTerm { scope, table });
        if let Err(e) = self.check_term(self.terms.len() - 1) {
            self.terms.pop();
            return Err(e);
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), MrfError> {
        if let Some(i) = self.variables.iter().position(|v| v.domain.is_empty()) {
            return Err(MrfError::EmptyDomain(i));
        }
        (0..self.terms.len()).try_for_each(|k| self.check_term(k))
    }

    fn check_term(&self, k: usize) -> Result<(), MrfError> {
        let t = &self.terms[k];
        let count = self.variables.len();
        let mut expected = 1usize;
        for (p, &y) in t.scope.iter().enumerate() {
            if y >= count {
                return Err(MrfError::ScopeOutOfRange { term: k, var: y, count });
            }
            if t.scope[..p].contains(&y) {
                return Err(MrfError::DuplicateScopeVar { term: k, var: y });
            }
            expected *= self.variables[y].domain.len();
        }
        if t.table.len() != expected {
            return Err(MrfError::TableSize { term: k, expected, found: t.table.len() });
        }
        if t.table.iter().any(|e| !e.is_finite()) {
            return Err(MrfError::NonFinite { term: k });
        }
        Ok(())
    }

    /// Total energy of a configuration given as value indices.
    pub fn energy(&self, config: &[usize]) -> f64 {
        self.terms.iter().map(|t| t.lookup(&self.variables, config)).sum()
    }

    pub fn num_configurations(&self) -> u128 {
        self.variables.iter().map(|v| v.domain.len() as u128).product()
    }

    /// Projects every term onto the variables it actually depends on, folds
    /// constant terms into an energy offset, and gives every variable left
    /// without a term a zero-energy unary term.
    pub fn normalize(&self) -> Result<NormalizedMrf, MrfError> {
        self.validate()?;
        let mut terms = Vec::new();
        let mut offset = 0.0;
        for t in &self.terms {
            let projected = project(&self.variables, t);
            if projected.scope.is_empty() {
                offset += projected.table[0];
            } else {
                terms.push(projected);
            }
        }
        let mut covered = vec![false; self.variables.len()];
        for t in &terms {
            for &y in &t.scope {
                covered[y] = true;
            }
        }
        for (y, _) in covered.iter().enumerate().filter(|(_, c)| !**c) {
            terms.push(EnergyTerm { scope: vec![y], table: vec![0.0; self.variables[y].domain.len()] });
        }
        Ok(NormalizedMrf { variables: self.variables.clone(), terms, offset })
    }
}

/// Restricts a term to its true dependence set, with the scope sorted by
/// variable order.
fn project(variables: &[MrfVariable], t: &EnergyTerm) -> EnergyTerm {
    let dims: Vec<usize> = t.scope.iter().map(|&y| variables[y].domain.len()).collect();
    let strides: Vec<usize> = (0..dims.len()).map(|p| dims[p + 1..].iter().product()).collect();

    let depends = |p: usize| {
        (0..t.table.len()).any(|idx| {
            let digit = (idx / strides[p]) % dims[p];
            // Compare against the same tuple with coordinate p set to 0.
            digit != 0 && t.table[idx] != t.table[idx - digit * strides[p]]
        })
    };
    let mut kept: Vec<usize> = (0..dims.len()).filter(|&p| depends(p)).collect();
    kept.sort_by_key(|&p| t.scope[p]);

    let scope: Vec<usize> = kept.iter().map(|&p| t.scope[p]).collect();
    let size: usize = kept.iter().map(|&p| dims[p]).product();
    let mut table = Vec::with_capacity(size);
    for new_idx in 0..size {
        let mut rest = new_idx;
        let mut old_idx = 0;
        for &p in kept.iter().rev() {
            old_idx += (rest % dims[p]) * strides[p];
            rest /= dims[p];
        }
        table.push(t.table[old_idx]);
    }
    EnergyTerm { scope, table }
}

/// An MRF whose term scopes are exact dependence sets sorted by variable
/// order, with no constant terms and every variable covered by some term.
#[derive(Clone, Debug, PartialEq)]
pub struct NormalizedMrf {
    pub variables: Vec<MrfVariable>,
    pub terms: Vec<EnergyTerm>,
    /// Energy removed from constant terms; add it to every configuration.
    pub offset: f64,
}

impl NormalizedMrf {
    /// The largest domain size.
    pub fn max_domain(&self) -> usize {
        self.variables.iter().map(|v| v.domain.len()).max().unwrap_or(0)
    }

    /// Back to a plain MRF. The offset becomes a scope-free term.
    pub fn to_mrf(&self) -> Mrf {
        let mut terms = self.terms.clone();
        if self.offset != 0.0 {
            terms.push(EnergyTerm { scope: Vec::new(), table: vec![self.offset] });
        }
        Mrf { variables: self.variables.clone(), terms }
    }
}

/// Boolean variables and energies of an encoded MRF.
#[derive(Clone, Debug)]
pub struct BooleanEncoding {
    /// `value_vars[y][v]` is `"y=v"`.
    pub value_vars: Vec<Vec<VarId>>,
    /// `term_vars[k][t]` is the variable for tuple index `t` of term `k`
    /// (row-major over the term's scope).
    pub term_vars: Vec<Vec<VarId>>,
    pub energy: EnergyFn,
    pub offset: f64,
}

impl BooleanEncoding {
    /// The configuration a feasible assignment encodes, if it sets exactly
    /// one value variable per MRF variable.
    pub fn decode(&self, rho: &Assignment) -> Option<Vec<usize>> {
        self.value_vars
            .iter()
            .map(|vals| {
                let mut on = vals.iter().enumerate().filter(|(_, v)| rho.contains(**v));
                let first = on.next()?.0;
                on.next().is_none().then_some(first)
            })
            .collect()
    }

    /// The truth assignment of a configuration.
    pub fn encode_configuration(&self, m: &NormalizedMrf, config: &[usize]) -> Assignment {
        let mut support: Vec<VarId> =
            self.value_vars.iter().zip(config).map(|(vals, &v)| vals[v]).collect();
        for (k, t) in m.terms.iter().enumerate() {
            let mut idx = 0;
            for &y in &t.scope {
                idx = idx * m.variables[y].domain.len() + config[y];
            }
            support.push(self.term_vars[k][idx]);
        }
        Assignment::from_vars(support)
    }
}

/// Interns the Boolean variables of `m` and assigns their energies.
pub fn encode(store: &mut CfdStore, m: &NormalizedMrf) -> BooleanEncoding {
    let mut energy = EnergyFn::new();
    let value_vars: Vec<Vec<VarId>> = m
        .variables
        .iter()
        .map(|y| {
            y.domain
                .iter()
                .map(|v| {
                    let var = store.var(&format!("{}={}", y.name, v));
                    energy.set(var, 0.0);
                    var
                })
                .collect()
        })
        .collect();
    let mut term_vars = Vec::with_capacity(m.terms.len());
    for (k, t) in m.terms.iter().enumerate() {
        let dims: Vec<usize> = t.scope.iter().map(|&y| m.variables[y].domain.len()).collect();
        let mut vars = Vec::with_capacity(t.table.len());
        for (idx, &e) in t.table.iter().enumerate() {
            let mut rest = idx;
            let mut parts = vec![String::new(); dims.len()];
            for p in (0..dims.len()).rev() {
                let y = &m.variables[t.scope[p]];
                parts[p] = format!("{}={}", y.name, y.domain[rest % dims[p]]);
                rest /= dims[p];
            }
            let var = store.var(&format!("t{k}|{}", parts.join(",")));
            energy.set(var, e);
            vars.push(var);
        }
        term_vars.push(vars);
    }
    BooleanEncoding { value_vars, term_vars, energy, offset: m.offset }
}

type SubproblemKey = (Vec<usize>, Vec<(usize, usize)>);

struct Compiler<'a> {
    store: &'a mut CfdStore,
    m: &'a NormalizedMrf,
    enc: &'a BooleanEncoding,
    memo: HashMap<SubproblemKey, NodeRef>,
}

/// Compiles `m` to a diagram whose feasible assignments are exactly the
/// encodings of its configurations.
pub fn compile(store: &mut CfdStore, m: &NormalizedMrf, enc: &BooleanEncoding) -> Result<NodeRef, CfdError> {
    let mut c = Compiler { store, m, enc, memo: HashMap::new() };
    let all: Vec<usize> = (0..m.terms.len()).collect();
    c.build(all, &vec![None; m.variables.len()])
}

impl Compiler<'_> {
    /// `D(Σ, ρ)`; `rho` is indexed by MRF variable.
    fn build(&mut self, sigma: Vec<usize>, rho: &[Option<usize>]) -> Result<NodeRef, CfdError> {
        if sigma.is_empty() {
            return Ok(NodeRef::UNIT);
        }
        let mut vars: Vec<usize> = sigma.iter().flat_map(|&k| self.m.terms[k].scope.iter().copied()).collect();
        vars.sort_unstable();
        vars.dedup();
        let key_rho: Vec<(usize, usize)> = vars.iter().filter_map(|&y| rho[y].map(|v| (y, v))).collect();
        let key = (sigma, key_rho);
        if let Some(&n) = self.memo.get(&key) {
            return Ok(n);
        }
        let sigma = &key.0;

        let components = self.components(sigma, rho);
        let node = if components.len() > 1 {
            let mut parts = Vec::with_capacity(components.len());
            for comp in components {
                parts.push(self.build(comp, rho)?);
            }
            let mut acc = parts.pop().expect("at least two components");
            while let Some(left) = parts.pop() {
                acc = self.store.mk_factor(left, acc)?;
            }
            acc
        } else if let Some(y) = vars.iter().copied().find(|&y| rho[y].is_none()) {
            let mut branches = Vec::with_capacity(self.m.variables[y].domain.len());
            let mut next = rho.to_vec();
            for v in 0..self.m.variables[y].domain.len() {
                next[y] = Some(v);
                let sub = self.build(sigma.clone(), &next)?;
                branches.push((self.enc.value_vars[y][v], sub));
            }
            self.store.multi_case(&branches)?
        } else {
            // A single, fully assigned term.
            let k = sigma[0];
            let t = &self.m.terms[k];
            let mut idx = 0;
            for &y in &t.scope {
                idx = idx * self.m.variables[y].domain.len() + rho[y].expect("assigned");
            }
            self.store.mk_case(self.enc.term_vars[k][idx], NodeRef::UNIT, NodeRef::EMPTY)?
        };
        self.memo.insert(key, node);
        Ok(node)
    }

    /// Connected components of `sigma`, linking terms that share an
    /// unassigned variable, ordered by smallest term index.
    fn components(&self, sigma: &[usize], rho: &[Option<usize>]) -> Vec<Vec<usize>> {
        let mut parent: Vec<usize> = (0..sigma.len()).collect();
        fn find(parent: &mut [usize], mut i: usize) -> usize {
            while parent[i] != i {
                parent[i] = parent[parent[i]];
                i = parent[i];
            }
            i
        }
        let mut owner: HashMap<usize, usize> = HashMap::new();
        for (i, &k) in sigma.iter().enumerate() {
            for &y in &self.m.terms[k].scope {
                if rho[y].is_some() {
                    continue;
                }
                if let Some(&j) = owner.get(&y) {
                    let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                    parent[a.max(b)] = a.min(b);
                } else {
                    owner.insert(y, i);
                }
            }
        }
        let mut groups: Vec<Vec<usize>> = Vec::new();
        let mut slot: HashMap<usize, usize> = HashMap::new();
        for (i, &k) in sigma.iter().enumerate() {
            let r = find(&mut parent, i);
            let g = *slot.entry(r).or_insert_with(|| {
                groups.push(Vec::new());
                groups.len() - 1
            });
            groups[g].push(k);
        }
        groups
    }
}

/// Tree width under the declared variable order.
///
/// For each position `i`, terms are linked when they share a variable at
/// position `>= i`; the width of a component is the number of variables at
/// position `<= i` that its terms mention.
pub fn tree_width(m: &NormalizedMrf) -> usize {
    let n = m.variables.len();
    let mut width = 0;
    for i in 0..n {
        let mut parent: Vec<usize> = (0..m.terms.len()).collect();
        fn find(parent: &mut [usize], mut a: usize) -> usize {
            while parent[a] != a {
                parent[a] = parent[parent[a]];
                a = parent[a];
            }
            a
        }
        let mut owner: Vec<Option<usize>> = vec![None; n];
        for (k, t) in m.terms.iter().enumerate() {
            for &y in t.scope.iter().filter(|&&y| y >= i) {
                match owner[y] {
                    Some(j) => {
                        let (a, b) = (find(&mut parent, k), find(&mut parent, j));
                        parent[a.max(b)] = a.min(b);
                    }
                    None => owner[y] = Some(k),
                }
            }
        }
        let mut past: HashMap<usize, Vec<bool>> = HashMap::new();
        for (k, t) in m.terms.iter().enumerate() {
            let r = find(&mut parent, k);
            let seen = past.entry(r).or_insert_with(|| vec![false; i + 1]);
            for &y in t.scope.iter().filter(|&&y| y <= i) {
                seen[y] = true;
            }
        }
        for seen in past.values() {
            width = width.max(seen.iter().filter(|&&b| b).count());
        }
    }
    width
}

/// Compiled size against `N · d^w` (terms, largest domain, tree width).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MrfSizeReport {
    pub nodes: usize,
    pub terms: usize,
    pub max_domain: usize,
    pub tree_width: usize,
    pub bound: f64,
}

impl MrfSizeReport {
    pub fn ratio(&self) -> f64 {
        self.nodes as f64 / self.bound
    }
}

pub fn size_bound_report(store: &CfdStore, m: &NormalizedMrf, root: NodeRef) -> MrfSizeReport {
    let terms = m.terms.len();
    let max_domain = m.max_domain();
    let w = tree_width(m);
    MrfSizeReport {
        nodes: store.size(root),
        terms,
        max_domain,
        tree_width: w,
        bound: terms as f64 * (max_domain as f64).powi(w as i32),
    }
}

/// Normalizes, encodes and compiles in one step.
pub struct MrfCompilation {
    pub mrf: NormalizedMrf,
    pub encoding: BooleanEncoding,
    pub root: NodeRef,
}

pub fn compile_mrf(store: &mut CfdStore, m: &Mrf) -> Result<MrfCompilation, MrfCompileError> {
    let mrf = m.normalize()?;
    let encoding = encode(store, &mrf);
    let root = compile(store, &mrf, &encoding)?;
    Ok(MrfCompilation { mrf, encoding, root })
}

#[derive(Debug, Error)]
pub enum MrfCompileError {
    #[error(transparent)]
    Mrf(#[from] MrfError),
    #[error(transparent)]
    Cfd(#[from] CfdError),
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::inference;
    use crate::store::Node;

    fn chain(n: usize, table: [f64; 4]) -> Mrf {
        let mut m = Mrf::with_domain_sizes(&vec![2; n]);
        for i in 0..n - 1 {
            m.add_term(vec![i, i + 1], table.to_vec()).unwrap();
        }
        m
    }

    #[test]
    fn encode_counts() {
        let mut s = CfdStore::new();
        let m = Mrf::with_domain_sizes(&[2]).normalize().unwrap();
        let enc = encode(&mut s, &m);
        assert_eq!(enc.value_vars.iter().map(Vec::len).sum::<usize>(), 2);
        // The orphan variable gets a synthetic unary term.
        assert_eq!(m.terms.len(), 1);

        let mut pair = Mrf::with_domain_sizes(&[2, 2]);
        pair.add_term(vec![0, 1], vec![0.0, 1.0, 2.0, 3.0]).unwrap();
        let pair = pair.normalize().unwrap();
        let enc = encode(&mut s, &pair);
        assert_eq!(enc.value_vars.iter().map(Vec::len).sum::<usize>(), 4);
        assert_eq!(enc.term_vars.iter().map(Vec::len).sum::<usize>(), 4);
        assert_eq!(enc.energy.get(enc.term_vars[0][2]), 2.0);
        assert_eq!(s.var_name(enc.term_vars[0][2]), "t0|y0=1,y1=0");

        let mut three = Mrf::with_domain_sizes(&[3, 3, 3]);
        three.add_term(vec![0, 1], (0..9).map(f64::from).collect()).unwrap();
        three.add_term(vec![1, 2], (0..9).map(f64::from).collect()).unwrap();
        let enc = encode(&mut s, &three.normalize().unwrap());
        assert_eq!(enc.value_vars.iter().map(Vec::len).sum::<usize>(), 9);
        assert_eq!(enc.term_vars.iter().map(Vec::len).sum::<usize>(), 18);
    }

    #[test]
    fn projection_drops_irrelevant_variables() {
        let mut m = Mrf::with_domain_sizes(&[2, 3]);
        // Depends on y1 only; listed with y1 first to exercise reordering.
        m.add_term(vec![1, 0], vec![5.0, 5.0, 6.0, 6.0, 7.0, 7.0]).unwrap();
        m.add_term(vec![0], vec![1.5, 1.5]).unwrap();
        let n = m.normalize().unwrap();
        assert_eq!(n.offset, 1.5);
        assert_eq!(n.terms[0], EnergyTerm { scope: vec![1], table: vec![5.0, 6.0, 7.0] });
        // y0 is now an orphan.
        assert_eq!(n.terms[1], EnergyTerm { scope: vec![0], table: vec![0.0, 0.0] });
        assert_eq!(n.to_mrf().normalize().unwrap(), n);
    }

    #[test]
    fn projection_reorders_scope() {
        let mut m = Mrf::with_domain_sizes(&[2, 3]);
        // Scope (y1, y0): entry for (y1=b, y0=a) is 10b + a.
        let table: Vec<f64> = (0..3).flat_map(|b| (0..2).map(move |a| f64::from(10 * b + a))).collect();
        m.add_term(vec![1, 0], table).unwrap();
        let n = m.normalize().unwrap();
        assert_eq!(n.terms[0].scope, vec![0, 1]);
        for a in 0..2 {
            for b in 0..3 {
                assert_eq!(n.terms[0].table[a * 3 + b], f64::from(10 * b as i32 + a as i32));
                assert_eq!(m.energy(&[a, b]), n.to_mrf().energy(&[a, b]));
            }
        }
    }

    #[test]
    fn single_unary_term_shape() {
        let mut m = Mrf::with_domain_sizes(&[2]);
        m.add_term(vec![0], vec![0.0, 3f64.ln()]).unwrap();
        let mut s = CfdStore::new();
        let c = compile_mrf(&mut s, &m).unwrap();
        let v = &c.encoding.value_vars[0];
        let t = &c.encoding.term_vars[0];
        let t0 = s.mk_case(t[0], NodeRef::UNIT, NodeRef::EMPTY).unwrap();
        let t1 = s.mk_case(t[1], NodeRef::UNIT, NodeRef::EMPTY).unwrap();
        let expected = s.multi_case(&[(v[0], t0), (v[1], t1)]).unwrap();
        assert_eq!(c.root, expected);
        let p = inference::marginal(&s, c.root, &c.encoding.energy, &Default::default(), v[0]).unwrap();
        assert!((p - 0.75).abs() < 1e-12);
    }

    #[test]
    fn independent_terms_factor_at_root() {
        let mut m = Mrf::with_domain_sizes(&[2, 2, 2, 2]);
        m.add_term(vec![0, 1], vec![0.0, 1.0, 2.0, 3.0]).unwrap();
        m.add_term(vec![2, 3], vec![3.0, 1.0, 2.0, 0.0]).unwrap();
        let mut s = CfdStore::new();
        let c = compile_mrf(&mut s, &m).unwrap();
        assert!(matches!(s.node(c.root), Node::Factor { .. }));
        assert!(s.validate(c.root).is_empty());
    }

    #[test]
    fn zero_chain_counts_configurations() {
        let m = chain(3, [0.0; 4]);
        let mut s = CfdStore::new();
        let c = compile_mrf(&mut s, &m).unwrap();
        let z = inference::z(&s, c.root, &c.encoding.energy);
        assert!((z.exp() - 8.0).abs() < 1e-12);
    }

    #[test]
    fn tree_width_examples() {
        for n in 3..=6 {
            let m = chain(n, [0.0, 1.0, 1.0, 0.0]).normalize().unwrap();
            assert_eq!(tree_width(&m), 2, "chain of {n}");
        }
        let mut unary = Mrf::with_domain_sizes(&[2]);
        unary.add_term(vec![0], vec![0.0, 1.0]).unwrap();
        assert_eq!(tree_width(&unary.normalize().unwrap()), 1);

        let mut two = Mrf::with_domain_sizes(&[2, 2]);
        two.add_term(vec![0], vec![0.0, 1.0]).unwrap();
        two.add_term(vec![1], vec![1.0, 0.0]).unwrap();
        assert_eq!(tree_width(&two.normalize().unwrap()), 1);
    }

    #[test]
    fn rejects_malformed_terms() {
        let mut m = Mrf::with_domain_sizes(&[2, 2]);
        assert!(matches!(m.add_term(vec![0, 0], vec![0.0; 4]), Err(MrfError::DuplicateScopeVar { .. })));
        assert!(matches!(m.add_term(vec![2], vec![0.0; 2]), Err(MrfError::ScopeOutOfRange { .. })));
        assert!(matches!(m.add_term(vec![0], vec![0.0; 3]), Err(MrfError::TableSize { .. })));
        assert!(matches!(m.add_term(vec![0], vec![0.0, f64::NAN]), Err(MrfError::NonFinite { .. })));
        assert!(m.terms.is_empty());
    }
}
