//! Brute-force reference semantics.
//!
//! Everything here is exponential on purpose: feasible sets are materialized
//! and sums, minima and conditionals are taken by direct iteration. The fast
//! code paths are tested against these functions.

pub mod structure;
pub mod cky;
pub mod mrf;
pub mod random;
pub mod verify;

use std::collections::{BTreeSet, HashMap};

use thiserror::Error;

use crate::assignment::{Assignment, PartialAssignment};
use crate::inference::{EnergyFn, InferenceError};
use crate::logspace::log_sum_exp;
use crate::store::{CfdError, CfdStore, Node, NodeRef, VarId};

pub use structure::{check_structural_facts, contexts, gamma, leads_to, StructureReport, Counterexample, Property};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OracleError {
    #[error("instance too large for enumeration: {0}")]
    TooLarge(String),
    #[error(transparent)]
    Inference(#[from] InferenceError),
    #[error("compilation failed: {0}")]
    Compile(String),
}

/// Bounds on brute-force enumeration. Exceeding either is an error, never a
/// silent truncation.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Limits {
    pub max_vars: usize,
    pub max_assignments: usize,
}

impl Default for Limits {
    fn default() -> Self {
        Limits { max_vars: 20, max_assignments: 1 << 20 }
    }
}

impl Limits {
    /// No bound on the variable count, only on the number of assignments
    /// materialized per node. Used for compiled parse forests, which have
    /// many variables but few feasible assignments.
    pub fn assignments_only(max_assignments: usize) -> Self {
        Limits { max_vars: usize::MAX, max_assignments }
    }
}

/// An explicit feasible set, kept sorted.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct FeasibleSet {
    assignments: Vec<Assignment>,
}

impl FeasibleSet {
    pub fn from_assignments(items: impl IntoIterator<Item = Assignment>) -> Self {
        let set: BTreeSet<Assignment> = items.into_iter().collect();
        FeasibleSet { assignments: set.into_iter().collect() }
    }

    pub fn len(&self) -> usize {
        self.assignments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.assignments.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Assignment> {
        self.assignments.iter()
    }

    pub fn contains(&self, rho: &Assignment) -> bool {
        self.assignments.binary_search(rho).is_ok()
    }

    /// `ln Σ e^{-Ψ(ρ)}`.
    pub fn z(&self, psi: &EnergyFn) -> f64 {
        log_sum_exp(self.assignments.iter().map(|r| -psi.energy_of(r)))
    }

    /// `ln Σ e^{-Ψ(ρ)}` over the assignments that agree with `sigma`.
    pub fn conditioned_z(&self, psi: &EnergyFn, sigma: &PartialAssignment) -> f64 {
        log_sum_exp(self.assignments.iter().filter(|r| sigma.admits(r)).map(|r| -psi.energy_of(r)))
    }

    /// `P(z = 1 | σ)` by counting.
    pub fn marginal(&self, psi: &EnergyFn, sigma: &PartialAssignment, z: VarId) -> Result<f64, OracleError> {
        let denom = self.conditioned_z(psi, sigma);
        if denom == f64::NEG_INFINITY {
            return Err(InferenceError::ConditionInfeasible.into());
        }
        if sigma.get(z) == Some(false) {
            return Ok(0.0);
        }
        Ok((self.conditioned_z(psi, &sigma.with(z, true)) - denom).exp())
    }

    /// Minimum energy and every assignment attaining it.
    pub fn viterbi(&self, psi: &EnergyFn) -> BruteViterbi {
        let mut energy = f64::INFINITY;
        let mut argmin = Vec::new();
        for r in &self.assignments {
            let e = psi.energy_of(r);
            if e < energy {
                energy = e;
                argmin.clear();
            }
            if e == energy {
                argmin.push(r.clone());
            }
        }
        BruteViterbi { energy, argmin }
    }
}

impl<'a> IntoIterator for &'a FeasibleSet {
    type Item = &'a Assignment;
    type IntoIter = std::slice::Iter<'a, Assignment>;
    fn into_iter(self) -> Self::IntoIter {
        self.assignments.iter()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BruteViterbi {
    pub energy: f64,
    pub argmin: Vec<Assignment>,
}

/// Feasible sets of every node reachable from a root, computed once.
#[derive(Clone, Debug)]
pub struct Enumeration {
    sets: HashMap<NodeRef, FeasibleSet>,
    root: NodeRef,
}

impl Enumeration {
    pub fn new(store: &CfdStore, root: NodeRef, limits: Limits) -> Result<Self, OracleError> {
        let nvars = store.vars(root).len();
        if nvars > limits.max_vars {
            return Err(OracleError::TooLarge(format!("{nvars} variables, limit {}", limits.max_vars)));
        }
        let mut sets: HashMap<NodeRef, FeasibleSet> = HashMap::new();
        for n in store.reachable(root) {
            let items: Vec<Assignment> = match store.node(n) {
                Node::Unit => vec![Assignment::empty()],
                Node::Empty => Vec::new(),
                Node::Case { var, hi, lo } => {
                    let mut v: Vec<Assignment> = sets[&hi].iter().map(|r| r.with(var)).collect();
                    v.extend(sets[&lo].iter().cloned());
                    v
                }
                Node::Factor { left, right } => {
                    let (l, r) = (&sets[&left], &sets[&right]);
                    if l.len().saturating_mul(r.len()) > limits.max_assignments {
                        return Err(too_many(l.len().saturating_mul(r.len()), limits));
                    }
                    l.iter().flat_map(|a| r.iter().map(move |b| a.or(b))).collect()
                }
            };
            if items.len() > limits.max_assignments {
                return Err(too_many(items.len(), limits));
            }
            sets.insert(n, FeasibleSet::from_assignments(items));
        }
        Ok(Enumeration { sets, root })
    }

    pub fn root(&self) -> &FeasibleSet {
        &self.sets[&self.root]
    }

    /// `F(n)` for a node reachable from the root.
    pub fn of(&self, n: NodeRef) -> &FeasibleSet {
        &self.sets[&n]
    }
}

fn too_many(count: usize, limits: Limits) -> OracleError {
    OracleError::TooLarge(format!("{count} assignments, limit {}", limits.max_assignments))
}

/// `F(D)` with the default limits.
pub fn enumerate(store: &CfdStore, d: NodeRef) -> Result<FeasibleSet, OracleError> {
    enumerate_with(store, d, Limits::default())
}

pub fn enumerate_with(store: &CfdStore, d: NodeRef, limits: Limits) -> Result<FeasibleSet, OracleError> {
    let mut e = Enumeration::new(store, d, limits)?;
    Ok(e.sets.remove(&d).expect("root is reachable"))
}

pub fn brute_z(store: &CfdStore, d: NodeRef, psi: &EnergyFn) -> Result<f64, OracleError> {
    Ok(enumerate(store, d)?.z(psi))
}

pub fn brute_viterbi(store: &CfdStore, d: NodeRef, psi: &EnergyFn) -> Result<BruteViterbi, OracleError> {
    Ok(enumerate(store, d)?.viterbi(psi))
}

pub fn brute_conditioned_z(
    store: &CfdStore,
    d: NodeRef,
    psi: &EnergyFn,
    sigma: &PartialAssignment,
) -> Result<f64, OracleError> {
    Ok(enumerate(store, d)?.conditioned_z(psi, sigma))
}

pub fn brute_marginal(
    store: &CfdStore,
    d: NodeRef,
    psi: &EnergyFn,
    sigma: &PartialAssignment,
    z: VarId,
) -> Result<f64, OracleError> {
    enumerate(store, d)?.marginal(psi, sigma, z)
}

/// The minimizer the tie-break rule selects: descend from the root and, at a
/// case node whose two sides reach the same minimum, take the true branch.
/// Minima per node come from enumeration, not from the inference code.
pub fn tie_break_witness(store: &CfdStore, en: &Enumeration, psi: &EnergyFn) -> Option<Assignment> {
    let min_of = |n: NodeRef| {
        en.of(n).iter().map(|r| psi.energy_of(r)).fold(f64::INFINITY, f64::min)
    };
    if min_of(en.root) == f64::INFINITY {
        return None;
    }
    let mut support = Vec::new();
    let mut stack = vec![en.root];
    while let Some(n) = stack.pop() {
        match store.node(n) {
            Node::Case { var, hi, lo } => {
                let (h, l) = (psi.get(var) + min_of(hi), min_of(lo));
                if h <= l || ties(h, l) {
                    support.push(var);
                    stack.push(hi);
                } else {
                    stack.push(lo);
                }
            }
            Node::Factor { left, right } => {
                stack.push(left);
                stack.push(right);
            }
            Node::Unit | Node::Empty => {}
        }
    }
    Some(Assignment::from_vars(support))
}

fn ties(a: f64, b: f64) -> bool {
    a.is_finite() && b.is_finite() && (a - b).abs() <= 1e-12 * a.abs().max(b.abs()).max(1.0)
}

/// A diagram with exactly the given feasible set, branching on `vars` in
/// order. Variables that are false in every assignment are not mentioned.
/// Every support must be a subset of `vars`.
pub fn from_feasible_set(
    store: &mut CfdStore,
    vars: &[VarId],
    set: &[Assignment],
) -> Result<NodeRef, CfdError> {
    assert!(vars.len() <= 12, "set-to-diagram construction is for tiny instances");
    let items: Vec<Vec<VarId>> = set.iter().map(|r| r.support().to_vec()).collect();
    build(store, vars, items)
}

fn build(store: &mut CfdStore, vars: &[VarId], items: Vec<Vec<VarId>>) -> Result<NodeRef, CfdError> {
    let Some((&x, rest)) = vars.split_first() else {
        assert!(items.iter().all(Vec::is_empty), "support outside the given variables");
        return Ok(if items.is_empty() { NodeRef::EMPTY } else { NodeRef::UNIT });
    };
    let (mut hi, lo): (Vec<Vec<VarId>>, Vec<Vec<VarId>>) = items.into_iter().partition(|s| s.contains(&x));
    if hi.is_empty() {
        return build(store, rest, lo);
    }
    hi.iter_mut().for_each(|s| s.retain(|&v| v != x));
    let h = build(store, rest, hi)?;
    let l = build(store, rest, lo)?;
    store.mk_case(x, h, l)
}

/// Relative closeness of two log-domain sums: `|ln a − ln b| ≤ rel` is the
/// same as `a / b` being within `rel` of one, to first order.
pub fn log_close(a: f64, b: f64, rel: f64) -> bool {
    (a == f64::NEG_INFINITY && b == f64::NEG_INFINITY) || (a - b).abs() <= rel
}

/// `|a − b| ≤ rel · max(|a|, |b|)`.
pub fn rel_close(a: f64, b: f64, rel: f64) -> bool {
    a == b || (a - b).abs() <= rel * a.abs().max(b.abs())
}
