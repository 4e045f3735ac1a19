//! Partition functions, minimum-energy assignments, conditioning and
//! all-variable marginals on a diagram with per-variable energies.
//!
//! Every pass walks the reachable nodes of the diagram exactly once, either
//! bottom-up (inside, Viterbi, conditioning) or top-down (outside). Sum-product
//! quantities are kept as natural logarithms; Viterbi works on raw energies.

use std::collections::{BTreeMap, HashMap};

use fixedbitset::FixedBitSet;
use thiserror::Error;

use crate::assignment::{Assignment, PartialAssignment};
use crate::logspace::log_add_exp;
use crate::store::{CfdStore, Node, NodeRef, VarId};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum InferenceError {
    #[error("assignment is not in the feasible set of the diagram")]
    InfeasibleAssignment,
    #[error("conditioning event has zero probability")]
    ConditionInfeasible,
}

/// Per-variable energies. Variables without an entry get the default
/// energy, which is 0 unless set otherwise.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct EnergyFn {
    energies: HashMap<VarId, f64>,
    default: f64,
}

impl EnergyFn {
    /// The all-zero energy function.
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_default(default: f64) -> Self {
        assert!(default.is_finite(), "energies must be finite");
        EnergyFn { energies: HashMap::new(), default }
    }

    /// # Panics
    /// If `energy` is NaN or infinite.
    pub fn set(&mut self, v: VarId, energy: f64) {
        assert!(energy.is_finite(), "energies must be finite");
        self.energies.insert(v, energy);
    }

    pub fn get(&self, v: VarId) -> f64 {
        self.energies.get(&v).copied().unwrap_or(self.default)
    }

    pub fn default_energy(&self) -> f64 {
        self.default
    }

    /// Explicit entries, in no particular order.
    pub fn entries(&self) -> impl Iterator<Item = (VarId, f64)> + '_ {
        self.energies.iter().map(|(&v, &e)| (v, e))
    }

    /// `Ψ(ρ)`: the summed energy of the true variables, in support order.
    pub fn energy_of(&self, rho: &Assignment) -> f64 {
        rho.iter().map(|v| self.get(v)).sum()
    }
}

/// Reachable nodes of one diagram, bottom-up, with a reverse index.
#[derive(Clone, Debug)]
pub struct DiagramIndex {
    root: NodeRef,
    order: Vec<NodeRef>,
    pos: HashMap<NodeRef, usize>,
}

impl DiagramIndex {
    pub fn new(store: &CfdStore, root: NodeRef) -> Self {
        let order = store.reachable(root);
        let pos = order.iter().enumerate().map(|(i, &n)| (n, i)).collect();
        DiagramIndex { root, order, pos }
    }

    pub fn root(&self) -> NodeRef {
        self.root
    }

    /// Children before parents; the root is last.
    pub fn nodes(&self) -> &[NodeRef] {
        &self.order
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    pub fn position(&self, n: NodeRef) -> Option<usize> {
        self.pos.get(&n).copied()
    }

    fn at(&self, n: NodeRef) -> usize {
        self.pos[&n]
    }
}

/// Log partition function of every node reachable from a root.
#[derive(Clone, Debug)]
pub struct InsideTable {
    index: DiagramIndex,
    log_z: Vec<f64>,
    visits: usize,
}

impl InsideTable {
    pub fn root(&self) -> NodeRef {
        self.index.root
    }

    /// `ln Z` of the root.
    pub fn log_z(&self) -> f64 {
        *self.log_z.last().expect("a diagram has at least one node")
    }

    pub fn get(&self, n: NodeRef) -> Option<f64> {
        self.index.position(n).map(|i| self.log_z[i])
    }

    pub fn index(&self) -> &DiagramIndex {
        &self.index
    }

    /// Nodes evaluated by the pass that built this table.
    pub fn visits(&self) -> usize {
        self.visits
    }
}

/// Log outside values. Only open nodes carry one.
#[derive(Clone, Debug)]
pub struct OutsideTable {
    index: DiagramIndex,
    log_o: Vec<Option<f64>>,
    visits: usize,
}

impl OutsideTable {
    pub fn get(&self, n: NodeRef) -> Option<f64> {
        self.index.position(n).and_then(|i| self.log_o[i])
    }

    pub fn visits(&self) -> usize {
        self.visits
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ViterbiResult {
    /// Minimum energy over the feasible set; `+inf` when it is empty.
    pub energy: f64,
    pub witness: Option<Assignment>,
    pub visits: usize,
}

pub fn inside(store: &CfdStore, d: NodeRef, psi: &EnergyFn) -> InsideTable {
    let index = DiagramIndex::new(store, d);
    let mut log_z = Vec::with_capacity(index.len());
    let mut visits = 0;
    for &n in index.nodes() {
        visits += 1;
        let v = match store.node(n) {
            Node::Unit => 0.0,
            Node::Empty => f64::NEG_INFINITY,
            Node::Case { var, hi, lo } => log_add_exp(
                -psi.get(var) + log_z[index.at(hi)],
                log_z[index.at(lo)],
            ),
            Node::Factor { left, right } => {
                let (l, r): (f64, f64) = (log_z[index.at(left)], log_z[index.at(right)]);
                if l == f64::NEG_INFINITY || r == f64::NEG_INFINITY {
                    f64::NEG_INFINITY
                } else {
                    l + r
                }
            }
        };
        log_z.push(v);
    }
    InsideTable { index, log_z, visits }
}

/// `ln Z(D, Ψ)`.
pub fn z(store: &CfdStore, d: NodeRef, psi: &EnergyFn) -> f64 {
    inside(store, d, psi).log_z()
}

/// Gibbs probability of a feasible assignment.
pub fn probability(
    store: &CfdStore,
    d: NodeRef,
    psi: &EnergyFn,
    rho: &Assignment,
) -> Result<f64, InferenceError> {
    if !store.contains(d, rho) {
        return Err(InferenceError::InfeasibleAssignment);
    }
    Ok((-psi.energy_of(rho) - z(store, d, psi)).exp())
}

/// Minimum energy and a minimizing assignment.
///
/// On equal energies at a case node the true branch wins.
pub fn viterbi(store: &CfdStore, d: NodeRef, psi: &EnergyFn) -> ViterbiResult {
    let index = DiagramIndex::new(store, d);
    let mut best = Vec::with_capacity(index.len());
    let mut take_hi = Vec::with_capacity(index.len());
    let mut visits = 0;
    for &n in index.nodes() {
        visits += 1;
        let (e, hi_choice) = match store.node(n) {
            Node::Unit => (0.0, false),
            Node::Empty => (f64::INFINITY, false),
            Node::Case { var, hi, lo } => {
                let via_hi = psi.get(var) + best[index.at(hi)];
                let via_lo = best[index.at(lo)];
                if via_hi <= via_lo {
                    (via_hi, true)
                } else {
                    (via_lo, false)
                }
            }
            Node::Factor { left, right } => (best[index.at(left)] + best[index.at(right)], false),
        };
        best.push(e);
        take_hi.push(hi_choice);
    }
    let energy = *best.last().expect("nonempty");
    if energy == f64::INFINITY {
        return ViterbiResult { energy, witness: None, visits };
    }
    let mut support = Vec::new();
    let mut stack = vec![d];
    while let Some(n) = stack.pop() {
        match store.node(n) {
            Node::Unit => {}
            Node::Empty => unreachable!("finite energy never routes through empty"),
            Node::Case { var, hi, lo } => {
                if take_hi[index.at(n)] {
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
        }
    }
    ViterbiResult { energy, witness: Some(Assignment::from_vars(support)), visits }
}

/// `ln Z(D, Ψ, σ)`: the log partition function restricted to feasible
/// assignments that agree with `sigma`.
///
/// Runs in `O(|D| · |σ|)`: each node carries a bitset of the σ-positive
/// variables it mentions, so the zero-suppression checks at case nodes are
/// word-parallel set differences.
pub fn conditioned_z(store: &CfdStore, d: NodeRef, psi: &EnergyFn, sigma: &PartialAssignment) -> f64 {
    ConditionedPass::run(store, d, psi, sigma).log_z
}

struct ConditionedPass {
    log_z: f64,
    visits: usize,
}

impl ConditionedPass {
    fn run(store: &CfdStore, d: NodeRef, psi: &EnergyFn, sigma: &PartialAssignment) -> Self {
        let positives: Vec<VarId> = sigma.positives().collect();
        let bit_of: HashMap<VarId, usize> =
            positives.iter().enumerate().map(|(i, &v)| (v, i)).collect();
        let width = positives.len();

        let index = DiagramIndex::new(store, d);
        let mut log_z: Vec<f64> = Vec::with_capacity(index.len());
        let mut bits: Vec<FixedBitSet> = Vec::with_capacity(index.len());
        let mut visits = 0;

        // Some σ-positive variable other than `z` occurs under `parent` but
        // not under `child`.
        let loses_positive = |parent: &FixedBitSet, child: &FixedBitSet, z: Option<usize>| {
            parent.difference(child).any(|b| Some(b) != z)
        };

        for &n in index.nodes() {
            visits += 1;
            let (value, set) = match store.node(n) {
                Node::Unit => (0.0, FixedBitSet::with_capacity(width)),
                Node::Empty => (f64::NEG_INFINITY, FixedBitSet::with_capacity(width)),
                Node::Factor { left, right } => {
                    let (l, r) = (index.at(left), index.at(right));
                    let mut set = bits[l].clone();
                    set.union_with(&bits[r]);
                    let value = if log_z[l] == f64::NEG_INFINITY || log_z[r] == f64::NEG_INFINITY {
                        f64::NEG_INFINITY
                    } else {
                        log_z[l] + log_z[r]
                    };
                    (value, set)
                }
                Node::Case { var, hi, lo } => {
                    let (h, l) = (index.at(hi), index.at(lo));
                    let own_bit = bit_of.get(&var).copied();
                    let mut set = bits[h].clone();
                    set.union_with(&bits[l]);
                    if let Some(b) = own_bit {
                        set.insert(b);
                    }
                    let binding = sigma.get(var);
                    let via_hi = if binding == Some(false) || loses_positive(&set, &bits[h], own_bit) {
                        f64::NEG_INFINITY
                    } else {
                        -psi.get(var) + log_z[h]
                    };
                    let via_lo = if binding == Some(true) || loses_positive(&set, &bits[l], own_bit) {
                        f64::NEG_INFINITY
                    } else {
                        log_z[l]
                    };
                    (log_add_exp(via_hi, via_lo), set)
                }
            };
            log_z.push(value);
            bits.push(set);
        }

        let root_bits = bits.last().expect("nonempty");
        // Feasible supports lie inside V(D): a σ-positive variable that does
        // not occur in D rules out every assignment.
        let log_z = if root_bits.count_ones(..) < width {
            f64::NEG_INFINITY
        } else {
            *log_z.last().expect("nonempty")
        };
        ConditionedPass { log_z, visits }
    }
}

/// `P(z = 1 | D, Ψ, σ)`.
pub fn marginal(
    store: &CfdStore,
    d: NodeRef,
    psi: &EnergyFn,
    sigma: &PartialAssignment,
    z: VarId,
) -> Result<f64, InferenceError> {
    let denom = conditioned_z(store, d, psi, sigma);
    if denom == f64::NEG_INFINITY {
        return Err(InferenceError::ConditionInfeasible);
    }
    if sigma.get(z) == Some(false) {
        return Ok(0.0);
    }
    let num = conditioned_z(store, d, psi, &sigma.with(z, true));
    Ok((num - denom).exp().min(1.0))
}

/// Top-down outside pass.
///
/// Each parent pushes its contribution into each child slot separately, so
/// a node that is both children of one case receives both terms. Closed
/// nodes get no entry.
pub fn outside(store: &CfdStore, d: NodeRef, psi: &EnergyFn, inside: &InsideTable) -> OutsideTable {
    assert_eq!(inside.root(), d, "inside table belongs to a different diagram");
    let index = inside.index.clone();
    let mut log_o: Vec<Option<f64>> = index
        .nodes()
        .iter()
        .map(|&n| store.is_open(n).then_some(f64::NEG_INFINITY))
        .collect();
    if let Some(root) = log_o.last_mut().and_then(Option::as_mut) {
        *root = 0.0;
    }
    let mut visits = 0;

    let push = |slots: &mut Vec<Option<f64>>, child: NodeRef, contribution: f64| {
        if let Some(slot) = slots[index.at(child)].as_mut() {
            *slot = log_add_exp(*slot, contribution);
        }
    };

    for (i, &n) in index.nodes().iter().enumerate().rev() {
        visits += 1;
        let Some(here) = log_o[i] else { continue };
        match store.node(n) {
            Node::Case { var, hi, lo } => {
                push(&mut log_o, hi, here - psi.get(var));
                push(&mut log_o, lo, here);
            }
            Node::Factor { left, right } => {
                push(&mut log_o, left, here + inside.log_z[index.at(right)]);
                push(&mut log_o, right, here + inside.log_z[index.at(left)]);
            }
            Node::Unit | Node::Empty => {}
        }
    }
    OutsideTable { index, log_o, visits }
}

/// For every variable `z` of the diagram, `ln Z(D, Ψ, ∅[z := 1])` as the sum
/// over case nodes on `z` of outside × `e^{-Ψ(z)}` × inside of the true child.
pub fn case_log_numerators(
    store: &CfdStore,
    psi: &EnergyFn,
    inside: &InsideTable,
    outside: &OutsideTable,
) -> BTreeMap<VarId, f64> {
    let mut out: BTreeMap<VarId, f64> = store
        .vars(inside.root())
        .iter()
        .map(|&v| (v, f64::NEG_INFINITY))
        .collect();
    for &n in inside.index.nodes() {
        if let Node::Case { var, hi, .. } = store.node(n) {
            let o = outside.get(n).expect("case nodes are open");
            let term = o - psi.get(var) + inside.get(hi).expect("child is reachable");
            let slot = out.get_mut(&var).expect("case variable occurs in the root");
            *slot = log_add_exp(*slot, term);
        }
    }
    out
}

/// `P(z = 1 | D, Ψ)` for every variable of the diagram, from one inside
/// pass, one outside pass and one sweep over the case nodes.
pub fn all_marginals(
    store: &CfdStore,
    d: NodeRef,
    psi: &EnergyFn,
) -> Result<BTreeMap<VarId, f64>, InferenceError> {
    let ins = inside(store, d, psi);
    let log_z = ins.log_z();
    if log_z == f64::NEG_INFINITY {
        return Err(InferenceError::ConditionInfeasible);
    }
    let outs = outside(store, d, psi, &ins);
    Ok(case_log_numerators(store, psi, &ins, &outs)
        .into_iter()
        .map(|(v, num)| (v, (num - log_z).exp().min(1.0)))
        .collect())
}

/// Node visits made by [`conditioned_z`]; exposed for the linear-time tests.
pub fn conditioned_visits(store: &CfdStore, d: NodeRef, psi: &EnergyFn, sigma: &PartialAssignment) -> usize {
    ConditionedPass::run(store, d, psi, sigma).visits
}
