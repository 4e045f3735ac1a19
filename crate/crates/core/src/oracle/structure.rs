//! The sets of nodes an assignment leads to, contexts of a node, and
//! exhaustive checks of the structural facts the outside pass relies on.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt;

use super::{log_close, Enumeration, FeasibleSet, Limits, OracleError};
use crate::assignment::{Assignment, PartialAssignment};
use crate::inference::{self, EnergyFn};
use crate::logspace::log_sum_exp;
use crate::store::{CfdStore, Node, NodeRef, VarId};

/// Contexts `ρ↑D′`: feasible assignments with the variables of `D′` cleared.
pub type ContextSet = FeasibleSet;

/// Relative tolerance for the numeric checks (outside values and the
/// case-node sum).
pub const NUMERIC_TOL: f64 = 1e-9;

/// Nodes `ρ` leads to from `d`, with the edges that were followed: the taken
/// branch of a case, both children of a factor.
fn walk(store: &CfdStore, d: NodeRef, rho: &Assignment) -> (BTreeSet<NodeRef>, Vec<(NodeRef, NodeRef)>) {
    let mut seen = BTreeSet::new();
    let mut edges = Vec::new();
    let mut stack = vec![d];
    while let Some(n) = stack.pop() {
        if !seen.insert(n) {
            continue;
        }
        match store.node(n) {
            Node::Case { var, hi, lo } => {
                let c = if rho.contains(var) { hi } else { lo };
                edges.push((n, c));
                stack.push(c);
            }
            Node::Factor { left, right } => {
                edges.push((n, left));
                edges.push((n, right));
                stack.push(left);
                stack.push(right);
            }
            Node::Unit | Node::Empty => {}
        }
    }
    (seen, edges)
}

/// `γ(D, ρ)`.
pub fn gamma(store: &CfdStore, d: NodeRef, rho: &Assignment) -> BTreeSet<NodeRef> {
    walk(store, d, rho).0
}

/// `F(D′, D)`: feasible assignments of `D` that lead to `D′`.
pub fn leads_to(store: &CfdStore, sub: NodeRef, en: &Enumeration, d: NodeRef) -> FeasibleSet {
    FeasibleSet::from_assignments(en.of(d).iter().filter(|r| gamma(store, d, r).contains(&sub)).cloned())
}

/// `O(D′, D)`.
pub fn contexts(store: &CfdStore, sub: NodeRef, en: &Enumeration, d: NodeRef) -> ContextSet {
    let vars = store.vars(sub);
    FeasibleSet::from_assignments(leads_to(store, sub, en, d).iter().map(|r| r.without(vars)))
}

/// `ln Σ_{σ ∈ O(D′, D)} e^{-Ψ(σ)}`.
pub fn brute_outside(store: &CfdStore, sub: NodeRef, d: NodeRef, psi: &EnergyFn) -> Result<f64, OracleError> {
    let en = Enumeration::new(store, d, Limits::default())?;
    Ok(log_sum_exp(contexts(store, sub, &en, d).iter().map(|s| -psi.energy_of(s))))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Property {
    /// An open node an assignment leads to is reached by exactly one path of
    /// followed edges.
    SinglePath,
    /// A feasible assignment never leads to `empty`.
    EmptyUnreached,
    /// If `ρ` leads to `D′` then `ρ↓D′ ∈ F(D′)`.
    RestrictionFeasible,
    /// A context joined with any member of `F(D′)` leads to `D′`.
    ContextExtension,
    /// `F(D′, D)` is exactly the join of `O(D′, D)` and `F(D′)`.
    ContextDecomposition,
    /// Every true variable of a feasible assignment is cased on along its
    /// path.
    PositiveVarHasCase,
    /// At most one case node per variable is reached.
    CaseVarUnique,
    /// The outside pass equals the total weight of the contexts, for open
    /// nodes with a nonempty feasible set.
    OutsideMatchesContexts,
    /// The sum over case nodes equals the conditioned partition function
    /// with the variable set to 1.
    CaseSumMatchesConditioned,
}

impl fmt::Display for Property {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Counterexample {
    pub property: Property,
    pub node: Option<NodeRef>,
    pub assignment: Option<Assignment>,
    pub detail: String,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct StructureReport {
    pub assignments: usize,
    pub nodes: usize,
    pub checks: usize,
    pub counterexamples: Vec<Counterexample>,
}

impl StructureReport {
    pub fn is_clean(&self) -> bool {
        self.counterexamples.is_empty()
    }

    fn fail(&mut self, property: Property, node: Option<NodeRef>, assignment: Option<&Assignment>, detail: String) {
        self.counterexamples.push(Counterexample { property, node, assignment: assignment.cloned(), detail });
    }
}

/// Checks every property over all `ρ ∈ F(D)` and all `D′ ⪯ D`. The numeric
/// properties are checked only when an energy function is given.
pub fn check_structural_facts(
    store: &CfdStore,
    d: NodeRef,
    psi: Option<&EnergyFn>,
) -> Result<StructureReport, OracleError> {
    check_structural_facts_with(store, d, psi, Limits::default())
}

pub fn check_structural_facts_with(
    store: &CfdStore,
    d: NodeRef,
    psi: Option<&EnergyFn>,
    limits: Limits,
) -> Result<StructureReport, OracleError> {
    let en = Enumeration::new(store, d, limits)?;
    let nodes = store.reachable(d);
    let mut report = StructureReport { assignments: en.root().len(), nodes: nodes.len(), ..Default::default() };
    let mut leads: HashMap<NodeRef, Vec<&Assignment>> = nodes.iter().map(|&n| (n, Vec::new())).collect();

    for rho in en.root() {
        let (reached, edges) = walk(store, d, rho);
        report.checks += 4;
        if reached.contains(&NodeRef::EMPTY) {
            report.fail(Property::EmptyUnreached, None, Some(rho), "empty is reached".into());
        }

        let mut paths: HashMap<NodeRef, u64> = HashMap::from([(d, 1)]);
        let mut by_parent: HashMap<NodeRef, Vec<NodeRef>> = HashMap::new();
        for &(p, c) in &edges {
            by_parent.entry(p).or_default().push(c);
        }
        for &n in reached.iter().rev() {
            let here = paths.get(&n).copied().unwrap_or(0);
            for &c in by_parent.get(&n).map(Vec::as_slice).unwrap_or(&[]) {
                *paths.entry(c).or_default() += here;
            }
        }
        for &n in &reached {
            if store.is_open(n) && paths[&n] != 1 {
                report.fail(Property::SinglePath, Some(n), Some(rho), format!("{} paths", paths[&n]));
            }
        }

        let mut cases: HashMap<VarId, usize> = HashMap::new();
        for &n in &reached {
            if let Node::Case { var, .. } = store.node(n) {
                *cases.entry(var).or_default() += 1;
            }
        }
        for z in rho.iter() {
            if !cases.contains_key(&z) {
                let detail = format!("no case on {}", store.var_name(z));
                report.fail(Property::PositiveVarHasCase, None, Some(rho), detail);
            }
        }
        for (&z, &count) in &cases {
            if count > 1 {
                let detail = format!("{count} case nodes on {}", store.var_name(z));
                report.fail(Property::CaseVarUnique, None, Some(rho), detail);
            }
        }

        for n in reached {
            if let Some(v) = leads.get_mut(&n) {
                v.push(rho);
            }
        }
    }

    let outside = psi.map(|psi| {
        let ins = inference::inside(store, d, psi);
        let outs = inference::outside(store, d, psi, &ins);
        (ins, outs)
    });

    for &n in &nodes {
        let vars = store.vars(n);
        let here = &leads[&n];
        let own = en.of(n);
        for rho in here {
            report.checks += 1;
            if !own.contains(&rho.restrict(vars)) {
                report.fail(Property::RestrictionFeasible, Some(n), Some(rho), "restriction infeasible".into());
            }
        }

        let ctx: BTreeSet<Assignment> = here.iter().map(|r| r.without(vars)).collect();
        let leading: HashSet<&Assignment> = here.iter().copied().collect();
        report.checks += 2;
        if ctx.len().saturating_mul(own.len()) > limits.max_assignments.max(here.len()) {
            let detail = format!("{} contexts × {} assignments exceeds |F(D′, D)| = {}", ctx.len(), own.len(), here.len());
            report.fail(Property::ContextDecomposition, Some(n), None, detail);
        } else {
            let mut joined = HashSet::new();
            for s in &ctx {
                for r in own {
                    let j = s.or(r);
                    if !leading.contains(&j) {
                        report.fail(Property::ContextExtension, Some(n), Some(&j), "join does not lead here".into());
                    }
                    joined.insert(j);
                }
            }
            if joined.len() != leading.len() {
                let detail = format!("{} joins vs {} assignments", joined.len(), leading.len());
                report.fail(Property::ContextDecomposition, Some(n), None, detail);
            }
        }

        if let (Some(psi), Some((_, outs))) = (psi, &outside) {
            // With F(D′) empty no assignment leads to D′, so the context
            // sum is zero while the recursion still assigns a weight.
            if store.is_open(n) && !own.is_empty() {
                report.checks += 1;
                let brute = log_sum_exp(ctx.iter().map(|s| -psi.energy_of(s)));
                let fast = outs.get(n).expect("open node has an outside value");
                if !log_close(fast, brute, NUMERIC_TOL) {
                    let detail = format!("outside {fast} vs contexts {brute}");
                    report.fail(Property::OutsideMatchesContexts, Some(n), None, detail);
                }
            }
        }
    }

    if let (Some(psi), Some((ins, outs))) = (psi, &outside) {
        for (z, fast) in inference::case_log_numerators(store, psi, ins, outs) {
            report.checks += 1;
            let sigma = PartialAssignment::new().with(z, true);
            let brute = en.root().conditioned_z(psi, &sigma);
            if !log_close(fast, brute, NUMERIC_TOL) {
                let detail = format!("{}: case sum {fast} vs {brute}", store.var_name(z));
                report.fail(Property::CaseSumMatchesConditioned, None, None, detail);
            }
        }
    }
    Ok(report)
}
