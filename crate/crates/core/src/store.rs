//! Hash-consed node store for case-factor diagrams.
//!
//! Every diagram lives in a [`CfdStore`]. Nodes are appended and never
//! mutated, so a [`NodeRef`] stays valid for the lifetime of the store and
//! children always carry smaller indices than their parents. Sorting the
//! reachable nodes of a diagram by index therefore yields a bottom-up
//! (children first) topological order, which every pass in this crate relies
//! on.
//!
//! Each node caches the exact set of variables occurring below it. The sets
//! are persistent ordered sets, so a parent shares structure with its largest
//! child instead of copying it.

use std::collections::HashMap;
use std::fmt;

use im::OrdSet;
use thiserror::Error;

use crate::assignment::Assignment;

/// Dense identifier of a Boolean variable interned in a [`CfdStore`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct VarId(u32);

impl VarId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for VarId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "v{}", self.0)
    }
}

/// Index of a node in the store's node table.
///
/// Hash-consing makes two refs equal exactly when the diagrams they denote
/// are structurally identical.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeRef(u32);

impl NodeRef {
    pub const EMPTY: NodeRef = NodeRef(0);
    pub const UNIT: NodeRef = NodeRef(1);

    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for NodeRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Node {
    /// `case(var, hi, lo)`: `hi` is taken when `var` is true.
    Case { var: VarId, hi: NodeRef, lo: NodeRef },
    /// Independent product of two variable-disjoint diagrams.
    Factor { left: NodeRef, right: NodeRef },
    Unit,
    Empty,
}

pub type VarSet = OrdSet<VarId>;

/// Whether node constructors enforce the structural side conditions.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Mode {
    #[default]
    Checked,
    /// Constructors skip the side conditions; run [`CfdStore::validate`]
    /// once the diagram is complete.
    Unchecked,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ViolationKind {
    /// The case variable occurs in one of the case's children.
    CaseVarInChild,
    /// Both factor children mention the same variable.
    SharedFactorVar,
}

/// A broken structural constraint, naming the offending variable.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Violation {
    /// The offending node, when it exists in the store.
    pub node: Option<NodeRef>,
    pub kind: ViolationKind,
    pub var: VarId,
    pub var_name: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let what = match self.kind {
            ViolationKind::CaseVarInChild => "case variable occurs in a child",
            ViolationKind::SharedFactorVar => "factor children share a variable",
        };
        match self.node {
            Some(n) => write!(f, "node {n}: {what} ({:?})", self.var_name),
            None => write!(f, "{what} ({:?})", self.var_name),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CfdError {
    #[error("constraint violation: {0}")]
    ConstraintViolation(Violation),
}

/// Append-only, hash-consed table of diagram nodes.
#[derive(Clone, Debug)]
pub struct CfdStore {
    nodes: Vec<Node>,
    varsets: Vec<VarSet>,
    unique: HashMap<Node, NodeRef>,
    names: Vec<String>,
    name_index: HashMap<String, VarId>,
    mode: Mode,
}

impl Default for CfdStore {
    fn default() -> Self {
        Self::new()
    }
}

impl CfdStore {
    pub fn new() -> Self {
        Self::with_mode(Mode::Checked)
    }

    pub fn with_mode(mode: Mode) -> Self {
        let mut store = CfdStore {
            nodes: Vec::new(),
            varsets: Vec::new(),
            unique: HashMap::new(),
            names: Vec::new(),
            name_index: HashMap::new(),
            mode,
        };
        assert_eq!(store.push(Node::Empty, VarSet::new()), NodeRef::EMPTY);
        assert_eq!(store.push(Node::Unit, VarSet::new()), NodeRef::UNIT);
        store
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn set_mode(&mut self, mode: Mode) {
        self.mode = mode;
    }

    /// Interns `name`, returning the existing id if it is already known.
    pub fn var(&mut self, name: &str) -> VarId {
        if let Some(&v) = self.name_index.get(name) {
            return v;
        }
        let v = VarId(u32::try_from(self.names.len()).expect("variable table overflow"));
        self.names.push(name.to_owned());
        self.name_index.insert(name.to_owned(), v);
        v
    }

    pub fn lookup_var(&self, name: &str) -> Option<VarId> {
        self.name_index.get(name).copied()
    }

    pub fn var_name(&self, v: VarId) -> &str {
        &self.names[v.index()]
    }

    pub fn num_vars(&self) -> usize {
        self.names.len()
    }

    /// Total number of nodes in the store, constants included.
    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn node(&self, n: NodeRef) -> Node {
        self.nodes[n.index()]
    }

    pub fn mk_unit(&self) -> NodeRef {
        NodeRef::UNIT
    }

    pub fn mk_empty(&self) -> NodeRef {
        NodeRef::EMPTY
    }

    pub fn mk_case(&mut self, var: VarId, hi: NodeRef, lo: NodeRef) -> Result<NodeRef, CfdError> {
        let node = Node::Case { var, hi, lo };
        if let Some(&n) = self.unique.get(&node) {
            return Ok(n);
        }
        if self.mode == Mode::Checked
            && (self.varsets[hi.index()].contains(&var) || self.varsets[lo.index()].contains(&var))
        {
            return Err(CfdError::ConstraintViolation(self.violation(
                None,
                ViolationKind::CaseVarInChild,
                var,
            )));
        }
        let mut vars = if hi == lo {
            self.varsets[hi.index()].clone()
        } else {
            union(&self.varsets[hi.index()], &self.varsets[lo.index()])
        };
        vars.insert(var);
        Ok(self.push(node, vars))
    }

    pub fn mk_factor(&mut self, left: NodeRef, right: NodeRef) -> Result<NodeRef, CfdError> {
        let node = Node::Factor { left, right };
        if let Some(&n) = self.unique.get(&node) {
            return Ok(n);
        }
        let (l, r) = (&self.varsets[left.index()], &self.varsets[right.index()]);
        if self.mode == Mode::Checked {
            if let Some(v) = first_shared(l, r) {
                return Err(CfdError::ConstraintViolation(self.violation(
                    None,
                    ViolationKind::SharedFactorVar,
                    v,
                )));
            }
        }
        let vars = union(l, r);
        Ok(self.push(node, vars))
    }

    /// Builds the right-nested chain `case(z1, D1, case(z2, D2, ... empty))`.
    ///
    /// An empty branch list yields `empty`.
    pub fn multi_case(&mut self, branches: &[(VarId, NodeRef)]) -> Result<NodeRef, CfdError> {
        let mut acc = NodeRef::EMPTY;
        for &(var, hi) in branches.iter().rev() {
            acc = self.mk_case(var, hi, acc)?;
        }
        Ok(acc)
    }

    /// The variables occurring in the subdiagram rooted at `n`.
    pub fn vars(&self, n: NodeRef) -> &VarSet {
        &self.varsets[n.index()]
    }

    /// A node is open when its subdiagram mentions at least one variable.
    pub fn is_open(&self, n: NodeRef) -> bool {
        !self.varsets[n.index()].is_empty()
    }

    /// Distinct nodes reachable from `n`, sorted so that children precede
    /// parents. `n` itself is last.
    pub fn reachable(&self, n: NodeRef) -> Vec<NodeRef> {
        let mut seen = vec![false; n.index() + 1];
        let mut stack = vec![n];
        let mut out = Vec::new();
        seen[n.index()] = true;
        while let Some(m) = stack.pop() {
            out.push(m);
            for c in self.children(m) {
                if !seen[c.index()] {
                    seen[c.index()] = true;
                    stack.push(c);
                }
            }
        }
        out.sort_unstable();
        out
    }

    /// Number of distinct subexpressions of `n`, including `n` and any
    /// reachable `unit`/`empty` leaves.
    pub fn size(&self, n: NodeRef) -> usize {
        self.reachable(n).len()
    }

    pub fn children(&self, n: NodeRef) -> impl Iterator<Item = NodeRef> {
        let (a, b) = match self.nodes[n.index()] {
            Node::Case { hi, lo, .. } => (Some(hi), Some(lo)),
            Node::Factor { left, right } => (Some(left), Some(right)),
            Node::Unit | Node::Empty => (None, None),
        };
        a.into_iter().chain(b)
    }

    /// Re-checks the side conditions on every node reachable from `n`.
    pub fn validate(&self, n: NodeRef) -> Vec<Violation> {
        let mut out = Vec::new();
        for m in self.reachable(n) {
            match self.nodes[m.index()] {
                Node::Case { var, hi, lo } => {
                    if self.vars(hi).contains(&var) || self.vars(lo).contains(&var) {
                        out.push(self.violation(Some(m), ViolationKind::CaseVarInChild, var));
                    }
                }
                Node::Factor { left, right } => {
                    if let Some(v) = first_shared(self.vars(left), self.vars(right)) {
                        out.push(self.violation(Some(m), ViolationKind::SharedFactorVar, v));
                    }
                }
                Node::Unit | Node::Empty => {}
            }
        }
        out
    }

    /// Exact membership test `rho ∈ F(n)`.
    pub fn contains(&self, n: NodeRef, rho: &Assignment) -> bool {
        self.member(n, rho.support())
    }

    fn member(&self, n: NodeRef, support: &[VarId]) -> bool {
        match self.nodes[n.index()] {
            Node::Unit => support.is_empty(),
            Node::Empty => false,
            Node::Case { var, hi, lo } => match support.binary_search(&var) {
                Ok(pos) => {
                    let mut rest = support.to_vec();
                    rest.remove(pos);
                    self.member(hi, &rest)
                }
                Err(_) => self.member(lo, support),
            },
            Node::Factor { left, right } => {
                let lv = self.vars(left);
                let (l, r): (Vec<VarId>, Vec<VarId>) =
                    support.iter().partition(|v| lv.contains(v));
                self.member(left, &l) && self.member(right, &r)
            }
        }
    }

    fn push(&mut self, node: Node, vars: VarSet) -> NodeRef {
        let n = NodeRef(u32::try_from(self.nodes.len()).expect("node table overflow"));
        self.nodes.push(node);
        self.varsets.push(vars);
        self.unique.insert(node, n);
        n
    }

    fn violation(&self, node: Option<NodeRef>, kind: ViolationKind, var: VarId) -> Violation {
        Violation { node, kind, var, var_name: self.var_name(var).to_owned() }
    }
}

fn union(a: &VarSet, b: &VarSet) -> VarSet {
    let (big, small) = if a.len() >= b.len() { (a, b) } else { (b, a) };
    let mut out = big.clone();
    for v in small {
        out.insert(*v);
    }
    out
}

fn first_shared(a: &VarSet, b: &VarSet) -> Option<VarId> {
    let (big, small) = if a.len() >= b.len() { (a, b) } else { (b, a) };
    small.iter().find(|v| big.contains(v)).copied()
}
