//! Finite-support truth assignments and partial assignments.

use std::collections::BTreeMap;

use crate::store::{VarId, VarSet};

/// A truth assignment given by its support: the variables set to 1.
/// Every other variable is 0.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Assignment(Vec<VarId>);

impl Assignment {
    /// The all-false assignment.
    pub fn empty() -> Self {
        Assignment(Vec::new())
    }

    pub fn from_vars(vars: impl IntoIterator<Item = VarId>) -> Self {
        let mut v: Vec<VarId> = vars.into_iter().collect();
        v.sort_unstable();
        v.dedup();
        Assignment(v)
    }

    /// Sorted support.
    pub fn support(&self) -> &[VarId] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, v: VarId) -> bool {
        self.0.binary_search(&v).is_ok()
    }

    /// `self[v := 1]`.
    pub fn with(&self, v: VarId) -> Self {
        match self.0.binary_search(&v) {
            Ok(_) => self.clone(),
            Err(pos) => {
                let mut out = self.0.clone();
                out.insert(pos, v);
                Assignment(out)
            }
        }
    }

    /// Pointwise or.
    pub fn or(&self, other: &Assignment) -> Self {
        let (mut i, mut j) = (0, 0);
        let (a, b) = (&self.0, &other.0);
        let mut out = Vec::with_capacity(a.len() + b.len());
        while i < a.len() && j < b.len() {
            match a[i].cmp(&b[j]) {
                std::cmp::Ordering::Less => {
                    out.push(a[i]);
                    i += 1;
                }
                std::cmp::Ordering::Greater => {
                    out.push(b[j]);
                    j += 1;
                }
                std::cmp::Ordering::Equal => {
                    out.push(a[i]);
                    i += 1;
                    j += 1;
                }
            }
        }
        out.extend_from_slice(&a[i..]);
        out.extend_from_slice(&b[j..]);
        Assignment(out)
    }

    /// Restriction to the variables in `vars`.
    pub fn restrict(&self, vars: &VarSet) -> Self {
        Assignment(self.0.iter().copied().filter(|v| vars.contains(v)).collect())
    }

    /// Restriction to the variables outside `vars`.
    pub fn without(&self, vars: &VarSet) -> Self {
        Assignment(self.0.iter().copied().filter(|v| !vars.contains(v)).collect())
    }

    pub fn is_subset_of(&self, vars: &VarSet) -> bool {
        self.0.iter().all(|v| vars.contains(v))
    }

    pub fn iter(&self) -> impl Iterator<Item = VarId> + '_ {
        self.0.iter().copied()
    }
}

impl FromIterator<VarId> for Assignment {
    fn from_iter<I: IntoIterator<Item = VarId>>(iter: I) -> Self {
        Assignment::from_vars(iter)
    }
}

/// A partial truth assignment: a finite map from variables to {0, 1}.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct PartialAssignment(BTreeMap<VarId, bool>);

impl PartialAssignment {
    pub fn new() -> Self {
        Self::default()
    }

    /// Binds `v`, replacing any earlier binding; returns the previous value.
    pub fn set(&mut self, v: VarId, value: bool) -> Option<bool> {
        self.0.insert(v, value)
    }

    /// `self[v := value]`.
    pub fn with(&self, v: VarId, value: bool) -> Self {
        let mut out = self.clone();
        out.set(v, value);
        out
    }

    pub fn get(&self, v: VarId) -> Option<bool> {
        self.0.get(&v).copied()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (VarId, bool)> + '_ {
        self.0.iter().map(|(&v, &b)| (v, b))
    }

    /// Variables bound to 1, ascending.
    pub fn positives(&self) -> impl Iterator<Item = VarId> + '_ {
        self.iter().filter(|&(_, b)| b).map(|(v, _)| v)
    }

    /// `self ⊑ rho`: every binding agrees with `rho`.
    pub fn admits(&self, rho: &Assignment) -> bool {
        self.iter().all(|(v, b)| rho.contains(v) == b)
    }
}

impl FromIterator<(VarId, bool)> for PartialAssignment {
    fn from_iter<I: IntoIterator<Item = (VarId, bool)>>(iter: I) -> Self {
        PartialAssignment(iter.into_iter().collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::store::CfdStore;

    #[test]
    fn or_merges_sorted_supports() {
        let mut s = CfdStore::new();
        let v: Vec<VarId> = (0..5).map(|i| s.var(&format!("v{i}"))).collect();
        let a = Assignment::from_vars([v[3], v[0]]);
        let b = Assignment::from_vars([v[1], v[3], v[4]]);
        assert_eq!(a.or(&b), Assignment::from_vars([v[0], v[1], v[3], v[4]]));
        assert_eq!(a.with(v[2]).support(), &[v[0], v[2], v[3]]);
    }

    #[test]
    fn admits_checks_both_polarities() {
        let mut s = CfdStore::new();
        let x = s.var("x");
        let y = s.var("y");
        let sigma: PartialAssignment = [(x, true), (y, false)].into_iter().collect();
        assert!(sigma.admits(&Assignment::from_vars([x])));
        assert!(!sigma.admits(&Assignment::from_vars([x, y])));
        assert!(!sigma.admits(&Assignment::empty()));
        assert_eq!(sigma.positives().collect::<Vec<_>>(), vec![x]);
    }
}
