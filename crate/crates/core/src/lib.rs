//! Case-factor diagrams: a hash-consed representation of sets of sparse
//! truth assignments, compilers from Markov random fields and weighted CNF
//! grammars, linear-time inference, and brute-force reference oracles.

pub mod assignment;
pub mod energyfile;
pub mod families;
pub mod inference;
pub mod logspace;
pub mod mrf;
pub mod oracle;
pub mod pcfg;
pub mod sexpr;
pub mod store;

pub use assignment::{Assignment, PartialAssignment};
pub use inference::{EnergyFn, InferenceError, InsideTable, OutsideTable, ViterbiResult};
pub use store::{CfdError, CfdStore, Mode, Node, NodeRef, VarId, VarSet, Violation, ViolationKind};
