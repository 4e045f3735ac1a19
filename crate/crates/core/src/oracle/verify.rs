//! Cross-checks of the fast code paths against the brute-force references.
//! Each function returns the list of disagreements; an empty list is a pass.

use std::collections::{BTreeSet, HashSet};

use super::cky::{all_parses, cky_inside, cky_span_posteriors, cky_viterbi};
use super::mrf::enumerate_mrf;
use super::{log_close, rel_close, tie_break_witness, Enumeration, Limits, OracleError};
use crate::assignment::PartialAssignment;
use crate::inference::{self, EnergyFn};
use crate::mrf::{compile_mrf, Mrf};
use crate::pcfg::{self, CnfGrammar};
use crate::store::{CfdStore, NodeRef};

/// Relative tolerance for partition functions and probabilities.
pub const REL_TOL: f64 = 1e-9;
/// Relative tolerance (floored at 1 in magnitude) for minimum energies.
pub const ENERGY_TOL: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub struct Mismatch {
    pub check: &'static str,
    pub detail: String,
}

fn energy_close(a: f64, b: f64) -> bool {
    a == b || (a - b).abs() <= ENERGY_TOL * a.abs().max(b.abs()).max(1.0)
}

struct Log(Vec<Mismatch>);

impl Log {
    fn expect(&mut self, ok: bool, check: &'static str, detail: impl FnOnce() -> String) {
        if !ok {
            self.0.push(Mismatch { check, detail: detail() });
        }
    }
}

/// `z`, `viterbi` (energy, argmin membership, tie-break), `all_marginals`,
/// `marginal`, and `conditioned_z` plus conditioned marginals for each
/// `sigma`.
pub fn verify_cfd(
    store: &CfdStore,
    d: NodeRef,
    psi: &EnergyFn,
    sigmas: &[PartialAssignment],
    limits: Limits,
) -> Result<Vec<Mismatch>, OracleError> {
    let en = Enumeration::new(store, d, limits)?;
    let f = en.root();
    let mut log = Log(Vec::new());

    let (fast, brute) = (inference::z(store, d, psi), f.z(psi));
    log.expect(log_close(fast, brute, REL_TOL), "z", || format!("{fast} vs {brute}"));

    let v = inference::viterbi(store, d, psi);
    let b = f.viterbi(psi);
    log.expect(energy_close(v.energy, b.energy), "viterbi.energy", || format!("{} vs {}", v.energy, b.energy));
    match &v.witness {
        None => log.expect(f.is_empty(), "viterbi.witness", || "no witness for a nonempty set".into()),
        Some(w) => {
            log.expect(f.contains(w), "viterbi.witness", || "witness is infeasible".into());
            log.expect(energy_close(psi.energy_of(w), v.energy), "viterbi.witness", || "witness energy differs".into());
            log.expect(b.argmin.contains(w), "viterbi.witness", || "witness not in the argmin set".into());
            let predicted = tie_break_witness(store, &en, psi);
            log.expect(predicted.as_ref() == Some(w), "viterbi.tie_break", || format!("{w:?} vs {predicted:?}"));
        }
    }

    let vars: Vec<_> = store.vars(d).iter().copied().collect();
    let empty = PartialAssignment::new();
    match inference::all_marginals(store, d, psi) {
        Ok(all) => {
            for &z in &vars {
                let brute = f.marginal(psi, &empty, z)?;
                let fast = all.get(&z).copied().unwrap_or(0.0);
                log.expect(rel_close(fast, brute, REL_TOL), "all_marginals", || {
                    format!("{}: {fast} vs {brute}", store.var_name(z))
                });
                let single = inference::marginal(store, d, psi, &empty, z)?;
                log.expect(rel_close(single, brute, REL_TOL), "marginal", || {
                    format!("{}: {single} vs {brute}", store.var_name(z))
                });
            }
        }
        Err(_) => log.expect(f.is_empty(), "all_marginals", || "error on a nonempty set".into()),
    }

    for sigma in sigmas {
        let (fast, brute) = (inference::conditioned_z(store, d, psi, sigma), f.conditioned_z(psi, sigma));
        log.expect(log_close(fast, brute, REL_TOL), "conditioned_z", || format!("{sigma:?}: {fast} vs {brute}"));
        if brute == f64::NEG_INFINITY {
            continue;
        }
        for &z in &vars {
            let fast = inference::marginal(store, d, psi, sigma, z)?;
            let brute = f.marginal(psi, sigma, z)?;
            log.expect(rel_close(fast, brute, REL_TOL), "conditioned_marginal", || {
                format!("{sigma:?}, {}: {fast} vs {brute}", store.var_name(z))
            });
        }
    }
    Ok(log.0)
}

/// Compiles `m` and compares against exhaustive evaluation of the original
/// MRF: partition function, minimum energy, value marginals, and the
/// bijection between feasible assignments and configurations.
pub fn verify_mrf(store: &mut CfdStore, m: &Mrf) -> Result<Vec<Mismatch>, OracleError> {
    let c = compile_mrf(store, m).map_err(|e| OracleError::Compile(e.to_string()))?;
    let summary = enumerate_mrf(m)?;
    let psi = &c.encoding.energy;
    let offset = c.encoding.offset;
    let mut log = Log(Vec::new());
    log.expect(store.validate(c.root).is_empty(), "validate", || "compiled diagram breaks the side conditions".into());

    let z = inference::z(store, c.root, psi) - offset;
    log.expect(log_close(z, summary.log_z, REL_TOL), "z", || format!("{z} vs {}", summary.log_z));

    let v = inference::viterbi(store, c.root, psi);
    let e = v.energy + offset;
    log.expect(energy_close(e, summary.min_energy), "viterbi.energy", || format!("{e} vs {}", summary.min_energy));
    let config = v.witness.as_ref().and_then(|w| c.encoding.decode(w));
    match config {
        Some(cfg) => log.expect(energy_close(m.energy(&cfg), summary.min_energy), "viterbi.witness", || {
            format!("{cfg:?} has energy {}", m.energy(&cfg))
        }),
        None => log.expect(false, "viterbi.witness", || "witness does not decode".into()),
    }

    let all = inference::all_marginals(store, c.root, psi)?;
    for (y, vals) in c.encoding.value_vars.iter().enumerate() {
        for (val, var) in vals.iter().enumerate() {
            let fast = all.get(var).copied().unwrap_or(0.0);
            let brute = summary.marginals[y][val];
            log.expect(rel_close(fast, brute, REL_TOL), "marginals", || format!("y{y}={val}: {fast} vs {brute}"));
        }
    }

    let f = Enumeration::new(store, c.root, Limits::assignments_only(2_000_000))?;
    let f = f.root();
    let expected = m.num_configurations();
    log.expect(f.len() as u128 == expected, "bijection", || format!("{} assignments vs {expected} configurations", f.len()));
    let mut configs = HashSet::new();
    for rho in f {
        match c.encoding.decode(rho) {
            Some(cfg) => {
                let back = c.encoding.encode_configuration(&c.mrf, &cfg);
                log.expect(&back == rho, "bijection", || format!("{cfg:?} re-encodes differently"));
                let (lhs, rhs) = (psi.energy_of(rho) + offset, m.energy(&cfg));
                log.expect(energy_close(lhs, rhs), "energy", || format!("{cfg:?}: {lhs} vs {rhs}"));
                configs.insert(cfg);
            }
            None => log.expect(false, "bijection", || "assignment does not decode".into()),
        }
    }
    log.expect(configs.len() == f.len(), "bijection", || "two assignments decode to one configuration".into());
    Ok(log.0)
}

/// Compiles the sentence and compares against chart parsing: inside value,
/// best parse energy, span posteriors, and (when `bijection` is set) the
/// one-to-one correspondence between feasible assignments and parse trees.
pub fn verify_pcfg(
    store: &mut CfdStore,
    g: &CnfGrammar,
    words: &[&str],
    bijection: bool,
) -> Result<Vec<Mismatch>, OracleError> {
    let c = pcfg::compile(store, g, words).map_err(|e| OracleError::Compile(e.to_string()))?;
    let psi = &c.energy;
    let mut log = Log(Vec::new());
    log.expect(store.validate(c.root).is_empty(), "validate", || "compiled diagram breaks the side conditions".into());

    let (z, reference) = (inference::z(store, c.root, psi), cky_inside(g, words)?);
    log.expect(log_close(z, reference, REL_TOL), "z", || format!("{z} vs {reference}"));

    let v = inference::viterbi(store, c.root, psi);
    match (cky_viterbi(g, words)?, &v.witness) {
        (None, None) => {}
        (Some((e, _)), Some(w)) => {
            log.expect(energy_close(v.energy, e), "viterbi.energy", || format!("{} vs {e}", v.energy));
            match pcfg::decode_parse(&c.scheme, w) {
                Ok(tree) => {
                    log.expect(tree.yield_terminals(g) == words, "viterbi.witness", || "wrong yield".into());
                    log.expect(energy_close(tree.energy(g), e), "viterbi.witness", || "tree energy differs".into());
                }
                Err(err) => log.expect(false, "viterbi.witness", || err.to_string()),
            }
        }
        (reference, _) => log.expect(false, "viterbi", || format!("parseability differs: {reference:?}")),
    }

    if z > f64::NEG_INFINITY {
        let all = inference::all_marginals(store, c.root, psi)?;
        let posts = cky_span_posteriors(g, words)?;
        let mut covered = 0;
        for (nt, i, k, var) in c.scheme.phrases() {
            let fast = all.get(&var).copied().unwrap_or(0.0);
            let brute = posts.get(&(nt, i, k)).copied().unwrap_or(0.0);
            covered += usize::from(brute > 0.0);
            log.expect(rel_close(fast, brute, REL_TOL), "span_marginals", || {
                format!("{}: {fast} vs {brute}", store.var_name(var))
            });
        }
        log.expect(covered == posts.len(), "span_marginals", || "a span with mass has no phrase variable".into());
    }

    if bijection {
        let f = Enumeration::new(store, c.root, Limits::assignments_only(1 << 20))?;
        let trees = all_parses(g, words, 1 << 20)?;
        log.expect(f.root().len() == trees.len(), "bijection", || {
            format!("{} assignments vs {} parses", f.root().len(), trees.len())
        });
        let expected: BTreeSet<String> = trees.iter().map(|t| format!("{t:?}")).collect();
        let mut decoded = BTreeSet::new();
        for rho in f.root() {
            match pcfg::decode_parse(&c.scheme, rho) {
                Ok(t) => {
                    let back = pcfg::encode_parse(&c.scheme, &t);
                    log.expect(back.as_ref() == Ok(rho), "bijection", || "tree re-encodes differently".into());
                    decoded.insert(format!("{t:?}"));
                }
                Err(e) => log.expect(false, "bijection", || e.to_string()),
            }
        }
        log.expect(decoded == expected, "bijection", || "decoded trees differ from the chart's parses".into());
    }

    let stray = store.vars(c.root).iter().filter(|&&v| c.scheme.classify(v).is_none()).count();
    log.expect(stray == 0, "scheme", || format!("{stray} variables outside the scheme"));
    Ok(log.0)
}
