use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde_json::{json, Map, Value};

use casefactor::energyfile::{self, EnergyFile};
use casefactor::mrf::{self, uai};
use casefactor::oracle::verify::{self, Mismatch};
use casefactor::oracle::{self, random, Limits, OracleError};
use casefactor::pcfg::{self, CnfGrammar, CompileOptions};
use casefactor::{inference, sexpr, CfdStore, NodeRef, PartialAssignment};

use crate::json::{mrf_report, num, pcfg_report};
use crate::{Command, Failure, Task};

const BOUND_PREFIX: &str = ";; bound ";

type Result<T> = std::result::Result<T, Failure>;

pub fn run(cmd: Command) -> Result<Value> {
    match cmd {
        Command::CompilePcfg { grammar, sentence, sentence_file, out, energies, no_prune } => {
            let words = match (sentence, sentence_file) {
                (Some(s), _) => s,
                (None, Some(p)) => read(&p)?,
                (None, None) => return Err(Failure::Usage("a sentence is required".into())),
            };
            compile_pcfg(&grammar, &words, &out, energies, !no_prune)
        }
        Command::CompileMrf { mrf, out, energies } => compile_mrf(&mrf, &out, energies),
        Command::Infer { cfd, energies, tasks, conditions } => infer(&cfd, energies.as_deref(), &tasks, &conditions),
        Command::Stats { cfd } => stats(&cfd),
        Command::Check { instance, energies, seed, count } => check(&instance, energies.as_deref(), seed, count),
    }
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Failure::Usage(format!("cannot read {}: {e}", path.display())))
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Failure::Usage(format!("cannot write {}: {e}", path.display())))
}

fn format_err(path: &Path, e: impl std::fmt::Display) -> Failure {
    Failure::Format(format!("{}: {e}", path.display()))
}

fn energies_path(out: &Path, given: Option<PathBuf>) -> PathBuf {
    given.unwrap_or_else(|| out.with_extension("energies"))
}

fn diagram_text(store: &CfdStore, root: NodeRef, report: &Value) -> String {
    format!("{BOUND_PREFIX}{report}\n{}", sexpr::print(store, root))
}

fn compiled(out: &Path, energies: &Path, store: &CfdStore, root: NodeRef, report: Value) -> Value {
    json!({
        "out": out.display().to_string(),
        "energies": energies.display().to_string(),
        "nodes": store.size(root),
        "vars": store.vars(root).len(),
        "bound_report": report,
    })
}

fn compile_pcfg(grammar: &Path, words: &str, out: &Path, energies: Option<PathBuf>, prune: bool) -> Result<Value> {
    let g = CnfGrammar::parse(&read(grammar)?).map_err(|e| format_err(grammar, e))?;
    let words: Vec<&str> = words.split_whitespace().collect();
    if words.is_empty() {
        return Err(Failure::Usage("the sentence is empty".into()));
    }
    let mut store = CfdStore::new();
    let c = pcfg::compile_with(&mut store, &g, &words, CompileOptions { prune })
        .map_err(|e| Failure::Format(e.to_string()))?;
    let report = pcfg_report(&pcfg::size_bound_report(&store, &g, words.len(), c.root));
    let epath = energies_path(out, energies);
    write(out, &diagram_text(&store, c.root, &report))?;
    write(&epath, &energyfile::write(&store, &c.energy, 0.0))?;
    Ok(compiled(out, &epath, &store, c.root, report))
}

fn compile_mrf(path: &Path, out: &Path, energies: Option<PathBuf>) -> Result<Value> {
    let m = uai::parse(&read(path)?).map_err(|e| format_err(path, e))?;
    let mut store = CfdStore::new();
    let c = mrf::compile_mrf(&mut store, &m).map_err(|e| format_err(path, e))?;
    let report = mrf_report(&mrf::size_bound_report(&store, &c.mrf, c.root));
    let epath = energies_path(out, energies);
    write(out, &diagram_text(&store, c.root, &report))?;
    write(&epath, &energyfile::write(&store, &c.encoding.energy, c.encoding.offset))?;
    Ok(compiled(out, &epath, &store, c.root, report))
}

fn load(cfd: &Path, energies: Option<&Path>) -> Result<(CfdStore, NodeRef, EnergyFile)> {
    let mut store = CfdStore::new();
    let text = read(cfd)?;
    let root = sexpr::parse(&mut store, &text).map_err(|e| format_err(cfd, e))?;
    let psi = match energies {
        Some(p) => energyfile::parse(&mut store, &read(p)?).map_err(|e| format_err(p, e))?,
        None => EnergyFile::default(),
    };
    Ok((store, root, psi))
}

fn parse_condition(store: &mut CfdStore, literals: &[String]) -> Result<PartialAssignment> {
    let mut sigma = PartialAssignment::new();
    for lit in literals {
        let (name, value) = lit
            .rsplit_once('=')
            .ok_or_else(|| Failure::Usage(format!("condition `{lit}` is not `name=0` or `name=1`")))?;
        let value = match value.trim() {
            "1" => true,
            "0" => false,
            other => return Err(Failure::Usage(format!("condition value `{other}` is not 0 or 1"))),
        };
        let v = store.var(name.trim());
        if sigma.set(v, value).is_some_and(|old| old != value) {
            return Err(Failure::Usage(format!("`{name}` is conditioned both ways")));
        }
    }
    Ok(sigma)
}

fn infer(cfd: &Path, energies: Option<&Path>, tasks: &[Task], conditions: &[String]) -> Result<Value> {
    let (mut store, root, file) = load(cfd, energies)?;
    let sigma = parse_condition(&mut store, conditions)?;
    let (psi, offset) = (&file.energy, file.offset);
    let conditioned = !sigma.is_empty();
    if conditioned && tasks.contains(&Task::Viterbi) {
        return Err(Failure::Usage("viterbi does not take a condition".into()));
    }
    let log_z = inference::conditioned_z(&store, root, psi, &sigma);
    if conditioned && log_z == f64::NEG_INFINITY {
        return Err(Failure::Infeasible("the condition has zero probability".into()));
    }

    let mut doc = Map::new();
    if tasks.contains(&Task::Z) {
        doc.insert("log_z".into(), num(log_z - offset));
    }
    if tasks.contains(&Task::Viterbi) {
        let v = inference::viterbi(&store, root, psi);
        let witness = v.witness.map(|w| w.iter().map(|x| store.var_name(x).to_owned()).collect::<Vec<_>>());
        doc.insert("viterbi".into(), json!({ "energy": num(v.energy + offset), "witness": witness }));
    }
    if tasks.contains(&Task::Marginals) {
        let marginals: BTreeMap<String, Value> = if conditioned {
            store
                .vars(root)
                .iter()
                .map(|&z| {
                    let p = inference::marginal(&store, root, psi, &sigma, z).map_err(infeasible)?;
                    Ok((store.var_name(z).to_owned(), num(p)))
                })
                .collect::<Result<_>>()?
        } else {
            inference::all_marginals(&store, root, psi)
                .map_err(infeasible)?
                .into_iter()
                .map(|(z, p)| (store.var_name(z).to_owned(), num(p)))
                .collect()
        };
        doc.insert("marginals".into(), json!(marginals));
    }
    Ok(Value::Object(doc))
}

fn infeasible(e: inference::InferenceError) -> Failure {
    Failure::Infeasible(e.to_string())
}

fn stats(cfd: &Path) -> Result<Value> {
    let text = read(cfd)?;
    let report = match text.lines().find_map(|l| l.strip_prefix(BOUND_PREFIX)) {
        Some(raw) => serde_json::from_str(raw).map_err(|e| format_err(cfd, e))?,
        None => Value::Null,
    };
    let mut store = CfdStore::new();
    let root = sexpr::parse(&mut store, &text).map_err(|e| format_err(cfd, e))?;
    Ok(json!({
        "nodes": store.size(root),
        "vars": store.vars(root).len(),
        "bound_report": report,
    }))
}

/// Runs the oracle cross-checks. Random instances use seeds
/// `seed..seed + count`.
fn check(instance: &str, energies: Option<&Path>, seed: u64, count: u64) -> Result<Value> {
    let mut failures = Vec::new();
    let mut instances = 0;
    let mut record = |id: String, found: std::result::Result<Vec<Mismatch>, OracleError>| -> Result<()> {
        instances += 1;
        for m in found.map_err(oracle_failure)? {
            failures.push(json!({ "instance": id, "check": m.check, "detail": m.detail }));
        }
        Ok(())
    };
    match instance {
        "random-cfd" => {
            for s in seed..seed + count {
                let mut store = CfdStore::new();
                let d = random::random_cfd(&mut store, s, 12, 8);
                let vars: Vec<_> = store.vars(d).iter().copied().collect();
                let psi = random::random_energies(s, vars.iter().copied());
                let sigmas: Vec<_> = (0..5).map(|k| random::random_condition(s * 8 + k, &vars)).collect();
                record(format!("seed {s}"), cfd_checks(&store, d, &psi, &sigmas))?;
            }
        }
        "random-mrf" => {
            for s in seed..seed + count {
                let m = random::random_mrf(s, 8, 3, 8);
                record(format!("seed {s}"), verify::verify_mrf(&mut CfdStore::new(), &m))?;
            }
        }
        "random-pcfg" => {
            for s in seed..seed + count {
                let g = random::random_grammar(s, 5, 8, &["a", "b"]);
                let n = 1 + (s % 6) as usize;
                let words: Vec<&str> = (0..n).map(|i| if (s >> i) & 1 == 1 { "b" } else { "a" }).collect();
                record(format!("seed {s}"), verify::verify_pcfg(&mut CfdStore::new(), &g, &words, n <= 5))?;
            }
        }
        path => {
            let (store, root, file) = load(Path::new(path), energies)?;
            let vars: Vec<_> = store.vars(root).iter().copied().collect();
            let sigmas: Vec<_> = (0..5).map(|k| random::random_condition(seed * 8 + k, &vars)).collect();
            record(path.to_owned(), cfd_checks(&store, root, &file.energy, &sigmas))?;
        }
    }
    let doc = json!({ "instances": instances, "failures": failures });
    if failures.is_empty() {
        Ok(doc)
    } else {
        Err(Failure::Check(serde_json::to_string_pretty(&doc).expect("JSON values serialize")))
    }
}

fn cfd_checks(
    store: &CfdStore,
    d: NodeRef,
    psi: &casefactor::EnergyFn,
    sigmas: &[PartialAssignment],
) -> std::result::Result<Vec<Mismatch>, OracleError> {
    let mut out = verify::verify_cfd(store, d, psi, sigmas, Limits::default())?;
    let report = oracle::check_structural_facts(store, d, Some(psi))?;
    out.extend(report.counterexamples.into_iter().map(|c| Mismatch { check: "structure", detail: format!("{}: {}", c.property, c.detail) }));
    Ok(out)
}

fn oracle_failure(e: OracleError) -> Failure {
    Failure::Usage(format!("cannot check this instance: {e}"))
}
