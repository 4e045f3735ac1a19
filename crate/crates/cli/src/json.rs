use serde_json::{json, Value};

use casefactor::mrf::MrfSizeReport;
use casefactor::pcfg::PcfgSizeReport;

/// Finite floats as JSON numbers; infinities as the strings `"inf"` and
/// `"-inf"`. serde_json prints the shortest text that reads back to the
/// same bits.
pub fn num(x: f64) -> Value {
    if x.is_finite() {
        json!(x)
    } else if x == f64::INFINITY {
        json!("inf")
    } else if x == f64::NEG_INFINITY {
        json!("-inf")
    } else {
        json!("nan")
    }
}

pub fn pcfg_report(r: &PcfgSizeReport) -> Value {
    json!({
        "kind": "pcfg",
        "nodes": r.nodes,
        "rules": r.rules,
        "sentence_len": r.sentence_len,
        "bound": num(r.bound),
        "ratio": num(r.ratio()),
    })
}

pub fn mrf_report(r: &MrfSizeReport) -> Value {
    json!({
        "kind": "mrf",
        "nodes": r.nodes,
        "terms": r.terms,
        "max_domain": r.max_domain,
        "tree_width": r.tree_width,
        "bound": num(r.bound),
        "ratio": num(r.ratio()),
    })
}
