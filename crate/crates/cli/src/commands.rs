use std::path::Path;

use serde::de::DeserializeOwned;
use serde_json::json;

use jclab::eig::{hermitian_eigen, DEFAULT_TOL};
use jclab::jc::{jc_exact, jc_numeric};
use jclab::partition::{continuity_trials, poset_axiom_violations};
use jclab::random::seeded_rng;
use jclab::rational::RationalMatrix;
use jclab::seq::{
    is_m_quasinilpotent_generated, pointwise_jc_generated, unbounded_jc_witness, MatrixSequence, TraceState,
};
use jclab::triangular::{shell_report, triangularize_sequence};
use jclab::unbounded::{control_sweep_n2, sweep_with_exponent};
use jclab::CMatrix;

use crate::artifact::{csv_artifact, emit, fmt_f64, Meta};
use crate::CliError;

/// `(eps, delta)` pairs for the quasinilpotence verdict in `seq-demo`.
const QUASINILPOTENCE_SCHEDULE: [(f64, f64); 3] = [(1e-1, 1e-1), (1e-2, 1e-2), (1e-3, 1e-3)];

/// Largest `n` for the exhaustive poset-axiom check in `partition-check`.
const AXIOM_CHECK_MAX_N: usize = 5;

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Input(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

fn json_bytes(value: &serde_json::Value) -> Result<Vec<u8>, CliError> {
    let mut out = serde_json::to_vec_pretty(value)?;
    out.push(b'\n');
    Ok(out)
}

/// Reads either matrix wire format.
fn read_matrix(path: &Path) -> Result<(Option<RationalMatrix>, CMatrix), CliError> {
    let value: serde_json::Value = read_json(path)?;
    if let Ok(q) = serde_json::from_value::<RationalMatrix>(value.clone()) {
        let c = q.to_complex();
        return Ok((Some(q), c));
    }
    let c = serde_json::from_value::<CMatrix>(value)
        .map_err(|e| CliError::Input(format!("{}: not a matrix: {e}", path.display())))?;
    Ok((None, c))
}

pub fn jc(input: &Path, exact: bool, ctol: f64, out: Option<&Path>, seed: u64) -> Result<(), CliError> {
    let (rational, complex) = read_matrix(input)?;
    let body = if exact {
        let q = match rational {
            Some(q) => q,
            None => RationalMatrix::from_complex_exact(&complex)?,
        };
        let r = jc_exact(&q)?;
        json!({
            "meta": Meta::new(seed, &[]),
            "D": r.d,
            "N": r.n,
            "certificate": { "exact": true, "iterations": r.iterations },
        })
    } else {
        let r = jc_numeric(&complex, ctol)?;
        json!({
            "meta": Meta::new(seed, &[("ctol", ctol)]),
            "D": r.d,
            "N": r.n,
            "certificate": r.certificate,
            "clusters": r.clusters,
        })
    };
    emit(out, &json_bytes(&body)?)
}

pub fn sweep_unbounded(
    deltas: &[f64],
    n: usize,
    p: f64,
    ctol: f64,
    control: bool,
    out: Option<&Path>,
    seed: u64,
) -> Result<(), CliError> {
    let rows = if control {
        control_sweep_n2(deltas, ctol)?
    } else {
        sweep_with_exponent(deltas, n, p, ctol)?
    };
    let header = ["delta", "norm_A", "norm_D", "norm_N", "closed_form_norm_D", "rel_error"].map(String::from);
    let values: Vec<Vec<f64>> = rows
        .iter()
        .map(|r| vec![r.delta, r.norm_a, r.norm_d, r.norm_n, r.closed_form_norm_d, r.rel_error])
        .collect();
    let meta = Meta::new(seed, &[("ctol", ctol), ("p", p)]);
    emit(out, &csv_artifact(&meta, &header, &values)?)
}

pub fn nps(input: &Path, kmax: usize, tol: f64, out: Option<&Path>, seed: u64) -> Result<(), CliError> {
    let (_, a) = read_matrix(input)?;
    let trace = jclab::nps::nps_limit(&a, tol, kmax)?;
    let mut header = vec!["k".to_string(), "step_norm".to_string()];
    header.extend((1..=a.n()).map(|i| format!("limit_eig_{i}")));
    let mut rows = Vec::with_capacity(trace.iterates.len());
    for it in &trace.iterates {
        let (eigs, _) = hermitian_eigen(&it.h, DEFAULT_TOL)?;
        let mut row = vec![it.k as f64, it.step_norm];
        row.extend(eigs);
        rows.push(row);
    }
    let meta = Meta::new(seed, &[("tol", tol)]);
    emit(out, &csv_artifact(&meta, &header, &rows)?)?;
    if out.is_some() {
        let first = trace.first_converged_k.map_or("none".to_string(), |k| k.to_string());
        println!("converged: {}", trace.converged);
        println!("first converged k: {first}");
    }
    Ok(())
}

fn parse_witness(spec: &str) -> Result<usize, CliError> {
    spec.strip_prefix("n=")
        .and_then(|v| v.parse().ok())
        .ok_or_else(|| CliError::Input(format!("--witness expects n=<int>, got {spec:?}")))
}

pub fn seq_demo(witness: &str, horizon: usize, ctol: f64, out: Option<&Path>, seed: u64) -> Result<(), CliError> {
    let n = parse_witness(witness)?;
    let a = unbounded_jc_witness(n, horizon)?;
    let jc = pointwise_jc_generated(&a, ctol)?;
    let (mats, ds, ns) = (a.evaluate()?, jc.d.evaluate()?, jc.n.evaluate()?);
    let rows: Vec<Vec<f64>> = (0..horizon)
        .map(|i| vec![(i + 1) as f64, mats[i].frobenius_norm(), ds[i].frobenius_norm(), ns[i].frobenius_norm()])
        .collect();
    let max_col = |c: usize| rows.iter().map(|r| r[c]).fold(0.0, f64::max);
    let verdict = is_m_quasinilpotent_generated(&jc.n, &TraceState::default(), &QUASINILPOTENCE_SCHEDULE)?;

    let header = ["k", "norm_A", "norm_D", "norm_N"].map(String::from);
    let meta = Meta::new(seed, &[("ctol", ctol)]);
    emit(out, &csv_artifact(&meta, &header, &rows)?)?;
    if out.is_some() {
        println!("sup_norm(A): {}", fmt_f64(a.sup_norm_to_horizon()?));
        println!("max ||D_k||: {}", fmt_f64(max_col(2)));
        println!("max ||N_k||: {}", fmt_f64(max_col(3)));
        println!("N quasinilpotent: {} ({:?})", verdict.quasinilpotent, verdict.method);
    }
    Ok(())
}

pub fn triangularize(input: &Path, out: Option<&Path>, seed: u64) -> Result<(), CliError> {
    let a: MatrixSequence = read_json(input)?;
    let r = triangularize_sequence(&a)?;
    let body = json!({
        "meta": Meta::new(seed, &[("schur_tol", DEFAULT_TOL)]),
        "V": r.v,
        "B": r.b,
        "shells": shell_report(&a)?,
        "residuals": r.residuals,
    });
    emit(out, &json_bytes(&body)?)
}

pub fn partition_check(n: usize, trials: usize, out: Option<&Path>, seed: u64) -> Result<(), CliError> {
    let report = continuity_trials(n, trials, &mut seeded_rng(seed))?;
    let axioms = if n <= AXIOM_CHECK_MAX_N { Some(poset_axiom_violations(n)?) } else { None };
    println!("continuity violations: {}", report.violations);
    if let Some(v) = axioms {
        println!("poset axiom violations: {v}");
    }
    if let Some(path) = out {
        let body = json!({ "meta": Meta::new(seed, &[]), "continuity": report, "poset_axiom_violations": axioms });
        emit(Some(path), &json_bytes(&body)?)?;
    }
    if report.violations > 0 || axioms.is_some_and(|v| v > 0) {
        return Err(CliError::Check(format!(
            "{} continuity violations in {} trials",
            report.violations, report.trials
        )));
    }
    Ok(())
}
