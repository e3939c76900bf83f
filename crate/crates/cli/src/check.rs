//! Randomized cross-validation of the solvers against the oracles.
//!
//! Every trial draws one self-contained [`Instance`]. A failing instance is
//! written out as JSON and `--replay` runs exactly the same checks on it, so
//! the failure report is reproduced line for line.

use std::fs;
use std::io::Write;
use std::path::Path;

use graphprox::oracle::{
    brute_force_minimizers, min_norm_reference, prox_reference, random_problem,
    random_prox_problem, MAX_ENUMERATION,
};
use graphprox::{
    alpha_reduction, certificate, find_weighted_reductions, level_sets, prox, reductions,
    PiecewiseLinearPenalty, ProxProblem, QuadraticBinaryProblem, WeightVector,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::{CliError, CliResult};

const BETAS_PER_TRIAL: usize = 10;
const MIN_NORM_TOL: f64 = 1e-7;
const PROX_TOL: f64 = 1e-6;
const CERTIFICATE_TOL: f64 = 1e-7;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Instance {
    pub seed: u64,
    pub trial: usize,
    pub diag: Vec<f64>,
    pub couplings: Vec<(usize, usize, f64)>,
    pub weights: Vec<f64>,
    pub betas: Vec<f64>,
    pub prox: ProxCase,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProxCase {
    pub center: Vec<f64>,
    pub edges: Vec<(usize, usize, f64)>,
    pub lambda: f64,
    pub penalties: Vec<Option<PenaltyCase>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PenaltyCase {
    pub breakpoints: Vec<f64>,
    pub slopes: Vec<f64>,
}

fn trial_rng(seed: u64, trial: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial as u64);
    rng
}

pub fn generate(n: usize, seed: u64, trial: usize) -> Instance {
    let mut rng = trial_rng(seed, trial);
    let q = random_problem(&mut rng, n, 0.5);
    let weights: Vec<f64> = if trial % 2 == 0 {
        vec![1.0; n]
    } else {
        (0..n).map(|_| rng.random_range(0.1..5.0)).collect()
    };
    let spread: f64 = q.diag().iter().map(|d| d.abs()).sum::<f64>()
        + q.couplings().iter().map(|c| c.q.abs()).sum::<f64>();
    let betas = (0..BETAS_PER_TRIAL)
        .map(|_| rng.random_range(-spread - 1.0..=spread + 1.0))
        .collect();
    let p = random_prox_problem(&mut rng, n, trial % 3 != 0);
    Instance {
        seed,
        trial,
        diag: q.diag().to_vec(),
        couplings: q.couplings().iter().map(|c| (c.i, c.j, c.q)).collect(),
        weights,
        betas,
        prox: ProxCase {
            center: p.center().to_vec(),
            edges: p.edges().to_vec(),
            lambda: p.lambda(),
            penalties: p
                .penalties()
                .iter()
                .map(|x| {
                    x.as_ref().map(|x| PenaltyCase {
                        breakpoints: x.breakpoints().to_vec(),
                        slopes: x.slopes().to_vec(),
                    })
                })
                .collect(),
        },
    }
}

fn build(instance: &Instance) -> CliResult<(QuadraticBinaryProblem, WeightVector, ProxProblem)> {
    let q = QuadraticBinaryProblem::new(instance.diag.clone(), instance.couplings.clone())?;
    if q.len() > MAX_ENUMERATION {
        return Err(CliError::Invariant(format!(
            "instance has {} nodes; the brute-force oracle handles at most {MAX_ENUMERATION}",
            q.len()
        )));
    }
    let w = WeightVector::new(instance.weights.clone())?;
    let penalties = instance
        .prox
        .penalties
        .iter()
        .map(|p| {
            p.as_ref()
                .map(|p| PiecewiseLinearPenalty::new(p.breakpoints.clone(), p.slopes.clone()))
                .transpose()
        })
        .collect::<graphprox::Result<Vec<_>>>()?;
    let p = ProxProblem::new(
        instance.prox.center.clone(),
        instance.prox.edges.clone(),
        instance.prox.lambda,
        penalties,
    )?;
    Ok((q, w, p))
}

fn max_gap(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Runs every check on one instance; returns one message per failure.
pub fn check_instance(instance: &Instance) -> CliResult<Vec<String>> {
    let (q, w, p) = build(instance)?;
    let n = q.len();
    let mut failures = Vec::new();

    let r_unit = reductions(&q, &alpha_reduction(&q))?;
    let alpha = find_weighted_reductions(&q, &w)?;
    let r = reductions(&q, &alpha)?;
    let ones = vec![1.0; n];
    for &beta in &instance.betas {
        for (label, r, w) in [("unweighted", &r_unit, &ones[..]), ("weighted", &r, w.as_slice())] {
            let (u1, u2) = level_sets(r, w, beta);
            let brute = brute_force_minimizers(&q, beta, w)?;
            if u1 != brute.s_min || u2 != brute.s_max {
                failures.push(format!(
                    "{label} level sets at beta {beta:e}: got {u1:?} / {u2:?}, brute force {:?} / {:?}",
                    brute.s_min, brute.s_max
                ));
            }
        }
    }

    for (label, r, w) in [("unweighted", &r_unit, &ones[..]), ("weighted", &r, w.as_slice())] {
        let reference = min_norm_reference(&q, w)?;
        let gap = max_gap(r, &reference);
        if !(gap < MIN_NORM_TOL) {
            failures.push(format!("{label} min-norm point differs from the reference by {gap:e}"));
        }
    }

    let u = prox(&p);
    let reference = prox_reference(&p)?;
    let gap = max_gap(&u, &reference);
    if !(gap < PROX_TOL) {
        failures.push(format!("prox differs from the reference by {gap:e}"));
    }
    let cert = certificate(&p, &u);
    if !(cert < CERTIFICATE_TOL) {
        failures.push(format!("prox certificate residual {cert:e}"));
    }
    Ok(failures)
}

fn report(out: &mut impl Write, instance: &Instance, failures: &[String]) {
    for f in failures {
        let _ = writeln!(out, "FAIL trial {} (seed {}): {f}", instance.trial, instance.seed);
    }
}

fn dump(instance: &Instance, path: Option<&Path>) -> CliResult<()> {
    let json = serde_json::to_string_pretty(instance)
        .map_err(|e| CliError::Output(format!("cannot serialize instance: {e}")))?;
    match path {
        Some(p) => fs::write(p, json + "\n")
            .map_err(|e| CliError::Output(format!("{}: {e}", p.display()))),
        None => {
            eprintln!("{json}");
            Ok(())
        }
    }
}

pub fn run(n: usize, trials: usize, seed: u64, dump_path: Option<&Path>) -> CliResult<()> {
    if n == 0 || n > MAX_ENUMERATION {
        return Err(CliError::Invariant(format!(
            "--n must be between 1 and {MAX_ENUMERATION}, got {n}"
        )));
    }
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    let mut failed = 0;
    let mut dumped = false;
    for trial in 0..trials {
        let instance = generate(n, seed, trial);
        let failures = check_instance(&instance)?;
        if !failures.is_empty() {
            failed += 1;
            report(&mut out, &instance, &failures);
            if !dumped {
                dump(&instance, dump_path)?;
                dumped = true;
            }
        }
    }
    let _ = writeln!(
        out,
        "check: n={n} trials={trials} seed={seed}: {} passed, {failed} failed",
        trials - failed
    );
    if failed == 0 {
        Ok(())
    } else {
        Err(CliError::CheckFailed(failed))
    }
}

pub fn replay(path: &Path) -> CliResult<()> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    let instance: Instance = serde_json::from_str(&text)
        .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    let failures = check_instance(&instance)?;
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    report(&mut out, &instance, &failures);
    let _ = writeln!(
        out,
        "replay trial {} (seed {}): {}",
        instance.trial,
        instance.seed,
        if failures.is_empty() { "pass" } else { "FAIL" }
    );
    if failures.is_empty() {
        Ok(())
    } else {
        Err(CliError::CheckFailed(failures.len()))
    }
}
