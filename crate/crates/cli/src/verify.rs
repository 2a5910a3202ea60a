use std::path::Path;

use gcllab::diagnostics::{
    verify_theorem1, verify_theorem2, verify_theorem3, Theorem2Mode, VerifierResult,
    COSINE_AGREEMENT,
};
use gcllab::graph::{normalize_adjacency, pair_distribution, Graph};
use gcllab::numkit::Tensor;
use gcllab::rng::{self, LabRng};
use rand::Rng;
use serde::Serialize;

use crate::error::CliError;
use crate::output::write_json;
use crate::TheoremArg;

/// Share of paper-form cosine checks that must agree for theorem 2 to pass.
pub const PAPER_FORM_PASS_RATE: f64 = 0.95;
const EDGE_PROBABILITY: f64 = 0.3;
const MAX_DIM: usize = 8;
const MAX_ALPHA: f64 = 2.0;

/// A random graph with `2..=n_max` nodes and a random embedding matrix.
pub fn random_instance(r: &mut LabRng, n_max: usize) -> (Graph, Tensor) {
    let n = r.random_range(2..=n_max.max(2));
    let d = r.random_range(1..=MAX_DIM);
    let mut edges = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            if r.random::<f64>() < EDGE_PROBABILITY {
                edges.push((i, j));
            }
        }
    }
    let g = Graph::from_edges("random", n, &edges, Tensor::zeros(n, 1), None)
        .expect("edges are in range");
    let h = Tensor::from_fn(n, d, |_, _| r.random_range(-1.0..1.0));
    (g, h)
}

#[derive(Debug, Serialize)]
pub struct Section {
    pub theorem: String,
    pub mode: String,
    pub trials: usize,
    pub passed_trials: usize,
    pub passed: bool,
    pub max_residual: f64,
    pub mean_residual: f64,
    pub worst_trial: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub min_cosine: Option<f64>,
    pub worst: VerifierResult,
}

fn summarize(
    theorem: &str,
    mode: &str,
    results: Vec<VerifierResult>,
    required_rate: f64,
) -> Section {
    let trials = results.len();
    let passed_trials = results.iter().filter(|r| r.passed).count();
    let (worst_trial, _) =
        results
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |best, (i, r)| {
                if r.residual > best.1 {
                    (i, r.residual)
                } else {
                    best
                }
            });
    let max_residual = results[worst_trial].residual;
    let mean_residual = results.iter().map(|r| r.residual).sum::<f64>() / trials as f64;
    let min_cosine = results.iter().filter_map(|r| r.cosine).reduce(f64::min);
    Section {
        theorem: theorem.into(),
        mode: mode.into(),
        trials,
        passed_trials,
        passed: passed_trials as f64 >= required_rate * trials as f64,
        max_residual,
        mean_residual,
        worst_trial,
        min_cosine,
        worst: results[worst_trial].clone(),
    }
}

pub fn run_sections(
    theorem: TheoremArg,
    trials: usize,
    n_max: usize,
    seed: u64,
) -> Result<Vec<Section>, CliError> {
    if trials == 0 {
        return Err(CliError::Usage("trials must be >= 1".into()));
    }
    if n_max < 2 {
        return Err(CliError::Usage("n_max must be >= 2".into()));
    }
    let wants = |t: TheoremArg| theorem == t || theorem == TheoremArg::All;
    let mut sections = Vec::new();
    if wants(TheoremArg::One) {
        let mut r = rng::keyed(seed, 1);
        let results = (0..trials)
            .map(|_| {
                let (g, h) = random_instance(&mut r, n_max);
                verify_theorem1(&h, &normalize_adjacency(&g))
            })
            .collect::<Result<Vec<_>, _>>()?;
        sections.push(summarize("1", "regularized_alignment", results, 1.0));
    }
    if wants(TheoremArg::Two) {
        let mut r = rng::keyed(seed, 2);
        let (mut exact, mut paper) = (Vec::new(), Vec::new());
        for _ in 0..trials {
            let (g, h) = random_instance(&mut r, n_max);
            let p = pair_distribution(&normalize_adjacency(&g))?;
            exact.push(verify_theorem2(&h, &p, Theorem2Mode::UniformExact)?);
            paper.push(verify_theorem2(&h, &p, Theorem2Mode::PaperForm)?);
        }
        sections.push(summarize("2", "uniform_exact", exact, 1.0));
        sections.push(summarize("2", "paper_form", paper, PAPER_FORM_PASS_RATE));
    }
    if wants(TheoremArg::Three) {
        let mut r = rng::keyed(seed, 3);
        let results = (0..trials)
            .map(|_| {
                let (g, h) = random_instance(&mut r, n_max);
                let a = normalize_adjacency(&g);
                let p = pair_distribution(&a)?;
                verify_theorem3(&h, &a, &p, r.random_range(0.0..MAX_ALPHA))
            })
            .collect::<Result<Vec<_>, _>>()?;
        sections.push(summarize("3", "pair_marginal", results, 1.0));
    }
    Ok(sections)
}

pub fn run(
    theorem: TheoremArg,
    trials: usize,
    n_max: usize,
    seed: u64,
    out: Option<&Path>,
) -> Result<(), CliError> {
    let sections = run_sections(theorem, trials, n_max, seed)?;
    for s in &sections {
        let cos = s.min_cosine.map_or(String::new(), |c| {
            format!(" min_cosine={c:.4} (need > {COSINE_AGREEMENT})")
        });
        println!(
            "theorem {} [{}]: {}/{} passed, max_residual={:.3e}{cos} -> {}",
            s.theorem,
            s.mode,
            s.passed_trials,
            s.trials,
            s.max_residual,
            if s.passed { "PASS" } else { "FAIL" }
        );
    }
    if let Some(path) = out {
        write_json(
            path,
            &serde_json::json!({ "seed": seed, "trials": trials, "n_max": n_max, "sections": sections }),
        )?;
    }
    let failed: Vec<String> = sections
        .iter()
        .filter(|s| !s.passed)
        .map(|s| {
            format!(
                "theorem {} [{}] worst residual {:.3e} at trial {}",
                s.theorem, s.mode, s.max_residual, s.worst_trial
            )
        })
        .collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::Runtime(format!(
            "verification failed: {}",
            failed.join("; ")
        )))
    }
}
