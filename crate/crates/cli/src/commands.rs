use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use unified_prox::algorithm::{rate_prediction, run, AlgorithmState, RatePrediction, TripleReport};
use unified_prox::certify::{
    empirical_rate, fix_residual, kkt_residual_recovered, CertificationReport, FixResidual, RateEstimate, RATE_SLACK,
};
use unified_prox::problem::{generate, GeneratorParams, Spectrum};
use unified_prox::splitting::{verify_all, VerifierReport};
use unified_prox::tradeoff::{self, TradeoffPoint};
use unified_prox::{NonsmoothTerm, Preset};

use crate::config::{EndToEnd, RunConfig, TradeoffConfig, VerifyConfig};
use crate::{write_atomic, CliError, Outcome};

pub const TRAJECTORY_FILE: &str = "trajectory.csv";
pub const CERTIFICATION_FILE: &str = "certification.json";
pub const VERIFY_FILE: &str = "verify.json";
pub const TRADEOFF_FILE: &str = "tradeoff.csv";
pub const END_TO_END_FILE: &str = "end_to_end.json";

const SOLUTION_TOL: f64 = 1e-13;

fn json<T: Serialize>(value: &T) -> Vec<u8> {
    let mut text = serde_json::to_string_pretty(value).expect("reports serialize");
    text.push('\n');
    text.into_bytes()
}

#[derive(Serialize)]
struct RunReport {
    certification: CertificationReport,
    prediction: RatePrediction,
    estimate: RateEstimate,
    fix_residual: FixResidual,
    max_dual_drift: f64,
    iters: usize,
    triple: TripleReport,
}

/// Runs the configured method and certifies it. `base` resolves relative
/// paths in the config.
pub fn cmd_run(cfg: &RunConfig, base: &Path, out: &Path, seed: Option<u64>) -> Result<Outcome, CliError> {
    let seed = seed.or(cfg.seed);
    let gossip = cfg.mixing.gossip(cfg.graph.build(base, seed)?);
    let p = cfg.problem_document(seed).build()?;
    if p.m() != gossip.m() {
        return Err(CliError::Config(format!(
            "problem has {} agents but the graph has {}",
            p.m(),
            gossip.m()
        )));
    }
    let t = cfg.weights(&gossip)?;
    let prediction = rate_prediction(&t, p.mu(), p.l(), cfg.gamma.explicit())?;
    let gamma = prediction.gamma;
    let x_star = p.reference_solution(SOLUTION_TOL)?;
    let start = AlgorithmState::zeros(&t, &p, gamma)?;
    let traj = run(&t, &p, gamma, cfg.iters, start, &x_star)?;
    let estimate = empirical_rate(&traj.err_sq())?;
    let x = &traj.final_state.x;
    let kkt = kkt_residual_recovered(&p, t.consensus(), x)?;
    let certification = CertificationReport::assess(t.label(), &prediction, &estimate, &kkt, cfg.kkt_tol);
    let report = RunReport {
        fix_residual: fix_residual(&t, &p, gamma, x)?,
        max_dual_drift: traj.max_dual_drift,
        iters: cfg.iters,
        triple: t.validate(p.mu(), p.l()),
        certification,
        prediction,
        estimate,
    };
    write_atomic(&out.join(TRAJECTORY_FILE), traj.to_csv().as_bytes())?;
    write_atomic(&out.join(CERTIFICATION_FILE), &json(&report))?;
    let c = &report.certification;
    Ok(if c.pass {
        Outcome::passed()
    } else {
        Outcome::failed(format!(
            "certification failed: lambda_emp {} vs lambda_pred {} (+{RATE_SLACK}), contractive {}, kkt ({}, {})",
            c.lambda_emp, c.lambda_pred, report.estimate.contractive, c.kkt_primal, c.kkt_dual
        ))
    })
}

#[derive(Serialize)]
struct VerifyRun {
    graph: String,
    m: usize,
    preset: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    skipped: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    gamma: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    lambda: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    report: Option<VerifierReport>,
}

#[derive(Serialize)]
struct VerifySummary {
    trials: usize,
    seed: u64,
    lambda_scale: f64,
    verified: usize,
    skipped: usize,
    pass: bool,
    runs: Vec<VerifyRun>,
}

/// Checks the contraction inequalities for every graph × preset pair.
/// Presets that violate the assumptions on a graph are skipped and listed.
pub fn cmd_verify(cfg: &VerifyConfig, base: &Path, out: &Path, seed: Option<u64>) -> Result<Outcome, CliError> {
    if cfg.trials == 0 {
        return Err(CliError::Config("trials must be positive".into()));
    }
    if !(cfg.lambda_scale > 0.0 && cfg.lambda_scale.is_finite()) {
        return Err(CliError::Config("lambda_scale must be positive".into()));
    }
    let seed = seed.unwrap_or(cfg.seed);
    let presets = cfg.presets.clone().unwrap_or_else(Preset::table);
    let mut runs = Vec::new();
    for spec in &cfg.graphs {
        let gossip = cfg.mixing.gossip(spec.build(base, Some(seed))?);
        let m = gossip.m();
        let p = cfg.problem.document(m, seed).build()?;
        for preset in &presets {
            let mut entry = VerifyRun {
                graph: spec.label(),
                m,
                preset: preset.label(),
                skipped: None,
                gamma: None,
                lambda: None,
                report: None,
            };
            let prediction = preset
                .build(&gossip)
                .and_then(|t| rate_prediction(&t, p.mu(), p.l(), None).map(|r| (t, r)));
            match prediction {
                Err(e) => entry.skipped = Some(e.to_string()),
                Ok((t, pred)) => {
                    let lambda = pred.lambda * cfg.lambda_scale;
                    entry.gamma = Some(pred.gamma);
                    entry.lambda = Some(lambda);
                    entry.report = Some(verify_all(&t, &p, pred.gamma, lambda, cfg.trials, seed));
                }
            }
            runs.push(entry);
        }
    }
    let verified: Vec<&VerifierReport> = runs.iter().filter_map(|r| r.report.as_ref()).collect();
    let failed: Vec<String> = runs
        .iter()
        .filter_map(|r| {
            let rep = r.report.as_ref()?;
            let bad: Vec<&str> = rep.checks.iter().filter(|l| !l.pass).map(|l| l.check.as_str()).collect();
            (!rep.pass).then(|| format!("{}/{}: {}", r.graph, r.preset, bad.join("+")))
        })
        .collect();
    let summary = VerifySummary {
        trials: cfg.trials,
        seed,
        lambda_scale: cfg.lambda_scale,
        verified: verified.len(),
        skipped: runs.len() - verified.len(),
        pass: !verified.is_empty() && failed.is_empty(),
        runs,
    };
    write_atomic(&out.join(VERIFY_FILE), &json(&summary))?;
    Ok(if summary.pass {
        Outcome::passed()
    } else if summary.verified == 0 {
        Outcome::failed("no preset satisfied the assumptions on any graph")
    } else {
        Outcome::failed(format!("inequality violated: {}", failed.join(", ")))
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct RateMatch {
    pub rho_com_grid: f64,
    pub rho_opt: f64,
    pub kappa: f64,
    /// Mixing radius of the configured graph.
    pub rho_com: f64,
    pub k: usize,
    pub lambda_emp: f64,
    pub target: f64,
    pub max_dual_drift: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct SkippedPoint {
    pub rho_com_grid: f64,
    pub rho_opt: f64,
    pub reason: String,
}

#[derive(Debug, Clone, Serialize)]
struct EndToEndSummary {
    runs: Vec<RateMatch>,
    skipped: Vec<SkippedPoint>,
}

fn precondition(e: &unified_prox::Error) -> bool {
    use unified_prox::Error as E;
    matches!(e, E::Preset { .. } | E::InvalidTriple(_) | E::ChebyshevUndefined)
}

/// Runs the Chebyshev-accelerated method at the round count computed for
/// `rho_opt` and compares its rate with the centralized one.
pub fn rate_match(e2e: &EndToEnd, base: &Path, point: &TradeoffPoint, seed: u64) -> Result<RateMatch, CliError> {
    let ro = point.rho_opt;
    let kappa = (1.0 + ro) / (1.0 - ro);
    let gossip = e2e.mixing.gossip(e2e.graph.build(base, Some(seed))?);
    let rho_com = gossip.spectral_info().mixing_radius;
    let k = tradeoff::rounds_chebyshev(rho_com, ro)?;
    let t = Preset::Chebyshev { k }.build(&gossip)?;
    let params = GeneratorParams {
        seed,
        mu: 1.0,
        l: kappa,
        spectrum: Spectrum::Aligned,
        b_scale: 1.0,
    };
    let p = generate(gossip.m(), e2e.d, &params, NonsmoothTerm::Zero)?;
    let pred = rate_prediction(&t, p.mu(), p.l(), None)?;
    let x_star = p.reference_solution(SOLUTION_TOL)?;
    let start = AlgorithmState::zeros(&t, &p, pred.gamma)?;
    let traj = run(&t, &p, pred.gamma, e2e.iters, start, &x_star)?;
    let est = empirical_rate(&traj.err_sq())?;
    let target = ro * ro;
    Ok(RateMatch {
        rho_com_grid: point.rho_com,
        rho_opt: ro,
        kappa,
        rho_com,
        k,
        lambda_emp: est.lambda,
        target,
        max_dual_drift: traj.max_dual_drift,
        pass: est.lambda <= target + RATE_SLACK,
    })
}

/// Writes the round-count table and, when requested, the rate-match runs
/// for a seeded sample of its points.
pub fn cmd_tradeoff(cfg: &TradeoffConfig, base: &Path, out: &Path, seed: Option<u64>) -> Result<Outcome, CliError> {
    let seed = seed.unwrap_or(cfg.seed);
    let rcs = cfg.rho_com.clone().unwrap_or_else(tradeoff::default_grid);
    let ros = cfg.rho_opt.clone().unwrap_or_else(tradeoff::default_grid);
    if rcs.is_empty() || ros.is_empty() {
        return Err(CliError::Config("empty grid".into()));
    }
    let points = tradeoff::sweep(&rcs, &ros)?;
    write_atomic(&out.join(TRADEOFF_FILE), tradeoff::to_csv(&points).as_bytes())?;
    let Some(e2e) = &cfg.end_to_end else {
        return Ok(Outcome::passed());
    };
    // Points are drawn in seeded random order; a point whose accelerated
    // triple is invalid on the graph (singular P_K(W)) is recorded and
    // replaced by the next draw.
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..points.len()).collect();
    order.shuffle(&mut rng);
    let mut summary = EndToEndSummary { runs: Vec::new(), skipped: Vec::new() };
    for i in order {
        if summary.runs.len() == e2e.samples {
            break;
        }
        match rate_match(e2e, base, &points[i], seed) {
            Ok(r) => summary.runs.push(r),
            Err(CliError::Core(e)) if precondition(&e) => summary.skipped.push(SkippedPoint {
                rho_com_grid: points[i].rho_com,
                rho_opt: points[i].rho_opt,
                reason: e.to_string(),
            }),
            Err(e) => return Err(e),
        }
    }
    write_atomic(&out.join(END_TO_END_FILE), &json(&summary))?;
    let matches = &summary.runs;
    if matches.len() < e2e.samples {
        return Ok(Outcome::failed(format!(
            "only {} of {} sampled points admit a valid accelerated triple",
            matches.len(),
            e2e.samples
        )));
    }
    let bad: Vec<String> = matches
        .iter()
        .filter(|r| !r.pass)
        .map(|r| format!("rho_opt {}: lambda_emp {} > {}", r.rho_opt, r.lambda_emp, r.target + RATE_SLACK))
        .collect();
    Ok(if bad.is_empty() {
        Outcome::passed()
    } else {
        Outcome::failed(format!("rate match failed: {}", bad.join(", ")))
    })
}
