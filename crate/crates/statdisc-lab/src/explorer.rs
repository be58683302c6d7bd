//! Conjecture explorer: batches of seeded trials testing the implication
//! web between nondegeneracy, minimality and the 1-jet criterion, with a
//! quarantine re-check for anything that looks like a counterexample.

use std::time::{Instant, SystemTime, UNIX_EPOCH};

use nalgebra::DVector;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use statdisc::discs::{da_nondegenerate_with, stationary_minimal_with};
use statdisc::error::{Error, Result};
use statdisc::jets::local_diffeo_verdict_with_tol;
use statdisc::linalg::{definiteness_real, CVector, Definiteness};
use statdisc::matrix_eq::{contraction_guard, solve_x, DiscParameters, SolveOptions};
use statdisc::quadric::{self, QuadricModel};
use statdisc::sample;

use crate::generator::{random_quadric, QuadricKind};
use crate::search::search_stationary_minimal;

pub const REPORT_SCHEMA: &str = "statdisc-report/1";

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct Tolerances {
    pub rank: f64,
    pub diffeo: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            rank: 1e-8,
            diffeo: 1e-8,
        }
    }
}

impl Tolerances {
    pub fn tightened(&self) -> Self {
        Self {
            rank: self.rank * 1e-2,
            diffeo: self.diffeo * 1e-2,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OutputFormat {
    Json,
    Csv,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub kind: QuadricKind,
    pub n: usize,
    pub d: usize,
    pub trials: usize,
    pub seed: u64,
    pub a_radius: f64,
    /// Search budget for minimality-certified parameters on pseudoconvex
    /// campaigns; 0 keeps the plain random draw.
    pub budget: usize,
    pub tolerances: Tolerances,
    pub output_path: Option<String>,
    pub format: OutputFormat,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct TrialFlags {
    pub generating: Option<bool>,
    pub levi_nondegenerate: Option<bool>,
    pub pseudoconvex_at_b: Option<bool>,
    pub segre_rank: Option<usize>,
    pub stationary_minimal: Option<bool>,
    pub defective: Option<bool>,
    pub da_nondegenerate: Option<bool>,
    pub da_strongly: Option<bool>,
    pub diffeo: Option<bool>,
    pub sym_part_positive: Option<bool>,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct TrialMargins {
    pub guard_r0: Option<f64>,
    pub guard_q: Option<f64>,
    pub equation_residual: Option<f64>,
    pub norm_x: Option<f64>,
    pub pseudoconvex_eigenvalue: Option<f64>,
    pub minimality_sv: Option<f64>,
    pub da_tail_bound: Option<f64>,
    pub diffeo_margin: Option<f64>,
    pub block_rel_error: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TrialVerdict {
    Consistent,
    CounterexampleCandidate,
    Error,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TrialEval {
    pub flags: TrialFlags,
    pub margins: TrialMargins,
    pub verdict: TrialVerdict,
    pub error: Option<String>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial_id: usize,
    pub seed: u64,
    pub n: usize,
    pub d: usize,
    pub quadric_sha256: String,
    pub a: Vec<[f64; 2]>,
    pub b: Vec<f64>,
    pub v: Vec<[f64; 2]>,
    #[serde(flatten)]
    pub eval: TrialEval,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CandidateRecord {
    pub trial_id: usize,
    pub seed: u64,
    /// Re-evaluation at tolerances tightened by 1e-2.
    pub quarantine: TrialEval,
    pub survived: bool,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct Summary {
    pub trials: usize,
    pub errors: usize,
    pub stationary_minimal: usize,
    pub defective: usize,
    pub da_nondegenerate: usize,
    pub da_strongly: usize,
    pub diffeo: usize,
    pub da_true_diffeo_true: usize,
    pub da_true_diffeo_false: usize,
    pub da_false_diffeo_true: usize,
    pub da_false_diffeo_false: usize,
    /// Trials with the a-dependent certificate nondegenerate but the
    /// minimality test failing; expected to stay at zero.
    pub da_without_minimal: usize,
    /// Pseudoconvex stationary-minimal trials whose symmetrized Jacobian
    /// block failed to be positive definite; expected to stay at zero.
    pub certificate_violations: usize,
    pub counterexample_candidates: usize,
    pub surviving_candidates: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ReportHeader {
    pub timestamp_unix: u64,
    pub wall_ms_total: f64,
    pub wall_ms_per_trial: Vec<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Report {
    pub schema: String,
    pub header: ReportHeader,
    pub config: ExperimentConfig,
    pub trials: Vec<TrialRecord>,
    pub counterexample_candidates: Vec<CandidateRecord>,
    pub summary: Summary,
}

pub fn quadric_hash(q: &QuadricModel) -> String {
    let canonical = serde_json::to_string(&q.to_json()).unwrap_or_default();
    let digest = Sha256::digest(canonical.as_bytes());
    format!("{digest:x}")
}

/// Evaluates the full flag panel at one `(Q, b, a, V)`. Solver failures are
/// recorded on the trial instead of aborting the batch.
pub fn conjecture_trial(
    q: &QuadricModel,
    b: &DVector<f64>,
    a: &CVector,
    v: &CVector,
    tols: &Tolerances,
) -> TrialEval {
    let mut flags = TrialFlags::default();
    let mut margins = TrialMargins::default();
    let error = conjecture_trial_inner(q, b, a, v, tols, &mut flags, &mut margins).err();
    let verdict = match (&error, flags.da_nondegenerate, flags.diffeo) {
        (Some(_), _, _) => TrialVerdict::Error,
        (None, Some(true), Some(false)) => TrialVerdict::CounterexampleCandidate,
        _ => TrialVerdict::Consistent,
    };
    TrialEval {
        flags,
        margins,
        verdict,
        error: error.map(|e| e.to_string()),
    }
}

fn conjecture_trial_inner(
    q: &QuadricModel,
    b: &DVector<f64>,
    a: &CVector,
    v: &CVector,
    tols: &Tolerances,
    flags: &mut TrialFlags,
    margins: &mut TrialMargins,
) -> Result<()> {
    let class = quadric::classify(q, Some(b), tols.rank)?;
    flags.generating = Some(class.generating);
    flags.levi_nondegenerate = Some(class.levi_nondegenerate);
    flags.pseudoconvex_at_b = class.strongly_pseudoconvex_at_b;
    margins.pseudoconvex_eigenvalue = class.smallest_eigenvalue;
    flags.segre_rank = Some(quadric::segre_rank(q, v, tols.rank)?);

    let params = DiscParameters::new(q, a.clone(), b.clone())?;
    let guard = contraction_guard(&params)?;
    margins.guard_r0 = Some(guard.r0);
    margins.guard_q = Some(guard.q);
    if !guard.ok {
        return Err(Error::Regime(format!(
            "contraction guard rejected the parameters ({})",
            guard.inequality
        )));
    }
    let opts = SolveOptions::default();
    let sol = solve_x(&params, &opts)?;
    margins.equation_residual = Some(sol.residual_norm);
    margins.norm_x = Some(sol.norm_x);

    let min_rep = stationary_minimal_with(q, &sol.x, v, tols.rank)?;
    flags.stationary_minimal = Some(min_rep.minimal);
    flags.defective = Some(!min_rep.minimal);
    margins.minimality_sv = Some(min_rep.smallest_singular_value);

    let da = da_nondegenerate_with(q, &params, &sol, v)?;
    // re-classify the certificate at the configured tolerance so the
    // quarantine pass can tighten it
    let cert = da.certificate_matrix();
    let sym = (&cert + cert.transpose()).scale(0.5);
    let verdict = definiteness_real(&sym, tols.rank)?;
    flags.da_nondegenerate = Some(verdict != Definiteness::Singular);
    flags.da_strongly = Some(verdict == Definiteness::PositiveDefinite);
    margins.da_tail_bound = Some(da.tail_bound);

    let jet = local_diffeo_verdict_with_tol(q, a, b, v, &opts, tols.diffeo)?;
    flags.diffeo = Some(jet.diffeo);
    flags.sym_part_positive = Some(jet.definiteness_of_sym_part == Definiteness::PositiveDefinite);
    margins.diffeo_margin = Some(jet.singular_margin);
    margins.block_rel_error = Some(jet.block_rel_error);
    Ok(())
}

struct TrialInputs {
    q: QuadricModel,
    b: DVector<f64>,
    a: CVector,
    v: CVector,
}

fn draw_trial_inputs(config: &ExperimentConfig, seed: u64) -> Result<TrialInputs> {
    let q = random_quadric(
        config.kind,
        config.n,
        config.d,
        sample::derive_seed(seed, 1),
    )?;
    let b = match config.kind {
        QuadricKind::Pseudoconvex => {
            quadric::find_positive_combination(&q, 400, sample::derive_seed(seed, 2))
                .ok_or_else(|| Error::Precondition("no positive combination found".into()))?
        }
        _ => DVector::from_fn(config.d, |j, _| if j == 0 { 1.0 } else { 0.0 }),
    };
    let mut rng = sample::rng_from_seed(sample::derive_seed(seed, 3));
    if config.kind == QuadricKind::Pseudoconvex && config.budget > 0 {
        // minimality-certified parameters when the search budget allows
        if let (Some(res), _) =
            search_stationary_minimal(&q, &b, config.budget, sample::derive_seed(seed, 4))?
        {
            return Ok(TrialInputs {
                q,
                b,
                a: res.a_vector(),
                v: res.v_vector(),
            });
        }
    }
    let v = sample::random_unit_vector(config.n, &mut rng);
    let raw = sample::random_unit_vector(config.d, &mut rng);
    let mut scale = config.a_radius * rng.gen_range(0.2..1.0);
    // shrink until the contraction guard admits the draw
    for _ in 0..25 {
        let a = raw.scale(scale);
        if let Ok(params) = DiscParameters::new(&q, a.clone(), b.clone()) {
            if contraction_guard(&params).map(|g| g.ok).unwrap_or(false) {
                return Ok(TrialInputs { q, b, a, v });
            }
        }
        scale *= 0.5;
    }
    Err(Error::Regime(
        "no admissible disc parameter within the radius".into(),
    ))
}

fn run_trial(config: &ExperimentConfig, index: usize) -> (TrialRecord, f64) {
    let seed = sample::derive_seed(config.seed, index as u64);
    let start = Instant::now();
    let record = match draw_trial_inputs(config, seed) {
        Ok(inp) => {
            let eval = conjecture_trial(&inp.q, &inp.b, &inp.a, &inp.v, &config.tolerances);
            TrialRecord {
                trial_id: index,
                seed,
                n: config.n,
                d: config.d,
                quadric_sha256: quadric_hash(&inp.q),
                a: inp.a.iter().map(|z| [z.re, z.im]).collect(),
                b: inp.b.iter().copied().collect(),
                v: inp.v.iter().map(|z| [z.re, z.im]).collect(),
                eval,
            }
        }
        Err(e) => TrialRecord {
            trial_id: index,
            seed,
            n: config.n,
            d: config.d,
            quadric_sha256: String::new(),
            a: Vec::new(),
            b: Vec::new(),
            v: Vec::new(),
            eval: TrialEval {
                flags: TrialFlags::default(),
                margins: TrialMargins::default(),
                verdict: TrialVerdict::Error,
                error: Some(e.to_string()),
            },
        },
    };
    (record, start.elapsed().as_secs_f64() * 1e3)
}

fn summarize(trials: &[TrialRecord], candidates: &[CandidateRecord]) -> Summary {
    let mut s = Summary {
        trials: trials.len(),
        ..Summary::default()
    };
    for t in trials {
        let f = &t.eval.flags;
        if t.eval.error.is_some() {
            s.errors += 1;
        }
        if f.stationary_minimal == Some(true) {
            s.stationary_minimal += 1;
        }
        if f.defective == Some(true) {
            s.defective += 1;
        }
        if f.da_nondegenerate == Some(true) {
            s.da_nondegenerate += 1;
        }
        if f.da_strongly == Some(true) {
            s.da_strongly += 1;
        }
        if f.diffeo == Some(true) {
            s.diffeo += 1;
        }
        match (f.da_nondegenerate, f.diffeo) {
            (Some(true), Some(true)) => s.da_true_diffeo_true += 1,
            (Some(true), Some(false)) => s.da_true_diffeo_false += 1,
            (Some(false), Some(true)) => s.da_false_diffeo_true += 1,
            (Some(false), Some(false)) => s.da_false_diffeo_false += 1,
            _ => {}
        }
        if f.da_nondegenerate == Some(true) && f.stationary_minimal == Some(false) {
            s.da_without_minimal += 1;
        }
        if f.pseudoconvex_at_b == Some(true)
            && f.stationary_minimal == Some(true)
            && f.sym_part_positive == Some(false)
        {
            s.certificate_violations += 1;
        }
        if t.eval.verdict == TrialVerdict::CounterexampleCandidate {
            s.counterexample_candidates += 1;
        }
    }
    s.surviving_candidates = candidates.iter().filter(|c| c.survived).count();
    s
}

pub fn run_experiment(config: &ExperimentConfig) -> Result<Report> {
    if config.trials == 0 {
        return Err(Error::InvalidInput("need at least one trial".into()));
    }
    // fail on an unwritable output path before any compute
    if let Some(path) = &config.output_path {
        std::fs::File::create(path)?;
    }
    let start = Instant::now();
    let results: Vec<(TrialRecord, f64)> = (0..config.trials)
        .into_par_iter()
        .map(|i| run_trial(config, i))
        .collect();
    let wall_ms_per_trial: Vec<f64> = results.iter().map(|(_, ms)| *ms).collect();
    let trials: Vec<TrialRecord> = results.into_iter().map(|(t, _)| t).collect();

    // quarantine pass: re-run every candidate at tightened tolerances
    let tight = config.tolerances.tightened();
    let mut candidates = Vec::new();
    for t in &trials {
        if t.eval.verdict != TrialVerdict::CounterexampleCandidate {
            continue;
        }
        let inp = draw_trial_inputs(config, t.seed)?;
        let quarantine = conjecture_trial(&inp.q, &inp.b, &inp.a, &inp.v, &tight);
        let survived = quarantine.verdict == TrialVerdict::CounterexampleCandidate;
        candidates.push(CandidateRecord {
            trial_id: t.trial_id,
            seed: t.seed,
            quarantine,
            survived,
        });
    }

    let summary = summarize(&trials, &candidates);
    let report = Report {
        schema: REPORT_SCHEMA.to_string(),
        header: ReportHeader {
            timestamp_unix: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
            wall_ms_total: start.elapsed().as_secs_f64() * 1e3,
            wall_ms_per_trial,
        },
        config: config.clone(),
        trials,
        counterexample_candidates: candidates,
        summary,
    };
    if let Some(path) = &config.output_path {
        let json = serde_json::to_string_pretty(&serde_json::to_value(&report)?)?;
        std::fs::write(path, json)?;
        if config.format == OutputFormat::Csv {
            let csv_path = std::path::Path::new(path).with_extension("csv");
            std::fs::write(csv_path, report_to_csv(&report))?;
        }
    }
    Ok(report)
}

/// 0 when every candidate was cleared, 2 when one survived quarantine.
pub fn exit_code(report: &Report) -> i32 {
    if report.summary.surviving_candidates > 0 {
        2
    } else {
        0
    }
}

/// Structural check of a serialized report against `statdisc-report/1`.
pub fn validate_report(value: &serde_json::Value) -> Result<()> {
    let obj = value
        .as_object()
        .ok_or_else(|| Error::InvalidInput("report must be a JSON object".into()))?;
    match obj.get("schema").and_then(|v| v.as_str()) {
        Some(REPORT_SCHEMA) => {}
        other => {
            return Err(Error::InvalidInput(format!(
                "unexpected schema field {other:?}"
            )))
        }
    }
    for key in [
        "header",
        "config",
        "trials",
        "counterexample_candidates",
        "summary",
    ] {
        if !obj.contains_key(key) {
            return Err(Error::InvalidInput(format!("report is missing '{key}'")));
        }
    }
    let trials = obj["trials"]
        .as_array()
        .ok_or_else(|| Error::InvalidInput("'trials' must be an array".into()))?;
    for (i, t) in trials.iter().enumerate() {
        let t = t
            .as_object()
            .ok_or_else(|| Error::InvalidInput(format!("trial {i} is not an object")))?;
        for key in [
            "trial_id",
            "seed",
            "quadric_sha256",
            "flags",
            "margins",
            "verdict",
        ] {
            if !t.contains_key(key) {
                return Err(Error::InvalidInput(format!("trial {i} is missing '{key}'")));
            }
        }
    }
    Ok(())
}

fn fmt_flag(b: Option<bool>) -> &'static str {
    match b {
        Some(true) => "true",
        Some(false) => "false",
        None => "",
    }
}

fn fmt_f64(x: Option<f64>) -> String {
    x.map(|v| format!("{v:.6e}")).unwrap_or_default()
}

/// Flat per-trial CSV companion to the JSON report.
pub fn report_to_csv(report: &Report) -> String {
    let mut out = String::from(
        "trial_id,seed,n,d,pseudoconvex,levi_nondeg,segre_rank,stationary_minimal,\
         defective,da_nondeg,da_strongly,diffeo,minimality_sv,diffeo_margin,verdict,wall_ms\n",
    );
    for (t, ms) in report
        .trials
        .iter()
        .zip(report.header.wall_ms_per_trial.iter())
    {
        let f = &t.eval.flags;
        let m = &t.eval.margins;
        let verdict = match t.eval.verdict {
            TrialVerdict::Consistent => "consistent",
            TrialVerdict::CounterexampleCandidate => "counterexample-candidate",
            TrialVerdict::Error => "error",
        };
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{:.3}\n",
            t.trial_id,
            t.seed,
            t.n,
            t.d,
            fmt_flag(f.pseudoconvex_at_b),
            fmt_flag(f.levi_nondegenerate),
            f.segre_rank.map(|r| r.to_string()).unwrap_or_default(),
            fmt_flag(f.stationary_minimal),
            fmt_flag(f.defective),
            fmt_flag(f.da_nondegenerate),
            fmt_flag(f.da_strongly),
            fmt_flag(f.diffeo),
            fmt_f64(m.minimality_sv),
            fmt_f64(m.diffeo_margin),
            verdict,
            ms,
        ));
    }
    out
}
