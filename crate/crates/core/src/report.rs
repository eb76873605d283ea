//! Run configurations, orchestration and file outputs.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::classes::{norm_index, EntropyModel};
use crate::empirical::{
    erm_risk_curve, mc_sup_expectation, slope_fit_with_errors, verify_variance_bound, ErmConfig, NoiseModel,
    SlopeFit, Statistic, Target,
};
use crate::error::Error;
use crate::mixing::{
    estimate_beta_binning, exact_beta_markov, stationary_distribution, Dgp, MixingProfile, ProfileKind,
};
use crate::ot::{assignment_w2, compare_estimators, exact_w2, sinkhorn_divergence, sorted_w2_1d, t_eps_k, OtConfig};
use crate::rates::{
    application_exponents, main_bound, phase_diagram, rate_exponent, rational, tau_q_bisect, tau_q_scan, to_f64,
    Application, PhaseDiagram, RateNorm, Regime, SigmaMode,
};

/// Version of the CSV column layouts.
pub const CSV_SCHEMA_VERSION: u32 = 1;
pub const OUTPUT_DIR_ENV: &str = "MIXRATE_OUTPUT_DIR";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Rates,
    Phase,
    Simulate,
    MixingEst,
    OtBench,
    Verify,
}

impl Command {
    pub fn as_str(&self) -> &'static str {
        match self {
            Command::Rates => "rates",
            Command::Phase => "phase",
            Command::Simulate => "simulate",
            Command::MixingEst => "mixing-est",
            Command::OtBench => "ot-bench",
            Command::Verify => "verify",
        }
    }
}

fn empty_object() -> Value {
    json!({})
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub command: Command,
    #[serde(default = "empty_object")]
    pub params: Value,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub base_seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum RunError {
    Schema(String),
    Numeric(String),
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Schema(_) => 2,
            RunError::Numeric(_) => 3,
        }
    }
}

impl std::fmt::Display for RunError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RunError::Schema(m) => write!(f, "schema error: {}", m),
            RunError::Numeric(m) => write!(f, "numerical error: {}", m),
        }
    }
}

impl std::error::Error for RunError {}

type RunResult<T> = std::result::Result<T, RunError>;

fn core_err(module: &'static str) -> impl Fn(Error) -> RunError {
    move |e| match e {
        Error::Invalid(m) => RunError::Schema(format!("{}: {}", module, m)),
        other => RunError::Numeric(format!("{}: {}", module, other)),
    }
}

fn io_err(e: std::io::Error) -> RunError {
    RunError::Numeric(format!("report: {}", e))
}

pub fn parse_config(text: &str) -> RunResult<ExperimentConfig> {
    serde_json::from_str(text).map_err(|e| RunError::Schema(format!("config: {}", e)))
}

fn parse_params<T: for<'de> Deserialize<'de>>(cmd: Command, v: &Value) -> RunResult<T> {
    serde_json::from_value(v.clone()).map_err(|e| RunError::Schema(format!("{} params: {}", cmd.as_str(), e)))
}

// Parameter schemas.

fn default_r() -> f64 {
    f64::INFINITY
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RateTuple {
    pub alpha: f64,
    pub beta: f64,
    #[serde(with = "norm_index", default = "default_r")]
    pub r: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundParams {
    pub entropy: EntropyModel,
    pub profile: MixingProfile,
    pub n_grid: Vec<u64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RatesParams {
    #[serde(default)]
    pub tuples: Vec<RateTuple>,
    #[serde(default)]
    pub applications: Vec<Application>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bound: Option<BoundParams>,
}

fn log_grid(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    (0..count)
        .map(|i| {
            let x = lo * (hi / lo).powf(i as f64 / (count - 1) as f64);
            (x * 1e6).round() / 1e6
        })
        .collect()
}

fn default_betas() -> Vec<f64> {
    log_grid(0.1, 10.0, 41)
}

fn default_alphas() -> Vec<f64> {
    log_grid(0.1, 10.0, 41)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhaseParams {
    #[serde(default = "default_betas")]
    pub betas: Vec<f64>,
    #[serde(default = "default_alphas")]
    pub alphas: Vec<f64>,
    #[serde(with = "norm_index", default = "default_r")]
    pub r: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeriesSpec {
    pub label: String,
    pub dgp: Dgp,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theory_slope: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ErmSeries {
    pub label: String,
    pub noise: NoiseModel,
    pub target: Target,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theory_slope: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateParams {
    pub statistic: Statistic,
    pub n_grid: Vec<u64>,
    pub replications: usize,
    #[serde(default)]
    pub series: Vec<SeriesSpec>,
    #[serde(default)]
    pub erm: Vec<ErmSeries>,
}

fn default_bins() -> usize {
    10
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MixingEstParams {
    pub dgp: Dgp,
    pub n: usize,
    pub q_max: usize,
    #[serde(default = "default_bins")]
    pub m_bins: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OtBenchParams {
    pub d: usize,
    pub beta: f64,
    pub n_grid: Vec<u64>,
    pub replications: usize,
    #[serde(default = "iid_dgp")]
    pub dgp_x: Dgp,
    #[serde(default = "iid_dgp")]
    pub dgp_y: Dgp,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps_override: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k_override: Option<usize>,
}

fn iid_dgp() -> Dgp {
    Dgp::Iid {}
}

fn default_chains() -> usize {
    5
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifyParams {
    #[serde(default = "default_chains")]
    pub chains: usize,
}

// Output plumbing.

fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().fold(String::new(), |mut s, b| {
        let _ = write!(s, "{:02x}", b);
        s
    })
}

/// Writes via a temporary sibling and a rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("out");
    let tmp = path.with_file_name(format!(".{}.tmp", name));
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)
}

struct Outputs {
    dir: PathBuf,
    files: BTreeMap<String, String>,
}

impl Outputs {
    fn write(&mut self, name: &str, content: &str) -> RunResult<()> {
        write_atomic(&self.dir.join(name), content.as_bytes()).map_err(io_err)?;
        self.files.insert(name.to_string(), sha256_hex(content.as_bytes()));
        Ok(())
    }

    fn json(&mut self, name: &str, v: &impl Serialize) -> RunResult<()> {
        let text = serde_json::to_string_pretty(v).map_err(|e| RunError::Numeric(format!("report: {}", e)))?;
        self.write(name, &(text + "\n"))
    }
}

/// What a run produced.
#[derive(Clone, Debug, PartialEq)]
pub struct RunOutcome {
    pub output_dir: PathBuf,
    pub files: Vec<String>,
    pub summary: String,
    pub failures: usize,
}

fn fmt_num(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{:.12e}", x)
    }
}

fn fmt_q(x: Option<crate::rates::Q>) -> (String, String) {
    match x {
        Some(q) => (format!("{}", q), fmt_num(to_f64(q))),
        None => ("".into(), "".into()),
    }
}

fn csv_header(cols: &str) -> String {
    format!("# schema_version={}\n{}\n", CSV_SCHEMA_VERSION, cols)
}

/// Applies the output-dir override, then runs the command.
pub fn run(cfg: &ExperimentConfig) -> RunResult<RunOutcome> {
    let mut resolved = cfg.clone();
    if let Ok(dir) = std::env::var(OUTPUT_DIR_ENV) {
        if !dir.is_empty() {
            resolved.output_dir = PathBuf::from(dir);
        }
    }
    run_resolved(resolved)
}

/// Runs without consulting the environment.
pub fn run_resolved(mut cfg: ExperimentConfig) -> RunResult<RunOutcome> {
    let mut out = Outputs { dir: cfg.output_dir.clone(), files: BTreeMap::new() };
    let (params, summary, failures) = match cfg.command {
        Command::Rates => {
            let p: RatesParams = parse_params(cfg.command, &cfg.params)?;
            let s = run_rates(&p, &mut out)?;
            (serde_json::to_value(&p), s, 0)
        }
        Command::Phase => {
            let p: PhaseParams = parse_params(cfg.command, &cfg.params)?;
            let s = run_phase(&p, &mut out)?;
            (serde_json::to_value(&p), s, 0)
        }
        Command::Simulate => {
            let p: SimulateParams = parse_params(cfg.command, &cfg.params)?;
            let s = run_simulate(&p, cfg.base_seed, &mut out)?;
            (serde_json::to_value(&p), s, 0)
        }
        Command::MixingEst => {
            let p: MixingEstParams = parse_params(cfg.command, &cfg.params)?;
            let s = run_mixing_est(&p, cfg.base_seed, &mut out)?;
            (serde_json::to_value(&p), s, 0)
        }
        Command::OtBench => {
            let p: OtBenchParams = parse_params(cfg.command, &cfg.params)?;
            let s = run_ot_bench(&p, cfg.base_seed, &mut out)?;
            (serde_json::to_value(&p), s, 0)
        }
        Command::Verify => {
            let p: VerifyParams = parse_params(cfg.command, &cfg.params)?;
            let (s, f) = run_verify(&p, cfg.base_seed, &mut out)?;
            (serde_json::to_value(&p), s, f)
        }
    };
    cfg.params = params.map_err(|e| RunError::Numeric(format!("report: {}", e)))?;
    let config_value = serde_json::to_value(&cfg).map_err(|e| RunError::Numeric(format!("report: {}", e)))?;
    let canonical = serde_json::to_string(&config_value).map_err(|e| RunError::Numeric(format!("report: {}", e)))?;
    let manifest = json!({
        "artifact": "mixrate",
        "version": env!("CARGO_PKG_VERSION"),
        "csv_schema_version": CSV_SCHEMA_VERSION,
        "command": cfg.command.as_str(),
        "config": config_value,
        "config_sha256": sha256_hex(canonical.as_bytes()),
        "files": out.files.clone(),
    });
    out.json("manifest.json", &manifest)?;
    Ok(RunOutcome {
        output_dir: out.dir.clone(),
        files: out.files.keys().cloned().collect(),
        summary,
        failures,
    })
}

fn run_rates(p: &RatesParams, out: &mut Outputs) -> RunResult<String> {
    let err = core_err("rates");
    let mut csv = csv_header("alpha,beta,norm,sigma_mode,regime,exponent,exponent_value,source");
    let mut boundaries = 0;
    for t in &p.tuples {
        let norm = RateNorm::from_f64(t.r).map_err(&err)?;
        let mode = match t.sigma {
            Some(s) => SigmaMode::Free(s),
            None => SigmaMode::Unit,
        };
        let rep = rate_exponent(rational(t.alpha).map_err(&err)?, rational(t.beta).map_err(&err)?, norm, mode)
            .map_err(&err)?;
        if rep.regime == Regime::Boundary {
            boundaries += 1;
        }
        let (e, ev) = fmt_q(rep.exponent);
        let sm = t.sigma.map_or("unit".to_string(), fmt_num);
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{},{},{}",
            fmt_num(t.alpha),
            fmt_num(t.beta),
            norm.label(),
            sm,
            rep.regime.as_str(),
            e,
            ev,
            rep.source
        );
    }
    out.write("rates.csv", &csv)?;
    let mut apps = csv_header("application,exponent,quantity,regime");
    for a in &p.applications {
        let name = serde_json::to_value(a).ok().and_then(|v| v["app"].as_str().map(String::from)).unwrap_or_default();
        match application_exponents(*a) {
            Ok(x) => {
                let _ = writeln!(apps, "{},{},{},{}", name, fmt_num(x.exponent), x.quantity, x.regime);
            }
            Err(Error::Boundary(_)) => {
                boundaries += 1;
                let _ = writeln!(apps, "{},,,boundary", name);
            }
            Err(e) => return Err(err(e)),
        }
    }
    out.write("applications.csv", &apps)?;
    if let Some(b) = &p.bound {
        let mut bcsv = csv_header("n,a,tail_term,total,tau_sigma,near_scale_edge");
        let mut pts = Vec::new();
        for &n in &b.n_grid {
            let rb = main_bound(&b.entropy, &b.profile, n as usize).map_err(&err)?;
            let _ = writeln!(
                bcsv,
                "{},{},{},{},{},{}",
                n,
                fmt_num(rb.a),
                fmt_num(rb.tail_term),
                fmt_num(rb.total),
                rb.diagnostics.tau_sigma,
                rb.diagnostics.near_scale_edge
            );
            pts.push((n, rb.total, 0.0));
        }
        out.write("bound.csv", &bcsv)?;
        let fit = slope_fit_with_errors(&pts).ok();
        let overlay = theory_slope_for(b).map(|s| TheoryLine::through("theory", s, &pts));
        let series = vec![Series::from_triples("bound", &pts)];
        let svg = emit_svg(&series, &overlay.into_iter().collect::<Vec<_>>(), "bound vs n").map_err(&err)?;
        out.write("bound.svg", &svg)?;
        out.json("bound_fit.json", &fit)?;
    }
    Ok(format!("rates: {} tuples, {} applications, {} boundary flags", p.tuples.len(), p.applications.len(), boundaries))
}

/// Closed-form growth exponent for a single power-law entropy and polynomial profile.
fn theory_slope_for(b: &BoundParams) -> Option<f64> {
    let term = b.entropy.single().ok()?;
    if term.v != 0.0 {
        return None;
    }
    let beta = match b.profile.kind {
        ProfileKind::Polynomial { exponent, .. } => exponent,
        _ => return None,
    };
    let norm = RateNorm::from_f64(b.entropy.r).ok()?;
    let rep = rate_exponent(rational(term.alpha).ok()?, rational(beta).ok()?, norm, SigmaMode::Unit).ok()?;
    rep.exponent.map(to_f64)
}

fn run_phase(p: &PhaseParams, out: &mut Outputs) -> RunResult<String> {
    let err = core_err("rates");
    let norm = RateNorm::from_f64(p.r).map_err(&err)?;
    let diag = phase_diagram(&p.betas, &p.alphas, norm).map_err(&err)?;
    let mut csv = csv_header("beta,alpha,regime,exponent,exponent_value");
    for c in &diag.cells {
        let (e, ev) = fmt_q(c.report.exponent);
        let _ = writeln!(csv, "{},{},{},{},{}", c.beta, c.alpha, c.report.regime.as_str(), e, ev);
    }
    out.write("phase.csv", &csv)?;
    let mut curve = csv_header("beta,alpha,beta_value,alpha_value");
    for (b, a) in &diag.curve {
        let _ = writeln!(curve, "{},{},{},{}", b, a, fmt_num(to_f64(*b)), fmt_num(to_f64(*a)));
    }
    out.write("boundary.csv", &curve)?;
    out.write("phase.svg", &phase_svg(&diag).map_err(&err)?)?;
    Ok(format!("phase: {} cells, {} boundary points, norm {}", diag.cells.len(), diag.curve.len(), norm.label()))
}

fn run_simulate(p: &SimulateParams, seed: u64, out: &mut Outputs) -> RunResult<String> {
    let err = core_err("empirical");
    if p.series.is_empty() && p.erm.is_empty() {
        return Err(RunError::Schema("simulate params: need at least one series or erm entry".into()));
    }
    let mut csv = csv_header("label,n,mean,standard_error");
    let mut series = Vec::new();
    let mut overlays = Vec::new();
    let mut fits = BTreeMap::new();
    for (i, s) in p.series.iter().enumerate() {
        let mut pts = Vec::new();
        for &n in &p.n_grid {
            let base = seed.wrapping_add((i as u64) << 40).wrapping_add(n << 20);
            let est = mc_sup_expectation(&s.dgp, p.statistic, n as usize, p.replications, base).map_err(&err)?;
            let _ = writeln!(csv, "{},{},{},{}", s.label, n, fmt_num(est.mean), fmt_num(est.standard_error));
            pts.push((n, est.mean, est.standard_error));
        }
        let fit = slope_fit_with_errors(&pts).map_err(&err)?;
        if let Some(t) = s.theory_slope {
            overlays.push(TheoryLine::through(&format!("{} theory", s.label), t, &pts));
        }
        series.push(Series::from_triples(&s.label, &pts));
        fits.insert(s.label.clone(), summarize(fit, s.theory_slope));
    }
    for (i, e) in p.erm.iter().enumerate() {
        let cfg = ErmConfig {
            noise: e.noise,
            target: e.target,
            n_grid: p.n_grid.clone(),
            replications: p.replications,
            base_seed: seed.wrapping_add(((p.series.len() + i) as u64) << 40),
        };
        let fit = erm_risk_curve(&cfg).map_err(&err)?;
        let pts: Vec<(u64, f64, f64)> = fit
            .n_grid
            .iter()
            .zip(&fit.estimates)
            .zip(&fit.standard_errors)
            .map(|((&n, &m), &s)| (n, m, s))
            .collect();
        for &(n, m, s) in &pts {
            let _ = writeln!(csv, "{},{},{},{}", e.label, n, fmt_num(m), fmt_num(s));
        }
        if let Some(t) = e.theory_slope {
            overlays.push(TheoryLine::through(&format!("{} theory", e.label), t, &pts));
        }
        series.push(Series::from_triples(&e.label, &pts));
        fits.insert(e.label.clone(), summarize(fit, e.theory_slope));
    }
    out.write("simulate.csv", &csv)?;
    out.json("summary.json", &fits)?;
    let svg = emit_svg(&series, &overlays, &format!("{} vs n", p.statistic.as_str())).map_err(&err)?;
    out.write("simulate.svg", &svg)?;
    let slopes: Vec<String> = fits.iter().map(|(k, f)| format!("{}={:.4} ({})", k, f.slope, f.verdict)).collect();
    Ok(format!("simulate: slopes {}", slopes.join(", ")))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SlopeSummary {
    pub slope: f64,
    pub slope_se: f64,
    pub theory_exponent: Option<f64>,
    pub verdict: &'static str,
    pub fit: SlopeFit,
}

/// Consistent when within three standard errors or 0.05 of the theory slope.
pub fn summarize(fit: SlopeFit, theory: Option<f64>) -> SlopeSummary {
    let verdict = match theory {
        None => "no_theory",
        Some(t) if (fit.slope - t).abs() <= (3.0 * fit.slope_se).max(0.05) => "consistent",
        Some(_) => "inconsistent",
    };
    SlopeSummary { slope: fit.slope, slope_se: fit.slope_se, theory_exponent: theory, verdict, fit }
}

fn run_mixing_est(p: &MixingEstParams, seed: u64, out: &mut Outputs) -> RunResult<String> {
    let err = core_err("mixing");
    if p.q_max == 0 {
        return Err(RunError::Schema("mixing-est params: q_max must be positive".into()));
    }
    let sample = p.dgp.sample(p.n, seed).map_err(&err)?;
    let profile = p.dgp.profile().map_err(&err)?;
    let reference = match profile.kind {
        ProfileKind::ExactMarkov { .. } => "exact",
        _ => "model",
    };
    let mut csv = csv_header("q,estimate,reference,reference_kind");
    let mut worst: f64 = 0.0;
    for q in 1..=p.q_max {
        let est = estimate_beta_binning(&sample, q, p.m_bins).map_err(&err)?;
        let r = profile.coefficient(q);
        worst = worst.max((est - r).abs());
        let _ = writeln!(csv, "{},{},{},{}", q, fmt_num(est), fmt_num(r), reference);
    }
    out.write("mixing.csv", &csv)?;
    Ok(format!("mixing-est: q <= {}, max |estimate - {}| = {:.4}", p.q_max, reference, worst))
}

fn run_ot_bench(p: &OtBenchParams, seed: u64, out: &mut Outputs) -> RunResult<String> {
    let err = core_err("ot");
    let cfg = OtConfig {
        d: p.d,
        beta: p.beta,
        n_grid: p.n_grid.clone(),
        replications: p.replications,
        base_seed: seed,
        dgp_x: p.dgp_x.clone(),
        dgp_y: p.dgp_y.clone(),
        eps_override: p.eps_override,
        k_override: p.k_override,
    };
    let rep = compare_estimators(&cfg).map_err(&err)?;
    let mut csv = csv_header("n,k,eps,exact,sinkhorn,exact_seconds,sinkhorn_seconds");
    for r in &rep.rows {
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{},{}",
            r.n,
            r.k,
            fmt_num(r.eps),
            fmt_num(r.exact_mean),
            fmt_num(r.sinkhorn_mean),
            fmt_num(r.exact_seconds),
            fmt_num(r.sinkhorn_seconds)
        );
    }
    out.write("ot.csv", &csv)?;
    let ee = rep.exact_time_fit.as_ref().map(|f| f.slope);
    let se = rep.sinkhorn_time_fit.as_ref().map(|f| f.slope);
    let verdict = json!({
        "regime": rep.regime,
        "exact_runtime_exponent": ee,
        "sinkhorn_runtime_exponent": se,
        "sinkhorn_runtime_smaller": match (ee, se) { (Some(a), Some(b)) => Some(b <= a - 0.2), _ => None },
    });
    out.json("verdict.json", &verdict)?;
    Ok(format!("ot-bench: regime {}, runtime exponents exact {:?} sinkhorn {:?}", rep.regime, ee, se))
}

// Invariant bank.

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub passed: usize,
    pub failed: usize,
}

fn random_chain(rng: &mut ChaCha8Rng, states: usize) -> Vec<Vec<f64>> {
    (0..states)
        .map(|_| {
            let row: Vec<f64> = (0..states).map(|_| rng.gen::<f64>() + 0.05).collect();
            let s: f64 = row.iter().sum();
            row.into_iter().map(|x| x / s).collect()
        })
        .collect()
}

fn dense_power_beta(p: &[Vec<f64>], pi: &[f64], q: usize) -> f64 {
    let m = p.len();
    let mut pw: Vec<Vec<f64>> = (0..m).map(|i| (0..m).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect();
    for _ in 0..q {
        pw = (0..m).map(|i| (0..m).map(|j| (0..m).map(|k| pw[i][k] * p[k][j]).sum()).collect()).collect();
    }
    let mut s = 0.0;
    for i in 0..m {
        for j in 0..m {
            s += (pi[i] * pw[i][j] - pi[i] * pi[j]).abs();
        }
    }
    0.5 * s
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for pos in 0..=p.len() {
            let mut q = p.clone();
            q.insert(pos, n - 1);
            out.push(q);
        }
    }
    out
}

fn brute_w2(x: &[Vec<f64>], y: &[Vec<f64>]) -> f64 {
    permutations(x.len())
        .iter()
        .map(|p| {
            p.iter()
                .enumerate()
                .map(|(i, &j)| x[i].iter().zip(&y[j]).map(|(a, b)| (a - b) * (a - b)).sum::<f64>())
                .sum::<f64>()
                / x.len() as f64
        })
        .fold(f64::INFINITY, f64::min)
}

fn random_cloud(rng: &mut ChaCha8Rng, n: usize, d: usize) -> Vec<Vec<f64>> {
    (0..n).map(|_| (0..d).map(|_| rng.gen::<f64>() * 2.0 - 1.0).collect()).collect()
}

/// Runs the invariant bank; each check counts individual instances.
pub fn verify_bank(chains: usize, seed: u64) -> Vec<CheckResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut results = Vec::new();
    let mut tally = |name: &str, outcomes: Vec<bool>| {
        let passed = outcomes.iter().filter(|&&b| b).count();
        results.push(CheckResult { name: name.into(), passed, failed: outcomes.len() - passed });
    };

    let mut v = Vec::new();
    for _ in 0..chains {
        let p = random_chain(&mut rng, 5);
        for _ in 0..3 {
            let h: Vec<f64> = (0..5).map(|_| rng.gen::<f64>() * 2.0 - 1.0).collect();
            for q in 1..=10 {
                for r in [3.0, 4.0, 8.0] {
                    v.push(verify_variance_bound(&p, &h, q, r).map(|rep| rep.holds).unwrap_or(false));
                }
            }
        }
    }
    tally("variance_bound", v);

    let mut v = Vec::new();
    for _ in 0..chains * 4 {
        let beta = 0.2 + 3.0 * rng.gen::<f64>();
        let alpha = 0.5 + 4.0 * rng.gen::<f64>();
        let n = 1usize << rng.gen_range(8..14);
        let delta = 0.05 + 0.9 * rng.gen::<f64>();
        let ok = (|| -> crate::error::Result<bool> {
            let prof = MixingProfile::polynomial(1.0, beta)?;
            let ent = EntropyModel::power(1.0, alpha, 4.0, 1.0, 1.0)?;
            Ok(tau_q_scan(&prof, &ent, delta, n)? == tau_q_bisect(&prof, &ent, delta, n)?)
        })();
        v.push(ok.unwrap_or(false));
    }
    tally("tau_q_scan_vs_bisect", v);

    let mut v = Vec::new();
    for _ in 0..chains * 2 {
        let p = random_chain(&mut rng, 4);
        let pi = match stationary_distribution(&p) {
            Ok(pi) => pi,
            Err(_) => {
                v.push(false);
                continue;
            }
        };
        for q in 1..=3 {
            let ok = exact_beta_markov(&p, &pi, q).map(|b| (b - dense_power_beta(&p, &pi, q)).abs() < 1e-12);
            v.push(ok.unwrap_or(false));
        }
    }
    tally("exact_beta_vs_joint_table", v);

    let mut v = Vec::new();
    for _ in 0..chains {
        let x = random_cloud(&mut rng, 6, 2);
        let y = random_cloud(&mut rng, 7, 2);
        v.push(sinkhorn_divergence(&x, &x, 0.5, 20).map(|d| d.abs() <= 1e-10).unwrap_or(false));
        let ok = (|| -> crate::error::Result<bool> {
            Ok(t_eps_k(&x, &y, 0.5, 1)? <= t_eps_k(&x, &y, 0.5, 100)? + 1e-10)
        })();
        v.push(ok.unwrap_or(false));
        v.push(sinkhorn_divergence(&x, &y, 0.5, 500).map(|d| d >= -1e-8).unwrap_or(false));
    }
    tally("sinkhorn_sanity", v);

    let mut v = Vec::new();
    for i in 0..chains * 2 {
        let n = 1 + i % 6;
        let x = random_cloud(&mut rng, n, 2);
        let y = random_cloud(&mut rng, n, 2);
        v.push(exact_w2(&x, &y).map(|w| (w - brute_w2(&x, &y)).abs() < 1e-12).unwrap_or(false));
        let a: Vec<f64> = (0..20).map(|_| rng.gen::<f64>()).collect();
        let b: Vec<f64> = (0..20).map(|_| rng.gen::<f64>()).collect();
        let xa: Vec<Vec<f64>> = a.iter().map(|&t| vec![t]).collect();
        let yb: Vec<Vec<f64>> = b.iter().map(|&t| vec![t]).collect();
        let ok = (|| -> crate::error::Result<bool> {
            Ok((sorted_w2_1d(&a, &b)? - assignment_w2(&xa, &yb)?).abs() < 1e-12)
        })();
        v.push(ok.unwrap_or(false));
    }
    tally("exact_w2_oracles", v);

    let mut v = Vec::new();
    let norm = RateNorm::Sup;
    v.push(crate::rates::boundary_alpha(crate::rates::Q::from_integer(1), norm) == crate::rates::Q::from_integer(2));
    tally("phase_curve_anchor", v);
    results
}

fn run_verify(p: &VerifyParams, seed: u64, out: &mut Outputs) -> RunResult<(String, usize)> {
    if p.chains == 0 {
        return Err(RunError::Schema("verify params: chains must be positive".into()));
    }
    let results = verify_bank(p.chains, seed);
    let passed: usize = results.iter().map(|r| r.passed).sum();
    let failed: usize = results.iter().map(|r| r.failed).sum();
    out.json("verify.json", &json!({"checks": results, "passed": passed, "failed": failed}))?;
    Ok((format!("verify: {} passed, {} failed", passed, failed), failed))
}

// SVG output.

#[derive(Clone, Debug, PartialEq)]
pub struct Point {
    pub x: f64,
    pub y: f64,
    pub err: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Series {
    pub label: String,
    pub points: Vec<Point>,
}

impl Series {
    pub fn from_triples(label: &str, pts: &[(u64, f64, f64)]) -> Self {
        Self {
            label: label.into(),
            points: pts
                .iter()
                .map(|&(n, y, e)| Point { x: n as f64, y, err: if e.is_finite() { e } else { 0.0 } })
                .collect(),
        }
    }
}

/// Line `y = anchor_y (x / anchor_x)^slope` on log-log axes.
#[derive(Clone, Debug, PartialEq)]
pub struct TheoryLine {
    pub label: String,
    pub slope: f64,
    pub anchor: (f64, f64),
}

impl TheoryLine {
    /// Anchored at the geometric centre of the data.
    pub fn through(label: &str, slope: f64, pts: &[(u64, f64, f64)]) -> Self {
        let good: Vec<(f64, f64)> =
            pts.iter().filter(|p| p.1 > 0.0).map(|p| ((p.0 as f64).ln(), p.1.ln())).collect();
        let k = good.len().max(1) as f64;
        let lx = good.iter().map(|p| p.0).sum::<f64>() / k;
        let ly = good.iter().map(|p| p.1).sum::<f64>() / k;
        Self { label: label.into(), slope, anchor: (lx.exp(), ly.exp()) }
    }
}

const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];
const W: f64 = 640.0;
const H: f64 = 440.0;
const ML: f64 = 70.0;
const MR: f64 = 170.0;
const MT: f64 = 40.0;
const MB: f64 = 50.0;

fn esc(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Log-log plot with error bars, theory lines and a legend.
pub fn emit_svg(series: &[Series], overlays: &[TheoryLine], title: &str) -> crate::error::Result<String> {
    let pts: Vec<&Point> = series.iter().flat_map(|s| &s.points).filter(|p| p.x > 0.0 && p.y > 0.0).collect();
    if pts.is_empty() {
        return crate::error::invalid("plot needs at least one positive point");
    }
    let lx = |x: f64| x.log10();
    let (mut x0, mut x1) = pts.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), p| (a.min(lx(p.x)), b.max(lx(p.x))));
    let (mut y0, mut y1) = pts.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), p| {
        let lo = if p.y - p.err > 0.0 { p.y - p.err } else { p.y };
        (a.min(lx(lo)), b.max(lx(p.y + p.err)))
    });
    if x1 - x0 < 1e-9 {
        x0 -= 0.5;
        x1 += 0.5;
    }
    if y1 - y0 < 1e-9 {
        y0 -= 0.5;
        y1 += 0.5;
    }
    let pad = 0.05 * (y1 - y0);
    y0 -= pad;
    y1 += pad;
    let px = |x: f64| ML + (lx(x) - x0) / (x1 - x0) * (W - ML - MR);
    let py = |y: f64| H - MB - (lx(y) - y0) / (y1 - y0) * (H - MT - MB);
    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#);
    let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{:.1}" y="22" text-anchor="middle" font-size="14">{}</text>"#, (W - MR + ML) / 2.0, esc(title));
    let _ = writeln!(
        s,
        r#"<rect x="{ML}" y="{MT}" width="{:.1}" height="{:.1}" fill="none" stroke="black"/>"#,
        W - ML - MR,
        H - MT - MB
    );
    for (lo, hi, horizontal) in [(x0, x1, true), (y0, y1, false)] {
        let mut d = lo.ceil() as i32;
        let step = if hi - lo > 8.0 { 2 } else { 1 };
        while (d as f64) <= hi {
            let v = 10f64.powi(d);
            if horizontal {
                let x = px(v);
                let _ = writeln!(s, r#"<line x1="{x:.1}" y1="{:.1}" x2="{x:.1}" y2="{:.1}" stroke="black"/>"#, H - MB, H - MB + 5.0);
                let _ = writeln!(s, r#"<text x="{x:.1}" y="{:.1}" text-anchor="middle">1e{d}</text>"#, H - MB + 18.0);
            } else {
                let y = py(v);
                let _ = writeln!(s, r#"<line x1="{:.1}" y1="{y:.1}" x2="{ML}" y2="{y:.1}" stroke="black"/>"#, ML - 5.0);
                let _ = writeln!(s, r#"<text x="{:.1}" y="{:.1}" text-anchor="end">1e{d}</text>"#, ML - 8.0, y + 4.0);
            }
            d += step;
        }
    }
    let _ = writeln!(s, r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">n</text>"#, (W - MR + ML) / 2.0, H - 10.0);
    let mut legend = Vec::new();
    for (i, ser) in series.iter().enumerate() {
        let c = PALETTE[i % PALETTE.len()];
        for p in ser.points.iter().filter(|p| p.x > 0.0 && p.y > 0.0) {
            let (x, y) = (px(p.x), py(p.y));
            if p.err > 0.0 {
                let lo = if p.y - p.err > 0.0 { py(p.y - p.err) } else { H - MB };
                let hi = py(p.y + p.err);
                let _ = writeln!(s, r#"<line x1="{x:.1}" y1="{lo:.1}" x2="{x:.1}" y2="{hi:.1}" stroke="{c}"/>"#);
            }
            let _ = writeln!(s, r#"<circle cx="{x:.1}" cy="{y:.1}" r="3" fill="{c}"/>"#);
        }
        legend.push((ser.label.clone(), c, false));
    }
    let (xa, xb) = (10f64.powf(x0), 10f64.powf(x1));
    for (i, t) in overlays.iter().enumerate() {
        let c = PALETTE[(series.len() + i) % PALETTE.len()];
        let f = |x: f64| t.anchor.1 * (x / t.anchor.0).powf(t.slope);
        let _ = writeln!(
            s,
            r#"<line x1="{:.1}" y1="{:.1}" x2="{:.1}" y2="{:.1}" stroke="{c}" stroke-dasharray="6,4" clip-path="url(#plot)"/>"#,
            px(xa),
            py(f(xa)),
            px(xb),
            py(f(xb))
        );
        legend.push((format!("{} (slope {:.3})", t.label, t.slope), c, true));
    }
    let _ = writeln!(
        s,
        r#"<defs><clipPath id="plot"><rect x="{ML}" y="{MT}" width="{:.1}" height="{:.1}"/></clipPath></defs>"#,
        W - ML - MR,
        H - MT - MB
    );
    for (i, (label, c, dashed)) in legend.iter().enumerate() {
        let y = MT + 14.0 + 18.0 * i as f64;
        let x = W - MR + 12.0;
        let dash = if *dashed { r#" stroke-dasharray="6,4""# } else { "" };
        let _ = writeln!(s, r#"<line x1="{x:.1}" y1="{y:.1}" x2="{:.1}" y2="{y:.1}" stroke="{c}" stroke-width="2"{dash}/>"#, x + 20.0);
        let _ = writeln!(s, r#"<text x="{:.1}" y="{:.1}">{}</text>"#, x + 26.0, y + 4.0, esc(label));
    }
    s.push_str("</svg>\n");
    Ok(s)
}

fn regime_color(r: Regime) -> &'static str {
    match r {
        Regime::IidLike => "#9ecae1",
        Regime::DependenceDominated => "#fc9272",
        Regime::DonskerBounded => "#a1d99b",
        Regime::Boundary => "#bdbdbd",
    }
}

/// Regime cells on linear `(β, α)` axes with the boundary polyline.
pub fn phase_svg(diag: &PhaseDiagram) -> crate::error::Result<String> {
    if diag.cells.is_empty() {
        return crate::error::invalid("empty phase diagram");
    }
    let mut betas: Vec<f64> = diag.cells.iter().map(|c| to_f64(c.beta)).collect();
    let mut alphas: Vec<f64> = diag.cells.iter().map(|c| to_f64(c.alpha)).collect();
    betas.sort_by(f64::total_cmp);
    betas.dedup();
    alphas.sort_by(f64::total_cmp);
    alphas.dedup();
    let edges = |v: &[f64]| -> Vec<f64> {
        let mut e = Vec::with_capacity(v.len() + 1);
        e.push(if v.len() > 1 { (v[0] - (v[1] - v[0]) / 2.0).max(0.0) } else { 0.0 });
        for w in v.windows(2) {
            e.push(0.5 * (w[0] + w[1]));
        }
        let last = v[v.len() - 1];
        e.push(if v.len() > 1 { last + (last - v[v.len() - 2]) / 2.0 } else { 2.0 * last });
        e
    };
    let be = edges(&betas);
    let ae = edges(&alphas);
    let (bx0, bx1) = (be[0], be[be.len() - 1]);
    let (ay0, ay1) = (ae[0], ae[ae.len() - 1]);
    let px = |b: f64| ML + (b - bx0) / (bx1 - bx0) * (W - ML - MR);
    let py = |a: f64| H - MB - (a - ay0) / (ay1 - ay0) * (H - MT - MB);
    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#);
    let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="22" text-anchor="middle" font-size="14">phase diagram, norm {}</text>"#,
        (W - MR + ML) / 2.0,
        esc(&diag.norm.label())
    );
    let bi = |b: f64| betas.iter().position(|&x| x == b).unwrap_or(0);
    let ai = |a: f64| alphas.iter().position(|&x| x == a).unwrap_or(0);
    for c in &diag.cells {
        let (i, j) = (bi(to_f64(c.beta)), ai(to_f64(c.alpha)));
        let (x0, x1) = (px(be[i]), px(be[i + 1]));
        let (y0, y1) = (py(ae[j + 1]), py(ae[j]));
        let _ = writeln!(
            s,
            r#"<rect x="{x0:.2}" y="{y0:.2}" width="{:.2}" height="{:.2}" fill="{}"/>"#,
            x1 - x0,
            y1 - y0,
            regime_color(c.report.regime)
        );
    }
    let _ = writeln!(
        s,
        r#"<defs><clipPath id="plot"><rect x="{ML}" y="{MT}" width="{:.1}" height="{:.1}"/></clipPath></defs>"#,
        W - ML - MR,
        H - MT - MB
    );
    let poly: Vec<String> = diag
        .curve
        .iter()
        .map(|&(b, a)| format!("{:.2},{:.2}", px(to_f64(b)), py(to_f64(a))))
        .collect();
    let _ = writeln!(s, r#"<polyline points="{}" fill="none" stroke="black" stroke-width="2" clip-path="url(#plot)"/>"#, poly.join(" "));
    let _ = writeln!(
        s,
        r#"<rect x="{ML}" y="{MT}" width="{:.1}" height="{:.1}" fill="none" stroke="black"/>"#,
        W - ML - MR,
        H - MT - MB
    );
    for k in 0..=4 {
        let b = bx0 + (bx1 - bx0) * k as f64 / 4.0;
        let a = ay0 + (ay1 - ay0) * k as f64 / 4.0;
        let _ = writeln!(s, r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{:.2}</text>"#, px(b), H - MB + 18.0, b);
        let _ = writeln!(s, r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{:.2}</text>"#, ML - 8.0, py(a) + 4.0, a);
    }
    let _ = writeln!(s, r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">beta</text>"#, (W - MR + ML) / 2.0, H - 10.0);
    let _ = writeln!(s, r#"<text x="16" y="{:.1}" transform="rotate(-90 16 {:.1})" text-anchor="middle">alpha</text>"#, H / 2.0, H / 2.0);
    let items = [Regime::IidLike, Regime::DependenceDominated, Regime::DonskerBounded, Regime::Boundary];
    for (i, r) in items.iter().enumerate() {
        let y = MT + 14.0 + 18.0 * i as f64;
        let x = W - MR + 12.0;
        let _ = writeln!(s, r#"<rect x="{x:.1}" y="{:.1}" width="14" height="12" fill="{}"/>"#, y - 8.0, regime_color(*r));
        let _ = writeln!(s, r#"<text x="{:.1}" y="{:.1}">{}</text>"#, x + 20.0, y + 2.0, r.as_str());
    }
    let y = MT + 14.0 + 18.0 * items.len() as f64;
    let x = W - MR + 12.0;
    let _ = writeln!(s, r#"<line x1="{x:.1}" y1="{y:.1}" x2="{:.1}" y2="{y:.1}" stroke="black" stroke-width="2"/>"#, x + 14.0);
    let _ = writeln!(s, r#"<text x="{:.1}" y="{:.1}">boundary</text>"#, x + 20.0, y + 4.0);
    s.push_str("</svg>\n");
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_keys_rejected() {
        let e = parse_config(r#"{"command":"phase","bogus":1}"#).unwrap_err();
        assert_eq!(e.exit_code(), 2);
        let cfg = parse_config(r#"{"command":"phase","params":{"bogus":1}}"#).unwrap();
        let e = run_resolved(cfg).unwrap_err();
        assert_eq!(e.exit_code(), 2);
    }

    #[test]
    fn constant_series_has_flat_overlay() {
        let pts = [(10u64, 2.0, 0.0), (100, 2.0, 0.0), (1000, 2.0, 0.0)];
        let t = TheoryLine::through("flat", 0.0, &pts);
        assert!((t.anchor.1 - 2.0).abs() < 1e-12);
        let svg = emit_svg(&[Series::from_triples("c", &pts)], &[t], "const").unwrap();
        assert!(svg.contains("slope 0.000"));
        assert!(emit_svg(&[], &[], "x").is_err());
    }
}
