//! Pivotal quantities, maximal-inequality bounds and closed-form rates.

use num_rational::Ratio;
use num_traits::{One, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::classes::{norm_index, EntropyModel, NormIndex};
use crate::error::{invalid, Error, Result};
use crate::mixing::{MixingProfile, ProfileKind};

pub type Q = Ratio<i128>;

fn q(n: i128, d: i128) -> Q {
    Q::new(n, d)
}

/// Rational approximation of a float, for grid inputs.
pub fn rational(x: f64) -> Result<Q> {
    Q::approximate_float(x).ok_or_else(|| Error::Invalid(format!("cannot represent {} as a ratio", x)))
}

pub fn to_f64(x: Q) -> f64 {
    x.to_f64().unwrap_or(f64::NAN)
}

/// `sqrt(1 + sup_{x>=0}(x − x^{r/2}))` for the power Orlicz function.
pub fn c_phi(r: f64) -> Result<f64> {
    if !(r > 2.0) {
        return invalid(format!("r = {} is outside the power Orlicz family (needs r > 2)", r));
    }
    if r.is_infinite() {
        return Ok(2f64.sqrt());
    }
    let x = (2.0 / r).powf(1.0 / (r / 2.0 - 1.0));
    Ok((1.0 + x * (1.0 - 2.0 / r)).sqrt())
}

/// Coefficient access with a precomputed table for exact chains.
pub(crate) struct Coefficients<'a> {
    profile: &'a MixingProfile,
    table: Option<Vec<f64>>,
}

impl<'a> Coefficients<'a> {
    pub(crate) fn new(profile: &'a MixingProfile, q_max: usize) -> Self {
        let table = match profile.kind {
            ProfileKind::ExactMarkov { .. } => Some(profile.coefficients(q_max)),
            _ => None,
        };
        Self { profile, table }
    }

    pub(crate) fn get(&self, q: usize) -> f64 {
        match &self.table {
            Some(t) if q < t.len() => t[q],
            _ => self.profile.coefficient(q),
        }
    }
}

/// `(1−2/r)^{-1} Σ_{i=0}^q β_i^{1−2/r}`.
pub fn lambda_phi_beta(profile: &MixingProfile, q: usize, r: f64) -> Result<f64> {
    if !(r > 2.0 && r.is_finite()) {
        return invalid("lambda needs a finite r > 2");
    }
    let c = Coefficients::new(profile, q);
    let p = 1.0 - 2.0 / r;
    let s: f64 = (0..=q).map(|i| c.get(i).powf(p)).sum();
    Ok(s / p)
}

/// `1 + Σ_{k=1}^q β_k`, the uniform-bracketing analogue.
pub fn lambda_sup(profile: &MixingProfile, q: usize) -> f64 {
    let c = Coefficients::new(profile, q);
    (0..=q).map(|i| c.get(i)).sum()
}

/// `1 + Σ_{k>=0, 2^{-k}σ >= δ} H(2^{-k}σ)`.
pub fn complexity_sum(entropy: &EntropyModel, delta: f64) -> f64 {
    let mut s = 1.0;
    let mut u = entropy.sigma;
    while u >= delta {
        s += entropy.eval_unchecked(u);
        u *= 0.5;
    }
    s
}

fn check_delta(entropy: &EntropyModel, delta: f64, n: usize) -> Result<()> {
    if n == 0 {
        return invalid("n must be positive");
    }
    if !(delta > 0.0 && delta <= entropy.sigma) {
        return invalid(format!("delta = {} outside (0, sigma = {}]", delta, entropy.sigma));
    }
    Ok(())
}

fn crosses(c: &Coefficients, q: usize, n: usize, s: f64) -> bool {
    c.get(q) <= q as f64 / n as f64 * s
}

/// First crossing by linear scan over `q = 1..=n`.
pub fn tau_q_scan(profile: &MixingProfile, entropy: &EntropyModel, delta: f64, n: usize) -> Result<usize> {
    check_delta(entropy, delta, n)?;
    let c = Coefficients::new(profile, n);
    let s = complexity_sum(entropy, delta);
    Ok((1..=n).find(|&q| crosses(&c, q, n, s)).unwrap_or(n))
}

/// First crossing by bisection; valid because `β_q` is non-increasing and the
/// right side increases in `q`.
pub fn tau_q_bisect(profile: &MixingProfile, entropy: &EntropyModel, delta: f64, n: usize) -> Result<usize> {
    check_delta(entropy, delta, n)?;
    let c = Coefficients::new(profile, n);
    let s = complexity_sum(entropy, delta);
    Ok(bisect_first(&c, n, s))
}

fn bisect_first(c: &Coefficients, n: usize, s: f64) -> usize {
    let (mut lo, mut hi) = (1usize, n);
    while lo < hi {
        let mid = lo + (hi - lo) / 2;
        if crosses(c, mid, n, s) {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    lo
}

pub fn tau_q(profile: &MixingProfile, entropy: &EntropyModel, delta: f64, n: usize) -> Result<usize> {
    if n <= 10_000 {
        tau_q_scan(profile, entropy, delta, n)
    } else {
        tau_q_bisect(profile, entropy, delta, n)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct FiniteClassBound {
    pub value: f64,
    pub q: usize,
}

/// Maximal inequality for a finite class, minimized over the block length.
pub fn finite_class_bound(
    sigma: f64,
    b: f64,
    cardinality: u64,
    n: usize,
    profile: &MixingProfile,
    r: f64,
) -> Result<FiniteClassBound> {
    if cardinality == 0 || n == 0 {
        return invalid("cardinality and n must be positive");
    }
    if !(sigma > 0.0 && b > 0.0) {
        return invalid("sigma and b must be positive");
    }
    let cphi2 = c_phi(r)?.powi(2);
    let p = 1.0 - 2.0 / r;
    let l = 1.0 + (cardinality as f64).ln();
    let rn = (n as f64).sqrt();
    let c = Coefficients::new(profile, n);
    let mut acc = c.get(0).powf(p);
    let mut best = FiniteClassBound { value: f64::INFINITY, q: 1 };
    for qq in 1..=n {
        let beta = c.get(qq);
        acc += beta.powf(p);
        let pi = (cphi2 + 2.0 * acc / p).sqrt();
        let v = sigma * pi * l.sqrt() + b * qq as f64 * l / rn + b * beta * rn;
        if v < best.value {
            best = FiniteClassBound { value: v, q: qq };
        }
    }
    Ok(best)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BoundDiagnostics {
    pub tau_sigma: usize,
    pub lambda_sigma: f64,
    /// `(a − ∫)/a` at the returned `a`.
    pub integral_residual: f64,
    /// `σ` within a factor 2 of `n^{-1/α}` (largest α over the terms).
    pub near_scale_edge: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RateBound {
    pub a: f64,
    pub tail_term: f64,
    pub total: f64,
    pub diagnostics: BoundDiagnostics,
}

/// Number of δ-grid points per decade for the envelopes.
pub const GRID_PER_DECADE: f64 = 64.0;

/// Piecewise-constant majorant of `√R` on a decreasing δ-grid.
struct Envelope {
    /// `grid[0] = σ > grid[1] > ...`
    grid: Vec<f64>,
    /// `root[j]` bounds `√R(u)` for `u` in `[grid[j+1], grid[j]]`.
    root: Vec<f64>,
}

impl Envelope {
    fn integral_from(&self, lower: f64) -> f64 {
        let mut s = 0.0;
        for j in 0..self.root.len() {
            let (hi, lo) = (self.grid[j], self.grid[j + 1]);
            if hi <= lower {
                break;
            }
            s += self.root[j] * (hi - lo.max(lower));
        }
        s
    }
}

/// Chaining bound with constants set to 1, for `r > 2` or uniform brackets.
pub fn main_bound(entropy: &EntropyModel, profile: &MixingProfile, n: usize) -> Result<RateBound> {
    entropy.validate()?;
    if n == 0 {
        return invalid("n must be positive");
    }
    let norm = entropy.norm();
    if let NormIndex::Low(_) = norm {
        return invalid("main_bound needs r > 2 or uniform brackets; use pi_n for r <= 2");
    }
    let sigma = entropy.sigma;
    let rn = (n as f64).sqrt();
    let d_min = sigma / (128.0 * rn);
    let decades = (sigma / d_min).log10();
    let steps = (GRID_PER_DECADE * decades).ceil() as usize;
    let mut grid: Vec<f64> = (0..=steps).map(|j| sigma * (d_min / sigma).powf(j as f64 / steps as f64)).collect();
    grid[0] = sigma;

    let coefs = Coefficients::new(profile, n);
    let taus: Vec<usize> = grid.iter().map(|&d| bisect_first(&coefs, n, complexity_sum(entropy, d))).collect();
    let tau_max = taus[0].max(*taus.iter().max().unwrap());
    let mut prefix = Vec::with_capacity(tau_max + 1);
    let mut acc = 0.0;
    for i in 0..=tau_max {
        acc += match norm {
            NormIndex::Orlicz(r) => coefs.get(i).powf(1.0 - 2.0 / r) / (1.0 - 2.0 / r),
            _ => coefs.get(i),
        };
        prefix.push(acc);
    }
    let mut psi: Vec<f64> = taus.iter().map(|&t| prefix[t]).collect();
    for j in (0..psi.len() - 1).rev() {
        psi[j] = psi[j].max(psi[j + 1]);
    }
    let mut root = Vec::with_capacity(steps);
    let mut run: f64 = 0.0;
    for j in 0..steps {
        let rj = psi[j] * (1.0 + entropy.eval_unchecked(grid[j + 1]));
        run = run.max(rj);
        root.push(run.sqrt());
    }
    let env = Envelope { grid, root };
    let lower = |a: f64| a / (64.0 * rn);
    let g = |a: f64| env.integral_from(lower(a)) - a;

    let a_max = 8.0 * rn * sigma;
    if g(a_max) > 0.0 {
        return Err(Error::Boundary(format!(
            "no chaining budget in [0, 8 sqrt(n) sigma]; sigma = {} is below the admissible scale for n = {}",
            sigma, n
        )));
    }
    let (mut lo, mut hi) = (0.5 * sigma, a_max);
    for _ in 0..300 {
        let mid = 0.5 * (lo + hi);
        if g(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-14 * hi {
            break;
        }
    }
    let a = hi;
    let tau_sigma = taus[0];
    let h_sigma = entropy.eval_unchecked(sigma);
    let scale = match norm {
        NormIndex::Sup => sigma,
        _ => entropy.b,
    };
    let tail_term = scale * tau_sigma as f64 * (1.0 + h_sigma) / rn;
    let alpha_max = entropy.terms.iter().map(|t| t.alpha).fold(0.0, f64::max);
    let near_scale_edge = alpha_max > 0.0 && sigma < 2.0 * (n as f64).powf(-1.0 / alpha_max);
    Ok(RateBound {
        a,
        tail_term,
        total: a + tail_term,
        diagnostics: BoundDiagnostics {
            tau_sigma,
            lambda_sigma: psi[0],
            integral_residual: (a - env.integral_from(lower(a))) / a,
            near_scale_edge,
        },
    })
}

/// Norm used by the closed-form rate tables.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum RateNorm {
    Lr(Q),
    Sup,
}

impl RateNorm {
    pub fn from_f64(r: f64) -> Result<Self> {
        if r.is_infinite() {
            Ok(RateNorm::Sup)
        } else if r > 2.0 {
            Ok(RateNorm::Lr(rational(r)?))
        } else {
            invalid("closed-form rates need r > 2 or r = inf")
        }
    }

    pub fn label(&self) -> String {
        match self {
            RateNorm::Sup => "inf".into(),
            RateNorm::Lr(r) => format!("{}", r),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SigmaMode {
    Unit,
    Free(f64),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    IidLike,
    DependenceDominated,
    DonskerBounded,
    Boundary,
}

impl Regime {
    pub fn as_str(&self) -> &'static str {
        match self {
            Regime::IidLike => "iid_like",
            Regime::DependenceDominated => "dependence_dominated",
            Regime::DonskerBounded => "donsker_bounded",
            Regime::Boundary => "boundary",
        }
    }
}

/// One summand `n^{n_exp} σ^{sigma_exp}` of a bound.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RateTerm {
    pub n_exp: Q,
    pub sigma_exp: Q,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RegimeReport {
    pub regime: Regime,
    /// Exponent of `n` at unit `σ`; `None` on a boundary.
    pub exponent: Option<Q>,
    pub source: &'static str,
    pub terms: Vec<RateTerm>,
    pub sigma: Option<f64>,
}

impl RegimeReport {
    /// `max_terms n^{n_exp} σ^{sigma_exp}` with the report's `σ` (1 if unit).
    pub fn bound_at(&self, n: f64) -> Option<f64> {
        if self.regime == Regime::Boundary {
            return None;
        }
        let s = self.sigma.unwrap_or(1.0);
        self.terms
            .iter()
            .map(|t| n.powf(to_f64(t.n_exp)) * s.powf(to_f64(t.sigma_exp)))
            .fold(None, |m: Option<f64>, v| Some(m.map_or(v, |m| m.max(v))))
    }
}

/// Phase boundary `α(β)` separating dependence-dominated and i.i.d.-like rates.
pub fn boundary_alpha(beta: Q, norm: RateNorm) -> Q {
    let one = Q::one();
    let two = q(2, 1);
    match norm {
        RateNorm::Sup => {
            if beta <= one {
                (one + beta) / beta
            } else {
                two
            }
        }
        RateNorm::Lr(r) => {
            if beta <= r / (r - two) {
                r * (one + beta) / (beta * (r - one))
            } else {
                two
            }
        }
    }
}

fn boundary_report(source: &'static str, sigma: Option<f64>) -> RegimeReport {
    RegimeReport { regime: Regime::Boundary, exponent: None, source, terms: vec![], sigma }
}

pub fn rate_exponent(alpha: Q, beta: Q, norm: RateNorm, sigma_mode: SigmaMode) -> Result<RegimeReport> {
    if alpha < Q::zero() {
        return invalid("alpha must be nonnegative");
    }
    if beta <= Q::zero() {
        return invalid("dependence exponent must be positive");
    }
    let sigma = match sigma_mode {
        SigmaMode::Unit => None,
        SigmaMode::Free(s) if s > 0.0 => Some(s),
        SigmaMode::Free(_) => return invalid("sigma must be positive"),
    };
    let one = Q::one();
    let two = q(2, 1);
    let half = q(1, 2);
    let long = (one - beta) / (two * (one + beta));
    let term = |n_exp: Q, sigma_exp: Q| RateTerm { n_exp, sigma_exp };
    let iid_exp = |a: Q| half - one / a;
    let (regime, source, terms) = match norm {
        RateNorm::Sup => {
            let src = "sup_bracketing";
            if beta == one {
                return Ok(boundary_report(src, sigma));
            }
            if beta > one {
                if alpha == two {
                    return Ok(boundary_report(src, sigma));
                }
                if alpha < two {
                    (Regime::DonskerBounded, src, vec![term(long, one), term(Q::zero(), one - alpha / two)])
                } else {
                    (Regime::IidLike, src, vec![term(iid_exp(alpha), Q::zero())])
                }
            } else {
                let thr = (one + beta) / beta;
                if alpha == thr {
                    return Ok(boundary_report(src, sigma));
                }
                if alpha < thr {
                    (Regime::DependenceDominated, src, vec![term(long, one - alpha * beta / (one + beta))])
                } else {
                    (Regime::IidLike, src, vec![term(iid_exp(alpha), Q::zero())])
                }
            }
        }
        RateNorm::Lr(r) => {
            let src = "orlicz_bracketing";
            if r <= two {
                return invalid("closed-form rates need r > 2");
            }
            let second = term(long, -alpha * beta / (one + beta));
            let cut = r / (r - two);
            if beta == cut {
                return Ok(boundary_report(src, sigma));
            }
            if beta > cut {
                if alpha == two {
                    return Ok(boundary_report(src, sigma));
                }
                if alpha < two {
                    (Regime::DonskerBounded, src, vec![term(Q::zero(), one - alpha / two), second])
                } else {
                    (Regime::IidLike, src, vec![term(iid_exp(alpha), Q::zero()), second])
                }
            } else {
                let thr = r * (one + beta) / (beta * (r - one));
                if alpha == thr {
                    return Ok(boundary_report(src, sigma));
                }
                if alpha < thr {
                    let first = term(
                        (one - beta * (one - two / r)) / (two * (one + beta)),
                        one - alpha * (r - one) * beta / (r * (one + beta)),
                    );
                    (Regime::DependenceDominated, src, vec![first, second])
                } else {
                    (Regime::IidLike, src, vec![term(iid_exp(alpha), Q::zero()), second])
                }
            }
        }
    };
    let exponent = terms.iter().map(|t| t.n_exp).fold(Q::zero(), |m, e| if e > m { e } else { m });
    Ok(RegimeReport { regime, exponent: Some(exponent), source, terms, sigma })
}

#[derive(Clone, Debug)]
pub struct PhaseCell {
    pub beta: Q,
    pub alpha: Q,
    pub report: RegimeReport,
}

#[derive(Clone, Debug)]
pub struct PhaseDiagram {
    pub norm: RateNorm,
    pub cells: Vec<PhaseCell>,
    /// `(β, α(β))` with the kink point included.
    pub curve: Vec<(Q, Q)>,
}

pub fn phase_diagram(beta_grid: &[f64], alpha_grid: &[f64], norm: RateNorm) -> Result<PhaseDiagram> {
    if beta_grid.is_empty() || alpha_grid.is_empty() {
        return invalid("grids must be nonempty");
    }
    if beta_grid.iter().chain(alpha_grid).any(|&x| !(x > 0.0 && x.is_finite())) {
        return invalid("grid values must be positive");
    }
    let mut cells = Vec::with_capacity(beta_grid.len() * alpha_grid.len());
    for &b in beta_grid {
        let beta = rational(b)?;
        for &a in alpha_grid {
            let alpha = rational(a)?;
            let report = rate_exponent(alpha, beta, norm, SigmaMode::Unit)?;
            cells.push(PhaseCell { beta, alpha, report });
        }
    }
    let (lo, hi) = beta_grid.iter().fold((f64::INFINITY, 0.0f64), |(l, h), &b| (l.min(b), h.max(b)));
    let kink = match norm {
        RateNorm::Sup => Q::one(),
        RateNorm::Lr(r) => r / (r - q(2, 1)),
    };
    let mut betas: Vec<Q> = Vec::new();
    let pts = 200;
    for i in 0..=pts {
        let b = lo * (hi / lo).powf(i as f64 / pts as f64);
        betas.push(rational(b)?);
    }
    if to_f64(kink) >= lo && to_f64(kink) <= hi {
        betas.push(kink);
    }
    betas.sort();
    betas.dedup();
    let curve = betas.into_iter().map(|b| (b, boundary_alpha(b, norm))).collect();
    Ok(PhaseDiagram { norm, cells, curve })
}

/// Result of the three-case local complexity formula.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PiN {
    pub value: f64,
    pub case: u8,
    pub terms: Vec<f64>,
    /// `σ` within a factor 2 of the case's admissible scale.
    pub near_scale_edge: bool,
}

fn pi_case(alpha: f64, rt: f64, gamma: f64) -> Result<u8> {
    let upper = rt * (1.0 + 1.0 / gamma);
    if alpha < rt {
        Ok(1)
    } else if alpha > rt && alpha < upper {
        Ok(2)
    } else if alpha > upper {
        Ok(3)
    } else {
        Err(Error::Boundary(format!("alpha = {} sits on a case boundary", alpha)))
    }
}

fn pi_scale(case: u8, alpha: f64, rt: f64, gamma: f64, n: f64) -> f64 {
    match case {
        1 => 0.0,
        2 => n.powf(-1.0 / (alpha + 2.0 - rt)),
        _ => n.powf(-1.0 / (alpha + (2.0 - rt) * (1.0 + 1.0 / gamma))),
    }
}

/// Term-by-term evaluation without the precondition checks.
pub fn pi_n_terms(
    k: f64,
    d: f64,
    theta: f64,
    b_log: f64,
    alpha: f64,
    v: f64,
    r: f64,
    gamma: f64,
    sigma: f64,
    n: f64,
) -> Result<(u8, Vec<f64>)> {
    let rt = r.min(2.0);
    let case = pi_case(alpha, rt, gamma)?;
    let d = k * d;
    let lg = (b_log / sigma).ln();
    let g1 = gamma / (gamma + 1.0);
    let big = d * (theta / sigma).powf(alpha);
    let t_first = sigma.powf(rt / 2.0) * big.powf(g1 / 2.0) * n.powf(1.0 / (2.0 * (1.0 + gamma))) * lg.powf(v * g1 / 2.0);
    let t_second = n.powf(0.5 - g1) * (big * lg.powf(v)).powf(g1);
    let terms = match case {
        1 => vec![t_first, t_second],
        2 => {
            let t3 = (d * theta.powf(alpha) * n.powf((rt - alpha) / 2.0)).powf(-1.0 / (alpha + 2.0 - rt)) * lg.powf(v / 2.0);
            vec![t_first, t_second, t3]
        }
        _ => {
            let den = alpha * gamma + (2.0 - rt) * (gamma + 1.0);
            let dt = d * theta.powf(alpha);
            let t1 = n.powf((gamma * (alpha - rt) + (2.0 - rt)) / (2.0 * den)) * dt.powf(gamma / den) * lg.powf(v * g1 / 2.0);
            let t3 = n.powf(1.0 / (2.0 * (1.0 + gamma))) * sigma.powf(rt / 2.0) * (big * lg.powf(v)).powf(g1 / 2.0);
            let t4 = n.powf(gamma * (alpha - rt) / (2.0 * den)) * dt.powf((2.0 * gamma + 2.0 - rt) / (2.0 * den)) * lg.powf(v / 2.0);
            vec![t1, t_second, t3, t4]
        }
    };
    Ok((case, terms))
}

/// Local complexity bound under γ-mixing with `L_r` brackets, `r̃ = r ∧ 2`.
pub fn pi_n(entropy: &EntropyModel, gamma: f64, sigma: f64, n: usize) -> Result<PiN> {
    entropy.validate()?;
    let t = entropy.single()?;
    if !(gamma > 0.0 && gamma.is_finite()) {
        return invalid("gamma must be positive and finite");
    }
    if n == 0 {
        return invalid("n must be positive");
    }
    if !(sigma > 0.0) || t.theta < sigma || t.b_log < sigma.max(entropy.b).max(std::f64::consts::E) {
        return invalid("need theta >= sigma and B >= max(sigma, b, e)");
    }
    let nf = n as f64;
    let load = t.k * t.d * (t.theta / sigma).powf(t.alpha) * (t.b_log / sigma).ln().powf(t.v);
    if load > nf {
        return invalid(format!("entropy load {} exceeds n = {}", load, n));
    }
    let rt = entropy.r.min(2.0);
    let case = pi_case(t.alpha, rt, gamma)?;
    let scale = pi_scale(case, t.alpha, rt, gamma, nf);
    if sigma < scale {
        return Err(Error::Boundary(format!("sigma = {} below the admissible scale {}", sigma, scale)));
    }
    let (case, terms) = pi_n_terms(t.k, t.d, t.theta, t.b_log, t.alpha, t.v, entropy.r, gamma, sigma, nf)?;
    Ok(PiN { value: terms.iter().sum(), case, terms, near_scale_edge: sigma < 2.0 * scale })
}

/// `Π_n(G_δ)` for a class with `H(u) = D (log(B/u))^V` and `L_2` brackets.
pub fn pi_vc(delta: f64, d: f64, b_log: f64, v: f64, gamma: f64, n: usize) -> Result<f64> {
    let (_, terms) = pi_n_terms(1.0, d, 1.0, b_log, 0.0, v, 2.0, gamma, delta, n as f64)?;
    Ok(terms.iter().sum())
}

/// `Π_n(G_δ)` for a local ball with `H(u) = K (δ/u)^α (log(B/u))^V`, `α > 2(1 + 1/γ)`.
pub fn pi_adaptive(delta: f64, k: f64, alpha: f64, b_log: f64, v: f64, gamma: f64, n: usize) -> Result<f64> {
    if !(alpha > 2.0 * (1.0 + 1.0 / gamma)) {
        return invalid("adaptation needs alpha > 2(1 + 1/gamma)");
    }
    let (_, terms) = pi_n_terms(k, 1.0, delta, b_log, alpha, v, 2.0, gamma, delta, n as f64)?;
    Ok(terms.iter().sum())
}

/// Fixed point `Π(δ) <= √n δ²`, with an audit that `Π(δ)/δ^t` is non-increasing.
pub fn solve_delta_n(pi_fn: &dyn Fn(f64) -> f64, n: usize, t: f64, b: f64) -> Result<f64> {
    if !(t > 0.0 && t < 2.0) {
        return invalid("t must lie in (0, 2)");
    }
    if !(b > 0.0) || n == 0 {
        return invalid("b and n must be positive");
    }
    let rn = (n as f64).sqrt();
    let per_decade = 32;
    let decades = 12;
    let grid: Vec<f64> = (0..=per_decade * decades).map(|j| b * 10f64.powf(-(j as f64) / per_decade as f64)).collect();
    let vals: Vec<f64> = grid.iter().map(|&d| pi_fn(d)).collect();
    if vals.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical("pi_fn returned a non-finite value".into()));
    }
    for j in 1..grid.len() {
        let prev = vals[j - 1] / grid[j - 1].powf(t);
        let cur = vals[j] / grid[j].powf(t);
        if prev > cur * (1.0 + 1e-9) {
            return invalid(format!("pi_fn(delta)/delta^{} increases near delta = {}", t, grid[j]));
        }
    }
    let ok = |v: f64, d: f64| v <= rn * d * d;
    if !ok(vals[0], grid[0]) {
        return invalid("no crossing in (0, b]");
    }
    let Some(j) = (1..grid.len()).find(|&j| !ok(vals[j], grid[j])) else {
        return Ok(grid[grid.len() - 1]);
    };
    let (mut lo, mut hi) = (grid[j], grid[j - 1]);
    while hi - lo > 1e-7 * hi {
        let mid = 0.5 * (lo + hi);
        if ok(pi_fn(mid), mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "app", rename_all = "snake_case", deny_unknown_fields)]
pub enum Application {
    Dnn {
        s: f64,
        d: f64,
        #[serde(with = "norm_index")]
        gamma: f64,
    },
    Additive {
        s: f64,
        #[serde(with = "norm_index")]
        gamma: f64,
        a: f64,
    },
    ConvexWorst {
        d: f64,
        beta: f64,
    },
    ConvexAdapt {
        d: f64,
        #[serde(with = "norm_index")]
        gamma: f64,
    },
    Ot {
        beta: f64,
        d: f64,
    },
    Classification {
        alpha: f64,
        #[serde(with = "norm_index")]
        gamma: f64,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AppExponent {
    /// Exponent `e` in the rate `n^{-e}`.
    pub exponent: f64,
    pub quantity: &'static str,
    pub regime: &'static str,
}

fn positive(x: f64, name: &str) -> Result<()> {
    if x > 0.0 && !x.is_nan() {
        Ok(())
    } else {
        invalid(format!("{} must be positive", name))
    }
}

/// Rate exponents of the worked applications; `γ = inf` is the independent limit.
pub fn application_exponents(app: Application) -> Result<AppExponent> {
    let out = |exponent, quantity, regime| Ok(AppExponent { exponent, quantity, regime });
    match app {
        Application::Dnn { s, d, gamma } => {
            positive(s, "s")?;
            positive(d, "d")?;
            positive(gamma, "gamma")?;
            out(s / (d + 2.0 * s * (1.0 + 1.0 / gamma)), "l2_error", "dependent")
        }
        Application::Additive { s, gamma, a } => {
            positive(s, "s")?;
            positive(gamma, "gamma")?;
            if !(0.0..1.0).contains(&a) || !(s < 1.0) {
                return invalid("need 0 <= a < 1 and 0 < s < 1");
            }
            out((2.0 * s * (1.0 - a) - a) / (2.0 * s * (1.0 + 1.0 / gamma) + 1.0), "squared_l2_error", "dependent")
        }
        Application::ConvexWorst { d, beta } => {
            positive(beta, "beta")?;
            if !(d > 4.0) {
                return invalid("convex worst-case rate needs d > 4");
            }
            let cut = 2.0 / (d - 2.0);
            if beta == cut || beta == 1.0 {
                return Err(Error::Boundary(format!("beta = {} is excluded", beta)));
            }
            if beta < cut {
                return invalid(format!("convex worst-case rate needs beta > {}", cut));
            }
            out(2.0 / d, "squared_l2_error", "iid_like")
        }
        Application::ConvexAdapt { d, gamma } => {
            positive(gamma, "gamma")?;
            if !(d > 8.0) {
                return invalid("convex adaptation rate needs d > 8");
            }
            let cut = 4.0 / (d - 4.0);
            if gamma == cut || gamma == 1.0 {
                return Err(Error::Boundary(format!("gamma = {} is excluded", gamma)));
            }
            if gamma < cut {
                return invalid(format!("convex adaptation rate needs gamma > {}", cut));
            }
            out(4.0 / d, "squared_l2_error", "iid_like")
        }
        Application::Ot { beta, d } => {
            positive(beta, "beta")?;
            if !(d >= 4.0) {
                return invalid("OT rates need d >= 4");
            }
            let cut = 2.0 / (d - 2.0);
            if beta == cut {
                return Err(Error::Boundary(format!("beta = {} is the regime boundary", beta)));
            }
            if beta > cut {
                out(2.0 / d, "abs_error", "iid_like")
            } else {
                out(beta / (beta + 1.0), "abs_error", "dependence_dominated")
            }
        }
        Application::Classification { alpha, gamma } => {
            positive(gamma, "gamma")?;
            if !(alpha > 1.0 + 1.0 / gamma) {
                return invalid("classification rate needs alpha > 1 + 1/gamma");
            }
            out(1.0 / (alpha + 1.0 + 1.0 / gamma), "excess_risk", "dependent")
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct OtSchedule {
    pub k: u64,
    pub eps: f64,
    pub k_exponent: f64,
    pub eps_exponent: f64,
}

/// Iteration count and regularization level for the entropic estimator.
pub fn ot_schedule(beta: f64, d: usize, n: usize) -> Result<OtSchedule> {
    positive(beta, "beta")?;
    if d < 4 {
        return invalid("schedule needs d >= 4");
    }
    if n == 0 {
        return invalid("n must be positive");
    }
    let df = d as f64;
    let cut = 2.0 / (df - 2.0);
    if beta == cut {
        return Err(Error::Boundary(format!("beta = {} is the regime boundary", beta)));
    }
    let (ke, ee) = if beta > cut {
        (3.0 / df, 1.0 / df)
    } else {
        (3.0 * beta / (2.0 * (beta + 1.0)), beta / (2.0 * (beta + 1.0)))
    };
    let nf = n as f64;
    let kr = nf.powf(ke);
    let k = (kr * (1.0 - 1e-12)).ceil().max(1.0) as u64;
    Ok(OtSchedule { k, eps: nf.powf(-ee), k_exponent: ke, eps_exponent: ee })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn c_phi_values() {
        assert!((c_phi(4.0).unwrap() - 1.25f64.sqrt()).abs() < 1e-15);
        assert!(c_phi(2.0).is_err());
        let mut prev = 1.0;
        for r in [2.5, 3.0, 4.0, 8.0, 32.0, 1e3, 1e6] {
            let c = c_phi(r).unwrap();
            assert!(c > prev && c < 2f64.sqrt());
            prev = c;
        }
    }

    #[test]
    fn lambda_examples() {
        let iid = MixingProfile::iid();
        for qq in [0, 1, 5, 100] {
            assert!((lambda_phi_beta(&iid, qq, 4.0).unwrap() - 2.0).abs() < 1e-15);
        }
        let p = MixingProfile::polynomial(1.0, 2.0).unwrap();
        assert!((lambda_phi_beta(&p, 1, 4.0).unwrap() - 3.0).abs() < 1e-15);
    }

    #[test]
    fn sup_examples() {
        let r = |a: i128, b: i128| q(a, b);
        let rep = rate_exponent(r(3, 1), r(2, 1), RateNorm::Sup, SigmaMode::Unit).unwrap();
        assert_eq!((rep.regime, rep.exponent), (Regime::IidLike, Some(r(1, 6))));
        let rep = rate_exponent(r(1, 1), r(1, 2), RateNorm::Sup, SigmaMode::Unit).unwrap();
        assert_eq!((rep.regime, rep.exponent), (Regime::DependenceDominated, Some(r(1, 6))));
        let rep = rate_exponent(r(4, 1), r(1, 2), RateNorm::Sup, SigmaMode::Unit).unwrap();
        assert_eq!((rep.regime, rep.exponent), (Regime::IidLike, Some(r(1, 4))));
        let rep = rate_exponent(r(1, 1), r(2, 1), RateNorm::Sup, SigmaMode::Unit).unwrap();
        assert_eq!((rep.regime, rep.exponent), (Regime::DonskerBounded, Some(Q::zero())));
        for (a, b) in [(r(2, 1), r(3, 1)), (r(3, 1), r(1, 2)), (r(5, 1), r(1, 1))] {
            let rep = rate_exponent(a, b, RateNorm::Sup, SigmaMode::Unit).unwrap();
            assert_eq!((rep.regime, rep.exponent), (Regime::Boundary, None));
        }
    }

    #[test]
    fn schedule_examples() {
        let s = ot_schedule(3.0, 4, 10_000).unwrap();
        assert_eq!(s.k, 1000);
        assert!((s.eps - 0.1).abs() < 1e-15);
        let s = ot_schedule(0.5, 4, 4096).unwrap();
        assert_eq!(s.k, 64);
        assert!((s.eps - 4096f64.powf(-1.0 / 6.0)).abs() < 1e-15);
        assert!(ot_schedule(1.0, 4, 100).is_err());
    }
}
