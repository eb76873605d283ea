//! Bracketing-entropy models, bracketing calculus and exact supremum oracles.

use std::collections::HashMap;
use std::f64::consts::{E, SQRT_2};

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// CDF access for a one-dimensional marginal law.
pub trait CdfOracle {
    fn cdf(&self, x: f64) -> f64;

    /// `F(x-)`.
    fn cdf_left(&self, x: f64) -> f64 {
        self.cdf(x)
    }

    /// Smallest `x` with `F(x) >= p`, for `p` in (0,1).
    fn quantile(&self, _p: f64) -> Option<f64> {
        None
    }

    /// `∫_{-∞}^x F(t) dt`.
    fn lower_integral(&self, _x: f64) -> Option<f64> {
        None
    }

    /// `∫_x^∞ (1 − F(t)) dt`.
    fn upper_integral(&self, _x: f64) -> Option<f64> {
        None
    }
}

/// Marginal laws produced by the built-in generators.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "snake_case")]
pub enum Marginal {
    Uniform01,
    Gaussian { mean: f64, sd: f64 },
    /// Finite law on sorted distinct atoms.
    Discrete { atoms: Vec<f64>, probs: Vec<f64> },
}

impl Marginal {
    /// Merges repeated atoms and sorts them.
    pub fn discrete(atoms: &[f64], probs: &[f64]) -> Result<Self> {
        if atoms.len() != probs.len() || atoms.is_empty() {
            return invalid("atoms and probabilities must be nonempty and of equal length");
        }
        if probs.iter().any(|&p| !(p >= 0.0)) {
            return invalid("probabilities must be nonnegative");
        }
        let mut pairs: Vec<(f64, f64)> = atoms.iter().copied().zip(probs.iter().copied()).collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut out_a: Vec<f64> = Vec::new();
        let mut out_p: Vec<f64> = Vec::new();
        for (a, p) in pairs {
            if out_a.last() == Some(&a) {
                *out_p.last_mut().unwrap() += p;
            } else {
                out_a.push(a);
                out_p.push(p);
            }
        }
        let s: f64 = out_p.iter().sum();
        if (s - 1.0).abs() > 1e-9 {
            return invalid(format!("probabilities sum to {}", s));
        }
        Ok(Marginal::Discrete { atoms: out_a, probs: out_p })
    }
}

fn std_normal_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z / SQRT_2)
}

fn std_normal_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

fn std_normal_quantile(p: f64) -> f64 {
    let (mut lo, mut hi) = (-40.0_f64, 40.0_f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if std_normal_cdf(mid) < p {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-15 * hi.abs().max(1.0) {
            break;
        }
    }
    hi
}

impl CdfOracle for Marginal {
    fn cdf(&self, x: f64) -> f64 {
        match self {
            Marginal::Uniform01 => x.clamp(0.0, 1.0),
            Marginal::Gaussian { mean, sd } => std_normal_cdf((x - mean) / sd),
            Marginal::Discrete { atoms, probs } => {
                let k = atoms.partition_point(|&a| a <= x);
                probs[..k].iter().sum::<f64>().min(1.0)
            }
        }
    }

    fn cdf_left(&self, x: f64) -> f64 {
        match self {
            Marginal::Discrete { atoms, probs } => {
                let k = atoms.partition_point(|&a| a < x);
                probs[..k].iter().sum::<f64>().min(1.0)
            }
            _ => self.cdf(x),
        }
    }

    fn quantile(&self, p: f64) -> Option<f64> {
        Some(match self {
            Marginal::Uniform01 => p.clamp(0.0, 1.0),
            Marginal::Gaussian { mean, sd } => mean + sd * std_normal_quantile(p),
            Marginal::Discrete { atoms, probs } => {
                let mut acc = 0.0;
                let mut out = *atoms.last().unwrap();
                for (a, q) in atoms.iter().zip(probs) {
                    acc += q;
                    if acc >= p - 1e-15 {
                        out = *a;
                        break;
                    }
                }
                out
            }
        })
    }

    fn lower_integral(&self, x: f64) -> Option<f64> {
        Some(match self {
            Marginal::Uniform01 => {
                if x <= 0.0 {
                    0.0
                } else if x <= 1.0 {
                    0.5 * x * x
                } else {
                    x - 0.5
                }
            }
            Marginal::Gaussian { mean, sd } => {
                let z = (x - mean) / sd;
                sd * (z * std_normal_cdf(z) + std_normal_pdf(z))
            }
            Marginal::Discrete { atoms, probs } => atoms
                .iter()
                .zip(probs)
                .filter(|(a, _)| **a <= x)
                .map(|(a, p)| p * (x - a))
                .sum(),
        })
    }

    fn upper_integral(&self, x: f64) -> Option<f64> {
        Some(match self {
            Marginal::Uniform01 => {
                if x <= 0.0 {
                    0.5 - x
                } else if x <= 1.0 {
                    0.5 * (1.0 - x) * (1.0 - x)
                } else {
                    0.0
                }
            }
            Marginal::Gaussian { mean, sd } => {
                let z = (x - mean) / sd;
                sd * (std_normal_pdf(z) - z * (1.0 - std_normal_cdf(z)))
            }
            Marginal::Discrete { atoms, probs } => atoms
                .iter()
                .zip(probs)
                .filter(|(a, _)| **a > x)
                .map(|(a, p)| p * (a - x))
                .sum(),
        })
    }
}

fn sorted(sample: &[f64]) -> Result<Vec<f64>> {
    if sample.is_empty() {
        return Err(Error::Invalid("empty sample".into()));
    }
    if sample.iter().any(|x| x.is_nan()) {
        return invalid("sample contains NaN");
    }
    let mut xs = sample.to_vec();
    xs.sort_by(f64::total_cmp);
    Ok(xs)
}

/// `√n sup_x |F_n(x) − F(x)|` over both one-sided limits at each order statistic.
pub fn sup_halflines(sample: &[f64], oracle: &dyn CdfOracle) -> Result<f64> {
    let xs = sorted(sample)?;
    let n = xs.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in xs.iter().enumerate() {
        let above = (i + 1) as f64 / n - oracle.cdf(x);
        let below = oracle.cdf_left(x) - i as f64 / n;
        d = d.max(above).max(below);
    }
    Ok(n.sqrt() * d)
}

/// Centered supremum over non-decreasing `[0,1]`-valued functions, through
/// the upper sets `[t,∞)` and `(t,∞)` that are its extreme points.
pub fn sup_monotone01(sample: &[f64], oracle: &dyn CdfOracle) -> Result<f64> {
    let xs = sorted(sample)?;
    let n = xs.len();
    let nf = n as f64;
    let mut best: f64 = 0.0;
    let mut start = 0;
    while start < n {
        let t = xs[start];
        let mut end = start;
        while end < n && xs[end] == t {
            end += 1;
        }
        let ge = (n - start) as f64 / nf;
        let gt = (n - end) as f64 / nf;
        best = best.max(ge - (1.0 - oracle.cdf_left(t)));
        best = best.max((1.0 - oracle.cdf(t)) - gt);
        start = end;
    }
    Ok(nf.sqrt() * best)
}

/// `∫_a^b |c − F(x)| dx` for monotone `F`, split at the crossing point.
fn abs_gap_integral(oracle: &dyn CdfOracle, a: f64, b: f64, c: f64, g: &dyn Fn(f64) -> f64) -> Option<f64> {
    if b <= a {
        return Some(0.0);
    }
    let xs = oracle.quantile(c)?.clamp(a, b);
    let (ga, gs, gb) = (g(a), g(xs), g(b));
    let left = c * (xs - a) - (gs - ga);
    let right = (gb - gs) - c * (b - xs);
    Some(left.max(0.0) + right.max(0.0))
}

/// `√n ∫ |F_n − F|`, integrated exactly between order statistics.
pub fn sup_lipschitz_w1(sample: &[f64], oracle: &dyn CdfOracle) -> Result<f64> {
    let xs = sorted(sample)?;
    let n = xs.len();
    let missing = || Error::Invalid("CDF oracle lacks the antiderivative needed for the W1 integral".into());
    let g = |x: f64| oracle.lower_integral(x).unwrap_or(f64::NAN);
    let mut total = oracle.lower_integral(xs[0]).ok_or_else(missing)?;
    total += oracle.upper_integral(xs[n - 1]).ok_or_else(missing)?;
    for i in 0..n - 1 {
        let c = (i + 1) as f64 / n as f64;
        total += abs_gap_integral(oracle, xs[i], xs[i + 1], c, &g).ok_or_else(missing)?;
    }
    if !total.is_finite() {
        return Err(Error::Numerical("non-finite W1 integral".into()));
    }
    Ok((n as f64).sqrt() * total)
}

pub(crate) mod norm_index {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Text(String),
    }

    pub fn serialize<S: Serializer>(r: &f64, s: S) -> Result<S::Ok, S::Error> {
        if r.is_infinite() {
            Repr::Text("inf".into()).serialize(s)
        } else {
            Repr::Num(*r).serialize(s)
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Num(x) => Ok(x),
            Repr::Text(t) if t == "inf" || t == "infinity" => Ok(f64::INFINITY),
            Repr::Text(t) => Err(serde::de::Error::custom(format!("unknown norm index {:?}", t))),
        }
    }
}

/// Norm used for the brackets.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum NormIndex {
    /// `L_r` / power-Orlicz with `r > 2`.
    Orlicz(f64),
    Sup,
    /// `L_r` with `r` in [1, 2].
    Low(f64),
}

impl NormIndex {
    pub fn from_r(r: f64) -> Result<Self> {
        if r.is_infinite() && r > 0.0 {
            Ok(NormIndex::Sup)
        } else if r > 2.0 {
            Ok(NormIndex::Orlicz(r))
        } else if (1.0..=2.0).contains(&r) {
            Ok(NormIndex::Low(r))
        } else {
            invalid(format!("norm index {} outside [1, inf]", r))
        }
    }
}

/// One power-log summand `K D (θ/u)^α (log(B/u))^V`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EntropyTerm {
    #[serde(rename = "K")]
    pub k: f64,
    #[serde(rename = "D")]
    pub d: f64,
    pub theta: f64,
    #[serde(rename = "B")]
    pub b_log: f64,
    pub alpha: f64,
    #[serde(rename = "V")]
    pub v: f64,
}

impl EntropyTerm {
    fn eval(&self, u: f64) -> f64 {
        let lg = (self.b_log / u).ln().max(0.0);
        self.k * self.d * (self.theta / u).powf(self.alpha) * lg.powf(self.v)
    }
}

/// Bracketing-entropy bound `H(u)`, a sum of power-log terms, with its norm
/// index and envelope bounds `σ` (norm radius) and `b` (sup-norm bound).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "EntropyRepr", into = "EntropyRepr")]
pub struct EntropyModel {
    pub terms: Vec<EntropyTerm>,
    pub r: f64,
    pub sigma: f64,
    pub b: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum EntropyRepr {
    Single(FlatModel),
    Composite(CompositeModel),
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FlatModel {
    #[serde(rename = "K")]
    k: f64,
    #[serde(rename = "D")]
    d: f64,
    theta: f64,
    #[serde(rename = "B")]
    b_log: f64,
    alpha: f64,
    #[serde(rename = "V")]
    v: f64,
    #[serde(with = "norm_index")]
    r: f64,
    sigma: f64,
    b: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CompositeModel {
    terms: Vec<EntropyTerm>,
    #[serde(with = "norm_index")]
    r: f64,
    sigma: f64,
    b: f64,
}

impl TryFrom<EntropyRepr> for EntropyModel {
    type Error = Error;

    fn try_from(repr: EntropyRepr) -> Result<Self> {
        let m = match repr {
            EntropyRepr::Single(f) => EntropyModel {
                terms: vec![EntropyTerm { k: f.k, d: f.d, theta: f.theta, b_log: f.b_log, alpha: f.alpha, v: f.v }],
                r: f.r,
                sigma: f.sigma,
                b: f.b,
            },
            EntropyRepr::Composite(c) => EntropyModel { terms: c.terms, r: c.r, sigma: c.sigma, b: c.b },
        };
        m.validate()?;
        Ok(m)
    }
}

impl From<EntropyModel> for EntropyRepr {
    fn from(m: EntropyModel) -> Self {
        if let [t] = m.terms[..] {
            EntropyRepr::Single(FlatModel {
                k: t.k,
                d: t.d,
                theta: t.theta,
                b_log: t.b_log,
                alpha: t.alpha,
                v: t.v,
                r: m.r,
                sigma: m.sigma,
                b: m.b,
            })
        } else {
            EntropyRepr::Composite(CompositeModel { terms: m.terms, r: m.r, sigma: m.sigma, b: m.b })
        }
    }
}

/// Transformations of a class and their effect on the entropy bound.
#[derive(Clone, Debug, PartialEq)]
pub enum Transform {
    /// Composition with a monotone `L`-Lipschitz map fixing 0.
    LipschitzCompose(f64),
    Sum(EntropyModel),
    /// Pointwise product with a fixed `g`, `‖g‖∞ = g_sup`.
    ScalarMultiply(f64),
    PositivePart,
}

impl EntropyModel {
    /// Single-term model.
    #[allow(clippy::too_many_arguments)]
    pub fn new(k: f64, d: f64, theta: f64, b_log: f64, alpha: f64, v: f64, r: f64, sigma: f64, b: f64) -> Result<Self> {
        let m = Self { terms: vec![EntropyTerm { k, d, theta, b_log, alpha, v }], r, sigma, b };
        m.validate()?;
        Ok(m)
    }

    /// `H(u) = K u^-α` with `θ = 1`, `D = 1`, `B = max(e, σ, b)`.
    pub fn power(k: f64, alpha: f64, r: f64, sigma: f64, b: f64) -> Result<Self> {
        Self::new(k, 1.0, sigma.max(1.0), E.max(sigma).max(b), alpha, 0.0, r, sigma, b)
    }

    pub fn validate(&self) -> Result<()> {
        NormIndex::from_r(self.r)?;
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return invalid("sigma must be positive");
        }
        if !(self.b >= 1.0 && self.b.is_finite()) {
            return invalid("b must be at least 1");
        }
        if self.sigma > self.b {
            return invalid("sigma must not exceed b");
        }
        if self.terms.is_empty() {
            return invalid("entropy model has no terms");
        }
        let single = self.terms.len() == 1;
        for t in &self.terms {
            if !(t.k > 0.0 && t.k.is_finite()) {
                return invalid("K must be positive");
            }
            if !(t.d >= 1.0 && t.d.is_finite()) {
                return invalid("D must be at least 1");
            }
            if !(t.alpha >= 0.0 && t.alpha.is_finite()) || !(t.v >= 0.0 && t.v.is_finite()) {
                return invalid("alpha and V must be nonnegative");
            }
            if !(t.theta >= self.sigma) {
                return invalid("theta must be at least sigma");
            }
            let floor = if single { E.max(self.sigma).max(self.b) } else { E.max(self.sigma) };
            if !(t.b_log >= floor * (1.0 - 1e-12)) {
                return invalid("B must be at least max(sigma, b, e)");
            }
        }
        Ok(())
    }

    pub fn norm(&self) -> NormIndex {
        NormIndex::from_r(self.r).expect("validated")
    }

    /// The single term, for closed-form consumers.
    pub fn single(&self) -> Result<EntropyTerm> {
        match self.terms[..] {
            [t] => Ok(t),
            _ => invalid("operation needs a single-term entropy model"),
        }
    }

    pub(crate) fn eval_unchecked(&self, u: f64) -> f64 {
        self.terms.iter().map(|t| t.eval(u)).sum()
    }
}

pub fn entropy_eval(model: &EntropyModel, u: f64) -> Result<f64> {
    if !(u > 0.0) || u > model.sigma * (1.0 + 1e-12) {
        return invalid(format!("u = {} outside (0, sigma = {}]", u, model.sigma));
    }
    Ok(model.eval_unchecked(u))
}

fn rescale(model: &EntropyModel, s: f64, sigma: f64, b: f64) -> EntropyModel {
    let terms = model
        .terms
        .iter()
        .map(|t| EntropyTerm {
            theta: (t.theta * s).max(sigma),
            b_log: (t.b_log * s).max(E).max(sigma).max(b),
            ..*t
        })
        .collect();
    EntropyModel { terms, r: model.r, sigma, b }
}

pub fn entropy_calculus(model: &EntropyModel, transform: &Transform) -> Result<EntropyModel> {
    model.validate()?;
    let out = match transform {
        Transform::LipschitzCompose(l) => {
            if !(*l > 0.0 && l.is_finite()) {
                return invalid("Lipschitz constant must be positive");
            }
            rescale(model, *l, model.sigma * l, (model.b * l).max(1.0))
        }
        Transform::ScalarMultiply(g) => {
            if !(*g > 0.0 && g.is_finite()) {
                return invalid("sup norm of the multiplier must be positive");
            }
            rescale(model, *g, model.sigma * g, (model.b * g).max(1.0))
        }
        Transform::PositivePart => model.clone(),
        Transform::Sum(other) => {
            other.validate()?;
            if other.r != model.r {
                return invalid("summed classes must share the norm index");
            }
            let sigma = model.sigma + other.sigma;
            let b = model.b + other.b;
            let mut terms = rescale(model, 2.0, sigma, b).terms;
            terms.extend(rescale(other, 2.0, sigma, b).terms);
            EntropyModel { terms, r: model.r, sigma, b }
        }
    };
    out.validate()?;
    Ok(out)
}

/// Concrete classes with explicit bracket constructions.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassId {
    /// Non-decreasing `[0,1]`-valued functions, observed on the grid points.
    Monotone01,
    /// 1-Lipschitz `[0,1] → [0,1]` functions on the continuum.
    Lipschitz01,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Bracket {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct BracketNet {
    pub class: ClassId,
    pub delta: f64,
    pub grid: Vec<f64>,
    pub brackets: Vec<Bracket>,
    /// `δ · log(count)`.
    pub c: f64,
    level: f64,
    keys: HashMap<Vec<u16>, usize>,
}

const NET_LIMIT: usize = 5_000_000;

impl BracketNet {
    pub fn count(&self) -> usize {
        self.brackets.len()
    }

    /// Width of a bracket in the class norm: `L2(uniform on grid)` for the
    /// monotone class, `L∞` for the Lipschitz class.
    pub fn width(&self, br: &Bracket) -> f64 {
        let gaps = br.lower.iter().zip(&br.upper).map(|(l, u)| u - l);
        match self.class {
            ClassId::Monotone01 => (gaps.map(|g| g * g).sum::<f64>() / br.lower.len() as f64).sqrt(),
            ClassId::Lipschitz01 => gaps.fold(0.0, f64::max),
        }
    }

    fn node_of(&self, x: f64) -> usize {
        let h = 1.0 / (self.grid.len() - 1) as f64;
        ((x / h).round() as usize).min(self.grid.len() - 1)
    }

    /// Index of the canonical bracket of `f`, or `None` when `f` leaves
    /// the class envelope or its level sequence is not in the net.
    pub fn locate(&self, f: &dyn Fn(f64) -> f64) -> Option<usize> {
        let levels = (1.0 / self.level).ceil() as i64;
        let mut key = Vec::with_capacity(self.grid.len());
        for &x in &self.grid {
            let y = f(x);
            if !(0.0..=1.0).contains(&y) {
                return None;
            }
            key.push(((y / self.level).floor() as i64).clamp(0, levels - 1) as u16);
        }
        self.keys.get(&key).copied()
    }

    /// Pointwise containment check of `f` in bracket `idx`.
    ///
    /// Monotone brackets are checked on the grid; Lipschitz brackets at the
    /// probe points via the nearest grid node.
    pub fn contains(&self, idx: usize, f: &dyn Fn(f64) -> f64, probes: &[f64]) -> bool {
        let br = &self.brackets[idx];
        let tol = 1e-12;
        match self.class {
            ClassId::Monotone01 => self.grid.iter().enumerate().all(|(j, &x)| {
                let y = f(x);
                br.lower[j] - tol <= y && y <= br.upper[j] + tol
            }),
            ClassId::Lipschitz01 => probes.iter().all(|&x| {
                let j = self.node_of(x);
                let y = f(x);
                br.lower[j] - tol <= y && y <= br.upper[j] + tol
            }),
        }
    }
}

fn count_sequences(len: usize, levels: usize, step: usize) -> f64 {
    let mut ways = vec![1.0; levels];
    for _ in 1..len {
        let mut next = vec![0.0; levels];
        for (m, w) in ways.iter().enumerate() {
            let lo = m.saturating_sub(step);
            let hi = (m + step).min(levels - 1);
            for nx in next.iter_mut().take(hi + 1).skip(lo) {
                *nx += w;
            }
        }
        ways = next;
    }
    ways.iter().sum()
}

fn monotone_count(len: usize, levels: usize) -> f64 {
    // Non-decreasing sequences of length `len` over `levels` values.
    let mut ways = vec![1.0; levels];
    for _ in 1..len {
        let mut acc = 0.0;
        for w in ways.iter_mut() {
            acc += *w;
            *w = acc;
        }
    }
    ways.iter().sum()
}

fn enumerate_sequences(len: usize, levels: usize, monotone: bool, step: usize, out: &mut Vec<Vec<u16>>) {
    let mut cur: Vec<u16> = Vec::with_capacity(len);
    fn rec(cur: &mut Vec<u16>, len: usize, levels: usize, monotone: bool, step: usize, out: &mut Vec<Vec<u16>>) {
        if cur.len() == len {
            out.push(cur.clone());
            return;
        }
        let (lo, hi) = match cur.last() {
            None => (0, levels - 1),
            Some(&p) => {
                let p = p as usize;
                if monotone {
                    (p, levels - 1)
                } else {
                    (p.saturating_sub(step), (p + step).min(levels - 1))
                }
            }
        };
        for m in lo..=hi {
            cur.push(m as u16);
            rec(cur, len, levels, monotone, step, out);
            cur.pop();
        }
    }
    rec(&mut cur, len, levels, monotone, step, out);
}

/// Explicit bracket net on `grid_size` equally spaced points of [0,1].
pub fn build_bracket_net(class: ClassId, delta: f64, grid_size: usize) -> Result<BracketNet> {
    if !(delta > 0.0 && delta <= 1.0) {
        return invalid("delta must lie in (0, 1]");
    }
    if (grid_size as f64) < 2.0 / delta || grid_size < 2 {
        return invalid(format!("delta = {} is too small for a grid of {} points (need >= 2/delta)", delta, grid_size));
    }
    let grid: Vec<f64> = (0..grid_size).map(|j| j as f64 / (grid_size - 1) as f64).collect();
    let h = 1.0 / (grid_size - 1) as f64;
    let (level, half, step) = match class {
        ClassId::Monotone01 => (delta, 0.0, 0),
        ClassId::Lipschitz01 => {
            let eps = delta - h;
            (eps, 0.5 * h, (h / eps).floor() as usize + 1)
        }
    };
    let levels = (1.0 / level).ceil() as usize;
    let expected = match class {
        ClassId::Monotone01 => monotone_count(grid_size, levels),
        ClassId::Lipschitz01 => count_sequences(grid_size, levels, step),
    };
    if expected > NET_LIMIT as f64 {
        return invalid(format!("delta = {} needs about {:.3e} brackets; too small to enumerate", delta, expected));
    }
    let mut keys = Vec::new();
    enumerate_sequences(grid_size, levels, class == ClassId::Monotone01, step, &mut keys);
    let brackets = keys
        .iter()
        .map(|key| {
            let lower = key.iter().map(|&m| (m as f64 * level - half).max(0.0)).collect();
            let upper = key
                .iter()
                .map(|&m| if m as usize == levels - 1 { 1.0 } else { ((m as f64 + 1.0) * level + half).min(1.0) })
                .collect();
            Bracket { lower, upper }
        })
        .collect::<Vec<_>>();
    let c = delta * (brackets.len() as f64).ln();
    Ok(BracketNet { class, delta, grid, brackets, c, level, keys: keys.into_iter().enumerate().map(|(i, k)| (k, i)).collect() })
}
