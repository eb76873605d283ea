//! Stationary sequence generators and β-mixing coefficients.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::classes::Marginal;
use crate::error::{invalid, Error, Result};

const ROW_TOL: f64 = 1e-12;
const STATIONARY_TOL: f64 = 1e-10;

/// Which dependence coefficient a profile describes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Flavor {
    Beta,
    Rho,
    Gamma,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ProfileKind {
    ExactMarkov {
        transition: Vec<Vec<f64>>,
        stationary: Vec<f64>,
    },
    /// `min(1, c (1+q)^-exponent)`.
    Polynomial { c: f64, exponent: f64 },
    /// `min(1, c exp(-rate q))`; `rate` may be infinite.
    Exponential { c: f64, rate: f64 },
    /// Values for q = 1, 2, ...; the last entry is held beyond the table.
    Tabulated { values: Vec<f64> },
}

/// A model of the mixing-coefficient sequence, with `coefficient(0) = 1`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MixingProfile {
    pub kind: ProfileKind,
    pub flavor: Flavor,
}

impl MixingProfile {
    pub fn iid() -> Self {
        Self::tabulated(vec![0.0]).expect("zero table is valid")
    }

    pub fn polynomial(c: f64, exponent: f64) -> Result<Self> {
        if !(c > 0.0 && c.is_finite()) || !(exponent > 0.0 && exponent.is_finite()) {
            return invalid("polynomial profile needs c > 0 and exponent > 0");
        }
        Ok(Self { kind: ProfileKind::Polynomial { c, exponent }, flavor: Flavor::Beta })
    }

    pub fn exponential(c: f64, rate: f64) -> Result<Self> {
        if !(c > 0.0 && c.is_finite()) || !(rate > 0.0) {
            return invalid("exponential profile needs c > 0 and rate > 0");
        }
        Ok(Self { kind: ProfileKind::Exponential { c, rate }, flavor: Flavor::Beta })
    }

    pub fn tabulated(values: Vec<f64>) -> Result<Self> {
        let mut prev = 1.0;
        for (i, &v) in values.iter().enumerate() {
            if !(0.0..=1.0).contains(&v) {
                return invalid(format!("tabulated value {} at q={} outside [0,1]", v, i + 1));
            }
            if v > prev {
                return invalid(format!("tabulated values increase at q={}", i + 1));
            }
            prev = v;
        }
        Ok(Self { kind: ProfileKind::Tabulated { values }, flavor: Flavor::Beta })
    }

    pub fn exact_markov(transition: Vec<Vec<f64>>, stationary: Vec<f64>) -> Result<Self> {
        validate_chain(&transition, &stationary)?;
        Ok(Self {
            kind: ProfileKind::ExactMarkov { transition, stationary },
            flavor: Flavor::Beta,
        })
    }

    pub fn with_flavor(mut self, flavor: Flavor) -> Self {
        self.flavor = flavor;
        self
    }

    pub fn coefficient(&self, q: usize) -> f64 {
        if q == 0 {
            return 1.0;
        }
        match &self.kind {
            ProfileKind::Polynomial { c, exponent } => (c * (1.0 + q as f64).powf(-exponent)).min(1.0),
            ProfileKind::Exponential { c, rate } => {
                if rate.is_infinite() {
                    0.0
                } else {
                    (c * (-rate * q as f64).exp()).min(1.0)
                }
            }
            ProfileKind::Tabulated { values } => tabulated_at(values, q),
            ProfileKind::ExactMarkov { transition, stationary } => {
                beta_from_chain(&SparseChain::new(transition), stationary, q)
            }
        }
    }

    /// Coefficients for q = 0..=q_max.
    pub fn coefficients(&self, q_max: usize) -> Vec<f64> {
        match &self.kind {
            ProfileKind::ExactMarkov { transition, stationary } => {
                exact_beta_sequence(transition, stationary, q_max)
            }
            _ => (0..=q_max).map(|q| self.coefficient(q)).collect(),
        }
    }

    /// True when every coefficient with q >= 1 vanishes.
    pub fn is_independent(&self) -> bool {
        match &self.kind {
            ProfileKind::Tabulated { values } => values.iter().all(|&v| v == 0.0),
            ProfileKind::Exponential { rate, .. } => rate.is_infinite(),
            _ => false,
        }
    }
}

fn tabulated_at(values: &[f64], q: usize) -> f64 {
    match values.len() {
        0 => 0.0,
        len => values[(q - 1).min(len - 1)],
    }
}

/// Row-sparse transition matrix.
#[derive(Clone, Debug)]
pub(crate) struct SparseChain {
    rows: Vec<Vec<(usize, f64)>>,
}

impl SparseChain {
    pub(crate) fn new(transition: &[Vec<f64>]) -> Self {
        let rows = transition
            .iter()
            .map(|row| row.iter().enumerate().filter(|(_, &p)| p != 0.0).map(|(j, &p)| (j, p)).collect())
            .collect();
        Self { rows }
    }

    pub(crate) fn len(&self) -> usize {
        self.rows.len()
    }

    /// `v P`.
    pub(crate) fn left_mul(&self, v: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 0.0);
        for (i, &vi) in v.iter().enumerate() {
            if vi == 0.0 {
                continue;
            }
            for &(j, p) in &self.rows[i] {
                out[j] += vi * p;
            }
        }
    }

    /// `P h`.
    pub(crate) fn right_mul(&self, h: &[f64], out: &mut [f64]) {
        for (i, row) in self.rows.iter().enumerate() {
            out[i] = row.iter().map(|&(j, p)| p * h[j]).sum();
        }
    }

    fn nnz(&self) -> usize {
        self.rows.iter().map(Vec::len).sum()
    }
}

pub fn validate_transition(transition: &[Vec<f64>]) -> Result<()> {
    let m = transition.len();
    if m == 0 {
        return invalid("transition matrix is empty");
    }
    for (i, row) in transition.iter().enumerate() {
        if row.len() != m {
            return invalid(format!("row {} has length {}, expected {}", i, row.len(), m));
        }
        if row.iter().any(|&p| !(p >= 0.0) || !p.is_finite()) {
            return invalid(format!("row {} has a negative or non-finite entry", i));
        }
        let s: f64 = row.iter().sum();
        if (s - 1.0).abs() > ROW_TOL {
            return invalid(format!("row {} sums to {}", i, s));
        }
    }
    Ok(())
}

pub fn validate_chain(transition: &[Vec<f64>], stationary: &[f64]) -> Result<()> {
    validate_transition(transition)?;
    if stationary.len() != transition.len() {
        return invalid("stationary vector length does not match the transition matrix");
    }
    let chain = SparseChain::new(transition);
    let mut next = vec![0.0; stationary.len()];
    chain.left_mul(stationary, &mut next);
    let err = next.iter().zip(stationary).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    if err > STATIONARY_TOL {
        return invalid(format!("stationary vector violates pi P = pi by {:e}", err));
    }
    Ok(())
}

fn dense_mul(a: &[Vec<f64>], b: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let m = a.len();
    let mut c = vec![vec![0.0; m]; m];
    for i in 0..m {
        for k in 0..m {
            let aik = a[i][k];
            if aik == 0.0 {
                continue;
            }
            let bk = &b[k];
            let ci = &mut c[i];
            for j in 0..m {
                ci[j] += aik * bk[j];
            }
        }
    }
    c
}

fn dense_pow(p: &[Vec<f64>], mut q: usize) -> Vec<Vec<f64>> {
    let m = p.len();
    let mut result: Vec<Vec<f64>> = (0..m).map(|i| (0..m).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect();
    let mut base = p.to_vec();
    while q > 0 {
        if q & 1 == 1 {
            result = dense_mul(&result, &base);
        }
        q >>= 1;
        if q > 0 {
            base = dense_mul(&base, &base);
        }
    }
    result
}

/// Stationary law by repeated squaring from the uniform start.
pub fn stationary_distribution(transition: &[Vec<f64>]) -> Result<Vec<f64>> {
    validate_transition(transition)?;
    let m = transition.len();
    let mut power = transition.to_vec();
    for _ in 0..60 {
        let next = dense_mul(&power, &power);
        let delta = next
            .iter()
            .zip(&power)
            .flat_map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x - y).abs()))
            .fold(0.0, f64::max);
        power = next;
        if delta < 1e-15 {
            break;
        }
    }
    let mut pi: Vec<f64> = (0..m).map(|j| power.iter().map(|row| row[j]).sum::<f64>() / m as f64).collect();
    let s: f64 = pi.iter().sum();
    pi.iter_mut().for_each(|x| *x /= s);
    validate_chain(transition, &pi).map_err(|_| {
        Error::Construction("power iteration did not converge to a stationary distribution".into())
    })?;
    Ok(pi)
}

fn tv_from(row: &[f64], pi: &[f64]) -> f64 {
    0.5 * row.iter().zip(pi).map(|(a, b)| (a - b).abs()).sum::<f64>()
}

fn beta_from_chain(chain: &SparseChain, pi: &[f64], q: usize) -> f64 {
    if q == 0 {
        return 1.0;
    }
    let m = chain.len();
    let mut total = 0.0;
    let mut cur = vec![0.0; m];
    let mut nxt = vec![0.0; m];
    for x in 0..m {
        if pi[x] == 0.0 {
            continue;
        }
        cur.iter_mut().for_each(|c| *c = 0.0);
        cur[x] = 1.0;
        for _ in 0..q {
            chain.left_mul(&cur, &mut nxt);
            std::mem::swap(&mut cur, &mut nxt);
        }
        total += pi[x] * tv_from(&cur, pi);
    }
    total.clamp(0.0, 1.0)
}

/// `β_q = Σ_x π(x) TV(P^q(x,·), π)`, with `β_0 = 1`.
pub fn exact_beta_markov(transition: &[Vec<f64>], stationary: &[f64], q: usize) -> Result<f64> {
    validate_chain(transition, stationary)?;
    if q == 0 {
        return Ok(1.0);
    }
    let m = transition.len();
    let chain = SparseChain::new(transition);
    let sparse_cost = (q as f64) * (m as f64) * chain.nnz() as f64;
    let dense_cost = 2.0 * (q as f64).log2().ceil().max(1.0) * (m as f64).powi(3);
    if sparse_cost <= dense_cost {
        return Ok(beta_from_chain(&chain, stationary, q));
    }
    let pq = dense_pow(transition, q);
    let beta: f64 = pq.iter().zip(stationary).map(|(row, &w)| w * tv_from(row, stationary)).sum();
    Ok(beta.clamp(0.0, 1.0))
}

/// Exact coefficients for q = 0..=q_max, advancing all rows of `P^q` together.
pub fn exact_beta_sequence(transition: &[Vec<f64>], stationary: &[f64], q_max: usize) -> Vec<f64> {
    let m = transition.len();
    let chain = SparseChain::new(transition);
    let mut out = vec![1.0];
    let mut rows: Vec<Vec<f64>> = (0..m).map(|i| (0..m).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect();
    let mut buf = vec![0.0; m];
    for _ in 1..=q_max {
        let mut beta = 0.0;
        for (x, row) in rows.iter_mut().enumerate() {
            chain.left_mul(row, &mut buf);
            row.copy_from_slice(&buf);
            beta += stationary[x] * tv_from(row, stationary);
        }
        let beta = beta.clamp(0.0, 1.0);
        out.push(beta);
        if beta < 1e-15 {
            out.resize(q_max + 1, 0.0);
            break;
        }
    }
    out
}

/// Two-coordinate coefficient of the observed labels `labels[state]`:
/// `½ Σ_{a,b} |P(Y_0=a, Y_q=b) − P(a)P(b)|`.
pub fn exact_beta_observed(transition: &[Vec<f64>], stationary: &[f64], labels: &[usize], q: usize) -> Result<f64> {
    validate_chain(transition, stationary)?;
    if labels.len() != transition.len() {
        return invalid("one label per state is required");
    }
    if q == 0 {
        return Ok(1.0);
    }
    let chain = SparseChain::new(transition);
    let m = transition.len();
    let k = labels.iter().max().map_or(0, |&l| l + 1);
    let mut marg = vec![0.0; k];
    for (x, &l) in labels.iter().enumerate() {
        marg[l] += stationary[x];
    }
    let mut total = 0.0;
    let mut cur = vec![0.0; m];
    let mut nxt = vec![0.0; m];
    for a in 0..k {
        for x in 0..m {
            cur[x] = if labels[x] == a { stationary[x] } else { 0.0 };
        }
        for _ in 0..q {
            chain.left_mul(&cur, &mut nxt);
            std::mem::swap(&mut cur, &mut nxt);
        }
        let mut joint = vec![0.0; k];
        for x in 0..m {
            joint[labels[x]] += cur[x];
        }
        total += joint.iter().zip(&marg).map(|(j, mb)| (j - marg[a] * mb).abs()).sum::<f64>();
    }
    Ok((0.5 * total).clamp(0.0, 1.0))
}

/// A realized stationary sequence with its provenance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SequenceSample {
    pub values: Vec<f64>,
    pub generator_id: String,
    pub params: BTreeMap<String, serde_json::Value>,
    pub seed: u64,
    pub mixing_oracle: Option<MixingProfile>,
    pub marginal: Option<Marginal>,
}

impl SequenceSample {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Single-column CSV with a provenance comment line.
    pub fn to_csv(&self) -> String {
        let params = serde_json::to_string(&self.params).unwrap_or_default();
        let mut out = format!("# generator={} seed={} params={}\nvalue\n", self.generator_id, self.seed, params);
        for v in &self.values {
            out.push_str(&format!("{}\n", v));
        }
        out
    }
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn draw_index(cdf: &[f64], u: f64) -> usize {
    cdf.iter().position(|&c| u < c).unwrap_or(cdf.len() - 1)
}

fn cumulative(p: &[f64]) -> Vec<f64> {
    let mut acc = 0.0;
    p.iter()
        .map(|&x| {
            acc += x;
            acc
        })
        .collect()
}

pub fn gen_finite_markov(transition: &[Vec<f64>], state_values: &[f64], n: usize, seed: u64) -> Result<SequenceSample> {
    if n == 0 {
        return invalid("n must be at least 1");
    }
    if state_values.len() != transition.len() {
        return invalid("one state value per state is required");
    }
    let pi = stationary_distribution(transition)?;
    let row_cdfs: Vec<Vec<f64>> = transition.iter().map(|r| cumulative(r)).collect();
    let mut g = rng(seed);
    let mut state = draw_index(&cumulative(&pi), g.gen::<f64>());
    let mut values = Vec::with_capacity(n);
    values.push(state_values[state]);
    for _ in 1..n {
        state = draw_index(&row_cdfs[state], g.gen::<f64>());
        values.push(state_values[state]);
    }
    let mut params = BTreeMap::new();
    params.insert("transition".into(), serde_json::json!(transition));
    params.insert("state_values".into(), serde_json::json!(state_values));
    Ok(SequenceSample {
        values,
        generator_id: "finite_markov".into(),
        params,
        seed,
        mixing_oracle: Some(MixingProfile::exact_markov(transition.to_vec(), pi.clone())?),
        marginal: Some(Marginal::discrete(state_values, &pi)?),
    })
}

/// Exact sampler for `P(L=k) ∝ k^{-s}` on `1..=l_max`, `s > 1`.
///
/// Continuous Pareto proposal floored to an integer, accepted with the
/// ratio of the target mass to the proposal cell mass.
#[derive(Clone, Debug)]
pub(crate) struct ZipfSampler {
    s: f64,
    l_max: u64,
    tail: f64,
    w1: f64,
}

impl ZipfSampler {
    pub(crate) fn new(s: f64, l_max: u64) -> Self {
        let tail = (l_max as f64 + 1.0).powf(1.0 - s);
        let mut z = Self { s, l_max, tail, w1: 1.0 };
        z.w1 = z.weight(1);
        z
    }

    fn cell_mass(&self, k: f64) -> f64 {
        (k.powf(1.0 - self.s) - (k + 1.0).powf(1.0 - self.s)) / (self.s - 1.0)
    }

    fn weight(&self, k: u64) -> f64 {
        let k = k as f64;
        k.powf(-self.s) / self.cell_mass(k)
    }

    pub(crate) fn sample<R: Rng>(&self, g: &mut R) -> u64 {
        if self.l_max == 1 {
            return 1;
        }
        loop {
            let u: f64 = g.gen();
            let y = (1.0 - u * (1.0 - self.tail)).powf(1.0 / (1.0 - self.s));
            let k = (y.floor() as u64).clamp(1, self.l_max);
            let v: f64 = g.gen();
            if v * self.w1 <= self.weight(k) {
                return k;
            }
        }
    }
}

/// Block lengths `P(L=k) ∝ k^{-(2+β)}`, block-constant values, stationary start.
///
/// `levels = None` gives Uniform[0,1] values; `Some(v)` gives values in `{0,..,v-1}`.
pub fn gen_renewal_chain(tail_exponent: f64, l_max: u64, levels: Option<u32>, n: usize, seed: u64) -> Result<SequenceSample> {
    if !(tail_exponent > 0.0 && tail_exponent.is_finite()) {
        return invalid("tail exponent must be positive");
    }
    if l_max < 1 {
        return invalid("L_max must be at least 1");
    }
    if n == 0 {
        return invalid("n must be at least 1");
    }
    if levels == Some(0) {
        return invalid("levels must be positive");
    }
    let lengths = ZipfSampler::new(2.0 + tail_exponent, l_max);
    let biased = ZipfSampler::new(1.0 + tail_exponent, l_max);
    let mut g = rng(seed);
    let draw_value = |g: &mut ChaCha8Rng| -> f64 {
        let u: f64 = g.gen();
        match levels {
            None => u,
            Some(v) => ((u * v as f64).floor()).min(v as f64 - 1.0),
        }
    };
    let mut values = Vec::with_capacity(n);
    let first = biased.sample(&mut g);
    let mut remaining = g.gen_range(1..=first);
    let mut value = draw_value(&mut g);
    while values.len() < n {
        let take = (remaining as usize).min(n - values.len());
        values.extend(std::iter::repeat(value).take(take));
        remaining = lengths.sample(&mut g);
        value = draw_value(&mut g);
    }
    let mut params = BTreeMap::new();
    params.insert("tail_exponent".into(), serde_json::json!(tail_exponent));
    params.insert("l_max".into(), serde_json::json!(l_max));
    if let Some(v) = levels {
        params.insert("levels".into(), serde_json::json!(v));
    }
    let marginal = match levels {
        None => Marginal::Uniform01,
        Some(v) => {
            let atoms: Vec<f64> = (0..v).map(f64::from).collect();
            Marginal::discrete(&atoms, &vec![1.0 / v as f64; v as usize])?
        }
    };
    let oracle = if l_max == 1 { MixingProfile::iid() } else { MixingProfile::polynomial(1.0, tail_exponent)? };
    Ok(SequenceSample {
        values,
        generator_id: "renewal".into(),
        params,
        seed,
        mixing_oracle: Some(oracle),
        marginal: Some(marginal),
    })
}

/// The discretized renewal chain on states (residual block length r, value v).
#[derive(Clone, Debug)]
pub struct RenewalChain {
    pub transition: Vec<Vec<f64>>,
    pub stationary: Vec<f64>,
    /// Observed value index of each state.
    pub labels: Vec<usize>,
}

/// Builds the exact (residual, value) chain of the renewal generator.
///
/// State `(r, v)` sits at index `(r-1) * levels + v`; the stationary law is
/// `P(L ≥ r) / E[L] / levels`.
pub fn renewal_markov_chain(tail_exponent: f64, l_max: usize, levels: usize) -> Result<RenewalChain> {
    if !(tail_exponent > 0.0) || l_max < 1 || levels < 1 {
        return invalid("renewal chain needs tail exponent > 0, L_max >= 1, levels >= 1");
    }
    let s = 2.0 + tail_exponent;
    let w: Vec<f64> = (1..=l_max).map(|k| (k as f64).powf(-s)).collect();
    let z: f64 = w.iter().sum();
    let p: Vec<f64> = w.iter().map(|x| x / z).collect();
    let mean_len: f64 = p.iter().enumerate().map(|(i, pk)| (i + 1) as f64 * pk).sum();
    let m = l_max * levels;
    let mut transition = vec![vec![0.0; m]; m];
    let idx = |r: usize, v: usize| (r - 1) * levels + v;
    for r in 1..=l_max {
        for v in 0..levels {
            let row = &mut transition[idx(r, v)];
            if r > 1 {
                row[idx(r - 1, v)] = 1.0;
            } else {
                for (k, pk) in p.iter().enumerate() {
                    for v2 in 0..levels {
                        row[idx(k + 1, v2)] = pk / levels as f64;
                    }
                }
            }
        }
    }
    let mut survival = vec![0.0; l_max + 1];
    for r in (1..=l_max).rev() {
        survival[r - 1] = p[r - 1] + if r < l_max { survival[r] } else { 0.0 };
    }
    let mut stationary = vec![0.0; m];
    let mut labels = vec![0; m];
    for r in 1..=l_max {
        for v in 0..levels {
            stationary[idx(r, v)] = survival[r - 1] / mean_len / levels as f64;
            labels[idx(r, v)] = v;
        }
    }
    validate_chain(&transition, &stationary)?;
    Ok(RenewalChain { transition, stationary, labels })
}

/// Gaussian AR(1) started from its stationary law.
pub fn gen_ar1(a: f64, n: usize, seed: u64) -> Result<SequenceSample> {
    if !(a.abs() < 1.0) {
        return Err(Error::Invalid(format!("AR(1) coefficient {} is not stationary (|a| >= 1)", a)));
    }
    if n == 0 {
        return invalid("n must be at least 1");
    }
    let sd = 1.0 / (1.0 - a * a).sqrt();
    let mut g = rng(seed);
    let mut values = Vec::with_capacity(n);
    let z: f64 = StandardNormal.sample(&mut g);
    let mut x = sd * z;
    values.push(x);
    for _ in 1..n {
        let e: f64 = StandardNormal.sample(&mut g);
        x = a * x + e;
        values.push(x);
    }
    let rate = if a == 0.0 { f64::INFINITY } else { -a.abs().ln() };
    let mut params = BTreeMap::new();
    params.insert("a".into(), serde_json::json!(a));
    Ok(SequenceSample {
        values,
        generator_id: "ar1".into(),
        params,
        seed,
        mixing_oracle: Some(MixingProfile::exponential(1.0, rate)?.with_flavor(Flavor::Gamma)),
        marginal: Some(Marginal::Gaussian { mean: 0.0, sd }),
    })
}

pub fn gen_iid_uniform(n: usize, seed: u64) -> Result<SequenceSample> {
    if n == 0 {
        return invalid("n must be at least 1");
    }
    let mut g = rng(seed);
    let values = (0..n).map(|_| g.gen::<f64>()).collect();
    Ok(SequenceSample {
        values,
        generator_id: "iid".into(),
        params: BTreeMap::new(),
        seed,
        mixing_oracle: Some(MixingProfile::iid()),
        marginal: Some(Marginal::Uniform01),
    })
}

/// Equal-frequency cell assignment rule.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BinningRule {
    /// Ties share a cell; at most `m` distinct values get one cell each.
    TieAware,
    /// Cells by rank, ties broken by position.
    Rank,
}

fn assign_cells(values: &[f64], m: usize, rule: BinningRule) -> Vec<usize> {
    let n = values.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]).then(a.cmp(&b)));
    let mut cells = vec![0; n];
    match rule {
        BinningRule::Rank => {
            for (rank, &i) in order.iter().enumerate() {
                cells[i] = rank * m / n;
            }
        }
        BinningRule::TieAware => {
            let mut distinct: Vec<f64> = order.iter().map(|&i| values[i]).collect();
            distinct.dedup();
            if distinct.len() <= m {
                for i in 0..n {
                    cells[i] = distinct.partition_point(|&d| d < values[i]);
                }
            } else {
                let cuts: Vec<f64> = (1..m).map(|j| values[order[j * n / m]]).collect();
                for i in 0..n {
                    cells[i] = cuts.partition_point(|&c| c <= values[i]);
                }
            }
        }
    }
    cells
}

/// Plug-in two-coordinate coefficient on equal-frequency cells.
///
/// A lower-bound proxy for the coefficient over the full past/future σ-fields.
pub fn estimate_beta_binning(sample: &SequenceSample, q: usize, m_bins: usize) -> Result<f64> {
    estimate_beta_binning_with(&sample.values, q, m_bins, BinningRule::TieAware)
}

pub fn estimate_beta_binning_with(values: &[f64], q: usize, m_bins: usize, rule: BinningRule) -> Result<f64> {
    let n = values.len();
    if m_bins < 1 {
        return invalid("m_bins must be at least 1");
    }
    if n < 10 * m_bins * m_bins {
        return Err(Error::Estimation(format!(
            "{} observations for {} bins; at least {} are required",
            n,
            m_bins,
            10 * m_bins * m_bins
        )));
    }
    if 2 * q >= n {
        return invalid(format!("lag {} must be below n/2 = {}", q, n / 2));
    }
    let cells = assign_cells(values, m_bins, rule);
    let pairs = n - q;
    let mut joint = vec![0usize; m_bins * m_bins];
    let mut left = vec![0usize; m_bins];
    let mut right = vec![0usize; m_bins];
    for t in 0..pairs {
        let (a, b) = (cells[t], cells[t + q]);
        joint[a * m_bins + b] += 1;
        left[a] += 1;
        right[b] += 1;
    }
    let np = pairs as f64;
    let mut total = 0.0;
    for a in 0..m_bins {
        for b in 0..m_bins {
            let pj = joint[a * m_bins + b] as f64 / np;
            total += (pj - left[a] as f64 / np * right[b] as f64 / np).abs();
        }
    }
    Ok(0.5 * total)
}

/// Generator choice as it appears in run configurations.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "generator", content = "params", rename_all = "snake_case", deny_unknown_fields)]
pub enum Dgp {
    Iid {},
    FiniteMarkov {
        transition: Vec<Vec<f64>>,
        state_values: Vec<f64>,
    },
    Renewal {
        tail_exponent: f64,
        l_max: u64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        levels: Option<u32>,
    },
    Ar1 {
        a: f64,
    },
    /// Constant sequence, referenced against the Uniform[0,1] law.
    Constant {
        value: f64,
    },
}

impl Dgp {
    pub fn sample(&self, n: usize, seed: u64) -> Result<SequenceSample> {
        match self {
            Dgp::Iid {} => gen_iid_uniform(n, seed),
            Dgp::FiniteMarkov { transition, state_values } => gen_finite_markov(transition, state_values, n, seed),
            Dgp::Renewal { tail_exponent, l_max, levels } => gen_renewal_chain(*tail_exponent, *l_max, *levels, n, seed),
            Dgp::Ar1 { a } => gen_ar1(*a, n, seed),
            Dgp::Constant { value } => {
                if n == 0 {
                    return invalid("n must be at least 1");
                }
                let mut params = BTreeMap::new();
                params.insert("value".into(), serde_json::json!(value));
                Ok(SequenceSample {
                    values: vec![*value; n],
                    generator_id: "constant".into(),
                    params,
                    seed,
                    mixing_oracle: Some(MixingProfile::iid()),
                    marginal: Some(Marginal::Uniform01),
                })
            }
        }
    }

    /// Mixing profile implied by the generator, if known without sampling.
    pub fn profile(&self) -> Result<MixingProfile> {
        Ok(match self {
            Dgp::Iid {} | Dgp::Constant { .. } => MixingProfile::iid(),
            Dgp::FiniteMarkov { transition, .. } => {
                MixingProfile::exact_markov(transition.clone(), stationary_distribution(transition)?)?
            }
            Dgp::Renewal { tail_exponent, l_max, .. } => {
                if *l_max == 1 {
                    MixingProfile::iid()
                } else {
                    MixingProfile::polynomial(1.0, *tail_exponent)?
                }
            }
            Dgp::Ar1 { a } => {
                let rate = if *a == 0.0 { f64::INFINITY } else { -a.abs().ln() };
                MixingProfile::exponential(1.0, rate)?.with_flavor(Flavor::Gamma)
            }
        })
    }
}

/// A seeded generator block: `{generator, params, seed}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawDgpBlock", into = "RawDgpBlock")]
pub struct DgpBlock {
    pub dgp: Dgp,
    pub seed: Option<u64>,
}

#[derive(Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDgpBlock {
    generator: String,
    #[serde(default = "empty_params")]
    params: serde_json::Value,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
}

fn empty_params() -> serde_json::Value {
    serde_json::json!({})
}

impl TryFrom<RawDgpBlock> for DgpBlock {
    type Error = String;

    fn try_from(raw: RawDgpBlock) -> std::result::Result<Self, String> {
        let tagged = serde_json::json!({"generator": raw.generator, "params": raw.params});
        let dgp = serde_json::from_value(tagged).map_err(|e| e.to_string())?;
        Ok(Self { dgp, seed: raw.seed })
    }
}

impl From<DgpBlock> for RawDgpBlock {
    fn from(b: DgpBlock) -> Self {
        let v = serde_json::to_value(&b.dgp).expect("generator serializes");
        Self {
            generator: v["generator"].as_str().unwrap_or_default().to_string(),
            params: v.get("params").cloned().unwrap_or_else(empty_params),
            seed: b.seed,
        }
    }
}
