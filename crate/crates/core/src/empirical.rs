//! Monte-Carlo suprema, slope fits, the block variance bound and isotonic ERM.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classes::{sup_halflines, sup_lipschitz_w1, sup_monotone01, CdfOracle};
use crate::error::{invalid, Error, Result};
use crate::mixing::{exact_beta_sequence, gen_renewal_chain, stationary_distribution, validate_chain, Dgp, SequenceSample, SparseChain};
use crate::rates::c_phi;
use crate::sum::{jackknife_mean, mean, pairwise_sum};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Statistic {
    Ks,
    Monotone,
    W1,
}

impl Statistic {
    pub fn as_str(&self) -> &'static str {
        match self {
            Statistic::Ks => "ks",
            Statistic::Monotone => "monotone",
            Statistic::W1 => "w1",
        }
    }
}

/// Exact `sup |G_n|` over the class behind `statistic`. The explicit oracle
/// wins over the sample's recorded marginal.
pub fn gn_stat(sample: &SequenceSample, statistic: Statistic, oracle: Option<&dyn CdfOracle>) -> Result<f64> {
    let oracle: &dyn CdfOracle = match (oracle, sample.marginal.as_ref()) {
        (Some(o), _) => o,
        (None, Some(m)) => m,
        (None, None) => return invalid(format!("no CDF oracle for generator {}", sample.generator_id)),
    };
    match statistic {
        Statistic::Ks => sup_halflines(&sample.values, oracle),
        Statistic::Monotone => sup_monotone01(&sample.values, oracle),
        Statistic::W1 => sup_lipschitz_w1(&sample.values, oracle),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct McEstimate {
    pub mean: f64,
    pub standard_error: f64,
    pub replications: usize,
}

/// Replica `r` draws with seed `base_seed + r`.
pub fn mc_replicas(dgp: &Dgp, statistic: Statistic, n: usize, replications: usize, base_seed: u64) -> Result<Vec<f64>> {
    (0..replications as u64)
        .into_par_iter()
        .map(|r| {
            let seed = base_seed.wrapping_add(r);
            dgp.sample(n, seed)
                .and_then(|s| gn_stat(&s, statistic, None))
                .map_err(|e| Error::Replica { replica: r, source: Box::new(e) })
        })
        .collect()
}

pub fn mc_sup_expectation(dgp: &Dgp, statistic: Statistic, n: usize, replications: usize, base_seed: u64) -> Result<McEstimate> {
    if replications < 30 {
        return invalid("at least 30 replications are required");
    }
    let vals = mc_replicas(dgp, statistic, n, replications, base_seed)?;
    let (m, se) = jackknife_mean(&vals);
    Ok(McEstimate { mean: m, standard_error: se, replications })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SlopeFit {
    pub n_grid: Vec<u64>,
    pub estimates: Vec<f64>,
    pub standard_errors: Vec<f64>,
    pub slope: f64,
    pub intercept: f64,
    pub slope_se: f64,
    pub r_squared: f64,
}

/// OLS of `log estimate` on `log n`.
pub fn slope_fit(pairs: &[(u64, f64)]) -> Result<SlopeFit> {
    let with: Vec<(u64, f64, f64)> = pairs.iter().map(|&(n, e)| (n, e, f64::NAN)).collect();
    slope_fit_with_errors(&with)
}

/// As [`slope_fit`], carrying per-point standard errors through.
pub fn slope_fit_with_errors(points: &[(u64, f64, f64)]) -> Result<SlopeFit> {
    if points.len() < 4 {
        return invalid("slope fit needs at least 4 points");
    }
    if points.windows(2).any(|w| w[1].0 <= w[0].0) {
        return invalid("n grid must be strictly increasing");
    }
    if let Some(p) = points.iter().find(|p| !(p.1 > 0.0 && p.1.is_finite())) {
        return invalid(format!("nonpositive estimate {} at n = {}", p.1, p.0));
    }
    let xs: Vec<f64> = points.iter().map(|p| (p.0 as f64).ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let k = xs.len() as f64;
    let mx = mean(&xs);
    let my = mean(&ys);
    let sxx = pairwise_sum(&xs.iter().map(|x| (x - mx) * (x - mx)).collect::<Vec<_>>());
    let sxy = pairwise_sum(&xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).collect::<Vec<_>>());
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let resid: Vec<f64> = xs.iter().zip(&ys).map(|(x, y)| (y - intercept - slope * x).powi(2)).collect();
    let sse = pairwise_sum(&resid);
    let tss = pairwise_sum(&ys.iter().map(|y| (y - my) * (y - my)).collect::<Vec<_>>());
    let r_squared = if tss > 0.0 { 1.0 - sse / tss } else { 1.0 };
    let slope_se = (sse / (k - 2.0) / sxx).sqrt();
    Ok(SlopeFit {
        n_grid: points.iter().map(|p| p.0).collect(),
        estimates: points.iter().map(|p| p.1).collect(),
        standard_errors: points.iter().map(|p| p.2).collect(),
        slope,
        intercept,
        slope_se,
        r_squared,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct VarianceReport {
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
    pub orlicz_norm: f64,
}

/// `‖h‖_φ` for `φ(x) = x^{r/2}` under the weights `pi`, by bisection on `t`.
pub fn orlicz_norm(h: &[f64], pi: &[f64], r: f64) -> f64 {
    let hmax = h.iter().zip(pi).filter(|(_, &p)| p > 0.0).map(|(x, _)| x.abs()).fold(0.0, f64::max);
    if hmax == 0.0 {
        return 0.0;
    }
    let expect = |t: f64| -> f64 { h.iter().zip(pi).map(|(x, p)| p * (x * x / (t * t)).powf(r / 2.0)).sum() };
    let (mut lo, mut hi) = (0.0, hmax);
    while hi - lo > 1e-10 * hi {
        let mid = 0.5 * (lo + hi);
        if expect(mid) <= 1.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

/// Exact `Var(Σ_{i=1}^q h(X_i))` for the stationary chain against the
/// block variance bound `q ‖h‖_φ² (c_φ² + 2Λ(q))`.
pub fn verify_variance_bound(transition: &[Vec<f64>], h: &[f64], q: usize, r: f64) -> Result<VarianceReport> {
    let cphi = c_phi(r)?;
    if q == 0 {
        return invalid("q must be at least 1");
    }
    if h.len() != transition.len() {
        return invalid("h must have one value per state");
    }
    let pi = stationary_distribution(transition)?;
    validate_chain(transition, &pi)?;
    let mu: f64 = h.iter().zip(&pi).map(|(x, p)| x * p).sum();
    let centered: Vec<f64> = h.iter().map(|x| x - mu).collect();
    let chain = SparseChain::new(transition);
    let mut g = centered.clone();
    let mut buf = vec![0.0; h.len()];
    let mut cov = Vec::with_capacity(q);
    for k in 0..q {
        if k > 0 {
            chain.right_mul(&g, &mut buf);
            std::mem::swap(&mut g, &mut buf);
        }
        cov.push(pi.iter().zip(&centered).zip(&g).map(|((p, c), x)| p * c * x).sum::<f64>());
    }
    let mut lhs = q as f64 * cov[0];
    for (k, c) in cov.iter().enumerate().skip(1) {
        lhs += 2.0 * (q - k) as f64 * c;
    }
    let betas = exact_beta_sequence(transition, &pi, q);
    let p = 1.0 - 2.0 / r;
    let lambda: f64 = betas.iter().map(|b| b.powf(p)).sum::<f64>() / p;
    let norm = orlicz_norm(h, &pi, r);
    let rhs = q as f64 * norm * norm * (cphi * cphi + 2.0 * lambda);
    Ok(VarianceReport { lhs, rhs, holds: lhs <= rhs * (1.0 + 1e-12), orlicz_norm: norm })
}

/// Least-squares non-decreasing fit; tied abscissae share one fitted value.
pub fn pava_isotonic(x: &[f64], y: &[f64]) -> Result<Vec<f64>> {
    if x.len() != y.len() {
        return invalid("x and y lengths differ");
    }
    if x.windows(2).any(|w| !(w[0] <= w[1])) {
        return invalid("x must be sorted");
    }
    // Blocks of (sum, weight, count).
    let mut blocks: Vec<(f64, f64, usize)> = Vec::new();
    let mut i = 0;
    while i < x.len() {
        let mut j = i;
        let mut s = 0.0;
        while j < x.len() && x[j] == x[i] {
            s += y[j];
            j += 1;
        }
        let w = (j - i) as f64;
        blocks.push((s, w, j - i));
        while blocks.len() > 1 {
            let (s1, w1, c1) = blocks[blocks.len() - 2];
            let (s2, w2, c2) = blocks[blocks.len() - 1];
            if s1 / w1 > s2 / w2 {
                blocks.pop();
                *blocks.last_mut().unwrap() = (s1 + s2, w1 + w2, c1 + c2);
            } else {
                break;
            }
        }
        i = j;
    }
    let mut out = Vec::with_capacity(x.len());
    for (s, w, c) in blocks {
        out.extend(std::iter::repeat(s / w).take(c));
    }
    Ok(out)
}

/// Noise process for the regression demonstration.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum NoiseModel {
    None,
    /// I.i.d. uniform on `[-amplitude, amplitude]`.
    IidUniform { amplitude: f64 },
    /// `amplitude (2V − 1)` with `V` a renewal chain of tail exponent `tail_exponent`.
    Renewal { amplitude: f64, tail_exponent: f64, l_max: u64 },
}

/// Monotone regression targets on [0,1].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Target {
    Identity,
    Step { at: f64 },
    Power { exponent: f64 },
}

impl Target {
    pub fn eval(&self, x: f64) -> f64 {
        match *self {
            Target::Identity => x,
            Target::Step { at } => {
                if x >= at {
                    1.0
                } else {
                    0.0
                }
            }
            Target::Power { exponent } => x.max(0.0).powf(exponent),
        }
    }
}

/// One replicate: i.i.d. uniform design, noise in time order, PAVA fit.
/// Returns the mean squared error at the design points.
pub fn erm_replicate(noise: NoiseModel, target: Target, n: usize, seed: u64) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let xs: Vec<f64> = (0..n).map(|_| rng.gen::<f64>()).collect();
    let xi: Vec<f64> = match noise {
        NoiseModel::None => vec![0.0; n],
        NoiseModel::IidUniform { amplitude } => (0..n).map(|_| amplitude * (2.0 * rng.gen::<f64>() - 1.0)).collect(),
        NoiseModel::Renewal { amplitude, tail_exponent, l_max } => {
            let s = gen_renewal_chain(tail_exponent, l_max, None, n, seed ^ 0x9E37_79B9_7F4A_7C15)?;
            s.values.iter().map(|v| amplitude * (2.0 * v - 1.0)).collect()
        }
    };
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let xsorted: Vec<f64> = idx.iter().map(|&i| xs[i]).collect();
    let y: Vec<f64> = idx.iter().map(|&i| target.eval(xs[i]) + xi[i]).collect();
    let fit = pava_isotonic(&xsorted, &y)?;
    let err: Vec<f64> = fit.iter().zip(&xsorted).map(|(f, x)| (f - target.eval(*x)).powi(2)).collect();
    Ok(mean(&err))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ErmConfig {
    pub noise: NoiseModel,
    pub target: Target,
    pub n_grid: Vec<u64>,
    pub replications: usize,
    #[serde(default)]
    pub base_seed: u64,
}

pub fn erm_risk_curve(cfg: &ErmConfig) -> Result<SlopeFit> {
    if cfg.replications == 0 {
        return invalid("replications must be positive");
    }
    let mut pts = Vec::with_capacity(cfg.n_grid.len());
    for &n in &cfg.n_grid {
        let vals: Vec<f64> = (0..cfg.replications as u64)
            .into_par_iter()
            .map(|r| {
                erm_replicate(cfg.noise, cfg.target, n as usize, cfg.base_seed.wrapping_add(r))
                    .map_err(|e| Error::Replica { replica: r, source: Box::new(e) })
            })
            .collect::<Result<_>>()?;
        let (m, se) = jackknife_mean(&vals);
        pts.push((n, m, se));
    }
    slope_fit_with_errors(&pts)
}
