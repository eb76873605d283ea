//! Entropic and exact optimal transport between point clouds.

use std::time::Instant;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::empirical::{slope_fit, SlopeFit};
use crate::error::{invalid, Error, Result};
use crate::mixing::Dgp;
use crate::rates::ot_schedule;
use crate::sum::mean;

pub type Cloud = Vec<Vec<f64>>;

fn check_cloud(x: &[Vec<f64>]) -> Result<usize> {
    let Some(first) = x.first() else {
        return invalid("empty cloud");
    };
    let d = first.len();
    if d == 0 || x.iter().any(|p| p.len() != d) {
        return invalid("points must share a positive dimension");
    }
    if x.iter().flatten().any(|v| !v.is_finite()) {
        return invalid("cloud contains non-finite coordinates");
    }
    Ok(d)
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn cost_matrix(x: &[Vec<f64>], y: &[Vec<f64>]) -> Result<Vec<f64>> {
    let dx = check_cloud(x)?;
    let dy = check_cloud(y)?;
    if dx != dy {
        return invalid("clouds live in different dimensions");
    }
    let mut c = Vec::with_capacity(x.len() * y.len());
    for a in x {
        for b in y {
            c.push(sq_dist(a, b));
        }
    }
    Ok(c)
}

/// Log-domain Sinkhorn dual variables after `k` half-step pairs.
#[derive(Clone, Debug)]
pub struct SinkhornState {
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    pub eps: f64,
    pub k: usize,
    cost: Vec<f64>,
    cost_t: Vec<f64>,
}

/// `−ε log(mean_j exp((w_j − c_j)/ε))`, max-shifted.
fn soft_min(eps: f64, w: &[f64], c: &[f64]) -> f64 {
    let inv = 1.0 / eps;
    let mx = w.iter().zip(c).map(|(w, c)| (w - c) * inv).fold(f64::NEG_INFINITY, f64::max);
    let s: f64 = w.iter().zip(c).map(|(w, c)| ((w - c) * inv - mx).exp()).sum();
    -eps * (mx + (s / w.len() as f64).ln())
}

impl SinkhornState {
    pub fn new(x: &[Vec<f64>], y: &[Vec<f64>], eps: f64) -> Result<Self> {
        if !(eps > 0.0 && eps.is_finite()) {
            return invalid("eps must be positive");
        }
        let cost = cost_matrix(x, y)?;
        let (m, n) = (x.len(), y.len());
        let mut cost_t = vec![0.0; m * n];
        for i in 0..m {
            for j in 0..n {
                cost_t[j * m + i] = cost[i * n + j];
            }
        }
        Ok(Self { u: vec![0.0; m], v: vec![0.0; n], eps, k: 0, cost, cost_t })
    }

    pub fn m(&self) -> usize {
        self.u.len()
    }

    pub fn n(&self) -> usize {
        self.v.len()
    }

    /// One `u` update from `v`, then one `v` update from the new `u`.
    pub fn iterate(&mut self) -> Result<()> {
        let (m, n, eps) = (self.m(), self.n(), self.eps);
        for i in 0..m {
            self.u[i] = soft_min(eps, &self.v, &self.cost[i * n..(i + 1) * n]);
        }
        for j in 0..n {
            self.v[j] = soft_min(eps, &self.u, &self.cost_t[j * m..(j + 1) * m]);
        }
        self.k += 1;
        if self.u.iter().chain(&self.v).any(|x| !x.is_finite()) {
            return Err(Error::Numerical(format!("non-finite Sinkhorn potential at k = {}", self.k)));
        }
        Ok(())
    }

    /// `mean(u) + mean(v)`.
    pub fn dual(&self) -> f64 {
        mean(&self.u) + mean(&self.v)
    }
}

pub fn sinkhorn_iterate(mut state: SinkhornState) -> Result<SinkhornState> {
    state.iterate()?;
    Ok(state)
}

/// Dual objective after `k` iterations.
pub fn t_eps_k(x: &[Vec<f64>], y: &[Vec<f64>], eps: f64, k: usize) -> Result<f64> {
    if k == 0 {
        return invalid("k must be at least 1");
    }
    let mut s = SinkhornState::new(x, y, eps)?;
    for _ in 0..k {
        s.iterate()?;
    }
    Ok(s.dual())
}

/// `T(X,Y) − (T(X,X) + T(Y,Y))/2` with shared `(ε, k)`.
pub fn sinkhorn_divergence(x: &[Vec<f64>], y: &[Vec<f64>], eps: f64, k: usize) -> Result<f64> {
    let txy = t_eps_k(x, y, eps, k)?;
    let txx = t_eps_k(x, x, eps, k)?;
    let tyy = t_eps_k(y, y, eps, k)?;
    Ok(txy - 0.5 * (txx + tyy))
}

/// Minimum-cost perfect matching on a square cost matrix (row-major),
/// shortest augmenting paths with potentials. Returns `assignment[row] = col`.
pub fn solve_assignment(cost: &[f64], n: usize) -> Vec<usize> {
    let inf = f64::INFINITY;
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    let mut minv = vec![0.0; n + 1];
    let mut used = vec![false; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        minv.iter_mut().for_each(|x| *x = inf);
        used.iter_mut().for_each(|x| *x = false);
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let row = &cost[(i0 - 1) * n..i0 * n];
            let mut delta = inf;
            let mut j1 = 0;
            for j in 1..=n {
                if !used[j] {
                    let cur = row[j - 1] - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut assignment = vec![0usize; n];
    for j in 1..=n {
        assignment[p[j] - 1] = j - 1;
    }
    assignment
}

/// `min_π (1/n) Σ ‖x_i − y_π(i)‖²` by the assignment solver.
pub fn assignment_w2(x: &[Vec<f64>], y: &[Vec<f64>]) -> Result<f64> {
    if x.len() != y.len() {
        return invalid("clouds must have equal sizes");
    }
    let c = cost_matrix(x, y)?;
    let n = x.len();
    let a = solve_assignment(&c, n);
    let terms: Vec<f64> = a.iter().enumerate().map(|(i, &j)| c[i * n + j]).collect();
    Ok(mean(&terms))
}

/// One-dimensional case by sorted matching.
pub fn sorted_w2_1d(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() || x.is_empty() {
        return invalid("clouds must be nonempty with equal sizes");
    }
    let mut a = x.to_vec();
    let mut b = y.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let terms: Vec<f64> = a.iter().zip(&b).map(|(p, q)| (p - q) * (p - q)).collect();
    Ok(mean(&terms))
}

pub fn exact_w2(x: &[Vec<f64>], y: &[Vec<f64>]) -> Result<f64> {
    if x.len() != y.len() {
        return invalid("clouds must have equal sizes");
    }
    if check_cloud(x)? == 1 && check_cloud(y)? == 1 {
        let a: Vec<f64> = x.iter().map(|p| p[0]).collect();
        let b: Vec<f64> = y.iter().map(|p| p[0]).collect();
        return sorted_w2_1d(&a, &b);
    }
    assignment_w2(x, y)
}

/// Harness settings for the estimator comparison.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OtConfig {
    pub d: usize,
    pub beta: f64,
    pub n_grid: Vec<u64>,
    pub replications: usize,
    #[serde(default)]
    pub base_seed: u64,
    pub dgp_x: Dgp,
    pub dgp_y: Dgp,
    #[serde(default)]
    pub eps_override: Option<f64>,
    #[serde(default)]
    pub k_override: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OtRow {
    pub n: u64,
    pub k: usize,
    pub eps: f64,
    pub exact_mean: f64,
    pub sinkhorn_mean: f64,
    pub exact_seconds: f64,
    pub sinkhorn_seconds: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OtReport {
    pub regime: &'static str,
    pub rows: Vec<OtRow>,
    pub exact_time_fit: Option<SlopeFit>,
    pub sinkhorn_time_fit: Option<SlopeFit>,
}

/// `n` points whose coordinates are independent runs of `dgp`.
pub fn sample_cloud(dgp: &Dgp, d: usize, n: usize, seed: u64) -> Result<Cloud> {
    let mut seeder = ChaCha8Rng::seed_from_u64(seed);
    let mut coords = Vec::with_capacity(d);
    for _ in 0..d {
        coords.push(dgp.sample(n, seeder.next_u64())?.values);
    }
    Ok((0..n).map(|i| coords.iter().map(|c| c[i]).collect()).collect())
}

fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(f64::total_cmp);
    let m = xs.len();
    if m % 2 == 1 {
        xs[m / 2]
    } else {
        0.5 * (xs[m / 2 - 1] + xs[m / 2])
    }
}

/// Runs serially so wall-clock times are comparable across `n`.
pub fn compare_estimators(cfg: &OtConfig) -> Result<OtReport> {
    if cfg.d < 2 {
        return invalid("harness needs d >= 2");
    }
    if cfg.replications == 0 || cfg.n_grid.is_empty() {
        return invalid("need a nonempty n grid and positive replications");
    }
    let mut rows = Vec::with_capacity(cfg.n_grid.len());
    let cut = 2.0 / (cfg.d as f64 - 2.0);
    let regime = if cfg.beta > cut { "fast" } else { "slow" };
    for &n in &cfg.n_grid {
        let n_us = n as usize;
        let (k, eps) = if cfg.d >= 4 {
            let s = ot_schedule(cfg.beta, cfg.d, n_us)?;
            (s.k as usize, s.eps)
        } else {
            (0, 0.0)
        };
        let k = cfg.k_override.unwrap_or(k);
        let eps = cfg.eps_override.unwrap_or(eps);
        if k == 0 || !(eps > 0.0) {
            return invalid("d < 4 needs eps_override and k_override");
        }
        let (mut ex, mut sk, mut te, mut ts) = (vec![], vec![], vec![], vec![]);
        for r in 0..cfg.replications as u64 {
            let seed = cfg.base_seed.wrapping_add(r.wrapping_mul(0x9E37_79B9));
            let x = sample_cloud(&cfg.dgp_x, cfg.d, n_us, seed)?;
            let y = sample_cloud(&cfg.dgp_y, cfg.d, n_us, seed ^ 0xA5A5_A5A5)?;
            let t0 = Instant::now();
            ex.push(exact_w2(&x, &y)?);
            te.push(t0.elapsed().as_secs_f64());
            let t1 = Instant::now();
            sk.push(sinkhorn_divergence(&x, &y, eps, k)?);
            ts.push(t1.elapsed().as_secs_f64());
        }
        rows.push(OtRow {
            n,
            k,
            eps,
            exact_mean: mean(&ex),
            sinkhorn_mean: mean(&sk),
            exact_seconds: median(te),
            sinkhorn_seconds: median(ts),
        });
    }
    let fit = |f: &dyn Fn(&OtRow) -> f64| -> Option<SlopeFit> {
        let pts: Vec<(u64, f64)> = rows.iter().map(|r| (r.n, f(r).max(1e-9))).collect();
        slope_fit(&pts).ok()
    };
    let exact_time_fit = fit(&|r| r.exact_seconds);
    let sinkhorn_time_fit = fit(&|r| r.sinkhorn_seconds);
    Ok(OtReport { regime, rows, exact_time_fit, sinkhorn_time_fit })
}
