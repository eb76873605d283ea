//! Fixed-shape pairwise summation.
//!
//! The reduction tree depends only on the slice length, so a result is
//! bit-identical no matter how the inputs were produced (serially or by a
//! parallel map that preserves index order).

const LEAF: usize = 8;

pub fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= LEAF {
        let mut s = 0.0;
        for &x in xs {
            s += x;
        }
        return s;
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

pub fn mean(xs: &[f64]) -> f64 {
    pairwise_sum(xs) / xs.len() as f64
}

/// Sample mean and jackknife standard error of the mean.
pub fn jackknife_mean(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    let total = pairwise_sum(xs);
    let m = total / n as f64;
    if n < 2 {
        return (m, 0.0);
    }
    let loo: Vec<f64> = xs.iter().map(|&x| (total - x) / (n - 1) as f64).collect();
    let loo_mean = mean(&loo);
    let dev: Vec<f64> = loo.iter().map(|&t| (t - loo_mean) * (t - loo_mean)).collect();
    let var = (n - 1) as f64 / n as f64 * pairwise_sum(&dev);
    (m, var.max(0.0).sqrt())
}
