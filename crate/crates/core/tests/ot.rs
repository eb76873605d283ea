use mixrate::mixing::Dgp;
use mixrate::ot::*;
use mixrate::rates::ot_schedule;
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn cloud(rng: &mut ChaCha8Rng, n: usize, d: usize, scale: f64) -> Cloud {
    (0..n).map(|_| (0..d).map(|_| scale * rng.gen::<f64>()).collect()).collect()
}

fn line(xs: &[f64]) -> Cloud {
    xs.iter().map(|&x| vec![x]).collect()
}

fn sq(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum()
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for i in 0..=p.len() {
            let mut q = p.clone();
            q.insert(i, n - 1);
            out.push(q);
        }
    }
    out
}

fn brute_w2(x: &Cloud, y: &Cloud) -> f64 {
    let n = x.len();
    permutations(n)
        .iter()
        .map(|p| (0..n).map(|i| sq(&x[i], &y[p[i]])).sum::<f64>() / n as f64)
        .fold(f64::INFINITY, f64::min)
}

/// `cost + ε·KL(π‖μ⊗ν)` over the symmetric couplings of {0,1} with itself,
/// minimized by golden-section search on the diagonal mass `a`.
fn two_point_oracle(eps: f64) -> f64 {
    let f = |a: f64| {
        let off = 0.5 - a;
        let kl = 2.0 * a * (4.0 * a).ln() + 2.0 * off * (4.0 * off).ln();
        (1.0 - 2.0 * a) + eps * kl
    };
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let (mut lo, mut hi) = (1e-15, 0.5 - 1e-15);
    while hi - lo > 1e-14 {
        let c = hi - g * (hi - lo);
        let d = lo + g * (hi - lo);
        if f(c) < f(d) {
            hi = d;
        } else {
            lo = c;
        }
    }
    f(0.5 * (lo + hi))
}

#[test]
fn single_atoms() {
    let x = vec![vec![1.0, -2.0, 0.5]];
    let y = vec![vec![0.0, 1.0, 3.0]];
    let c = sq(&x[0], &y[0]);
    let s = sinkhorn_iterate(SinkhornState::new(&x, &y, 0.7).unwrap()).unwrap();
    assert_eq!(s.k, 1);
    assert!((s.u[0] - c).abs() < 1e-12 && s.v[0].abs() < 1e-12);
    assert!((s.u[0] + s.v[0] - c).abs() < 1e-12);
    for k in [1, 5, 50] {
        assert!((t_eps_k(&x, &y, 0.7, k).unwrap() - c).abs() < 1e-12);
    }
    assert!((exact_w2(&x, &y).unwrap() - c).abs() < 1e-15);
}

#[test]
fn state_starts_at_zero_and_errors() {
    let x = line(&[0.0, 1.0]);
    let s = SinkhornState::new(&x, &x, 1.0).unwrap();
    assert_eq!((s.k, s.m(), s.n()), (0, 2, 2));
    assert!(s.v.iter().all(|&v| v == 0.0));
    assert!(SinkhornState::new(&x, &x, 0.0).is_err());
    assert!(SinkhornState::new(&x, &x, -1.0).is_err());
    assert!(SinkhornState::new(&[], &x, 1.0).is_err());
    assert!(SinkhornState::new(&x, &[vec![0.0, 1.0]], 1.0).is_err());
    assert!(t_eps_k(&x, &x, 1.0, 0).is_err());
}

#[test]
fn divergence_of_identical_clouds_is_zero() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for (n, d) in [(1, 1), (7, 2), (40, 4), (100, 3)] {
        let x = cloud(&mut rng, n, d, 3.0);
        for eps in [0.01, 0.3, 5.0] {
            for k in [1, 10, 200] {
                assert!(sinkhorn_divergence(&x, &x, eps, k).unwrap().abs() < 1e-10);
            }
        }
    }
}

#[test]
fn dual_objective_is_monotone_in_k() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for trial in 0..20 {
        let (m, n) = (rng.gen_range(1..40), rng.gen_range(1..40));
        let d = rng.gen_range(1..5);
        let x = cloud(&mut rng, m, d, 2.0);
        let y = cloud(&mut rng, n, d, 2.0);
        let eps = [0.02, 0.2, 1.0, 4.0][trial % 4];
        let mut s = SinkhornState::new(&x, &y, eps).unwrap();
        s.iterate().unwrap();
        let first = s.dual();
        let mut prev = first;
        for _ in 1..100 {
            s.iterate().unwrap();
            let cur = s.dual();
            assert!(cur >= prev - 1e-10, "trial {}: {} < {}", trial, cur, prev);
            prev = cur;
        }
        assert!(first <= prev + 1e-10);
    }
}

#[test]
fn two_point_matches_scalar_oracle() {
    let x = line(&[0.0, 1.0]);
    let got = t_eps_k(&x, &x, 1.0, 500).unwrap();
    let want = two_point_oracle(1.0);
    assert!((got - want).abs() < 1e-6, "{} vs {}", got, want);
    for eps in [0.1, 0.5, 3.0] {
        let got = t_eps_k(&x, &x, eps, 2000).unwrap();
        assert!((got - two_point_oracle(eps)).abs() < 1e-6, "eps={}", eps);
    }
}

#[test]
fn identical_clouds_contract_geometrically() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let x = cloud(&mut rng, 20, 2, 1.0);
    let mut s = SinkhornState::new(&x, &x, 1.0).unwrap();
    s.iterate().unwrap();
    let mut steps = Vec::new();
    for _ in 0..30 {
        let prev = s.u.clone();
        s.iterate().unwrap();
        let d = prev.iter().zip(&s.u).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        steps.push(d);
    }
    let live: Vec<f64> = steps.into_iter().take_while(|&d| d > 1e-13).collect();
    assert!(live.len() >= 3);
    for w in live.windows(2) {
        assert!(w[1] <= 0.9 * w[0], "{:?}", live);
    }
}

#[test]
fn translation_leaves_centered_potentials_unchanged() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let x = cloud(&mut rng, 15, 3, 1.0);
    let y = cloud(&mut rng, 12, 3, 1.0);
    let shift = [5.0, -3.0, 100.0];
    let mv = |c: &Cloud| -> Cloud { c.iter().map(|p| p.iter().zip(&shift).map(|(a, b)| a + b).collect()).collect() };
    let run = |x: &Cloud, y: &Cloud| {
        let mut s = SinkhornState::new(x, y, 0.3).unwrap();
        for _ in 0..50 {
            s.iterate().unwrap();
        }
        let m = s.u.iter().sum::<f64>() / s.m() as f64;
        (s.u.iter().map(|u| u - m).collect::<Vec<_>>(), s.dual())
    };
    let (a, da) = run(&x, &y);
    let (b, db) = run(&mv(&x), &mv(&y));
    for (p, q) in a.iter().zip(&b) {
        assert!((p - q).abs() < 1e-9);
    }
    assert!((da - db).abs() < 1e-9);
}

#[test]
fn divergence_is_nearly_nonnegative() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..30 {
        let d = rng.gen_range(1..4);
        let (m, n) = (rng.gen_range(1..25), rng.gen_range(1..25));
        let x = cloud(&mut rng, m, d, 2.0);
        let y = cloud(&mut rng, n, d, 2.0);
        assert!(sinkhorn_divergence(&x, &y, 0.5, 500).unwrap() >= -1e-8);
    }
}

#[test]
fn small_eps_divergence_tracks_exact_in_one_dimension() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for _ in 0..3 {
        let xs: Vec<f64> = (0..60).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let ys: Vec<f64> = (0..60).map(|_| 1.0 + 1.5 * rng.sample::<f64, _>(StandardNormal)).collect();
        let (x, y) = (line(&xs), line(&ys));
        let exact = exact_w2(&x, &y).unwrap();
        let div = sinkhorn_divergence(&x, &y, 0.01, 2000).unwrap();
        assert!((div - exact).abs() <= 0.05 * exact, "{} vs {}", div, exact);
    }
}

#[test]
fn exact_matches_permutation_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for n in 1..=6 {
        for _ in 0..20 {
            let d = rng.gen_range(1..4);
            let x = cloud(&mut rng, n, d, 1.0);
            let y = cloud(&mut rng, n, d, 1.0);
            let want = brute_w2(&x, &y);
            assert!((exact_w2(&x, &y).unwrap() - want).abs() < 1e-12);
            assert!((assignment_w2(&x, &y).unwrap() - want).abs() < 1e-12);
        }
    }
}

#[test]
fn sorted_matching_equals_assignment() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..100 {
        let n = rng.gen_range(1..80);
        let xs: Vec<f64> = (0..n).map(|_| rng.gen_range(-5.0..5.0)).collect();
        let ys: Vec<f64> = (0..n).map(|_| rng.gen_range(-5.0..5.0)).collect();
        let a = sorted_w2_1d(&xs, &ys).unwrap();
        let b = assignment_w2(&line(&xs), &line(&ys)).unwrap();
        assert!((a - b).abs() < 1e-12 * (1.0 + a), "{} vs {}", a, b);
        assert!((exact_w2(&line(&xs), &line(&ys)).unwrap() - a).abs() < 1e-15);
    }
    assert!(sorted_w2_1d(&[0.0], &[0.0, 1.0]).is_err());
    assert!(exact_w2(&line(&[0.0]), &line(&[0.0, 1.0])).is_err());
}

#[test]
fn assignment_returns_a_permutation() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for n in [1, 2, 5, 30] {
        let cost: Vec<f64> = (0..n * n).map(|_| rng.gen_range(0.0..10.0)).collect();
        let mut p = solve_assignment(&cost, n);
        p.sort();
        assert_eq!(p, (0..n).collect::<Vec<_>>());
    }
}

#[test]
fn exact_w2_behaves_like_a_squared_metric() {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    for _ in 0..100 {
        let n = rng.gen_range(1..12);
        let d = rng.gen_range(1..4);
        let x = cloud(&mut rng, n, d, 1.0);
        let y = cloud(&mut rng, n, d, 1.0);
        let z = cloud(&mut rng, n, d, 1.0);
        let xy = exact_w2(&x, &y).unwrap();
        assert!((xy - exact_w2(&y, &x).unwrap()).abs() < 1e-12);
        let (a, b, c) = (xy.sqrt(), exact_w2(&y, &z).unwrap().sqrt(), exact_w2(&x, &z).unwrap().sqrt());
        assert!(c <= a + b + 1e-9);
        let mut shuffled = x.clone();
        shuffled.shuffle(&mut rng);
        assert!(exact_w2(&x, &shuffled).unwrap().abs() < 1e-15);
        if x != y {
            assert!(xy > 0.0);
        }
    }
}

#[test]
fn estimators_are_permutation_invariant() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..10 {
        let x = cloud(&mut rng, 25, 2, 1.0);
        let y = cloud(&mut rng, 25, 2, 1.0);
        let mut xs = x.clone();
        let mut ys = y.clone();
        xs.shuffle(&mut rng);
        ys.shuffle(&mut rng);
        assert!((exact_w2(&x, &y).unwrap() - exact_w2(&xs, &ys).unwrap()).abs() < 1e-12);
        assert!((t_eps_k(&x, &y, 0.2, 30).unwrap() - t_eps_k(&xs, &ys, 0.2, 30).unwrap()).abs() < 1e-12);
        assert!((sinkhorn_divergence(&x, &y, 0.2, 30).unwrap() - sinkhorn_divergence(&xs, &ys, 0.2, 30).unwrap()).abs() < 1e-12);
    }
}

#[test]
fn log_domain_survives_adversarial_scales() {
    let corners: Cloud = vec![vec![0.0, 0.0], vec![1e3 / 2f64.sqrt(), 1e3 / 2f64.sqrt()], vec![0.0, 1e-9], vec![500.0, 0.0]];
    let far: Cloud = vec![vec![1e3 / 2f64.sqrt(), 0.0], vec![0.0, 1e3 / 2f64.sqrt()], vec![1e-6, 0.0]];
    for eps in [1e-4, 1e-2, 1.0] {
        let mut s = SinkhornState::new(&corners, &far, eps).unwrap();
        for _ in 0..50 {
            s.iterate().unwrap();
            assert!(s.u.iter().chain(&s.v).all(|x| x.is_finite()));
        }
        assert!(sinkhorn_divergence(&corners, &corners, eps, 20).unwrap().is_finite());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]
    #[test]
    fn potentials_stay_finite(
        pts in prop::collection::vec((-500.0f64..500.0, -500.0f64..500.0), 2..12),
        eps_exp in -4.0f64..1.0,
    ) {
        let eps = 10f64.powf(eps_exp);
        let (a, b) = pts.split_at(pts.len() / 2);
        let x: Cloud = a.iter().map(|&(p, q)| vec![p, q]).collect();
        let y: Cloud = b.iter().map(|&(p, q)| vec![p, q]).collect();
        let mut s = SinkhornState::new(&x, &y, eps).unwrap();
        for _ in 0..10 {
            prop_assert!(s.iterate().is_ok());
        }
    }
}

fn bench(d: usize, beta: f64, grid: Vec<u64>, eps: Option<f64>, k: Option<usize>, reps: usize) -> mixrate::Result<OtReport> {
    compare_estimators(&OtConfig {
        d,
        beta,
        n_grid: grid,
        replications: reps,
        base_seed: 3,
        dgp_x: Dgp::Iid {},
        dgp_y: Dgp::Iid {},
        eps_override: eps,
        k_override: k,
    })
}

#[test]
fn same_law_estimates_shrink_with_n() {
    let r = bench(2, 3.0, vec![16, 32, 64, 128, 256], Some(0.05), Some(100), 8).unwrap();
    for w in r.rows.windows(2) {
        assert!(w[1].exact_mean < w[0].exact_mean, "{:?}", r.rows);
        assert!(w[1].sinkhorn_mean < w[0].sinkhorn_mean, "{:?}", r.rows);
    }
    assert!(r.exact_time_fit.is_some() && r.sinkhorn_time_fit.is_some());
}

#[test]
fn regime_flag_and_schedule() {
    let fast = bench(4, 3.0, vec![16, 32], None, None, 1).unwrap();
    assert_eq!(fast.regime, "fast");
    let s = ot_schedule(3.0, 4, 32).unwrap();
    assert_eq!((fast.rows[1].k as u64, fast.rows[1].eps), (s.k, s.eps));
    let slow = bench(4, 0.5, vec![16, 32], None, None, 1).unwrap();
    assert_eq!(slow.regime, "slow");
    assert!(bench(4, 1.0, vec![16], None, None, 1).is_err());
    assert!(bench(3, 3.0, vec![16], None, None, 1).is_err());
    assert!(bench(3, 3.0, vec![16], Some(0.1), Some(10), 1).is_ok());
    assert!(bench(1, 3.0, vec![16], Some(0.1), Some(10), 1).is_err());
    assert!(bench(4, 3.0, vec![], None, None, 1).is_err());
}

#[test]
fn schedule_is_continuous_across_the_regime_switch() {
    for d in [4usize, 5, 6, 10] {
        let cut = 2.0 / (d as f64 - 2.0);
        let below = ot_schedule(cut * (1.0 - 1e-9), d, 1 << 16).unwrap();
        let above = ot_schedule(cut * (1.0 + 1e-9), d, 1 << 16).unwrap();
        assert!((below.k_exponent - above.k_exponent).abs() < 1e-8);
        assert!((below.eps_exponent - above.eps_exponent).abs() < 1e-8);
    }
}

#[test]
fn sample_cloud_shape_and_determinism() {
    let dgp = Dgp::Renewal { tail_exponent: 0.5, l_max: 100, levels: None };
    let a = sample_cloud(&dgp, 3, 50, 9).unwrap();
    assert_eq!((a.len(), a[0].len()), (50, 3));
    assert_eq!(a, sample_cloud(&dgp, 3, 50, 9).unwrap());
    assert_ne!(a, sample_cloud(&dgp, 3, 50, 10).unwrap());
}
