//! Shared fixtures and brute-force reference evaluators for the
//! integration tests. Everything here recomputes quantities from their
//! defining sums without touching the crate's evaluation code.
#![allow(dead_code)]

use oamrs::channel::ChannelMatrix;
use oamrs::metrics::{ExclusionRule, Target};
use oamrs::scenario::{PairChannels, PairProblem};
use oamrs::signal::{total_power, RsPrecoder};
use oamrs::{CMatrix, Complex64};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

pub fn toy_problem() -> PairProblem {
    PairProblem::from_channels(
        PairChannels {
            a: ChannelMatrix::from_rows(&[vec![c(1.0)]]).unwrap(),
            b: ChannelMatrix::from_rows(&[vec![c(0.5)]]).unwrap(),
        },
        vec![1.0],
        vec![1.0],
        0.1,
        1.0,
        ExclusionRule::Joint,
    )
    .unwrap()
}

/// Sum capacity of the toy instance for power fractions `(xa, xb, xc)`.
pub fn toy_sum(xa: f64, xb: f64, xc: f64) -> f64 {
    let (ga, gb, s) = (1.0, 0.25, 0.1);
    let pa = (ga * xa / (ga * xb + s) + 1.0).log2();
    let pb = (gb * xb / (gb * xa + s) + 1.0).log2();
    let ca = (ga * xc / (ga * (xa + xb) + s) + 1.0).log2();
    let cb = (gb * xc / (gb * (xa + xb) + s) + 1.0).log2();
    pa + pb + ca.min(cb)
}

/// Exhaustive search over power fractions in steps of 0.01 on the full
/// budget; `sdma_only` pins the common fraction to zero.
pub fn toy_grid_optimum(sdma_only: bool) -> f64 {
    let mut best = f64::MIN;
    for i in 0..=100 {
        for j in 0..=(100 - i) {
            let (xa, xb) = (i as f64 / 100.0, j as f64 / 100.0);
            let xc = (1.0 - xa - xb).max(0.0);
            if sdma_only && xc > 1e-12 {
                continue;
            }
            best = best.max(toy_sum(xa, xb, xc));
        }
    }
    best
}

pub fn cn(rng: &mut ChaCha8Rng) -> Complex64 {
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

pub fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> CMatrix {
    CMatrix::from_fn(rows, cols, |_, _| cn(rng))
}

/// Small random pair problem with `M, N <= max_dim`.
pub fn random_problem(rng: &mut ChaCha8Rng, max_dim: usize, rule: ExclusionRule) -> PairProblem {
    let m = rng.random_range(1..=max_dim);
    let na = rng.random_range(1..=max_dim);
    let nb = rng.random_range(1..=max_dim);
    let tau = |rng: &mut ChaCha8Rng, n: usize| {
        let q = rng.random_range(1..=m.min(n));
        (0..q).map(|_| rng.random_range(0.5..4.0)).collect::<Vec<f64>>()
    };
    let ta = tau(rng, na);
    let tb = tau(rng, nb);
    PairProblem::from_channels(
        PairChannels {
            a: ChannelMatrix::from_entries(random_matrix(rng, na, m)).unwrap(),
            b: ChannelMatrix::from_entries(random_matrix(rng, nb, m)).unwrap(),
        },
        ta,
        tb,
        rng.random_range(0.05..1.0),
        rng.random_range(0.5..3.0),
        rule,
    )
    .unwrap()
}

/// Random precoder using `fraction` of the problem's budget.
pub fn random_precoder(rng: &mut ChaCha8Rng, problem: &PairProblem, fraction: f64) -> RsPrecoder {
    let m = problem.tx_count();
    let nc = problem.rx_a().max(problem.rx_b());
    let p = RsPrecoder::from_parts(
        random_matrix(rng, m, problem.rx_a()),
        random_matrix(rng, m, problem.rx_b()),
        random_matrix(rng, m, nc),
    )
    .unwrap();
    let scale = (fraction * problem.power_budget / total_power(&p)).sqrt();
    p.scaled(c(scale))
}

fn excluded(rule: ExclusionRule, m: usize, n: usize, mi: usize, ni: usize) -> bool {
    match rule {
        ExclusionRule::Joint => !(mi == m && ni == n),
        ExclusionRule::Independent => mi != m && ni != n,
    }
}

fn block_power(b: &CMatrix) -> f64 {
    b.iter().map(|z| z.norm_sqr()).sum()
}

fn excluded_power(b: &CMatrix, rule: ExclusionRule, m: usize, n: usize) -> f64 {
    let mut s = 0.0;
    for mi in 0..b.nrows() {
        for ni in 0..b.ncols() {
            if excluded(rule, m, n, mi, ni) {
                s += b[(mi, ni)].norm_sqr();
            }
        }
    }
    s
}

/// Direct evaluation of one private SINR from its definition.
pub fn private_sinr(problem: &PairProblem, p: &RsPrecoder, target: Target, m: usize, n: usize) -> f64 {
    let (h, own, other) = match target {
        Target::A => (&problem.channels.a, &p.private_a, &p.private_b),
        Target::B => (&problem.channels.b, &p.private_b, &p.private_a),
    };
    let g = h.entries()[(n, m)].norm_sqr();
    let interference = block_power(other) + excluded_power(own, problem.exclusion, m, n);
    g * own[(m, n)].norm_sqr() / (g * interference + problem.noise_power)
}

/// Direct evaluation of one common SINR from its definition.
pub fn common_sinr(problem: &PairProblem, p: &RsPrecoder, target: Target, m: usize, n: usize) -> f64 {
    let h = match target {
        Target::A => &problem.channels.a,
        Target::B => &problem.channels.b,
    };
    let g = h.entries()[(n, m)].norm_sqr();
    let interference =
        block_power(&p.private_a) + block_power(&p.private_b) + excluded_power(&p.common, problem.exclusion, m, n);
    g * p.common[(m, n)].norm_sqr() / (g * interference + problem.noise_power)
}

fn log_sum(gamma: f64, tau: &[f64], m: usize) -> f64 {
    tau.iter().map(|t| (1.0 + gamma * t / m as f64).log2()).sum()
}

/// True rate-splitting sum capacity from the definitions.
pub fn true_sum(problem: &PairProblem, p: &RsPrecoder) -> f64 {
    let m = problem.tx_count();
    let mut private = 0.0;
    let mut common = [0.0; 2];
    for (i, (target, rows, tau)) in [
        (Target::A, problem.rx_a(), &problem.tau_a),
        (Target::B, problem.rx_b(), &problem.tau_b),
    ]
    .into_iter()
    .enumerate()
    {
        for mi in 0..m {
            for n in 0..rows {
                private += log_sum(private_sinr(problem, p, target, mi, n), tau, m);
                common[i] += log_sum(common_sinr(problem, p, target, mi, n), tau, m);
            }
        }
    }
    private + common[0].min(common[1])
}

/// Whether the two common branches are too close for a finite-difference
/// probe to stay on one side of the min.
pub fn common_branches_close(problem: &PairProblem, p: &RsPrecoder, aux: &oamrs::fp::AuxiliarySet, gap: f64) -> bool {
    use oamrs::fp::aux_terms_common;
    let m = problem.tx_count();
    let mut v = [0.0; 2];
    for (i, (target, rows, tau, y)) in [
        (Target::A, problem.rx_a(), &problem.tau_a, aux.y_common_a().unwrap()),
        (Target::B, problem.rx_b(), &problem.tau_b, aux.y_common_b().unwrap()),
    ]
    .into_iter()
    .enumerate()
    {
        for mi in 0..m {
            for n in 0..rows {
                let (a, b) = aux_terms_common(problem, p, target, mi, n).unwrap();
                let yy = y[(mi, n)];
                let q = 2.0 * (yy.conj() * a).re - yy.norm_sqr() * b;
                v[i] += log_sum(q, tau, m);
            }
        }
    }
    (v[0] - v[1]).abs() < gap
}
