//! Reference access schemes evaluated with the rate-splitting capacity
//! model: SDMA (private streams only), two-user power-domain NOMA with SIC,
//! and TDMA with each user served alone.

use serde::{Deserialize, Serialize};

use crate::fp::{optimize, run_multistart, run_program, FpConfig, FpState};
use crate::metrics::{evaluate_problem, RateReport, Target};
use crate::program::{Layout, RatioProgram};
use crate::scenario::PairProblem;
use crate::signal::RsPrecoder;
use crate::{Error, Result};

/// Which NOMA user performs SIC, i.e. is decoded last.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NomaOrder {
    /// The user with the larger mean channel gain; user a on ties.
    #[default]
    StrongerMean,
    StrongA,
    StrongB,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum BaselineKind {
    Sdma,
    Noma { order: NomaOrder },
    Tdma { fraction_a: f64, fraction_b: f64 },
}

impl BaselineKind {
    pub fn noma() -> Self {
        BaselineKind::Noma {
            order: NomaOrder::default(),
        }
    }

    pub fn tdma_equal() -> Self {
        BaselineKind::Tdma {
            fraction_a: 0.5,
            fraction_b: 0.5,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let BaselineKind::Tdma { fraction_a, fraction_b } = *self {
            check_fractions(fraction_a, fraction_b)?;
        }
        Ok(())
    }
}

fn check_fractions(fa: f64, fb: f64) -> Result<()> {
    if !(fa.is_finite() && fb.is_finite()) || fa < 0.0 || fb < 0.0 {
        return Err(Error::domain(format!("time fractions ({fa}, {fb}) must be nonnegative")));
    }
    if (fa + fb - 1.0).abs() > 1e-12 {
        return Err(Error::domain(format!("time fractions ({fa}, {fb}) must sum to 1")));
    }
    Ok(())
}

/// Result of one scheme on one pair. TDMA holds one optimizer state per
/// served user; the other schemes hold exactly one.
#[derive(Debug, Clone, PartialEq)]
pub struct SchemeOutcome {
    pub report: RateReport,
    pub states: Vec<FpState>,
}

impl SchemeOutcome {
    pub fn converged(&self) -> bool {
        self.states.iter().all(|s| s.converged)
    }

    pub fn iterations(&self) -> usize {
        self.states.iter().map(|s| s.iterations_used).max().unwrap_or(0)
    }
}

fn solve(problem: &PairProblem, layout: Layout, config: &FpConfig) -> Result<(RatioProgram, FpState)> {
    let program = RatioProgram::new(problem, layout);
    let state = run_multistart(&program, config)?;
    Ok((program, state))
}

fn private_report(program: &RatioProgram, precoder: &RsPrecoder) -> RateReport {
    let caps = program.family_capacities(precoder);
    RateReport::private_only(caps[0], caps[1])
}

/// Private streams only; each treats the other as interference.
pub fn evaluate_sdma(problem: &PairProblem, config: &FpConfig) -> Result<SchemeOutcome> {
    let (program, state) = solve(problem, Layout::Sdma, config)?;
    Ok(SchemeOutcome {
        report: private_report(&program, &state.precoder),
        states: vec![state],
    })
}

/// Rate splitting with SDMA as a warm start.
///
/// Runs the random-start optimizer, then reruns the rate-splitting loop
/// from the SDMA optimum (a feasible rate-splitting precoder with an empty
/// common block) and keeps the better of the two. The loop never lowers
/// the objective from its starting point, so the result is never below the
/// SDMA value found with the same config.
pub fn evaluate_rs(problem: &PairProblem, config: &FpConfig) -> Result<SchemeOutcome> {
    let (random_state, random_report) = optimize(problem, config)?;
    let sdma = evaluate_sdma(problem, config)?;
    let program = RatioProgram::new(problem, Layout::RateSplitting);
    let warm_state = run_program(&program, &sdma.states[0].precoder, config)?;
    let warm_report = evaluate_problem(problem, &warm_state.precoder, config.split_policy)?;
    let (state, report) = if warm_report.sum > random_report.sum {
        (warm_state, warm_report)
    } else {
        (random_state, random_report)
    };
    Ok(SchemeOutcome {
        report,
        states: vec![state],
    })
}

/// Mean `|h|^2` over the channel grid.
fn mean_gain(h: &crate::channel::ChannelMatrix) -> f64 {
    let e = h.entries();
    e.iter().map(|z| z.norm_sqr()).sum::<f64>() / e.len() as f64
}

/// The user that cancels the other's stream under `order`.
pub fn strong_user(problem: &PairProblem, order: NomaOrder) -> Target {
    match order {
        NomaOrder::StrongA => Target::A,
        NomaOrder::StrongB => Target::B,
        NomaOrder::StrongerMean => {
            if mean_gain(&problem.channels.b) > mean_gain(&problem.channels.a) {
                Target::B
            } else {
                Target::A
            }
        }
    }
}

/// NOMA capacities of a fixed precoder; the common block is ignored.
pub fn noma_report(problem: &PairProblem, precoder: &RsPrecoder, strong: Target) -> Result<RateReport> {
    problem.check_precoder(precoder)?;
    let program = RatioProgram::new(problem, Layout::Noma { strong });
    Ok(private_report(&program, &program.restrict(precoder)))
}

pub fn evaluate_noma(problem: &PairProblem, order: NomaOrder, config: &FpConfig) -> Result<SchemeOutcome> {
    let strong = strong_user(problem, order);
    let (program, state) = solve(problem, Layout::Noma { strong }, config)?;
    Ok(SchemeOutcome {
        report: private_report(&program, &state.precoder),
        states: vec![state],
    })
}

/// Each user transmits alone for its time fraction with the full budget.
pub fn evaluate_tdma(problem: &PairProblem, fraction_a: f64, fraction_b: f64, config: &FpConfig) -> Result<SchemeOutcome> {
    check_fractions(fraction_a, fraction_b)?;
    let mut states = Vec::new();
    let mut caps = [0.0; 2];
    for (i, (target, f)) in [(Target::A, fraction_a), (Target::B, fraction_b)].into_iter().enumerate() {
        if f == 0.0 {
            continue;
        }
        let (program, state) = solve(problem, Layout::SingleUser(target), config)?;
        caps[i] = f * program.objective(&state.precoder);
        states.push(state);
    }
    Ok(SchemeOutcome {
        report: RateReport::private_only(caps[0], caps[1]),
        states,
    })
}

pub fn evaluate_baseline(problem: &PairProblem, kind: BaselineKind, config: &FpConfig) -> Result<SchemeOutcome> {
    match kind {
        BaselineKind::Sdma => evaluate_sdma(problem, config),
        BaselineKind::Noma { order } => evaluate_noma(problem, order, config),
        BaselineKind::Tdma { fraction_a, fraction_b } => evaluate_tdma(problem, fraction_a, fraction_b, config),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::ChannelMatrix;
    use crate::metrics::ExclusionRule;
    use crate::scenario::PairChannels;
    use crate::{CMatrix, Complex64};
    use approx::assert_abs_diff_eq;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    fn scalar_problem(ha: f64, hb: f64) -> PairProblem {
        PairProblem::from_channels(
            PairChannels {
                a: ChannelMatrix::from_rows(&[vec![c(ha)]]).unwrap(),
                b: ChannelMatrix::from_rows(&[vec![c(hb)]]).unwrap(),
            },
            vec![1.0],
            vec![1.0],
            0.1,
            1.0,
            ExclusionRule::Joint,
        )
        .unwrap()
    }

    fn zero_problem() -> PairProblem {
        let z = ChannelMatrix::from_entries(CMatrix::zeros(2, 2)).unwrap();
        PairProblem::from_channels(
            PairChannels { a: z.clone(), b: z },
            vec![1.0],
            vec![1.0],
            0.1,
            1.0,
            ExclusionRule::Joint,
        )
        .unwrap()
    }

    #[test]
    fn zero_channels_give_zero() {
        let p = zero_problem();
        let cfg = FpConfig::default();
        assert_eq!(evaluate_sdma(&p, &cfg).unwrap().report.sum, 0.0);
        assert_eq!(evaluate_noma(&p, NomaOrder::default(), &cfg).unwrap().report.sum, 0.0);
        assert_eq!(evaluate_tdma(&p, 0.5, 0.5, &cfg).unwrap().report.sum, 0.0);
    }

    #[test]
    fn tdma_toy_matches_scalar_formula() {
        let p = scalar_problem(1.0, 0.5);
        let out = evaluate_tdma(&p, 0.5, 0.5, &FpConfig::default()).unwrap();
        assert_abs_diff_eq!(out.report.private_a, 0.5 * 11f64.log2(), epsilon = 1e-9);
        assert_abs_diff_eq!(out.report.private_b, 0.5 * 3.5f64.log2(), epsilon = 1e-9);
        assert_abs_diff_eq!(out.report.sum, 2.633393270347451, epsilon = 1e-9);
    }

    #[test]
    fn tdma_single_fraction_and_linearity() {
        let p = scalar_problem(1.0, 0.5);
        let cfg = FpConfig::default();
        let only_a = evaluate_tdma(&p, 1.0, 0.0, &cfg).unwrap();
        assert_abs_diff_eq!(only_a.report.sum, 11f64.log2(), epsilon = 1e-9);
        assert_eq!(only_a.report.private_b, 0.0);
        assert_eq!(only_a.states.len(), 1);
        let ca = 11f64.log2();
        let cb = 3.5f64.log2();
        for f in [0.1, 0.3, 0.7] {
            let r = evaluate_tdma(&p, f, 1.0 - f, &cfg).unwrap().report;
            assert_abs_diff_eq!(r.sum, f * ca + (1.0 - f) * cb, epsilon = 1e-9);
        }
    }

    #[test]
    fn tdma_rejects_bad_fractions() {
        let p = scalar_problem(1.0, 0.5);
        let cfg = FpConfig::default();
        assert!(matches!(evaluate_tdma(&p, 0.6, 0.6, &cfg), Err(Error::Domain(_))));
        assert!(evaluate_tdma(&p, -0.5, 1.5, &cfg).is_err());
        assert!(BaselineKind::Tdma { fraction_a: 0.2, fraction_b: 0.2 }.validate().is_err());
        assert!(BaselineKind::tdma_equal().validate().is_ok());
    }

    #[test]
    fn identical_channels_make_tdma_halves() {
        let p = scalar_problem(0.8, 0.8);
        let r = evaluate_tdma(&p, 0.5, 0.5, &FpConfig::default()).unwrap().report;
        assert_abs_diff_eq!(r.private_a, r.private_b, epsilon = 1e-9);
        assert_abs_diff_eq!(r.private_a, 0.5 * (1.0 + 0.64 / 0.1f64).log2(), epsilon = 1e-9);
    }

    #[test]
    fn noma_strong_user_ignores_weak_stream() {
        let p = scalar_problem(1.0, 0.5);
        let strong = strong_user(&p, NomaOrder::StrongerMean);
        assert_eq!(strong, Target::A);
        let mut pre = RsPrecoder::zeros(1, 1, 1);
        pre.private_a[(0, 0)] = c(0.6);
        pre.private_b[(0, 0)] = c(0.3);
        let before = noma_report(&p, &pre, strong).unwrap();
        pre.private_b[(0, 0)] = c(0.7);
        let after = noma_report(&p, &pre, strong).unwrap();
        assert_eq!(before.private_a, after.private_a);
        assert!(after.private_b > before.private_b);
        assert_abs_diff_eq!(before.private_a, (1.0 + 0.36 / 0.1f64).log2(), epsilon = 1e-12);
        assert_abs_diff_eq!(before.private_b, (1.0 + 0.25 * 0.09 / (0.25 * 0.36 + 0.1f64)).log2(), epsilon = 1e-12);
    }

    #[test]
    fn noma_symmetric_sum_is_order_free() {
        let p = scalar_problem(0.7, 0.7);
        let mut pre = RsPrecoder::zeros(1, 1, 1);
        pre.private_a[(0, 0)] = c(0.5f64.sqrt());
        pre.private_b[(0, 0)] = c(0.5f64.sqrt());
        let a = noma_report(&p, &pre, Target::A).unwrap();
        let b = noma_report(&p, &pre, Target::B).unwrap();
        assert_abs_diff_eq!(a.sum, b.sum, epsilon = 1e-12);
        assert_abs_diff_eq!(a.private_a, b.private_b, epsilon = 1e-12);
    }

    #[test]
    fn noma_toy_matches_power_split_sweep() {
        let p = scalar_problem(1.0, 0.5);
        // 1-D sweep over the fraction of power given to the strong user
        let best = (0..=1000)
            .map(|i| {
                let f = i as f64 / 1000.0;
                let ra = (1.0 + f / 0.1f64).log2();
                let rb = (1.0 + 0.25 * (1.0 - f) / (0.25 * f + 0.1)).log2();
                ra + rb
            })
            .fold(f64::MIN, f64::max);
        let got = evaluate_noma(&p, NomaOrder::default(), &FpConfig::default()).unwrap();
        assert!((got.report.sum - best).abs() <= 0.02 * best, "{} vs {best}", got.report.sum);
        assert!(got.converged());
    }

    #[test]
    fn rs_never_below_sdma() {
        for (ha, hb) in [(1.0, 0.5), (0.3, 0.9), (1.0, 1.0)] {
            let p = scalar_problem(ha, hb);
            for seed in 0..3 {
                let cfg = FpConfig { starts: 1, ..FpConfig::default().with_seed(seed) };
                let rs = evaluate_rs(&p, &cfg).unwrap().report.sum;
                let sdma = evaluate_sdma(&p, &cfg).unwrap().report.sum;
                assert!(rs >= sdma - 1e-6, "{rs} < {sdma}");
            }
        }
    }

    #[test]
    fn sdma_toy_matches_restricted_grid() {
        let p = scalar_problem(1.0, 0.5);
        let got = evaluate_sdma(&p, &FpConfig::default()).unwrap();
        let oracle = 11f64.log2();
        assert!((got.report.sum - oracle).abs() <= 0.02 * oracle);
        assert_eq!(got.report.common_pair, 0.0);
        assert!(got.states[0].precoder.common.iter().all(|z| *z == c(0.0)));
    }
}
