//! SINRs, capacities and rate reports for one rate-splitting user pair.
//!
//! Every ratio uses the scalar coefficient of its own `(m, n)` link: the
//! numerator is `|h_{m,n} p_{m,n}|^2` and every interfering precoder entry
//! reaches the receiver through the same `h_{m,n}`. The common message is
//! decoded first and cancelled, so private ratios carry no common-precoder
//! interference.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::channel::ChannelMatrix;
use crate::scenario::{PairConfig, PairProblem, ScenarioConfig};
use crate::signal::RsPrecoder;
use crate::{CMatrix, Error, Result};

/// Which user of the pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Target {
    A,
    B,
}

impl Target {
    pub fn other(self) -> Target {
        match self {
            Target::A => Target::B,
            Target::B => Target::A,
        }
    }
}

/// Which same-stream entries are excluded from a ratio's interference.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExclusionRule {
    /// Only the serving entry `(m, n)` itself is excluded.
    #[default]
    Joint,
    /// Every entry sharing the transmit index or the receive index is
    /// excluded; only `m' != m && n' != n` interferes.
    Independent,
}

impl ExclusionRule {
    /// True when entry `(mi, ni)` interferes with the ratio at `(m, n)`.
    #[inline]
    pub fn interferes(self, m: usize, n: usize, mi: usize, ni: usize) -> bool {
        match self {
            ExclusionRule::Joint => (mi, ni) != (m, n),
            ExclusionRule::Independent => mi != m && ni != n,
        }
    }
}

/// Mode-combination case: OAM modes, array sizes and Gram eigenvalues.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeCase {
    pub name: String,
    pub modes: Vec<i64>,
    pub rx_count: usize,
    pub tx_count: usize,
    pub tau_sq: Vec<f64>,
}

impl ModeCase {
    pub fn new(
        name: impl Into<String>,
        modes: Vec<i64>,
        rx_count: usize,
        tx_count: usize,
        tau_sq: Vec<f64>,
    ) -> Result<Self> {
        if rx_count == 0 || tx_count == 0 {
            return Err(Error::domain("mode case needs nonzero array sizes"));
        }
        if tau_sq.is_empty() || tau_sq.len() > rx_count.min(tx_count) {
            return Err(Error::domain(format!(
                "{} eigenvalues exceed the rank bound min({rx_count}, {tx_count})",
                tau_sq.len()
            )));
        }
        if tau_sq.iter().any(|t| !(t.is_finite() && *t > 0.0)) {
            return Err(Error::domain("eigenvalues must be positive"));
        }
        Ok(ModeCase {
            name: name.into(),
            modes,
            rx_count,
            tx_count,
            tau_sq,
        })
    }
}

/// Per-`(m, n)` SINRs, stored `M x N`.
#[derive(Debug, Clone, PartialEq)]
pub struct SinrGrid {
    pub values: DMatrix<f64>,
}

impl SinrGrid {
    pub fn tx_count(&self) -> usize {
        self.values.nrows()
    }

    pub fn rx_count(&self) -> usize {
        self.values.ncols()
    }
}

fn private_block(precoder: &RsPrecoder, target: Target) -> &CMatrix {
    match target {
        Target::A => &precoder.private_a,
        Target::B => &precoder.private_b,
    }
}

fn check_dims(channel: &ChannelMatrix, precoder: &RsPrecoder, target: Target) -> Result<()> {
    let own = private_block(precoder, target);
    if channel.tx_count() != precoder.tx_count()
        || channel.rx_count() != own.ncols()
        || channel.rx_count() > precoder.common.ncols()
    {
        return Err(Error::Dimension(format!(
            "channel {}x{} does not match precoder {}x{} for user {target:?}",
            channel.rx_count(),
            channel.tx_count(),
            own.nrows(),
            own.ncols()
        )));
    }
    Ok(())
}

fn power_sum(block: &CMatrix) -> f64 {
    block.iter().map(|z| z.norm_sqr()).sum()
}

/// Power of `block` entries that interfere with the ratio at `(m, n)`.
fn excluded_power(block: &CMatrix, m: usize, n: usize, rule: ExclusionRule) -> f64 {
    let mut total = 0.0;
    for mi in 0..block.nrows() {
        for ni in 0..block.ncols() {
            if rule.interferes(m, n, mi, ni) {
                total += block[(mi, ni)].norm_sqr();
            }
        }
    }
    total
}

/// Private-message SINR grid of `target`, given that user's channel.
pub fn sinr_private(
    channel: &ChannelMatrix,
    precoder: &RsPrecoder,
    target: Target,
    noise_power: f64,
    exclusion: ExclusionRule,
) -> Result<SinrGrid> {
    check_dims(channel, precoder, target)?;
    let own = private_block(precoder, target);
    let other_power = power_sum(private_block(precoder, target.other()));
    let values = DMatrix::from_fn(own.nrows(), own.ncols(), |m, n| {
        let gain = channel.coefficient(m, n).norm_sqr();
        let signal = gain * own[(m, n)].norm_sqr();
        let interference = gain * (other_power + excluded_power(own, m, n, exclusion));
        signal / (interference + noise_power)
    });
    Ok(SinrGrid { values })
}

/// Common-message SINR grid seen by `target`.
pub fn sinr_common(
    channel: &ChannelMatrix,
    precoder: &RsPrecoder,
    target: Target,
    noise_power: f64,
    exclusion: ExclusionRule,
) -> Result<SinrGrid> {
    check_dims(channel, precoder, target)?;
    let private_power = power_sum(&precoder.private_a) + power_sum(&precoder.private_b);
    let common = &precoder.common;
    let values = DMatrix::from_fn(precoder.tx_count(), channel.rx_count(), |m, n| {
        let gain = channel.coefficient(m, n).norm_sqr();
        let signal = gain * common[(m, n)].norm_sqr();
        let interference = gain * (private_power + excluded_power(common, m, n, exclusion));
        signal / (interference + noise_power)
    });
    Ok(SinrGrid { values })
}

/// `sum_{m,n} sum_q log2(1 + gamma_{m,n} * tau_q / M)` with `M` the grid's
/// transmit dimension.
pub fn grid_capacity(grid: &SinrGrid, tau_sq: &[f64]) -> f64 {
    let m = grid.tx_count() as f64;
    grid.values
        .iter()
        .map(|g| tau_sq.iter().map(|t| (g * t / m).ln_1p()).sum::<f64>())
        .sum::<f64>()
        / std::f64::consts::LN_2
}

/// Capacity of a grid under a mode case's eigenvalues.
pub fn capacity_from_grid(grid: &SinrGrid, case: &ModeCase) -> Result<f64> {
    if grid.tx_count() != case.tx_count || grid.rx_count() != case.rx_count {
        return Err(Error::Dimension(format!(
            "grid {}x{} does not match case {} ({}x{})",
            grid.tx_count(),
            grid.rx_count(),
            case.name,
            case.tx_count,
            case.rx_count
        )));
    }
    Ok(grid_capacity(grid, &case.tau_sq))
}

/// The pair's common rate is limited by the weaker decoder.
pub fn common_pair_capacity(common_a: f64, common_b: f64) -> f64 {
    common_a.min(common_b)
}

/// Allocation of the common rate between the two users.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitPolicy {
    #[default]
    Equal,
    AllToA,
    AllToB,
    /// Fraction `w` to user a, the remainder to user b.
    Ratio(f64),
}

pub fn split_common(common_pair: f64, policy: SplitPolicy) -> Result<(f64, f64)> {
    if !(common_pair.is_finite() && common_pair >= 0.0) {
        return Err(Error::domain(format!("common capacity {common_pair} is invalid")));
    }
    let a = match policy {
        SplitPolicy::Equal => common_pair / 2.0,
        SplitPolicy::AllToA => common_pair,
        SplitPolicy::AllToB => 0.0,
        SplitPolicy::Ratio(w) => {
            if !(0.0..=1.0).contains(&w) {
                return Err(Error::domain(format!("split weight {w} outside [0, 1]")));
            }
            w * common_pair
        }
    };
    Ok((a, common_pair - a))
}

/// Capacities of one pair in bits/s/Hz.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateReport {
    pub private_a: f64,
    pub private_b: f64,
    pub common_a: f64,
    pub common_b: f64,
    pub common_pair: f64,
    pub split_a: f64,
    pub split_b: f64,
    pub sum: f64,
    pub user_a: f64,
    pub user_b: f64,
}

impl RateReport {
    pub fn from_capacities(
        private_a: f64,
        private_b: f64,
        common_a: f64,
        common_b: f64,
        policy: SplitPolicy,
    ) -> Result<Self> {
        let common_pair = common_pair_capacity(common_a, common_b);
        let (split_a, split_b) = split_common(common_pair, policy)?;
        Ok(RateReport {
            private_a,
            private_b,
            common_a,
            common_b,
            common_pair,
            split_a,
            split_b,
            sum: private_a + private_b + split_a + split_b,
            user_a: private_a + split_a,
            user_b: private_b + split_b,
        })
    }

    /// Report for a scheme without a common layer.
    pub fn private_only(private_a: f64, private_b: f64) -> Self {
        RateReport {
            private_a,
            private_b,
            common_a: 0.0,
            common_b: 0.0,
            common_pair: 0.0,
            split_a: 0.0,
            split_b: 0.0,
            sum: private_a + private_b,
            user_a: private_a,
            user_b: private_b,
        }
    }

    pub fn zero() -> Self {
        Self::private_only(0.0, 0.0)
    }
}

/// Evaluate a precoder on a prepared pair problem.
pub fn evaluate_problem(
    problem: &PairProblem,
    precoder: &RsPrecoder,
    policy: SplitPolicy,
) -> Result<RateReport> {
    problem.check_precoder(precoder)?;
    let (ha, hb) = (&problem.channels.a, &problem.channels.b);
    let (noise, ex) = (problem.noise_power, problem.exclusion);
    let private_a = grid_capacity(&sinr_private(ha, precoder, Target::A, noise, ex)?, &problem.tau_a);
    let private_b = grid_capacity(&sinr_private(hb, precoder, Target::B, noise, ex)?, &problem.tau_b);
    let common_a = grid_capacity(&sinr_common(ha, precoder, Target::A, noise, ex)?, &problem.tau_a);
    let common_b = grid_capacity(&sinr_common(hb, precoder, Target::B, noise, ex)?, &problem.tau_b);
    RateReport::from_capacities(private_a, private_b, common_a, common_b, policy)
}

/// Evaluate `precoder` for `pair` under the scenario's link constants.
pub fn evaluate_pair(
    pair: &PairConfig,
    precoder: &RsPrecoder,
    scenario: &ScenarioConfig,
    policy: SplitPolicy,
) -> Result<RateReport> {
    let problem = PairProblem::new(pair, scenario)?;
    evaluate_problem(&problem, precoder, policy)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::PairChannels;
    use crate::Complex64;
    use approx::assert_abs_diff_eq;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    fn scalar_channel(h: f64) -> ChannelMatrix {
        ChannelMatrix::from_rows(&[vec![c(h)]]).unwrap()
    }

    fn toy_precoder(pa: f64, pb: f64, pc: f64) -> RsPrecoder {
        let mut p = RsPrecoder::zeros(1, 1, 1);
        p.private_a[(0, 0)] = c(pa);
        p.private_b[(0, 0)] = c(pb);
        p.common[(0, 0)] = c(pc);
        p
    }

    #[test]
    fn private_sinr_scalar_examples() {
        let h = scalar_channel(1.0);
        let g = sinr_private(&h, &toy_precoder(1.0, 0.5, 0.0), Target::A, 0.1, ExclusionRule::Joint).unwrap();
        assert_abs_diff_eq!(g.values[(0, 0)], 1.0 / 0.35, epsilon = 1e-12);
        // interference-free reduction
        let g = sinr_private(&h, &toy_precoder(2.0, 0.0, 5.0), Target::A, 0.1, ExclusionRule::Joint).unwrap();
        assert_abs_diff_eq!(g.values[(0, 0)], 4.0 / 0.1, epsilon = 1e-12);
        let g = sinr_private(&h, &toy_precoder(0.0, 1.0, 1.0), Target::A, 0.1, ExclusionRule::Joint).unwrap();
        assert_eq!(g.values[(0, 0)], 0.0);
    }

    #[test]
    fn common_sinr_scalar_examples() {
        let h = scalar_channel(1.0);
        let g = sinr_common(&h, &toy_precoder(0.5, 0.5, 1.0), Target::A, 0.1, ExclusionRule::Joint).unwrap();
        assert_abs_diff_eq!(g.values[(0, 0)], 1.0 / 0.6, epsilon = 1e-12);
        let g = sinr_common(&h, &toy_precoder(0.0, 0.0, 3.0), Target::B, 0.5, ExclusionRule::Joint).unwrap();
        assert_abs_diff_eq!(g.values[(0, 0)], 9.0 / 0.5, epsilon = 1e-12);
        let g = sinr_common(&h, &toy_precoder(1.0, 1.0, 0.0), Target::A, 0.1, ExclusionRule::Joint).unwrap();
        assert_eq!(g.values[(0, 0)], 0.0);
    }

    #[test]
    fn sinr_dimension_mismatch() {
        let h = ChannelMatrix::from_rows(&[vec![c(1.0), c(1.0)]]).unwrap();
        let p = RsPrecoder::zeros(3, 1, 1);
        assert!(matches!(
            sinr_private(&h, &p, Target::A, 0.1, ExclusionRule::Joint),
            Err(Error::Dimension(_))
        ));
        assert!(sinr_common(&h, &p, Target::B, 0.1, ExclusionRule::Joint).is_err());
    }

    #[test]
    fn exclusion_rules_differ_on_larger_grids() {
        let h = ChannelMatrix::from_rows(&[vec![c(1.0), c(1.0)], vec![c(1.0), c(1.0)]]).unwrap();
        let mut p = RsPrecoder::zeros(2, 2, 2);
        p.private_a.fill(c(1.0));
        let joint = sinr_private(&h, &p, Target::A, 1.0, ExclusionRule::Joint).unwrap();
        let indep = sinr_private(&h, &p, Target::A, 1.0, ExclusionRule::Independent).unwrap();
        assert_abs_diff_eq!(joint.values[(0, 0)], 1.0 / 4.0, epsilon = 1e-12);
        assert_abs_diff_eq!(indep.values[(0, 0)], 1.0 / 2.0, epsilon = 1e-12);
    }

    #[test]
    fn capacity_examples() {
        let case = ModeCase::new("t", vec![1], 2, 2, vec![2.0, 2.0]).unwrap();
        let zero = SinrGrid { values: DMatrix::zeros(2, 2) };
        assert_eq!(capacity_from_grid(&zero, &case).unwrap(), 0.0);
        let ones = SinrGrid { values: DMatrix::from_element(2, 2, 1.0) };
        assert_abs_diff_eq!(capacity_from_grid(&ones, &case).unwrap(), 8.0, epsilon = 1e-12);

        let case3 = ModeCase::new("t3", vec![1], 1, 3, vec![1.0]).unwrap();
        let mut v = DMatrix::zeros(3, 1);
        v[(1, 0)] = 3.0;
        assert_abs_diff_eq!(capacity_from_grid(&SinrGrid { values: v.clone() }, &case3).unwrap(), 1.0, epsilon = 1e-12);
        let case3b = ModeCase::new("t3", vec![1], 1, 3, vec![3.0]).unwrap();
        assert_abs_diff_eq!(capacity_from_grid(&SinrGrid { values: v }, &case3b).unwrap(), 2.0, epsilon = 1e-12);

        assert!(capacity_from_grid(&ones, &case3).is_err());
    }

    #[test]
    fn common_pair_and_split_examples() {
        assert_eq!(common_pair_capacity(3.0, 2.0), 2.0);
        assert_eq!(common_pair_capacity(0.0, 5.0), 0.0);
        assert_eq!(common_pair_capacity(1.25, 1.25), 1.25);
        assert_eq!(split_common(4.0, SplitPolicy::Equal).unwrap(), (2.0, 2.0));
        assert_eq!(split_common(4.0, SplitPolicy::AllToA).unwrap(), (4.0, 0.0));
        assert_eq!(split_common(4.0, SplitPolicy::AllToB).unwrap(), (0.0, 4.0));
        assert_eq!(split_common(3.0, SplitPolicy::Ratio(1.0 / 3.0)).unwrap(), (1.0, 2.0));
        assert!(split_common(3.0, SplitPolicy::Ratio(1.5)).is_err());
        assert!(split_common(-1.0, SplitPolicy::Equal).is_err());
    }

    #[test]
    fn mode_case_rank_bound() {
        assert!(ModeCase::new("x", vec![1, 2, 3], 4, 2, vec![4.0, 4.0, 4.0]).is_err());
        assert!(ModeCase::new("x", vec![1, 2], 4, 2, vec![4.0, -1.0]).is_err());
    }

    fn toy_problem(hb: f64) -> PairProblem {
        PairProblem::from_channels(
            PairChannels { a: scalar_channel(1.0), b: scalar_channel(hb) },
            vec![1.0],
            vec![1.0],
            0.1,
            1.0,
            ExclusionRule::Joint,
        )
        .unwrap()
    }

    #[test]
    fn evaluate_zero_and_no_common() {
        let problem = toy_problem(0.5);
        let zero = evaluate_problem(&problem, &toy_precoder(0.0, 0.0, 0.0), SplitPolicy::Equal).unwrap();
        assert_eq!(zero, RateReport::zero());
        let r = evaluate_problem(&problem, &toy_precoder(0.6, 0.3, 0.0), SplitPolicy::Equal).unwrap();
        assert_eq!(r.common_pair, 0.0);
        assert_abs_diff_eq!(r.sum, r.private_a + r.private_b, epsilon = 1e-12);
    }

    #[test]
    fn evaluate_toy_by_hand() {
        let problem = toy_problem(0.5);
        let (pa, pb, pc) = (0.6f64, 0.5f64, 0.4f64);
        let r = evaluate_problem(&problem, &toy_precoder(pa, pb, pc), SplitPolicy::Equal).unwrap();
        let (ga, gb) = (1.0, 0.25);
        let g_pa = ga * pa * pa / (ga * pb * pb + 0.1);
        let g_pb = gb * pb * pb / (gb * pa * pa + 0.1);
        let g_ca = ga * pc * pc / (ga * (pa * pa + pb * pb) + 0.1);
        let g_cb = gb * pc * pc / (gb * (pa * pa + pb * pb) + 0.1);
        let (cpa, cpb) = ((1.0 + g_pa).log2(), (1.0 + g_pb).log2());
        let cc = (1.0f64 + g_ca).log2().min((1.0 + g_cb).log2());
        assert_abs_diff_eq!(r.private_a, cpa, epsilon = 1e-12);
        assert_abs_diff_eq!(r.private_b, cpb, epsilon = 1e-12);
        assert_abs_diff_eq!(r.common_pair, cc, epsilon = 1e-12);
        assert_abs_diff_eq!(r.split_a, cc / 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(r.sum, cpa + cpb + cc, epsilon = 1e-12);
        assert_abs_diff_eq!(r.user_a, cpa + cc / 2.0, epsilon = 1e-12);
    }
}
