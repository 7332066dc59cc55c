//! Pair and scenario configuration, and the per-pair evaluation problem
//! derived from them.

use serde::{Deserialize, Serialize};

use crate::channel::{channel_matrix, gram_eigenvalues, ChannelMatrix, LinkGeometry, PropagationSpec, UcaSpec};
use crate::metrics::ExclusionRule;
use crate::signal::RsPrecoder;
use crate::{Error, Result};

/// One transmit UCA serving a user pair on a single OAM mode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PairConfig {
    pub pair_index: usize,
    pub oam_mode: i64,
    pub tx: UcaSpec,
    pub rx_a: UcaSpec,
    pub rx_b: UcaSpec,
    pub geom_a: LinkGeometry,
    pub geom_b: LinkGeometry,
}

impl PairConfig {
    pub fn validate(&self) -> Result<()> {
        if self.rx_a == self.rx_b && self.geom_a == self.geom_b {
            return Err(Error::field(
                "pairs",
                format!("pair {} has two identical receivers", self.pair_index),
            ));
        }
        Ok(())
    }

    pub fn channels(&self, propagation: &PropagationSpec) -> PairChannels {
        PairChannels {
            a: channel_matrix(&self.tx, &self.rx_a, &self.geom_a, propagation),
            b: channel_matrix(&self.tx, &self.rx_b, &self.geom_b, propagation),
        }
    }
}

/// Source of the Gram eigenvalues feeding the capacity sums.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TauSource {
    /// Use `ScenarioConfig::tau_sq` for both users.
    #[default]
    TablePreset,
    /// Nonzero spectrum of each user's phase-normalized channel.
    ComputedFromGram,
}

/// Full downlink scenario: all pairs plus shared link constants.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioConfig {
    pub pairs: Vec<PairConfig>,
    pub noise_power: f64,
    pub power_budget: f64,
    pub propagation: PropagationSpec,
    pub tau_source: TauSource,
    pub tau_sq: Vec<f64>,
    pub exclusion: ExclusionRule,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        crate::harness::default_scenario()
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.noise_power.is_finite() && self.noise_power > 0.0) {
            return Err(Error::field(
                "noise_power",
                format!("must be positive, got {}", self.noise_power),
            ));
        }
        if !(self.power_budget.is_finite() && self.power_budget > 0.0) {
            return Err(Error::field(
                "power_budget",
                format!("must be positive, got {}", self.power_budget),
            ));
        }
        if self.pairs.is_empty() {
            return Err(Error::field("pairs", "at least one pair is required"));
        }
        for (i, p) in self.pairs.iter().enumerate() {
            p.validate()?;
            if self.pairs[..i].iter().any(|q| q.oam_mode == p.oam_mode) {
                return Err(Error::field(
                    "pairs",
                    format!("OAM mode {} used by more than one pair", p.oam_mode),
                ));
            }
        }
        if self.tau_source == TauSource::TablePreset {
            if self.tau_sq.is_empty() {
                return Err(Error::field("tau_sq", "preset eigenvalues are empty"));
            }
            if let Some(t) = self.tau_sq.iter().find(|t| !(t.is_finite() && **t > 0.0)) {
                return Err(Error::field("tau_sq", format!("eigenvalue {t} is not positive")));
            }
        }
        Ok(())
    }

    pub fn modes(&self) -> Vec<i64> {
        self.pairs.iter().map(|p| p.oam_mode).collect()
    }

    /// Set the link distance of every receiver.
    pub fn with_distance(&self, distance: f64) -> Result<Self> {
        let mut out = self.clone();
        for p in &mut out.pairs {
            p.geom_a = p.geom_a.with_distance(distance)?;
            p.geom_b = p.geom_b.with_distance(distance)?;
        }
        Ok(out)
    }

    pub fn with_power_budget(&self, power_budget: f64) -> Self {
        ScenarioConfig {
            power_budget,
            ..self.clone()
        }
    }
}

/// Channels from one transmit UCA to both receivers of its pair.
#[derive(Debug, Clone, PartialEq)]
pub struct PairChannels {
    pub a: ChannelMatrix,
    pub b: ChannelMatrix,
}

/// Everything needed to evaluate or optimize one pair's precoders.
#[derive(Debug, Clone, PartialEq)]
pub struct PairProblem {
    pub channels: PairChannels,
    pub tau_a: Vec<f64>,
    pub tau_b: Vec<f64>,
    pub noise_power: f64,
    pub power_budget: f64,
    pub exclusion: ExclusionRule,
}

impl PairProblem {
    /// Build the problem for `pair`, resolving eigenvalues per the
    /// scenario's tau source.
    pub fn new(pair: &PairConfig, scenario: &ScenarioConfig) -> Result<Self> {
        let channels = pair.channels(&scenario.propagation);
        let (tau_a, tau_b) = match scenario.tau_source {
            TauSource::TablePreset => (scenario.tau_sq.clone(), scenario.tau_sq.clone()),
            TauSource::ComputedFromGram => (
                computed_tau(&channels.a)?,
                computed_tau(&channels.b)?,
            ),
        };
        Self::from_channels(
            channels,
            tau_a,
            tau_b,
            scenario.noise_power,
            scenario.power_budget,
            scenario.exclusion,
        )
    }

    pub fn from_channels(
        channels: PairChannels,
        tau_a: Vec<f64>,
        tau_b: Vec<f64>,
        noise_power: f64,
        power_budget: f64,
        exclusion: ExclusionRule,
    ) -> Result<Self> {
        if channels.a.tx_count() != channels.b.tx_count() {
            return Err(Error::Dimension(
                "both receivers must see the same transmit array".into(),
            ));
        }
        if !(noise_power.is_finite() && noise_power > 0.0) {
            return Err(Error::field("noise_power", "must be positive"));
        }
        if !(power_budget.is_finite() && power_budget > 0.0) {
            return Err(Error::field("power_budget", "must be positive"));
        }
        for (tau, h, who) in [(&tau_a, &channels.a, "a"), (&tau_b, &channels.b, "b")] {
            let rank = h.rx_count().min(h.tx_count());
            if tau.is_empty() || tau.len() > rank {
                return Err(Error::Dimension(format!(
                    "user {who}: {} eigenvalues for a rank-{rank} channel",
                    tau.len()
                )));
            }
            if tau.iter().any(|t| !(t.is_finite() && *t > 0.0)) {
                return Err(Error::field("tau_sq", "eigenvalues must be positive"));
            }
        }
        Ok(PairProblem {
            channels,
            tau_a,
            tau_b,
            noise_power,
            power_budget,
            exclusion,
        })
    }

    pub fn tx_count(&self) -> usize {
        self.channels.a.tx_count()
    }

    pub fn rx_a(&self) -> usize {
        self.channels.a.rx_count()
    }

    pub fn rx_b(&self) -> usize {
        self.channels.b.rx_count()
    }

    pub fn zero_precoder(&self) -> RsPrecoder {
        RsPrecoder::zeros(self.tx_count(), self.rx_a(), self.rx_b())
    }

    pub(crate) fn check_precoder(&self, p: &RsPrecoder) -> Result<()> {
        let want = self.zero_precoder();
        for b in crate::signal::PrecoderBlock::ALL {
            if p.block(b).shape() != want.block(b).shape() {
                return Err(Error::Dimension(format!(
                    "{b:?} precoder is {:?}, expected {:?}",
                    p.block(b).shape(),
                    want.block(b).shape()
                )));
            }
        }
        Ok(())
    }
}

/// Nonzero part of the phase-normalized Gram spectrum, capped at the rank
/// bound.
fn computed_tau(channel: &ChannelMatrix) -> Result<Vec<f64>> {
    let eig = gram_eigenvalues(channel, true)?;
    let rank = channel.rx_count().min(channel.tx_count());
    let top = eig.first().copied().unwrap_or(0.0);
    Ok(eig
        .into_iter()
        .take(rank)
        .filter(|v| *v > 1e-12 * top.max(1.0))
        .collect())
}
