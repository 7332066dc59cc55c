//! Experiment layer: default scenario, mode-case presets, whole-scenario
//! scheme evaluation, config files, sweeps and CSV output.

mod config;
mod sweep;

pub use config::{load_scenario, parse_scenario, ConfigFile};
pub use sweep::{emit_csv, read_csv, run_sweep, write_csv, CaseId, ResultRow, Spacing, SweepSpec, SweepVariable};

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::baseline::{evaluate_noma, evaluate_rs, evaluate_sdma, evaluate_tdma, NomaOrder, SchemeOutcome};
use crate::channel::{LinkGeometry, PropagationSpec, UcaSpec, ZetaConvention};
use crate::fp::FpConfig;
use crate::metrics::{ExclusionRule, ModeCase};
use crate::scenario::{PairConfig, PairProblem, ScenarioConfig, TauSource};
use crate::{Error, Result};

pub const DEFAULT_WAVELENGTH: f64 = 0.01;
pub const DEFAULT_DISTANCE: f64 = 10.0;
pub const DEFAULT_NOISE_POWER: f64 = 1e-9;
pub const DEFAULT_POWER_BUDGET: f64 = 1.0;
pub const DEFAULT_TX_ELEMENTS: usize = 3;
pub const DEFAULT_RX_ELEMENTS: usize = 4;

/// Transmit radius `k * lambda` for pair `k` (1-based) and receive radius
/// `i * lambda` for receiver `i` (1-based, two per pair).
fn build_pair(
    k: usize,
    mode: i64,
    tx_count: usize,
    rx_count: usize,
    wavelength: f64,
    geom: LinkGeometry,
) -> Result<PairConfig> {
    Ok(PairConfig {
        pair_index: k - 1,
        oam_mode: mode,
        tx: UcaSpec::uniform(tx_count, k as f64 * wavelength, 0.0)?,
        rx_a: UcaSpec::uniform(rx_count, (2 * k - 1) as f64 * wavelength, 0.0)?,
        rx_b: UcaSpec::uniform(rx_count, (2 * k) as f64 * wavelength, 0.0)?,
        geom_a: geom.clone(),
        geom_b: geom,
    })
}

/// Three pairs on modes 1, 2, 3 with 3-element transmit and 4-element
/// receive arrays, boresight-aligned at 10 m.
pub fn default_scenario() -> ScenarioConfig {
    let geom = LinkGeometry::aligned(DEFAULT_DISTANCE).expect("valid default geometry");
    let pairs = (1..=3)
        .map(|k| build_pair(k, k as i64, DEFAULT_TX_ELEMENTS, DEFAULT_RX_ELEMENTS, DEFAULT_WAVELENGTH, geom.clone()))
        .collect::<Result<Vec<_>>>()
        .expect("valid default arrays");
    ScenarioConfig {
        pairs,
        noise_power: DEFAULT_NOISE_POWER,
        power_budget: DEFAULT_POWER_BUDGET,
        propagation: PropagationSpec::new(DEFAULT_WAVELENGTH, 4.0 * PI, ZetaConvention::default())
            .expect("valid default propagation"),
        tau_source: TauSource::TablePreset,
        tau_sq: vec![4.0; 3],
        exclusion: ExclusionRule::Joint,
    }
}

/// The four mode-combination presets: modes, `N x M` and eigenvalues.
pub fn preset_case(id: u8) -> Result<ModeCase> {
    let (modes, rx, tx, tau): (Vec<i64>, usize, usize, f64) = match id {
        1 => (vec![1, 2], 4, 2, 4.0),
        2 => (vec![1, 2, 3], 5, 3, 5.0),
        3 => (vec![1, 2, 3], 4, 3, 4.0),
        4 => (vec![1, 2, 3, 4], 4, 4, 4.0),
        _ => return Err(Error::domain(format!("unknown case id {id}; expected 1..4"))),
    };
    ModeCase::new(format!("case{id}"), modes, rx, tx, vec![tau; tx.min(rx)])
}

/// Reshape `scenario` to a mode case: one pair per mode, array sizes and
/// eigenvalues from the case, radii from the radius rules. Link geometry
/// of pair `k` is taken from the scenario's pair `k` (or its last pair).
pub fn scenario_for_case(scenario: &ScenarioConfig, case: &ModeCase) -> Result<ScenarioConfig> {
    if scenario.pairs.is_empty() {
        return Err(Error::field("pairs", "at least one pair is required"));
    }
    let wavelength = scenario.propagation.wavelength();
    let pairs = case
        .modes
        .iter()
        .enumerate()
        .map(|(i, &mode)| {
            let template = &scenario.pairs[i.min(scenario.pairs.len() - 1)];
            let mut pair = build_pair(i + 1, mode, case.tx_count, case.rx_count, wavelength, template.geom_a.clone())?;
            pair.geom_b = template.geom_b.clone();
            Ok(pair)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ScenarioConfig {
        pairs,
        tau_sq: case.tau_sq.clone(),
        ..scenario.clone()
    })
}

/// Access scheme selectable in sweeps and on the command line.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    Rs,
    Sdma,
    Noma,
    Tdma,
}

impl Scheme {
    pub const ALL: [Scheme; 4] = [Scheme::Rs, Scheme::Sdma, Scheme::Noma, Scheme::Tdma];

    pub fn label(self) -> &'static str {
        match self {
            Scheme::Rs => "rs",
            Scheme::Sdma => "sdma",
            Scheme::Noma => "noma",
            Scheme::Tdma => "tdma",
        }
    }
}

impl std::str::FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Scheme::ALL
            .into_iter()
            .find(|x| x.label() == s.trim().to_ascii_lowercase())
            .ok_or_else(|| Error::field("schemes", format!("unknown scheme '{s}'; expected rs, sdma, noma or tdma")))
    }
}

impl std::fmt::Display for Scheme {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

/// Seed used for pair `index` of a run seeded with `seed`.
pub fn pair_seed(seed: u64, index: usize) -> u64 {
    seed.wrapping_add(index as u64)
}

/// Optimize one pair under `scheme`.
pub fn evaluate_scheme(problem: &PairProblem, scheme: Scheme, config: &FpConfig) -> Result<SchemeOutcome> {
    match scheme {
        Scheme::Rs => evaluate_rs(problem, config),
        Scheme::Sdma => evaluate_sdma(problem, config),
        Scheme::Noma => evaluate_noma(problem, NomaOrder::default(), config),
        Scheme::Tdma => evaluate_tdma(problem, 0.5, 0.5, config),
    }
}

/// All pairs of a scenario under one scheme.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioOutcome {
    pub scheme: Scheme,
    pub pairs: Vec<SchemeOutcome>,
}

impl ScenarioOutcome {
    pub fn sum(&self) -> f64 {
        self.pairs.iter().map(|p| p.report.sum).sum()
    }

    pub fn user_a(&self) -> f64 {
        self.pairs.iter().map(|p| p.report.user_a).sum()
    }

    pub fn user_b(&self) -> f64 {
        self.pairs.iter().map(|p| p.report.user_b).sum()
    }

    pub fn converged(&self) -> bool {
        self.pairs.iter().all(SchemeOutcome::converged)
    }

    pub fn iterations(&self) -> usize {
        self.pairs.iter().map(SchemeOutcome::iterations).max().unwrap_or(0)
    }
}

/// Every pair's problem, in pair order.
pub fn pair_problems(scenario: &ScenarioConfig) -> Result<Vec<PairProblem>> {
    scenario.validate()?;
    scenario.pairs.iter().map(|p| PairProblem::new(p, scenario)).collect()
}

/// Optimize every pair of `scenario` under `scheme`. Pairs are served by
/// distinct OAM modes and are evaluated independently.
pub fn evaluate_scenario(scenario: &ScenarioConfig, scheme: Scheme, config: &FpConfig) -> Result<ScenarioOutcome> {
    let problems = pair_problems(scenario)?;
    let pairs = problems
        .iter()
        .enumerate()
        .map(|(i, p)| evaluate_scheme(p, scheme, &config.with_seed(pair_seed(config.init_seed, i))))
        .collect::<Result<Vec<_>>>()?;
    Ok(ScenarioOutcome { scheme, pairs })
}
