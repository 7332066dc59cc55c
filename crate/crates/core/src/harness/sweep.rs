use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::{evaluate_scenario, preset_case, scenario_for_case, Scheme};
use crate::fp::FpConfig;
use crate::scenario::ScenarioConfig;
use crate::{Error, Result};

pub const CSV_HEADER: [&str; 10] = [
    "sweep_var",
    "sweep_value",
    "scheme",
    "case",
    "sum_capacity_bps_hz",
    "cap_user_a",
    "cap_user_b",
    "converged",
    "iterations",
    "seed",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepVariable {
    #[default]
    Distance,
    Power,
}

impl SweepVariable {
    pub fn label(self) -> &'static str {
        match self {
            SweepVariable::Distance => "distance",
            SweepVariable::Power => "power",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Spacing {
    #[default]
    Linear,
    Log,
}

/// A preset mode case (1..4) or the scenario exactly as configured.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CaseId {
    Preset(u8),
    #[default]
    Custom,
}

impl CaseId {
    pub fn label(self) -> String {
        match self {
            CaseId::Preset(id) => format!("case{id}"),
            CaseId::Custom => "custom".into(),
        }
    }
}

impl Serialize for CaseId {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            CaseId::Preset(id) => s.serialize_u8(*id),
            CaseId::Custom => s.serialize_str("custom"),
        }
    }
}

impl<'de> Deserialize<'de> for CaseId {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Id(u8),
            Name(String),
        }
        match Raw::deserialize(d)? {
            Raw::Id(id) => Ok(CaseId::Preset(id)),
            Raw::Name(s) if s == "custom" => Ok(CaseId::Custom),
            Raw::Name(s) => Err(serde::de::Error::custom(format!(
                "case_id must be 1..4 or \"custom\", got \"{s}\""
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepSpec {
    pub variable: SweepVariable,
    /// Meters for distance sweeps, watts for power sweeps.
    pub start: f64,
    pub stop: f64,
    pub points: usize,
    pub spacing: Spacing,
    pub schemes: Vec<Scheme>,
    pub case_id: CaseId,
}

impl Default for SweepSpec {
    fn default() -> Self {
        SweepSpec {
            variable: SweepVariable::Distance,
            start: 5.0,
            stop: 50.0,
            points: 10,
            spacing: Spacing::Linear,
            schemes: vec![Scheme::Rs],
            case_id: CaseId::Custom,
        }
    }
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.start.is_finite() && self.start > 0.0) {
            return Err(Error::field("start", format!("must be positive, got {}", self.start)));
        }
        if !(self.stop.is_finite() && self.stop > self.start) {
            return Err(Error::field("stop", format!("must exceed start {}, got {}", self.start, self.stop)));
        }
        if self.points < 2 {
            return Err(Error::field("points", format!("must be at least 2, got {}", self.points)));
        }
        if self.schemes.is_empty() {
            return Err(Error::field("schemes", "at least one scheme is required"));
        }
        for (i, s) in self.schemes.iter().enumerate() {
            if self.schemes[..i].contains(s) {
                return Err(Error::field("schemes", format!("scheme {s} listed twice")));
            }
        }
        if let CaseId::Preset(id) = self.case_id {
            preset_case(id).map_err(|_| Error::field("case_id", format!("must be 1..4, got {id}")))?;
        }
        Ok(())
    }

    /// Sweep points from start to stop inclusive.
    pub fn values(&self) -> Vec<f64> {
        let last = (self.points - 1) as f64;
        (0..self.points)
            .map(|i| {
                if i == 0 {
                    return self.start;
                }
                if i + 1 == self.points {
                    return self.stop;
                }
                let t = i as f64 / last;
                match self.spacing {
                    Spacing::Linear => self.start + t * (self.stop - self.start),
                    Spacing::Log => (self.start.ln() + t * (self.stop.ln() - self.start.ln())).exp(),
                }
            })
            .collect()
    }

    /// The scenario reshaped to the selected preset case, if any.
    pub fn resolve_scenario(&self, scenario: &ScenarioConfig) -> Result<ScenarioConfig> {
        match self.case_id {
            CaseId::Preset(id) => scenario_for_case(scenario, &preset_case(id)?),
            CaseId::Custom => Ok(scenario.clone()),
        }
    }

    fn apply(&self, scenario: &ScenarioConfig, value: f64) -> Result<ScenarioConfig> {
        match self.variable {
            SweepVariable::Distance => scenario.with_distance(value),
            SweepVariable::Power => Ok(scenario.with_power_budget(value)),
        }
    }
}

/// One (sweep point, scheme) result; capacities summed over all pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub sweep_var: SweepVariable,
    pub sweep_value: f64,
    pub scheme: Scheme,
    pub case: String,
    pub sum_capacity: f64,
    pub cap_user_a: f64,
    pub cap_user_b: f64,
    pub converged: bool,
    /// Largest outer-iteration count over the pairs.
    pub iterations: usize,
    pub seed: u64,
}

fn point_rows(
    scenario: &ScenarioConfig,
    sweep: &SweepSpec,
    fp: &FpConfig,
    value: f64,
    case: &str,
) -> Vec<ResultRow> {
    sweep
        .schemes
        .iter()
        .map(|&scheme| {
            let mut row = ResultRow {
                sweep_var: sweep.variable,
                sweep_value: value,
                scheme,
                case: case.to_string(),
                sum_capacity: 0.0,
                cap_user_a: 0.0,
                cap_user_b: 0.0,
                converged: false,
                iterations: 0,
                seed: fp.init_seed,
            };
            let outcome = sweep
                .apply(scenario, value)
                .and_then(|s| evaluate_scenario(&s, scheme, fp));
            if let Ok(out) = outcome {
                row.sum_capacity = out.sum();
                row.cap_user_a = out.user_a();
                row.cap_user_b = out.user_b();
                row.converged = out.converged();
                row.iterations = out.iterations();
            }
            row
        })
        .collect()
}

/// Evaluate every (point, scheme) combination. Points run in parallel;
/// rows come back ordered by point, then by scheme as listed. A point that
/// fails numerically yields zero capacities with `converged = false`.
pub fn run_sweep(scenario: &ScenarioConfig, sweep: &SweepSpec, fp: &FpConfig) -> Result<Vec<ResultRow>> {
    sweep.validate()?;
    fp.validate()?;
    let base = sweep.resolve_scenario(scenario)?;
    base.validate()?;
    // a bad sweep value (e.g. nonpositive distance) is a config error
    for v in [sweep.start, sweep.stop] {
        sweep.apply(&base, v)?.validate()?;
    }
    let case = sweep.case_id.label();
    let values = sweep.values();
    let rows: Vec<Vec<ResultRow>> = values
        .par_iter()
        .map(|&v| point_rows(&base, sweep, fp, v, &case))
        .collect();
    Ok(rows.into_iter().flatten().collect())
}

fn fmt_float(x: f64) -> String {
    format!("{x:.8e}")
}

fn write_rows<W: Write>(rows: &[ResultRow], out: W) -> std::result::Result<(), csv::Error> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    w.write_record(CSV_HEADER)?;
    for r in rows {
        w.write_record([
            r.sweep_var.label().to_string(),
            fmt_float(r.sweep_value),
            r.scheme.label().to_string(),
            r.case.clone(),
            fmt_float(r.sum_capacity),
            fmt_float(r.cap_user_a),
            fmt_float(r.cap_user_b),
            r.converged.to_string(),
            r.iterations.to_string(),
            r.seed.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Write rows as CSV to any writer (e.g. standard output).
pub fn write_csv<W: Write>(rows: &[ResultRow], out: W) -> Result<()> {
    write_rows(rows, out).map_err(|source| Error::Csv {
        path: "<stream>".into(),
        source,
    })
}

/// Write rows to `path`; floats carry 9 significant digits.
pub fn emit_csv(rows: &[ResultRow], path: &Path) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    write_rows(rows, std::io::BufWriter::new(file)).map_err(|source| Error::Csv {
        path: path.to_path_buf(),
        source,
    })
}

/// Parse a file written by [`emit_csv`].
pub fn read_csv(path: &Path) -> Result<Vec<ResultRow>> {
    let csv_err = |source| Error::Csv {
        path: path.to_path_buf(),
        source,
    };
    let bad = |what: &str, v: &str| Error::domain(format!("{}: bad {what} '{v}'", path.display()));
    let mut reader = csv::Reader::from_path(path).map_err(csv_err)?;
    let header = reader.headers().map_err(csv_err)?.clone();
    if header.iter().ne(CSV_HEADER) {
        return Err(Error::domain(format!("{}: unexpected header", path.display())));
    }
    let float = |v: &str| v.parse::<f64>().map_err(|_| bad("number", v));
    let mut rows = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(csv_err)?;
        let f = |i: usize| rec.get(i).unwrap_or_default();
        let sweep_var = match f(0) {
            "distance" => SweepVariable::Distance,
            "power" => SweepVariable::Power,
            v => return Err(bad("sweep variable", v)),
        };
        rows.push(ResultRow {
            sweep_var,
            sweep_value: float(f(1))?,
            scheme: f(2).parse()?,
            case: f(3).to_string(),
            sum_capacity: float(f(4))?,
            cap_user_a: float(f(5))?,
            cap_user_b: float(f(6))?,
            converged: f(7).parse().map_err(|_| bad("flag", f(7)))?,
            iterations: f(8).parse().map_err(|_| bad("count", f(8)))?,
            seed: f(9).parse().map_err(|_| bad("seed", f(9)))?,
        });
    }
    Ok(rows)
}
