//! Fractional-programming precoder optimization with the quadratic
//! transform.
//!
//! Each outer iteration freezes the auxiliaries at `y = a / b` for the
//! current precoder, then runs projected gradient ascent on the surrogate,
//! which is concave in the precoder once `y` is fixed. Because the surrogate
//! is tight at the refreshed auxiliaries and never exceeds the true
//! objective, the recorded surrogate values form a nondecreasing sequence.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::metrics::{evaluate_problem, RateReport, SplitPolicy, Target};
use crate::program::{Layout, RatioProgram};
use crate::scenario::PairProblem;
use crate::signal::{total_power, RsPrecoder};
use crate::{CMatrix, Complex64, Error, Result};

/// Number of step halvings tried before an ascent step is abandoned.
pub const MAX_STEP_HALVINGS: usize = 20;

const NEWTON_HALVINGS: usize = 4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FpConfig {
    /// Stop once the surrogate gains no more than this between outer
    /// iterations (bits/s/Hz).
    pub convergence_threshold: f64,
    pub max_outer_iterations: usize,
    pub inner_step_count: usize,
    /// Initial ascent step length as a fraction of `sqrt(P_T)`.
    pub inner_step_size: f64,
    pub init_seed: u64,
    /// Fraction of the budget used by the random initial precoder.
    pub init_scale: f64,
    /// Independent random starts; the best final objective is kept.
    pub starts: usize,
    pub split_policy: SplitPolicy,
}

impl Default for FpConfig {
    fn default() -> Self {
        FpConfig {
            convergence_threshold: 1e-4,
            max_outer_iterations: 500,
            inner_step_count: 20,
            inner_step_size: 0.5,
            init_seed: 0,
            init_scale: 1.0,
            starts: 4,
            split_policy: SplitPolicy::Equal,
        }
    }
}

impl FpConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.convergence_threshold.is_finite() && self.convergence_threshold > 0.0) {
            return Err(Error::field("convergence_threshold", "must be positive"));
        }
        if self.max_outer_iterations == 0 {
            return Err(Error::field("max_outer_iterations", "must be at least 1"));
        }
        if self.inner_step_count == 0 {
            return Err(Error::field("inner_step_count", "must be at least 1"));
        }
        if !(self.inner_step_size.is_finite() && self.inner_step_size > 0.0) {
            return Err(Error::field("inner_step_size", "must be positive"));
        }
        if self.starts == 0 {
            return Err(Error::field("starts", "must be at least 1"));
        }
        if !(self.init_scale > 0.0 && self.init_scale <= 1.0) {
            return Err(Error::field("init_scale", "must lie in (0, 1]"));
        }
        if let SplitPolicy::Ratio(w) = self.split_policy {
            if !(0.0..=1.0).contains(&w) {
                return Err(Error::field("split_policy", "ratio weight must lie in [0, 1]"));
            }
        }
        Ok(())
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        FpConfig {
            init_seed: seed,
            ..self.clone()
        }
    }
}

/// Auxiliary variables, one `M x N` grid per ratio family.
///
/// For rate splitting the families are, in order: private a, private b,
/// common seen by a, common seen by b.
#[derive(Debug, Clone, PartialEq)]
pub struct AuxiliarySet {
    pub families: Vec<CMatrix>,
}

impl AuxiliarySet {
    pub fn y_private_a(&self) -> Option<&CMatrix> {
        self.families.first()
    }

    pub fn y_private_b(&self) -> Option<&CMatrix> {
        self.families.get(1)
    }

    pub fn y_common_a(&self) -> Option<&CMatrix> {
        self.families.get(2)
    }

    pub fn y_common_b(&self) -> Option<&CMatrix> {
        self.families.get(3)
    }

    pub fn is_finite(&self) -> bool {
        self.families
            .iter()
            .flat_map(|f| f.iter())
            .all(|z| z.re.is_finite() && z.im.is_finite())
    }
}

/// One outer iteration of the optimizer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TraceRecord {
    pub iteration: usize,
    pub surrogate: f64,
    pub power: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FpState {
    pub precoder: RsPrecoder,
    pub auxiliaries: AuxiliarySet,
    pub objective_trace: Vec<f64>,
    pub power_trace: Vec<f64>,
    pub converged: bool,
    pub iterations_used: usize,
}

impl FpState {
    pub fn records(&self) -> impl Iterator<Item = TraceRecord> + '_ {
        self.objective_trace
            .iter()
            .zip(&self.power_trace)
            .enumerate()
            .map(|(i, (s, p))| TraceRecord {
                iteration: i + 1,
                surrogate: *s,
                power: *p,
            })
    }
}

fn rs_program(problem: &PairProblem) -> RatioProgram {
    RatioProgram::new(problem, Layout::RateSplitting)
}

fn check_index(problem: &PairProblem, target: Target, m: usize, n: usize) -> Result<()> {
    let rows = match target {
        Target::A => problem.rx_a(),
        Target::B => problem.rx_b(),
    };
    if m >= problem.tx_count() || n >= rows {
        return Err(Error::domain(format!(
            "ratio index ({m}, {n}) outside {}x{rows}",
            problem.tx_count()
        )));
    }
    Ok(())
}

fn ratio_terms(problem: &PairProblem, precoder: &RsPrecoder, family: usize, target: Target, m: usize, n: usize) -> Result<(Complex64, f64)> {
    problem.check_precoder(precoder)?;
    check_index(problem, target, m, n)?;
    let (a, b) = rs_program(problem).ratio_parts(family, precoder);
    Ok((a[(m, n)], b[(m, n)]))
}

/// Numerator amplitude `a` and interference-plus-noise `b` of the private
/// ratio of `target` at `(m, n)`; `|a|^2 / b` is that private SINR.
pub fn aux_terms_private(
    problem: &PairProblem,
    precoder: &RsPrecoder,
    target: Target,
    m: usize,
    n: usize,
) -> Result<(Complex64, f64)> {
    let family = match target {
        Target::A => 0,
        Target::B => 1,
    };
    ratio_terms(problem, precoder, family, target, m, n)
}

/// As [`aux_terms_private`] for the common message decoded by `target`.
pub fn aux_terms_common(
    problem: &PairProblem,
    precoder: &RsPrecoder,
    target: Target,
    m: usize,
    n: usize,
) -> Result<(Complex64, f64)> {
    let family = match target {
        Target::A => 2,
        Target::B => 3,
    };
    ratio_terms(problem, precoder, family, target, m, n)
}

/// Tight auxiliaries `y = a / b` at `precoder`.
pub fn update_auxiliaries(problem: &PairProblem, precoder: &RsPrecoder) -> Result<AuxiliarySet> {
    problem.check_precoder(precoder)?;
    Ok(AuxiliarySet {
        families: rs_program(problem).auxiliaries(precoder),
    })
}

fn check_aux(program: &RatioProgram, aux: &AuxiliarySet) -> Result<()> {
    if aux.families.len() != program.family_count() {
        return Err(Error::Dimension(format!(
            "expected {} auxiliary grids, got {}",
            program.family_count(),
            aux.families.len()
        )));
    }
    Ok(())
}

/// Rate-splitting sum capacity with every ratio replaced by its quadratic
/// transform at the given auxiliaries. `-inf` when some log argument is
/// nonpositive.
pub fn surrogate_objective(problem: &PairProblem, precoder: &RsPrecoder, aux: &AuxiliarySet) -> Result<f64> {
    problem.check_precoder(precoder)?;
    let program = rs_program(problem);
    check_aux(&program, aux)?;
    Ok(program.surrogate(precoder, &aux.families))
}

/// Analytic surrogate gradient, `d/dRe + j d/dIm` per precoder entry.
pub fn surrogate_gradient(problem: &PairProblem, precoder: &RsPrecoder, aux: &AuxiliarySet) -> Result<RsPrecoder> {
    problem.check_precoder(precoder)?;
    let program = rs_program(problem);
    check_aux(&program, aux)?;
    program
        .surrogate_gradient(precoder, &aux.families)
        .ok_or_else(|| Error::Numerical {
            context: "surrogate gradient".into(),
            detail: "surrogate undefined at this precoder".into(),
        })
}

/// Projected gradient ascent on the surrogate with the auxiliaries fixed.
pub fn inner_step(
    problem: &PairProblem,
    precoder: &RsPrecoder,
    aux: &AuxiliarySet,
    config: &FpConfig,
) -> Result<RsPrecoder> {
    problem.check_precoder(precoder)?;
    config.validate()?;
    let program = rs_program(problem);
    check_aux(&program, aux)?;
    ascend(&program, precoder, &aux.families, config)
}

fn first_non_finite(g: &RsPrecoder) -> Option<String> {
    for b in crate::signal::PrecoderBlock::ALL {
        let blk = g.block(b);
        for m in 0..blk.nrows() {
            for n in 0..blk.ncols() {
                let z = blk[(m, n)];
                if !(z.re.is_finite() && z.im.is_finite()) {
                    return Some(format!("{b:?}[{m}, {n}] = {z}"));
                }
            }
        }
    }
    None
}

pub(crate) fn ascend(
    program: &RatioProgram,
    start: &RsPrecoder,
    aux: &[CMatrix],
    config: &FpConfig,
) -> Result<RsPrecoder> {
    let mut p = program.project(&program.restrict(start));
    let radius = program.budget.sqrt();
    let mut step = config.inner_step_size;

    for _ in 0..config.inner_step_count {
        let local = program.surrogate_with_gradient(&p, aux).ok_or_else(|| Error::Numerical {
            context: "inner step".into(),
            detail: "surrogate undefined at the current precoder".into(),
        })?;
        if let Some(entry) = first_non_finite(&local.grad) {
            return Err(Error::Numerical {
                context: "inner step gradient".into(),
                detail: format!("non-finite entry {entry}"),
            });
        }
        let gnorm = local.grad.norm_sq().sqrt();
        if gnorm == 0.0 {
            break;
        }
        let current = local.value;

        // Newton-like direction from the exact diagonal curvature of the
        // frozen-slope model, then the plain normalized gradient.
        let newton = scaled_direction(&local.grad, &local.weight, gnorm, radius);
        let tries = [
            (newton, 1.0, NEWTON_HALVINGS, true),
            (local.grad.scaled(Complex64::new(radius / gnorm, 0.0)), step, MAX_STEP_HALVINGS, false),
        ];
        let mut moved = false;
        for (dir, first, halvings, is_newton) in tries {
            let mut t = first;
            for _ in 0..=halvings {
                let candidate = program.project(&p.axpy(t, &dir));
                let value = program.surrogate(&candidate, aux);
                if value.is_finite() && value > current {
                    p = candidate;
                    moved = true;
                    if !is_newton {
                        step = (2.0 * t).min(config.inner_step_size);
                    }
                    break;
                }
                t *= 0.5;
            }
            if moved {
                break;
            }
        }
        if !moved {
            break;
        }
    }
    Ok(p)
}

/// `grad / (2 c)` per entry, with `c` floored so that no entry moves
/// further than the budget radius.
fn scaled_direction(grad: &RsPrecoder, weight: &[nalgebra::DMatrix<f64>], gnorm: f64, radius: f64) -> RsPrecoder {
    let floor = gnorm / (2.0 * radius);
    let mut dir = grad.clone();
    for (blk, w) in weight.iter().enumerate() {
        for (z, c) in dir.block_at_mut(blk).iter_mut().zip(w.iter()) {
            *z /= 2.0 * c.max(floor);
        }
    }
    dir
}

/// Random circularly-symmetric Gaussian precoder on the active blocks,
/// scaled to `init_scale * P_T`. Each start index draws from its own
/// stream of the seeded generator.
pub(crate) fn random_initial(program: &RatioProgram, config: &FpConfig, start: usize) -> RsPrecoder {
    let mut rng = ChaCha8Rng::seed_from_u64(config.init_seed);
    rng.set_stream(start as u64);
    let mut p = program.zero_precoder();
    let scale = std::f64::consts::FRAC_1_SQRT_2;
    for blk in 0..3 {
        if !program.is_active(blk) {
            continue;
        }
        for z in p.block_at_mut(blk).iter_mut() {
            let re: f64 = StandardNormal.sample(&mut rng);
            let im: f64 = StandardNormal.sample(&mut rng);
            *z = Complex64::new(re * scale, im * scale);
        }
    }
    let power = total_power(&p);
    if power > 0.0 {
        let target = config.init_scale * program.budget;
        p = p.scaled(Complex64::new((target / power).sqrt(), 0.0));
    }
    program.project(&p)
}

/// Outer FP loop on an arbitrary ratio program.
pub(crate) fn run_program(program: &RatioProgram, initial: &RsPrecoder, config: &FpConfig) -> Result<FpState> {
    config.validate()?;
    let mut p = program.project(&program.restrict(initial));
    let mut previous = program.objective(&p);
    if !previous.is_finite() {
        return Err(Error::Numerical {
            context: "initialization".into(),
            detail: format!("objective {previous} at the initial precoder"),
        });
    }
    let mut objective_trace = Vec::new();
    let mut power_trace = Vec::new();
    let mut converged = false;

    for _ in 0..config.max_outer_iterations {
        let aux = program.auxiliaries(&p);
        p = ascend(program, &p, &aux, config)?;
        let value = program.surrogate(&p, &aux);
        objective_trace.push(value);
        power_trace.push(total_power(&p));
        if value - previous <= config.convergence_threshold {
            converged = true;
            break;
        }
        previous = value;
    }

    let iterations_used = objective_trace.len();
    Ok(FpState {
        auxiliaries: AuxiliarySet {
            families: program.auxiliaries(&p),
        },
        precoder: p,
        objective_trace,
        power_trace,
        converged,
        iterations_used,
    })
}

/// Run the outer loop from `config.starts` seeded random points and keep
/// the run with the largest final objective (earliest on ties).
pub(crate) fn run_multistart(program: &RatioProgram, config: &FpConfig) -> Result<FpState> {
    config.validate()?;
    let mut best: Option<(f64, FpState)> = None;
    for start in 0..config.starts {
        let state = run_program(program, &random_initial(program, config, start), config)?;
        let value = program.objective(&state.precoder);
        if best.as_ref().is_none_or(|(b, _)| value > *b) {
            best = Some((value, state));
        }
    }
    Ok(best.expect("at least one start").1)
}

/// Maximize the pair's rate-splitting sum capacity from seeded random
/// starts.
pub fn optimize(problem: &PairProblem, config: &FpConfig) -> Result<(FpState, RateReport)> {
    let state = run_multistart(&rs_program(problem), config)?;
    let report = evaluate_problem(problem, &state.precoder, config.split_policy)?;
    Ok((state, report))
}

/// Maximize from a caller-supplied starting precoder.
pub fn optimize_from(problem: &PairProblem, initial: &RsPrecoder, config: &FpConfig) -> Result<(FpState, RateReport)> {
    problem.check_precoder(initial)?;
    let program = rs_program(problem);
    optimize_program(problem, &program, initial, config)
}

fn optimize_program(
    problem: &PairProblem,
    program: &RatioProgram,
    initial: &RsPrecoder,
    config: &FpConfig,
) -> Result<(FpState, RateReport)> {
    let state = run_program(program, initial, config)?;
    let report = evaluate_problem(problem, &state.precoder, config.split_policy)?;
    Ok((state, report))
}
