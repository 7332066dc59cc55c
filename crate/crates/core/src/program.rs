//! Sum-of-log-ratio programs over the three precoder blocks.
//!
//! Every access scheme is a set of ratio families. A family covers one
//! receiver's `M x N` grid: its ratio at `(m, n)` has numerator
//! `|h_{m,n} p_{m,n}|^2` on one precoder block and an interference sum over
//! whole blocks (optionally minus the entries excluded around `(m, n)`).
//! The objective adds the capacities of the "sum" families and the minimum
//! of the "min" families.
//!
//! The quadratic transform replaces each ratio `|a|^2 / b` by
//! `q(y) = 2 Re{conj(y) a} - |y|^2 b`, which is concave in the precoder for
//! fixed `y` and equals the ratio at `y = a / b`.

use std::f64::consts::LN_2;

use crate::channel::ChannelMatrix;
use crate::metrics::ExclusionRule;
use crate::scenario::PairProblem;
use crate::signal::{project_to_budget, RsPrecoder};
use crate::{CMatrix, Complex64};

const BLOCKS: usize = 3;
const PRIVATE_A: usize = 0;
const PRIVATE_B: usize = 1;
const COMMON: usize = 2;

#[derive(Debug, Clone, Copy)]
pub(crate) struct Interference {
    pub block: usize,
    /// `None`: the whole block interferes.
    pub exclude: Option<ExclusionRule>,
}

#[derive(Debug, Clone)]
pub(crate) struct Family {
    /// `|h|^2` and `h` per `(m, n)`, stored `M x N`.
    coeff: CMatrix,
    block: usize,
    interference: Vec<Interference>,
    tau: Vec<f64>,
}

impl Family {
    fn new(channel: &ChannelMatrix, block: usize, interference: Vec<Interference>, tau: &[f64]) -> Self {
        let coeff = CMatrix::from_fn(channel.tx_count(), channel.rx_count(), |m, n| channel.coefficient(m, n));
        Family {
            coeff,
            block,
            interference,
            tau: tau.to_vec(),
        }
    }

    fn shape(&self) -> (usize, usize) {
        (self.coeff.nrows(), self.coeff.ncols())
    }

    fn tx_scale(&self) -> f64 {
        self.coeff.nrows() as f64
    }

    /// `dT/dq` and `T(q)` for `T(q) = sum_q log2(1 + q tau/M)`; `None` when
    /// any log argument is nonpositive.
    fn log_term(&self, q: f64) -> Option<(f64, f64)> {
        let m = self.tx_scale();
        let mut product = 1.0;
        let mut slope = 0.0;
        for t in &self.tau {
            let c = t / m;
            let arg = 1.0 + q * c;
            if !(arg > 0.0) {
                return None;
            }
            product *= arg;
            slope += c / arg;
        }
        Some((product.ln() / LN_2, slope / LN_2))
    }
}

/// Block power statistics used to evaluate interference sums in O(1).
struct BlockStats {
    total: f64,
    rows: Vec<f64>,
    cols: Vec<f64>,
}

impl BlockStats {
    fn new(block: &CMatrix) -> Self {
        let mut rows = vec![0.0; block.nrows()];
        let mut cols = vec![0.0; block.ncols()];
        let mut total = 0.0;
        for m in 0..block.nrows() {
            for n in 0..block.ncols() {
                let p = block[(m, n)].norm_sqr();
                rows[m] += p;
                cols[n] += p;
                total += p;
            }
        }
        BlockStats { total, rows, cols }
    }
}

#[derive(Debug, Clone)]
pub(crate) struct RatioProgram {
    families: Vec<Family>,
    sum_families: Vec<usize>,
    min_families: Vec<usize>,
    active: [bool; BLOCKS],
    noise: f64,
    pub budget: f64,
    template: RsPrecoder,
}

/// Which scheme a program encodes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Layout {
    RateSplitting,
    /// Two private streams treating each other as interference.
    Sdma,
    /// Power-domain NOMA; the strong user cancels the weak user's stream.
    Noma { strong: crate::metrics::Target },
    /// One user served alone on its private block.
    SingleUser(crate::metrics::Target),
}

impl RatioProgram {
    pub fn new(problem: &PairProblem, layout: Layout) -> Self {
        use crate::metrics::Target;
        let ex = problem.exclusion;
        let own = |block| Interference { block, exclude: Some(ex) };
        let all = |block| Interference { block, exclude: None };
        let (ha, hb) = (&problem.channels.a, &problem.channels.b);
        let (ta, tb) = (&problem.tau_a[..], &problem.tau_b[..]);

        let mut families = Vec::new();
        let mut sum_families = Vec::new();
        let mut min_families = Vec::new();
        let mut active = [true, true, false];
        match layout {
            Layout::RateSplitting => {
                families.push(Family::new(ha, PRIVATE_A, vec![all(PRIVATE_B), own(PRIVATE_A)], ta));
                families.push(Family::new(hb, PRIVATE_B, vec![all(PRIVATE_A), own(PRIVATE_B)], tb));
                let common_interf = vec![all(PRIVATE_A), all(PRIVATE_B), own(COMMON)];
                families.push(Family::new(ha, COMMON, common_interf.clone(), ta));
                families.push(Family::new(hb, COMMON, common_interf, tb));
                sum_families.extend([0, 1]);
                min_families.extend([2, 3]);
                active[COMMON] = true;
            }
            Layout::Sdma => {
                families.push(Family::new(ha, PRIVATE_A, vec![all(PRIVATE_B), own(PRIVATE_A)], ta));
                families.push(Family::new(hb, PRIVATE_B, vec![all(PRIVATE_A), own(PRIVATE_B)], tb));
                sum_families.extend([0, 1]);
            }
            Layout::Noma { strong } => {
                let (a_interf, b_interf) = match strong {
                    Target::A => (vec![own(PRIVATE_A)], vec![all(PRIVATE_A), own(PRIVATE_B)]),
                    Target::B => (vec![all(PRIVATE_B), own(PRIVATE_A)], vec![own(PRIVATE_B)]),
                };
                families.push(Family::new(ha, PRIVATE_A, a_interf, ta));
                families.push(Family::new(hb, PRIVATE_B, b_interf, tb));
                sum_families.extend([0, 1]);
            }
            Layout::SingleUser(target) => {
                let (h, block, tau) = match target {
                    Target::A => (ha, PRIVATE_A, ta),
                    Target::B => (hb, PRIVATE_B, tb),
                };
                families.push(Family::new(h, block, vec![own(block)], tau));
                sum_families.push(0);
                active = [false; BLOCKS];
                active[block] = true;
            }
        }
        RatioProgram {
            families,
            sum_families,
            min_families,
            active,
            noise: problem.noise_power,
            budget: problem.power_budget,
            template: problem.zero_precoder(),
        }
    }

    pub fn family_count(&self) -> usize {
        self.families.len()
    }

    pub fn is_active(&self, block: usize) -> bool {
        self.active[block]
    }

    pub fn zero_precoder(&self) -> RsPrecoder {
        self.template.clone()
    }

    /// Zero every inactive block.
    pub fn restrict(&self, precoder: &RsPrecoder) -> RsPrecoder {
        let mut out = precoder.clone();
        for b in 0..BLOCKS {
            if !self.active[b] {
                out.block_at_mut(b).fill(Complex64::new(0.0, 0.0));
            }
        }
        out
    }

    pub fn project(&self, precoder: &RsPrecoder) -> RsPrecoder {
        project_to_budget(precoder, self.budget)
    }

    fn stats(&self, precoder: &RsPrecoder) -> Vec<BlockStats> {
        (0..BLOCKS).map(|b| BlockStats::new(precoder.block_at(b))).collect()
    }

    /// Interference power (before channel gain) for the ratio at `(m, n)`.
    fn interference(&self, f: &Family, stats: &[BlockStats], precoder: &RsPrecoder, m: usize, n: usize) -> f64 {
        f.interference
            .iter()
            .map(|i| {
                let s = &stats[i.block];
                match i.exclude {
                    None => s.total,
                    Some(ExclusionRule::Joint) => s.total - precoder.block_at(i.block)[(m, n)].norm_sqr(),
                    Some(ExclusionRule::Independent) => {
                        s.total - s.rows[m] - s.cols[n] + precoder.block_at(i.block)[(m, n)].norm_sqr()
                    }
                }
            })
            .sum::<f64>()
            .max(0.0)
    }

    /// Call `visit(m, n, h, a, b)` for every ratio of family `fi`, where
    /// `a` is the numerator amplitude and `b` the interference-plus-noise.
    fn for_each_ratio<F>(&self, fi: usize, precoder: &RsPrecoder, stats: &[BlockStats], mut visit: F)
    where
        F: FnMut(usize, usize, Complex64, Complex64, f64),
    {
        let f = &self.families[fi];
        let (rows, cols) = f.shape();
        let num = precoder.block_at(f.block);
        for m in 0..rows {
            for n in 0..cols {
                let h = f.coeff[(m, n)];
                let b = self.noise + h.norm_sqr() * self.interference(f, stats, precoder, m, n);
                visit(m, n, h, h * num[(m, n)], b);
            }
        }
    }

    /// Numerator amplitude `a` and interference-plus-noise `b` of every
    /// ratio in family `fi`, as `M x N` grids.
    pub fn ratio_parts(&self, fi: usize, precoder: &RsPrecoder) -> (CMatrix, nalgebra::DMatrix<f64>) {
        let stats = self.stats(precoder);
        let (rows, cols) = self.families[fi].shape();
        let mut a_grid = CMatrix::zeros(rows, cols);
        let mut b_grid = nalgebra::DMatrix::zeros(rows, cols);
        self.for_each_ratio(fi, precoder, &stats, |m, n, _, a, b| {
            a_grid[(m, n)] = a;
            b_grid[(m, n)] = b;
        });
        (a_grid, b_grid)
    }

    fn combine(&self, values: &[f64]) -> f64 {
        let sum: f64 = self.sum_families.iter().map(|&i| values[i]).sum();
        let min = self
            .min_families
            .iter()
            .map(|&i| values[i])
            .fold(None, |acc: Option<f64>, v| Some(acc.map_or(v, |a| a.min(v))));
        sum + min.unwrap_or(0.0)
    }

    /// Index of the active branch of the min, first family on ties.
    fn min_branch(&self, values: &[f64]) -> Option<usize> {
        let mut best: Option<usize> = None;
        for &i in &self.min_families {
            match best {
                Some(b) if values[b] <= values[i] => {}
                _ => best = Some(i),
            }
        }
        best
    }

    /// Exact capacity of every family.
    pub fn family_capacities(&self, precoder: &RsPrecoder) -> Vec<f64> {
        let stats = self.stats(precoder);
        (0..self.families.len())
            .map(|fi| {
                let f = &self.families[fi];
                let mut total = 0.0;
                self.for_each_ratio(fi, precoder, &stats, |_, _, _, a, b| {
                    total += f.log_term(a.norm_sqr() / b).map_or(f64::NAN, |t| t.0);
                });
                total
            })
            .collect()
    }

    pub fn objective(&self, precoder: &RsPrecoder) -> f64 {
        self.combine(&self.family_capacities(precoder))
    }

    /// Optimal auxiliaries `y = a / b` for every family.
    pub fn auxiliaries(&self, precoder: &RsPrecoder) -> Vec<CMatrix> {
        (0..self.families.len())
            .map(|fi| {
                let (a, b) = self.ratio_parts(fi, precoder);
                a.zip_map(&b, |a, b| a / b)
            })
            .collect()
    }

    fn surrogate_values(&self, precoder: &RsPrecoder, aux: &[CMatrix], stats: &[BlockStats]) -> Vec<f64> {
        (0..self.families.len())
            .map(|fi| {
                let f = &self.families[fi];
                let mut total = 0.0;
                self.for_each_ratio(fi, precoder, stats, |m, n, _, a, b| {
                    let q = quadratic_transform(aux[fi][(m, n)], a, b);
                    total += f.log_term(q).map_or(f64::NEG_INFINITY, |t| t.0);
                });
                total
            })
            .collect()
    }

    /// Surrogate objective; `-inf` outside the surrogate's domain.
    pub fn surrogate(&self, precoder: &RsPrecoder, aux: &[CMatrix]) -> f64 {
        let stats = self.stats(precoder);
        self.combine(&self.surrogate_values(precoder, aux, &stats))
    }

    /// Surrogate value, its gradient with respect to every precoder entry
    /// (as `d/dRe + j d/dIm`) and the per-entry weight `c` of the
    /// `-c |p|^2` terms once the log slopes are frozen. `None` outside the
    /// domain.
    pub fn surrogate_with_gradient(&self, precoder: &RsPrecoder, aux: &[CMatrix]) -> Option<SurrogateLocal> {
        let stats = self.stats(precoder);
        let values = self.surrogate_values(precoder, aux, &stats);
        let value = self.combine(&values);
        if !value.is_finite() {
            return None;
        }
        let mut selected = self.sum_families.clone();
        if let Some(b) = self.min_branch(&values) {
            selected.push(b);
        }

        let mut grad = self.zero_precoder();
        // per block: sum of kappa over all terms, per row, per column and
        // per-entry corrections for the exclusion sets
        let mut k_total = [0.0; BLOCKS];
        let mut k_rows: Vec<Vec<f64>> = (0..BLOCKS).map(|b| vec![0.0; precoder.block_at(b).nrows()]).collect();
        let mut k_cols: Vec<Vec<f64>> = (0..BLOCKS).map(|b| vec![0.0; precoder.block_at(b).ncols()]).collect();
        let mut k_entry: Vec<nalgebra::DMatrix<f64>> = (0..BLOCKS)
            .map(|b| {
                let s = precoder.block_at(b).shape();
                nalgebra::DMatrix::zeros(s.0, s.1)
            })
            .collect();

        for fi in selected {
            let f = &self.families[fi];
            let num_grad = grad.block_at_mut(f.block);
            self.for_each_ratio(fi, precoder, &stats, |m, n, h, a, b| {
                let y = aux[fi][(m, n)];
                let q = quadratic_transform(y, a, b);
                // the domain was checked above
                let slope = f.log_term(q).map_or(0.0, |t| t.1);
                num_grad[(m, n)] += y * h.conj() * (2.0 * slope);
                let kappa = slope * y.norm_sqr() * h.norm_sqr();
                if kappa == 0.0 {
                    return;
                }
                for i in &f.interference {
                    k_total[i.block] += kappa;
                    match i.exclude {
                        None => {}
                        Some(ExclusionRule::Joint) => k_entry[i.block][(m, n)] += kappa,
                        Some(ExclusionRule::Independent) => {
                            k_rows[i.block][m] += kappa;
                            k_cols[i.block][n] += kappa;
                            k_entry[i.block][(m, n)] -= kappa;
                        }
                    }
                }
            });
        }

        let mut weight = k_entry;
        for blk in 0..BLOCKS {
            if !self.active[blk] {
                grad.block_at_mut(blk).fill(Complex64::new(0.0, 0.0));
                weight[blk].fill(0.0);
                continue;
            }
            let p = precoder.block_at(blk);
            let g = grad.block_at_mut(blk);
            for m in 0..p.nrows() {
                for n in 0..p.ncols() {
                    let c = k_total[blk] - k_rows[blk][m] - k_cols[blk][n] - weight[blk][(m, n)];
                    weight[blk][(m, n)] = c.max(0.0);
                    g[(m, n)] -= p[(m, n)] * (2.0 * c);
                }
            }
        }
        Some(SurrogateLocal { value, grad, weight })
    }

    pub fn surrogate_gradient(&self, precoder: &RsPrecoder, aux: &[CMatrix]) -> Option<RsPrecoder> {
        self.surrogate_with_gradient(precoder, aux).map(|l| l.grad)
    }
}

/// First-order data of the surrogate at one precoder.
pub(crate) struct SurrogateLocal {
    pub value: f64,
    pub grad: RsPrecoder,
    /// Per block, per entry: weight of `-|p|^2` with the slopes frozen.
    pub weight: Vec<nalgebra::DMatrix<f64>>,
}

#[inline]
pub(crate) fn quadratic_transform(y: Complex64, a: Complex64, b: f64) -> f64 {
    2.0 * (y.conj() * a).re - y.norm_sqr() * b
}
