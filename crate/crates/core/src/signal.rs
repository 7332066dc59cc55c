//! Rate-splitting transmit structure: per-pair precoders, the total power
//! constraint and OAM steering phases.

use std::f64::consts::TAU;

use crate::{CMatrix, Complex64, Error, Result};

/// Which precoder array of a pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PrecoderBlock {
    PrivateA,
    PrivateB,
    Common,
}

impl PrecoderBlock {
    pub const ALL: [PrecoderBlock; 3] = [
        PrecoderBlock::PrivateA,
        PrecoderBlock::PrivateB,
        PrecoderBlock::Common,
    ];
}

/// The three precoders serving one user pair.
///
/// Each array is `M x N`: entry `(m, n)` is the complex amplitude sent from
/// transmit element `m` towards receive element `n`. The common array uses
/// the larger of the two receive sizes; surplus columns are padding for the
/// smaller receiver.
#[derive(Debug, Clone, PartialEq)]
pub struct RsPrecoder {
    pub private_a: CMatrix,
    pub private_b: CMatrix,
    pub common: CMatrix,
}

impl RsPrecoder {
    pub fn zeros(tx_count: usize, rx_a: usize, rx_b: usize) -> Self {
        RsPrecoder {
            private_a: CMatrix::zeros(tx_count, rx_a),
            private_b: CMatrix::zeros(tx_count, rx_b),
            common: CMatrix::zeros(tx_count, rx_a.max(rx_b)),
        }
    }

    /// Assemble from explicit arrays, checking shapes and finiteness.
    pub fn from_parts(private_a: CMatrix, private_b: CMatrix, common: CMatrix) -> Result<Self> {
        let m = private_a.nrows();
        if private_b.nrows() != m || common.nrows() != m {
            return Err(Error::Dimension(
                "precoder arrays must share the transmit dimension".into(),
            ));
        }
        if common.ncols() != private_a.ncols().max(private_b.ncols()) {
            return Err(Error::Dimension(format!(
                "common precoder needs {} columns, got {}",
                private_a.ncols().max(private_b.ncols()),
                common.ncols()
            )));
        }
        let p = RsPrecoder {
            private_a,
            private_b,
            common,
        };
        if !p.is_finite() {
            return Err(Error::domain("precoder has non-finite entries"));
        }
        Ok(p)
    }

    pub fn tx_count(&self) -> usize {
        self.private_a.nrows()
    }

    pub fn block(&self, block: PrecoderBlock) -> &CMatrix {
        match block {
            PrecoderBlock::PrivateA => &self.private_a,
            PrecoderBlock::PrivateB => &self.private_b,
            PrecoderBlock::Common => &self.common,
        }
    }

    pub fn block_mut(&mut self, block: PrecoderBlock) -> &mut CMatrix {
        match block {
            PrecoderBlock::PrivateA => &mut self.private_a,
            PrecoderBlock::PrivateB => &mut self.private_b,
            PrecoderBlock::Common => &mut self.common,
        }
    }

    pub(crate) fn block_at(&self, index: usize) -> &CMatrix {
        self.block(PrecoderBlock::ALL[index])
    }

    pub(crate) fn block_at_mut(&mut self, index: usize) -> &mut CMatrix {
        self.block_mut(PrecoderBlock::ALL[index])
    }

    pub fn is_finite(&self) -> bool {
        PrecoderBlock::ALL
            .iter()
            .flat_map(|b| self.block(*b).iter())
            .all(|z| z.re.is_finite() && z.im.is_finite())
    }

    pub fn scaled(&self, factor: Complex64) -> Self {
        RsPrecoder {
            private_a: self.private_a.map(|z| z * factor),
            private_b: self.private_b.map(|z| z * factor),
            common: self.common.map(|z| z * factor),
        }
    }

    /// `self + step * direction`, entrywise.
    pub(crate) fn axpy(&self, step: f64, direction: &RsPrecoder) -> Self {
        RsPrecoder {
            private_a: &self.private_a + direction.private_a.map(|z| z * step),
            private_b: &self.private_b + direction.private_b.map(|z| z * step),
            common: &self.common + direction.common.map(|z| z * step),
        }
    }

    pub(crate) fn norm_sq(&self) -> f64 {
        total_power(self)
    }
}

/// Sum of squared magnitudes over all three precoders.
pub fn total_power(precoder: &RsPrecoder) -> f64 {
    PrecoderBlock::ALL
        .iter()
        .map(|b| precoder.block(*b).iter().map(|z| z.norm_sqr()).sum::<f64>())
        .sum()
}

/// Shrink `precoder` onto the power ball of radius `sqrt(budget)`.
///
/// Precoders already inside the ball are returned unchanged.
pub fn scale_to_power(precoder: &RsPrecoder, budget: f64) -> Result<RsPrecoder> {
    let power = total_power(precoder);
    if power == 0.0 {
        return Err(Error::domain("cannot scale an all-zero precoder"));
    }
    Ok(project_to_budget(precoder, budget))
}

/// Projection onto the power ball; total for every input.
pub(crate) fn project_to_budget(precoder: &RsPrecoder, budget: f64) -> RsPrecoder {
    let power = total_power(precoder);
    if power <= budget {
        return precoder.clone();
    }
    let factor = (budget / power).sqrt();
    let mut out = precoder.scaled(Complex64::new(factor, 0.0));
    // rounding can leave the result a few ulps above the budget
    let mut after = total_power(&out);
    while after > budget {
        out = out.scaled(Complex64::new(1.0 - f64::EPSILON, 0.0));
        after = total_power(&out);
    }
    out
}

/// Transmit steering vector `exp(j*(psi_m + eta_m)*l)` for OAM mode `l`.
pub fn steering_vector(element_count: usize, mode: i64, offsets: &[f64]) -> Result<Vec<Complex64>> {
    if element_count == 0 {
        return Err(Error::domain("steering vector needs at least one element"));
    }
    if offsets.len() != element_count {
        return Err(Error::Dimension(format!(
            "expected {element_count} phase offsets, got {}",
            offsets.len()
        )));
    }
    Ok((0..element_count)
        .map(|m| {
            let psi = TAU * m as f64 / element_count as f64;
            Complex64::from_polar(1.0, (psi + offsets[m]) * mode as f64)
        })
        .collect())
}

/// Largest normalized steering overlap between any two distinct modes.
///
/// Zero when no two modes are congruent modulo `element_count`; one when
/// some pair aliases onto the same phase progression.
pub fn mode_isolation_defect(element_count: usize, modes: &[i64]) -> Result<f64> {
    if element_count == 0 {
        return Err(Error::domain("element count must be at least 1"));
    }
    for (i, a) in modes.iter().enumerate() {
        if modes[i + 1..].contains(a) {
            return Err(Error::domain(format!("mode {a} listed twice")));
        }
    }
    let mut worst: f64 = 0.0;
    for (i, &a) in modes.iter().enumerate() {
        for &b in &modes[i + 1..] {
            let sum: Complex64 = (0..element_count)
                .map(|m| {
                    let psi = TAU * m as f64 / element_count as f64;
                    Complex64::from_polar(1.0, psi * (a - b) as f64)
                })
                .sum();
            worst = worst.max(sum.norm() / element_count as f64);
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn steering_examples() {
        let zero = steering_vector(4, 0, &[0.0; 4]).unwrap();
        for z in zero {
            assert_abs_diff_eq!((z - c(1.0)).norm(), 0.0, epsilon = 1e-15);
        }
        let two = steering_vector(4, 2, &[0.0; 4]).unwrap();
        for (z, want) in two.iter().zip([1.0, -1.0, 1.0, -1.0]) {
            assert_abs_diff_eq!((z - c(want)).norm(), 0.0, epsilon = 1e-12);
        }
        let v1 = steering_vector(4, 1, &[0.0; 4]).unwrap();
        let v2 = steering_vector(4, 2, &[0.0; 4]).unwrap();
        let inner: Complex64 = v1.iter().zip(&v2).map(|(a, b)| a.conj() * b).sum();
        assert_abs_diff_eq!(inner.norm(), 0.0, epsilon = 1e-12);
        assert!(steering_vector(0, 1, &[]).is_err());
        assert!(steering_vector(3, 1, &[0.0]).is_err());
    }

    #[test]
    fn power_examples() {
        assert_eq!(total_power(&RsPrecoder::zeros(3, 4, 4)), 0.0);
        let mut p = RsPrecoder::zeros(3, 4, 4);
        p.private_a[(1, 2)] = Complex64::new(0.0, 2.0);
        assert_abs_diff_eq!(total_power(&p), 4.0, epsilon = 1e-15);
        let mut p = RsPrecoder::zeros(3, 4, 4);
        p.private_a.fill(Complex64::from_polar(1.0, 0.7));
        assert_abs_diff_eq!(total_power(&p), 12.0, epsilon = 1e-12);
    }

    #[test]
    fn scale_examples() {
        let mut p = RsPrecoder::zeros(1, 1, 1);
        p.private_a[(0, 0)] = c(2.0);
        let s = scale_to_power(&p, 1.0).unwrap();
        assert_abs_diff_eq!(s.private_a[(0, 0)].re, 1.0, epsilon = 1e-15);

        let mut q = RsPrecoder::zeros(1, 1, 1);
        q.private_a[(0, 0)] = c(0.5f64.sqrt());
        assert_eq!(scale_to_power(&q, 1.0).unwrap(), q);

        let mut r = RsPrecoder::zeros(1, 1, 1);
        r.private_a[(0, 0)] = c(1.0);
        r.common[(0, 0)] = c(1.0);
        assert_eq!(scale_to_power(&r, 2.0).unwrap(), r);

        assert!(scale_to_power(&RsPrecoder::zeros(2, 2, 2), 1.0).is_err());
    }

    #[test]
    fn isolation_examples() {
        assert_abs_diff_eq!(mode_isolation_defect(4, &[1, 2]).unwrap(), 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(mode_isolation_defect(4, &[1, 5]).unwrap(), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(mode_isolation_defect(3, &[1, 2, 3]).unwrap(), 0.0, epsilon = 1e-12);
        assert!(mode_isolation_defect(3, &[1, 1]).is_err());
    }

    #[test]
    fn from_parts_checks_shapes() {
        let ok = RsPrecoder::from_parts(CMatrix::zeros(2, 3), CMatrix::zeros(2, 4), CMatrix::zeros(2, 4));
        assert!(ok.is_ok());
        let bad = RsPrecoder::from_parts(CMatrix::zeros(2, 3), CMatrix::zeros(2, 4), CMatrix::zeros(2, 3));
        assert!(bad.is_err());
    }

    fn arb_precoder() -> impl Strategy<Value = RsPrecoder> {
        proptest::collection::vec(-3.0f64..3.0, 36).prop_map(|v| {
            let mut p = RsPrecoder::zeros(3, 2, 2);
            let mut it = v.chunks(2).map(|c| Complex64::new(c[0], c[1]));
            for b in PrecoderBlock::ALL {
                for z in p.block_mut(b).iter_mut() {
                    *z = it.next().unwrap();
                }
            }
            p
        })
    }

    proptest! {
        #[test]
        fn steering_is_unit_modulus(m in 1usize..12, mode in -20i64..20, off in 0.0f64..6.28) {
            for z in steering_vector(m, mode, &vec![off; m]).unwrap() {
                prop_assert!((z.norm() - 1.0).abs() < 1e-12);
            }
        }

        #[test]
        fn distinct_residues_are_orthogonal(m in 2usize..10, a in -10i64..10, b in -10i64..10) {
            prop_assume!((a - b).rem_euclid(m as i64) != 0);
            let va = steering_vector(m, a, &vec![0.0; m]).unwrap();
            let vb = steering_vector(m, b, &vec![0.0; m]).unwrap();
            let inner: Complex64 = va.iter().zip(&vb).map(|(x, y)| x.conj() * y).sum();
            prop_assert!(inner.norm() < 1e-10);
        }

        #[test]
        fn power_is_homogeneous(p in arb_precoder(), re in -2.0f64..2.0, im in -2.0f64..2.0) {
            let c = Complex64::new(re, im);
            let lhs = total_power(&p.scaled(c));
            let rhs = c.norm_sqr() * total_power(&p);
            prop_assert!((lhs - rhs).abs() <= 1e-9 * rhs.max(1e-12));
        }

        #[test]
        fn projection_is_idempotent(p in arb_precoder(), budget in 0.01f64..50.0) {
            prop_assume!(total_power(&p) > 0.0);
            let once = scale_to_power(&p, budget).unwrap();
            let twice = scale_to_power(&once, budget).unwrap();
            prop_assert_eq!(&once, &twice);
            prop_assert!(total_power(&once) <= budget);
        }
    }
}
