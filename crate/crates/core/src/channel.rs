//! UCA-to-UCA vortex-wave channel.
//!
//! A transmit UCA with `M` elements on radius `R` illuminates a receive UCA
//! with `N` elements on radius `r`. The receive array sits at distance `d`
//! from the transmit center, with the connecting line tilted by a polar
//! angle from the transmit axis and projected onto the transmit plane at
//! an azimuth measured from the x-axis. Every coefficient has the form
//!
//! ```text
//! h[n, m] = A_n * exp(-j * B_n * sin(psi_m + eta_m - phi_n - eta_n + zeta_n))
//! ```
//!
//! where `A_n` carries free-space attenuation and the receive-side phase
//! tilt, `B_n` the transmit-side aperture phase scale and `zeta_n` the angle
//! of the receive element as seen from the projected transmit axis.
//!
//! Indices are zero-based throughout: element `m` sits at basic azimuth
//! `2*pi*m/M`.

use std::f64::consts::{PI, TAU};

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::{CMatrix, Complex64, Error, Result};

/// Radicand threshold below which the zeta angle is undefined.
pub const DEGENERATE_EPS: f64 = 1e-12;

/// Wrap an angle into `[0, 2*pi)`.
pub fn wrap_angle(angle: f64) -> f64 {
    let w = angle.rem_euclid(TAU);
    // rem_euclid can round up to exactly TAU for tiny negative inputs
    if w >= TAU {
        0.0
    } else {
        w
    }
}

/// Geometry of one uniform circular array.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "UcaSpecRaw", into = "UcaSpecRaw")]
pub struct UcaSpec {
    element_count: usize,
    radius: f64,
    phase_offsets: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct UcaSpecRaw {
    element_count: usize,
    radius: f64,
    #[serde(default)]
    phase_offsets: Option<Vec<f64>>,
}

impl TryFrom<UcaSpecRaw> for UcaSpec {
    type Error = Error;

    fn try_from(raw: UcaSpecRaw) -> Result<Self> {
        let offsets = raw
            .phase_offsets
            .unwrap_or_else(|| vec![0.0; raw.element_count]);
        UcaSpec::new(raw.element_count, raw.radius, offsets)
    }
}

impl From<UcaSpec> for UcaSpecRaw {
    fn from(spec: UcaSpec) -> Self {
        UcaSpecRaw {
            element_count: spec.element_count,
            radius: spec.radius,
            phase_offsets: Some(spec.phase_offsets),
        }
    }
}

impl UcaSpec {
    /// Array with per-element phase offsets (wrapped into `[0, 2*pi)`).
    pub fn new(element_count: usize, radius: f64, phase_offsets: Vec<f64>) -> Result<Self> {
        if element_count == 0 {
            return Err(Error::field("element_count", "must be at least 1"));
        }
        if !(radius.is_finite() && radius > 0.0) {
            return Err(Error::field("radius", format!("must be positive, got {radius}")));
        }
        if phase_offsets.len() != element_count {
            return Err(Error::field(
                "phase_offsets",
                format!(
                    "expected {element_count} offsets, got {}",
                    phase_offsets.len()
                ),
            ));
        }
        if let Some(bad) = phase_offsets.iter().find(|o| !o.is_finite()) {
            return Err(Error::field("phase_offsets", format!("non-finite offset {bad}")));
        }
        Ok(UcaSpec {
            element_count,
            radius,
            phase_offsets: phase_offsets.into_iter().map(wrap_angle).collect(),
        })
    }

    /// Array whose elements all share one rotation offset.
    pub fn uniform(element_count: usize, radius: f64, offset: f64) -> Result<Self> {
        Self::new(element_count, radius, vec![offset; element_count])
    }

    pub fn element_count(&self) -> usize {
        self.element_count
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn phase_offsets(&self) -> &[f64] {
        &self.phase_offsets
    }

    /// Basic azimuth plus rotation offset of element `index`.
    pub fn element_position_angle(&self, index: usize) -> f64 {
        TAU * index as f64 / self.element_count as f64 + self.phase_offsets[index]
    }
}

/// Placement of a receive array relative to the transmit array.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "LinkGeometryRaw", into = "LinkGeometryRaw")]
pub struct LinkGeometry {
    distance: f64,
    polar_offset: f64,
    azimuth_offset: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LinkGeometryRaw {
    distance: f64,
    #[serde(default)]
    polar_offset: f64,
    #[serde(default)]
    azimuth_offset: f64,
}

impl TryFrom<LinkGeometryRaw> for LinkGeometry {
    type Error = Error;

    fn try_from(raw: LinkGeometryRaw) -> Result<Self> {
        LinkGeometry::new(raw.distance, raw.polar_offset, raw.azimuth_offset)
    }
}

impl From<LinkGeometry> for LinkGeometryRaw {
    fn from(g: LinkGeometry) -> Self {
        LinkGeometryRaw {
            distance: g.distance,
            polar_offset: g.polar_offset,
            azimuth_offset: g.azimuth_offset,
        }
    }
}

impl LinkGeometry {
    pub fn new(distance: f64, polar_offset: f64, azimuth_offset: f64) -> Result<Self> {
        if !(distance.is_finite() && distance > 0.0) {
            return Err(Error::field("distance", format!("must be positive, got {distance}")));
        }
        if !(0.0..PI / 2.0).contains(&polar_offset) {
            return Err(Error::field(
                "polar_offset",
                format!("must lie in [0, pi/2), got {polar_offset}"),
            ));
        }
        if !azimuth_offset.is_finite() {
            return Err(Error::field("azimuth_offset", "must be finite"));
        }
        Ok(LinkGeometry {
            distance,
            polar_offset,
            azimuth_offset: wrap_angle(azimuth_offset),
        })
    }

    /// Boresight geometry: receive axis on the transmit axis.
    pub fn aligned(distance: f64) -> Result<Self> {
        Self::new(distance, 0.0, 0.0)
    }

    pub fn distance(&self) -> f64 {
        self.distance
    }

    pub fn polar_offset(&self) -> f64 {
        self.polar_offset
    }

    pub fn azimuth_offset(&self) -> f64 {
        self.azimuth_offset
    }

    pub(crate) fn with_distance(&self, distance: f64) -> Result<Self> {
        Self::new(distance, self.polar_offset, self.azimuth_offset)
    }

    /// Length of the transmit-to-receive center line projected on the
    /// receive plane, `d * sin(polar)`.
    fn lateral_offset(&self) -> f64 {
        self.distance * self.polar_offset.sin()
    }
}

/// How the cosine of the zeta angle is formed.
///
/// The printed closed form uses `cos(alpha)` in both the sine and cosine
/// numerators, which is not a valid (sin, cos) pair. The geometric
/// derivation puts `d*sin(polar)*sin(alpha)` in the cosine numerator; the
/// mirrored variant takes the opposite sign, selecting the other quadrant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ZetaConvention {
    /// Cosine numerator `+d*sin(polar)*sin(alpha)`.
    #[default]
    GeometryConsistent,
    /// Cosine numerator `-d*sin(polar)*sin(alpha)`.
    GeometryMirrored,
    /// `zeta = asin(sin_zeta)`, reflected to `pi - asin` when the
    /// cosine numerator `d*sin(polar)*cos(alpha)` is negative.
    AlphaCosine,
}

/// Free-space propagation constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PropagationRaw", into = "PropagationRaw")]
pub struct PropagationSpec {
    wavelength: f64,
    antenna_factor: f64,
    zeta_convention: ZetaConvention,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PropagationRaw {
    wavelength: f64,
    antenna_factor: f64,
    #[serde(default)]
    zeta_convention: ZetaConvention,
}

impl TryFrom<PropagationRaw> for PropagationSpec {
    type Error = Error;

    fn try_from(raw: PropagationRaw) -> Result<Self> {
        PropagationSpec::new(raw.wavelength, raw.antenna_factor, raw.zeta_convention)
    }
}

impl From<PropagationSpec> for PropagationRaw {
    fn from(p: PropagationSpec) -> Self {
        PropagationRaw {
            wavelength: p.wavelength,
            antenna_factor: p.antenna_factor,
            zeta_convention: p.zeta_convention,
        }
    }
}

impl PropagationSpec {
    pub fn new(wavelength: f64, antenna_factor: f64, zeta_convention: ZetaConvention) -> Result<Self> {
        if !(wavelength.is_finite() && wavelength > 0.0) {
            return Err(Error::field("wavelength", format!("must be positive, got {wavelength}")));
        }
        if !(antenna_factor.is_finite() && antenna_factor > 0.0) {
            return Err(Error::field(
                "antenna_factor",
                format!("must be positive, got {antenna_factor}"),
            ));
        }
        Ok(PropagationSpec {
            wavelength,
            antenna_factor,
            zeta_convention,
        })
    }

    pub fn wavelength(&self) -> f64 {
        self.wavelength
    }

    pub fn antenna_factor(&self) -> f64 {
        self.antenna_factor
    }

    pub fn zeta_convention(&self) -> ZetaConvention {
        self.zeta_convention
    }
}

/// Basic azimuth `2*pi*(index-1)/count` of a 1-based element index.
pub fn element_azimuth(element_count: usize, index: usize) -> Result<f64> {
    if element_count == 0 || index == 0 || index > element_count {
        return Err(Error::domain(format!(
            "element index {index} outside 1..={element_count}"
        )));
    }
    Ok(TAU * (index - 1) as f64 / element_count as f64)
}

/// Angle of a receive element relative to the projected transmit axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Zeta {
    pub angle: f64,
    /// Set when the element sits on the projected axis and the angle is
    /// undefined; `angle` is then 0.
    pub degenerate: bool,
}

/// Raw `(sin, cos)` ratios of the zeta angle for receive element `n`, or
/// `None` when the radicand vanishes.
pub fn zeta_components(
    geometry: &LinkGeometry,
    receiver: &UcaSpec,
    n: usize,
    convention: ZetaConvention,
) -> Option<(f64, f64)> {
    let r = receiver.radius();
    let s = geometry.lateral_offset();
    let alpha = receiver.element_position_angle(n) - geometry.azimuth_offset();
    let radicand = r * r + s * s - 2.0 * r * s * alpha.cos();
    let den = radicand.max(0.0).sqrt();
    if den < DEGENERATE_EPS {
        return None;
    }
    let sin = (r - s * alpha.cos()) / den;
    let cos = match convention {
        ZetaConvention::GeometryConsistent => s * alpha.sin() / den,
        ZetaConvention::GeometryMirrored => -s * alpha.sin() / den,
        ZetaConvention::AlphaCosine => s * alpha.cos() / den,
    };
    Some((sin, cos))
}

/// Zeta angle of receive element `n` (zero-based).
pub fn zeta_angle(
    geometry: &LinkGeometry,
    receiver: &UcaSpec,
    n: usize,
    convention: ZetaConvention,
) -> Zeta {
    match zeta_components(geometry, receiver, n, convention) {
        None => Zeta {
            angle: 0.0,
            degenerate: true,
        },
        Some((sin, cos)) => {
            let angle = match convention {
                ZetaConvention::AlphaCosine => {
                    let base = sin.clamp(-1.0, 1.0).asin();
                    if cos < 0.0 {
                        PI - base
                    } else {
                        base
                    }
                }
                _ => sin.atan2(cos),
            };
            Zeta {
                angle,
                degenerate: false,
            }
        }
    }
}

/// Path length from a transmit element ring to a receive element ring,
/// `sqrt(d^2 + R^2 + r^2)`.
fn ring_distance(geometry: &LinkGeometry, tx_radius: f64, rx_radius: f64) -> f64 {
    let d = geometry.distance();
    (d * d + tx_radius * tx_radius + rx_radius * rx_radius).sqrt()
}

/// Amplitude factor `A_n` and aperture phase scale `B_n` for receive
/// element `n`.
pub fn amplitude_and_phase_scale(
    geometry: &LinkGeometry,
    tx_radius: f64,
    receiver: &UcaSpec,
    propagation: &PropagationSpec,
    n: usize,
) -> (Complex64, f64) {
    let lambda = propagation.wavelength();
    let r = receiver.radius();
    let s = geometry.lateral_offset();
    let alpha = receiver.element_position_angle(n) - geometry.azimuth_offset();
    let dist = ring_distance(geometry, tx_radius, r);

    let magnitude = propagation.antenna_factor() * lambda / (4.0 * PI * dist);
    let path_phase = -TAU * dist / lambda;
    let tilt_phase = TAU * r * s * alpha.cos() / (lambda * dist);
    let a = Complex64::from_polar(magnitude, path_phase + tilt_phase);

    let radicand = (r * r + s * s - 2.0 * r * s * alpha.cos()).max(0.0);
    let b = TAU * tx_radius * radicand.sqrt() / (lambda * dist);
    (a, b)
}

/// One channel coefficient together with the degeneracy flag of its row.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Coefficient {
    pub value: Complex64,
    pub degenerate: bool,
}

/// Coefficient from transmit element `m` to receive element `n`.
pub fn channel_coefficient(
    tx: &UcaSpec,
    rx: &UcaSpec,
    geometry: &LinkGeometry,
    propagation: &PropagationSpec,
    m: usize,
    n: usize,
) -> Result<Coefficient> {
    if m >= tx.element_count() || n >= rx.element_count() {
        return Err(Error::domain(format!(
            "element pair ({m}, {n}) outside {}x{} link",
            tx.element_count(),
            rx.element_count()
        )));
    }
    Ok(coefficient_unchecked(tx, rx, geometry, propagation, m, n))
}

fn coefficient_unchecked(
    tx: &UcaSpec,
    rx: &UcaSpec,
    geometry: &LinkGeometry,
    propagation: &PropagationSpec,
    m: usize,
    n: usize,
) -> Coefficient {
    let (a, b) = amplitude_and_phase_scale(geometry, tx.radius(), rx, propagation, n);
    let zeta = zeta_angle(geometry, rx, n, propagation.zeta_convention());
    let arg = tx.element_position_angle(m) - rx.element_position_angle(n) + zeta.angle;
    let value = a * Complex64::from_polar(1.0, -b * arg.sin());
    Coefficient {
        value,
        degenerate: zeta.degenerate,
    }
}

/// Dense `N x M` channel; entry `(n, m)` couples transmit element `m` to
/// receive element `n`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelMatrix {
    entries: CMatrix,
    degenerate_rows: Vec<usize>,
}

impl ChannelMatrix {
    /// Wrap an arbitrary `N x M` matrix, e.g. for synthetic channels.
    pub fn from_entries(entries: CMatrix) -> Result<Self> {
        if entries.nrows() == 0 || entries.ncols() == 0 {
            return Err(Error::domain("channel matrix must be nonempty"));
        }
        if entries.iter().any(|h| !(h.re.is_finite() && h.im.is_finite())) {
            return Err(Error::domain("channel matrix has non-finite entries"));
        }
        Ok(ChannelMatrix {
            entries,
            degenerate_rows: Vec::new(),
        })
    }

    /// Build from row-major nested values, `rows[n][m]`.
    pub fn from_rows(rows: &[Vec<Complex64>]) -> Result<Self> {
        let n = rows.len();
        let m = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != m) {
            return Err(Error::Dimension("ragged channel rows".into()));
        }
        Self::from_entries(CMatrix::from_fn(n, m, |i, j| rows[i][j]))
    }

    pub fn rx_count(&self) -> usize {
        self.entries.nrows()
    }

    pub fn tx_count(&self) -> usize {
        self.entries.ncols()
    }

    pub fn entries(&self) -> &CMatrix {
        &self.entries
    }

    /// Coefficient `h_{m,n}` stored at `(n, m)`.
    pub fn coefficient(&self, m: usize, n: usize) -> Complex64 {
        self.entries[(n, m)]
    }

    /// Receive rows whose zeta angle was degenerate during synthesis.
    pub fn degenerate_rows(&self) -> &[usize] {
        &self.degenerate_rows
    }

    pub fn is_degenerate(&self) -> bool {
        !self.degenerate_rows.is_empty()
    }

    pub fn frobenius_norm_sq(&self) -> f64 {
        self.entries.iter().map(|h| h.norm_sqr()).sum()
    }
}

/// Assemble the full channel between two arrays.
pub fn channel_matrix(
    tx: &UcaSpec,
    rx: &UcaSpec,
    geometry: &LinkGeometry,
    propagation: &PropagationSpec,
) -> ChannelMatrix {
    let (n_rx, m_tx) = (rx.element_count(), tx.element_count());
    let mut entries = CMatrix::zeros(n_rx, m_tx);
    let mut degenerate_rows = Vec::new();
    for n in 0..n_rx {
        let mut row_degenerate = false;
        for m in 0..m_tx {
            let c = coefficient_unchecked(tx, rx, geometry, propagation, m, n);
            entries[(n, m)] = c.value;
            row_degenerate |= c.degenerate;
        }
        if row_degenerate {
            degenerate_rows.push(n);
        }
    }
    ChannelMatrix {
        entries,
        degenerate_rows,
    }
}

/// Ideal phase-only OAM mode channel: column `q` is the receive steering
/// vector `exp(j*2*pi*l_q*n/N)` of mode `l_q`.
pub fn ideal_mode_channel(rx_count: usize, modes: &[i64]) -> Result<ChannelMatrix> {
    if rx_count == 0 || modes.is_empty() {
        return Err(Error::domain("mode channel needs at least one element and one mode"));
    }
    let entries = CMatrix::from_fn(rx_count, modes.len(), |n, q| {
        let phase = TAU * (modes[q] as f64) * n as f64 / rx_count as f64;
        Complex64::from_polar(1.0, phase)
    });
    ChannelMatrix::from_entries(entries)
}

/// Eigenvalues of the `M x M` Gram matrix `H^H H`, sorted descending.
///
/// With `normalize`, every entry is first divided by its magnitude so the
/// spectrum reflects phase structure only.
pub fn gram_eigenvalues(channel: &ChannelMatrix, normalize: bool) -> Result<Vec<f64>> {
    let h = if normalize {
        let mut out = channel.entries().clone();
        for z in out.iter_mut() {
            let mag = z.norm();
            if mag == 0.0 {
                return Err(Error::domain("cannot phase-normalize a zero-magnitude entry"));
            }
            *z /= mag;
        }
        out
    } else {
        channel.entries().clone()
    };
    let gram: DMatrix<Complex64> = h.adjoint() * &h;
    let eig = SymmetricEigen::new(gram);
    let mut values: Vec<f64> = eig.eigenvalues.iter().map(|v| v.max(0.0)).collect();
    values.sort_by(|a, b| b.total_cmp(a));
    Ok(values)
}
