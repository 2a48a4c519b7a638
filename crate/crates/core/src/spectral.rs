//! Joint spectral amplitudes on uniform wavelength grids and their Schmidt
//! decomposition.
//!
//! Rows of an amplitude matrix index signal wavelengths, columns idler
//! wavelengths. Wavelengths are in micrometres; the discrete norm is
//! `sum |f|^2 dls dli`.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use rayon::prelude::*;

pub use nalgebra::Complex;

use crate::crystal::{CrystalRecord, SPEED_OF_LIGHT};
use crate::error::{Error, Result};
use crate::phasematch::{delta_k, pump_from, SpdcConfig};

pub type C64 = Complex<f64>;

/// Tolerance on the discrete L2 norm of a normalized grid.
pub const NORM_TOLERANCE: f64 = 1e-10;
/// Relative tolerance on axis uniformity.
pub const UNIFORM_TOLERANCE: f64 = 1e-12;
/// Default nodes per axis.
pub const DEFAULT_NODES: usize = 201;
/// Grid half-span in units of the estimated JSA extent.
pub const SPAN_FACTOR: f64 = 4.0;

/// Angular frequency (rad/s) of a vacuum wavelength in um.
pub fn angular_frequency(lambda_um: f64) -> f64 {
    2.0 * PI * SPEED_OF_LIGHT / (lambda_um * 1e-6)
}

/// Gaussian pump: centre wavelength and bandwidth, both in um.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PumpSpec {
    pub center_um: f64,
    pub bandwidth_um: f64,
}

impl PumpSpec {
    pub fn new(center_um: f64, bandwidth_um: f64) -> Result<PumpSpec> {
        if !(bandwidth_um.is_finite() && bandwidth_um > 0.0 && bandwidth_um < center_um) {
            return Err(Error::InvalidConfig(format!(
                "pump bandwidth {bandwidth_um} um must lie in (0, {center_um})"
            )));
        }
        Ok(PumpSpec {
            center_um,
            bandwidth_um,
        })
    }

    /// Envelope width in rad/s: `2 pi c dl / (l^2 - (dl/2)^2)`.
    pub fn sigma(&self) -> f64 {
        let l = self.center_um * 1e-6;
        let dl = self.bandwidth_um * 1e-6;
        2.0 * PI * SPEED_OF_LIGHT * dl / (l * l - (dl / 2.0).powi(2))
    }

    pub fn omega(&self) -> f64 {
        angular_frequency(self.center_um)
    }
}

/// `(omega_s + omega_i - omega_p) / sigma_p`.
pub fn pump_detuning(signal_um: f64, idler_um: f64, pump: &PumpSpec) -> f64 {
    (angular_frequency(signal_um) + angular_frequency(idler_um) - pump.omega()) / pump.sigma()
}

pub fn pump_envelope(signal_um: f64, idler_um: f64, pump: &PumpSpec) -> f64 {
    (-0.5 * pump_detuning(signal_um, idler_um, pump).powi(2)).exp()
}

pub fn sinc(x: f64) -> f64 {
    if x == 0.0 {
        1.0
    } else {
        x.sin() / x
    }
}

/// `delta k L / 2` with the pump set by energy conservation.
pub fn pmf_argument(record: &CrystalRecord, signal_um: f64, idler_um: f64, config: &SpdcConfig) -> Result<f64> {
    let dk = delta_k(record, pump_from(signal_um, idler_um), signal_um, idler_um, config.phi_deg)?;
    Ok(dk * config.length_mm * 1e3 / 2.0)
}

pub fn phase_matching_amplitude(
    record: &CrystalRecord,
    signal_um: f64,
    idler_um: f64,
    config: &SpdcConfig,
) -> Result<f64> {
    Ok(sinc(pmf_argument(record, signal_um, idler_um, config)?))
}

/// Uniform axis `center + (j - (n-1)/2) step`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AxisSpec {
    pub center_um: f64,
    pub half_span_um: f64,
    pub nodes: usize,
}

impl AxisSpec {
    pub fn nodes(&self) -> Vec<f64> {
        if self.nodes == 1 {
            return vec![self.center_um];
        }
        let step = 2.0 * self.half_span_um / (self.nodes - 1) as f64;
        let mid = (self.nodes - 1) as f64 / 2.0;
        (0..self.nodes)
            .map(|j| self.center_um + (j as f64 - mid) * step)
            .collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GridSpec {
    pub signal: AxisSpec,
    pub idler: AxisSpec,
}

impl GridSpec {
    pub fn with_nodes(self, n_signal: usize, n_idler: usize) -> GridSpec {
        GridSpec {
            signal: AxisSpec {
                nodes: n_signal,
                ..self.signal
            },
            idler: AxisSpec {
                nodes: n_idler,
                ..self.idler
            },
        }
    }

    /// Same nodes, every half-span multiplied by `factor`.
    pub fn scaled(self, factor: f64) -> GridSpec {
        GridSpec {
            signal: AxisSpec {
                half_span_um: self.signal.half_span_um * factor,
                ..self.signal
            },
            idler: AxisSpec {
                half_span_um: self.idler.half_span_um * factor,
                ..self.idler
            },
        }
    }
}

/// Complex amplitudes on a rectangular signal x idler wavelength grid.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralGrid {
    signal_um: Vec<f64>,
    idler_um: Vec<f64>,
    amplitudes: DMatrix<C64>,
    normalized: bool,
}

fn check_axis(name: &str, axis: &[f64]) -> Result<()> {
    if axis.len() < 2 {
        return Err(Error::Grid(format!("{name} axis needs at least 2 nodes")));
    }
    if axis.iter().any(|v| !v.is_finite()) {
        return Err(Error::Grid(format!("{name} axis has non-finite nodes")));
    }
    let n = axis.len();
    let step = (axis[n - 1] - axis[0]) / (n - 1) as f64;
    if step <= 0.0 || axis.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Grid(format!("{name} axis is not strictly ascending")));
    }
    let scale = axis[0].abs().max(axis[n - 1].abs());
    for (j, &v) in axis.iter().enumerate() {
        if (v - (axis[0] + j as f64 * step)).abs() > UNIFORM_TOLERANCE * scale {
            return Err(Error::Grid(format!("{name} axis is not uniform at node {j}")));
        }
    }
    Ok(())
}

impl SpectralGrid {
    /// Wraps raw amplitudes; `normalized` is recomputed from the data.
    pub fn new(signal_um: Vec<f64>, idler_um: Vec<f64>, amplitudes: DMatrix<C64>) -> Result<SpectralGrid> {
        check_axis("signal", &signal_um)?;
        check_axis("idler", &idler_um)?;
        if amplitudes.shape() != (signal_um.len(), idler_um.len()) {
            return Err(Error::Grid(format!(
                "amplitude matrix is {:?}, axes are {} x {}",
                amplitudes.shape(),
                signal_um.len(),
                idler_um.len()
            )));
        }
        if amplitudes.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
            return Err(Error::Grid("non-finite amplitude".into()));
        }
        let mut grid = SpectralGrid {
            signal_um,
            idler_um,
            amplitudes,
            normalized: false,
        };
        grid.normalized = (grid.norm_squared() - 1.0).abs() <= NORM_TOLERANCE;
        Ok(grid)
    }

    /// Evaluates `f(ls, li)` on the grid rows in parallel.
    pub fn from_fn<F>(signal_um: Vec<f64>, idler_um: Vec<f64>, f: F) -> Result<SpectralGrid>
    where
        F: Fn(f64, f64) -> Result<C64> + Sync,
    {
        let rows: Vec<Vec<C64>> = signal_um
            .par_iter()
            .map(|&s| idler_um.iter().map(|&i| f(s, i)).collect::<Result<Vec<_>>>())
            .collect::<Result<_>>()?;
        let flat: Vec<C64> = rows.into_iter().flatten().collect();
        let m = DMatrix::from_row_slice(signal_um.len(), idler_um.len(), &flat);
        SpectralGrid::new(signal_um, idler_um, m)
    }

    pub fn signal_um(&self) -> &[f64] {
        &self.signal_um
    }

    pub fn idler_um(&self) -> &[f64] {
        &self.idler_um
    }

    pub fn amplitudes(&self) -> &DMatrix<C64> {
        &self.amplitudes
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    pub fn signal_step(&self) -> f64 {
        axis_step(&self.signal_um)
    }

    pub fn idler_step(&self) -> f64 {
        axis_step(&self.idler_um)
    }

    /// `sum |f|^2 dls dli`.
    pub fn norm_squared(&self) -> f64 {
        self.amplitudes.iter().map(|z| z.norm_sqr()).sum::<f64>() * self.signal_step() * self.idler_step()
    }

    pub fn normalized(mut self) -> Result<SpectralGrid> {
        let norm = self.norm_squared();
        if !(norm > 0.0 && norm.is_finite()) {
            return Err(Error::Grid("cannot normalize an all-zero grid".into()));
        }
        let scale = norm.sqrt().recip();
        self.amplitudes.iter_mut().for_each(|z| *z *= scale);
        self.normalized = true;
        Ok(self)
    }

    /// Signal and idler relabelled.
    pub fn transposed(&self) -> SpectralGrid {
        SpectralGrid {
            signal_um: self.idler_um.clone(),
            idler_um: self.signal_um.clone(),
            amplitudes: self.amplitudes.transpose(),
            normalized: self.normalized,
        }
    }

    /// Multiplies every amplitude by `factor`; the normalization flag is kept
    /// only for unit-modulus factors.
    pub fn scaled(&self, factor: C64) -> SpectralGrid {
        let mut out = self.clone();
        out.amplitudes.iter_mut().for_each(|z| *z *= factor);
        out.normalized = self.normalized && (factor.norm() - 1.0).abs() < 1e-15;
        out
    }

    /// Linear interpolation onto a new signal axis (zero outside the old one),
    /// renormalized.
    pub fn resample_signal(&self, target_um: &[f64]) -> Result<SpectralGrid> {
        check_axis("signal", target_um)?;
        let src = &self.signal_um;
        let (lo, hi) = (src[0], src[src.len() - 1]);
        let h = self.signal_step();
        let n_i = self.idler_um.len();
        let mut m = DMatrix::<C64>::zeros(target_um.len(), n_i);
        for (r, &s) in target_um.iter().enumerate() {
            if s < lo || s > hi {
                continue;
            }
            let x = ((s - lo) / h).clamp(0.0, (src.len() - 1) as f64);
            let k = (x.floor() as usize).min(src.len() - 2);
            let t = x - k as f64;
            for c in 0..n_i {
                m[(r, c)] = self.amplitudes[(k, c)] * (1.0 - t) + self.amplitudes[(k + 1, c)] * t;
            }
        }
        if m.iter().all(|z| z.norm_sqr() == 0.0) {
            return Err(Error::Grid("signal axes do not overlap".into()));
        }
        SpectralGrid::new(target_um.to_vec(), self.idler_um.clone(), m)?.normalized()
    }
}

fn axis_step(axis: &[f64]) -> f64 {
    (axis[axis.len() - 1] - axis[0]) / (axis.len() - 1) as f64
}

/// PEF x PMF on the grid, L2-normalized. The PEF uses `pump`; the PMF uses
/// the angle and length of `config`.
pub fn jsa(record: &CrystalRecord, config: &SpdcConfig, pump: &PumpSpec, spec: &GridSpec) -> Result<SpectralGrid> {
    SpectralGrid::from_fn(spec.signal.nodes(), spec.idler.nodes(), |s, i| {
        let pef = pump_envelope(s, i, pump);
        let pmf = phase_matching_amplitude(record, s, i, config)?;
        Ok(C64::new(pef * pmf, 0.0))
    })?
    .normalized()
}

#[derive(Clone, Debug, PartialEq)]
pub struct SchmidtResult {
    /// Descending, summing to one.
    pub coefficients: Vec<f64>,
    pub purity: f64,
    pub schmidt_number: f64,
}

/// Schmidt decomposition from the singular values of the amplitude matrix.
pub fn schmidt(grid: &SpectralGrid) -> Result<SchmidtResult> {
    schmidt_of_matrix(grid.amplitudes())
}

pub fn schmidt_of_matrix(m: &DMatrix<C64>) -> Result<SchmidtResult> {
    let sv = m.clone().singular_values();
    let mut weights: Vec<f64> = sv.iter().map(|s| s * s).collect();
    let total: f64 = weights.iter().sum();
    if !(total > 0.0 && total.is_finite()) {
        return Err(Error::Grid("Schmidt decomposition of an all-zero grid".into()));
    }
    weights.iter_mut().for_each(|w| *w /= total);
    weights.sort_by(|a, b| b.total_cmp(a));
    let purity: f64 = weights.iter().map(|w| w * w).sum();
    Ok(SchmidtResult {
        coefficients: weights,
        purity,
        schmidt_number: purity.recip(),
    })
}

/// Signal and idler spectra `sum |f|^2` along the other axis, each scaled to
/// integrate to the grid norm.
pub fn marginals(grid: &SpectralGrid) -> (Vec<f64>, Vec<f64>) {
    let a = grid.amplitudes();
    let (hs, hi) = (grid.signal_step(), grid.idler_step());
    let signal = a
        .row_iter()
        .map(|r| r.iter().map(|z| z.norm_sqr()).sum::<f64>() * hi)
        .collect();
    let idler = a
        .column_iter()
        .map(|c| c.iter().map(|z| z.norm_sqr()).sum::<f64>() * hs)
        .collect();
    (signal, idler)
}

/// RMS width of a sampled spectrum `weights` over `axis`.
pub fn rms_width(axis: &[f64], weights: &[f64]) -> f64 {
    let total: f64 = weights.iter().sum();
    let mean = axis.iter().zip(weights).map(|(x, w)| x * w).sum::<f64>() / total;
    let var = axis
        .iter()
        .zip(weights)
        .map(|(x, w)| (x - mean).powi(2) * w)
        .sum::<f64>()
        / total;
    var.sqrt()
}

/// Distance from the centre along one axis at which `beyond` first holds,
/// or `None` if it does not hold before `limit`.
fn scan_to_threshold<F>(beyond: F, limit: f64) -> Option<f64>
where
    F: Fn(f64) -> bool,
{
    let mut d = 1e-6_f64.min(limit / 2.0);
    let mut inside = 0.0;
    while !beyond(d) {
        inside = d;
        if d >= limit {
            return None;
        }
        d = (d * 2.0).min(limit);
    }
    let (mut lo, mut hi) = (inside, d);
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if beyond(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Some(hi)
}

/// Inverse intercept averaged over both scan directions; 0 if unreached.
fn inverse_width<F>(beyond: F, limits: (f64, f64)) -> f64
where
    F: Fn(f64) -> bool,
{
    let up = scan_to_threshold(&beyond, limits.1).map_or(0.0, f64::recip);
    let down = scan_to_threshold(|d| beyond(-d), limits.0).map_or(0.0, f64::recip);
    0.5 * (up + down)
}

/// Grid centred on the config wavelengths and sized to the PEF x PMF
/// overlap.
///
/// 1-D scans along each axis find the PEF `e^-1/2` point and the PMF first
/// zero. Their intercepts define two linearized strips whose intersection
/// is a parallelogram; the half-span per axis is [`SPAN_FACTOR`] times its
/// bounding box. Spans that leave the dispersion range are clipped
/// symmetrically with a warning.
pub fn auto_grid(record: &CrystalRecord, config: &SpdcConfig, pump: &PumpSpec) -> Result<GridSpec> {
    auto_grid_with(record, config, pump, DEFAULT_NODES, SPAN_FACTOR)
}

pub fn auto_grid_with(
    record: &CrystalRecord,
    config: &SpdcConfig,
    pump: &PumpSpec,
    nodes: usize,
    span_factor: f64,
) -> Result<GridSpec> {
    let (lo, hi) = record.valid_range()?;
    let (s0, i0) = (config.signal_um, config.idler_um);
    for l in [s0, i0] {
        if !(l > lo && l < hi) {
            return Err(Error::WavelengthOutOfRange {
                crystal: record.id,
                wavelength_um: l,
                min_um: lo,
                max_um: hi,
            });
        }
    }
    let room = |c: f64| (c - lo, hi - c);
    let pmf_beyond = |s: f64, i: f64| match pmf_argument(record, s, i, config) {
        Ok(x) => x.abs() >= PI,
        Err(_) => true,
    };

    // Signed inverse intercepts: p for the PEF strip, q for the PMF strip.
    let p_s = inverse_width(|d| pump_detuning(s0 + d, i0, pump).abs() >= 1.0, room(s0));
    let p_i = inverse_width(|d| pump_detuning(s0, i0 + d, pump).abs() >= 1.0, room(i0));
    let q_s = inverse_width(|d| pmf_beyond(s0 + d, i0), room(s0));
    let q_i = inverse_width(|d| pmf_beyond(s0, i0 + d), room(i0));
    let slope_sign = |a: Result<f64>, b: Result<f64>| match (a, b) {
        (Ok(a), Ok(b)) if b < a => -1.0,
        _ => 1.0,
    };
    let h = 1e-5;
    let q_s = q_s * slope_sign(pmf_argument(record, s0 - h, i0, config), pmf_argument(record, s0 + h, i0, config));
    let q_i = q_i * slope_sign(pmf_argument(record, s0, i0 - h, config), pmf_argument(record, s0, i0 + h, config));
    // Frequency falls with wavelength on both axes.
    let (p_s, p_i) = (-p_s, -p_i);

    let det = p_s * q_i - p_i * q_s;
    let (ext_s, ext_i) = if det != 0.0 && det.is_finite() {
        ((q_i.abs() + p_i.abs()) / det.abs(), (p_s.abs() + q_s.abs()) / det.abs())
    } else {
        (f64::INFINITY, f64::INFINITY)
    };

    let clip = |name: &str, center: f64, extent: f64| {
        let want = span_factor * extent;
        let (below, above) = room(center);
        let max = below.min(above);
        if want.is_finite() && want < max {
            want
        } else {
            log::warn!(
                "{} {name} half-span {want:.4e} um exceeds the dispersion range; clipped to {max:.4e} um",
                record.id
            );
            max
        }
    };
    Ok(GridSpec {
        signal: AxisSpec {
            center_um: s0,
            half_span_um: clip("signal", s0, ext_s),
            nodes,
        },
        idler: AxisSpec {
            center_um: i0,
            half_span_um: clip("idler", i0, ext_i),
            nodes,
        },
    })
}

/// Purity of the JSA for `config` and a pump of the given bandwidth on the
/// automatic grid.
pub fn purity_for_bandwidth(record: &CrystalRecord, config: &SpdcConfig, bandwidth_um: f64, nodes: usize) -> Result<f64> {
    let pump = PumpSpec::new(config.pump_um, bandwidth_um)?;
    let spec = auto_grid_with(record, config, &pump, nodes, SPAN_FACTOR)?;
    Ok(schmidt(&jsa(record, config, &pump, &spec)?)?.purity)
}

/// Pump bandwidth in `[lo, hi]` um that maximizes purity (golden-section
/// search), with the purity reached.
pub fn optimal_bandwidth(
    record: &CrystalRecord,
    config: &SpdcConfig,
    range_um: (f64, f64),
    nodes: usize,
) -> Result<(f64, f64)> {
    let ratio = (5f64.sqrt() - 1.0) / 2.0;
    let f = |bw: f64| purity_for_bandwidth(record, config, bw, nodes);
    let (mut a, mut b) = range_um;
    let mut c = b - ratio * (b - a);
    let mut d = a + ratio * (b - a);
    let (mut fc, mut fd) = (f(c)?, f(d)?);
    while (b - a) > 1e-3 * (a + b) {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - ratio * (b - a);
            fc = f(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + ratio * (b - a);
            fd = f(d)?;
        }
    }
    Ok(if fc > fd { (c, fc) } else { (d, fd) })
}
