//! Four-fold Hong-Ou-Mandel interference between the heralded signal photons
//! of two independent sources.
//!
//! With `G = F1 F1^H dli1` and `H = F2 F2^H dli2` (signal x signal), the
//! coincidence probability is
//! `P(tau) = 1/2 [1 - Re sum G(s1,s2) H(s2,s1) e^{i(w_s2 - w_s1) tau} dls^2]`,
//! which is the expanded modulus of the quadruple integral.

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::spectral::{angular_frequency, marginals, SpectralGrid, C64, NORM_TOLERANCE};

/// Maximum deviation of the end-point probabilities from 1/2.
pub const PLATEAU_TOLERANCE: f64 = 1e-3;
/// Fraction of the delays on each side averaged into the baseline.
pub const BASELINE_FRACTION: f64 = 0.1;
/// Default number of delay points.
pub const DEFAULT_DELAYS: usize = 201;
/// Default half-range in units of the inverse signal bandwidth.
pub const DEFAULT_RANGE_FACTOR: f64 = 3.0;

#[derive(Clone, Debug, PartialEq)]
pub struct HomCurve {
    /// seconds
    pub delays_s: Vec<f64>,
    pub probability: Vec<f64>,
}

impl HomCurve {
    /// Mean of `P` over the outer tenth of the delays on each side.
    pub fn baseline(&self) -> f64 {
        let n = self.probability.len();
        let k = ((n as f64 * BASELINE_FRACTION).round() as usize).clamp(1, n.div_ceil(2));
        let head = &self.probability[..k];
        let tail = &self.probability[n - k..];
        (head.iter().sum::<f64>() + tail.iter().sum::<f64>()) / (2 * k) as f64
    }

    pub fn minimum(&self) -> f64 {
        self.probability.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Largest deviation of the two end points from 1/2.
    pub fn plateau_deviation(&self) -> f64 {
        let first = self.probability.first().copied().unwrap_or(f64::NAN);
        let last = self.probability.last().copied().unwrap_or(f64::NAN);
        (first - 0.5).abs().max((last - 0.5).abs())
    }

    /// `(baseline - min P) / baseline`.
    pub fn visibility(&self) -> Result<f64> {
        visibility(self)
    }
}

pub fn visibility(curve: &HomCurve) -> Result<f64> {
    if curve.probability.len() < 3 {
        return Err(Error::InvalidConfig("HOM curve needs at least 3 delays".into()));
    }
    let deviation = curve.plateau_deviation();
    if !(deviation <= PLATEAU_TOLERANCE) {
        return Err(Error::DelayRangeTooNarrow { deviation });
    }
    let baseline = curve.baseline();
    Ok((baseline - curve.minimum()) / baseline)
}

/// `n` delays spanning `[-half_range, half_range]` seconds.
pub fn symmetric_delays(half_range_s: f64, n: usize) -> Vec<f64> {
    let mid = (n - 1) as f64 / 2.0;
    (0..n)
        .map(|k| {
            let t = half_range_s * (k as f64 - mid) / mid;
            if k as f64 == mid {
                0.0
            } else {
                t
            }
        })
        .collect()
}

/// RMS angular-frequency width (rad/s) of the signal marginal.
pub fn signal_bandwidth(grid: &SpectralGrid) -> f64 {
    let (ms, _) = marginals(grid);
    let omega: Vec<f64> = grid.signal_um().iter().map(|&l| angular_frequency(l)).collect();
    let total: f64 = ms.iter().sum();
    let mean = omega.iter().zip(&ms).map(|(w, m)| w * m).sum::<f64>() / total;
    (omega.iter().zip(&ms).map(|(w, m)| (w - mean).powi(2) * m).sum::<f64>() / total).sqrt()
}

/// Default delay axis: `DEFAULT_DELAYS` points over
/// `+-DEFAULT_RANGE_FACTOR / sigma_omega`.
pub fn default_delays(grid: &SpectralGrid) -> Vec<f64> {
    symmetric_delays(DEFAULT_RANGE_FACTOR / signal_bandwidth(grid), DEFAULT_DELAYS)
}

/// Maximum number of range doublings tried by [`hom_auto`].
pub const MAX_RANGE_DOUBLINGS: usize = 4;

/// Four-fold curve on the default delay axis, doubling the range (up to
/// [`MAX_RANGE_DOUBLINGS`] times) until the end points sit on the 1/2
/// plateau. Heavy sinc tails inflate the RMS bandwidth, so the first range
/// can be too short.
pub fn hom_auto(f1: &SpectralGrid, f2: &SpectralGrid) -> Result<HomCurve> {
    hom_auto_with(f1, f2, DEFAULT_DELAYS)
}

pub fn hom_auto_with(f1: &SpectralGrid, f2: &SpectralGrid, n_delays: usize) -> Result<HomCurve> {
    if n_delays < 3 {
        return Err(Error::InvalidConfig("HOM curve needs at least 3 delays".into()));
    }
    let base = DEFAULT_RANGE_FACTOR / signal_bandwidth(f1);
    let mut curve = hom_fourfold(f1, f2, &symmetric_delays(base, n_delays))?;
    for k in 1..=MAX_RANGE_DOUBLINGS {
        if curve.plateau_deviation() <= PLATEAU_TOLERANCE {
            break;
        }
        let half = base * 2f64.powi(k as i32);
        log::info!("delay range +-{half:.3e} s: widening for the plateau");
        curve = hom_fourfold(f1, f2, &symmetric_delays(half, n_delays))?;
    }
    if curve.plateau_deviation() > PLATEAU_TOLERANCE {
        return Err(Error::DelayRangeTooNarrow {
            deviation: curve.plateau_deviation(),
        });
    }
    Ok(curve)
}

fn check_inputs(f1: &SpectralGrid, f2: &SpectralGrid) -> Result<()> {
    for (k, g) in [(1, f1), (2, f2)] {
        if (g.norm_squared() - 1.0).abs() > NORM_TOLERANCE {
            return Err(Error::Grid(format!(
                "source {k} is not normalized (norm {})",
                g.norm_squared()
            )));
        }
    }
    let (a, b) = (f1.signal_um(), f2.signal_um());
    let scale = a.iter().chain(b).fold(0.0_f64, |m, v| m.max(v.abs()));
    if a.len() != b.len() || a.iter().zip(b).any(|(x, y)| (x - y).abs() > 1e-12 * scale) {
        return Err(Error::Grid("sources do not share a signal axis".into()));
    }
    Ok(())
}

/// `F F^H dli`, the signal-signal reduced density matrix on the grid.
fn reduced(grid: &SpectralGrid) -> DMatrix<C64> {
    let f = grid.amplitudes();
    f * f.adjoint() * C64::new(grid.idler_step(), 0.0)
}

/// Four-fold coincidence probability at each delay (seconds).
pub fn hom_fourfold(f1: &SpectralGrid, f2: &SpectralGrid, delays_s: &[f64]) -> Result<HomCurve> {
    check_inputs(f1, f2)?;
    let g = reduced(f1);
    let h = reduced(f2);
    let n = g.nrows();
    // M(s1, s2) = G(s1, s2) H(s2, s1), Hermitian.
    let m = DMatrix::from_fn(n, n, |r, c| g[(r, c)] * h[(c, r)]);
    let omega: Vec<f64> = f1.signal_um().iter().map(|&l| angular_frequency(l)).collect();
    let ds2 = f1.signal_step().powi(2);
    let probability = delays_s
        .par_iter()
        .map(|&tau| {
            // Re sum_{s1,s2} M e^{i (w2 - w1) tau} = Re u^H M u, u = e^{i w tau}.
            let u: Vec<C64> = omega.iter().map(|&w| C64::from_polar(1.0, w * tau)).collect();
            let mut acc = C64::new(0.0, 0.0);
            for r in 0..n {
                let mut row = C64::new(0.0, 0.0);
                for c in 0..n {
                    row += m[(r, c)] * u[c];
                }
                acc += u[r].conj() * row;
            }
            0.5 * (1.0 - acc.re * ds2)
        })
        .collect();
    Ok(HomCurve {
        delays_s: delays_s.to_vec(),
        probability,
    })
}
