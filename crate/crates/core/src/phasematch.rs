//! Type-II (e -> o + e) collinear phase matching and group-velocity matching.
//!
//! The pump and idler are extraordinary rays at angle `phi` from the optic
//! axis; the signal is ordinary. Wavelengths are in micrometres, angles in
//! degrees, crystal lengths in millimetres.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use crate::crystal::{CrystalId, CrystalRecord, Ray};
use crate::error::{Error, Result};
use crate::roots::{find_root, sign_changes, RootTolerance};

/// Relative tolerance on `1/lp = 1/ls + 1/li`.
pub const ENERGY_TOLERANCE: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum GvmType {
    /// Pump matched to the signal.
    Gvm1,
    /// Pump matched to the idler.
    Gvm2,
    /// Pump matched to the mean of signal and idler.
    Gvm3,
}

impl GvmType {
    pub const ALL: [GvmType; 3] = [GvmType::Gvm1, GvmType::Gvm2, GvmType::Gvm3];

    pub fn label(self) -> &'static str {
        match self {
            GvmType::Gvm1 => "GVM1",
            GvmType::Gvm2 => "GVM2",
            GvmType::Gvm3 => "GVM3",
        }
    }

    /// Ridge angle the PMF takes when this condition holds.
    pub fn ridge_angle_deg(self) -> f64 {
        match self {
            GvmType::Gvm1 => 0.0,
            GvmType::Gvm2 => 90.0,
            GvmType::Gvm3 => 45.0,
        }
    }
}

impl fmt::Display for GvmType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for GvmType {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "gvm1" | "1" => Ok(GvmType::Gvm1),
            "gvm2" | "2" => Ok(GvmType::Gvm2),
            "gvm3" | "3" => Ok(GvmType::Gvm3),
            _ => Err(Error::InvalidConfig(format!("unknown GVM type `{s}`"))),
        }
    }
}

/// Collinear type-II down-conversion setting.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SpdcConfig {
    pub crystal: CrystalId,
    pub pump_um: f64,
    pub signal_um: f64,
    pub idler_um: f64,
    pub phi_deg: f64,
    pub length_mm: f64,
}

impl SpdcConfig {
    pub fn new(
        crystal: CrystalId,
        pump_um: f64,
        signal_um: f64,
        idler_um: f64,
        phi_deg: f64,
        length_mm: f64,
    ) -> Result<SpdcConfig> {
        let config = SpdcConfig {
            crystal,
            pump_um,
            signal_um,
            idler_um,
            phi_deg,
            length_mm,
        };
        config.validate()?;
        Ok(config)
    }

    /// Builds a config with the idler fixed by energy conservation.
    pub fn from_pump_signal(
        crystal: CrystalId,
        pump_um: f64,
        signal_um: f64,
        phi_deg: f64,
        length_mm: f64,
    ) -> Result<SpdcConfig> {
        SpdcConfig::new(
            crystal,
            pump_um,
            signal_um,
            idler_from(pump_um, signal_um),
            phi_deg,
            length_mm,
        )
    }

    pub fn degenerate(crystal: CrystalId, pump_um: f64, phi_deg: f64, length_mm: f64) -> Result<SpdcConfig> {
        SpdcConfig::new(crystal, pump_um, 2.0 * pump_um, 2.0 * pump_um, phi_deg, length_mm)
    }

    pub fn with_length(self, length_mm: f64) -> Result<SpdcConfig> {
        SpdcConfig { length_mm, ..self }.validate_into()
    }

    pub fn with_phi(self, phi_deg: f64) -> Result<SpdcConfig> {
        SpdcConfig { phi_deg, ..self }.validate_into()
    }

    fn validate_into(self) -> Result<SpdcConfig> {
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        let all = [self.pump_um, self.signal_um, self.idler_um];
        if all.iter().any(|l| !(l.is_finite() && *l > 0.0)) {
            return Err(Error::InvalidConfig(format!(
                "wavelengths must be positive, got {all:?} um"
            )));
        }
        let lhs = 1.0 / self.pump_um;
        let rhs = 1.0 / self.signal_um + 1.0 / self.idler_um;
        if ((lhs - rhs) / lhs).abs() > ENERGY_TOLERANCE {
            return Err(Error::InvalidConfig(format!(
                "energy not conserved: 1/{} != 1/{} + 1/{}",
                self.pump_um, self.signal_um, self.idler_um
            )));
        }
        if !(self.pump_um < self.signal_um && self.signal_um <= self.idler_um) {
            return Err(Error::InvalidConfig(format!(
                "expected pump < signal <= idler, got {} / {} / {} um",
                self.pump_um, self.signal_um, self.idler_um
            )));
        }
        if !(self.phi_deg > 0.0 && self.phi_deg < 90.0) {
            return Err(Error::InvalidConfig(format!(
                "phase-matching angle {} deg outside (0, 90)",
                self.phi_deg
            )));
        }
        if !(self.length_mm.is_finite() && self.length_mm > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "crystal length {} mm must be positive",
                self.length_mm
            )));
        }
        Ok(())
    }

    pub fn is_degenerate(&self) -> bool {
        self.signal_um == self.idler_um
    }
}

pub fn idler_from(pump_um: f64, signal_um: f64) -> f64 {
    1.0 / (1.0 / pump_um - 1.0 / signal_um)
}

pub fn pump_from(signal_um: f64, idler_um: f64) -> f64 {
    1.0 / (1.0 / signal_um + 1.0 / idler_um)
}

/// Phase mismatch in rad/um:
/// `2 pi [n_e(lp, phi)/lp - n_o(ls)/ls - n_e(li, phi)/li]`.
pub fn delta_k(record: &CrystalRecord, pump_um: f64, signal_um: f64, idler_um: f64, phi_deg: f64) -> Result<f64> {
    let n_p = record.index_e(pump_um, phi_deg)?;
    let n_s = record.index_o(signal_um)?;
    let n_i = record.index_e(idler_um, phi_deg)?;
    Ok(2.0 * PI * (n_p / pump_um - n_s / signal_um - n_i / idler_um))
}

pub fn delta_k_config(record: &CrystalRecord, config: &SpdcConfig) -> Result<f64> {
    delta_k(record, config.pump_um, config.signal_um, config.idler_um, config.phi_deg)
}

/// Inverse group velocities `(k'_p, k'_s, k'_i)` in s/m.
pub fn inverse_group_velocities(
    record: &CrystalRecord,
    pump_um: f64,
    signal_um: f64,
    idler_um: f64,
    phi_deg: f64,
) -> Result<(f64, f64, f64)> {
    let e = Ray::Extraordinary { phi_deg };
    Ok((
        record.inverse_group_velocity(e, pump_um)?,
        record.inverse_group_velocity(Ray::Ordinary, signal_um)?,
        record.inverse_group_velocity(e, idler_um)?,
    ))
}

/// GVM residual in s/m.
pub fn gvm_residual(
    record: &CrystalRecord,
    gvm: GvmType,
    pump_um: f64,
    signal_um: f64,
    idler_um: f64,
    phi_deg: f64,
) -> Result<f64> {
    let (p, s, i) = inverse_group_velocities(record, pump_um, signal_um, idler_um, phi_deg)?;
    Ok(combine(gvm, p, s, i))
}

fn combine(gvm: GvmType, p: f64, s: f64, i: f64) -> f64 {
    match gvm {
        GvmType::Gvm1 => p - s,
        GvmType::Gvm2 => p - i,
        GvmType::Gvm3 => (p - s) + (p - i),
    }
}

/// Orientation of the PMF ridge in the (omega_s, omega_i) plane, in [0, 180).
pub fn ridge_angle(record: &CrystalRecord, config: &SpdcConfig) -> Result<f64> {
    let (p, s, i) = inverse_group_velocities(
        record,
        config.pump_um,
        config.signal_um,
        config.idler_um,
        config.phi_deg,
    )?;
    ridge_angle_from(p - s, p - i)
}

/// `atan2(-(k'_p - k'_s), k'_p - k'_i)` in degrees, wrapped to [0, 180).
pub fn ridge_angle_from(pump_minus_signal: f64, pump_minus_idler: f64) -> Result<f64> {
    if pump_minus_signal == 0.0 && pump_minus_idler == 0.0 {
        return Err(Error::Indeterminate);
    }
    let theta = (-pump_minus_signal).atan2(pump_minus_idler).to_degrees();
    Ok(wrap_180(theta))
}

/// Wraps to [0, 180); values within round-off of 180 fold onto 0.
fn wrap_180(deg: f64) -> f64 {
    let w = deg.rem_euclid(180.0) + 0.0;
    if w >= 180.0 - 1e-9 {
        0.0
    } else {
        w
    }
}

/// Distance between two orientations modulo 180 degrees.
pub fn orientation_distance(a_deg: f64, b_deg: f64) -> f64 {
    let d = (a_deg - b_deg).rem_euclid(180.0);
    d.min(180.0 - d)
}

/// Solver tolerances and scan settings.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolverSettings {
    /// |delta k| bound at an accepted point, rad/um.
    pub delta_k_tol: f64,
    /// |GVM residual| bound at an accepted point, s/m.
    pub gvm_tol: f64,
    /// Convergence of the angle root, degrees.
    pub angle_tol: f64,
    /// Convergence of the wavelength root, um.
    pub wavelength_tol: f64,
    /// Pump scan for degenerate searches, um.
    pub pump_scan: (f64, f64),
    /// Signal scan for nondegenerate searches, um.
    pub signal_scan: (f64, f64),
    /// Coarse scan step, um.
    pub scan_step: f64,
}

impl Default for SolverSettings {
    fn default() -> Self {
        SolverSettings {
            delta_k_tol: 1e-6,
            gvm_tol: 1e-13,
            angle_tol: 1e-9,
            wavelength_tol: 1e-9,
            pump_scan: (0.35, 1.0),
            signal_scan: (0.5, 0.9),
            scan_step: 0.0025,
        }
    }
}

impl SolverSettings {
    /// Every convergence tolerance halved; scans unchanged.
    pub fn halved(self) -> SolverSettings {
        SolverSettings {
            delta_k_tol: self.delta_k_tol / 2.0,
            gvm_tol: self.gvm_tol / 2.0,
            angle_tol: self.angle_tol / 2.0,
            wavelength_tol: self.wavelength_tol / 2.0,
            ..self
        }
    }

    fn angle_root(&self) -> RootTolerance {
        RootTolerance {
            x_tol: self.angle_tol,
            f_tol: self.delta_k_tol * 1e-3,
            max_iter: 200,
        }
    }

    fn wavelength_root(&self) -> RootTolerance {
        RootTolerance {
            x_tol: self.wavelength_tol,
            f_tol: self.gvm_tol * 1e-2,
            max_iter: 200,
        }
    }
}

/// Phase-matching angle in degrees with the default tolerances.
pub fn solve_angle(record: &CrystalRecord, pump_um: f64, signal_um: f64, idler_um: f64) -> Result<f64> {
    solve_angle_with(record, pump_um, signal_um, idler_um, &SolverSettings::default())
}

/// Phase-matching angle by bracketed root finding on [0, 90] degrees.
pub fn solve_angle_with(
    record: &CrystalRecord,
    pump_um: f64,
    signal_um: f64,
    idler_um: f64,
    settings: &SolverSettings,
) -> Result<f64> {
    let dk = |phi: f64| delta_k(record, pump_um, signal_um, idler_um, phi);
    let (d0, d90) = (dk(0.0)?, dk(90.0)?);
    if d0.signum() == d90.signum() && d0 != 0.0 && d90 != 0.0 {
        return Err(Error::NoPhaseMatching {
            crystal: record.id,
            pump_um,
            signal_um,
            idler_um,
        });
    }
    let phi = find_root(dk, 0.0, 90.0, settings.angle_root())?;
    let residual = dk(phi)?;
    if residual.abs() >= settings.delta_k_tol || phi <= 0.0 || phi >= 90.0 {
        return Err(Error::NoPhaseMatching {
            crystal: record.id,
            pump_um,
            signal_um,
            idler_um,
        });
    }
    Ok(phi)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GvmSolution {
    pub gvm_type: GvmType,
    pub config: SpdcConfig,
    /// rad/um
    pub residual_delta_k: f64,
    /// s/m
    pub residual_gvm: f64,
    /// degrees
    pub ridge_angle_deg: f64,
}

/// Nominal crystal length attached to solver output; it affects nothing the
/// solver computes.
pub const NOMINAL_LENGTH_MM: f64 = 1.0;

fn interior(record: &CrystalRecord, lambda: f64) -> Result<bool> {
    let (lo, hi) = record.valid_range()?;
    Ok(lambda > lo && lambda < hi)
}

fn make_solution(
    record: &CrystalRecord,
    gvm: GvmType,
    config: SpdcConfig,
    settings: &SolverSettings,
) -> Result<Option<GvmSolution>> {
    let dk = delta_k_config(record, &config)?;
    let res = gvm_residual(
        record,
        gvm,
        config.pump_um,
        config.signal_um,
        config.idler_um,
        config.phi_deg,
    )?;
    if dk.abs() >= settings.delta_k_tol || res.abs() >= settings.gvm_tol {
        log::debug!(
            "{} {gvm}: rejecting bracket at {:.6} um (dk {dk:e}, gvm {res:e})",
            record.id,
            config.pump_um
        );
        return Ok(None);
    }
    Ok(Some(GvmSolution {
        gvm_type: gvm,
        config,
        residual_delta_k: dk,
        residual_gvm: res,
        ridge_angle_deg: ridge_angle(record, &config)?,
    }))
}

fn scan_nodes(range: (f64, f64), step: f64) -> Vec<f64> {
    let n = ((range.1 - range.0) / step).round() as usize;
    (0..=n).map(|k| range.0 + (range.1 - range.0) * k as f64 / n as f64).collect()
}

/// All degenerate (`ls = li = 2 lp`) points where phase matching and the
/// chosen GVM condition hold together, sorted by pump wavelength.
pub fn solve_gvm_degenerate(record: &CrystalRecord, gvm: GvmType) -> Result<Vec<GvmSolution>> {
    solve_gvm_degenerate_with(record, gvm, &SolverSettings::default())
}

pub fn solve_gvm_degenerate_with(
    record: &CrystalRecord,
    gvm: GvmType,
    settings: &SolverSettings,
) -> Result<Vec<GvmSolution>> {
    record.valid_range()?;
    let along_curve = |lp: f64| -> Result<f64> {
        let phi = solve_angle_with(record, lp, 2.0 * lp, 2.0 * lp, settings)?;
        gvm_residual(record, gvm, lp, 2.0 * lp, 2.0 * lp, phi)
    };
    let mut pumps = Vec::new();
    for lp in scan_nodes(settings.pump_scan, settings.scan_step) {
        if interior(record, lp)? && interior(record, 2.0 * lp)? {
            pumps.push(lp);
        }
    }
    let values: Vec<Option<f64>> = pumps.par_iter().map(|&lp| along_curve(lp).ok()).collect();

    let mut out = Vec::new();
    for k in sign_changes(&values) {
        let lp = match find_root(along_curve, pumps[k], pumps[k + 1], settings.wavelength_root()) {
            Ok(lp) => lp,
            Err(e) => {
                log::debug!("{} {gvm}: refinement failed near {} um: {e}", record.id, pumps[k]);
                continue;
            }
        };
        let phi = solve_angle_with(record, lp, 2.0 * lp, 2.0 * lp, settings)?;
        let config = SpdcConfig::degenerate(record.id, lp, phi, NOMINAL_LENGTH_MM)?;
        if let Some(sol) = make_solution(record, gvm, config, settings)? {
            out.push(sol);
        }
    }
    if out.is_empty() {
        return Err(Error::NoSolution(format!(
            "{} {gvm}: no degenerate GVM point for pump in [{}, {}] um",
            record.id, settings.pump_scan.0, settings.pump_scan.1
        )));
    }
    Ok(out)
}

/// Nondegenerate GVM1 points for a fixed pump, sorted by signal wavelength.
pub fn solve_gvm_nondegenerate(record: &CrystalRecord, pump_um: f64) -> Result<Vec<GvmSolution>> {
    solve_gvm_nondegenerate_with(record, pump_um, &SolverSettings::default())
}

pub fn solve_gvm_nondegenerate_with(
    record: &CrystalRecord,
    pump_um: f64,
    settings: &SolverSettings,
) -> Result<Vec<GvmSolution>> {
    let gvm = GvmType::Gvm1;
    if !interior(record, pump_um)? {
        let (lo, hi) = record.valid_range()?;
        return Err(Error::WavelengthOutOfRange {
            crystal: record.id,
            wavelength_um: pump_um,
            min_um: lo,
            max_um: hi,
        });
    }
    let along_curve = |ls: f64| -> Result<f64> {
        let li = idler_from(pump_um, ls);
        let phi = solve_angle_with(record, pump_um, ls, li, settings)?;
        gvm_residual(record, gvm, pump_um, ls, li, phi)
    };
    let mut signals = Vec::new();
    for ls in scan_nodes(settings.signal_scan, settings.scan_step / 2.5) {
        if ls > pump_um && ls <= 2.0 * pump_um && interior(record, ls)? && interior(record, idler_from(pump_um, ls))? {
            signals.push(ls);
        }
    }
    let values: Vec<Option<f64>> = signals.par_iter().map(|&ls| along_curve(ls).ok()).collect();

    let mut out = Vec::new();
    for k in sign_changes(&values) {
        let ls = match find_root(along_curve, signals[k], signals[k + 1], settings.wavelength_root()) {
            Ok(ls) => ls,
            Err(e) => {
                log::debug!("{} {gvm}: refinement failed near {} um: {e}", record.id, signals[k]);
                continue;
            }
        };
        let li = idler_from(pump_um, ls);
        let phi = solve_angle_with(record, pump_um, ls, li, settings)?;
        let config = SpdcConfig::from_pump_signal(record.id, pump_um, ls, phi, NOMINAL_LENGTH_MM)?;
        if let Some(sol) = make_solution(record, gvm, config, settings)? {
            out.push(sol);
        }
    }
    if out.is_empty() {
        return Err(Error::NoSolution(format!(
            "{} {gvm}: no nondegenerate point for pump {pump_um} um with signal in [{}, {}] um",
            record.id, settings.signal_scan.0, settings.signal_scan.1
        )));
    }
    Ok(out)
}

/// Degenerate-pump field over (lambda_p, phi): delta k and the three GVM
/// residuals. Row `r` holds pump wavelength `lambdas[r]`.
#[derive(Clone, Debug, PartialEq)]
pub struct PmfGvmMap {
    pub crystal: CrystalId,
    pub lambdas_um: Vec<f64>,
    pub phis_deg: Vec<f64>,
    pub delta_k: Vec<Vec<f64>>,
    pub gvm: [Vec<Vec<f64>>; 3],
}

fn linspace(range: (f64, f64), n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![range.0];
    }
    (0..n)
        .map(|k| range.0 + (range.1 - range.0) * k as f64 / (n - 1) as f64)
        .collect()
}

pub fn pmf_gvm_map(
    record: &CrystalRecord,
    lambda_range_um: (f64, f64),
    phi_range_deg: (f64, f64),
    n_lambda: usize,
    n_phi: usize,
) -> Result<PmfGvmMap> {
    if n_lambda < 2 || n_phi < 2 {
        return Err(Error::InvalidConfig("map needs at least 2x2 nodes".into()));
    }
    if !(lambda_range_um.0 < lambda_range_um.1 && phi_range_deg.0 < phi_range_deg.1) {
        return Err(Error::InvalidConfig("map ranges must be ascending".into()));
    }
    let lambdas = linspace(lambda_range_um, n_lambda);
    let phis = linspace(phi_range_deg, n_phi);
    let rows: Vec<(Vec<f64>, [Vec<f64>; 3])> = lambdas
        .par_iter()
        .map(|&lp| -> Result<_> {
            let mut dk = Vec::with_capacity(n_phi);
            let mut g: [Vec<f64>; 3] = Default::default();
            for &phi in &phis {
                dk.push(delta_k(record, lp, 2.0 * lp, 2.0 * lp, phi)?);
                let (p, s, i) = inverse_group_velocities(record, lp, 2.0 * lp, 2.0 * lp, phi)?;
                for (slot, t) in g.iter_mut().zip(GvmType::ALL) {
                    slot.push(combine(t, p, s, i));
                }
            }
            Ok((dk, g))
        })
        .collect::<Result<_>>()?;
    let mut delta_k_rows = Vec::with_capacity(n_lambda);
    let mut gvm: [Vec<Vec<f64>>; 3] = Default::default();
    for (dk, g) in rows {
        delta_k_rows.push(dk);
        for (dst, src) in gvm.iter_mut().zip(g) {
            dst.push(src);
        }
    }
    Ok(PmfGvmMap {
        crystal: record.id,
        lambdas_um: lambdas,
        phis_deg: phis,
        delta_k: delta_k_rows,
        gvm,
    })
}

impl PmfGvmMap {
    /// Crossings of the delta-k zero contour with the chosen GVM zero
    /// contour, located by linear interpolation on the grid.
    pub fn crossings(&self, gvm: GvmType) -> Vec<(f64, f64)> {
        let field = &self.gvm[gvm as usize];
        // Along each row, the first delta-k zero and the GVM value there.
        let along: Vec<Option<(f64, f64)>> = self
            .delta_k
            .iter()
            .zip(field)
            .map(|(dk, g)| {
                dk.windows(2).enumerate().find_map(|(c, w)| {
                    if w[0] == 0.0 || w[0].signum() != w[1].signum() {
                        let t = if w[0] == w[1] { 0.0 } else { w[0] / (w[0] - w[1]) };
                        let phi = self.phis_deg[c] + t * (self.phis_deg[c + 1] - self.phis_deg[c]);
                        Some((phi, g[c] + t * (g[c + 1] - g[c])))
                    } else {
                        None
                    }
                })
            })
            .collect();
        let values: Vec<Option<f64>> = along.iter().map(|v| v.map(|(_, g)| g)).collect();
        sign_changes(&values)
            .into_iter()
            .map(|r| {
                let (phi0, g0) = along[r].unwrap();
                let (phi1, g1) = along[r + 1].unwrap();
                let t = if g0 == g1 { 0.0 } else { g0 / (g0 - g1) };
                let lp = self.lambdas_um[r] + t * (self.lambdas_um[r + 1] - self.lambdas_um[r]);
                (lp, phi0 + t * (phi1 - phi0))
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crystal::Database;

    fn rec(id: CrystalId) -> CrystalRecord {
        Database::builtin().get(id).unwrap().clone()
    }

    #[test]
    fn kdp_gvm1_table_point_is_phase_matched() {
        let kdp = rec(CrystalId::Kdp);
        let dk = delta_k(&kdp, 0.415, 0.830, 0.830, 67.7).unwrap();
        assert!(dk.abs() < 1e-3, "{dk}");
    }

    #[test]
    fn kdp_axis_propagation_has_positive_mismatch() {
        let kdp = rec(CrystalId::Kdp);
        assert!(delta_k(&kdp, 0.415, 0.830, 0.830, 0.0).unwrap() > 0.0);
    }

    #[test]
    fn solve_angle_table_rows() {
        let kdp = rec(CrystalId::Kdp);
        let phi = solve_angle(&kdp, 0.551, 1.102, 1.102).unwrap();
        assert!((phi - 59.0).abs() < 0.5, "{phi}");
        let rdp = rec(CrystalId::Rdp);
        let phi = solve_angle(&rdp, 0.578, 1.156, 1.156).unwrap();
        assert!((phi - 82.1).abs() < 0.5, "{phi}");
    }

    #[test]
    fn unmatched_wavelengths_report_no_phase_matching() {
        // Far in the UV the birefringence cannot compensate dispersion.
        let kdp = rec(CrystalId::Kdp);
        assert!(matches!(
            solve_angle(&kdp, 0.22, 0.44, 0.44),
            Err(Error::NoPhaseMatching { .. })
        ));
    }

    #[test]
    fn gvm3_is_sum_of_gvm1_and_gvm2() {
        let kdp = rec(CrystalId::Kdp);
        let args = (0.5, 0.9, idler_from(0.5, 0.9), 60.0);
        let g = |t| gvm_residual(&kdp, t, args.0, args.1, args.2, args.3).unwrap();
        let diff = g(GvmType::Gvm3) - g(GvmType::Gvm1) - g(GvmType::Gvm2);
        assert!(diff.abs() < 1e-24);
    }

    #[test]
    fn kdp_gvm1_residual_flips_across_415() {
        let kdp = rec(CrystalId::Kdp);
        let at = |lp: f64| {
            let phi = solve_angle(&kdp, lp, 2.0 * lp, 2.0 * lp).unwrap();
            gvm_residual(&kdp, GvmType::Gvm1, lp, 2.0 * lp, 2.0 * lp, phi).unwrap()
        };
        assert!(at(0.405).signum() != at(0.425).signum());
    }

    #[test]
    fn ridge_angle_branches() {
        assert_eq!(ridge_angle_from(0.0, 1.0).unwrap(), 0.0);
        assert_eq!(ridge_angle_from(0.0, -1.0).unwrap(), 0.0);
        assert_eq!(ridge_angle_from(1.0, 0.0).unwrap(), 90.0);
        assert_eq!(ridge_angle_from(-1.0, 0.0).unwrap(), 90.0);
        assert!((ridge_angle_from(-1.0, 1.0).unwrap() - 45.0).abs() < 1e-12);
        assert!((ridge_angle_from(1.0, -1.0).unwrap() - 45.0).abs() < 1e-12);
        assert_eq!(ridge_angle_from(0.0, 0.0), Err(Error::Indeterminate));
        assert!(orientation_distance(179.8, 0.0) < 0.21);
    }

    #[test]
    fn degenerate_solutions_for_adp_and_dkdp() {
        let adp = rec(CrystalId::Adp);
        let sols = solve_gvm_degenerate(&adp, GvmType::Gvm1).unwrap();
        let s = sols
            .iter()
            .min_by(|a, b| (a.config.pump_um - 0.411).abs().total_cmp(&(b.config.pump_um - 0.411).abs()))
            .unwrap();
        assert!((s.config.pump_um - 0.411).abs() < 0.005);
        assert!((s.config.phi_deg - 71.2).abs() < 1.0);

        let dkdp = rec(CrystalId::Dkdp);
        let s = solve_gvm_degenerate(&dkdp, GvmType::Gvm2).unwrap()[0];
        assert!((s.config.signal_um - 1.830).abs() < 0.010);
        assert!((s.config.phi_deg - 62.9).abs() < 1.0);
        assert!(orientation_distance(s.ridge_angle_deg, 90.0) < 0.5);
    }

    #[test]
    fn kdp_gvm2_has_no_solution() {
        let kdp = rec(CrystalId::Kdp);
        assert!(matches!(
            solve_gvm_degenerate(&kdp, GvmType::Gvm2),
            Err(Error::NoSolution(_))
        ));
    }

    #[test]
    fn dkda_search_needs_dispersion() {
        let db = Database::builtin();
        let dkda = db.get(CrystalId::Dkda).unwrap();
        assert_eq!(
            solve_gvm_degenerate(dkda, GvmType::Gvm1),
            Err(Error::NoDispersionData(CrystalId::Dkda))
        );
    }

    #[test]
    fn nondegenerate_kda() {
        let kda = rec(CrystalId::Kda);
        let sols = solve_gvm_nondegenerate(&kda, 0.520).unwrap();
        let s = sols[0];
        assert!((s.config.signal_um - 0.787).abs() < 0.005);
        assert!((s.config.idler_um - 1.531).abs() < 0.010);
        assert!((s.config.phi_deg - 45.1).abs() < 1.0);
        let c = s.config;
        let e = (1.0 / c.pump_um - 1.0 / c.signal_um - 1.0 / c.idler_um).abs() * c.pump_um;
        assert!(e < 1e-12);
    }

    #[test]
    fn config_invariants() {
        assert!(SpdcConfig::new(CrystalId::Kdp, 0.4, 0.8, 0.8, 60.0, 10.0).is_ok());
        assert!(SpdcConfig::new(CrystalId::Kdp, 0.4, 0.8, 0.81, 60.0, 10.0).is_err());
        assert!(SpdcConfig::new(CrystalId::Kdp, 0.4, 1.0, idler_from(0.4, 1.0), 60.0, 10.0).is_err());
        assert!(SpdcConfig::degenerate(CrystalId::Kdp, 0.4, 0.0, 10.0).is_err());
        assert!(SpdcConfig::degenerate(CrystalId::Kdp, 0.4, 60.0, 0.0).is_err());
    }

    #[test]
    fn map_nodes_match_direct_calls() {
        let adp = rec(CrystalId::Adp);
        let map = pmf_gvm_map(&adp, (0.38, 0.70), (40.0, 90.0), 9, 7).unwrap();
        for (r, &lp) in map.lambdas_um.iter().enumerate() {
            for (c, &phi) in map.phis_deg.iter().enumerate() {
                assert_eq!(map.delta_k[r][c], delta_k(&adp, lp, 2.0 * lp, 2.0 * lp, phi).unwrap());
                for t in GvmType::ALL {
                    let direct = gvm_residual(&adp, t, lp, 2.0 * lp, 2.0 * lp, phi).unwrap();
                    assert_eq!(map.gvm[t as usize][r][c], direct);
                }
            }
        }
    }
}
