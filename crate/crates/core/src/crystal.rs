//! Dispersion database for the KDP crystal family.
//!
//! Every crystal carries an ordinary and a principal-extraordinary Sellmeier
//! entry. The angle-dependent extraordinary index follows the uniaxial index
//! ellipsoid with `phi` measured from the optic axis. Wavelengths are in
//! micrometres throughout.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Samples used when checking range-wide invariants at load time.
const VALIDATION_SAMPLES: usize = 2001;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum CrystalId {
    Kdp,
    Dkdp,
    Adp,
    Dadp,
    Ada,
    Dada,
    Rda,
    Drda,
    Rdp,
    Drdp,
    Kda,
    Dkda,
    Cda,
    Dcda,
}

impl CrystalId {
    pub const ALL: [CrystalId; 14] = [
        CrystalId::Kdp,
        CrystalId::Dkdp,
        CrystalId::Adp,
        CrystalId::Dadp,
        CrystalId::Ada,
        CrystalId::Dada,
        CrystalId::Rda,
        CrystalId::Drda,
        CrystalId::Rdp,
        CrystalId::Drdp,
        CrystalId::Kda,
        CrystalId::Dkda,
        CrystalId::Cda,
        CrystalId::Dcda,
    ];

    pub fn name(self) -> &'static str {
        match self {
            CrystalId::Kdp => "KDP",
            CrystalId::Dkdp => "DKDP",
            CrystalId::Adp => "ADP",
            CrystalId::Dadp => "DADP",
            CrystalId::Ada => "ADA",
            CrystalId::Dada => "DADA",
            CrystalId::Rda => "RDA",
            CrystalId::Drda => "DRDA",
            CrystalId::Rdp => "RDP",
            CrystalId::Drdp => "DRDP",
            CrystalId::Kda => "KDA",
            CrystalId::Dkda => "DKDA",
            CrystalId::Cda => "CDA",
            CrystalId::Dcda => "DCDA",
        }
    }

    /// Deuterated isomorphs (the leading `D` of `DMDX`).
    pub fn is_deuterated(self) -> bool {
        self.name().starts_with('D')
    }

    /// Flags every database record for this crystal must carry.
    pub fn canonical_flags(self) -> CapabilityFlags {
        match self {
            CrystalId::Dkda => CapabilityFlags {
                no_dispersion_data: true,
                no_gvm_solution: false,
            },
            CrystalId::Cda | CrystalId::Dcda => CapabilityFlags {
                no_dispersion_data: false,
                no_gvm_solution: true,
            },
            _ => CapabilityFlags::default(),
        }
    }
}

impl fmt::Display for CrystalId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for CrystalId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let upper = s.trim().to_ascii_uppercase();
        CrystalId::ALL
            .into_iter()
            .find(|id| id.name() == upper)
            .ok_or_else(|| Error::Parse(format!("unknown crystal `{s}`")))
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct CapabilityFlags {
    /// No Sellmeier equation has been reported.
    pub no_dispersion_data: bool,
    /// Dispersion is known but none of the GVM conditions can be met.
    pub no_gvm_solution: bool,
}

impl CapabilityFlags {
    pub const NO_DISPERSION_DATA: &'static str = "no_dispersion_data";
    pub const NO_GVM_SOLUTION: &'static str = "no_gvm_solution";

    pub fn any(&self) -> bool {
        self.no_dispersion_data || self.no_gvm_solution
    }

    pub fn labels(&self) -> Vec<&'static str> {
        let mut out = Vec::new();
        if self.no_dispersion_data {
            out.push(Self::NO_DISPERSION_DATA);
        }
        if self.no_gvm_solution {
            out.push(Self::NO_GVM_SOLUTION);
        }
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Polarization {
    Ordinary,
    ExtraordinaryPrincipal,
}

impl Polarization {
    fn table_name(self) -> &'static str {
        match self {
            Polarization::Ordinary => "ordinary",
            Polarization::ExtraordinaryPrincipal => "extraordinary",
        }
    }
}

/// A ray inside the crystal: ordinary, or extraordinary at angle `phi_deg`
/// from the optic axis.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Ray {
    Ordinary,
    Extraordinary { phi_deg: f64 },
}

/// Registered Sellmeier functional forms, with `x = lambda^2` in um^2.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SellmeierForm {
    /// `n^2 = A + B/(x - C) + D x/(x - E)`; coefficients `[A, B, C, D, E]`.
    UvIr,
    /// `n^2 = A + B/(x - C) + D/(x - E)`; coefficients `[A, B, C, D, E]`.
    TwoPole,
    /// `n^2 = A + sum_k B_k x/(x - C_k)` with one to three resonances;
    /// coefficients `[A, B1, C1, B2, C2, B3, C3]` (trailing pairs optional).
    Generic,
}

impl SellmeierForm {
    pub fn id(self) -> &'static str {
        match self {
            SellmeierForm::UvIr => "uv-ir",
            SellmeierForm::TwoPole => "two-pole",
            SellmeierForm::Generic => "generic",
        }
    }

    fn accepts_len(self, len: usize) -> bool {
        match self {
            SellmeierForm::UvIr | SellmeierForm::TwoPole => len == 5,
            SellmeierForm::Generic => matches!(len, 3 | 5 | 7),
        }
    }

    /// Resonance positions in um^2.
    fn poles(self, c: &[f64]) -> Vec<f64> {
        match self {
            SellmeierForm::UvIr | SellmeierForm::TwoPole => vec![c[2], c[4]],
            SellmeierForm::Generic => c[1..].chunks(2).map(|p| p[1]).collect(),
        }
    }
}

impl FromStr for SellmeierForm {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "uv-ir" => Ok(SellmeierForm::UvIr),
            "two-pole" => Ok(SellmeierForm::TwoPole),
            "generic" => Ok(SellmeierForm::Generic),
            other => Err(format!(
                "unknown form `{other}` (registered: uv-ir, two-pole, generic)"
            )),
        }
    }
}

/// Where a coefficient set came from.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Provenance {
    /// Transcribed from a published handbook table.
    #[default]
    Handbook,
    /// Fitted to reported operating points because the handbook set was unavailable.
    Calibrated,
}

impl Provenance {
    pub fn label(self) -> &'static str {
        match self {
            Provenance::Handbook => "handbook",
            Provenance::Calibrated => "calibrated",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SellmeierEntry {
    pub polarization: Polarization,
    pub form: SellmeierForm,
    pub coefficients: Vec<f64>,
    /// `[min, max]` in um.
    pub valid_range: (f64, f64),
    pub provenance: Provenance,
    pub source: String,
}

impl SellmeierEntry {
    pub fn n_squared(&self, lambda_um: f64) -> f64 {
        let c = &self.coefficients;
        let x = lambda_um * lambda_um;
        match self.form {
            SellmeierForm::UvIr => c[0] + c[1] / (x - c[2]) + c[3] * x / (x - c[4]),
            SellmeierForm::TwoPole => c[0] + c[1] / (x - c[2]) + c[3] / (x - c[4]),
            SellmeierForm::Generic => {
                c[0] + c[1..]
                    .chunks(2)
                    .map(|p| p[0] * x / (x - p[1]))
                    .sum::<f64>()
            }
        }
    }

    /// d(n^2)/d(lambda), 1/um.
    pub fn dn_squared(&self, lambda_um: f64) -> f64 {
        let c = &self.coefficients;
        let x = lambda_um * lambda_um;
        let per_x = match self.form {
            SellmeierForm::UvIr => {
                -c[1] / (x - c[2]).powi(2) - c[3] * c[4] / (x - c[4]).powi(2)
            }
            SellmeierForm::TwoPole => -c[1] / (x - c[2]).powi(2) - c[3] / (x - c[4]).powi(2),
            SellmeierForm::Generic => c[1..]
                .chunks(2)
                .map(|p| -p[0] * p[1] / (x - p[1]).powi(2))
                .sum(),
        };
        2.0 * lambda_um * per_x
    }

    pub fn index(&self, lambda_um: f64) -> f64 {
        self.n_squared(lambda_um).sqrt()
    }

    /// dn/d(lambda), 1/um.
    pub fn dindex(&self, lambda_um: f64) -> f64 {
        self.dn_squared(lambda_um) / (2.0 * self.index(lambda_um))
    }

    pub fn contains(&self, lambda_um: f64) -> bool {
        lambda_um >= self.valid_range.0 && lambda_um <= self.valid_range.1
    }

    fn validate(&self, crystal: &str) -> Result<()> {
        let field = |f: &str| format!("{}.{f}", self.polarization.table_name());
        let invalid = |f: &str, reason: String| Error::Validation {
            crystal: crystal.to_string(),
            field: field(f),
            reason,
        };
        let (lo, hi) = self.valid_range;
        if !(lo.is_finite() && hi.is_finite()) || lo <= 0.0 {
            return Err(invalid("range", format!("[{lo}, {hi}] must be positive and finite")));
        }
        if lo >= hi {
            return Err(invalid("range", format!("inverted or empty range [{lo}, {hi}]")));
        }
        if !self.form.accepts_len(self.coefficients.len()) {
            return Err(invalid(
                "coefficients",
                format!(
                    "form `{}` does not take {} coefficients",
                    self.form.id(),
                    self.coefficients.len()
                ),
            ));
        }
        if let Some(bad) = self.coefficients.iter().find(|v| !v.is_finite()) {
            return Err(invalid("coefficients", format!("non-finite value {bad}")));
        }
        for pole in self.form.poles(&self.coefficients) {
            if pole > 0.0 && (lo * lo..=hi * hi).contains(&pole) {
                return Err(invalid(
                    "coefficients",
                    format!("resonance at {} um lies inside the valid range", pole.sqrt()),
                ));
            }
        }
        for k in 0..VALIDATION_SAMPLES {
            let lambda = lo + (hi - lo) * k as f64 / (VALIDATION_SAMPLES - 1) as f64;
            let n2 = self.n_squared(lambda);
            if !(n2.is_finite() && n2 > 1.0) {
                return Err(invalid(
                    "coefficients",
                    format!("n^2 = {n2} at {lambda} um (must exceed 1)"),
                ));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CrystalRecord {
    pub id: CrystalId,
    pub ordinary: Option<SellmeierEntry>,
    pub extraordinary: Option<SellmeierEntry>,
    /// Effective nonlinear coefficient per GVM label (pm/V); metadata only.
    pub d_eff: BTreeMap<String, f64>,
    pub flags: CapabilityFlags,
}

impl CrystalRecord {
    pub fn ordinary(&self) -> Result<&SellmeierEntry> {
        self.ordinary.as_ref().ok_or(Error::NoDispersionData(self.id))
    }

    pub fn extraordinary(&self) -> Result<&SellmeierEntry> {
        self.extraordinary
            .as_ref()
            .ok_or(Error::NoDispersionData(self.id))
    }

    /// Intersection of the ordinary and extraordinary validity ranges.
    pub fn valid_range(&self) -> Result<(f64, f64)> {
        let o = self.ordinary()?.valid_range;
        let e = self.extraordinary()?.valid_range;
        Ok((o.0.max(e.0), o.1.min(e.1)))
    }

    pub fn provenance(&self) -> Option<Provenance> {
        let o = self.ordinary.as_ref()?.provenance;
        let e = self.extraordinary.as_ref()?.provenance;
        Some(if o == Provenance::Handbook && e == Provenance::Handbook {
            Provenance::Handbook
        } else {
            Provenance::Calibrated
        })
    }

    fn check_range(&self, lambda_um: f64) -> Result<()> {
        let (lo, hi) = self.valid_range()?;
        if lambda_um.is_finite() && lambda_um >= lo && lambda_um <= hi {
            Ok(())
        } else {
            Err(Error::WavelengthOutOfRange {
                crystal: self.id,
                wavelength_um: lambda_um,
                min_um: lo,
                max_um: hi,
            })
        }
    }

    pub fn index_o(&self, lambda_um: f64) -> Result<f64> {
        self.check_range(lambda_um)?;
        Ok(self.ordinary()?.index(lambda_um))
    }

    /// Principal extraordinary index (propagation normal to the optic axis).
    pub fn index_e_principal(&self, lambda_um: f64) -> Result<f64> {
        self.check_range(lambda_um)?;
        Ok(self.extraordinary()?.index(lambda_um))
    }

    /// Extraordinary index at `phi_deg` from the optic axis:
    /// `1/n^2 = cos^2(phi)/n_o^2 + sin^2(phi)/n_e^2`.
    pub fn index_e(&self, lambda_um: f64, phi_deg: f64) -> Result<f64> {
        check_angle(phi_deg)?;
        self.check_range(lambda_um)?;
        let (n_o, n_e) = (
            self.ordinary()?.index(lambda_um),
            self.extraordinary()?.index(lambda_um),
        );
        Ok(ellipsoid_index(n_o, n_e, phi_deg.to_radians()))
    }

    pub fn index(&self, ray: Ray, lambda_um: f64) -> Result<f64> {
        match ray {
            Ray::Ordinary => self.index_o(lambda_um),
            Ray::Extraordinary { phi_deg } => self.index_e(lambda_um, phi_deg),
        }
    }

    /// dn/d(lambda) in 1/um, with `phi` held fixed for extraordinary rays.
    pub fn dindex(&self, ray: Ray, lambda_um: f64) -> Result<f64> {
        self.check_range(lambda_um)?;
        let o = self.ordinary()?;
        match ray {
            Ray::Ordinary => Ok(o.dindex(lambda_um)),
            Ray::Extraordinary { phi_deg } => {
                check_angle(phi_deg)?;
                let e = self.extraordinary()?;
                let (n_o, n_e) = (o.index(lambda_um), e.index(lambda_um));
                let phi = phi_deg.to_radians();
                let (c2, s2) = (phi.cos().powi(2), phi.sin().powi(2));
                let n = ellipsoid_index(n_o, n_e, phi);
                Ok(n.powi(3)
                    * (c2 * o.dindex(lambda_um) / n_o.powi(3)
                        + s2 * e.dindex(lambda_um) / n_e.powi(3)))
            }
        }
    }

    /// Group index `n - lambda dn/dlambda`.
    pub fn group_index(&self, ray: Ray, lambda_um: f64) -> Result<f64> {
        let (lo, hi) = self.valid_range()?;
        if lambda_um <= lo || lambda_um >= hi {
            return Err(if (lo..=hi).contains(&lambda_um) {
                Error::AtRangeEdge {
                    crystal: self.id,
                    wavelength_um: lambda_um,
                }
            } else {
                Error::WavelengthOutOfRange {
                    crystal: self.id,
                    wavelength_um: lambda_um,
                    min_um: lo,
                    max_um: hi,
                }
            });
        }
        Ok(self.index(ray, lambda_um)? - lambda_um * self.dindex(ray, lambda_um)?)
    }

    /// Inverse group velocity k'(omega) in s/m.
    pub fn inverse_group_velocity(&self, ray: Ray, lambda_um: f64) -> Result<f64> {
        Ok(self.group_index(ray, lambda_um)? / SPEED_OF_LIGHT)
    }

    fn validate(&self) -> Result<()> {
        let name = self.id.name();
        let canonical = self.id.canonical_flags();
        if self.flags != canonical {
            return Err(Error::Validation {
                crystal: name.into(),
                field: "flags".into(),
                reason: format!(
                    "expected {:?}, found {:?}",
                    canonical.labels(),
                    self.flags.labels()
                ),
            });
        }
        if self.flags.no_dispersion_data {
            if self.ordinary.is_some() || self.extraordinary.is_some() {
                return Err(Error::Validation {
                    crystal: name.into(),
                    field: "flags".into(),
                    reason: "declares no_dispersion_data but carries Sellmeier entries".into(),
                });
            }
        } else {
            for (entry, table) in [
                (&self.ordinary, "ordinary"),
                (&self.extraordinary, "extraordinary"),
            ] {
                match entry {
                    Some(e) => e.validate(name)?,
                    None => {
                        return Err(Error::Validation {
                            crystal: name.into(),
                            field: table.into(),
                            reason: "missing Sellmeier entry".into(),
                        })
                    }
                }
            }
        }
        for (label, value) in &self.d_eff {
            if !matches!(label.as_str(), "gvm1" | "gvm2" | "gvm3") {
                return Err(Error::Validation {
                    crystal: name.into(),
                    field: format!("d_eff.{label}"),
                    reason: "expected one of gvm1, gvm2, gvm3".into(),
                });
            }
            if !(value.is_finite() && *value > 0.0) {
                return Err(Error::Validation {
                    crystal: name.into(),
                    field: format!("d_eff.{label}"),
                    reason: format!("{value} pm/V is not a positive number"),
                });
            }
        }
        if !self.flags.any() {
            let (lo, hi) = self.valid_range()?;
            if lo >= hi {
                return Err(Error::Validation {
                    crystal: name.into(),
                    field: "range".into(),
                    reason: "ordinary and extraordinary ranges do not overlap".into(),
                });
            }
            let (o, e) = (self.ordinary()?, self.extraordinary()?);
            for k in 0..VALIDATION_SAMPLES {
                let lambda = lo + (hi - lo) * k as f64 / (VALIDATION_SAMPLES - 1) as f64;
                if o.index(lambda) <= e.index(lambda) {
                    return Err(Error::Validation {
                        crystal: name.into(),
                        field: "extraordinary".into(),
                        reason: format!("n_e >= n_o at {lambda} um (crystal must be negative uniaxial)"),
                    });
                }
            }
        }
        Ok(())
    }
}

fn check_angle(phi_deg: f64) -> Result<()> {
    if (0.0..=90.0).contains(&phi_deg) {
        Ok(())
    } else {
        Err(Error::AngleOutOfRange(phi_deg))
    }
}

fn ellipsoid_index(n_o: f64, n_e: f64, phi_rad: f64) -> f64 {
    let (c, s) = (phi_rad.cos(), phi_rad.sin());
    (c * c / (n_o * n_o) + s * s / (n_e * n_e)).sqrt().recip()
}

/// Validated, immutable crystal database.
#[derive(Clone, Debug, PartialEq)]
pub struct Database {
    pub version: String,
    records: BTreeMap<CrystalId, CrystalRecord>,
}

const BUILTIN_DATABASE: &str = include_str!("../../../data/crystals.toml");

impl Database {
    /// The database shipped with the crate.
    pub fn builtin() -> Database {
        Database::from_toml_str(BUILTIN_DATABASE).expect("shipped crystal database is valid")
    }

    pub fn builtin_source() -> &'static str {
        BUILTIN_DATABASE
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Database> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
            path: path.display().to_string(),
            reason: e.to_string(),
        })?;
        Database::from_toml_str(&text)
    }

    pub fn from_toml_str(text: &str) -> Result<Database> {
        let raw: RawDatabase = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        let mut records = BTreeMap::new();
        for crystal in raw.crystal {
            let record = crystal.into_record()?;
            record.validate()?;
            let id = record.id;
            if records.insert(id, record).is_some() {
                return Err(Error::Validation {
                    crystal: id.name().into(),
                    field: "name".into(),
                    reason: "duplicate crystal".into(),
                });
            }
        }
        Ok(Database {
            version: raw.version,
            records,
        })
    }

    pub fn to_toml_string(&self) -> String {
        let raw = RawDatabase {
            version: self.version.clone(),
            crystal: self.records.values().map(RawCrystal::from_record).collect(),
        };
        toml::to_string(&raw).expect("database serializes")
    }

    pub fn get(&self, id: CrystalId) -> Result<&CrystalRecord> {
        self.records
            .get(&id)
            .ok_or(Error::UnknownCrystal { crystal: id })
    }

    pub fn records(&self) -> impl Iterator<Item = &CrystalRecord> {
        self.records.values()
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn index_o(&self, id: CrystalId, lambda_um: f64) -> Result<f64> {
        self.get(id)?.index_o(lambda_um)
    }

    pub fn index_e(&self, id: CrystalId, lambda_um: f64, phi_deg: f64) -> Result<f64> {
        self.get(id)?.index_e(lambda_um, phi_deg)
    }

    pub fn inverse_group_velocity(&self, id: CrystalId, ray: Ray, lambda_um: f64) -> Result<f64> {
        self.get(id)?.inverse_group_velocity(ray, lambda_um)
    }
}

#[derive(Serialize, Deserialize)]
struct RawDatabase {
    version: String,
    #[serde(default)]
    crystal: Vec<RawCrystal>,
}

#[derive(Serialize, Deserialize)]
struct RawCrystal {
    name: String,
    #[serde(default)]
    flags: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    ordinary: Option<RawEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    extraordinary: Option<RawEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    d_eff: Option<BTreeMap<String, f64>>,
}

#[derive(Serialize, Deserialize)]
struct RawEntry {
    form: String,
    coefficients: Vec<f64>,
    range: [f64; 2],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    provenance: Option<String>,
    source: String,
}

impl RawCrystal {
    fn into_record(self) -> Result<CrystalRecord> {
        let id: CrystalId = self.name.parse().map_err(|_| Error::Validation {
            crystal: self.name.clone(),
            field: "name".into(),
            reason: "not a member of the KDP family".into(),
        })?;
        let mut flags = CapabilityFlags::default();
        for flag in &self.flags {
            match flag.as_str() {
                CapabilityFlags::NO_DISPERSION_DATA => flags.no_dispersion_data = true,
                CapabilityFlags::NO_GVM_SOLUTION => flags.no_gvm_solution = true,
                other => {
                    return Err(Error::Validation {
                        crystal: id.name().into(),
                        field: "flags".into(),
                        reason: format!("unknown flag `{other}`"),
                    })
                }
            }
        }
        let entry = |raw: Option<RawEntry>, pol: Polarization| -> Result<Option<SellmeierEntry>> {
            let Some(raw) = raw else { return Ok(None) };
            let invalid = |field: &str, reason: String| Error::Validation {
                crystal: id.name().into(),
                field: format!("{}.{field}", pol.table_name()),
                reason,
            };
            let form = raw.form.parse().map_err(|r| invalid("form", r))?;
            let provenance = match raw.provenance.as_deref() {
                None | Some("handbook") => Provenance::Handbook,
                Some("calibrated") => Provenance::Calibrated,
                Some(other) => {
                    return Err(invalid("provenance", format!("unknown provenance `{other}`")))
                }
            };
            Ok(Some(SellmeierEntry {
                polarization: pol,
                form,
                coefficients: raw.coefficients,
                valid_range: (raw.range[0], raw.range[1]),
                provenance,
                source: raw.source,
            }))
        };
        Ok(CrystalRecord {
            id,
            ordinary: entry(self.ordinary, Polarization::Ordinary)?,
            extraordinary: entry(self.extraordinary, Polarization::ExtraordinaryPrincipal)?,
            d_eff: self.d_eff.unwrap_or_default(),
            flags,
        })
    }

    fn from_record(record: &CrystalRecord) -> RawCrystal {
        let entry = |e: &Option<SellmeierEntry>| {
            e.as_ref().map(|e| RawEntry {
                form: e.form.id().into(),
                coefficients: e.coefficients.clone(),
                range: [e.valid_range.0, e.valid_range.1],
                provenance: Some(e.provenance.label().into()),
                source: e.source.clone(),
            })
        };
        RawCrystal {
            name: record.id.name().into(),
            flags: record.flags.labels().into_iter().map(String::from).collect(),
            ordinary: entry(&record.ordinary),
            extraordinary: entry(&record.extraordinary),
            d_eff: (!record.d_eff.is_empty()).then(|| record.d_eff.clone()),
        }
    }
}
