use thiserror::Error;

use crate::crystal::CrystalId;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("cannot read {path}: {reason}")]
    Io { path: String, reason: String },

    #[error("database parse error: {0}")]
    Parse(String),

    #[error("invalid database entry for {crystal}, field `{field}`: {reason}")]
    Validation {
        crystal: String,
        field: String,
        reason: String,
    },

    #[error("{0} has no dispersion data")]
    NoDispersionData(CrystalId),

    #[error("{crystal} is not in the loaded database")]
    UnknownCrystal { crystal: CrystalId },

    #[error("wavelength {wavelength_um} um outside {crystal} validity range [{min_um}, {max_um}] um")]
    WavelengthOutOfRange {
        crystal: CrystalId,
        wavelength_um: f64,
        min_um: f64,
        max_um: f64,
    },

    #[error("wavelength {wavelength_um} um sits on the {crystal} range edge; group index needs an interior point")]
    AtRangeEdge { crystal: CrystalId, wavelength_um: f64 },

    #[error("propagation angle {0} deg outside [0, 90]")]
    AngleOutOfRange(f64),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("no phase matching on (0, 90) deg for {crystal} at {pump_um} -> {signal_um} + {idler_um} um")]
    NoPhaseMatching {
        crystal: CrystalId,
        pump_um: f64,
        signal_um: f64,
        idler_um: f64,
    },

    #[error("no solution: {0}")]
    NoSolution(String),

    #[error("ridge angle is indeterminate (pump matched to both daughters)")]
    Indeterminate,

    #[error("grid error: {0}")]
    Grid(String),

    #[error("delay range too narrow: P at the range ends deviates from 1/2 by {deviation:.3e}")]
    DelayRangeTooNarrow { deviation: f64 },
}
