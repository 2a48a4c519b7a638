//! Photon-pair source design for the KDP crystal family: dispersion data,
//! type-II phase and group-velocity matching, joint spectra, Schmidt purity
//! and four-fold Hong-Ou-Mandel interference.

pub mod crystal;
pub mod error;
pub mod hom;
pub mod phasematch;
pub mod roots;
pub mod spectral;

pub use crystal::{CrystalId, CrystalRecord, Database, Ray, SPEED_OF_LIGHT};
pub use error::{Error, Result};
pub use hom::HomCurve;
pub use phasematch::{GvmSolution, GvmType, SpdcConfig};
pub use spectral::{GridSpec, PumpSpec, SchmidtResult, SpectralGrid};
