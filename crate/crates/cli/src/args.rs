use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use kdp_spdc::{CrystalId, GvmType};

/// Environment variable naming an alternative crystal database.
pub const DB_ENV: &str = "KDPGVM_DB";

#[derive(Parser, Debug, Clone)]
#[command(name = "kdpgvm", version, about = "Group-velocity-matched photon-pair design in KDP-isomorph crystals")]
pub struct Cli {
    /// Crystal database (TOML). Overrides $KDPGVM_DB and the built-in table.
    #[arg(long, global = true, value_name = "PATH")]
    pub db: Option<PathBuf>,

    #[arg(long, global = true, value_enum, default_value_t = Format::Text)]
    pub format: Format,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum Format {
    Text,
    Json,
}

#[derive(Subcommand, Debug, Clone)]
pub enum Command {
    /// List the crystals in the database.
    Crystals,
    /// Search for group-velocity-matched phase matching.
    Gvm(GvmArgs),
    /// Compute a joint spectral amplitude and write it as a grid file.
    Jsa(JsaArgs),
    /// Schmidt decomposition of a grid file.
    Purity(PurityArgs),
    /// Four-fold HOM interference between two grid files.
    Hom(HomArgs),
    /// Delta-k and GVM residual field over pump wavelength and angle.
    Map(MapArgs),
    /// Re-execute the command recorded in a run manifest.
    Rerun(RerunArgs),
}

#[derive(Args, Debug, Clone)]
pub struct GvmArgs {
    /// Search every crystal in the database.
    #[arg(long, conflicts_with = "crystal", required_unless_present = "crystal")]
    pub all: bool,

    #[arg(long)]
    pub crystal: Option<CrystalId>,

    /// Restrict to one condition (gvm1, gvm2, gvm3).
    #[arg(long = "type", value_name = "TYPE")]
    pub gvm_type: Option<GvmType>,

    /// Pump wavelength in nm for a nondegenerate search.
    #[arg(long, value_name = "NM", conflicts_with = "degenerate", required_unless_present = "degenerate")]
    pub pump: Option<f64>,

    /// Degenerate search over the pump wavelength.
    #[arg(long)]
    pub degenerate: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Bandwidth {
    Nm(f64),
    /// Maximize purity over the pump bandwidth.
    Auto,
}

impl std::str::FromStr for Bandwidth {
    type Err = String;

    fn from_str(s: &str) -> Result<Bandwidth, String> {
        if s.eq_ignore_ascii_case("auto") {
            return Ok(Bandwidth::Auto);
        }
        s.parse::<f64>()
            .map(Bandwidth::Nm)
            .map_err(|_| format!("expected a bandwidth in nm or `auto`, got `{s}`"))
    }
}

#[derive(Args, Debug, Clone)]
pub struct JsaArgs {
    #[arg(long)]
    pub crystal: CrystalId,

    /// Pump central wavelength, nm. Taken from the GVM solver when omitted
    /// together with --gvm.
    #[arg(long, value_name = "NM", required_unless_present = "gvm")]
    pub pump: Option<f64>,

    /// Signal central wavelength, nm (default: degenerate).
    #[arg(long, value_name = "NM", conflicts_with = "gvm")]
    pub signal: Option<f64>,

    /// Use the operating point of this GVM condition: degenerate, or
    /// nondegenerate at --pump.
    #[arg(long, value_name = "TYPE")]
    pub gvm: Option<GvmType>,

    /// Pump bandwidth in nm (sets sigma_p = 2 pi c dl / (l^2 - dl^2/4)), or
    /// `auto` to maximize purity.
    #[arg(long, value_name = "NM|auto")]
    pub bandwidth: Bandwidth,

    /// Crystal length, mm.
    #[arg(long, value_name = "MM")]
    pub length: f64,

    /// Phase-matching angle, degrees (default: solved).
    #[arg(long, value_name = "DEG", conflicts_with = "gvm")]
    pub angle: Option<f64>,

    /// Nodes per axis.
    #[arg(long, default_value_t = kdp_spdc::spectral::DEFAULT_NODES)]
    pub nodes: usize,

    /// Grid half-span per axis as a multiple of the JSA extent.
    #[arg(long, default_value_t = kdp_spdc::spectral::SPAN_FACTOR)]
    pub span_factor: f64,

    #[arg(long, short)]
    pub output: PathBuf,
}

#[derive(Args, Debug, Clone)]
pub struct PurityArgs {
    pub grid: PathBuf,
}

#[derive(Args, Debug, Clone)]
pub struct HomArgs {
    pub first: PathBuf,
    pub second: PathBuf,

    /// Half-range of the delay axis, fs (default: from the signal bandwidth).
    #[arg(long, value_name = "FS")]
    pub range: Option<f64>,

    #[arg(long, default_value_t = kdp_spdc::hom::DEFAULT_DELAYS)]
    pub delays: usize,

    #[arg(long, short)]
    pub output: PathBuf,
}

#[derive(Args, Debug, Clone)]
pub struct MapArgs {
    #[arg(long)]
    pub crystal: CrystalId,

    /// Pump range `MIN:MAX` in nm (default: solver scan range within the data).
    #[arg(long, value_name = "MIN:MAX")]
    pub lambda: Option<Range>,

    /// Angle range `MIN:MAX` in degrees.
    #[arg(long, value_name = "MIN:MAX", default_value = "1:89")]
    pub phi: Range,

    #[arg(long, default_value_t = 261)]
    pub lambda_nodes: usize,

    #[arg(long, default_value_t = 177)]
    pub phi_nodes: usize,

    #[arg(long, short)]
    pub output: PathBuf,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Range {
    pub min: f64,
    pub max: f64,
}

impl std::str::FromStr for Range {
    type Err = String;

    fn from_str(s: &str) -> Result<Range, String> {
        let (a, b) = s.split_once(':').ok_or_else(|| format!("expected MIN:MAX, got `{s}`"))?;
        let parse = |v: &str| v.trim().parse::<f64>().map_err(|_| format!("bad number `{v}` in `{s}`"));
        let (min, max) = (parse(a)?, parse(b)?);
        if !(min < max) {
            return Err(format!("range `{s}` is not ascending"));
        }
        Ok(Range { min, max })
    }
}

impl std::fmt::Display for Range {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}:{}", self.min, self.max)
    }
}

#[derive(Args, Debug, Clone)]
pub struct RerunArgs {
    pub manifest: PathBuf,

    /// Write the artifact here instead of the recorded path.
    #[arg(long, short)]
    pub output: Option<PathBuf>,
}
