//! Plain-text artifact formats.
//!
//! Every file starts with `# key: value` header lines; the data rows follow
//! as comma-separated numbers. Floats are written in Rust's shortest
//! round-trip form (axes plain, field values in exponent notation), so a
//! re-read file reproduces the values bit for bit.
//! The byte-level layout is documented in `docs/formats.md`.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use anyhow::{bail, ensure, Context, Result};
use kdp_spdc::hom::HomCurve;
use kdp_spdc::phasematch::PmfGvmMap;
use kdp_spdc::spectral::{SpectralGrid, C64};
use nalgebra::DMatrix;

pub const FORMAT_VERSION: u32 = 1;
pub const GRID_MAGIC: &str = "# kdpgvm spectral grid";
pub const CURVE_MAGIC: &str = "# kdpgvm hom curve";
pub const MAP_MAGIC: &str = "# kdpgvm pmf-gvm map";

/// Header entries of a parsed artifact, in file order.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Header {
    pub entries: Vec<(String, String)>,
}

impl Header {
    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    fn require(&self, key: &str) -> Result<&str> {
        self.get(key).with_context(|| format!("missing header `{key}`"))
    }

    fn parse<T: std::str::FromStr>(&self, key: &str) -> Result<T> {
        let raw = self.require(key)?;
        raw.parse()
            .map_err(|_| anyhow::anyhow!("header `{key}` has a bad value `{raw}`"))
    }
}

fn push_header(out: &mut String, key: &str, value: impl std::fmt::Display) {
    writeln!(out, "# {key}: {value}").unwrap();
}

/// Splits text into header and data lines, checking the magic line.
fn split<'a>(text: &'a str, magic: &str) -> Result<(Header, Vec<(usize, &'a str)>)> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, first)) if first.trim_end() == magic => {}
        _ => bail!("not a `{}` file", magic.trim_start_matches("# ")),
    }
    let mut header = Header::default();
    let mut data = Vec::new();
    for (no, line) in lines {
        if let Some(rest) = line.strip_prefix('#') {
            ensure!(data.is_empty(), "line {}: header line after data", no + 1);
            let (k, v) = rest
                .split_once(':')
                .with_context(|| format!("line {}: header without `key: value`", no + 1))?;
            header.entries.push((k.trim().to_string(), v.trim().to_string()));
        } else if !line.trim().is_empty() {
            data.push((no + 1, line));
        }
    }
    let version: u32 = header.parse("format_version")?;
    ensure!(version == FORMAT_VERSION, "unsupported format_version {version}");
    Ok((header, data))
}

fn parse_row(no: usize, line: &str, expect: usize) -> Result<Vec<f64>> {
    let values = line
        .split(',')
        .map(|v| v.trim().parse::<f64>())
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(|e| anyhow::anyhow!("line {no}: {e}"))?;
    ensure!(
        values.len() == expect,
        "line {no}: expected {expect} values, found {}",
        values.len()
    );
    ensure!(values.iter().all(|v| v.is_finite()), "line {no}: non-finite value");
    Ok(values)
}

fn join(values: &[f64]) -> String {
    values.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(",")
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))
}

pub fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))
}

// ---- grid ----

pub fn grid_to_string(grid: &SpectralGrid, manifest_sha256: &str) -> String {
    let (ns, ni) = (grid.signal_um().len(), grid.idler_um().len());
    let mut out = String::with_capacity(ns * ni * 48);
    out.push_str(GRID_MAGIC);
    out.push('\n');
    push_header(&mut out, "format_version", FORMAT_VERSION);
    push_header(&mut out, "wavelength_unit", "um");
    push_header(&mut out, "amplitude_unit", "um^-1 (sum |f|^2 dls dli = 1)");
    push_header(&mut out, "signal_nodes", ns);
    push_header(&mut out, "idler_nodes", ni);
    push_header(&mut out, "normalized", grid.is_normalized());
    push_header(&mut out, "manifest_sha256", manifest_sha256);
    push_header(&mut out, "idler_um", join(grid.idler_um()));
    push_header(&mut out, "columns", "signal_um, then re,im for each idler node");
    let f = grid.amplitudes();
    for (r, s) in grid.signal_um().iter().enumerate() {
        out.push_str(&s.to_string());
        for c in 0..ni {
            let z = f[(r, c)];
            write!(out, ",{:e},{:e}", z.re, z.im).unwrap();
        }
        out.push('\n');
    }
    out
}

pub fn grid_from_str(text: &str) -> Result<(Header, SpectralGrid)> {
    let (header, data) = split(text, GRID_MAGIC)?;
    let unit = header.require("wavelength_unit")?;
    ensure!(unit == "um", "unsupported wavelength_unit `{unit}`");
    let ns: usize = header.parse("signal_nodes")?;
    let ni: usize = header.parse("idler_nodes")?;
    let flagged: bool = header.parse("normalized")?;
    let idler = parse_row(0, header.require("idler_um")?, ni).context("header `idler_um`")?;
    ensure!(data.len() == ns, "expected {ns} signal rows, found {}", data.len());
    let mut signal = Vec::with_capacity(ns);
    let mut flat = Vec::with_capacity(ns * ni);
    for (no, line) in data {
        let row = parse_row(no, line, 1 + 2 * ni)?;
        signal.push(row[0]);
        flat.extend(row[1..].chunks(2).map(|p| C64::new(p[0], p[1])));
    }
    let grid = SpectralGrid::new(signal, idler, DMatrix::from_row_slice(ns, ni, &flat))?;
    ensure!(
        grid.is_normalized() == flagged,
        "header says normalized = {flagged}, data has norm {}",
        grid.norm_squared()
    );
    Ok((header, grid))
}

pub fn read_grid(path: &Path) -> Result<(Header, SpectralGrid)> {
    grid_from_str(&read_text(path)?).with_context(|| format!("malformed grid file {}", path.display()))
}

// ---- HOM curve ----

pub const FS_PER_S: f64 = 1e15;

pub fn curve_to_string(curve: &HomCurve, visibility: f64, manifest_sha256: &str) -> String {
    let mut out = String::new();
    out.push_str(CURVE_MAGIC);
    out.push('\n');
    push_header(&mut out, "format_version", FORMAT_VERSION);
    push_header(&mut out, "delay_unit", "fs");
    push_header(&mut out, "probability_unit", "1");
    push_header(&mut out, "points", curve.delays_s.len());
    push_header(&mut out, "baseline", curve.baseline());
    push_header(&mut out, "minimum", curve.minimum());
    push_header(&mut out, "visibility", visibility);
    push_header(&mut out, "manifest_sha256", manifest_sha256);
    push_header(&mut out, "columns", "tau_fs,P");
    for (t, p) in curve.delays_s.iter().zip(&curve.probability) {
        writeln!(out, "{},{}", t * FS_PER_S, p).unwrap();
    }
    out
}

/// Parsed curve with delays in fs as written.
#[derive(Clone, Debug, PartialEq)]
pub struct CurveFile {
    pub header: Header,
    pub tau_fs: Vec<f64>,
    pub probability: Vec<f64>,
}

impl CurveFile {
    pub fn curve(&self) -> HomCurve {
        HomCurve {
            delays_s: self.tau_fs.iter().map(|t| t / FS_PER_S).collect(),
            probability: self.probability.clone(),
        }
    }
}

pub fn curve_from_str(text: &str) -> Result<CurveFile> {
    let (header, data) = split(text, CURVE_MAGIC)?;
    let n: usize = header.parse("points")?;
    ensure!(data.len() == n, "expected {n} points, found {}", data.len());
    let mut tau_fs = Vec::with_capacity(n);
    let mut probability = Vec::with_capacity(n);
    for (no, line) in data {
        let row = parse_row(no, line, 2)?;
        tau_fs.push(row[0]);
        probability.push(row[1]);
    }
    Ok(CurveFile {
        header,
        tau_fs,
        probability,
    })
}

pub fn read_curve(path: &Path) -> Result<CurveFile> {
    curve_from_str(&read_text(path)?).with_context(|| format!("malformed curve file {}", path.display()))
}

// ---- PMF / GVM map ----

pub fn map_to_string(map: &PmfGvmMap, manifest_sha256: &str) -> String {
    let mut out = String::new();
    out.push_str(MAP_MAGIC);
    out.push('\n');
    push_header(&mut out, "format_version", FORMAT_VERSION);
    push_header(&mut out, "crystal", map.crystal);
    push_header(&mut out, "lambda_nodes", map.lambdas_um.len());
    push_header(&mut out, "phi_nodes", map.phis_deg.len());
    push_header(&mut out, "units", "lambda_p_um=um phi_deg=deg delta_k=rad/um gvm=s/m");
    push_header(&mut out, "signal_idler", "degenerate (2 lambda_p)");
    push_header(&mut out, "manifest_sha256", manifest_sha256);
    push_header(&mut out, "columns", "lambda_p_um,phi_deg,delta_k,gvm1,gvm2,gvm3");
    for (r, lp) in map.lambdas_um.iter().enumerate() {
        for (c, phi) in map.phis_deg.iter().enumerate() {
            writeln!(
                out,
                "{},{},{:e},{:e},{:e},{:e}",
                lp, phi, map.delta_k[r][c], map.gvm[0][r][c], map.gvm[1][r][c], map.gvm[2][r][c]
            )
            .unwrap();
        }
    }
    out
}

/// Map file rows keyed by column name.
#[derive(Clone, Debug, PartialEq)]
pub struct MapFile {
    pub header: Header,
    pub columns: BTreeMap<String, Vec<f64>>,
}

pub fn map_from_str(text: &str) -> Result<MapFile> {
    let (header, data) = split(text, MAP_MAGIC)?;
    let n = header.parse::<usize>("lambda_nodes")? * header.parse::<usize>("phi_nodes")?;
    ensure!(data.len() == n, "expected {n} rows, found {}", data.len());
    let names: Vec<String> = header.require("columns")?.split(',').map(|s| s.trim().to_string()).collect();
    let mut cols: Vec<Vec<f64>> = vec![Vec::with_capacity(n); names.len()];
    for (no, line) in data {
        for (dst, v) in cols.iter_mut().zip(parse_row(no, line, names.len())?) {
            dst.push(v);
        }
    }
    Ok(MapFile {
        header,
        columns: names.into_iter().zip(cols).collect(),
    })
}

pub fn read_map(path: &Path) -> Result<MapFile> {
    map_from_str(&read_text(path)?).with_context(|| format!("malformed map file {}", path.display()))
}
