use std::io::Write;
use std::path::Path;
use std::time::Instant;

use anyhow::{bail, ensure, Context as _, Result};
use kdp_spdc::crystal::{CrystalRecord, Database};
use kdp_spdc::hom::{hom_auto_with, hom_fourfold, symmetric_delays};
use kdp_spdc::phasematch::{
    idler_from, pmf_gvm_map, ridge_angle, solve_angle, solve_gvm_degenerate, solve_gvm_nondegenerate, GvmSolution,
    GvmType, SolverSettings, SpdcConfig,
};
use kdp_spdc::spectral::{auto_grid_with, jsa, optimal_bandwidth, schmidt, PumpSpec};
use kdp_spdc::{CrystalId, Error};
use serde::Serialize;
use serde_json::json;

use crate::args::{Bandwidth, Format, GvmArgs, HomArgs, JsaArgs, MapArgs, PurityArgs};
use crate::formats;
use crate::manifest::{sha256_hex, DatabaseRef, RunManifest};
use crate::Outcome;

pub const NM_PER_UM: f64 = 1e3;

/// Search range for `--bandwidth auto`, um.
pub const AUTO_BANDWIDTH_RANGE_UM: (f64, f64) = (0.0002, 0.004);

/// Number of Schmidt coefficients listed by `purity`.
pub const LISTED_COEFFICIENTS: usize = 10;

pub struct Context {
    pub db: Database,
    pub db_ref: DatabaseRef,
    pub format: Format,
    /// Command line after the program name, recorded in manifests.
    pub args: Vec<String>,
}

fn nm_to_um(nm: f64) -> f64 {
    nm / NM_PER_UM
}

fn um_to_nm(um: f64) -> f64 {
    um * NM_PER_UM
}

fn print_json(out: &mut dyn Write, value: &impl Serialize) -> Result<()> {
    serde_json::to_writer_pretty(&mut *out, value)?;
    writeln!(out)?;
    Ok(())
}

// ---- crystals ----

#[derive(Serialize)]
struct CrystalRow {
    crystal: String,
    deuterated: bool,
    range_nm: Option<[f64; 2]>,
    provenance: Option<&'static str>,
    flags: Vec<&'static str>,
}

pub fn crystals(ctx: &Context, out: &mut dyn Write) -> Result<Outcome> {
    let rows: Vec<CrystalRow> = ctx
        .db
        .records()
        .map(|r| CrystalRow {
            crystal: r.id.to_string(),
            deuterated: r.id.is_deuterated(),
            range_nm: r.valid_range().ok().map(|(lo, hi)| [um_to_nm(lo), um_to_nm(hi)]),
            provenance: r.provenance().map(|p| p.label()),
            flags: r.flags.labels(),
        })
        .collect();
    match ctx.format {
        Format::Json => print_json(out, &rows)?,
        Format::Text => {
            writeln!(out, "{:<6} {:<10} {:<16} {:<11} flags", "name", "deuterated", "range_nm", "provenance")?;
            for r in &rows {
                let range = r
                    .range_nm
                    .map(|[a, b]| format!("{a:.0}-{b:.0}"))
                    .unwrap_or_else(|| "-".into());
                let flags = if r.flags.is_empty() { "-".to_string() } else { r.flags.join(",") };
                writeln!(
                    out,
                    "{:<6} {:<10} {:<16} {:<11} {}",
                    r.crystal,
                    if r.deuterated { "yes" } else { "no" },
                    range,
                    r.provenance.unwrap_or("-"),
                    flags
                )?;
            }
        }
    }
    Ok(Outcome::Success)
}

// ---- gvm ----

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RowStatus {
    Solved,
    NotSatisfied,
    NoDispersionData,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GvmRow {
    pub crystal: String,
    #[serde(rename = "type")]
    pub gvm_type: &'static str,
    pub status: RowStatus,
    pub provenance: Option<&'static str>,
    pub pump_nm: Option<f64>,
    pub signal_nm: Option<f64>,
    pub idler_nm: Option<f64>,
    pub phi_deg: Option<f64>,
    pub theta_deg: Option<f64>,
    /// rad/um
    pub residual_delta_k: Option<f64>,
    /// s/m
    pub residual_gvm: Option<f64>,
}

impl GvmRow {
    fn empty(record: &CrystalRecord, gvm_type: GvmType, status: RowStatus) -> GvmRow {
        GvmRow {
            crystal: record.id.to_string(),
            gvm_type: gvm_type.label(),
            status,
            provenance: record.provenance().map(|p| p.label()),
            pump_nm: None,
            signal_nm: None,
            idler_nm: None,
            phi_deg: None,
            theta_deg: None,
            residual_delta_k: None,
            residual_gvm: None,
        }
    }

    fn solved(record: &CrystalRecord, s: &GvmSolution) -> GvmRow {
        GvmRow {
            pump_nm: Some(um_to_nm(s.config.pump_um)),
            signal_nm: Some(um_to_nm(s.config.signal_um)),
            idler_nm: Some(um_to_nm(s.config.idler_um)),
            phi_deg: Some(s.config.phi_deg),
            theta_deg: Some(s.ridge_angle_deg),
            residual_delta_k: Some(s.residual_delta_k),
            residual_gvm: Some(s.residual_gvm),
            ..GvmRow::empty(record, s.gvm_type, RowStatus::Solved)
        }
    }
}

/// Solver rows for `crystals` x `types`: degenerate when `pump_um` is
/// `None`, otherwise nondegenerate at that pump.
pub fn gvm_rows(db: &Database, crystals: &[CrystalId], types: &[GvmType], pump_um: Option<f64>) -> Result<Vec<GvmRow>> {
    let mut rows = Vec::new();
    for &id in crystals {
        let record = db.get(id)?;
        for &t in types {
            if record.flags.no_dispersion_data {
                rows.push(GvmRow::empty(record, t, RowStatus::NoDispersionData));
                continue;
            }
            let found = match pump_um {
                None => solve_gvm_degenerate(record, t),
                Some(lp) if t == GvmType::Gvm1 => solve_gvm_nondegenerate(record, lp),
                Some(_) => Err(Error::InvalidConfig(format!(
                    "nondegenerate search supports {} only",
                    GvmType::Gvm1
                ))),
            };
            match found {
                Ok(solutions) => rows.extend(solutions.iter().map(|s| GvmRow::solved(record, s))),
                Err(Error::NoSolution(_)) => rows.push(GvmRow::empty(record, t, RowStatus::NotSatisfied)),
                Err(e) => return Err(e.into()),
            }
        }
    }
    Ok(rows)
}

fn fmt_opt(v: Option<f64>, prec: usize) -> String {
    v.map(|x| format!("{x:.prec$}")).unwrap_or_default()
}

pub fn gvm(ctx: &Context, a: &GvmArgs, out: &mut dyn Write) -> Result<Outcome> {
    let crystals: Vec<CrystalId> = match a.crystal {
        Some(id) => vec![id],
        None => ctx.db.records().map(|r| r.id).collect(),
    };
    let types: Vec<GvmType> = match (a.gvm_type, a.pump) {
        (Some(t), _) => vec![t],
        (None, None) => GvmType::ALL.to_vec(),
        // Away from degeneracy only the pump-signal condition is searched.
        (None, Some(_)) => vec![GvmType::Gvm1],
    };
    let start = Instant::now();
    let rows = gvm_rows(&ctx.db, &crystals, &types, a.pump.map(nm_to_um))?;
    log::info!("gvm search: {} rows in {:.3} s", rows.len(), start.elapsed().as_secs_f64());
    match ctx.format {
        Format::Json => print_json(out, &rows)?,
        Format::Text => {
            writeln!(
                out,
                "{:<6} {:<5} {:>9} {:>9} {:>9} {:>7} {:>8} {:>10} {:>10}  provenance",
                "name", "type", "pump_nm", "signal_nm", "idler_nm", "phi_deg", "theta", "dk_rad/um", "gvm_s/m"
            )?;
            for r in &rows {
                let provenance = r.provenance.unwrap_or("-");
                match r.status {
                    RowStatus::Solved => writeln!(
                        out,
                        "{:<6} {:<5} {:>9} {:>9} {:>9} {:>7} {:>8} {:>10.1e} {:>10.1e}  {}",
                        r.crystal,
                        r.gvm_type,
                        fmt_opt(r.pump_nm, 2),
                        fmt_opt(r.signal_nm, 2),
                        fmt_opt(r.idler_nm, 2),
                        fmt_opt(r.phi_deg, 2),
                        fmt_opt(r.theta_deg, 3),
                        r.residual_delta_k.unwrap_or(f64::NAN),
                        r.residual_gvm.unwrap_or(f64::NAN),
                        provenance
                    )?,
                    RowStatus::NotSatisfied => writeln!(
                        out,
                        "{:<6} {:<5} {:<67}  {}",
                        r.crystal,
                        r.gvm_type,
                        "not satisfied",
                        provenance
                    )?,
                    RowStatus::NoDispersionData => writeln!(
                        out,
                        "{:<6} {:<5} no dispersion data",
                        r.crystal,
                        r.gvm_type
                    )?,
                }
            }
        }
    }
    if rows.iter().any(|r| r.status == RowStatus::Solved) {
        Ok(Outcome::Success)
    } else {
        Ok(Outcome::NoSolution)
    }
}

// ---- jsa ----

/// Operating point chosen from the jsa flags.
pub fn jsa_config(record: &CrystalRecord, a: &JsaArgs) -> Result<SpdcConfig> {
    ensure!(a.length > 0.0, "--length must be positive");
    let config = match (a.gvm, a.pump.map(nm_to_um)) {
        (Some(t), None) => first_solution(solve_gvm_degenerate(record, t), record.id, t)?,
        (Some(t), Some(lp)) => {
            ensure!(
                t == GvmType::Gvm1,
                "nondegenerate operating points exist for {} only",
                GvmType::Gvm1
            );
            first_solution(solve_gvm_nondegenerate(record, lp), record.id, t)?
        }
        (None, Some(lp)) => {
            let ls = a.signal.map(nm_to_um).unwrap_or(2.0 * lp);
            let li = idler_from(lp, ls);
            let phi = match a.angle {
                Some(phi) => phi,
                None => solve_angle(record, lp, ls, li)?,
            };
            SpdcConfig::new(record.id, lp, ls, li, phi, a.length)?
        }
        (None, None) => bail!("jsa needs --pump or --gvm"),
    };
    Ok(config.with_length(a.length)?)
}

fn first_solution(found: kdp_spdc::Result<Vec<GvmSolution>>, id: CrystalId, t: GvmType) -> Result<SpdcConfig> {
    let solutions = found?;
    if solutions.len() > 1 {
        log::warn!("{id} {t}: {} operating points, using the first", solutions.len());
    }
    match solutions.first() {
        Some(s) => Ok(s.config),
        None => Err(Error::NoSolution(format!("{id} {t}")).into()),
    }
}

#[derive(Serialize)]
struct JsaReport {
    output: String,
    manifest: String,
    purity: f64,
    schmidt_number: f64,
    bandwidth_nm: f64,
    phi_deg: f64,
}

pub fn jsa_cmd(ctx: &Context, a: &JsaArgs, out: &mut dyn Write) -> Result<Outcome> {
    let record = ctx.db.get(a.crystal)?;
    let config = jsa_config(record, a)?;
    let bandwidth_um = match a.bandwidth {
        Bandwidth::Nm(nm) => nm_to_um(nm),
        Bandwidth::Auto => {
            let (bw, p) = optimal_bandwidth(record, &config, AUTO_BANDWIDTH_RANGE_UM, a.nodes)?;
            log::info!("purity-optimal bandwidth {:.4} nm (P = {p:.6})", um_to_nm(bw));
            bw
        }
    };
    let pump = PumpSpec::new(config.pump_um, bandwidth_um)?;
    let spec = auto_grid_with(record, &config, &pump, a.nodes, a.span_factor)?;
    let start = Instant::now();
    let grid = jsa(record, &config, &pump, &spec)?;
    let result = schmidt(&grid)?;
    log::info!("jsa + schmidt in {:.3} s", start.elapsed().as_secs_f64());

    let params = json!({
        "crystal": config.crystal.to_string(),
        "pump_nm": um_to_nm(config.pump_um),
        "signal_nm": um_to_nm(config.signal_um),
        "idler_nm": um_to_nm(config.idler_um),
        "phi_deg": config.phi_deg,
        "length_mm": config.length_mm,
        "bandwidth_nm": um_to_nm(bandwidth_um),
        "bandwidth_mode": if a.bandwidth == Bandwidth::Auto { "auto" } else { "given" },
        "gvm": a.gvm.map(|t| t.label()),
        "nodes": a.nodes,
        "span_factor": a.span_factor,
        "grid_um": {
            "signal_center": spec.signal.center_um,
            "signal_half_span": spec.signal.half_span_um,
            "idler_center": spec.idler.center_um,
            "idler_half_span": spec.idler.half_span_um,
        },
    });
    let mut manifest = RunManifest::new("jsa", ctx.args.clone(), params, ctx.db_ref.clone(), &a.output);
    manifest.results = json!({
        "purity": result.purity,
        "schmidt_number": result.schmidt_number,
        "ridge_angle_deg": ridge_angle(record, &config).ok(),
    });
    formats::write_text(&a.output, &formats::grid_to_string(&grid, &manifest.sha256))?;
    let manifest_path = manifest.write()?;

    let report = JsaReport {
        output: a.output.display().to_string(),
        manifest: manifest_path.display().to_string(),
        purity: result.purity,
        schmidt_number: result.schmidt_number,
        bandwidth_nm: um_to_nm(bandwidth_um),
        phi_deg: config.phi_deg,
    };
    match ctx.format {
        Format::Json => print_json(out, &report)?,
        Format::Text => {
            writeln!(
                out,
                "{} {:.2} nm -> {:.2} + {:.2} nm, phi {:.3} deg, L {} mm, pump bandwidth {:.4} nm",
                config.crystal,
                um_to_nm(config.pump_um),
                um_to_nm(config.signal_um),
                um_to_nm(config.idler_um),
                config.phi_deg,
                config.length_mm,
                report.bandwidth_nm
            )?;
            writeln!(out, "P = {:.6}", result.purity)?;
            writeln!(out, "K = {:.6}", result.schmidt_number)?;
            writeln!(out, "wrote {}", report.output)?;
        }
    }
    Ok(Outcome::Success)
}

// ---- purity ----

#[derive(Serialize)]
struct PurityReport {
    purity: f64,
    schmidt_number: f64,
    coefficient_sum: f64,
    leading_coefficients: Vec<f64>,
}

pub fn purity(ctx: &Context, a: &PurityArgs, out: &mut dyn Write) -> Result<Outcome> {
    let (_, grid) = formats::read_grid(&a.grid)?;
    let r = schmidt(&grid)?;
    let report = PurityReport {
        purity: r.purity,
        schmidt_number: r.schmidt_number,
        coefficient_sum: r.coefficients.iter().sum(),
        leading_coefficients: r.coefficients.iter().take(LISTED_COEFFICIENTS).copied().collect(),
    };
    match ctx.format {
        Format::Json => print_json(out, &report)?,
        Format::Text => {
            writeln!(out, "P = {:.6}", report.purity)?;
            writeln!(out, "K = {:.6}", report.schmidt_number)?;
            writeln!(out, "sum of coefficients = {:.12}", report.coefficient_sum)?;
            for (k, c) in report.leading_coefficients.iter().enumerate() {
                writeln!(out, "lambda_{k} = {c:.6e}")?;
            }
        }
    }
    Ok(Outcome::Success)
}

// ---- hom ----

fn file_sha256(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).with_context(|| format!("cannot read {}", path.display()))?;
    Ok(sha256_hex(&bytes))
}

#[derive(Serialize)]
struct HomReport {
    output: String,
    visibility: f64,
    baseline: f64,
    minimum: f64,
    half_range_fs: f64,
    resampled: bool,
}

pub fn hom(ctx: &Context, a: &HomArgs, out: &mut dyn Write) -> Result<Outcome> {
    let (_, f1) = formats::read_grid(&a.first)?;
    let (_, f2) = formats::read_grid(&a.second)?;
    let resampled = f1.signal_um() != f2.signal_um();
    let f2 = if resampled {
        log::warn!(
            "{}: signal axis differs from {}; resampling by linear interpolation",
            a.second.display(),
            a.first.display()
        );
        f2.resample_signal(f1.signal_um())?
    } else {
        f2
    };
    let start = Instant::now();
    let curve = match a.range {
        Some(fs) => {
            ensure!(fs > 0.0, "--range must be positive");
            ensure!(a.delays >= 3, "--delays must be at least 3");
            hom_fourfold(&f1, &f2, &symmetric_delays(fs / formats::FS_PER_S, a.delays))?
        }
        None => hom_auto_with(&f1, &f2, a.delays)?,
    };
    let v = curve.visibility()?;
    log::info!("hom curve in {:.3} s", start.elapsed().as_secs_f64());
    let half_range_fs = curve.delays_s.last().copied().unwrap_or(0.0) * formats::FS_PER_S;

    let params = json!({
        "first_sha256": file_sha256(&a.first)?,
        "second_sha256": file_sha256(&a.second)?,
        "delays": a.delays,
        "range_fs": a.range,
        "half_range_fs": half_range_fs,
        "resampled": resampled,
    });
    let mut manifest = RunManifest::new("hom", ctx.args.clone(), params, ctx.db_ref.clone(), &a.output);
    manifest.results = json!({ "visibility": v, "baseline": curve.baseline(), "minimum": curve.minimum() });
    formats::write_text(&a.output, &formats::curve_to_string(&curve, v, &manifest.sha256))?;
    manifest.write()?;

    let report = HomReport {
        output: a.output.display().to_string(),
        visibility: v,
        baseline: curve.baseline(),
        minimum: curve.minimum(),
        half_range_fs,
        resampled,
    };
    match ctx.format {
        Format::Json => print_json(out, &report)?,
        Format::Text => {
            writeln!(out, "V = {:.6}", v)?;
            writeln!(out, "baseline = {:.6}, minimum = {:.6}", report.baseline, report.minimum)?;
            writeln!(out, "delays +-{:.1} fs, {} points", half_range_fs, curve.delays_s.len())?;
            writeln!(out, "wrote {}", report.output)?;
        }
    }
    Ok(Outcome::Success)
}

// ---- map ----

/// Default pump range: the solver scan window inside the data, with both
/// the pump and the degenerate daughters strictly interior.
pub fn default_map_range(record: &CrystalRecord) -> Result<(f64, f64)> {
    let (lo, hi) = record.valid_range()?;
    let scan = SolverSettings::default().pump_scan;
    let margin = 1e-3;
    let range = (scan.0.max(lo + margin), scan.1.min(hi / 2.0 - margin));
    ensure!(range.0 < range.1, "{} data range leaves no degenerate pump window", record.id);
    Ok(range)
}

#[derive(Serialize)]
struct MapCrossings {
    #[serde(rename = "type")]
    gvm_type: &'static str,
    /// (pump nm, phi deg) where the delta-k and GVM zero contours cross.
    map: Vec<[f64; 2]>,
    solver: Vec<[f64; 2]>,
}

pub fn map(ctx: &Context, a: &MapArgs, out: &mut dyn Write) -> Result<Outcome> {
    let record = ctx.db.get(a.crystal)?;
    let lambda_um = match a.lambda {
        Some(r) => (nm_to_um(r.min), nm_to_um(r.max)),
        None => default_map_range(record)?,
    };
    let field = pmf_gvm_map(record, lambda_um, (a.phi.min, a.phi.max), a.lambda_nodes, a.phi_nodes)?;
    let crossings: Vec<MapCrossings> = GvmType::ALL
        .iter()
        .map(|&t| MapCrossings {
            gvm_type: t.label(),
            map: field
                .crossings(t)
                .into_iter()
                .map(|(lp, phi)| [um_to_nm(lp), phi])
                .collect(),
            solver: solve_gvm_degenerate(record, t)
                .unwrap_or_default()
                .iter()
                .map(|s| [um_to_nm(s.config.pump_um), s.config.phi_deg])
                .collect(),
        })
        .collect();

    let params = json!({
        "crystal": record.id.to_string(),
        "lambda_um": [lambda_um.0, lambda_um.1],
        "phi_deg": [a.phi.min, a.phi.max],
        "lambda_nodes": a.lambda_nodes,
        "phi_nodes": a.phi_nodes,
    });
    let mut manifest = RunManifest::new("map", ctx.args.clone(), params, ctx.db_ref.clone(), &a.output);
    manifest.results = json!({ "crossings": crossings });
    formats::write_text(&a.output, &formats::map_to_string(&field, &manifest.sha256))?;
    manifest.write()?;

    match ctx.format {
        Format::Json => print_json(out, &crossings)?,
        Format::Text => {
            for c in &crossings {
                let show = |v: &[[f64; 2]]| {
                    if v.is_empty() {
                        "none".to_string()
                    } else {
                        v.iter().map(|[l, p]| format!("{l:.1} nm/{p:.2} deg")).collect::<Vec<_>>().join(", ")
                    }
                };
                writeln!(out, "{}: map {}; solver {}", c.gvm_type, show(&c.map), show(&c.solver))?;
            }
            writeln!(out, "wrote {}", a.output.display())?;
        }
    }
    Ok(Outcome::Success)
}
