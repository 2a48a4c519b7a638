//! Front end for the `kdpgvm` binary: argument parsing, database
//! resolution, artifact formats and run manifests.

pub mod args;
pub mod commands;
pub mod formats;
pub mod manifest;

use std::io::Write;
use std::path::Path;

use anyhow::{bail, Context as _, Result};
use clap::Parser;
use kdp_spdc::{Database, Error};

use args::{Cli, Command};
use commands::Context;
use manifest::{sha256_hex, DatabaseRef, RunManifest};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Outcome {
    Success,
    /// A search that was asked for a solution found none.
    NoSolution,
}

pub const EXIT_SUCCESS: i32 = 0;
pub const EXIT_NO_SOLUTION: i32 = 1;
pub const EXIT_INPUT: i32 = 2;

impl Outcome {
    pub fn exit_code(self) -> i32 {
        match self {
            Outcome::Success => EXIT_SUCCESS,
            Outcome::NoSolution => EXIT_NO_SOLUTION,
        }
    }
}

/// Exit code for a failed run: 1 when the computation had no solution,
/// 2 for everything else (input, IO, data).
pub fn error_exit_code(err: &anyhow::Error) -> i32 {
    let unsolved = err.chain().any(|cause| {
        matches!(
            cause.downcast_ref::<Error>(),
            Some(Error::NoSolution(_) | Error::NoPhaseMatching { .. })
        )
    });
    if unsolved {
        EXIT_NO_SOLUTION
    } else {
        EXIT_INPUT
    }
}

/// Loads `--db`, then `$KDPGVM_DB`, then the built-in table.
pub fn resolve_database(flag: Option<&Path>, env: Option<&str>) -> Result<(Database, DatabaseRef)> {
    let path = flag.map(Path::to_path_buf).or_else(|| env.filter(|v| !v.is_empty()).map(Into::into));
    match path {
        Some(path) => {
            let bytes = std::fs::read(&path).map_err(|e| Error::Io {
                path: path.display().to_string(),
                reason: e.to_string(),
            })?;
            let text = String::from_utf8(bytes.clone())
                .with_context(|| format!("{} is not UTF-8", path.display()))?;
            let db = Database::from_toml_str(&text).with_context(|| format!("loading {}", path.display()))?;
            let r = DatabaseRef {
                source: path.display().to_string(),
                sha256: sha256_hex(&bytes),
            };
            Ok((db, r))
        }
        None => Ok((
            Database::builtin(),
            DatabaseRef {
                source: "builtin".into(),
                sha256: sha256_hex(Database::builtin_source().as_bytes()),
            },
        )),
    }
}

/// Parses `args` (without the program name) and runs the command.
pub fn run_args(args: &[String], out: &mut dyn Write) -> Result<Outcome> {
    let cli = Cli::try_parse_from(std::iter::once("kdpgvm".to_string()).chain(args.iter().cloned()))?;
    run(cli, args.to_vec(), out)
}

pub fn run(cli: Cli, args: Vec<String>, out: &mut dyn Write) -> Result<Outcome> {
    run_checked(cli, args, None, out)
}

fn run_checked(cli: Cli, args: Vec<String>, expect_db: Option<&str>, out: &mut dyn Write) -> Result<Outcome> {
    let env = std::env::var(args::DB_ENV).ok();
    let (db, db_ref) = resolve_database(cli.db.as_deref(), env.as_deref())?;
    if let Some(want) = expect_db {
        if want != db_ref.sha256 {
            bail!(
                "database {} (sha256 {}) differs from the one recorded in the manifest ({want})",
                db_ref.source,
                db_ref.sha256
            );
        }
    }
    let ctx = Context {
        db,
        db_ref,
        format: cli.format,
        args,
    };
    match &cli.command {
        Command::Crystals => commands::crystals(&ctx, out),
        Command::Gvm(a) => commands::gvm(&ctx, a, out),
        Command::Jsa(a) => commands::jsa_cmd(&ctx, a, out),
        Command::Purity(a) => commands::purity(&ctx, a, out),
        Command::Hom(a) => commands::hom(&ctx, a, out),
        Command::Map(a) => commands::map(&ctx, a, out),
        Command::Rerun(a) => rerun(&a.manifest, a.output.as_deref(), out),
    }
}

/// Replaces the value of `--output`/`-o` in a recorded command line.
fn override_output(args: &[String], output: &Path) -> Result<Vec<String>> {
    let value = output.display().to_string();
    let mut out = Vec::with_capacity(args.len());
    let mut replaced = false;
    let mut it = args.iter();
    while let Some(a) = it.next() {
        if a == "--output" || a == "-o" {
            it.next();
            out.extend([a.clone(), value.clone()]);
            replaced = true;
        } else if a.starts_with("--output=") {
            out.push(format!("--output={value}"));
            replaced = true;
        } else {
            out.push(a.clone());
        }
    }
    if !replaced {
        bail!("recorded command has no --output to replace");
    }
    Ok(out)
}

fn rerun(path: &Path, output: Option<&Path>, out: &mut dyn Write) -> Result<Outcome> {
    let m = RunManifest::read(path)?;
    if m.tool != manifest::TOOL {
        bail!("{} was written by `{}`, not {}", path.display(), m.tool, manifest::TOOL);
    }
    if m.version != env!("CARGO_PKG_VERSION") {
        log::warn!("manifest version {} differs from {}", m.version, env!("CARGO_PKG_VERSION"));
    }
    let args = match output {
        Some(o) => override_output(&m.args, o)?,
        None => m.args.clone(),
    };
    let cli = Cli::try_parse_from(std::iter::once("kdpgvm".to_string()).chain(args.iter().cloned()))
        .with_context(|| format!("recorded command line in {} does not parse", path.display()))?;
    if matches!(cli.command, Command::Rerun(_)) {
        bail!("manifest records a rerun");
    }
    run_checked(cli, args, Some(&m.database.sha256), out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn output_override_replaces_both_spellings() {
        let args: Vec<String> = ["jsa", "--crystal", "KDP", "-o", "a.grid"].map(String::from).to_vec();
        let got = override_output(&args, Path::new("b.grid")).unwrap();
        assert_eq!(got[4], "b.grid");
        let args: Vec<String> = ["map", "--output=a.map"].map(String::from).to_vec();
        assert_eq!(override_output(&args, Path::new("b")).unwrap()[1], "--output=b");
        assert!(override_output(&["crystals".to_string()], Path::new("x")).is_err());
    }

    #[test]
    fn no_solution_errors_map_to_exit_one() {
        let e: anyhow::Error = Error::NoSolution("x".into()).into();
        assert_eq!(error_exit_code(&e), EXIT_NO_SOLUTION);
        let e = anyhow::Error::from(Error::Io {
            path: "p".into(),
            reason: "r".into(),
        })
        .context("outer");
        assert_eq!(error_exit_code(&e), EXIT_INPUT);
    }

    #[test]
    fn flag_beats_environment() {
        let (_, r) = resolve_database(None, None).unwrap();
        assert_eq!(r.source, "builtin");
        let (_, r) = resolve_database(None, Some("")).unwrap();
        assert_eq!(r.source, "builtin");
        let err = resolve_database(Some(Path::new("/nonexistent/a.toml")), Some("/also/missing.toml")).unwrap_err();
        assert!(err.to_string().contains("/nonexistent/a.toml"));
    }
}
