use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use qe_core::catalog;
use qe_core::field::Backend;
use qe_core::report::{Sampling, SuiteReport};
use qe_core::suite::{run_limit, run_suite, ReportFormat, Suite, SuiteConfig, DEFAULT_EPS};

/// Directory for reports when `--out` is absent.
const OUT_DIR_ENV: &str = "QEVERIFY_OUT_DIR";

#[derive(Parser)]
#[command(name = "qeverify", version, about = "Verify quasi-Einstein and near-horizon geometry identities")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a verification suite.
    Verify {
        /// vacuum-static, lemma21, rigidity, gradient, nhg-limit, einstein-5d, matter, yamabe or all
        suite: String,
        /// Catalog geometry to check instead of the suite's defaults.
        #[arg(long)]
        geometry: Option<String>,
        /// Geometry file to check instead of the suite's defaults.
        #[arg(long)]
        spec: Option<PathBuf>,
        /// Sample axes that no field depends on.
        #[arg(long)]
        no_collapse: bool,
        #[command(flatten)]
        common: Common,
    },
    /// List catalog geometries.
    List,
    /// Describe a catalog geometry.
    Describe { name: String },
    /// Extrapolate the near-horizon limit of a Lorentzian catalog family.
    Limit {
        family: String,
        /// Strictly decreasing scaling parameters.
        #[arg(long, value_delimiter = ',')]
        eps: Option<Vec<f64>>,
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Args)]
struct Common {
    /// Parameter override `name=value`; repeatable.
    #[arg(long = "param", value_parser = parse_param)]
    params: Vec<(String, f64)>,
    /// Grid points per active axis.
    #[arg(long, default_value_t = 24)]
    grid: usize,
    /// Finite-difference step; implies `--backend fd`.
    #[arg(long)]
    h: Option<f64>,
    #[arg(long, value_enum)]
    backend: Option<BackendArg>,
    /// Tolerance override for every check.
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long, value_enum, default_value_t = FormatArg::Json)]
    report: FormatArg,
    /// Write the report here instead of standard output.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum BackendArg {
    Analytic,
    Fd,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Json,
    Text,
}

fn parse_param(s: &str) -> std::result::Result<(String, f64), String> {
    let (k, v) = s.split_once('=').ok_or_else(|| format!("expected name=value, got `{s}`"))?;
    let v: f64 = v.trim().parse().map_err(|e| format!("bad value for `{k}`: {e}"))?;
    Ok((k.trim().to_string(), v))
}

impl Common {
    fn backend(&self) -> Result<Backend> {
        match (self.backend, self.h) {
            (Some(BackendArg::Analytic), Some(_)) => bail!("--h needs the fd backend"),
            (Some(BackendArg::Analytic), None) | (None, None) => Ok(Backend::Analytic),
            (_, h) => Ok(Backend::FiniteDifference {
                h: h.unwrap_or(Backend::DEFAULT_STEP),
            }),
        }
    }

    fn format(&self) -> ReportFormat {
        match self.report {
            FormatArg::Json => ReportFormat::Json,
            FormatArg::Text => ReportFormat::Text,
        }
    }
}

fn main() -> ExitCode {
    env_logger::init();
    match run(Cli::parse()) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> Result<u8> {
    match cli.command {
        Command::List => {
            for item in catalog::list() {
                println!("{:<22} {}", item.name, item.summary);
            }
            Ok(0)
        }
        Command::Describe { name } => {
            print!("{}", catalog::describe(&name)?);
            Ok(0)
        }
        Command::Verify {
            suite,
            geometry,
            spec,
            no_collapse,
            common,
        } => {
            let config = SuiteConfig {
                suite: suite.parse::<Suite>()?,
                grid: common.grid,
                tolerance: common.tol,
                backend: common.backend()?,
                format: common.format(),
                geometry,
                params: common.params.clone(),
                spec,
                collapse_ignorable: !no_collapse,
            };
            let report = run_suite(&config).with_context(|| format!("suite `{suite}`"))?;
            emit(&report, config.format, common.out.as_deref())?;
            Ok(report.exit_code() as u8)
        }
        Command::Limit { family, eps, common } => {
            let config = SuiteConfig {
                grid: common.grid,
                tolerance: common.tol,
                backend: common.backend()?,
                ..SuiteConfig::new(Suite::NhgLimit)
            };
            config.validate()?;
            let sampling = Sampling {
                n: config.spacetime_sampling().n,
                ..config.sampling()
            };
            let eps = eps.unwrap_or_else(|| DEFAULT_EPS.to_vec());
            let report = run_limit(&family, &common.params, &eps, config.backend, &sampling)?;
            emit(&report, common.format(), common.out.as_deref())?;
            Ok(report.exit_code() as u8)
        }
    }
}

fn emit(report: &SuiteReport, format: ReportFormat, out: Option<&Path>) -> Result<()> {
    let (body, ext) = match format {
        ReportFormat::Json => (report.to_json(), "json"),
        ReportFormat::Text => (report.to_text(), "txt"),
    };
    let path = match (out, std::env::var_os(OUT_DIR_ENV)) {
        (Some(p), _) => Some(p.to_path_buf()),
        (None, Some(dir)) => Some(Path::new(&dir).join(format!("{}.{ext}", report.suite))),
        (None, None) => None,
    };
    match path {
        Some(p) => {
            if let Some(parent) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
            }
            std::fs::write(&p, ensure_newline(body)).with_context(|| format!("writing {}", p.display()))?;
            eprintln!("report written to {}", p.display());
        }
        None => print!("{}", ensure_newline(body)),
    }
    Ok(())
}

fn ensure_newline(mut s: String) -> String {
    if !s.ends_with('\n') {
        s.push('\n');
    }
    s
}
