//! Command-line front end.
//!
//! Exit codes: 0 on success, 1 when any certificate or invariant fails, 2 on
//! invalid arguments.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harness::{self, ExperimentSpec, WidthMode};
use crate::output::fmt_f64;
use crate::state::ChainConfig;
use crate::transport::{self, InitialState};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILED: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "qudit-sim", version, about = "Charge-conserving brickwork circuits on qudit chains")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Entropy growth sweep: R_alpha, R_inf, certificate bound and bulk charge per time step.
    Simulate(Options),
    /// Per-time certificates of the entropy bound.
    Certify(Options),
    /// Enumerate the central X-basis family and measure the Markov subset.
    Sprime(Options),
    /// Ensemble-averaged charge profiles and bulk-charge decay fit.
    Transport(Options),
    /// Quick invariant suite.
    Selftest(Options),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

/// Flags shared by every subcommand. A JSON file given by `--config` may set
/// any of them; flags on the command line take precedence.
#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Options {
    /// Number of sites (even).
    #[arg(long = "N")]
    #[serde(rename = "N")]
    pub sites: Option<usize>,
    /// Local dimension.
    #[arg(long)]
    pub d: Option<usize>,
    /// Number of circuit layers.
    #[arg(long)]
    pub depth: Option<usize>,
    /// Width of the central region (even). Without it, m(t) follows the scaling rule.
    #[arg(long)]
    pub m: Option<usize>,
    /// Rényi index (> 1).
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub realizations: Option<usize>,
    /// Degree of p(t) = t^degree.
    #[arg(long = "p-degree")]
    #[serde(rename = "p-degree", alias = "p_degree")]
    pub p_degree: Option<u32>,
    /// Coefficient c of m(t) = even-ceil(c sqrt(t ln t)).
    #[arg(long = "scaling-c")]
    #[serde(rename = "scaling-c", alias = "scaling_c")]
    pub scaling_c: Option<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    /// JSON file mirroring these flags.
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
}

macro_rules! merge_fields {
    ($dst:ident, $src:ident, $($f:ident),*) => {
        $( if $dst.$f.is_none() { $dst.$f = $src.$f.clone(); } )*
    };
}

impl Options {
    fn resolve(mut self) -> Result<Self> {
        if let Some(path) = &self.config {
            let file: Options = serde_json::from_str(&fs::read_to_string(path)?)?;
            merge_fields!(self, file, sites, d, depth, m, alpha, seed, realizations, p_degree, scaling_c, out, format);
        }
        Ok(self)
    }

    fn chain(&self) -> Result<ChainConfig> {
        ChainConfig::new(self.sites.unwrap_or(10), self.d.unwrap_or(2), self.seed.unwrap_or(0))
    }

    fn mode(&self) -> WidthMode {
        match (self.m, self.scaling_c) {
            (Some(m), None) => WidthMode::Fixed(m),
            (_, c) => WidthMode::Scaling { c: c.unwrap_or(2.0) },
        }
    }

    fn experiment(&self) -> Result<ExperimentSpec> {
        if self.m.is_some() && self.scaling_c.is_some() {
            return Err(Error::Domain("--m and --scaling-c are mutually exclusive".into()));
        }
        let spec =
            ExperimentSpec::new(self.chain()?, self.depth.unwrap_or(10), self.mode(), self.alpha.unwrap_or(2.0))?
                .with_realizations(self.realizations.unwrap_or(1))
                .with_p_degree(self.p_degree.unwrap_or(2));
        spec.validate()?;
        Ok(spec)
    }

    fn format(&self) -> Format {
        self.format.unwrap_or(Format::Csv)
    }
}

fn emit(opts: &Options, stdout: &mut dyn Write, body: &[u8]) -> Result<()> {
    match &opts.out {
        Some(path) => fs::write(path, body)?,
        None => stdout.write_all(body)?,
    }
    Ok(())
}

fn certify(opts: &Options, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<i32> {
    let spec = opts.experiment()?;
    let certs = harness::run_certify(&spec)?;
    let mut body = Vec::new();
    match opts.format() {
        Format::Csv => harness::write_certificates_csv(&mut body, &certs)?,
        Format::Json => serde_json::to_writer_pretty(&mut body, &certs)?,
    }
    emit(opts, stdout, &body)?;
    let failed = certs.iter().filter(|c| !c.holds).count();
    if failed > 0 {
        writeln!(stderr, "{failed} of {} certificates failed", certs.len())?;
        return Ok(EXIT_FAILED);
    }
    Ok(EXIT_OK)
}

fn simulate(opts: &Options, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<i32> {
    let spec = opts.experiment()?;
    let report = harness::entropy_growth_sweep(&spec)?;
    let mut body = Vec::new();
    match opts.format() {
        Format::Csv => harness::write_sweep_csv(&mut body, &report.records)?,
        Format::Json => serde_json::to_writer_pretty(&mut body, &report)?,
    }
    emit(opts, stdout, &body)?;
    let violated = report.records.iter().filter(|r| r.r_alpha > r.bound + spec.slack).count();
    if violated > 0 {
        writeln!(stderr, "{violated} records exceed their certificate bound")?;
        return Ok(EXIT_FAILED);
    }
    Ok(EXIT_OK)
}

fn sprime(opts: &Options, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<i32> {
    let spec = opts.experiment()?;
    let mut reports = Vec::new();
    for r in 0..spec.realizations {
        for t in 0..=spec.depth {
            let mut rep = harness::enumerate_s_prime(&spec, t, r)?;
            if opts.format() == Format::Csv {
                rep.overlaps.clear();
            }
            reports.push((r, rep));
        }
    }
    let mut body = Vec::new();
    match opts.format() {
        Format::Csv => {
            let mut w = csv::Writer::from_writer(&mut body);
            w.write_record([
                "realization",
                "t",
                "m",
                "p_value",
                "threshold",
                "fraction",
                "size",
                "delta_norm",
                "sum_sq",
                "markov_holds",
                "bessel_holds",
            ])?;
            for (r, rep) in &reports {
                w.write_record([
                    r.to_string(),
                    rep.t.to_string(),
                    rep.m.to_string(),
                    fmt_f64(rep.p_value),
                    fmt_f64(rep.threshold),
                    fmt_f64(rep.fraction),
                    rep.size.to_string(),
                    fmt_f64(rep.delta_norm),
                    fmt_f64(rep.sum_sq),
                    rep.markov_holds.to_string(),
                    rep.bessel_holds.to_string(),
                ])?;
            }
            w.flush()?;
        }
        Format::Json => {
            let reps: Vec<_> = reports.iter().map(|(_, r)| r).collect();
            serde_json::to_writer_pretty(&mut body, &reps)?;
        }
    }
    emit(opts, stdout, &body)?;
    let failed = reports.iter().filter(|(_, r)| !(r.markov_holds && r.bessel_holds)).count();
    if failed > 0 {
        writeln!(stderr, "{failed} enumerations violate the Markov or Bessel bound")?;
        return Ok(EXIT_FAILED);
    }
    Ok(EXIT_OK)
}

fn transport_cmd(opts: &Options, stdout: &mut dyn Write) -> Result<i32> {
    let config = opts.chain()?;
    let n = config.sites();
    let m = opts.m.unwrap_or(2 * (n / 4)).max(2);
    let depth = opts.depth.unwrap_or(10);
    let samples = opts.realizations.unwrap_or(1);
    let seed = config.seed();
    let mut body = Vec::new();
    match opts.format() {
        Format::Csv => {
            let stats =
                transport::ensemble_profiles(config, &InitialState::EmptyCenter { width: m }, depth, samples, seed)?;
            transport::write_profile_csv(&mut body, &stats, seed)?;
        }
        Format::Json => {
            let widths: Vec<usize> = (2..=m).step_by(2).collect();
            let fit = transport::bulk_charge_decay(config, &widths, depth, samples, seed)?;
            serde_json::to_writer_pretty(&mut body, &fit.report())?;
        }
    }
    emit(opts, stdout, &body)?;
    Ok(EXIT_OK)
}

fn selftest_cmd(opts: &Options, stdout: &mut dyn Write) -> Result<i32> {
    let results = harness::selftest(opts.seed.unwrap_or(0))?;
    let mut body = Vec::new();
    match opts.format() {
        Format::Csv => {
            for r in &results {
                writeln!(body, "[{}] {}: {}", if r.passed { "PASS" } else { "FAIL" }, r.name, r.detail)?;
            }
        }
        Format::Json => serde_json::to_writer_pretty(&mut body, &results)?,
    }
    emit(opts, stdout, &body)?;
    Ok(if results.iter().all(|r| r.passed) { EXIT_OK } else { EXIT_FAILED })
}

/// Parses `args` (including the program name) and runs the subcommand.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = if e.use_stderr() { write!(stderr, "{}", e.render()) } else { write!(stdout, "{}", e.render()) };
            return code;
        }
    };
    let result = match cli.command {
        Command::Simulate(o) => o.resolve().and_then(|o| simulate(&o, stdout, stderr)),
        Command::Certify(o) => o.resolve().and_then(|o| certify(&o, stdout, stderr)),
        Command::Sprime(o) => o.resolve().and_then(|o| sprime(&o, stdout, stderr)),
        Command::Transport(o) => o.resolve().and_then(|o| transport_cmd(&o, stdout)),
        Command::Selftest(o) => o.resolve().and_then(|o| selftest_cmd(&o, stdout)),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}\n\nRun with --help for usage.");
            EXIT_USAGE
        }
    }
}
