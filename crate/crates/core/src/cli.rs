//! `polartomo` command-line front end.
//!
//! Exit codes: 0 success, 2 invalid input, 3 numerical non-convergence.
//! Every output file is written atomically, and only after all work for
//! the command has succeeded.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fiberspec::{
    fit_calibration, invert_histogram, resolution_estimate, simulate_delay_histogram, CalibrationCurve,
    CalibrationFit, DelaySimConfig,
};
use crate::io;
use crate::metrics::MetricsReport;
use crate::polopt::Protocol;
use crate::qmat::DensityMatrix;
use crate::simlab::{parse_filters, simulate_counts_with, AccidentalModel, FilterSpec, SimOptions};
use crate::tomo::{
    bootstrap_uncertainty, linear_reconstruct, mle_reconstruct, BootstrapMetric, BootstrapReport,
    MleDiagnostics, MleOptions, TomographyProblem,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID: i32 = 2;
pub const EXIT_NONCONVERGENCE: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "polartomo", version, about = "Polarization tomography of photon-pair sources")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate a coincidence count table for a source spec.
    Simulate(SimulateArgs),
    /// Reconstruct a density matrix from a count table.
    Reconstruct(ReconstructArgs),
    /// Compute metrics of a stored density matrix.
    Metrics(MetricsArgs),
    /// Fiber-dispersion spectroscopy.
    #[command(subcommand)]
    Spectro(SpectroCommand),
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Source spec (TOML).
    #[arg(long)]
    pub spec: PathBuf,
    #[arg(long, default_value = "two")]
    pub protocol: Protocol,
    /// Comma-separated filters, e.g. `LP1250,LP1550@arm1,BP1475/50@arm2`.
    #[arg(long, default_value = "")]
    pub filters: String,
    /// Integration time per setting, seconds.
    #[arg(long, default_value_t = 10.0)]
    pub integration: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Derive accidentals from singles with this coincidence window (ns).
    #[arg(long)]
    pub window_ns: Option<f64>,
    /// Also record singles counts.
    #[arg(long)]
    pub singles: bool,
    /// Output count table (CSV).
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Method {
    Mle,
    Linear,
}

#[derive(Debug, Args)]
pub struct ReconstructArgs {
    /// Count table (CSV).
    #[arg(long)]
    pub counts: PathBuf,
    /// Expected protocol; inferred from the table when omitted.
    #[arg(long)]
    pub protocol: Option<Protocol>,
    #[arg(long, value_enum, default_value = "mle")]
    pub method: Method,
    /// Known background coincidence rate (Hz) to model.
    #[arg(long)]
    pub background_hz: Option<f64>,
    /// Fit the background rate as a free parameter.
    #[arg(long)]
    pub fit_background: bool,
    /// Bootstrap resamples for metric uncertainties.
    #[arg(long, default_value_t = 0)]
    pub bootstrap: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output directory for `rho.json` and `report.json`.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct MetricsArgs {
    /// Density matrix (JSON).
    #[arg(long)]
    pub rho: PathBuf,
    /// Report path; printed to stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum SpectroCommand {
    /// Fit a delay-to-wavelength calibration polynomial.
    Calibrate(CalibrateArgs),
    /// Simulate the coincidence delay histogram behind a dispersive fiber.
    Simulate(SpectroSimulateArgs),
    /// Convert a delay histogram into a spectrum.
    Invert(InvertArgs),
}

#[derive(Debug, Args)]
pub struct CalibrateArgs {
    /// CSV with `delay_ns,wavelength_nm`.
    #[arg(long)]
    pub points: PathBuf,
    #[arg(long, default_value_t = 3)]
    pub degree: usize,
    /// Output calibration (JSON).
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SpectroSimulateArgs {
    #[arg(long)]
    pub spec: PathBuf,
    /// Calibration file from `spectro calibrate`.
    #[arg(long)]
    pub curve: PathBuf,
    #[arg(long, default_value = "")]
    pub filters: String,
    /// Detector timing jitter, standard deviation in ps.
    #[arg(long, default_value_t = 50.0)]
    pub jitter_ps: f64,
    #[arg(long, default_value_t = 1_000_000)]
    pub events: usize,
    #[arg(long, default_value_t = 20.0)]
    pub bin_ps: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output histogram (CSV).
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct InvertArgs {
    /// Histogram CSV with `t_lo_ns,t_hi_ns,counts`.
    #[arg(long)]
    pub histogram: PathBuf,
    #[arg(long)]
    pub curve: PathBuf,
    /// Number of peaks to report on stdout.
    #[arg(long, default_value_t = 2)]
    pub peaks: usize,
    /// Half-width of the centroid window, nm.
    #[arg(long, default_value_t = 15.0)]
    pub window_nm: f64,
    /// Output spectrum (CSV).
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Serialize)]
struct ReconstructionReport {
    mode: String,
    method: &'static str,
    records: usize,
    metrics: MetricsReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    mle: Option<MleDiagnostics>,
    #[serde(skip_serializing_if = "Option::is_none")]
    bootstrap: Option<BootstrapReport>,
}

#[derive(Debug, Serialize)]
struct PeakReport {
    peaks_nm: Vec<f64>,
    total_counts: u64,
}

pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::NonConvergence(_) => EXIT_NONCONVERGENCE,
        _ => EXIT_INVALID,
    }
}

/// Parses `args` (including the program name) and runs the command,
/// returning the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_INVALID } else { EXIT_OK };
        }
    };
    match run(cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate(a) => cmd_simulate(&a),
        Command::Reconstruct(a) => cmd_reconstruct(&a),
        Command::Metrics(a) => cmd_metrics(&a),
        Command::Spectro(c) => cmd_spectro(&c),
    }
}

pub fn cmd_spectro(cmd: &SpectroCommand) -> Result<()> {
    match cmd {
        SpectroCommand::Calibrate(a) => cmd_calibrate(a),
        SpectroCommand::Simulate(a) => cmd_spectro_simulate(a),
        SpectroCommand::Invert(a) => cmd_invert(a),
    }
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path)
        .map_err(|e| Error::InvalidInput(format!("cannot read {}: {e}", path.display())))
}

fn filters(s: &str) -> Result<Vec<FilterSpec>> {
    if s.trim().is_empty() {
        Ok(Vec::new())
    } else {
        parse_filters(s)
    }
}

fn read_curve(path: &Path) -> Result<CalibrationCurve> {
    let text = read(path)?;
    // accept either a bare curve or the output of `spectro calibrate`
    match serde_json::from_str::<CalibrationFit>(&text) {
        Ok(fit) => Ok(fit.curve),
        Err(_) => Ok(serde_json::from_str::<CalibrationCurve>(&text)?),
    }
}

pub fn cmd_simulate(a: &SimulateArgs) -> Result<()> {
    let spec = crate::source::SourceSpec::from_toml_str(&read(&a.spec)?)?;
    let opts = SimOptions {
        accidentals: match a.window_ns {
            Some(window_ns) => AccidentalModel::FromSingles { window_ns },
            None => AccidentalModel::Flat,
        },
        record_singles: a.singles,
        parallel: true,
    };
    let records = simulate_counts_with(
        &spec,
        &a.protocol.settings(),
        &filters(&a.filters)?,
        a.integration,
        a.seed,
        &opts,
    )?;
    io::write_atomic(&a.out, io::counts_to_csv(&records)?.as_bytes())?;
    println!("wrote {} records to {}", records.len(), a.out.display());
    Ok(())
}

pub fn cmd_reconstruct(a: &ReconstructArgs) -> Result<()> {
    let records = io::counts_from_csv(&read(&a.counts)?)?;
    let mut problem = TomographyProblem::infer(&records)?;
    if let Some(p) = a.protocol {
        let expected = match p {
            Protocol::Single => crate::tomo::TomoMode::HeraldedSingle,
            Protocol::Two => crate::tomo::TomoMode::TwoPhoton,
        };
        if expected != problem.mode {
            return Err(Error::InvalidInput(format!(
                "table rows describe a {:?} measurement, not {p:?}",
                problem.mode
            )));
        }
    }
    if let Some(b) = a.background_hz {
        if !(b >= 0.0 && b.is_finite()) {
            return Err(Error::input("background rate must be non-negative"));
        }
        problem = problem.with_background(b);
    }
    problem.check_complete()?;
    let opts = MleOptions {
        fit_background: a.fit_background,
        ..MleOptions::default()
    };

    let (rho, mle) = match a.method {
        Method::Mle => {
            let (rho, diag) = mle_reconstruct(&problem, &opts)?;
            if !diag.converged {
                return Err(Error::NonConvergence(format!(
                    "likelihood maximization stopped after {} iterations",
                    diag.iterations
                )));
            }
            (rho, Some(diag))
        }
        Method::Linear => (DensityMatrix::project_psd(&linear_reconstruct(&problem)?)?, None),
    };

    let mut metrics = MetricsReport::from_state(&rho)?;
    let bootstrap = if a.bootstrap > 0 {
        let wanted = BootstrapMetric::defaults_for(rho.dim());
        let report = bootstrap_uncertainty(&problem, &wanted, a.bootstrap, a.seed, &opts, true)?;
        attach_stds(&mut metrics, &report);
        Some(report)
    } else {
        None
    };

    let report = ReconstructionReport {
        mode: format!("{:?}", problem.mode),
        method: match a.method {
            Method::Mle => "mle",
            Method::Linear => "linear",
        },
        records: records.len(),
        metrics,
        mle,
        bootstrap,
    };
    let rho_json = io::to_json_pretty(&rho)?;
    let report_json = io::to_json_pretty(&report)?;
    std::fs::create_dir_all(&a.out)?;
    io::write_atomic(&a.out.join("rho.json"), rho_json.as_bytes())?;
    io::write_atomic(&a.out.join("report.json"), report_json.as_bytes())?;
    print!("{report_json}");
    Ok(())
}

fn attach_stds(metrics: &mut MetricsReport, report: &BootstrapReport) {
    metrics.purity.std = report.std_of(BootstrapMetric::Purity);
    if let Some(d) = metrics.dop.as_mut() {
        d.std = report.std_of(BootstrapMetric::DegreeOfPolarization);
    }
    if let Some(c) = metrics.concurrence.as_mut() {
        c.std = report.std_of(BootstrapMetric::Concurrence);
    }
    if let Some(e) = metrics.eof.as_mut() {
        e.std = report.std_of(BootstrapMetric::EntanglementOfFormation);
    }
    metrics.uncertainty_method = Some(format!("{} ({} resamples)", report.method, report.used));
}

pub fn cmd_metrics(a: &MetricsArgs) -> Result<()> {
    let rho: DensityMatrix = serde_json::from_str(&read(&a.rho)?)?;
    let json = io::to_json_pretty(&MetricsReport::from_state(&rho)?)?;
    match &a.out {
        Some(p) => io::write_atomic(p, json.as_bytes())?,
        None => print!("{json}"),
    }
    Ok(())
}

pub fn cmd_calibrate(a: &CalibrateArgs) -> Result<()> {
    let points = io::calibration_points_from_csv(&read(&a.points)?)?;
    let fit = fit_calibration(&points, a.degree)?;
    io::write_atomic(&a.out, io::to_json_pretty(&fit)?.as_bytes())?;
    println!("residual rms {:.6} nm over {} points", fit.residual_rms_nm, points.len());
    Ok(())
}

pub fn cmd_spectro_simulate(a: &SpectroSimulateArgs) -> Result<()> {
    let spec = crate::source::SourceSpec::from_toml_str(&read(&a.spec)?)?;
    let curve = read_curve(&a.curve)?;
    let cfg = DelaySimConfig {
        jitter_ps: a.jitter_ps,
        n_events: a.events,
        bin_ps: a.bin_ps,
        seed: a.seed,
        filters: filters(&a.filters)?,
        parallel: true,
    };
    let sim = simulate_delay_histogram(&spec, &curve, &cfg)?;
    io::write_atomic(&a.out, io::histogram_to_csv(&sim.histogram)?.as_bytes())?;
    println!(
        "{} events binned, {} outside calibration range, {} outside histogram",
        sim.histogram.total(),
        sim.dropped_out_of_domain,
        sim.dropped_out_of_range
    );
    if let Ok(res) = resolution_estimate(&curve, a.jitter_ps, spec.signal_peak.center_nm) {
        println!("resolution at signal peak {res:.3} nm");
    }
    Ok(())
}

pub fn cmd_invert(a: &InvertArgs) -> Result<()> {
    let hist = io::histogram_from_csv(&read(&a.histogram)?)?;
    let curve = read_curve(&a.curve)?;
    let spectrum = invert_histogram(&hist, &curve)?;
    io::write_atomic(&a.out, io::spectrum_to_csv(&spectrum)?.as_bytes())?;
    let report = PeakReport {
        peaks_nm: spectrum.peaks(a.peaks, a.window_nm),
        total_counts: spectrum.total(),
    };
    print!("{}", io::to_json_pretty(&report)?);
    Ok(())
}
