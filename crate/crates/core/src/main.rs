use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use linecert::certify::{dump_trace, DrConfig};
use linecert::io::{parse_truth, read_csv, write_csv, write_truth, IoError};
use linecert::lifting::build_lifted;
use linecert::pipeline::{certify_line, fit, FitOptions, FitOutput};
use linecert::plot::{parse_trace_gamma, write_svg, Figure, Overlay};
use linecert::report::{Method, Report};
use linecert::sdp::{build_sdp, Relaxation, MAX_SDP_POINTS};
use linecert::sdpa::export_sdpa;
use linecert::synth::{generate, SyntheticSpec};
use linecert::{Error, LineParams};

#[derive(Parser)]
#[command(name = "linecert", version, about = "Certifiable robust 2-D line fitting")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate a synthetic dataset and its ground-truth sidecar.
    Gen(GenArgs),
    /// Fit a line and write a JSON report.
    Fit(FitArgs),
    /// Certify a given line against a dataset.
    Certify(CertifyArgs),
    /// Write the SDP relaxation in sparse SDPA format.
    SdpExport(ExportArgs),
    /// Draw points, fitted lines and an optional Gamma heatmap as SVG.
    Plot(PlotArgs),
}

#[derive(Args)]
struct GenArgs {
    #[arg(long)]
    out: PathBuf,
    /// Sidecar path; defaults to the output path with a `.truth.csv` suffix.
    #[arg(long)]
    truth: Option<PathBuf>,
    #[arg(long, default_value_t = 10)]
    n: usize,
    #[arg(long, default_value_t = 4)]
    outliers: usize,
    #[arg(long, default_value_t = 0.05)]
    sigma: f64,
    #[arg(long = "box", default_value_t = 5.0)]
    half_width: f64,
    /// True line as `a,b,c`; normalized on input.
    #[arg(long, default_value = "-0.5,1,0.5", allow_hyphen_values = true)]
    line: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct CommonArgs {
    #[arg(long)]
    input: PathBuf,
    /// Report path; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value_t = linecert::lifting::DEFAULT_EPS)]
    eps: f64,
    #[arg(long, default_value_t = 1.0)]
    beta: f64,
    /// Douglas-Rachford iterations.
    #[arg(long, default_value_t = 300)]
    iters: usize,
    /// Recorded in the report.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Attach the brute-force reference minimum.
    #[arg(long)]
    oracle: bool,
    /// Keep iterating after the certificate is found.
    #[arg(long)]
    full_run: bool,
    /// Write the eigenvalue trace and final Gamma to this file.
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Record per-stage wall-clock times (makes reports non-reproducible).
    #[arg(long)]
    timings: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Tls,
    Irls,
    Sdp,
}

#[derive(Args)]
struct FitArgs {
    #[command(flatten)]
    common: CommonArgs,
    #[arg(long, value_enum, default_value = "irls")]
    method: MethodArg,
    #[arg(long)]
    certify: bool,
    /// Use the relaxation without the redundant constraints.
    #[arg(long)]
    plain: bool,
}

#[derive(Args)]
struct CertifyArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Candidate line as `a,b,c`.
    #[arg(long, allow_hyphen_values = true)]
    line: String,
}

#[derive(Args)]
struct ExportArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = linecert::lifting::DEFAULT_EPS)]
    eps: f64,
    #[arg(long)]
    plain: bool,
}

#[derive(Args)]
struct PlotArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Reports whose lines are drawn; may be repeated.
    #[arg(long)]
    report: Vec<PathBuf>,
    /// Ground-truth sidecar; draws the true line and greys out outliers.
    #[arg(long)]
    truth: Option<PathBuf>,
    /// Certificate trace file whose Gamma is shown as a heatmap.
    #[arg(long)]
    gamma: Option<PathBuf>,
    #[arg(long, default_value = "")]
    title: String,
}

enum Failure {
    Usage(String),
    Numeric(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        if e.is_usage() {
            Failure::Usage(e.to_string())
        } else {
            Failure::Numeric(e.to_string())
        }
    }
}

impl From<IoError> for Failure {
    fn from(e: IoError) -> Self {
        Failure::Usage(e.to_string())
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Usage(e.to_string())
    }
}

fn context<T, E: Into<Failure>>(r: Result<T, E>, path: &Path) -> Result<T, Failure> {
    r.map_err(|e| match e.into() {
        Failure::Usage(m) => Failure::Usage(format!("{}: {m}", path.display())),
        Failure::Numeric(m) => Failure::Numeric(format!("{}: {m}", path.display())),
    })
}

fn parse_line(s: &str) -> Result<LineParams, Failure> {
    let v: Vec<f64> = s
        .split(',')
        .map(|t| t.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|_| Failure::Usage(format!("invalid line {s:?}, expected a,b,c")))?;
    match v[..] {
        [a, b, c] => LineParams::new(a, b, c)
            .map_err(|e| Failure::Usage(format!("invalid line {s:?}: {e}"))),
        _ => Err(Failure::Usage(format!("invalid line {s:?}, expected a,b,c"))),
    }
}

fn options(c: &CommonArgs) -> FitOptions {
    FitOptions {
        eps: c.eps,
        oracle: c.oracle,
        dr: DrConfig {
            beta: c.beta,
            max_iters: c.iters,
            stop_when_certified: !c.full_run,
            ..DrConfig::default()
        },
        seed: c.seed,
        timings: c.timings,
        ..FitOptions::default()
    }
}

fn emit(out: FitOutput, c: &CommonArgs) -> Result<(), Failure> {
    if let (Some(path), Some(cert)) = (&c.trace, &out.certificate) {
        context(dump_trace(cert, path), path)?;
    }
    let json = out.report.to_json();
    match &c.out {
        Some(path) => context(std::fs::write(path, json), path)?,
        None => print!("{json}"),
    }
    Ok(())
}

fn run(cmd: Cmd) -> Result<(), Failure> {
    match cmd {
        Cmd::Gen(g) => {
            let spec = SyntheticSpec {
                n_total: g.n,
                n_outliers: g.outliers,
                true_line: parse_line(&g.line)?,
                inlier_noise_sigma: g.sigma,
                outlier_box: g.half_width,
                seed: g.seed,
            };
            let data = generate(&spec)?;
            let truth = g.truth.unwrap_or_else(|| {
                let mut p = g.out.clone().into_os_string();
                p.push(".truth.csv");
                PathBuf::from(p)
            });
            context(std::fs::write(&g.out, write_csv(&data.dataset)), &g.out)?;
            context(std::fs::write(&truth, write_truth(&data)), &truth)?;
            Ok(())
        }
        Cmd::Fit(f) => {
            let d = context(read_csv(&f.common.input), &f.common.input)?;
            let method = match f.method {
                MethodArg::Tls => Method::Tls,
                MethodArg::Irls => Method::Irls,
                MethodArg::Sdp => Method::Sdp,
            };
            let opts = FitOptions {
                method,
                certify: f.certify,
                relaxation: if f.plain { Relaxation::Plain } else { Relaxation::Redundant },
                ..options(&f.common)
            };
            emit(fit(&d, &opts)?, &f.common)
        }
        Cmd::Certify(c) => {
            let d = context(read_csv(&c.common.input), &c.common.input)?;
            let line = parse_line(&c.line)?;
            emit(certify_line(&d, line, &options(&c.common))?, &c.common)
        }
        Cmd::SdpExport(e) => {
            let d = context(read_csv(&e.input), &e.input)?;
            if d.len() > MAX_SDP_POINTS {
                return Err(Failure::Usage(format!(
                    "SDP export supports at most {MAX_SDP_POINTS} points, got {}",
                    d.len()
                )));
            }
            let lp = build_lifted(&d, e.eps)?;
            let relaxation = if e.plain { Relaxation::Plain } else { Relaxation::Redundant };
            context(export_sdpa(&build_sdp(&lp, relaxation), &e.out), &e.out)
        }
        Cmd::Plot(p) => {
            let d = context(read_csv(&p.input), &p.input)?;
            let mut overlays = Vec::new();
            let mut outliers = None;
            if let Some(path) = &p.truth {
                let t = context(parse_truth(&context(std::fs::read_to_string(path), path)?), path)?;
                if t.dataset != d {
                    return Err(Failure::Usage(format!(
                        "{}: points differ from {}",
                        path.display(),
                        p.input.display()
                    )));
                }
                overlays.push(Overlay::styled("truth", t.line));
                outliers = Some(t.is_outlier);
            }
            for path in &p.report {
                let text = context(std::fs::read_to_string(path), path)?;
                let r = Report::from_json(&text)
                    .map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
                if r.n_points != d.len() {
                    return Err(Failure::Usage(format!(
                        "{}: report covers {} points, dataset has {}",
                        path.display(),
                        r.n_points,
                        d.len()
                    )));
                }
                overlays.push(Overlay::styled(r.method.as_str(), r.line));
            }
            let gamma = match &p.gamma {
                Some(path) => {
                    let text = context(std::fs::read_to_string(path), path)?;
                    Some(parse_trace_gamma(&text).ok_or_else(|| {
                        Failure::Usage(format!("{}: no Gamma block found", path.display()))
                    })?)
                }
                None => None,
            };
            let fig = Figure {
                dataset: Some(&d),
                outliers: outliers.as_deref(),
                overlays,
                gamma: gamma.as_ref(),
                title: p.title,
            };
            context(write_svg(&fig, &p.out), &p.out)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli.cmd) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
        Err(Failure::Numeric(m)) => {
            eprintln!("numeric failure: {m}");
            ExitCode::from(2)
        }
    }
}
