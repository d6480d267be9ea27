use clap::{Parser, Subcommand, ValueEnum};
use layered_pml::fdm::{assemble, GridSpec, SourceSpec};
use layered_pml::geometry::{Medium, PmlConfig, ProblemConfig, Shape};
use layered_pml::green::{green_layered_exact, green_pml_with_ratio, green_waveguide, image_series_ratio, GreenValue};
use layered_pml::harness::{convergence_sweep, selftest, SweepParameter, SweepSpec};
use layered_pml::spectral::SpectralPoint;
use layered_pml::{c, C64};
use serde::{Deserialize, Serialize};
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "layered-pml", version, about = "Two-layer Helmholtz Green's functions with PML truncation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate Green's functions at (x, y) pairs read from a CSV file
    /// with columns x1,x2,y1,y2.
    GreenEval {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        pairs: PathBuf,
        #[arg(long, value_enum, default_value_t = Which::All)]
        which: Which,
        #[arg(long, default_value_t = 1e-8)]
        tol: f64,
        /// Output CSV (stdout when omitted).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Tabulate the dispersion function on a rectangular grid of spectral points.
    DispersionScan {
        #[arg(long)]
        config: PathBuf,
        /// Real range as `start:end:count`.
        #[arg(long, default_value = "0:3:61", allow_hyphen_values = true)]
        re: String,
        /// Imaginary range as `start:end:count`.
        #[arg(long, default_value = "-1:1:41", allow_hyphen_values = true)]
        im: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Finite-difference solve of the PML source problem on B_ex.
    Solve {
        #[arg(long)]
        config: PathBuf,
        /// JSON source description, e.g. {"kind":"point","y":[0.3,0.6]} or
        /// {"kind":"bump","center":[0,0],"radius":1}.
        #[arg(long)]
        source: PathBuf,
        /// Nodes per side (odd keeps the interface on a grid line).
        #[arg(long)]
        grid: usize,
        /// Field CSV (x1,x2,re,im).
        #[arg(long)]
        out: PathBuf,
        /// Metadata JSON.
        #[arg(long)]
        meta: PathBuf,
    },
    /// Error sweep of the PML solution against the unbounded one.
    Converge {
        /// Problem JSON; defaults to k1=1, k2=2, L=4, d=1, R=1 with a quadratic profile.
        #[arg(long)]
        config: Option<PathBuf>,
        /// `name=v1,v2,...` with name in sigma_bar, d, L, n_grid.
        #[arg(long)]
        sweep: String,
        /// JSON source; defaults to the smooth bump on the disk of radius R at the origin.
        #[arg(long)]
        source: Option<PathBuf>,
        #[arg(long, default_value_t = 41)]
        lattice: usize,
        #[arg(long, default_value_t = 1e-9)]
        tol: f64,
        #[arg(long, default_value = "converge.csv")]
        out: PathBuf,
        #[arg(long, default_value = "converge.gp")]
        plot: PathBuf,
        #[arg(long, default_value = "converge.json")]
        manifest: PathBuf,
    },
    /// Run the built-in invariant checks.
    Selftest,
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum Which {
    Exact,
    Waveguide,
    Pml,
    All,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
enum SourceFile {
    Point {
        y: [f64; 2],
        #[serde(default = "unit")]
        strength: [f64; 2],
    },
    Bump {
        center: [f64; 2],
        radius: f64,
    },
}

fn unit() -> [f64; 2] {
    [1.0, 0.0]
}

impl SourceFile {
    fn build(&self) -> SourceSpec {
        match *self {
            SourceFile::Point { y, strength } => SourceSpec::Point { y, strength: c(strength[0], strength[1]) },
            SourceFile::Bump { center, radius } => SourceSpec::bump(center, radius),
        }
    }
}

/// Failure classes mapped to exit codes.
enum Failure {
    Usage(String),
    Numerical(layered_pml::Error),
}

impl From<layered_pml::Error> for Failure {
    fn from(e: layered_pml::Error) -> Self {
        Failure::Numerical(e)
    }
}

fn usage<E: std::fmt::Display>(context: &str) -> impl FnOnce(E) -> Failure + '_ {
    move |e| Failure::Usage(format!("{context}: {e}"))
}

#[derive(Serialize)]
struct Diagnostic<'a> {
    status: &'a str,
    error: String,
    detail: String,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli.command) {
        Ok(code) => code,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Numerical(e)) => {
            let d = Diagnostic { status: "numerical_failure", error: e.to_string(), detail: format!("{e:?}") };
            eprintln!("{}", serde_json::to_string(&d).expect("diagnostic serializes"));
            ExitCode::from(1)
        }
    }
}

fn read_config(path: &Path) -> Result<(Medium, PmlConfig), Failure> {
    let text = fs::read_to_string(path).map_err(usage("reading config"))?;
    let p: ProblemConfig = serde_json::from_str(&text).map_err(usage("parsing config"))?;
    p.build().map_err(|e| Failure::Usage(format!("config: {e}")))
}

fn read_source(path: &Path) -> Result<SourceFile, Failure> {
    let text = fs::read_to_string(path).map_err(usage("reading source"))?;
    serde_json::from_str(&text).map_err(usage("parsing source"))
}

fn write_text(path: Option<&Path>, text: &str) -> Result<(), Failure> {
    match path {
        Some(p) => fs::write(p, text).map_err(usage("writing output")),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn parse_range(s: &str) -> Result<Vec<f64>, Failure> {
    let parts: Vec<&str> = s.split(':').collect();
    let bad = || Failure::Usage(format!("range {s:?} is not start:end:count"));
    if parts.len() != 3 {
        return Err(bad());
    }
    let a: f64 = parts[0].parse().map_err(|_| bad())?;
    let b: f64 = parts[1].parse().map_err(|_| bad())?;
    let n: usize = parts[2].parse().map_err(|_| bad())?;
    Ok(match n {
        0 => return Err(bad()),
        1 => vec![a],
        _ => (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect(),
    })
}

fn run(cmd: Command) -> Result<ExitCode, Failure> {
    match cmd {
        Command::GreenEval { config, pairs, which, tol, out } => green_eval(&config, &pairs, which, tol, out.as_deref()),
        Command::DispersionScan { config, re, im, out } => dispersion_scan(&config, &re, &im, out.as_deref()),
        Command::Solve { config, source, grid, out, meta } => solve(&config, &source, grid, &out, &meta),
        Command::Converge { config, sweep, source, lattice, tol, out, plot, manifest } => {
            converge(config.as_deref(), &sweep, source.as_deref(), lattice, tol, &out, &plot, &manifest)
        }
        Command::Selftest => {
            let checks = selftest();
            let mut ok = true;
            for ch in &checks {
                println!("{} {:<22} {}", if ch.passed { "PASS" } else { "FAIL" }, ch.name, ch.detail);
                ok &= ch.passed;
            }
            Ok(if ok { ExitCode::SUCCESS } else { ExitCode::from(1) })
        }
    }
}

#[derive(Deserialize)]
struct PairRow {
    x1: f64,
    x2: f64,
    y1: f64,
    y2: f64,
}

#[derive(Serialize)]
struct GreenRow {
    x1: f64,
    x2: f64,
    y1: f64,
    y2: f64,
    which: &'static str,
    re: f64,
    im: f64,
    grad_re1: f64,
    grad_im1: f64,
    grad_re2: f64,
    grad_im2: f64,
    tail_bound: f64,
    n_terms: usize,
}

fn green_eval(config: &Path, pairs: &Path, which: Which, tol: f64, out: Option<&Path>) -> Result<ExitCode, Failure> {
    let (medium, cfg) = read_config(config)?;
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(pairs).map_err(usage("reading pairs"))?;
    let rows: Vec<PairRow> = reader.deserialize().collect::<Result<_, _>>().map_err(usage("parsing pairs"))?;
    let rho = image_series_ratio(&medium, &cfg);
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        let (x, y) = ([r.x1, r.x2], [r.y1, r.y2]);
        let kinds: &[Which] = match which {
            Which::All => &[Which::Exact, Which::Waveguide, Which::Pml],
            Which::Exact => &[Which::Exact],
            Which::Waveguide => &[Which::Waveguide],
            Which::Pml => &[Which::Pml],
        };
        for &k in kinds {
            let (name, v): (&str, GreenValue) = match k {
                Which::Exact => ("exact", green_layered_exact(&medium, x, y, tol)?),
                Which::Waveguide => ("waveguide", green_waveguide(&medium, &cfg, x, y, tol)?),
                _ => ("pml", green_pml_with_ratio(&medium, &cfg, x, y, tol, rho)?.total),
            };
            w.serialize(GreenRow {
                x1: r.x1,
                x2: r.x2,
                y1: r.y1,
                y2: r.y2,
                which: name,
                re: v.value.re,
                im: v.value.im,
                grad_re1: v.grad[0].re,
                grad_im1: v.grad[0].im,
                grad_re2: v.grad[1].re,
                grad_im2: v.grad[1].im,
                tail_bound: v.tail_bound,
                n_terms: v.n_terms,
            })
            .map_err(usage("writing csv"))?;
        }
    }
    let bytes = w.into_inner().map_err(usage("writing csv"))?;
    write_text(out, &String::from_utf8(bytes).expect("csv output is utf-8"))?;
    Ok(ExitCode::SUCCESS)
}

fn dispersion_scan(config: &Path, re: &str, im: &str, out: Option<&Path>) -> Result<ExitCode, Failure> {
    let (medium, cfg) = read_config(config)?;
    let (res, ims) = (parse_range(re)?, parse_range(im)?);
    let mut text = String::from("xi_re,xi_im,A_re,A_im,abs_A,abs_mu1,abs_mu2\n");
    for &b in &ims {
        for &a in &res {
            let pt = SpectralPoint::new(&medium, cfg.m2_tilde(), c(a, b));
            let d = pt.dispersion();
            text.push_str(&format!("{a},{b},{:e},{:e},{:e},{:e},{:e}\n", d.re, d.im, d.norm(), pt.mu[0].norm(), pt.mu[1].norm()));
        }
    }
    write_text(out, &text)?;
    Ok(ExitCode::SUCCESS)
}

#[derive(Serialize)]
struct SolveMeta {
    config: ProblemConfig,
    source: SourceFile,
    grid: GridSpec,
    h: [f64; 2],
    stats: layered_pml::fdm::SolveStats,
    seconds: f64,
    version: &'static str,
}

fn solve(config: &Path, source: &Path, grid: usize, out: &Path, meta: &Path) -> Result<ExitCode, Failure> {
    let (medium, cfg) = read_config(config)?;
    let src = read_source(source)?;
    let start = std::time::Instant::now();
    let spec = GridSpec { nx: grid, ny: grid };
    let mut sys = assemble(&medium, &cfg, spec)?;
    let (field, stats) = sys.solve(&src.build())?;
    let mut text = String::with_capacity(field.values.len() * 48);
    text.push_str("x1,x2,re,im\n");
    for j in 0..field.ny {
        for i in 0..field.nx {
            let v: C64 = field.value(i, j);
            text.push_str(&format!("{},{},{:e},{:e}\n", field.x1(i), field.x2(j), v.re, v.im));
        }
    }
    fs::write(out, text).map_err(usage("writing field"))?;
    let m = SolveMeta {
        config: ProblemConfig::from_parts(&medium, &cfg),
        source: src,
        grid: spec,
        h: [field.h1, field.h2],
        stats,
        seconds: start.elapsed().as_secs_f64(),
        version: env!("CARGO_PKG_VERSION"),
    };
    fs::write(meta, serde_json::to_string_pretty(&m).expect("metadata serializes")).map_err(usage("writing metadata"))?;
    Ok(ExitCode::SUCCESS)
}

#[derive(Serialize)]
struct Manifest<'a> {
    config: ProblemConfig,
    source: SourceFile,
    parameter: &'static str,
    values: &'a [f64],
    lattice: usize,
    tol: f64,
    seeds: [u64; 0],
    version: &'static str,
    report: &'a layered_pml::harness::ErrorReport,
}

#[allow(clippy::too_many_arguments)]
fn converge(
    config: Option<&Path>,
    sweep: &str,
    source: Option<&Path>,
    lattice: usize,
    tol: f64,
    out: &Path,
    plot: &Path,
    manifest: &Path,
) -> Result<ExitCode, Failure> {
    let (name, list) = sweep.split_once('=').ok_or_else(|| Failure::Usage(format!("sweep {sweep:?} is not name=v1,v2,...")))?;
    let parameter: SweepParameter = name.trim().parse().map_err(|e: layered_pml::Error| Failure::Usage(e.to_string()))?;
    let values: Vec<f64> = list
        .split(',')
        .map(|v| v.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(usage("sweep values"))?;
    if values.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Failure::Usage("sweep values must be strictly increasing".into()));
    }
    let (medium, cfg) = match config {
        Some(p) => read_config(p)?,
        None => (Medium::new(1.0, 2.0)?, PmlConfig::symmetric(2.0, 1.0, Shape::Power2, 1.0, 1.0)?),
    };
    let src = match source {
        Some(p) => read_source(p)?,
        None if parameter == SweepParameter::NGrid => SourceFile::Point { y: [0.0, 0.0], strength: unit() },
        None => SourceFile::Bump { center: [0.0, 0.0], radius: cfg.source_radius },
    };
    let spec = SweepSpec { parameter, values: values.clone(), medium, cfg, source: src.build(), lattice, source_order: 16, tol };
    let report = convergence_sweep(&spec)?;
    let out_name = out.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "converge.csv".into());
    fs::write(out, report.to_csv()).map_err(usage("writing csv"))?;
    fs::write(plot, report.gnuplot_script(&out_name, "converge.png")).map_err(usage("writing plot script"))?;
    let m = Manifest {
        config: ProblemConfig::from_parts(&medium, &cfg),
        source: src,
        parameter: parameter.name(),
        values: &values,
        lattice,
        tol,
        seeds: [],
        version: env!("CARGO_PKG_VERSION"),
        report: &report,
    };
    fs::write(manifest, serde_json::to_string_pretty(&m).expect("manifest serializes")).map_err(usage("writing manifest"))?;
    let failed = report.rows.iter().filter(|r| r.failure.is_some()).count();
    if failed > 0 {
        let d = Diagnostic {
            status: "numerical_failure",
            error: format!("{failed} of {} rows failed", report.rows.len()),
            detail: report.rows.iter().filter_map(|r| r.failure.clone()).collect::<Vec<_>>().join("; "),
        };
        eprintln!("{}", serde_json::to_string(&d).expect("diagnostic serializes"));
        return Ok(ExitCode::from(1));
    }
    Ok(ExitCode::SUCCESS)
}
