//! `spectree`: validation suites, kernel checks, threshold scans, spectra and
//! contour indices from the command line.
//!
//! Exit codes: 0 success, 2 certification failure, 1 usage or I/O error.

mod config;

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use spectree::birman_schwinger::BsOptions;
use spectree::charval::{
    absence_scan, contour_index, spectrum, write_scan_csv, write_spectrum_csv, IPlusT,
    IndexOptions, ScanParams,
};
use spectree::decomposition::SphericalBasis;
use spectree::linalg::relative_frobenius;
use spectree::operators::{minimal_delta, weights, AssumptionCheck, ComplexValue};
use spectree::resolvent::{
    boundary_corrected_resolvent, weight_dense, weighted_resolvent_kernel, SpectralPoint,
};
use spectree::validation::run_suite;
use spectree::{
    t_minus, BirmanSchwinger, ContourSpec, Diagonal, Error, IndexReport, PotentialSpec, Threshold,
    TreeGraph, C64,
};

use config::{load_potential, parse_complex, FileConfig};

#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Certification(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::SingularOnContour { .. }
            | Error::NonConvergent { .. }
            | Error::NotIsolated { .. }
            | Error::NumericalRankFailure { .. }
            | Error::BranchFailure(_) => Failure::Certification(e.to_string()),
            _ => Failure::Usage(e.to_string()),
        }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Usage(format!("i/o error: {e}"))
    }
}

type Outcome = Result<(), Failure>;

#[derive(Parser, Debug)]
#[command(
    name = "spectree",
    version,
    about = "Perturbed Laplacians on regular rooted trees near the spectral thresholds"
)]
struct Cli {
    /// Worker threads [default: available cores]
    #[arg(long, global = true, env = "SPECTREE_JOBS")]
    jobs: Option<usize>,
    /// JSON file supplying any flag by its long name (dashes as underscores); flags win
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run the invariant suite and print a pass/fail table
    Validate(TreeArgs),
    /// Compare the closed-form weighted kernel with a dense solve
    Kernel(KernelArgs),
    /// Threshold absence scan: annulus grid CSV plus ladder of contour indices
    Scan(ScanArgs),
    /// Eigenvalues of the truncated operator as CSV
    Spectrum(SpectrumArgs),
    /// Contour index of I + T(lambda) around a circle, as JSON
    Index(IndexArgs),
}

#[derive(Args, Debug)]
struct TreeArgs {
    /// Branching factor [default: 2]
    #[arg(long)]
    k: Option<usize>,
    /// Truncation depth [default: 8]
    #[arg(long)]
    depth: Option<usize>,
}

#[derive(Args, Debug)]
struct PotentialArgs {
    /// Potential spec: inline JSON or a file path
    #[arg(long)]
    potential: Option<String>,
    /// Threshold to study [default: minus]
    #[arg(long)]
    threshold: Option<Threshold>,
    /// Radius of the admissible lambda disk [default: min(delta/8, 0.3)]
    #[arg(long)]
    disk_radius: Option<f64>,
    /// Skip the decay assumption check (controls and experiments only)
    #[arg(long)]
    no_assumption_check: bool,
}

#[derive(Args, Debug)]
struct KernelArgs {
    #[command(flatten)]
    tree: TreeArgs,
    /// Weight exponent of e_- [default: max(1, 6 ln k)]
    #[arg(long)]
    delta: Option<f64>,
    /// Spectral point `re,im`; repeatable [default: three real points below t-, two at |Im z| = 0.1]
    #[arg(long, value_parser = parse_complex, allow_hyphen_values = true)]
    z: Vec<C64>,
    /// Relative Frobenius tolerance [default: 1e-6]
    #[arg(long)]
    tol: Option<f64>,
}

#[derive(Args, Debug)]
struct ScanArgs {
    /// Branching factor [default: 2]
    #[arg(long)]
    k: Option<usize>,
    #[command(flatten)]
    pot: PotentialArgs,
    /// Inner annulus radius [default: 0.02]
    #[arg(long)]
    rmin: Option<f64>,
    /// Outer annulus radius [default: 0.2]
    #[arg(long)]
    rmax: Option<f64>,
    /// Grid size per direction [default: 32]
    #[arg(long)]
    grid: Option<usize>,
    /// Quadrature nodes per ladder circle [default: 256]
    #[arg(long)]
    nodes: Option<usize>,
    /// Required minimum of the smallest singular value on the grid [default: 1e-4]
    #[arg(long)]
    min_sv: Option<f64>,
    /// Residual below which a ladder index is certified [default: 0.05]
    #[arg(long)]
    residual_tol: Option<f64>,
    /// CSV output path [default: stdout]
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SpectrumArgs {
    #[command(flatten)]
    tree: TreeArgs,
    #[command(flatten)]
    pot: PotentialArgs,
    /// CSV output path [default: stdout]
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct IndexArgs {
    /// Branching factor [default: 2]
    #[arg(long)]
    k: Option<usize>,
    #[command(flatten)]
    pot: PotentialArgs,
    /// Contour center `re,im` [default: 0]
    #[arg(long, value_parser = parse_complex, allow_hyphen_values = true)]
    center: Option<C64>,
    /// Contour radius [default: 0.1]
    #[arg(long)]
    radius: Option<f64>,
    /// Quadrature nodes [default: 256]
    #[arg(long)]
    nodes: Option<usize>,
    /// Residual below which the index is certified [default: 0.1]
    #[arg(long)]
    residual_tol: Option<f64>,
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
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
        Err(Failure::Certification(m)) => {
            eprintln!("certification failed: {m}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> Outcome {
    let file = match &cli.config {
        Some(p) => FileConfig::load(p)?,
        None => FileConfig::default(),
    };
    if let Some(jobs) = cli.jobs.or(file.jobs) {
        if jobs == 0 {
            return Err(Failure::Usage("--jobs must be positive".into()));
        }
        // only fails if a pool already exists, which cannot happen here
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global();
    }
    match cli.command {
        Command::Validate(a) => validate(&a, &file),
        Command::Kernel(a) => kernel(&a, &file),
        Command::Scan(a) => scan(&a, &file),
        Command::Spectrum(a) => spectrum_cmd(&a, &file),
        Command::Index(a) => index(&a, &file),
    }
}

fn tree_params(a: &TreeArgs, f: &FileConfig) -> (usize, usize) {
    (a.k.or(f.k).unwrap_or(2), a.depth.or(f.depth).unwrap_or(8))
}

fn potential(a: &PotentialArgs, f: &FileConfig) -> Result<PotentialSpec, Failure> {
    match &a.potential {
        Some(p) => load_potential(p),
        None => f.potential()?.ok_or_else(|| {
            Failure::Usage("a potential is required (--potential FILE|JSON)".into())
        }),
    }
}

fn check_mode(a: &PotentialArgs) -> AssumptionCheck {
    if a.no_assumption_check {
        AssumptionCheck::Override
    } else {
        AssumptionCheck::Enforce
    }
}

fn evaluator(k: usize, a: &PotentialArgs, f: &FileConfig) -> Result<BirmanSchwinger, Failure> {
    let spec = potential(a, f)?;
    let threshold = a.threshold.or(f.threshold).unwrap_or(Threshold::Minus);
    let opts = BsOptions {
        check: check_mode(a),
        disk_radius: a.disk_radius.or(f.disk_radius),
        dense_only: false,
    };
    Ok(BirmanSchwinger::with_options(k, &spec, threshold, opts)?)
}

fn output(path: &Option<PathBuf>) -> Result<Box<dyn Write>, Failure> {
    Ok(match path {
        Some(p) if p.as_os_str() != "-" => {
            Box::new(BufWriter::new(File::create(p).map_err(|e| {
                Failure::Usage(format!("cannot create {}: {e}", p.display()))
            })?))
        }
        _ => Box::new(BufWriter::new(io::stdout())),
    })
}

fn validate(a: &TreeArgs, f: &FileConfig) -> Outcome {
    let (k, depth) = tree_params(a, f);
    let checks = run_suite(k, depth)?;
    let mut out = io::stdout().lock();
    writeln!(
        out,
        "{:<28} {:>12} {:>12}  result",
        "check", "value", "tolerance"
    )?;
    for c in &checks {
        writeln!(
            out,
            "{:<28} {:>12.3e} {:>12.1e}  {}",
            c.name,
            c.value,
            c.tolerance,
            if c.passed { "PASS" } else { "FAIL" }
        )?;
    }
    let failed: Vec<&str> = checks
        .iter()
        .filter(|c| !c.passed)
        .map(|c| c.name)
        .collect();
    if failed.is_empty() {
        writeln!(
            out,
            "all {} checks pass (k = {k}, depth = {depth})",
            checks.len()
        )?;
        Ok(())
    } else {
        Err(Failure::Certification(format!(
            "failing checks: {}",
            failed.join(", ")
        )))
    }
}

#[derive(Serialize)]
struct KernelLine {
    k: usize,
    depth: usize,
    z: ComplexValue,
    relative_error: f64,
    max_abs_error: f64,
}

fn kernel(a: &KernelArgs, f: &FileConfig) -> Outcome {
    let (k, depth) = tree_params(&a.tree, f);
    let delta = a
        .delta
        .or(f.delta)
        .unwrap_or_else(|| minimal_delta(k).max(1.0));
    let tol = a.tol.or(f.tol).unwrap_or(1e-6);
    let zs: Vec<C64> = if !a.z.is_empty() {
        a.z.clone()
    } else if let Some(z) = &f.z {
        z.iter().map(|&v| v.into()).collect()
    } else {
        let lo = t_minus(k);
        vec![
            C64::new(lo - 0.01, 0.0),
            C64::new(lo - 0.3, 0.0),
            C64::new(lo - 1.5, 0.0),
            C64::new(lo + 0.4, 0.1),
            C64::new(lo + 1.0, -0.1),
        ]
    };
    let t = TreeGraph::new(k, depth)?;
    let b = SphericalBasis::build(&t)?;
    let (em, _) = weights(&t, delta)?;
    let e: Diagonal = em.map(|x| C64::new(x, 0.0));
    let mut out = io::stdout().lock();
    let mut worst: f64 = 0.0;
    for z in zs {
        let sp = SpectralPoint::from_z(k, z)?;
        let analytic = weighted_resolvent_kernel(&t, &b, &e, &e, &sp)?;
        let dense = weight_dense(&boundary_corrected_resolvent(&t, &sp)?, &e, &e);
        let rel = relative_frobenius(&analytic.entries, &dense);
        let abs = (&analytic.entries - &dense)
            .iter()
            .map(|x| x.norm())
            .fold(0.0, f64::max);
        worst = worst.max(rel);
        let line = KernelLine {
            k,
            depth,
            z: z.into(),
            relative_error: rel,
            max_abs_error: abs,
        };
        writeln!(
            out,
            "{}",
            serde_json::to_string(&line).map_err(|e| Failure::Usage(e.to_string()))?
        )?;
    }
    if worst <= tol {
        Ok(())
    } else {
        Err(Failure::Certification(format!(
            "relative error {worst:e} exceeds {tol:e}"
        )))
    }
}

#[derive(Serialize)]
struct LadderLine<'a> {
    radius: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    report: Option<&'a IndexReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<&'a str>,
}

#[derive(Serialize)]
struct ScanSummary<'a> {
    threshold: Threshold,
    rows: usize,
    ladder: Vec<LadderLine<'a>>,
    min_sv: f64,
    min_dist: f64,
    certified: bool,
}

fn scan(a: &ScanArgs, f: &FileConfig) -> Outcome {
    let k = a.k.or(f.k).unwrap_or(2);
    let bs = evaluator(k, &a.pot, f)?;
    let mut p = ScanParams::new(
        a.rmin.or(f.rmin).unwrap_or(0.02),
        a.rmax.or(f.rmax).unwrap_or(0.2),
        a.grid.or(f.grid).unwrap_or(32),
    );
    p.nodes = a.nodes.or(f.nodes).unwrap_or(256);
    ContourSpec::new(C64::default(), p.r_min, p.nodes)?;
    let min_sv = a.min_sv.or(f.min_sv).unwrap_or(1e-4);
    let residual_tol = a.residual_tol.or(f.residual_tol).unwrap_or(0.05);
    let rep = absence_scan(&bs, &p)?;

    let to_stdout = a.out.as_ref().is_none_or(|p| p.as_os_str() == "-") && f.out.is_none();
    let path = a.out.clone().or_else(|| f.out.clone());
    let mut w = output(&path)?;
    write_scan_csv(&rep.rows, &mut w)?;
    w.flush()?;

    let certified = rep.all_zero(residual_tol) && rep.min_sv > min_sv;
    let summary = ScanSummary {
        threshold: bs.threshold(),
        rows: rep.rows.len(),
        ladder: rep
            .ladder
            .iter()
            .map(|e| LadderLine {
                radius: e.radius,
                report: e.report.as_ref().ok(),
                error: e.report.as_ref().err().map(String::as_str),
            })
            .collect(),
        min_sv: rep.min_sv,
        min_dist: rep.min_dist,
        certified,
    };
    let text = serde_json::to_string(&summary).map_err(|e| Failure::Usage(e.to_string()))?;
    if to_stdout {
        eprintln!("{text}");
    } else {
        println!("{text}");
    }
    if certified {
        Ok(())
    } else {
        Err(Failure::Certification(format!(
            "ladder not certified zero or grid min_sv {:e} <= {min_sv:e}",
            rep.min_sv
        )))
    }
}

fn spectrum_cmd(a: &SpectrumArgs, f: &FileConfig) -> Outcome {
    let (k, depth) = tree_params(&a.tree, f);
    let spec = potential(&a.pot, f)?;
    let t = TreeGraph::new(k, depth)?;
    let pts = spectrum(&t, &spec, check_mode(&a.pot))?;
    let mut w = output(&a.out.clone().or_else(|| f.out.clone()))?;
    write_spectrum_csv(&pts, &mut w)?;
    w.flush()?;
    Ok(())
}

fn index(a: &IndexArgs, f: &FileConfig) -> Outcome {
    let k = a.k.or(f.k).unwrap_or(2);
    let bs = evaluator(k, &a.pot, f)?;
    let center = a.center.or(f.center.map(Into::into)).unwrap_or_default();
    let c = ContourSpec::new(
        center,
        a.radius.or(f.radius).unwrap_or(0.1),
        a.nodes.or(f.nodes).unwrap_or(256),
    )?;
    let opts = IndexOptions {
        residual_tol: a.residual_tol.or(f.residual_tol).unwrap_or(0.1),
        ..IndexOptions::default()
    };
    let rep = contour_index(&IPlusT(&bs), &c, &opts)?;
    println!("{}", rep.to_json()?);
    if rep.is_certified(&opts) {
        Ok(())
    } else {
        Err(Failure::Certification(format!(
            "residual {:e}, min singular value {:e}",
            rep.residual, rep.min_sv
        )))
    }
}
