//! Command-line front end. `run` parses arguments and returns the process
//! exit code: 0 pass, 1 usage or configuration error, 2 inconclusive,
//! 3 failed verdict.

pub mod config;

use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Deserialize;

pub use config::{build_basis, DomainConfig, ExperimentItem, Resolution, RunConfig, RUN_CONFIG_SCHEMA};

use crate::domains::io::{load_basis, save_basis};
use crate::domains::EigenBasis;
use crate::error::{Error, Result};
use crate::littlewood_paley::{make_partition, PartitionVariant};
use crate::norms::{
    amalgam_norm, besov_hom, besov_inhom, lebesgue, seminorm_pm, seminorm_qm, AmalgamParams, BesovParams, EstimateReport,
    NormRow, Verdict,
};
use crate::spectral::{
    apply_multiplier, endpoint_norms, heat_kernel, multiplier_kernel, projected_heat_l2_norm, synthesize, GridFunction,
    SpectralCoeffs, SymbolFn,
};
use crate::verify::{gaussian_fit, run_all, ExperimentId};

/// Environment variable naming the default output directory.
pub const OUT_ENV: &str = "NB_OUT";
const DEFAULT_OUT: &str = "nbesov-out";

/// `println!` that exits quietly once stdout is closed (`| head`).
macro_rules! outln {
    ($($arg:tt)*) => {{
        use std::io::Write as _;
        if writeln!(std::io::stdout(), $($arg)*).is_err() {
            std::process::exit(0);
        }
    }};
}

#[derive(Debug, Parser)]
#[command(name = "nbesov", version, about = "Neumann Laplacian spectral calculus and estimate checks")]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Build an eigenbasis and write it to a file.
    Basis(BasisArgs),
    /// Compute one norm of a function.
    Norm(NormArgs),
    /// Endpoint norms of a spectral multiplier, optionally applied to a function.
    Multiplier(MultiplierArgs),
    /// Heat kernel diagnostics over a range of times.
    Heat(HeatArgs),
    /// Run verification experiments.
    Verify(VerifyArgs),
    /// Summarize the reports in a directory.
    Report(ReportArgs),
    /// Print the run configuration schema.
    Schema,
}

/// Where the basis comes from: a saved file, or a domain and resolution
/// given by flags and/or a config file (flags win).
#[derive(Debug, Args)]
struct BasisSource {
    /// Saved basis file.
    #[arg(long, conflicts_with_all = ["shape", "config"])]
    basis: Option<PathBuf>,
    /// Run configuration supplying domain and resolution.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_parser = ["interval", "rectangle", "lshape", "square", "polygon"])]
    shape: Option<String>,
    /// Interval length.
    #[arg(long = "L")]
    length: Option<f64>,
    #[arg(long = "Lx")]
    lx: Option<f64>,
    #[arg(long = "Ly")]
    ly: Option<f64>,
    /// Polygon vertices as `x,y;x,y;...`.
    #[arg(long)]
    vertices: Option<String>,
    /// Number of modes.
    #[arg(long = "K")]
    k: Option<usize>,
    /// Grid cells (interval), or per axis (rectangle).
    #[arg(long = "N")]
    n: Option<usize>,
    #[arg(long = "Nx")]
    nx: Option<usize>,
    #[arg(long = "Ny")]
    ny: Option<usize>,
    /// Finite-difference spacing for polygons.
    #[arg(long)]
    h: Option<f64>,
}

impl BasisSource {
    fn config(&self) -> Result<Option<RunConfig>> {
        self.config.as_deref().map(RunConfig::load).transpose()
    }

    fn domain(&self, cfg: Option<&RunConfig>) -> Result<DomainConfig> {
        let need = |v: Option<f64>, name: &str| {
            v.ok_or_else(|| Error::InvalidParameter(format!("--shape {} needs --{name}", self.shape.as_deref().unwrap_or(""))))
        };
        Ok(match self.shape.as_deref() {
            Some("interval") => DomainConfig::Interval { length: need(self.length, "L")? },
            Some("rectangle") => DomainConfig::Rectangle { lx: need(self.lx, "Lx")?, ly: need(self.ly, "Ly")? },
            Some("lshape") => DomainConfig::Lshape,
            Some("square") => DomainConfig::Square,
            Some("polygon") => {
                let text = self
                    .vertices
                    .as_deref()
                    .ok_or_else(|| Error::InvalidParameter("--shape polygon needs --vertices".into()))?;
                DomainConfig::Polygon { vertices: parse_vertices(text)? }
            }
            Some(other) => return Err(Error::InvalidParameter(format!("unknown shape '{other}'"))),
            None => cfg
                .and_then(|c| c.domain.clone())
                .ok_or_else(|| Error::InvalidParameter("no domain: pass --basis, --shape or --config".into()))?,
        })
    }

    fn resolution(&self, cfg: Option<&RunConfig>) -> Result<Resolution> {
        let base = cfg.and_then(|c| c.resolution.clone()).unwrap_or_default();
        let k = self.k.unwrap_or(base.k);
        if k == 0 {
            return Err(Error::InvalidParameter("number of modes --K is required".into()));
        }
        Ok(Resolution {
            k,
            n: self.n.or(base.n),
            nx: self.nx.or(base.nx),
            ny: self.ny.or(base.ny),
            h: self.h.or(base.h),
        })
    }

    fn load(&self) -> Result<EigenBasis> {
        if let Some(path) = &self.basis {
            return load_basis(path);
        }
        let cfg = self.config()?;
        build_basis(&self.domain(cfg.as_ref())?, &self.resolution(cfg.as_ref())?)
    }
}

fn parse_vertices(text: &str) -> Result<Vec<[f64; 2]>> {
    text.split(';')
        .filter(|s| !s.trim().is_empty())
        .map(|pair| {
            let xy: Vec<f64> = pair.split(',').map(|v| v.trim().parse::<f64>()).collect::<std::result::Result<_, _>>().map_err(
                |e| Error::InvalidParameter(format!("bad vertex '{pair}': {e}")),
            )?;
            match xy[..] {
                [x, y] => Ok([x, y]),
                _ => Err(Error::InvalidParameter(format!("vertex '{pair}' needs two coordinates"))),
            }
        })
        .collect()
}

/// Accepts a number, or `inf` for infinity.
fn parse_exponent(s: &str) -> std::result::Result<f64, String> {
    match s.trim().to_ascii_lowercase().as_str() {
        "inf" | "infinity" | "∞" => Ok(f64::INFINITY),
        t => {
            let v: f64 = t.parse().map_err(|e| format!("{e}"))?;
            if v >= 1.0 {
                Ok(v)
            } else {
                Err(format!("exponent {v} is not in [1, inf]"))
            }
        }
    }
}

fn fmt_exponent(p: f64) -> String {
    if p.is_infinite() {
        "inf".into()
    } else {
        format!("{p}")
    }
}

#[derive(Debug, Args)]
struct BasisArgs {
    #[command(flatten)]
    source: BasisSource,
    /// Output file; defaults to `basis.nbb` in the output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
enum NormKind {
    Besov,
    BesovHom,
    Lebesgue,
    Amalgam,
    Pm,
    Qm,
}

/// Function input: point values on the grid or spectral coefficients.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct FunctionFile {
    #[serde(default)]
    values: Option<Vec<f64>>,
    #[serde(default)]
    coefficients: Option<Vec<f64>>,
}

#[derive(Debug, Args)]
struct FunctionSource {
    /// JSON file with `values` or `coefficients`.
    #[arg(long, conflicts_with = "mode")]
    input: Option<PathBuf>,
    /// Use the eigenfunction with this 1-based index instead of a file.
    #[arg(long)]
    mode: Option<usize>,
}

impl FunctionSource {
    fn is_set(&self) -> bool {
        self.input.is_some() || self.mode.is_some()
    }

    fn load(&self, basis: &EigenBasis) -> Result<GridFunction> {
        if let Some(k) = self.mode {
            if k == 0 || k > basis.len() {
                return Err(Error::InvalidParameter(format!("--mode {k} outside 1..={}", basis.len())));
            }
            let mut c = vec![0.0; basis.len()];
            c[k - 1] = 1.0;
            return synthesize(&SpectralCoeffs(c), basis);
        }
        let path = self.input.as_ref().ok_or_else(|| Error::InvalidParameter("pass --input or --mode".into()))?;
        let text = std::fs::read_to_string(path)?;
        let file: FunctionFile =
            serde_json::from_str(&text).map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
        match (file.values, file.coefficients) {
            (Some(v), None) => GridFunction::new(basis.grid_arc().clone(), v),
            (None, Some(c)) => synthesize(&SpectralCoeffs(c), basis),
            _ => Err(Error::Format(format!("{}: give exactly one of 'values' or 'coefficients'", path.display()))),
        }
    }
}

#[derive(Debug, Args)]
struct NormArgs {
    #[command(flatten)]
    source: BasisSource,
    #[command(flatten)]
    function: FunctionSource,
    #[arg(long, value_enum)]
    kind: NormKind,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    s: f64,
    #[arg(long, default_value = "2", value_parser = parse_exponent)]
    p: f64,
    #[arg(long, default_value = "2", value_parser = parse_exponent)]
    q: f64,
    /// Order of the p_M / q_M seminorms.
    #[arg(long, default_value_t = 1)]
    m: u32,
    /// Cube scale for the amalgam norm; cubes have side sqrt(theta).
    #[arg(long)]
    theta: Option<f64>,
    #[arg(long, default_value = "standard")]
    pou: PartitionVariant,
    /// Also append the row to this CSV file.
    #[arg(long)]
    append: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct MultiplierArgs {
    #[command(flatten)]
    source: BasisSource,
    #[command(flatten)]
    function: FunctionSource,
    /// `heat:T`, `resolvent:BETA:M`, `block:J:ALPHA`, `lowpass:THETA:M` or `one`.
    #[arg(long)]
    symbol: String,
    #[arg(long, default_value = "standard")]
    pou: PartitionVariant,
    /// Write the transformed function here as JSON.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct HeatArgs {
    #[command(flatten)]
    source: BasisSource,
    /// Smallest time; defaults to h^2.
    #[arg(long)]
    t_min: Option<f64>,
    #[arg(long, default_value_t = 10.0)]
    t_max: f64,
    #[arg(long, default_value_t = 16)]
    count: usize,
    /// Also fit the Gaussian upper bound constants.
    #[arg(long)]
    fit: bool,
}

#[derive(Debug, Args)]
struct VerifyArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    /// Experiment ids, comma separated or repeated.
    #[arg(long, value_delimiter = ',')]
    only: Vec<ExperimentId>,
    /// Experiments run concurrently; defaults to the available cores.
    #[arg(long)]
    jobs: Option<usize>,
    #[arg(long)]
    negative_control: bool,
    #[arg(long)]
    pou: Option<PartitionVariant>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ReportArgs {
    #[arg(long)]
    dir: PathBuf,
}

/// `--out` beats the config file, which beats `NB_OUT`.
fn output_dir(flag: Option<&Path>, cfg: Option<&RunConfig>) -> PathBuf {
    flag.map(Path::to_path_buf)
        .or_else(|| cfg.and_then(|c| c.output_dir.clone()))
        .or_else(|| std::env::var_os(OUT_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT))
}

pub fn parse_symbol(text: &str, pou: PartitionVariant) -> Result<SymbolFn> {
    let parts: Vec<&str> = text.split(':').collect();
    let num = |i: usize| -> Result<f64> {
        parts
            .get(i)
            .ok_or_else(|| Error::InvalidParameter(format!("symbol '{text}' is missing argument {i}")))?
            .parse::<f64>()
            .map_err(|e| Error::InvalidParameter(format!("symbol '{text}': {e}")))
    };
    let arity = |n: usize| -> Result<()> {
        if parts.len() == n + 1 {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!("symbol '{}' takes {n} argument(s)", parts[0])))
        }
    };
    let pou = make_partition(pou);
    match parts[0] {
        "one" => arity(0).map(|_| SymbolFn::one()),
        "heat" => {
            arity(1)?;
            Ok(SymbolFn::heat(num(1)?))
        }
        "resolvent" => {
            arity(2)?;
            Ok(SymbolFn::resolvent(num(1)?, num(2)?))
        }
        "block" => {
            arity(2)?;
            let j = num(1)?;
            if j.fract() != 0.0 {
                return Err(Error::InvalidParameter(format!("block index {j} is not an integer")));
            }
            Ok(SymbolFn::block(pou, j as i32, num(2)?))
        }
        "lowpass" => {
            arity(2)?;
            let m = num(2)?;
            if m.fract() != 0.0 {
                return Err(Error::InvalidParameter(format!("power {m} is not an integer")));
            }
            Ok(SymbolFn::low_pass(pou, num(1)?, m as i32))
        }
        other => Err(Error::InvalidParameter(format!("unknown symbol '{other}'"))),
    }
}

/// Parse and dispatch; returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

fn dispatch(cmd: Command) -> Result<i32> {
    match cmd {
        Command::Basis(a) => cmd_basis(a),
        Command::Norm(a) => cmd_norm(a),
        Command::Multiplier(a) => cmd_multiplier(a),
        Command::Heat(a) => cmd_heat(a),
        Command::Verify(a) => cmd_verify(a),
        Command::Report(a) => cmd_report(a),
        Command::Schema => {
            outln!("{}", RUN_CONFIG_SCHEMA.trim_end());
            Ok(0)
        }
    }
}

fn cmd_basis(a: BasisArgs) -> Result<i32> {
    let cfg = a.source.config()?;
    let basis = a.source.load()?;
    let path = match a.out {
        Some(p) => p,
        None => output_dir(None, cfg.as_ref()).join("basis.nbb"),
    };
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    save_basis(&path, &basis)?;
    outln!("{} K={} points={} lambda_max={:e}", basis.domain().label(), basis.len(), basis.grid().len(), basis.lambda_max());
    for (i, l) in basis.eigenvalues().iter().take(10).enumerate() {
        outln!("lambda_{} = {l:.12e}", i + 1);
    }
    outln!("wrote {}", path.display());
    Ok(0)
}

fn cmd_norm(a: NormArgs) -> Result<i32> {
    let basis = a.source.load()?;
    let f = a.function.load(&basis)?;
    let pou = make_partition(a.pou);
    let besov = BesovParams::for_basis(&basis, a.s, a.p, a.q);
    let (p, q) = (fmt_exponent(a.p), fmt_exponent(a.q));
    let row = match a.kind {
        NormKind::Besov => NormRow {
            norm_id: "besov".into(),
            params: format!("s={};p={p};q={q};pou={}", a.s, a.pou),
            value: besov_inhom(&f, &besov, &pou, &basis)?,
            tail_bound: 0.0,
        },
        NormKind::BesovHom => {
            let h = besov_hom(&f, &besov, &pou, &basis)?;
            NormRow {
                norm_id: "besov_hom".into(),
                params: format!("s={};p={p};q={q};pou={};j_min={}", a.s, a.pou, besov.j_min),
                value: h.value,
                tail_bound: h.tail_bound,
            }
        }
        NormKind::Lebesgue => {
            NormRow { norm_id: "lebesgue".into(), params: format!("p={p}"), value: lebesgue(&f, a.p)?, tail_bound: 0.0 }
        }
        NormKind::Amalgam => {
            let theta = a.theta.ok_or_else(|| Error::InvalidParameter("--kind amalgam needs --theta".into()))?;
            NormRow {
                norm_id: "amalgam".into(),
                params: format!("p={p};q={q};theta={theta}"),
                value: amalgam_norm(&f, &AmalgamParams { p: a.p, q: a.q, theta })?,
                tail_bound: 0.0,
            }
        }
        NormKind::Pm | NormKind::Qm => {
            let (id, v) = if a.kind == NormKind::Pm {
                ("p_m", seminorm_pm(&f, a.m, &pou, &basis)?)
            } else {
                ("q_m", seminorm_qm(&f, a.m, &pou, &basis)?)
            };
            NormRow {
                norm_id: id.into(),
                params: format!("m={};pou={};j_max={};in_class={}", a.m, a.pou, v.j_max, v.in_class),
                value: v.value,
                tail_bound: 0.0,
            }
        }
    };
    outln!("{}", NormRow::CSV_HEADER);
    outln!("{}", row.to_csv());
    if let Some(path) = a.append {
        use std::io::Write;
        let fresh = !path.exists();
        let mut file = std::fs::OpenOptions::new().create(true).append(true).open(&path)?;
        if fresh {
            writeln!(file, "{}", NormRow::CSV_HEADER)?;
        }
        writeln!(file, "{}", row.to_csv())?;
    }
    Ok(0)
}

fn cmd_multiplier(a: MultiplierArgs) -> Result<i32> {
    let basis = a.source.load()?;
    let sym = parse_symbol(&a.symbol, a.pou)?;
    let e = endpoint_norms(&multiplier_kernel(&sym, &basis)?)?;
    outln!("symbol,l1_l1,l1_linf,linf_linf,l2_l2");
    outln!("\"{}\",{:e},{:e},{:e},{:e}", sym.label(), e.l1_l1, e.l1_linf, e.linf_linf, e.l2_l2);
    if a.function.is_set() {
        let f = a.function.load(&basis)?;
        let g = apply_multiplier(&sym, &f, &basis)?;
        outln!("||f||_2 = {:e}, ||phi(H) f||_2 = {:e}", f.lp_norm(2.0)?, g.lp_norm(2.0)?);
        if let Some(path) = a.out {
            std::fs::write(&path, serde_json::to_string(&serde_json::json!({ "values": g.values() }))?)?;
            outln!("wrote {}", path.display());
        }
    }
    Ok(0)
}

fn cmd_heat(a: HeatArgs) -> Result<i32> {
    let basis = a.source.load()?;
    let h = basis.grid().h();
    let t0 = a.t_min.unwrap_or(h * h);
    if !(t0 > 0.0 && t0 < a.t_max) || a.count < 2 {
        return Err(Error::InvalidParameter("need 0 < t_min < t_max and count >= 2".into()));
    }
    let ts = crate::littlewood_paley::log_samples(t0, a.t_max, a.count);
    let l2 = basis.eigenvalues().get(1).copied().unwrap_or(f64::INFINITY);
    outln!("t,max_diagonal,tail_bound,projected_l2,exp_minus_lambda2_t");
    for &t in &ts {
        let k = heat_kernel(t, &basis)?;
        let diag = (0..k.rows()).map(|i| k.get(i, i)).fold(0.0, f64::max);
        outln!("{t:e},{diag:e},{:e},{:e},{:e}", k.tail_bound, projected_heat_l2_norm(t, &basis), (-l2 * t).exp());
    }
    if a.fit {
        let fit = gaussian_fit(&basis, &ts, None)?;
        outln!("c3 = {:e}, c4 = {:e}, times kept = {}, dropped = {}", fit.c3, fit.c4, fit.times.len(), fit.dropped.len());
    }
    Ok(0)
}

fn write_report(dir: &Path, r: &EstimateReport) -> Result<()> {
    std::fs::write(dir.join(format!("{}.json", r.id)), r.to_json())?;
    std::fs::write(dir.join(format!("{}.csv", r.id)), r.to_csv())?;
    for (series, text) in r.plot_series() {
        std::fs::write(dir.join(format!("{}_{series}.dat", r.id)), text)?;
    }
    Ok(())
}

fn summary_table(reports: &[EstimateReport]) -> (String, Verdict) {
    let mut out = String::new();
    let mut worst = Verdict::Pass;
    let _ = writeln!(out, "{:<32} {:<12} {:>7} {:>7}  runtime", "experiment", "verdict", "checks", "failed");
    for r in reports {
        let failed = r.checks.iter().filter(|c| !c.pass).count();
        let _ = writeln!(
            out,
            "{:<32} {:<12} {:>7} {:>7}  {:.2?}",
            r.id,
            r.verdict.to_string(),
            r.checks.len(),
            failed,
            r.runtime
        );
        worst = worst.and(r.verdict);
    }
    let _ = writeln!(out, "overall: {worst}");
    (out, worst)
}

fn cmd_verify(a: VerifyArgs) -> Result<i32> {
    let mut cfg = match &a.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    if let Some(p) = a.pou {
        cfg.pou = p;
    }
    let mut specs = cfg.specs();
    if !a.only.is_empty() {
        specs = a
            .only
            .iter()
            .map(|id| {
                specs.iter().find(|s| s.id == *id).cloned().unwrap_or_else(|| {
                    let mut s = crate::verify::ExperimentSpec::new(*id);
                    s.seed = cfg.seed;
                    s.pou = cfg.pou;
                    s.negative_control = cfg.negative_control;
                    s
                })
            })
            .collect();
    }
    for s in &mut specs {
        if a.seed.is_some() {
            s.seed = cfg.seed;
        }
        if a.pou.is_some() {
            s.pou = cfg.pou;
        }
        if a.negative_control {
            s.negative_control = true;
        }
    }
    let dir = output_dir(a.out.as_deref(), Some(&cfg));
    std::fs::create_dir_all(&dir)?;

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(a.jobs.unwrap_or(0))
        .build()
        .map_err(|e| Error::InvalidParameter(format!("thread pool: {e}")))?;
    let results = pool.install(|| run_all(&specs));

    let mut reports = Vec::new();
    let mut errors = Vec::new();
    for (spec, res) in specs.iter().zip(results) {
        match res {
            Ok(r) => {
                write_report(&dir, &r)?;
                reports.push(r);
            }
            Err(e) => errors.push(format!("{}: {e}", spec.id)),
        }
    }
    let (table, worst) = summary_table(&reports);
    print!("{table}");
    std::fs::write(dir.join("summary.txt"), &table)?;
    for e in &errors {
        eprintln!("error: {e}");
    }
    if !errors.is_empty() {
        return Ok(1);
    }
    Ok(worst.exit_code())
}

fn cmd_report(a: ReportArgs) -> Result<i32> {
    let mut paths: Vec<PathBuf> = std::fs::read_dir(&a.dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    paths.sort();
    let mut reports = Vec::new();
    for p in paths {
        let text = std::fs::read_to_string(&p)?;
        if let Ok(r) = serde_json::from_str::<EstimateReport>(&text) {
            reports.push(r);
        }
    }
    if reports.is_empty() {
        return Err(Error::InvalidParameter(format!("no reports in {}", a.dir.display())));
    }
    let (table, worst) = summary_table(&reports);
    print!("{table}");
    Ok(worst.exit_code())
}
