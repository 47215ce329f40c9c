use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use cazac::anneal::{anneal_best_of, AnnealConfig, AnnealResult};
use cazac::families::{C0cTriple, Cazac4Variant, FamilySpec, S8Set};
use cazac::io::{
    format_sig, write_atomic, write_csv_with_manifest, write_sequence_file, Repr, RunManifest, SequenceFile,
};
use cazac::ipuc::{ipuc_batch, ipuc_run, IpucConfig, IpucResult};
use cazac::metrics::{discrepancy, lobe_ratio, lobe_ratio_upper_bound_db};
use cazac::newton::{newton_solve_with, JacobianMode, NewtonOptions, DEFAULT_INIT};
use cazac::seqcore::{canonicalize, project_unit_circle};
use cazac::transforms::{apply_chain, classify8, matching_chains, EquivalenceClass, TransformChain, DEFAULT_TOL};
use cazac::{ComplexSequence, Error, Result};

const EXIT_USAGE: u8 = 1;
const EXIT_VALIDATION: u8 = 2;
const EXIT_NON_CONVERGENCE: u8 = 3;

#[derive(Debug, Parser)]
#[command(name = "cazac", version, about = "Generate, verify, classify and optimize CAZAC sequences")]
struct Cli {
    /// Emit single-line JSON.
    #[arg(long, global = true)]
    json_compact: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Near-CAZAC sequences by iterative unit-circle projection.
    Generate(GenerateArgs),
    /// Members of the analytic families.
    Family(FamilyArgs),
    /// Discrepancies and lobe ratio of a sequence file.
    Verify(VerifyArgs),
    /// Equivalence class of a length-8 sequence.
    Classify(ClassifyArgs),
    /// Simulated annealing on the non-circular sidelobe ratio.
    OptimizeRadar(RadarArgs),
    /// Apply a transform chain such as `C0.M2.D5.T0`.
    Transform(TransformArgs),
    /// Newton solve for the C0c triple and its eight sequences.
    SolveC0c(SolveArgs),
    /// Figure data as CSV.
    Figures(FiguresArgs),
}

#[derive(Debug, Args)]
struct GenerateArgs {
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 1e-3)]
    epsilon: f64,
    #[arg(long, default_value_t = 100_000)]
    max_iters: usize,
    /// Maximum number of restarts; 0 disables restarts.
    #[arg(long, default_value_t = 50)]
    restarts: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1)]
    count: usize,
    #[arg(long)]
    trajectory_out: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value = "s")]
    repr: Repr,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum FamilyName {
    Zc,
    Popovic,
    Wiener,
    P4,
    Bjorck,
    Cazac4,
    S8,
    C0a,
    C0b,
    C0c,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum VariantArg {
    A,
    B,
}

#[derive(Debug, Args)]
struct FamilyArgs {
    #[arg(long, value_enum)]
    name: FamilyName,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long, default_value_t = 1)]
    u: usize,
    #[arg(long, default_value_t = 0)]
    q: usize,
    /// Popovic block size, or the Wiener multiplier.
    #[arg(long)]
    m: Option<usize>,
    /// Popovic weights, comma separated (defaults to zeros).
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    w: Vec<f64>,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    theta: f64,
    #[arg(long, value_enum, default_value = "a")]
    variant: VariantArg,
    /// Length-8 set, e.g. `11`, `34` or `S23:4`.
    #[arg(long, default_value = "11")]
    set: String,
    #[arg(long, default_value_t = 0)]
    index: usize,
    /// C0c triple `a,b,c` (defaults to the seven-digit reference root).
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    triple: Vec<f64>,
    #[arg(long, default_value = "s")]
    repr: Repr,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct VerifyArgs {
    /// Sequence file (JSON or CSV); stdin when omitted or `-`.
    #[arg(long = "in")]
    input: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ClassifyArgs {
    #[arg(long = "in", conflicts_with = "batch")]
    input: Option<PathBuf>,
    /// Directory of sequence files; emits one CSV row per file.
    #[arg(long)]
    batch: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_TOL)]
    tol: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct RadarArgs {
    #[arg(long, required_unless_present = "n_range", conflicts_with = "n_range")]
    n: Option<usize>,
    /// Inclusive sweep `lo:hi`; emits `n,rho_db,upper_bound_db` CSV.
    #[arg(long)]
    n_range: Option<String>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Independent chains with seeds `seed, seed+1, …`; the best is kept.
    #[arg(long, default_value_t = 1)]
    best_of: usize,
    #[arg(long, default_value_t = 0.97)]
    cooling: f64,
    /// Moves per temperature level.
    #[arg(long, default_value_t = 50)]
    steps: usize,
    #[arg(long, default_value_t = 1.0)]
    perturb_scale: f64,
    #[arg(long, default_value = "s")]
    repr: Repr,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    history_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct TransformArgs {
    #[arg(long = "in")]
    input: Option<PathBuf>,
    #[arg(long)]
    chain: String,
    #[arg(long, default_value = "s")]
    repr: Repr,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum JacobianArg {
    Fd,
    Analytic,
}

#[derive(Debug, Args)]
struct SolveArgs {
    /// Starting point `a,b,c`.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    init: Vec<f64>,
    #[arg(long, default_value_t = 1e-12)]
    tol: f64,
    #[arg(long, default_value_t = 100)]
    max_iters: usize,
    #[arg(long, value_enum, default_value = "fd")]
    jacobian: JacobianArg,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum FigureKind {
    Fig1,
    Fig2,
    Fig3,
}

#[derive(Debug, Args)]
struct FiguresArgs {
    #[arg(value_enum)]
    kind: FigureKind,
    #[arg(long)]
    out: Option<PathBuf>,
    /// fig1 length (default 50).
    #[arg(long)]
    n: Option<usize>,
    /// Runs (fig1 default 20, fig3 default 1000).
    #[arg(long)]
    count: Option<usize>,
    /// Stopping threshold (fig1 default 1e-3, fig3 default 1e-4).
    #[arg(long)]
    epsilon: Option<f64>,
    /// Iteration budget per run (fig1 default 10000, fig3 default 100000).
    #[arg(long)]
    max_iters: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// fig2 sweep `lo:hi` (default 2:50).
    #[arg(long)]
    n_range: Option<String>,
    /// fig2 moves per temperature level.
    #[arg(long, default_value_t = 50)]
    steps: usize,
    /// fig3 classification tolerance.
    #[arg(long, default_value_t = DEFAULT_TOL)]
    tol: f64,
}

struct Output {
    compact: bool,
}

impl Output {
    fn json(&self, value: &impl Serialize, path: Option<&Path>) -> Result<()> {
        let mut text = if self.compact {
            serde_json::to_string(value)?
        } else {
            serde_json::to_string_pretty(value)?
        };
        text.push('\n');
        match path {
            Some(p) => write_atomic(p, text.as_bytes()),
            None => print_stdout(&text),
        }
    }

    /// Sequence output: CSV with a manifest sidecar when `path` ends in
    /// `.csv`, otherwise the JSON `record`.
    fn sequence(&self, record: &Value, file: &SequenceFile, path: Option<&Path>) -> Result<()> {
        match path {
            Some(p) if is_csv(p) => write_sequence_file(p, file, self.compact),
            _ => self.json(record, path),
        }
    }

    fn csv(&self, body: &str, path: Option<&Path>, manifest: &RunManifest) -> Result<()> {
        match path {
            Some(p) => write_csv_with_manifest(p, body, manifest),
            None => print_stdout(body),
        }
    }
}

fn is_csv(path: &Path) -> bool {
    path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv"))
}

fn print_stdout(text: &str) -> Result<()> {
    let mut out = std::io::stdout().lock();
    out.write_all(text.as_bytes())?;
    out.flush()?;
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_USAGE)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    if let Err(e) = configure_threads() {
        eprintln!("error: {e}");
        return ExitCode::from(EXIT_USAGE);
    }
    let out = Output {
        compact: cli.json_compact,
    };
    match dispatch(cli.command, &out) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::NonConvergence { .. } | Error::MaxIters { .. } | Error::SingularJacobian { .. } => EXIT_NON_CONVERGENCE,
        _ => EXIT_VALIDATION,
    }
}

/// Caps the rayon pool at `CAZAC_THREADS` when set.
fn configure_threads() -> std::result::Result<(), String> {
    let Ok(raw) = std::env::var("CAZAC_THREADS") else {
        return Ok(());
    };
    let threads: usize = raw
        .trim()
        .parse()
        .map_err(|_| format!("CAZAC_THREADS must be a positive integer, got `{raw}`"))?;
    if threads == 0 {
        return Err("CAZAC_THREADS must be at least 1".into());
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| e.to_string())
}

fn dispatch(command: Command, out: &Output) -> Result<()> {
    match command {
        Command::Generate(a) => generate(a, out),
        Command::Family(a) => family(a, out),
        Command::Verify(a) => verify(a, out),
        Command::Classify(a) => classify(a, out),
        Command::OptimizeRadar(a) => optimize_radar(a, out),
        Command::Transform(a) => transform(a, out),
        Command::SolveC0c(a) => solve_c0c(a, out),
        Command::Figures(a) => figures(a, out),
    }
}

fn read_input(path: Option<&Path>) -> Result<ComplexSequence> {
    let text = match path {
        Some(p) if p.as_os_str() != "-" => fs::read_to_string(p)?,
        _ => {
            let mut s = String::new();
            std::io::stdin().read_to_string(&mut s)?;
            s
        }
    };
    SequenceFile::parse(&text)?.to_sequence()
}

/// Sequence fields merged with command-specific fields.
fn sequence_record(
    x: &ComplexSequence,
    repr: Repr,
    extra: Value,
    manifest: Option<RunManifest>,
) -> Result<(Value, SequenceFile)> {
    let mut file = SequenceFile::from_sequence(x, repr)?;
    file.manifest = manifest;
    let mut value = serde_json::to_value(&file)?;
    if let (Value::Object(map), Value::Object(extra)) = (&mut value, extra) {
        map.extend(extra);
    }
    Ok((value, file))
}

fn parse_range(s: &str) -> Result<(usize, usize)> {
    let bad = || Error::InvalidParameter(format!("range must look like `lo:hi`, got `{s}`"));
    let (lo, hi) = s.split_once(':').ok_or_else(bad)?;
    let lo: usize = lo.trim().parse().map_err(|_| bad())?;
    let hi: usize = hi.trim().parse().map_err(|_| bad())?;
    if lo < 2 || hi < lo {
        return Err(Error::InvalidParameter(format!("range needs 2 <= lo <= hi, got {lo}:{hi}")));
    }
    Ok((lo, hi))
}

fn ipuc_record(
    run_id: usize,
    res: &IpucResult,
    repr: Repr,
    manifest: Option<RunManifest>,
) -> Result<(Value, SequenceFile)> {
    sequence_record(
        &res.sequence,
        repr,
        json!({
            "run_id": run_id,
            "converged": res.converged,
            "iterations": res.iterations,
            "restarts": res.restarts,
            "d": res.report.d(),
            "d_ca": res.report.d_ca(),
            "d_zac": res.report.d_zac(),
        }),
        manifest,
    )
}

fn trajectory_csv(results: &[IpucResult]) -> String {
    let mut body = String::from("run_id,iteration,discrepancy\n");
    for (id, res) in results.iter().enumerate() {
        for p in &res.trajectory {
            body.push_str(&format!("{id},{},{}\n", p.iteration, format_sig(p.discrepancy)));
        }
    }
    body
}

fn generate(a: GenerateArgs, out: &Output) -> Result<()> {
    let cfg = IpucConfig {
        epsilon: a.epsilon,
        max_iters: a.max_iters,
        max_restarts: a.restarts,
        seed: a.seed,
        ..IpucConfig::default()
    };
    cfg.validate()?;
    if a.count == 0 {
        return Err(Error::InvalidParameter("count must be at least 1".into()));
    }
    let mut manifest = RunManifest::new("generate", Some(a.seed))
        .with("n", a.n)
        .with("count", a.count)
        .with("ipuc", &cfg);
    let results = if a.count == 1 {
        vec![ipuc_run(a.n, &cfg)?]
    } else {
        ipuc_batch(a.n, a.count, &cfg)?
    };
    manifest.finish();

    if let Some(path) = &a.trajectory_out {
        write_csv_with_manifest(path, &trajectory_csv(&results), &manifest)?;
    }
    if a.count == 1 {
        let (value, file) = ipuc_record(0, &results[0], a.repr, Some(manifest))?;
        out.sequence(&value, &file, a.out.as_deref())?;
    } else {
        let runs = results
            .iter()
            .enumerate()
            .map(|(i, r)| ipuc_record(i, r, a.repr, None).map(|(v, _)| v))
            .collect::<Result<Vec<_>>>()?;
        out.json(&json!({ "manifest": manifest, "runs": runs }), a.out.as_deref())?;
    }

    let failed: Vec<&IpucResult> = results.iter().filter(|r| !r.converged).collect();
    if let Some(worst) = failed.iter().max_by(|x, y| x.report.d().total_cmp(&y.report.d())) {
        log::warn!("{} of {} run(s) did not converge", failed.len(), results.len());
        return Err(Error::NonConvergence {
            iterations: worst.iterations,
            restarts: worst.restarts,
            best: worst.report.d(),
        });
    }
    Ok(())
}

fn family_spec(a: &FamilyArgs) -> Result<FamilySpec> {
    let need_n = || {
        a.n.ok_or_else(|| Error::InvalidParameter(format!("family {:?} requires --n", a.name)))
    };
    let spec = match a.name {
        FamilyName::Zc => FamilySpec::ZadoffChu {
            n: need_n()?,
            u: a.u,
            q: a.q,
        },
        FamilyName::Popovic => {
            let m = a
                .m
                .ok_or_else(|| Error::InvalidParameter("family popovic requires --m".into()))?;
            let w = if a.w.is_empty() { vec![0.0; m] } else { a.w.clone() };
            FamilySpec::Popovic {
                n: need_n()?,
                m,
                w,
                u: a.u,
                q: a.q,
            }
        }
        FamilyName::Wiener => FamilySpec::Wiener {
            n: need_n()?,
            m: a.m.unwrap_or(1),
        },
        FamilyName::P4 => FamilySpec::P4 { n: need_n()? },
        FamilyName::Bjorck => FamilySpec::Bjorck { n: need_n()? },
        FamilyName::Cazac4 => FamilySpec::Cazac4 {
            variant: match a.variant {
                VariantArg::A => Cazac4Variant::A,
                VariantArg::B => Cazac4Variant::B,
            },
            theta: a.theta,
        },
        FamilyName::S8 => FamilySpec::S8 {
            set: a.set.parse::<S8Set>()?,
            theta: a.theta,
        },
        FamilyName::C0a => FamilySpec::C0a,
        FamilyName::C0b => FamilySpec::C0b { index: a.index },
        FamilyName::C0c => {
            let triple = match a.triple.as_slice() {
                [] => C0cTriple::REFERENCE,
                [x, y, z] => C0cTriple::new(*x, *y, *z),
                other => {
                    return Err(Error::InvalidParameter(format!(
                        "--triple needs three values, got {}",
                        other.len()
                    )))
                }
            };
            FamilySpec::C0c { index: a.index, triple }
        }
    };
    if let Some(n) = a.n {
        if n != spec.n() {
            return Err(Error::InvalidParameter(format!(
                "family {:?} has length {}, got --n {n}",
                a.name,
                spec.n()
            )));
        }
    }
    Ok(spec)
}

fn family(a: FamilyArgs, out: &Output) -> Result<()> {
    let spec = family_spec(&a)?;
    let x = spec.build()?;
    let mut manifest = RunManifest::new("family", None)
        .with("spec", format!("{spec:?}"))
        .with("repr", a.repr.to_string());
    manifest.finish();
    let (value, file) = sequence_record(&x, a.repr, json!({}), Some(manifest))?;
    out.sequence(&value, &file, a.out.as_deref())
}

fn verify(a: VerifyArgs, out: &Output) -> Result<()> {
    let x = read_input(a.input.as_deref())?;
    let report = discrepancy(&x);
    let lobe = lobe_ratio(&x).ok();
    let value = json!({
        "d_ca": report.d_ca(),
        "d_zac": report.d_zac(),
        "d": report.d(),
        "rho_db": lobe.as_ref().map(|l| l.rho_db),
        "upper_bound_db": lobe_ratio_upper_bound_db(x.len()),
        "argmax_tau": lobe.as_ref().map(|l| l.argmax_tau),
    });
    out.json(&value, a.out.as_deref())
}

fn classify(a: ClassifyArgs, out: &Output) -> Result<()> {
    if let Some(dir) = &a.batch {
        return classify_batch(dir, a.tol, a.out.as_deref(), out);
    }
    let x = read_input(a.input.as_deref())?;
    let label = classify8(&x, a.tol)?;
    let (row, conjugate, theta_hat) = match label.class {
        EquivalenceClass::Popovic { row, theta } => (Some(row.row), Some(row.conjugate), Some(theta)),
        _ => (None, None, None),
    };
    let witnesses: Vec<String> = match label.class.kind() {
        Some(kind) => matching_chains(&x, kind, a.tol)?
            .iter()
            .map(|c| c.to_string())
            .collect(),
        None => Vec::new(),
    };
    let value = json!({
        "class": label.class.name(),
        "row": row,
        "conjugate": conjugate,
        "theta_hat": theta_hat,
        "chain": label.chain.as_ref().map(|c| c.to_string()),
        "match_error": label.match_error,
        "witnesses": witnesses,
    });
    out.json(&value, a.out.as_deref())
}

/// Canonical phases at positions 1, 5, 2, 3 and the class name.
fn scatter_row(x: &ComplexSequence, tol: f64) -> Result<([f64; 4], &'static str)> {
    if x.len() != 8 {
        return Err(Error::LengthMismatch { expected: 8, got: x.len() });
    }
    let theta = canonicalize(&project_unit_circle(x))?;
    let t = theta.thetas();
    let class = classify8(x, tol).map(|l| l.class.name()).unwrap_or("Unknown");
    Ok(([t[1], t[5], t[2], t[3]], class))
}

fn scatter_line(prefix: &str, thetas: &[f64; 4], class: &str) -> String {
    let cols: Vec<String> = thetas.iter().map(|&v| format_sig(v)).collect();
    format!("{prefix},{},{class}\n", cols.join(","))
}

fn classify_batch(dir: &Path, tol: f64, path: Option<&Path>, out: &Output) -> Result<()> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.extension()
                .and_then(|e| e.to_str())
                .is_some_and(|e| e.eq_ignore_ascii_case("json") || e.eq_ignore_ascii_case("csv"))
                && !p.to_string_lossy().ends_with(".manifest.json")
        })
        .collect();
    files.sort();
    let rows: Vec<String> = files
        .par_iter()
        .map(|p| {
            let name = p.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
            let read = fs::read_to_string(p)
                .map_err(Error::from)
                .and_then(|t| SequenceFile::parse(&t)?.to_sequence());
            match read.and_then(|x| scatter_row(&x, tol)) {
                Ok((thetas, class)) => Ok(scatter_line(&name, &thetas, class)),
                Err(Error::Parse { line, message }) => Err(Error::Parse {
                    line,
                    message: format!("{name}: {message}"),
                }),
                Err(e) => Err(Error::InvalidParameter(format!("{name}: {e}"))),
            }
        })
        .collect::<Result<_>>()?;
    let mut body = String::from("file,theta1,theta5,theta2,theta3,class\n");
    body.extend(rows);
    let mut manifest = RunManifest::new("classify", None)
        .with("batch", dir.display().to_string())
        .with("tol", tol)
        .with("files", files.len());
    manifest.finish();
    out.csv(&body, path, &manifest)
}

fn anneal_config(a: &RadarArgs) -> AnnealConfig {
    AnnealConfig {
        cooling: a.cooling,
        steps_per_temp: a.steps,
        perturb_scale: a.perturb_scale,
        seed: a.seed,
        ..AnnealConfig::default()
    }
}

fn seeds(first: u64, count: usize) -> Result<Vec<u64>> {
    if count == 0 {
        return Err(Error::InvalidParameter("best-of count must be at least 1".into()));
    }
    Ok((0..count as u64).map(|i| first + i).collect())
}

fn history_csv(res: &AnnealResult) -> String {
    let mut body = String::from("step,temperature,current_rho_db,best_rho_db\n");
    for s in &res.history {
        body.push_str(&format!(
            "{},{},{},{}\n",
            s.step,
            format_sig(s.temperature),
            format_sig(s.current_rho_db),
            format_sig(s.best_rho_db)
        ));
    }
    body
}

fn sweep_csv(lo: usize, hi: usize, cfg: &AnnealConfig, seeds: &[u64]) -> Result<String> {
    let rows: Vec<String> = (lo..=hi)
        .into_par_iter()
        .map(|n| {
            let res = anneal_best_of(n, cfg, seeds)?;
            log::info!("n={n}: rho={:.3} dB", res.lobe.rho_db);
            Ok(format!(
                "{n},{},{}\n",
                format_sig(res.lobe.rho_db),
                format_sig(lobe_ratio_upper_bound_db(n))
            ))
        })
        .collect::<Result<_>>()?;
    let mut body = String::from("n,rho_db,upper_bound_db\n");
    body.extend(rows);
    Ok(body)
}

fn optimize_radar(a: RadarArgs, out: &Output) -> Result<()> {
    let cfg = anneal_config(&a);
    cfg.validate()?;
    let seeds = seeds(a.seed, a.best_of)?;
    let mut manifest = RunManifest::new("optimize-radar", Some(a.seed))
        .with("anneal", &cfg)
        .with("seeds", &seeds);

    if let Some(range) = &a.n_range {
        let (lo, hi) = parse_range(range)?;
        manifest.set("n_range", [lo, hi]);
        let body = sweep_csv(lo, hi, &cfg, &seeds)?;
        manifest.finish();
        return out.csv(&body, a.out.as_deref(), &manifest);
    }

    let n = a.n.ok_or_else(|| Error::InvalidParameter("--n or --n-range is required".into()))?;
    manifest.set("n", n);
    let res = anneal_best_of(n, &cfg, &seeds)?;
    manifest.finish();
    if let Some(path) = &a.history_out {
        write_csv_with_manifest(path, &history_csv(&res), &manifest)?;
    }
    let (value, file) = sequence_record(
        &res.best,
        a.repr,
        json!({
            "rho_db": res.lobe.rho_db,
            "upper_bound_db": res.lobe.upper_bound_db,
            "max_side_lobe_power": res.lobe.max_side_lobe_power,
            "argmax_tau": res.lobe.argmax_tau,
            "d": discrepancy(&res.best).d(),
            "steps": res.steps,
            "accepted_moves": res.accepted_moves,
            "failed_repairs": res.failed_repairs,
            "initial_temp": res.initial_temp,
            "seed": res.seed,
        }),
        Some(manifest),
    )?;
    out.sequence(&value, &file, a.out.as_deref())
}

fn transform(a: TransformArgs, out: &Output) -> Result<()> {
    let chain: TransformChain = a.chain.parse()?;
    let x = read_input(a.input.as_deref())?;
    let y = apply_chain(&chain, &x)?;
    let mut manifest = RunManifest::new("transform", None).with("chain", chain.to_string());
    manifest.finish();
    let (value, file) = sequence_record(&y, a.repr, json!({ "chain": chain.to_string() }), Some(manifest))?;
    out.sequence(&value, &file, a.out.as_deref())
}

fn solve_c0c(a: SolveArgs, out: &Output) -> Result<()> {
    let init = match a.init.as_slice() {
        [] => DEFAULT_INIT,
        [x, y, z] => [*x, *y, *z],
        other => {
            return Err(Error::InvalidParameter(format!(
                "--init needs three values, got {}",
                other.len()
            )))
        }
    };
    let opts = NewtonOptions {
        tol: a.tol,
        max_iters: a.max_iters,
        jacobian: match a.jacobian {
            JacobianArg::Fd => JacobianMode::FiniteDifference,
            JacobianArg::Analytic => JacobianMode::Analytic,
        },
    };
    let sol = newton_solve_with(init, &opts)?;
    let sequences = cazac::families::c0c_sequences(&sol.triple)?
        .iter()
        .map(|x| SequenceFile::from_sequence(x, Repr::S).map(|f| f.values))
        .collect::<Result<Vec<_>>>()?;
    let mut manifest = RunManifest::new("solve-c0c", None)
        .with("init", init)
        .with("tol", a.tol)
        .with("max_iters", a.max_iters)
        .with("jacobian", format!("{:?}", opts.jacobian));
    manifest.finish();
    let value = json!({
        "a": sol.triple.a,
        "b": sol.triple.b,
        "c": sol.triple.c,
        "residual_inf": sol.residual_inf,
        "iterations": sol.iterations,
        "sequences": sequences,
        "manifest": manifest,
    });
    out.json(&value, a.out.as_deref())
}

fn figures(a: FiguresArgs, out: &Output) -> Result<()> {
    let mut manifest = RunManifest::new("figures", Some(a.seed)).with("kind", a.kind);
    let body = match a.kind {
        FigureKind::Fig1 => {
            let n = a.n.unwrap_or(50);
            let count = a.count.unwrap_or(20);
            let cfg = IpucConfig {
                epsilon: a.epsilon.unwrap_or(1e-3),
                max_iters: a.max_iters.unwrap_or(10_000),
                seed: a.seed,
                ..IpucConfig::default()
            };
            manifest.set("n", n);
            manifest.set("count", count);
            manifest.set("ipuc", &cfg);
            let results = ipuc_batch(n, count, &cfg)?;
            trajectory_csv(&results)
        }
        FigureKind::Fig2 => {
            let (lo, hi) = parse_range(a.n_range.as_deref().unwrap_or("2:50"))?;
            let cfg = AnnealConfig {
                steps_per_temp: a.steps,
                seed: a.seed,
                ..AnnealConfig::default()
            };
            manifest.set("n_range", [lo, hi]);
            manifest.set("anneal", &cfg);
            sweep_csv(lo, hi, &cfg, &[a.seed])?
        }
        FigureKind::Fig3 => {
            let count = a.count.unwrap_or(1000);
            let cfg = IpucConfig {
                epsilon: a.epsilon.unwrap_or(1e-4),
                max_iters: a.max_iters.unwrap_or(100_000),
                seed: a.seed,
                ..IpucConfig::default()
            };
            manifest.set("count", count);
            manifest.set("ipuc", &cfg);
            manifest.set("tol", a.tol);
            let results = ipuc_batch(8, count, &cfg)?;
            let mut body = String::from("run_id,converged,theta1,theta5,theta2,theta3,class\n");
            for (id, res) in results.iter().enumerate() {
                let (thetas, class) = scatter_row(&res.sequence, a.tol)?;
                body.push_str(&scatter_line(&format!("{id},{}", res.converged), &thetas, class));
            }
            body
        }
    };
    manifest.finish();
    out.csv(&body, a.out.as_deref(), &manifest)
}
