//! `twingap`: simulate birth histories, run the twin analysis, decompose
//! published coefficients and re-render saved fits.
//!
//! Exit codes: 0 on success, 1 for data or configuration errors, 2 for usage
//! errors.

mod manifest;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use twingap::decompose::{decompose_direct, parse_direct, DecompositionTable};
use twingap::estimate::{Controls, MissingPolicy};
use twingap::ingest::parse_births;
use twingap::pipeline::{analyze, read_fit_dir, write_analysis, AnalyzeOptions};
use twingap::report::{render, FitSummary, Format, RenderOptions};
use twingap::synth::{generate, planted_thetas};
use twingap::{BirthTable, Error, ModelSpec, Result, SynthConfig, WindowKind};

use manifest::{base_name, digest_file, Manifest};

#[derive(Debug, Parser)]
#[command(name = "twingap", version, about = "Twin-based decomposition of sex differences in child mortality")]
struct Cli {
    /// Worker threads for fits, bootstrap and simulation. Results do not
    /// depend on this.
    #[arg(long, global = true, env = "TWINGAP_WORKERS")]
    workers: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic birth-history CSV from a JSON config.
    Simulate(SimulateArgs),
    /// Full pipeline: match twins, fit every estimator, decompose, report.
    Analyze(AnalyzeArgs),
    /// Decompose directly entered cross-sectional and twin-FE gaps.
    Decompose(DecomposeArgs),
    /// Render saved fits (or a saved decomposition) as a table on stdout.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
struct SimulateArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Overrides the config's seed.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ControlsArg {
    None,
    Full,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum MissingArg {
    ListwiseDrop,
    MissingIndicator,
}

#[derive(Debug, Args)]
struct AnalyzeArgs {
    #[arg(long)]
    births: PathBuf,
    /// Second births file, e.g. one file per society.
    #[arg(long)]
    births2: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    /// JSON run configuration; flags override its fields.
    #[arg(long)]
    run_config: Option<PathBuf>,
    /// Mother-level bootstrap replicates (0 = no standard errors).
    #[arg(long)]
    bootstrap: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_enum)]
    controls: Option<ControlsArg>,
    #[arg(long, value_enum)]
    missing: Option<MissingArg>,
    /// Comma-separated windows (I, NN, PNN, CH).
    #[arg(long, value_delimiter = ',')]
    windows: Option<Vec<String>>,
}

#[derive(Debug, Args)]
struct DecomposeArgs {
    /// JSON: {"I": {"theta_nd", "theta_tfe_nd", "theta_d", "theta_tfe_d"}, ...}
    #[arg(long)]
    coeffs: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// csv, json or markdown; defaults to the extension of --out.
    #[arg(long)]
    format: Option<String>,
    /// Show markdown values per thousand.
    #[arg(long)]
    per_thousand: bool,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum TableArg {
    Fits,
    Decomposition,
}

#[derive(Debug, Args)]
struct ReportArgs {
    /// Output directory of `analyze` (or its `fits` subdirectory).
    #[arg(long)]
    fit_dir: PathBuf,
    #[arg(long)]
    format: String,
    #[arg(long, value_enum, default_value = "fits")]
    table: TableArg,
    #[arg(long)]
    per_thousand: bool,
}

/// Analysis settings, from `--run-config` and flags.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct RunConfig {
    windows: Vec<WindowKind>,
    controls: Controls,
    missing: MissingPolicy,
    bootstrap: usize,
    seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            windows: WindowKind::ALL.to_vec(),
            controls: Controls::None,
            missing: MissingPolicy::ListwiseDrop,
            bootstrap: 0,
            seed: 0,
        }
    }
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// `births.csv` → `births.manifest.json`.
fn manifest_path(out: &Path) -> PathBuf {
    let stem = out.file_stem().map_or_else(String::new, |s| s.to_string_lossy().into_owned());
    out.with_file_name(format!("{stem}.manifest.json"))
}

fn simulate(args: SimulateArgs) -> Result<()> {
    let mut cfg = SynthConfig::from_json(&read_text(&args.config)?)?;
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    cfg.validate()?;
    let table = generate(&cfg)?;
    twingap::ingest::write_births_file(&table, &args.out)?;
    log::info!("wrote {} births to {}", table.len(), args.out.display());

    let mut m = Manifest::new("simulate", &cfg, Some(cfg.seed))?;
    m.inputs.push(digest_file(&args.config, base_name(&args.config))?);
    m.outputs.push(digest_file(&args.out, base_name(&args.out))?);
    m.planted = Some(serde_json::to_value(planted_thetas(&cfg))?);
    m.write(&manifest_path(&args.out))
}

fn resolve_run_config(args: &AnalyzeArgs) -> Result<RunConfig> {
    let mut rc = match &args.run_config {
        Some(p) => serde_json::from_str(&read_text(p)?)
            .map_err(|e| Error::Config(format!("{}: {e}", p.display())))?,
        None => RunConfig::default(),
    };
    if let Some(ws) = &args.windows {
        rc.windows = ws.iter().map(|w| w.parse()).collect::<Result<_>>()?;
    }
    if let Some(c) = args.controls {
        rc.controls = match c {
            ControlsArg::None => Controls::None,
            ControlsArg::Full => Controls::Full,
        };
    }
    if let Some(m) = args.missing {
        if rc.controls == Controls::None {
            return Err(Error::Usage("--missing only applies with --controls full".into()));
        }
        rc.missing = match m {
            MissingArg::ListwiseDrop => MissingPolicy::ListwiseDrop,
            MissingArg::MissingIndicator => MissingPolicy::MissingIndicator,
        };
    }
    if let Some(b) = args.bootstrap {
        rc.bootstrap = b;
    }
    if let Some(s) = args.seed {
        rc.seed = s;
    }
    if rc.windows.is_empty() {
        return Err(Error::Usage("no windows selected".into()));
    }
    if args.births2.as_ref() == Some(&args.births) {
        return Err(Error::Usage("--births and --births2 name the same file".into()));
    }
    Ok(rc)
}

fn analyze_cmd(args: AnalyzeArgs) -> Result<()> {
    let rc = resolve_run_config(&args)?;
    let mut inputs = vec![args.births.clone()];
    inputs.extend(args.births2.clone());
    let tables = inputs.iter().map(parse_births).collect::<Result<Vec<_>>>()?;
    let by_society = BirthTable::concat(tables)?.split_by_society()?;

    let opts = AnalyzeOptions {
        windows: rc.windows.clone(),
        spec: ModelSpec {
            controls: rc.controls,
            missing: rc.missing,
        },
        bootstrap: rc.bootstrap,
        seed: rc.seed,
    };
    let analysis = analyze(&by_society, &opts)?;
    fs::create_dir_all(&args.out).map_err(|e| Error::io(&args.out, e))?;
    let written = write_analysis(&analysis, &args.out)?;

    let mut m = Manifest::new("analyze", &rc, Some(rc.seed))?;
    for p in &inputs {
        m.inputs.push(digest_file(p, base_name(p))?);
    }
    for p in &written {
        let rel = p.strip_prefix(&args.out).unwrap_or(p).to_string_lossy().replace('\\', "/");
        m.outputs.push(digest_file(p, rel)?);
    }
    m.write(&args.out.join("manifest.json"))
}

fn format_for(explicit: Option<&str>, out: &Path) -> Result<Format> {
    match explicit {
        Some(f) => f.parse(),
        None => match out.extension().and_then(|e| e.to_str()) {
            Some(ext) => ext.parse(),
            None => Ok(Format::Json),
        },
    }
}

fn decompose_cmd(args: DecomposeArgs) -> Result<()> {
    let format = format_for(args.format.as_deref(), &args.out)?;
    let inputs = parse_direct(&read_text(&args.coeffs)?)?;
    let table = decompose_direct(&inputs)?;
    let opts = RenderOptions {
        per_thousand: args.per_thousand,
    };
    write_text(&args.out, &render(&table, format, opts)?)?;

    #[derive(Serialize)]
    struct DecomposeConfig<'a> {
        format: &'a str,
        per_thousand: bool,
    }
    let cfg = DecomposeConfig {
        format: format.extension(),
        per_thousand: args.per_thousand,
    };
    let mut m = Manifest::new("decompose", &cfg, None)?;
    m.inputs.push(digest_file(&args.coeffs, base_name(&args.coeffs))?);
    m.outputs.push(digest_file(&args.out, base_name(&args.out))?);
    m.write(&manifest_path(&args.out))
}

fn report_cmd(args: ReportArgs) -> Result<String> {
    let format: Format = args.format.parse()?;
    let opts = RenderOptions {
        per_thousand: args.per_thousand,
    };
    let dir = &args.fit_dir;
    match args.table {
        TableArg::Fits => {
            let fits_dir = if dir.join("fits").is_dir() { dir.join("fits") } else { dir.clone() };
            let fits = read_fit_dir(&fits_dir)?;
            if fits.is_empty() {
                return Err(Error::Data(format!("no fit files in {}", fits_dir.display())));
            }
            render(&FitSummary { fits }, format, opts)
        }
        TableArg::Decomposition => {
            let path = dir.join("decomposition.json");
            let table: DecompositionTable = serde_json::from_str(&read_text(&path)?)
                .map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
            render(&table, format, opts)
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    if let Some(n) = cli.workers {
        if n == 0 {
            return Err(Error::Usage("--workers must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Config(e.to_string()))?;
    }
    match cli.command {
        Command::Simulate(a) => simulate(a),
        Command::Analyze(a) => analyze_cmd(a),
        Command::Decompose(a) => decompose_cmd(a),
        Command::Report(a) => {
            print!("{}", report_cmd(a)?);
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("twingap: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
