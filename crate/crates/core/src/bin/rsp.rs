use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use rsp_core::config::RunConfig;
use rsp_core::disorder::sample_couplings;
use rsp_core::pipeline::{self, AnalyzeInput, META_JSON};
use rsp_core::scaling::{AnalysisOptions, DgammaPolicy, FitWindow};
use rsp_core::sdrg::{run_configuration, write_event_log, ModelKind};
use rsp_core::{selftest, Error, Result};

#[derive(Parser)]
#[command(
    name = "rsp",
    version,
    about = "Random singlet phase: SDRG ensembles and Tsallis entropy scaling"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a disorder ensemble and write entropy.csv and meta.json.
    Simulate(SimulateArgs),
    /// Fit power laws and the quadratic gamma(q) law to an entropy.csv.
    Analyze(AnalyzeArgs),
    /// Collate fit.json files and fit q_ext = 1 - k / c_eff.
    Sweep(SweepArgs),
    /// Run the exact-oracle checks.
    Selftest,
}

#[derive(Args)]
struct SimulateArgs {
    /// key = value configuration file
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Extra `key=value` overrides, applied after the file.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Continue from out/checkpoint.json when present.
    #[arg(long)]
    resume: bool,
    /// Write the decimation events of this configuration to out/events_<i>.txt.
    #[arg(long, value_name = "INDEX")]
    dump_events: Option<u64>,
}

#[derive(Args)]
struct AnalyzeArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Run configuration; defaults to the meta.json next to the CSV.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    model: Option<String>,
    #[arg(long)]
    two_s: Option<u32>,
    #[arg(long)]
    fit_min: Option<usize>,
    #[arg(long)]
    fit_max: Option<usize>,
    #[arg(long)]
    unweighted: bool,
    #[arg(long)]
    dgamma_policy: Option<String>,
}

#[derive(Args)]
struct SweepArgs {
    /// Run directories (or fit.json files).
    #[arg(long = "in", num_args = 1.., required = true)]
    inputs: Vec<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

fn simulate(args: SimulateArgs) -> Result<()> {
    let mut cfg = match &args.config {
        Some(p) => RunConfig::from_file(p)?,
        None => RunConfig::default(),
    };
    for kv in &args.overrides {
        let (k, v) = kv.split_once('=').ok_or_else(|| Error::Config {
            line: 0,
            msg: format!("--set expects KEY=VALUE, got {kv:?}"),
        })?;
        cfg.set(k.trim(), v.trim())?;
    }
    if let Some(seed) = args.seed {
        cfg.disorder.master_seed = seed;
    }
    if let Some(w) = args.workers {
        cfg.workers = w;
    }
    if let Some(out) = args.out {
        cfg.out_dir = Some(out);
    }
    cfg.validate()?;
    let out = cfg.out_dir.clone().unwrap_or_else(|| PathBuf::from("."));
    if !cfg.model.is_validated() {
        eprintln!(
            "warning: {} has not been validated against reference results",
            cfg.model
        );
    }
    if let Some(idx) = args.dump_events {
        fs::create_dir_all(&out).map_err(|e| Error::io(&out, e))?;
        let couplings = sample_couplings(&cfg.disorder, cfg.sites, idx)?;
        let rec = run_configuration(cfg.model, &couplings, cfg.kappa)?;
        let path = out.join(format!("events_{idx}.txt"));
        let f = fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
        write_event_log(&rec.events, std::io::BufWriter::new(f))
            .map_err(|e| Error::io(&path, e))?;
        eprintln!("wrote {} events to {}", rec.events.len(), path.display());
    }
    let estimate = pipeline::estimate_runtime(&cfg)?;
    eprintln!(
        "{}: N = {}, M = {}, workers = {}; estimated runtime {:.1} s",
        cfg.model,
        cfg.sites,
        cfg.configurations,
        cfg.workers,
        estimate.as_secs_f64()
    );
    let meta = pipeline::simulate(&cfg, &out, args.resume)?;
    eprintln!(
        "done in {:.1} s; trio fraction {:.3e}; wrote {}",
        meta.wall_time_s,
        meta.trio_fraction,
        out.join(pipeline::ENTROPY_CSV).display()
    );
    Ok(())
}

fn analyze(args: AnalyzeArgs) -> Result<()> {
    let meta_path = args
        .input
        .parent()
        .unwrap_or_else(|| Path::new("."))
        .join(META_JSON);
    let mut input = if let Some(p) = &args.config {
        AnalyzeInput::from_config(&RunConfig::from_file(p)?, f64::NAN)
    } else if meta_path.exists() {
        let meta = pipeline::read_meta(&meta_path)?;
        AnalyzeInput::from_config(&meta.config, meta.trio_fraction)
    } else {
        let two_s = args.two_s.ok_or_else(|| {
            Error::InvalidParameter("no meta.json next to the CSV; pass --config or --two-s".into())
        })?;
        AnalyzeInput {
            model: ModelKind::heisenberg(two_s)?,
            trio_fraction: f64::NAN,
            options: AnalysisOptions {
                window: FitWindow::unbounded(),
                weighted: true,
                dgamma_policy: DgammaPolicy::Median,
            },
        }
    };
    match args.model.as_deref() {
        Some("biquadratic") => input.model = ModelKind::BiquadraticSpin1,
        Some("heisenberg") => {
            input.model = ModelKind::heisenberg(args.two_s.unwrap_or(input.model.two_s()))?
        }
        Some(other) => return Err(Error::InvalidParameter(format!("unknown model {other:?}"))),
        None => {
            if let (Some(t), ModelKind::Heisenberg { .. }) = (args.two_s, input.model) {
                input.model = ModelKind::heisenberg(t)?;
            }
        }
    }
    if let Some(v) = args.fit_min {
        input.options.window.l_min = v;
    }
    if let Some(v) = args.fit_max {
        input.options.window.l_max = v;
    }
    if args.unweighted {
        input.options.weighted = false;
    }
    match args.dgamma_policy.as_deref() {
        Some("median") => input.options.dgamma_policy = DgammaPolicy::Median,
        Some("max") => input.options.dgamma_policy = DgammaPolicy::Max,
        Some(other) => {
            return Err(Error::InvalidParameter(format!(
                "dgamma policy must be median or max, got {other:?}"
            )))
        }
        None => {}
    }
    let fit = pipeline::analyze_file(&args.input, &args.out, &input)?;
    println!("{}", pipeline::summary_line(&fit));
    Ok(())
}

fn sweep(args: SweepArgs) -> Result<()> {
    let fits = args
        .inputs
        .iter()
        .map(|p| pipeline::read_fit(&pipeline::fit_path(p)))
        .collect::<Result<Vec<_>>>()?;
    let (rows, law) = pipeline::sweep(&fits)?;
    pipeline::write_sweep_csv(&rows, &args.out)?;
    println!(
        "q_ext = 1 - k / c_eff with k = {:.4} ± {:.4} (reference 1.67)",
        law.k, law.k_stderr
    );
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let res = match cli.command {
        Command::Simulate(a) => simulate(a),
        Command::Analyze(a) => analyze(a),
        Command::Sweep(a) => sweep(a),
        Command::Selftest => {
            let results = selftest::run_selftest();
            let mut ok = true;
            for r in &results {
                println!(
                    "[{}] {}: {}",
                    if r.passed { "PASS" } else { "FAIL" },
                    r.name,
                    r.detail
                );
                ok &= r.passed;
            }
            if ok {
                Ok(())
            } else {
                Err(Error::Invariant("self-test failed".into()))
            }
        }
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
