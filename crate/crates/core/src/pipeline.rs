//! Ensemble orchestration: sample, decimate, count, average, fit.
//!
//! Configurations are grouped into fixed chunks of [`CHUNK`] consecutive
//! indices. Chunks run in parallel, each accumulated serially, and the chunk
//! tables are merged strictly in index order. The floating-point reduction
//! tree therefore depends only on `M`, never on the worker count, which is
//! what makes `entropy.csv` byte-identical across `--workers` settings and
//! across checkpoint/resume.

use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::blocks::{count_crossings, BlockLadder};
use crate::config::RunConfig;
use crate::disorder::sample_couplings;
use crate::entropy::{read_rows_csv, EntropyRow, EntropyTable};
use crate::error::{Error, Result};
use crate::scaling::{
    analyze_rows, fit_linear_law, AnalysisOptions, LinearLawFit, ScalingFit, SweepRow,
};
use crate::sdrg::{run_configuration, ModelKind};

pub const CHUNK: u64 = 8;

pub const ENTROPY_CSV: &str = "entropy.csv";
pub const META_JSON: &str = "meta.json";
pub const FIT_JSON: &str = "fit.json";
pub const CHECKPOINT_JSON: &str = "checkpoint.json";

/// Accumulated state of a (possibly partial) ensemble.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleState {
    pub next_index: u64,
    pub table: EntropyTable,
    pub trio_events: u64,
    pub total_events: u64,
}

impl EnsembleState {
    pub fn new(cfg: &RunConfig) -> Result<Self> {
        let ladder = cfg.ladder()?;
        Ok(Self {
            next_index: 0,
            table: EntropyTable::new(cfg.model.two_s(), cfg.q_grid()?, ladder.sizes().to_vec())?,
            trio_events: 0,
            total_events: 0,
        })
    }

    pub fn trio_fraction(&self) -> f64 {
        if self.total_events == 0 {
            0.0
        } else {
            self.trio_events as f64 / self.total_events as f64
        }
    }

    fn empty_like(&self) -> Result<Self> {
        Ok(Self {
            next_index: self.next_index,
            table: EntropyTable::new(
                self.table.two_s(),
                self.table.q_values().to_vec(),
                self.table.sizes().to_vec(),
            )?,
            trio_events: 0,
            total_events: 0,
        })
    }

    fn absorb(&mut self, part: &EnsembleState) -> Result<()> {
        self.table.merge(&part.table)?;
        self.trio_events += part.trio_events;
        self.total_events += part.total_events;
        self.next_index = part.next_index;
        Ok(())
    }
}

/// Resumable snapshot written every `checkpoint.every` configurations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub config: RunConfig,
    pub state: EnsembleState,
}

/// Fields of the config that determine the output bytes.
fn same_physics(a: &RunConfig, b: &RunConfig) -> bool {
    let strip = |c: &RunConfig| RunConfig {
        workers: 1,
        out_dir: None,
        checkpoint_every: 0,
        ..c.clone()
    };
    strip(a) == strip(b)
}

fn run_chunk(
    cfg: &RunConfig,
    ladder: &BlockLadder,
    template: &EnsembleState,
    start: u64,
    end: u64,
) -> Result<EnsembleState> {
    let mut part = EnsembleState {
        next_index: end,
        table: template.table.clone(),
        trio_events: 0,
        total_events: 0,
    };
    for idx in start..end {
        let couplings = sample_couplings(&cfg.disorder, cfg.sites, idx)?;
        let record = run_configuration(cfg.model, &couplings, cfg.kappa)?;
        part.trio_events += record.trio_count() as u64;
        part.total_events += record.events.len() as u64;
        let counts = count_crossings(&record.events, ladder)?;
        part.table.accumulate(&counts)?;
    }
    Ok(part)
}

/// Runs configurations `[state.next_index, upto)` and folds them into `state`.
fn advance(
    cfg: &RunConfig,
    ladder: &BlockLadder,
    state: &mut EnsembleState,
    upto: u64,
    pool: &rayon::ThreadPool,
) -> Result<()> {
    let empty = state.empty_like()?;
    let first_chunk = state.next_index / CHUNK;
    let last_chunk = upto.div_ceil(CHUNK);
    let parts: Vec<Result<EnsembleState>> = pool.install(|| {
        (first_chunk..last_chunk)
            .into_par_iter()
            .map(|c| run_chunk(cfg, ladder, &empty, c * CHUNK, ((c + 1) * CHUNK).min(upto)))
            .collect()
    });
    for part in parts {
        state.absorb(&part?)?;
    }
    Ok(())
}

/// Runs the whole ensemble, optionally resuming from `resume` and calling
/// `on_checkpoint` every `checkpoint_every` configurations.
pub fn run_ensemble(
    cfg: &RunConfig,
    resume: Option<Checkpoint>,
    mut on_checkpoint: impl FnMut(&Checkpoint) -> Result<()>,
) -> Result<EnsembleState> {
    cfg.validate()?;
    let ladder = cfg.ladder()?;
    let mut state = match resume {
        Some(cp) => {
            if !same_physics(&cp.config, cfg) {
                return Err(Error::InvalidParameter(
                    "checkpoint was written for a different configuration".into(),
                ));
            }
            if cp.state.next_index % CHUNK != 0 && cp.state.next_index != cfg.configurations {
                return Err(Error::InvalidParameter(format!(
                    "checkpoint index {} is not on a {CHUNK}-configuration boundary",
                    cp.state.next_index
                )));
            }
            cp.state
        }
        None => EnsembleState::new(cfg)?,
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .map_err(|e| Error::InvalidParameter(format!("thread pool: {e}")))?;
    let every = checkpoint_interval(cfg.checkpoint_every);
    while state.next_index < cfg.configurations {
        let upto = match every {
            Some(k) => (state.next_index + k).min(cfg.configurations),
            None => cfg.configurations,
        };
        advance(cfg, &ladder, &mut state, upto, &pool)?;
        if every.is_some() {
            on_checkpoint(&Checkpoint {
                config: cfg.clone(),
                state: state.clone(),
            })?;
        }
    }
    Ok(state)
}

/// Checkpoint interval rounded up to whole chunks.
pub fn checkpoint_interval(every: u64) -> Option<u64> {
    (every > 0).then(|| every.div_ceil(CHUNK) * CHUNK)
}

/// Wall-clock estimate for the full ensemble from one timed configuration.
pub fn estimate_runtime(cfg: &RunConfig) -> Result<Duration> {
    cfg.validate()?;
    let ladder = cfg.ladder()?;
    let t = Instant::now();
    let couplings = sample_couplings(&cfg.disorder, cfg.sites, 0)?;
    let record = run_configuration(cfg.model, &couplings, cfg.kappa)?;
    count_crossings(&record.events, &ladder)?;
    let per_config = t.elapsed();
    let parallel = cfg.workers.min(available_cores()).max(1) as f64;
    Ok(Duration::from_secs_f64(
        per_config.as_secs_f64() * cfg.configurations as f64 / parallel,
    ))
}

fn available_cores() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

/// Contents of `meta.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMeta {
    pub config: RunConfig,
    pub configurations_done: u64,
    pub trio_events: u64,
    pub total_events: u64,
    pub trio_fraction: f64,
    pub wall_time_s: f64,
    pub code_version: String,
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    serde_json::to_writer_pretty(BufWriter::new(f), value)?;
    Ok(())
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Input {
        path: path.into(),
        msg: e.to_string(),
    })
}

pub fn write_entropy_csv(table: &EntropyTable, path: &Path) -> Result<()> {
    let f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    table.write_csv(BufWriter::new(f))
}

/// Runs the ensemble and writes `entropy.csv` and `meta.json` into `out`.
/// With `resume`, an existing `checkpoint.json` in `out` is picked up.
pub fn simulate(cfg: &RunConfig, out: &Path, resume: bool) -> Result<RunMeta> {
    cfg.validate()?;
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let cp_path = out.join(CHECKPOINT_JSON);
    let start = if resume && cp_path.exists() {
        Some(read_json::<Checkpoint>(&cp_path)?)
    } else {
        None
    };
    let t = Instant::now();
    let state = run_ensemble(cfg, start, |cp| write_json(&cp_path, cp))?;
    write_entropy_csv(&state.table, &out.join(ENTROPY_CSV))?;
    let meta = RunMeta {
        config: cfg.clone(),
        configurations_done: state.next_index,
        trio_events: state.trio_events,
        total_events: state.total_events,
        trio_fraction: state.trio_fraction(),
        wall_time_s: t.elapsed().as_secs_f64(),
        code_version: env!("CARGO_PKG_VERSION").to_string(),
    };
    write_json(&out.join(META_JSON), &meta)?;
    Ok(meta)
}

pub fn read_entropy_csv(path: &Path) -> Result<Vec<EntropyRow>> {
    let f = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_rows_csv(f, path)
}

pub fn read_meta(path: &Path) -> Result<RunMeta> {
    read_json(path)
}

/// What the analysis needs to know about the run that produced a CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct AnalyzeInput {
    pub model: ModelKind,
    pub trio_fraction: f64,
    pub options: AnalysisOptions,
}

impl AnalyzeInput {
    pub fn from_config(cfg: &RunConfig, trio_fraction: f64) -> Self {
        Self {
            model: cfg.model,
            trio_fraction,
            options: cfg.analysis_options(),
        }
    }
}

pub fn analyze(rows: &[EntropyRow], input: &AnalyzeInput) -> Result<ScalingFit> {
    analyze_rows(
        rows,
        &model_tag(input.model),
        input.model.two_s(),
        input.trio_fraction,
        &input.options,
    )
}

/// Reads `csv`, fits, and writes `fit.json` to `out`.
pub fn analyze_file(csv: &Path, out: &Path, input: &AnalyzeInput) -> Result<ScalingFit> {
    let rows = read_entropy_csv(csv)?;
    let fit = analyze(&rows, input)?;
    write_json(out, &fit)?;
    Ok(fit)
}

/// Short label, e.g. `heisenberg_2s2` or `biquadratic`.
pub fn model_tag(model: ModelKind) -> String {
    match model {
        ModelKind::Heisenberg { two_s } => format!("heisenberg_2s{two_s}"),
        ModelKind::BiquadraticSpin1 => "biquadratic".to_string(),
    }
}

pub fn summary_line(fit: &ScalingFit) -> String {
    format!(
        "q_ext = {:.4} ± {:.4} (c_eff = {:.4}, linear-pred = {:.4})",
        fit.q_ext, fit.delta_q_ext, fit.c_eff, fit.q_ext_linear_pred
    )
}

pub fn read_fit(path: &Path) -> Result<ScalingFit> {
    read_json(path)
}

/// Collates fits into sweep rows and fits the linear law over the
/// Heisenberg rows.
pub fn sweep(fits: &[ScalingFit]) -> Result<(Vec<SweepRow>, LinearLawFit)> {
    let rows: Vec<SweepRow> = fits
        .iter()
        .map(|f| SweepRow {
            c_eff: f.c_eff,
            q_ext: f.q_ext,
            delta_q_ext: f.delta_q_ext,
            model: f.model.clone(),
        })
        .collect();
    let heisenberg: Vec<SweepRow> = rows
        .iter()
        .filter(|r| r.model.starts_with("heisenberg"))
        .cloned()
        .collect();
    let law = fit_linear_law(&heisenberg)?;
    Ok((rows, law))
}

pub fn write_sweep_csv(rows: &[SweepRow], path: &Path) -> Result<()> {
    let f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = csv::Writer::from_writer(BufWriter::new(f));
    let csv_err = |e: csv::Error| Error::Input {
        path: path.into(),
        msg: e.to_string(),
    };
    w.write_record(["c_eff", "q_ext", "delta_q_ext", "model"])
        .map_err(csv_err)?;
    for r in rows {
        w.write_record([
            format!("{:.12}", r.c_eff),
            format!("{:.12}", r.q_ext),
            format!("{:.12}", r.delta_q_ext),
            r.model.clone(),
        ])
        .map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

/// Locates `fit.json` given either the file or its run directory.
pub fn fit_path(p: &Path) -> PathBuf {
    if p.is_dir() {
        p.join(FIT_JSON)
    } else {
        p.to_path_buf()
    }
}
