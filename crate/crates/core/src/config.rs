//! Run configuration: a plain `key = value` file plus flag overrides.
//!
//! ```text
//! # spin-1 chain at desk scale
//! model = heisenberg
//! two_s = 2
//! sites = 50000
//! configurations = 2000
//! seed = 12345
//! disorder.alpha = 0.8
//! blocks.auto = true
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::blocks::BlockLadder;
use crate::disorder::DisorderSpec;
use crate::error::{Error, Result};
use crate::scaling::{c_eff_of_spin, q_ext_linear, AnalysisOptions, DgammaPolicy, FitWindow};
use crate::sdrg::{ModelKind, TrioCoefficients};

pub const KNOWN_KEYS: &[&str] = &[
    "model",
    "two_s",
    "sites",
    "configurations",
    "seed",
    "workers",
    "out",
    "disorder.alpha",
    "disorder.support_max",
    "sdrg.kappa_left",
    "sdrg.kappa_right",
    "blocks.sizes",
    "blocks.auto",
    "blocks.anchors",
    "q.values",
    "q.center",
    "q.half_width",
    "q.points",
    "scaling.fit_min",
    "scaling.fit_max",
    "scaling.weighted",
    "scaling.dgamma_policy",
    "checkpoint.every",
];

/// Default number of points in the q scan.
pub const DEFAULT_Q_POINTS: usize = 11;
/// Default half width of the q scan around the linear-law prediction.
pub const DEFAULT_Q_HALF_WIDTH: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub model: ModelKind,
    pub sites: usize,
    pub configurations: u64,
    pub disorder: DisorderSpec,
    pub kappa: TrioCoefficients,
    /// Explicit ladder; `None` means powers of two from 8 to N/8.
    pub block_sizes: Option<Vec<usize>>,
    pub anchors: usize,
    /// Explicit q grid; `None` means the default scan.
    pub q_values: Option<Vec<f64>>,
    pub q_center: Option<f64>,
    pub q_half_width: f64,
    pub q_points: usize,
    pub fit_min: usize,
    pub fit_max: Option<usize>,
    pub weighted: bool,
    pub dgamma_policy: DgammaPolicy,
    pub workers: usize,
    pub checkpoint_every: u64,
    pub out_dir: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            model: ModelKind::Heisenberg { two_s: 1 },
            sites: 50_000,
            configurations: 2_000,
            disorder: DisorderSpec::default(),
            kappa: TrioCoefficients::default(),
            block_sizes: None,
            anchors: 1,
            q_values: None,
            q_center: None,
            q_half_width: DEFAULT_Q_HALF_WIDTH,
            q_points: DEFAULT_Q_POINTS,
            fit_min: 8,
            fit_max: None,
            weighted: true,
            dgamma_policy: DgammaPolicy::Median,
            workers: 1,
            checkpoint_every: 0,
            out_dir: None,
        }
    }
}

fn parse_list<T: std::str::FromStr>(value: &str) -> std::result::Result<Vec<T>, String>
where
    T::Err: std::fmt::Display,
{
    value
        .split(|c: char| c == ',' || c.is_ascii_whitespace())
        .filter(|t| !t.is_empty())
        .map(|t| t.parse::<T>().map_err(|e| format!("{t:?}: {e}")))
        .collect()
}

fn parse_bool(value: &str) -> std::result::Result<bool, String> {
    match value.to_ascii_lowercase().as_str() {
        "true" | "yes" | "1" | "on" => Ok(true),
        "false" | "no" | "0" | "off" => Ok(false),
        _ => Err(format!("expected a boolean, got {value:?}")),
    }
}

fn parse_num<T: std::str::FromStr>(value: &str) -> std::result::Result<T, String>
where
    T::Err: std::fmt::Display,
{
    value.parse::<T>().map_err(|e| format!("{value:?}: {e}"))
}

impl RunConfig {
    /// Parses `key = value` lines; `#` starts a comment.
    pub fn from_kv_str(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| Error::Config {
                line: i + 1,
                msg: format!("expected key = value, got {line:?}"),
            })?;
            cfg.set(key.trim(), value.trim()).map_err(|e| match e {
                Error::Config { msg, .. } => Error::Config { line: i + 1, msg },
                other => other,
            })?;
        }
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_kv_str(&text)
    }

    /// Applies one setting. Line number 0 marks a flag override.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let err = |msg: String| Error::Config {
            line: 0,
            msg: format!("{key}: {msg}"),
        };
        let value = value.trim_matches('"');
        match key {
            "model" => {
                let two_s = self.model.two_s();
                self.model = match value {
                    "heisenberg" => ModelKind::Heisenberg { two_s },
                    "biquadratic" => ModelKind::BiquadraticSpin1,
                    _ => return Err(err(format!("unknown model {value:?}"))),
                }
            }
            "two_s" => {
                let two_s: u32 = parse_num(value).map_err(err)?;
                if two_s == 0 {
                    return Err(err("must be positive".into()));
                }
                if let ModelKind::Heisenberg { .. } = self.model {
                    self.model = ModelKind::Heisenberg { two_s };
                } else if two_s != 2 {
                    return Err(err("the biquadratic chain is spin-1 (two_s = 2)".into()));
                }
            }
            "sites" => self.sites = parse_num(value).map_err(err)?,
            "configurations" => self.configurations = parse_num(value).map_err(err)?,
            "seed" => self.disorder.master_seed = parse_num(value).map_err(err)?,
            "workers" => self.workers = parse_num(value).map_err(err)?,
            "out" => self.out_dir = Some(PathBuf::from(value)),
            "disorder.alpha" => self.disorder.exponent_alpha = parse_num(value).map_err(err)?,
            "disorder.support_max" => self.disorder.support_max = parse_num(value).map_err(err)?,
            "sdrg.kappa_left" => self.kappa.kappa_left = parse_num(value).map_err(err)?,
            "sdrg.kappa_right" => self.kappa.kappa_right = parse_num(value).map_err(err)?,
            "blocks.sizes" => self.block_sizes = Some(parse_list(value).map_err(err)?),
            "blocks.auto" => {
                if parse_bool(value).map_err(err)? {
                    self.block_sizes = None;
                }
            }
            "blocks.anchors" => self.anchors = parse_num(value).map_err(err)?,
            "q.values" => self.q_values = Some(parse_list(value).map_err(err)?),
            "q.center" => self.q_center = Some(parse_num(value).map_err(err)?),
            "q.half_width" => self.q_half_width = parse_num(value).map_err(err)?,
            "q.points" => self.q_points = parse_num(value).map_err(err)?,
            "scaling.fit_min" => self.fit_min = parse_num(value).map_err(err)?,
            "scaling.fit_max" => self.fit_max = Some(parse_num(value).map_err(err)?),
            "scaling.weighted" => self.weighted = parse_bool(value).map_err(err)?,
            "scaling.dgamma_policy" => {
                self.dgamma_policy = match value {
                    "median" => DgammaPolicy::Median,
                    "max" => DgammaPolicy::Max,
                    _ => return Err(err(format!("expected median or max, got {value:?}"))),
                }
            }
            "checkpoint.every" => self.checkpoint_every = parse_num(value).map_err(err)?,
            _ => {
                return Err(err(format!(
                    "unknown key; known keys are {}",
                    KNOWN_KEYS.join(", ")
                )))
            }
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        if self.sites < 4 || !self.sites.is_multiple_of(2) {
            return Err(Error::InvalidParameter(format!(
                "sites must be even and at least 4, got {}",
                self.sites
            )));
        }
        if self.sites > u32::MAX as usize {
            return Err(Error::InvalidParameter("sites exceeds 2^32 - 1".into()));
        }
        if self.configurations == 0 {
            return Err(Error::InvalidParameter(
                "configurations must be at least 1".into(),
            ));
        }
        if self.workers == 0 {
            return Err(Error::InvalidParameter("workers must be at least 1".into()));
        }
        if self.anchors == 0 {
            return Err(Error::InvalidParameter(
                "blocks.anchors must be at least 1".into(),
            ));
        }
        self.disorder.validate()?;
        self.kappa.validate()?;
        self.ladder()?;
        let q = self.q_grid()?;
        if q.iter().any(|q| !q.is_finite()) {
            return Err(Error::InvalidParameter("q values must be finite".into()));
        }
        let w = self.fit_window();
        if w.l_min > w.l_max {
            return Err(Error::InvalidParameter(format!(
                "empty fit window [{}, {}]",
                w.l_min, w.l_max
            )));
        }
        Ok(())
    }

    pub fn ladder(&self) -> Result<BlockLadder> {
        let base = match &self.block_sizes {
            Some(sizes) => BlockLadder::new(sizes.clone(), 0, self.sites)?,
            None => BlockLadder::geometric(self.sites)?,
        };
        if self.anchors > 1 {
            base.with_equally_spaced_anchors(self.anchors)
        } else {
            Ok(base)
        }
    }

    /// Explicit `q.values`, or `q.points` evenly spaced over
    /// `center ± half_width`, with the center defaulting to the linear-law
    /// prediction rounded to two decimals.
    pub fn q_grid(&self) -> Result<Vec<f64>> {
        if let Some(q) = &self.q_values {
            if q.is_empty() {
                return Err(Error::InvalidParameter("q.values is empty".into()));
            }
            return Ok(q.clone());
        }
        if self.q_points < 2 || self.q_half_width.is_nan() || self.q_half_width <= 0.0 {
            return Err(Error::InvalidParameter(
                "q scan needs at least 2 points and a positive half width".into(),
            ));
        }
        let center = self
            .q_center
            .unwrap_or_else(|| default_q_center(self.model));
        let lo = center - self.q_half_width;
        let step = 2.0 * self.q_half_width / (self.q_points - 1) as f64;
        Ok((0..self.q_points)
            .map(|k| round_to(lo + step * k as f64, 1e-9))
            .collect())
    }

    pub fn fit_window(&self) -> FitWindow {
        FitWindow {
            l_min: self.fit_min,
            l_max: self.fit_max.unwrap_or(self.sites / 8),
        }
    }

    pub fn analysis_options(&self) -> AnalysisOptions {
        AnalysisOptions {
            window: self.fit_window(),
            weighted: self.weighted,
            dgamma_policy: self.dgamma_policy,
        }
    }
}

/// `q_ext_linear(c_eff)` rounded to two decimals.
pub fn default_q_center(model: ModelKind) -> f64 {
    let c = c_eff_of_spin(model.two_s());
    (q_ext_linear(c) * 100.0).round() / 100.0
}

fn round_to(x: f64, quantum: f64) -> f64 {
    let r = (x / quantum).round() * quantum;
    // Normalize through the decimal representation so grids print cleanly.
    format!("{r:.9}").parse().unwrap_or(r)
}
