//! Power-law exponents `S_q(L) ∝ L^gamma`, the quadratic law `gamma(q)`,
//! the extensivity index `q_ext` where `gamma = 1`, and its relation to the
//! effective central charge.

use std::collections::BTreeMap;

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::entropy::EntropyRow;
use crate::error::{Error, Result};

/// Coefficient of the empirical linear law `q_ext = 1 - k / c_eff`.
pub const LINEAR_LAW_K: f64 = 1.67;

/// `|u|` below this is treated as a linear `gamma(q)`.
pub const LINEAR_BRANCH_EPS: f64 = 1e-12;

/// Effective central charge of the random singlet phase, `ln(2S + 1)`.
pub fn c_eff_of_spin(two_s: u32) -> f64 {
    ((two_s + 1) as f64).ln()
}

/// Extensivity index of a clean conformal system with central charge `c`.
pub fn q_ext_pure(c: f64) -> f64 {
    ((9.0 + c * c).sqrt() - 3.0) / c
}

/// Empirical disordered-chain law `1 - 1.67 / c_eff`.
pub fn q_ext_linear(c_eff: f64) -> f64 {
    1.0 - LINEAR_LAW_K / c_eff
}

/// Inclusive block-size window for the power-law fits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FitWindow {
    pub l_min: usize,
    pub l_max: usize,
}

impl FitWindow {
    /// `[8, N/8]`.
    pub fn default_for(n_sites: usize) -> Self {
        Self {
            l_min: 8,
            l_max: n_sites / 8,
        }
    }

    pub fn unbounded() -> Self {
        Self {
            l_min: 0,
            l_max: usize::MAX,
        }
    }

    pub fn contains(&self, l: usize) -> bool {
        (self.l_min..=self.l_max).contains(&l)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerLawPoint {
    pub l: usize,
    pub mean: f64,
    pub stderr: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerLawFit {
    pub gamma: f64,
    pub gamma_stderr: f64,
    pub ln_prefactor: f64,
    pub n_points: usize,
}

/// Ordinary least squares of `ln mean` on `ln L`. Points outside `window`
/// or with a nonpositive mean are skipped; at least four must remain.
pub fn fit_power_law(points: &[PowerLawPoint], window: FitWindow) -> Result<PowerLawFit> {
    if points.windows(2).any(|w| w[0].l >= w[1].l) {
        return Err(Error::Fit("block sizes must be strictly increasing".into()));
    }
    let (xs, ys): (Vec<f64>, Vec<f64>) = points
        .iter()
        .filter(|p| window.contains(p.l) && p.l > 0 && p.mean > 0.0 && p.mean.is_finite())
        .map(|p| ((p.l as f64).ln(), p.mean.ln()))
        .unzip();
    let n = xs.len();
    if n < 4 {
        return Err(Error::Fit(format!(
            "only {n} usable block sizes in [{}, {}]; need at least 4",
            window.l_min, window.l_max
        )));
    }
    let nf = n as f64;
    let mx = xs.iter().sum::<f64>() / nf;
    let my = ys.iter().sum::<f64>() / nf;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let gamma = sxy / sxx;
    let intercept = my - gamma * mx;
    let ssr: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (y - intercept - gamma * x).powi(2))
        .sum();
    Ok(PowerLawFit {
        gamma,
        gamma_stderr: (ssr / (nf - 2.0) / sxx).sqrt(),
        ln_prefactor: intercept,
        n_points: n,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GammaPoint {
    pub q: f64,
    pub gamma: f64,
    pub stderr: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadraticFit {
    pub u: f64,
    pub v: f64,
    pub w: f64,
    /// Covariance of `(u, v, w)`.
    pub covariance: [[f64; 3]; 3],
    /// Weighted residual sum of squares (plain SSR when unweighted).
    pub chi2: f64,
    pub dof: usize,
}

impl QuadraticFit {
    pub fn eval(&self, q: f64) -> f64 {
        (self.u * q + self.v) * q + self.w
    }

    pub fn reduced_chi2(&self) -> f64 {
        if self.dof == 0 {
            f64::NAN
        } else {
            self.chi2 / self.dof as f64
        }
    }
}

/// Least squares of `gamma` on `(q^2, q, 1)`, weighted by `1 / stderr^2`
/// when `weighted` is set.
pub fn fit_gamma_quadratic(points: &[GammaPoint], weighted: bool) -> Result<QuadraticFit> {
    let mut distinct: Vec<f64> = points.iter().map(|p| p.q).collect();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    if distinct.len() < 3 {
        return Err(Error::Fit(format!(
            "quadratic fit needs at least 3 distinct q values, got {}",
            distinct.len()
        )));
    }
    if weighted {
        if let Some(p) = points
            .iter()
            .find(|p| !(p.stderr > 0.0 && p.stderr.is_finite()))
        {
            return Err(Error::Fit(format!(
                "gamma stderr at q = {} is {}; weighted fit impossible",
                p.q, p.stderr
            )));
        }
    }
    let weight = |p: &GammaPoint| if weighted { p.stderr.powi(-2) } else { 1.0 };
    let mut normal = Matrix3::<f64>::zeros();
    let mut rhs = Vector3::<f64>::zeros();
    for p in points {
        let x = Vector3::new(p.q * p.q, p.q, 1.0);
        let wt = weight(p);
        normal += wt * x * x.transpose();
        rhs += wt * p.gamma * x;
    }
    let inv = normal
        .try_inverse()
        .ok_or_else(|| Error::Fit("rank-deficient quadratic design".into()))?;
    let coef = inv * rhs;
    let (u, v, w) = (coef[0], coef[1], coef[2]);
    let chi2: f64 = points
        .iter()
        .map(|p| weight(p) * (p.gamma - ((u * p.q + v) * p.q + w)).powi(2))
        .sum();
    let dof = points.len().saturating_sub(3);
    let cov = if weighted {
        inv
    } else if dof > 0 {
        inv * (chi2 / dof as f64)
    } else {
        inv * 0.0
    };
    let mut covariance = [[0.0; 3]; 3];
    for (i, row) in covariance.iter_mut().enumerate() {
        for (j, c) in row.iter_mut().enumerate() {
            *c = cov[(i, j)];
        }
    }
    Ok(QuadraticFit {
        u,
        v,
        w,
        covariance,
        chi2,
        dof,
    })
}

/// How the single `Δγ` entering the `q_ext` error is chosen from the
/// per-q fit errors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DgammaPolicy {
    #[default]
    Median,
    Max,
}

impl DgammaPolicy {
    pub fn pick(&self, points: &[GammaPoint]) -> f64 {
        let mut errs: Vec<f64> = points.iter().map(|p| p.stderr).collect();
        if errs.is_empty() {
            return f64::NAN;
        }
        errs.sort_by(f64::total_cmp);
        match self {
            DgammaPolicy::Max => *errs.last().unwrap(),
            DgammaPolicy::Median => {
                let m = errs.len() / 2;
                if errs.len() % 2 == 1 {
                    errs[m]
                } else {
                    0.5 * (errs[m - 1] + errs[m])
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QExt {
    pub q_ext: f64,
    pub delta_q_ext: f64,
}

/// Solves `u q^2 + v q + w = 1` for the single root inside `[lo, hi]`, with
/// `delta_q_ext = dgamma / |2 u q_ext + v|`.
pub fn solve_q_ext(u: f64, v: f64, w: f64, interval: (f64, f64), dgamma: f64) -> Result<QExt> {
    let (lo, hi) = interval;
    let inside = |q: f64| q >= lo && q <= hi;
    let c = w - 1.0;
    let q_ext = if u.abs() < LINEAR_BRANCH_EPS {
        if v == 0.0 {
            return Err(Error::Root(
                "gamma(q) is flat; no q gives gamma = 1. Scan a different q range".into(),
            ));
        }
        let q = -c / v;
        if !inside(q) {
            return Err(Error::Root(format!(
                "linear root q = {q} outside scan [{lo}, {hi}]; widen or shift the q scan"
            )));
        }
        q
    } else {
        let disc = v * v - 4.0 * u * c;
        if disc < 0.0 {
            return Err(Error::Root(format!(
                "gamma(q) never reaches 1 (discriminant {disc}); widen the q scan"
            )));
        }
        // Cancellation-free quadratic roots.
        let t = -0.5 * (v + v.signum() * disc.sqrt());
        let r1 = t / u;
        let r2 = if t != 0.0 { c / t } else { r1 };
        match (inside(r1), inside(r2)) {
            (true, false) => r1,
            (false, true) => r2,
            (true, true) if r1 == r2 => r1,
            (true, true) => {
                return Err(Error::Root(format!(
                    "two roots {r1} and {r2} inside scan [{lo}, {hi}]; narrow the q scan"
                )))
            }
            (false, false) => {
                return Err(Error::Root(format!(
                    "roots {r1} and {r2} both outside scan [{lo}, {hi}]; widen or shift the q scan"
                )))
            }
        }
    };
    Ok(QExt {
        q_ext,
        delta_q_ext: dgamma / (2.0 * u * q_ext + v).abs(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisOptions {
    pub window: FitWindow,
    pub weighted: bool,
    pub dgamma_policy: DgammaPolicy,
}

/// Everything the analysis extracts from one model's entropy table;
/// serialized as `fit.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingFit {
    pub model: String,
    pub two_s: u32,
    pub gamma_points: Vec<GammaPoint>,
    pub u: f64,
    pub v: f64,
    pub w: f64,
    pub q_ext: f64,
    pub delta_q_ext: f64,
    pub c_eff: f64,
    pub q_ext_linear_pred: f64,
    pub trio_fraction: f64,
    pub q_ext_pure_pred: f64,
    pub reduced_chi2: f64,
    pub covariance: [[f64; 3]; 3],
    pub dgamma: f64,
    pub fit_window: FitWindow,
}

/// Per-q exponents from the rows of an entropy table, in ascending q.
pub fn gamma_points(rows: &[EntropyRow], window: FitWindow) -> Result<Vec<GammaPoint>> {
    let mut by_q: BTreeMap<u64, (f64, Vec<PowerLawPoint>)> = BTreeMap::new();
    for r in rows {
        // Key on the bit pattern; ordering is restored below.
        by_q.entry(r.q.to_bits())
            .or_insert_with(|| (r.q, Vec::new()))
            .1
            .push(PowerLawPoint {
                l: r.l,
                mean: r.mean,
                stderr: r.stderr,
            });
    }
    let mut out = Vec::with_capacity(by_q.len());
    for (_, (q, mut pts)) in by_q {
        pts.sort_by_key(|p| p.l);
        let fit = fit_power_law(&pts, window).map_err(|e| match e {
            Error::Fit(msg) => Error::Fit(format!("q = {q}: {msg}")),
            other => other,
        })?;
        out.push(GammaPoint {
            q,
            gamma: fit.gamma,
            stderr: fit.gamma_stderr,
        });
    }
    out.sort_by(|a, b| a.q.total_cmp(&b.q));
    Ok(out)
}

/// Runs the full chain: per-q power laws, quadratic law, `q_ext`.
pub fn analyze_rows(
    rows: &[EntropyRow],
    model: &str,
    two_s: u32,
    trio_fraction: f64,
    opts: &AnalysisOptions,
) -> Result<ScalingFit> {
    if rows.is_empty() {
        return Err(Error::Fit("no entropy rows to analyze".into()));
    }
    let points = gamma_points(rows, opts.window)?;
    if points.len() < 5 {
        return Err(Error::Fit(format!(
            "need at least 5 q values, got {}; widen the q grid",
            points.len()
        )));
    }
    let quad = fit_gamma_quadratic(&points, opts.weighted)?;
    let lo = points.first().unwrap().q;
    let hi = points.last().unwrap().q;
    let dgamma = opts.dgamma_policy.pick(&points);
    let root = solve_q_ext(quad.u, quad.v, quad.w, (lo, hi), dgamma)?;
    let c_eff = c_eff_of_spin(two_s);
    Ok(ScalingFit {
        model: model.to_string(),
        two_s,
        gamma_points: points,
        u: quad.u,
        v: quad.v,
        w: quad.w,
        q_ext: root.q_ext,
        delta_q_ext: root.delta_q_ext,
        c_eff,
        q_ext_linear_pred: q_ext_linear(c_eff),
        trio_fraction,
        q_ext_pure_pred: q_ext_pure(c_eff),
        reduced_chi2: quad.reduced_chi2(),
        covariance: quad.covariance,
        dgamma,
        fit_window: opts.window,
    })
}

/// One model's result in a sweep across spins.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub c_eff: f64,
    pub q_ext: f64,
    pub delta_q_ext: f64,
    pub model: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearLawFit {
    pub k: f64,
    pub k_stderr: f64,
}

/// Weighted fit of `1 - q_ext = k / c_eff` through the origin.
pub fn fit_linear_law(rows: &[SweepRow]) -> Result<LinearLawFit> {
    if rows.len() < 2 {
        return Err(Error::Fit(format!(
            "linear law needs at least 2 models, got {}",
            rows.len()
        )));
    }
    let weight = |r: &SweepRow| {
        if r.delta_q_ext > 0.0 && r.delta_q_ext.is_finite() {
            r.delta_q_ext.powi(-2)
        } else {
            1.0
        }
    };
    let (mut sxx, mut sxy) = (0.0, 0.0);
    for r in rows {
        let x = 1.0 / r.c_eff;
        let y = 1.0 - r.q_ext;
        let wt = weight(r);
        sxx += wt * x * x;
        sxy += wt * x * y;
    }
    if sxx.is_nan() || sxx <= 0.0 {
        return Err(Error::Fit("degenerate c_eff values".into()));
    }
    Ok(LinearLawFit {
        k: sxy / sxx,
        k_stderr: sxx.sqrt().recip(),
    })
}
