//! Tsallis entropy of a block crossed by `n` singlets, and ensemble
//! statistics of it over disorder configurations.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::blocks::CrossingTable;
use crate::error::{Error, Result};

/// Below this distance from `q = 1` the von Neumann limit is returned.
pub const VON_NEUMANN_EPS: f64 = 1e-9;

/// `S_q` of a block sharing `n` singlets of local dimension `D = two_s + 1`
/// with its complement: `[D^{n(1-q)} - 1] / (1 - q)`, natural-log units.
pub fn tsallis_singlet_entropy(n: u32, q: f64, two_s: u32) -> Result<f64> {
    if !q.is_finite() || two_s == 0 {
        return Err(Error::InvalidParameter(format!(
            "need finite q and positive two_s (q = {q}, two_s = {two_s})"
        )));
    }
    if n == 0 {
        return Ok(0.0);
    }
    let ln_d = ((two_s + 1) as f64).ln();
    let one_minus_q = 1.0 - q;
    if one_minus_q.abs() < VON_NEUMANN_EPS {
        return Ok(n as f64 * ln_d);
    }
    let x = n as f64 * one_minus_q * ln_d;
    let overflow = || Error::EntropyOverflow {
        n,
        q,
        dim: two_s + 1,
    };
    if x > f64::MAX.ln() {
        return Err(overflow());
    }
    let s = x.exp_m1() / one_minus_q;
    if s.is_finite() {
        Ok(s)
    } else {
        Err(overflow())
    }
}

/// Composition law for the entropy of independent subsystems.
pub fn pseudo_additive(sa: f64, sb: f64, q: f64) -> f64 {
    sa + sb + (1.0 - q) * sa * sb
}

/// Online mean and variance (Welford), mergeable with Chan's update.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct RunningStats {
    count: u64,
    mean: f64,
    m2: f64,
}

impl RunningStats {
    #[inline]
    pub fn push(&mut self, x: f64) {
        self.count += 1;
        let delta = x - self.mean;
        self.mean += delta / self.count as f64;
        self.m2 += delta * (x - self.mean);
    }

    pub fn merge(&mut self, other: &RunningStats) {
        if other.count == 0 {
            return;
        }
        if self.count == 0 {
            *self = *other;
            return;
        }
        let n = self.count + other.count;
        let delta = other.mean - self.mean;
        let (na, nb) = (self.count as f64, other.count as f64);
        self.mean += delta * nb / n as f64;
        self.m2 += other.m2 + delta * delta * na * nb / n as f64;
        self.count = n;
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// Unbiased sample variance; 0 with fewer than two samples.
    pub fn variance(&self) -> f64 {
        if self.count > 1 {
            self.m2 / (self.count - 1) as f64
        } else {
            0.0
        }
    }

    pub fn stderr(&self) -> f64 {
        if self.count > 1 {
            (self.variance() / self.count as f64).sqrt()
        } else {
            0.0
        }
    }
}

/// Ensemble statistics of `S_q(L)` over configurations, q-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntropyTable {
    two_s: u32,
    q_values: Vec<f64>,
    sizes: Vec<usize>,
    cells: Vec<RunningStats>,
}

impl EntropyTable {
    pub fn new(two_s: u32, q_values: Vec<f64>, sizes: Vec<usize>) -> Result<Self> {
        if q_values.is_empty() || sizes.is_empty() {
            return Err(Error::InvalidParameter(
                "empty q grid or block ladder".into(),
            ));
        }
        if two_s == 0 || q_values.iter().any(|q| !q.is_finite()) {
            return Err(Error::InvalidParameter(
                "q values must be finite and two_s positive".into(),
            ));
        }
        let cells = vec![RunningStats::default(); q_values.len() * sizes.len()];
        Ok(Self {
            two_s,
            q_values,
            sizes,
            cells,
        })
    }

    pub fn two_s(&self) -> u32 {
        self.two_s
    }

    pub fn q_values(&self) -> &[f64] {
        &self.q_values
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn samples(&self) -> u64 {
        self.cells[0].count()
    }

    pub fn cell(&self, qi: usize, li: usize) -> &RunningStats {
        &self.cells[qi * self.sizes.len() + li]
    }

    /// Adds one configuration. With several anchors, the configuration's
    /// entropy is the anchor average of the per-anchor entropies.
    pub fn accumulate(&mut self, counts: &CrossingTable) -> Result<()> {
        if counts.sizes != self.sizes {
            return Err(Error::LadderMismatch(format!(
                "table has {:?}, counts have {:?}",
                self.sizes, counts.sizes
            )));
        }
        let n_anchor = counts.counts.len() as f64;
        let n_l = self.sizes.len();
        for (qi, &q) in self.q_values.iter().enumerate() {
            for (li, &block) in self.sizes.iter().enumerate() {
                let mut acc = 0.0;
                for row in &counts.counts {
                    let n = row[li];
                    acc += tsallis_singlet_entropy(n, q, self.two_s)
                        .map_err(|_| Error::EnsembleOverflow { q, block, n })?;
                }
                self.cells[qi * n_l + li].push(acc / n_anchor);
            }
        }
        Ok(())
    }

    /// Associative merge of statistics over disjoint configuration sets.
    pub fn merge(&mut self, other: &EntropyTable) -> Result<()> {
        if self.sizes != other.sizes || self.q_values != other.q_values || self.two_s != other.two_s
        {
            return Err(Error::LadderMismatch(
                "cannot merge tables with different q grids, ladders or spins".into(),
            ));
        }
        for (a, b) in self.cells.iter_mut().zip(&other.cells) {
            a.merge(b);
        }
        Ok(())
    }

    pub fn rows(&self) -> Vec<EntropyRow> {
        let mut rows = Vec::with_capacity(self.cells.len());
        for (qi, &q) in self.q_values.iter().enumerate() {
            for (li, &l) in self.sizes.iter().enumerate() {
                let c = self.cell(qi, li);
                rows.push(EntropyRow {
                    q,
                    l,
                    mean: c.mean(),
                    stderr: c.stderr(),
                    m: c.count(),
                });
            }
        }
        rows
    }

    /// Writes `q,L,mean,stderr,M` with 12 significant digits.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        write_rows_csv(&self.rows(), out)
    }
}

/// One line of `entropy.csv`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EntropyRow {
    pub q: f64,
    #[serde(rename = "L")]
    pub l: usize,
    pub mean: f64,
    pub stderr: f64,
    #[serde(rename = "M")]
    pub m: u64,
}

/// Decimal rendering with `digits` significant digits.
pub fn format_significant(x: f64, digits: usize) -> String {
    if x == 0.0 || !x.is_finite() {
        return if x == 0.0 {
            "0".to_string()
        } else {
            x.to_string()
        };
    }
    let magnitude = x.abs().log10().floor() as i64;
    let decimals = (digits as i64 - 1 - magnitude).max(0) as usize;
    let s = format!("{x:.decimals$}");
    // Rounding can carry into a new leading digit (9.99.. -> 10.0..).
    let carried = s
        .trim_start_matches('-')
        .split('.')
        .next()
        .map(str::len)
        .unwrap_or(0);
    if decimals > 0 && carried as i64 > magnitude.max(0) + 1 {
        format!("{x:.prec$}", prec = decimals - 1)
    } else {
        s
    }
}

pub fn write_rows_csv<W: Write>(rows: &[EntropyRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let csv_err = |e: csv::Error| Error::Input {
        path: "entropy.csv".into(),
        msg: e.to_string(),
    };
    w.write_record(["q", "L", "mean", "stderr", "M"])
        .map_err(csv_err)?;
    for r in rows {
        w.write_record([
            format_significant(r.q, 12),
            r.l.to_string(),
            format_significant(r.mean, 12),
            format_significant(r.stderr, 12),
            r.m.to_string(),
        ])
        .map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::io("entropy.csv", e))?;
    Ok(())
}

pub fn read_rows_csv<R: Read>(input: R, origin: &Path) -> Result<Vec<EntropyRow>> {
    let mut rdr = csv::Reader::from_reader(input);
    let headers = rdr
        .headers()
        .map_err(|e| Error::Input {
            path: origin.into(),
            msg: e.to_string(),
        })?
        .clone();
    if headers.iter().collect::<Vec<_>>() != ["q", "L", "mean", "stderr", "M"] {
        return Err(Error::Input {
            path: origin.into(),
            msg: format!("expected header q,L,mean,stderr,M, got {:?}", headers),
        });
    }
    let rows = rdr
        .deserialize()
        .collect::<std::result::Result<Vec<EntropyRow>, _>>()
        .map_err(|e| Error::Input {
            path: origin.into(),
            msg: e.to_string(),
        })?;
    if rows.is_empty() {
        return Err(Error::Input {
            path: origin.into(),
            msg: "no data rows".into(),
        });
    }
    Ok(rows)
}
