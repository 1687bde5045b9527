//! Random coupling configurations drawn from the gapless power law
//! `P(J) ∝ J^(-alpha)` on `(0, support_max]`.
//!
//! Every configuration owns an independent ChaCha stream selected by
//! `(master_seed, config_index)`, so an ensemble can be generated in any
//! order, on any number of threads, with bit-identical results.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DisorderSpec {
    pub exponent_alpha: f64,
    pub support_max: f64,
    pub master_seed: u64,
}

impl Default for DisorderSpec {
    fn default() -> Self {
        Self {
            exponent_alpha: 0.8,
            support_max: 1.0,
            master_seed: 0,
        }
    }
}

impl DisorderSpec {
    pub fn new(exponent_alpha: f64, support_max: f64, master_seed: u64) -> Result<Self> {
        let spec = Self {
            exponent_alpha,
            support_max,
            master_seed,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.exponent_alpha) {
            return Err(Error::InvalidParameter(format!(
                "disorder.alpha must lie in [0, 1), got {}",
                self.exponent_alpha
            )));
        }
        if !(self.support_max > 0.0 && self.support_max.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "disorder.support_max must be positive, got {}",
                self.support_max
            )));
        }
        Ok(())
    }

    /// Inverse CDF of the power law: `J = support_max * U^(1/(1-alpha))`.
    ///
    /// `u` is expected in `(0, 1]`.
    #[inline]
    pub fn inverse_cdf(&self, u: f64) -> f64 {
        self.support_max * u.powf(1.0 / (1.0 - self.exponent_alpha))
    }

    /// Analytic CDF `F(J) = (J / support_max)^(1-alpha)`.
    #[inline]
    pub fn cdf(&self, j: f64) -> f64 {
        if j <= 0.0 {
            0.0
        } else if j >= self.support_max {
            1.0
        } else {
            (j / self.support_max).powf(1.0 - self.exponent_alpha)
        }
    }

    /// The random stream dedicated to one configuration.
    pub fn config_rng(&self, config_index: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.master_seed);
        rng.set_stream(config_index);
        rng
    }
}

/// Uniform variate on `(0, 1]`.
#[inline]
pub fn open_closed_unit<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    1.0 - rng.random::<f64>()
}

/// Draw the `n_sites` couplings of configuration `config_index`.
pub fn sample_couplings(
    spec: &DisorderSpec,
    n_sites: usize,
    config_index: u64,
) -> Result<Vec<f64>> {
    spec.validate()?;
    if n_sites < 4 || !n_sites.is_multiple_of(2) {
        return Err(Error::InvalidParameter(format!(
            "chain length must be even and at least 4, got {n_sites}"
        )));
    }
    let mut rng = spec.config_rng(config_index);
    Ok((0..n_sites)
        .map(|_| spec.inverse_cdf(open_closed_unit(&mut rng)))
        .collect())
}
