//! First-passage approximation for `n = 1` built from the discrete two-barrier
//! problem.
//!
//! Starting from the midpoint of an odd grid, the number of price changes
//! needed to reach 1 or N is the absorption time of a simple symmetric ±1
//! walk. Each order arrival changes the price with probability
//! `rho / (2 (rho + 1))`, so the number of arrivals is a sum of that many
//! geometric waiting counts, and arrivals are spaced by exponentials of rate
//! `2 mu (1 + rho)`. The continuous-time approximation is therefore a Gamma
//! mixture.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, Gamma, Geometric};
use rayon::prelude::*;

use crate::error::{invalid, Result};
use crate::model::ModelParams;
use crate::rng::{RngSpec, StreamPurpose};

/// Target tail mass left out of the tabulated two-barrier distribution.
pub const TRUNCATION_EPS: f64 = 1e-12;

fn check_odd_grid(n_prices: u32) -> Result<()> {
    if n_prices < 3 || n_prices.is_multiple_of(2) {
        return Err(invalid(
            "N",
            format!("must be odd and at least 3, got {n_prices}"),
        ));
    }
    Ok(())
}

/// Angles `k pi / (N - 1)` for odd `k`, with their sine, cosine and the sign
/// `sin(k pi / 2)`. Even `k` contribute nothing and are skipped.
fn spectral_terms(n_prices: u32) -> impl Iterator<Item = (f64, f64, f64)> {
    let m = n_prices - 1;
    (1..m).step_by(2).map(move |k| {
        let theta = f64::from(k) * PI / f64::from(m);
        let cos = if 2 * k == m { 0.0 } else { theta.cos() };
        let sign = if (k / 2) % 2 == 0 { 1.0 } else { -1.0 };
        (theta.sin(), cos, sign)
    })
}

/// Whether `h` steps can take the walk from the midpoint to a barrier.
fn parity_allows(n_prices: u32, h: u64) -> bool {
    let distance = u64::from((n_prices - 1) / 2);
    h >= distance && (h - distance).is_multiple_of(2)
}

/// `P(H = h)` for the number of ±1 steps a simple symmetric walk started at
/// `(N + 1) / 2` needs to first reach 1 or N.
pub fn discrete_fpt_pmf(n_prices: u32, h: u64) -> Result<f64> {
    check_odd_grid(n_prices)?;
    if h == 0 {
        return Err(invalid("h", "must be at least 1"));
    }
    if !parity_allows(n_prices, h) {
        return Ok(0.0);
    }
    let power = i32::try_from(h - 1).unwrap_or(i32::MAX);
    let sum: f64 = spectral_terms(n_prices)
        .map(|(sin, cos, sign)| sign * sin * cos.powi(power))
        .sum();
    Ok((2.0 / f64::from(n_prices - 1) * sum).clamp(0.0, 1.0))
}

/// Closed-form `E[H]` from the spectral sum, using `sum_h h c^(h-1) = 1 / (1 - c)^2`.
pub fn discrete_fpt_mean(n_prices: u32) -> Result<f64> {
    check_odd_grid(n_prices)?;
    let sum: f64 = spectral_terms(n_prices)
        .map(|(sin, cos, sign)| sign * sin / (1.0 - cos).powi(2))
        .sum();
    Ok(2.0 / f64::from(n_prices - 1) * sum)
}

/// Tabulated distribution of the two-barrier step count.
#[derive(Debug, Clone)]
pub struct DiscreteFptDist {
    n_prices: u32,
    /// `pmf[h - 1] = P(H = h)`.
    pmf: Vec<f64>,
    cdf: Vec<f64>,
    truncation_eps: f64,
}

impl DiscreteFptDist {
    /// Tabulates until the cumulative mass reaches `1 - TRUNCATION_EPS` or
    /// `h` exceeds `200 (N - 1)^2`.
    pub fn new(n_prices: u32) -> Result<Self> {
        check_odd_grid(n_prices)?;
        let h_max = 200 * u64::from(n_prices - 1).pow(2);
        let mut pmf = Vec::new();
        let mut total = 0.0;
        let mut h = 1;
        while total < 1.0 - TRUNCATION_EPS && h <= h_max {
            let p = discrete_fpt_pmf(n_prices, h)?;
            total += p;
            pmf.push(p);
            h += 1;
        }
        let mut cdf = Vec::with_capacity(pmf.len());
        let mut acc = 0.0;
        for &p in &pmf {
            acc += p / total;
            cdf.push(acc);
        }
        Ok(Self {
            n_prices,
            pmf,
            cdf,
            truncation_eps: 1.0 - total,
        })
    }

    pub fn n_prices(&self) -> u32 {
        self.n_prices
    }

    /// Untruncated-formula probabilities for `h = 1..=len`.
    pub fn pmf(&self) -> &[f64] {
        &self.pmf
    }

    /// Mass missing from the table; redistributed proportionally when sampling.
    pub fn truncation_eps(&self) -> f64 {
        self.truncation_eps
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u64 {
        let u: f64 = rng.random();
        let idx = self
            .cdf
            .partition_point(|&c| c <= u)
            .min(self.cdf.len() - 1);
        idx as u64 + 1
    }
}

/// Parameters of the Gamma-mixture approximation.
#[derive(Debug, Clone)]
pub struct MixtureApprox {
    params: ModelParams,
    /// Probability that an order arrival changes the price, `rho / (2 (rho + 1))`.
    pub move_prob: f64,
    /// Mean spacing of arrivals, `1 / (2 mu (1 + rho))`.
    pub event_time_scale: f64,
    steps: DiscreteFptDist,
}

impl MixtureApprox {
    /// Requires `n = 1` and an odd grid.
    pub fn new(params: &ModelParams) -> Result<Self> {
        if params.cutoff != 1 {
            return Err(invalid(
                "n",
                "the mixture approximation is defined for n = 1",
            ));
        }
        let rho = params.rho();
        Ok(Self {
            params: *params,
            move_prob: rho / (2.0 * (rho + 1.0)),
            event_time_scale: 1.0 / (2.0 * params.mu * (1.0 + rho)),
            steps: DiscreteFptDist::new(params.n_prices)?,
        })
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn step_distribution(&self) -> &DiscreteFptDist {
        &self.steps
    }

    /// Number of order arrivals needed for `price_changes` changes: a sum of
    /// geometric counts on `{1, 2, ...}`.
    pub fn sample_event_count<R: Rng + ?Sized>(&self, price_changes: u64, rng: &mut R) -> u64 {
        let failures = Geometric::new(self.move_prob).expect("move_prob in (0, 1/2)");
        price_changes
            + (0..price_changes)
                .map(|_| failures.sample(rng))
                .sum::<u64>()
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let changes = self.steps.sample(rng);
        let events = self.sample_event_count(changes, rng);
        Gamma::new(events as f64, self.event_time_scale)
            .expect("positive shape and scale")
            .sample(rng)
    }

    /// `E[H] / move_prob * event_time_scale`, with `E[H]` in closed form.
    pub fn mean(&self) -> f64 {
        let steps = discrete_fpt_mean(self.params.n_prices).expect("grid validated");
        steps / self.move_prob * self.event_time_scale
    }

    /// `samples` draws, draw `i` from mixture stream `i` of `master_seed`.
    pub fn sample_batch(&self, samples: usize, master_seed: u64) -> Vec<f64> {
        (0..samples as u64)
            .into_par_iter()
            .map(|i| {
                self.sample(&mut RngSpec::for_purpose(master_seed, StreamPurpose::Mixture, i).rng())
            })
            .collect()
    }
}

pub fn mixture_sample<R: Rng + ?Sized>(approx: &MixtureApprox, rng: &mut R) -> f64 {
    approx.sample(rng)
}

/// Monte Carlo estimate with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub mean: f64,
    pub std_error: f64,
}

/// Monte Carlo mean of `log T` under the mixture.
pub fn mixture_log_mean<R: Rng + ?Sized>(
    approx: &MixtureApprox,
    samples: usize,
    rng: &mut R,
) -> Result<Estimate> {
    if samples == 0 {
        return Err(invalid("samples", "must be at least 1"));
    }
    let logs: Vec<f64> = (0..samples).map(|_| approx.sample(rng).ln()).collect();
    let n = samples as f64;
    let mean = logs.iter().sum::<f64>() / n;
    let std_error = if samples > 1 {
        let var = logs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
        (var / n).sqrt()
    } else {
        f64::NAN
    };
    Ok(Estimate { mean, std_error })
}
