//! ECDFs, histograms, moment summaries and the two-sample Kolmogorov-Smirnov
//! test with permutation p-values.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

fn sorted_copy(samples: &[f64]) -> Result<Vec<f64>> {
    if samples.is_empty() {
        return Err(Error::EmptySample);
    }
    if samples.iter().any(|x| x.is_nan()) {
        return Err(invalid("samples", "NaN in sample"));
    }
    let mut v = samples.to_vec();
    v.sort_by(f64::total_cmp);
    Ok(v)
}

/// Empirical CDF `F(x) = #{samples <= x} / n`.
#[derive(Debug, Clone, PartialEq)]
pub struct Ecdf {
    sorted: Vec<f64>,
}

impl Ecdf {
    pub fn new(samples: &[f64]) -> Result<Self> {
        Ok(Self {
            sorted: sorted_copy(samples)?,
        })
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.sorted.partition_point(|&v| v <= x) as f64 / self.sorted.len() as f64
    }

    pub fn sorted_values(&self) -> &[f64] {
        &self.sorted
    }

    pub fn len(&self) -> usize {
        self.sorted.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sorted.is_empty()
    }

    /// `(x, F(x))` at every distinct sample value.
    pub fn steps(&self) -> Vec<(f64, f64)> {
        let n = self.sorted.len() as f64;
        let mut out: Vec<(f64, f64)> = Vec::new();
        for (i, &x) in self.sorted.iter().enumerate() {
            let f = (i + 1) as f64 / n;
            match out.last_mut() {
                Some(last) if last.0 == x => last.1 = f,
                _ => out.push((x, f)),
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KsResult {
    /// `sup |F_a - F_b|`.
    pub statistic: f64,
    /// `sup (F_a - F_b)`: large when `a` tends to be smaller than `b`.
    pub d_plus: f64,
    /// `sup (F_b - F_a)`.
    pub d_minus: f64,
    /// Permutation p-value of `statistic`.
    pub p_value: f64,
    pub p_value_plus: f64,
    pub p_value_minus: f64,
    pub replicates: usize,
}

/// Pooled sorted sample with the boundaries of its tie groups.
struct Pooled {
    /// Index one past the end of each tie group.
    group_ends: Vec<usize>,
    labels: Vec<bool>,
    n_a: usize,
    n_b: usize,
}

impl Pooled {
    fn new(a: &[f64], b: &[f64]) -> Self {
        let mut pooled: Vec<(f64, bool)> = a
            .iter()
            .map(|&x| (x, true))
            .chain(b.iter().map(|&x| (x, false)))
            .collect();
        pooled.sort_by(|x, y| x.0.total_cmp(&y.0));
        let mut group_ends = Vec::new();
        for i in 1..pooled.len() {
            if pooled[i].0 != pooled[i - 1].0 {
                group_ends.push(i);
            }
        }
        group_ends.push(pooled.len());
        Self {
            group_ends,
            labels: pooled.iter().map(|p| p.1).collect(),
            n_a: a.len(),
            n_b: b.len(),
        }
    }

    /// `(d_plus, d_minus)` for the current labelling.
    fn distances(&self) -> (f64, f64) {
        let (na, nb) = (self.n_a as f64, self.n_b as f64);
        let (mut ca, mut cb) = (0usize, 0usize);
        let (mut plus, mut minus) = (0.0f64, 0.0f64);
        let mut start = 0;
        for &end in &self.group_ends {
            for &is_a in &self.labels[start..end] {
                if is_a {
                    ca += 1;
                } else {
                    cb += 1;
                }
            }
            let diff = ca as f64 / na - cb as f64 / nb;
            plus = plus.max(diff);
            minus = minus.max(-diff);
            start = end;
        }
        (plus, minus)
    }
}

/// Two-sample KS statistics without resampling: `(sup|F_a - F_b|, d_plus, d_minus)`.
pub fn ks_statistic(a: &[f64], b: &[f64]) -> Result<(f64, f64, f64)> {
    sorted_copy(a)?;
    sorted_copy(b)?;
    let (plus, minus) = Pooled::new(a, b).distances();
    Ok((plus.max(minus), plus, minus))
}

/// Two-sample KS test. The null distribution is approximated by
/// `replicates` random relabellings of the pooled sample; p-values use the
/// `(1 + hits) / (1 + replicates)` estimator.
pub fn ks_two_sample<R: Rng + ?Sized>(
    a: &[f64],
    b: &[f64],
    replicates: usize,
    rng: &mut R,
) -> Result<KsResult> {
    let (statistic, d_plus, d_minus) = ks_statistic(a, b)?;
    let mut pooled = Pooled::new(a, b);
    // guard against equal statistics differing in the last bit
    let slack = 1e-12;
    let (mut hits, mut hits_plus, mut hits_minus) = (0usize, 0usize, 0usize);
    for _ in 0..replicates {
        pooled.labels.shuffle(rng);
        let (p, m) = pooled.distances();
        hits += usize::from(p.max(m) >= statistic - slack);
        hits_plus += usize::from(p >= d_plus - slack);
        hits_minus += usize::from(m >= d_minus - slack);
    }
    let pv = |h: usize| (1 + h) as f64 / (1 + replicates) as f64;
    Ok(KsResult {
        statistic,
        d_plus,
        d_minus,
        p_value: pv(hits),
        p_value_plus: pv(hits_plus),
        p_value_minus: pv(hits_minus),
        replicates,
    })
}

/// Mean and standard deviation of a moment-fitted normal curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalFit {
    pub mean: f64,
    pub sd: f64,
}

impl NormalFit {
    pub fn density(&self, x: f64) -> f64 {
        if self.sd == 0.0 {
            return if x == self.mean { f64::INFINITY } else { 0.0 };
        }
        let z = (x - self.mean) / self.sd;
        (-0.5 * z * z).exp() / (self.sd * (2.0 * std::f64::consts::PI).sqrt())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    /// `bins + 1` edges.
    pub edges: Vec<f64>,
    pub counts: Vec<u64>,
    pub fit: NormalFit,
}

/// Equal-width histogram over `[min, max]`.
///
/// Bins are `(e_k, e_{k+1}]` except the first, which also includes `min`.
/// All-equal samples produce a single bin.
pub fn histogram(samples: &[f64], bins: usize) -> Result<Histogram> {
    if bins == 0 {
        return Err(invalid("bins", "must be at least 1"));
    }
    let sorted = sorted_copy(samples)?;
    let summary = Summary::of(&sorted)?;
    let fit = NormalFit {
        mean: summary.mean,
        sd: summary.sd,
    };
    let (lo, hi) = (sorted[0], sorted[sorted.len() - 1]);
    if lo == hi {
        return Ok(Histogram {
            edges: vec![lo, hi],
            counts: vec![sorted.len() as u64],
            fit,
        });
    }
    let width = (hi - lo) / bins as f64;
    let mut edges: Vec<f64> = (0..bins).map(|k| lo + k as f64 * width).collect();
    edges.push(hi);
    let mut counts = vec![0u64; bins];
    for &x in &sorted {
        let k = if x == lo {
            0
        } else {
            // first edge at or above x closes the bin
            edges
                .partition_point(|&e| e < x)
                .saturating_sub(1)
                .min(bins - 1)
        };
        counts[k] += 1;
    }
    Ok(Histogram { edges, counts, fit })
}

/// Freedman-Diaconis bin count, `ceil(range / (2 IQR n^(-1/3)))`; 1 if degenerate.
pub fn freedman_diaconis_bins(samples: &[f64]) -> Result<usize> {
    let sorted = sorted_copy(samples)?;
    let iqr = quantile_sorted(&sorted, 0.75) - quantile_sorted(&sorted, 0.25);
    let range = sorted[sorted.len() - 1] - sorted[0];
    if iqr <= 0.0 || range <= 0.0 {
        return Ok(1);
    }
    let width = 2.0 * iqr / (sorted.len() as f64).cbrt();
    Ok(((range / width).ceil() as usize).max(1))
}

/// Linear-interpolation quantile of sorted data.
fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let i = pos.floor() as usize;
    let frac = pos - i as f64;
    if i + 1 < sorted.len() {
        sorted[i] + frac * (sorted[i + 1] - sorted[i])
    } else {
        sorted[i]
    }
}

/// Sample moments.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub n: usize,
    pub mean: f64,
    /// Unbiased standard deviation (0 for a single sample).
    pub sd: f64,
    pub std_error: f64,
    /// `m3 / m2^(3/2)` with population central moments; 0 when degenerate.
    pub skewness: f64,
}

impl Summary {
    pub fn of(samples: &[f64]) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::EmptySample);
        }
        let n = samples.len() as f64;
        let mean = samples.iter().sum::<f64>() / n;
        let m2 = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
        let m3 = samples.iter().map(|x| (x - mean).powi(3)).sum::<f64>() / n;
        let var = if samples.len() > 1 {
            m2 * n / (n - 1.0)
        } else {
            0.0
        };
        let sd = var.sqrt();
        Ok(Self {
            n: samples.len(),
            mean,
            sd,
            std_error: sd / n.sqrt(),
            skewness: if m2 > 0.0 { m3 / m2.powf(1.5) } else { 0.0 },
        })
    }
}
