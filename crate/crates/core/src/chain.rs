//! Low-traffic price chain.
//!
//! When `rho << 1` every limit order is consumed before the next one arrives,
//! so the trade price performs a Markov chain on `1..=N`: with probability
//! 1/2 the next trade is a bid drawn from `[p - n, p]`, otherwise an ask drawn
//! from `[p, p + n]`, both clipped to the grid.
//!
//! Matrices can be built in exact rational arithmetic or in `f64`. Two
//! independent constructions exist: [`transition_matrix`] evaluates the bid
//! and ask kernels entry by entry, while [`block_matrix`] assembles the
//! banded interior and the two boundary blocks from the scalars `a`, `d_i`
//! and `b_i` of [`BlockParams`].

use std::ops::Add;

use nalgebra::{DMatrix, DVector};
use num_rational::Rational64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::model::{ModelParams, Price};

/// Residual bound accepted from the direct invariant-distribution solve.
pub const INVARIANT_RESIDUAL_TOL: f64 = 1e-12;
const POWER_TOL: f64 = 1e-12;
const POWER_MAX_ITER: usize = 1_000_000;

/// Probability vector over prices `1..=N` (stored at index `p - 1`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriceDistribution {
    probs: Vec<f64>,
}

impl PriceDistribution {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::EmptySample);
        }
        if probs.iter().any(|&x| !(x.is_finite() && x >= 0.0)) {
            return Err(invalid("probs", "entries must be finite and non-negative"));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(invalid("probs", format!("entries sum to {total}, not 1")));
        }
        Ok(Self { probs })
    }

    pub fn uniform(n_prices: u32) -> Self {
        Self {
            probs: vec![1.0 / f64::from(n_prices); n_prices as usize],
        }
    }

    /// Normalized frequencies; fails if every count is zero.
    pub fn from_counts(counts: &[u64]) -> Result<Self> {
        let total: u64 = counts.iter().sum();
        if total == 0 {
            return Err(Error::NoTrades);
        }
        Ok(Self {
            probs: counts.iter().map(|&c| c as f64 / total as f64).collect(),
        })
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn n_prices(&self) -> u32 {
        self.probs.len() as u32
    }

    pub fn prob(&self, p: Price) -> f64 {
        self.probs[p.get() as usize - 1]
    }

    /// Half the L1 distance.
    pub fn total_variation(&self, other: &Self) -> f64 {
        assert_eq!(
            self.probs.len(),
            other.probs.len(),
            "distributions on different grids"
        );
        0.5 * self
            .probs
            .iter()
            .zip(&other.probs)
            .map(|(a, b)| (a - b).abs())
            .sum::<f64>()
    }

    /// `max_p |(pi P)_p - pi_p|`.
    pub fn stationarity_residual(&self, matrix: &TransitionMatrix) -> f64 {
        let n = self.probs.len();
        (0..n)
            .map(|j| {
                let flow: f64 = (0..n)
                    .map(|i| self.probs[i] * matrix.entries[i * n + j])
                    .sum();
                (flow - self.probs[j]).abs()
            })
            .fold(0.0, f64::max)
    }
}

/// Matrix entries the constructions can be written in.
pub trait Entry: Copy + Add<Output = Self> + PartialEq + std::fmt::Debug {
    fn zero() -> Self;
    /// `1 / k` for a positive integer `k`.
    fn recip(k: u32) -> Self;
}

impl Entry for f64 {
    fn zero() -> Self {
        0.0
    }

    fn recip(k: u32) -> Self {
        1.0 / f64::from(k)
    }
}

impl Entry for Rational64 {
    fn zero() -> Self {
        Rational64::from_integer(0)
    }

    fn recip(k: u32) -> Self {
        Rational64::new(1, i64::from(k))
    }
}

/// Row-stochastic `N x N` matrix of the price chain, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionMatrix<T = f64> {
    n_prices: u32,
    entries: Vec<T>,
}

pub type ExactTransitionMatrix = TransitionMatrix<Rational64>;

impl<T: Entry> TransitionMatrix<T> {
    /// Wraps row-major entries without checking stochasticity.
    pub fn from_rows(n_prices: u32, entries: Vec<T>) -> Result<Self> {
        if n_prices < 2 || entries.len() != (n_prices as usize).pow(2) {
            return Err(invalid(
                "matrix",
                format!("expected {n_prices}x{n_prices} entries"),
            ));
        }
        Ok(Self { n_prices, entries })
    }

    pub fn n_prices(&self) -> u32 {
        self.n_prices
    }

    /// `P(from -> to)` for prices in `1..=N`.
    pub fn get(&self, from: u32, to: u32) -> T {
        let n = self.n_prices as usize;
        self.entries[(from as usize - 1) * n + (to as usize - 1)]
    }

    /// Row of price `from`.
    pub fn row(&self, from: u32) -> &[T] {
        let n = self.n_prices as usize;
        let start = (from as usize - 1) * n;
        &self.entries[start..start + n]
    }

    pub fn entries(&self) -> &[T] {
        &self.entries
    }

    pub fn row_sum(&self, from: u32) -> T {
        self.row(from).iter().fold(T::zero(), |acc, &x| acc + x)
    }
}

impl ExactTransitionMatrix {
    pub fn to_f64(&self) -> TransitionMatrix {
        TransitionMatrix {
            n_prices: self.n_prices,
            entries: self
                .entries
                .iter()
                .map(|r| *r.numer() as f64 / *r.denom() as f64)
                .collect(),
        }
    }
}

fn bid_denominator(p: u32, b: u32, cutoff: u32) -> Option<u32> {
    if b > p || b + cutoff < p {
        None
    } else if p <= cutoff {
        Some(p)
    } else {
        Some(cutoff + 1)
    }
}

fn ask_denominator(p: u32, a: u32, cutoff: u32, n_prices: u32) -> Option<u32> {
    if a < p || a > p + cutoff {
        None
    } else if p + cutoff > n_prices {
        Some(n_prices - p + 1)
    } else {
        Some(cutoff + 1)
    }
}

fn check_price(p: u32, n_prices: u32) -> Result<()> {
    Price::new(p, n_prices).map(|_| ())
}

/// Probability that a bid arriving on an empty book after a trade at `p` is placed at `b`.
pub fn bid_prob(p: u32, b: u32, params: &ModelParams) -> Result<f64> {
    check_price(p, params.n_prices)?;
    check_price(b, params.n_prices)?;
    Ok(bid_denominator(p, b, params.cutoff).map_or(0.0, |k| 1.0 / f64::from(k)))
}

/// Probability that an ask arriving on an empty book after a trade at `p` is placed at `a`.
pub fn ask_prob(p: u32, a: u32, params: &ModelParams) -> Result<f64> {
    check_price(p, params.n_prices)?;
    check_price(a, params.n_prices)?;
    Ok(ask_denominator(p, a, params.cutoff, params.n_prices).map_or(0.0, |k| 1.0 / f64::from(k)))
}

fn check_cutoff(params: &ModelParams) -> Result<()> {
    if params.cutoff >= params.n_prices {
        return Err(invalid(
            "n",
            format!(
                "cut-off must be below N (n = {}, N = {})",
                params.cutoff, params.n_prices
            ),
        ));
    }
    Ok(())
}

fn kernel_matrix<T: Entry>(params: &ModelParams) -> Result<TransitionMatrix<T>> {
    check_cutoff(params)?;
    let (n_prices, cutoff) = (params.n_prices, params.cutoff);
    let half = |d: Option<u32>| d.map_or(T::zero(), |k| T::recip(2 * k));
    let mut entries = Vec::with_capacity((n_prices as usize).pow(2));
    for p in 1..=n_prices {
        for q in 1..=n_prices {
            let ask = half(ask_denominator(p, q, cutoff, n_prices));
            let bid = half(bid_denominator(p, q, cutoff));
            entries.push(bid + ask);
        }
    }
    Ok(TransitionMatrix { n_prices, entries })
}

/// `P(p -> p') = ask_prob(p, p') / 2 + bid_prob(p, p') / 2`.
pub fn transition_matrix(params: &ModelParams) -> Result<TransitionMatrix> {
    kernel_matrix(params)
}

pub fn transition_matrix_exact(params: &ModelParams) -> Result<ExactTransitionMatrix> {
    kernel_matrix(params)
}

/// Scalars of the block layout: off-diagonal weight `a`, the boundary
/// diagonal `d_i` and the boundary lower-triangle weight `b_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockParams<T = f64> {
    pub a: T,
    /// `d[i - 1] = d_i` for `i = 1..=n`.
    pub d: Vec<T>,
    /// `b[i - 2] = b_i` for `i = 2..=n`.
    pub b: Vec<T>,
}

impl<T: Entry> BlockParams<T> {
    pub fn new(cutoff: u32) -> Self {
        let a = T::recip(2 * (cutoff + 1));
        Self {
            a,
            d: (1..=cutoff).map(|i| T::recip(2 * i) + a).collect(),
            b: (2..=cutoff).map(|i| T::recip(2 * i)).collect(),
        }
    }

    pub fn cutoff(&self) -> u32 {
        self.d.len() as u32
    }

    pub fn d_i(&self, i: u32) -> T {
        self.d[i as usize - 1]
    }

    pub fn b_i(&self, i: u32) -> T {
        self.b[i as usize - 2]
    }

    /// Row sums of the boundary rows `1..=n` followed by the interior row sum `2na + 2a`.
    pub fn row_sums(&self) -> Vec<T> {
        let n = self.cutoff();
        let na = (0..n).fold(T::zero(), |acc, _| acc + self.a);
        let mut sums: Vec<T> = (1..=n)
            .map(|i| {
                let lower = (1..i).fold(T::zero(), |acc, _| acc + self.b_i(i));
                lower + self.d_i(i) + na
            })
            .collect();
        sums.push(na + na + self.a + self.a);
        sums
    }
}

fn block_layout<T: Entry>(params: &ModelParams) -> Result<TransitionMatrix<T>> {
    let (n_prices, cutoff) = (params.n_prices, params.cutoff);
    if n_prices < 2 * cutoff {
        return Err(Error::BlockLayout { n_prices, cutoff });
    }
    let bp = BlockParams::<T>::new(cutoff);
    let n = n_prices as usize;
    let k = cutoff as usize;
    let mut m = vec![T::zero(); n * n];
    for i in 0..n {
        m[i * n + i] = bp.a + bp.a;
        for off in 1..=k {
            if i + off < n {
                m[i * n + i + off] = bp.a;
                m[(i + off) * n + i] = bp.a;
            }
        }
    }
    for i in 1..=cutoff {
        let r = i as usize - 1;
        m[r * n + r] = bp.d_i(i);
        for c in 0..r {
            m[r * n + c] = bp.b_i(i);
        }
    }
    // bottom-right block is the top-left block rotated by 180 degrees
    for r in 0..k {
        for c in 0..k {
            m[(n - 1 - r) * n + (n - 1 - c)] = m[r * n + c];
        }
    }
    Ok(TransitionMatrix {
        n_prices,
        entries: m,
    })
}

/// Assembles the matrix from [`BlockParams`]; requires `N >= 2n`.
pub fn block_matrix(params: &ModelParams) -> Result<TransitionMatrix> {
    block_layout(params)
}

pub fn block_matrix_exact(params: &ModelParams) -> Result<ExactTransitionMatrix> {
    block_layout(params)
}

fn to_dmatrix(matrix: &TransitionMatrix) -> DMatrix<f64> {
    let n = matrix.n_prices as usize;
    DMatrix::from_row_slice(n, n, &matrix.entries)
}

/// Unique `pi` with `pi P = pi` and unit mass.
///
/// Solves the transposed system with the last balance equation replaced by
/// the normalization. Falls back to power iteration when the factorization is
/// singular or the residual exceeds [`INVARIANT_RESIDUAL_TOL`].
pub fn invariant_distribution(matrix: &TransitionMatrix) -> Result<PriceDistribution> {
    match direct_invariant(matrix) {
        Some(pi) if pi.stationarity_residual(matrix) <= INVARIANT_RESIDUAL_TOL => Ok(pi),
        _ => power_iteration(matrix, POWER_TOL, POWER_MAX_ITER),
    }
}

fn direct_invariant(matrix: &TransitionMatrix) -> Option<PriceDistribution> {
    let n = matrix.n_prices as usize;
    let mut system = to_dmatrix(matrix).transpose() - DMatrix::<f64>::identity(n, n);
    system.row_mut(n - 1).fill(1.0);
    let mut rhs = DVector::<f64>::zeros(n);
    rhs[n - 1] = 1.0;
    let sol = system.lu().solve(&rhs)?;
    if sol.iter().any(|x| !x.is_finite()) {
        return None;
    }
    // clear round-off negatives and renormalize
    let mut probs: Vec<f64> = sol.iter().map(|&x| x.max(0.0)).collect();
    let total: f64 = probs.iter().sum();
    probs.iter_mut().for_each(|x| *x /= total);
    Some(PriceDistribution { probs })
}

/// `pi <- pi P` from the uniform vector until successive iterates differ by
/// at most `tol` in sup norm.
pub fn power_iteration(
    matrix: &TransitionMatrix,
    tol: f64,
    max_iter: usize,
) -> Result<PriceDistribution> {
    let n = matrix.n_prices as usize;
    let mut pi = vec![1.0 / n as f64; n];
    let mut next = vec![0.0; n];
    let mut delta = f64::INFINITY;
    for _ in 0..max_iter {
        next.fill(0.0);
        for (i, &w) in pi.iter().enumerate() {
            if w == 0.0 {
                continue;
            }
            for (acc, &p) in next.iter_mut().zip(&matrix.entries[i * n..(i + 1) * n]) {
                *acc += w * p;
            }
        }
        let total: f64 = next.iter().sum();
        next.iter_mut().for_each(|x| *x /= total);
        delta = pi
            .iter()
            .zip(&next)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        std::mem::swap(&mut pi, &mut next);
        if delta <= tol {
            return Ok(PriceDistribution { probs: pi });
        }
    }
    Err(Error::NotConverged {
        iterations: max_iter,
        residual: delta,
    })
}

/// Expected number of chain steps to reach price 1 or N from each price
/// `2..=N-1`, by solving `(I - Q) x = 1` on the transient states.
pub fn mean_absorption_steps(matrix: &TransitionMatrix) -> Result<Vec<f64>> {
    let n = matrix.n_prices as usize;
    if n < 3 {
        return Err(invalid(
            "N",
            "absorption needs at least one transient state (N >= 3)",
        ));
    }
    let m = n - 2;
    let system = DMatrix::from_fn(m, m, |r, c| {
        let id = if r == c { 1.0 } else { 0.0 };
        id - matrix.entries[(r + 1) * n + (c + 1)]
    });
    let x = system
        .lu()
        .solve(&DVector::from_element(m, 1.0))
        .ok_or(Error::Singular)?;
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::Singular);
    }
    Ok(x.iter().copied().collect())
}

/// Expected chain steps from `start` until the price first equals 1 or N.
pub fn mean_fpt_discrete(matrix: &TransitionMatrix, start: u32) -> Result<f64> {
    let n = matrix.n_prices;
    if start < 2 || start + 1 > n {
        return Err(invalid(
            "start",
            format!("must lie in 2..={} (got {start})", n.saturating_sub(1)),
        ));
    }
    Ok(mean_absorption_steps(matrix)?[start as usize - 2])
}

/// Mean first-passage time in continuous time from the median price:
/// the discrete mean divided by the trade rate `2 lambda`.
pub fn mean_fpt_continuous(params: &ModelParams) -> Result<f64> {
    let matrix = transition_matrix(params)?;
    let steps = mean_fpt_discrete(&matrix, params.median_price().get())?;
    Ok(steps / (2.0 * params.lambda))
}

/// Samples paths of the chain from per-row cumulative tables.
#[derive(Debug, Clone)]
pub struct ChainSampler {
    n_prices: u32,
    cumulative: Vec<f64>,
}

impl ChainSampler {
    pub fn new(matrix: &TransitionMatrix) -> Self {
        let n = matrix.n_prices as usize;
        let mut cumulative = Vec::with_capacity(n * n);
        for row in matrix.entries.chunks(n) {
            let mut acc = 0.0;
            for &p in row {
                acc += p;
                cumulative.push(acc);
            }
        }
        Self {
            n_prices: matrix.n_prices,
            cumulative,
        }
    }

    /// Next price after `from`.
    pub fn step<R: Rng + ?Sized>(&self, from: u32, rng: &mut R) -> u32 {
        let n = self.n_prices as usize;
        let row = &self.cumulative[(from as usize - 1) * n..from as usize * n];
        let u = rng.random::<f64>() * row[n - 1];
        row.partition_point(|&c| c <= u).min(n - 1) as u32 + 1
    }

    /// Steps from `start` until the chain first sits at 1 or N.
    pub fn absorption_steps<R: Rng + ?Sized>(&self, start: u32, rng: &mut R) -> u64 {
        let mut p = start;
        let mut steps = 0;
        while p != 1 && p != self.n_prices {
            p = self.step(p, rng);
            steps += 1;
        }
        steps
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(n_prices: u32, cutoff: u32) -> ModelParams {
        ModelParams::new(n_prices, cutoff, 0.01, 1.0).unwrap()
    }

    fn r(n: i64, d: i64) -> Rational64 {
        Rational64::new(n, d)
    }

    #[test]
    fn bid_kernel_cases() {
        let p = params(10, 2);
        assert_eq!(bid_prob(1, 1, &p).unwrap(), 1.0);
        for b in 3..=5 {
            assert_eq!(bid_prob(5, b, &p).unwrap(), 1.0 / 3.0);
        }
        assert_eq!(bid_prob(5, 7, &p).unwrap(), 0.0);
        assert_eq!(bid_prob(5, 2, &p).unwrap(), 0.0);
        assert_eq!(bid_prob(2, 1, &p).unwrap(), 0.5);
        assert!(bid_prob(0, 1, &p).is_err());
        assert!(bid_prob(5, 11, &p).is_err());
    }

    #[test]
    fn ask_kernel_cases() {
        let p = params(10, 2);
        assert_eq!(ask_prob(10, 10, &p).unwrap(), 1.0);
        for a in 5..=7 {
            assert_eq!(ask_prob(5, a, &p).unwrap(), 1.0 / 3.0);
        }
        assert_eq!(ask_prob(10, 9, &p).unwrap(), 0.0);
        assert_eq!(ask_prob(9, 10, &p).unwrap(), 0.5);
    }

    #[test]
    fn rejects_cutoff_at_grid_size() {
        assert!(transition_matrix(&params(5, 5)).is_err());
        assert!(transition_matrix(&params(5, 4)).is_ok());
    }

    #[test]
    fn unit_cutoff_interior_rows() {
        let m = transition_matrix_exact(&params(9, 1)).unwrap();
        for p in 2..=8 {
            assert_eq!(m.get(p, p), r(1, 2));
            assert_eq!(m.get(p, p - 1), r(1, 4));
            assert_eq!(m.get(p, p + 1), r(1, 4));
        }
    }

    #[test]
    fn block_scalars_for_cutoff_two() {
        let bp = BlockParams::<Rational64>::new(2);
        assert_eq!(bp.a, r(1, 6));
        assert_eq!(bp.d_i(1), r(2, 3));
        assert_eq!(bp.d_i(2), r(5, 12));
        assert_eq!(bp.b_i(2), r(1, 4));
        assert!(bp.row_sums().iter().all(|&s| s == r(1, 1)));
    }

    #[test]
    fn block_layout_needs_room() {
        assert_eq!(
            block_matrix(&params(5, 3)).unwrap_err(),
            Error::BlockLayout {
                n_prices: 5,
                cutoff: 3
            }
        );
    }

    #[test]
    fn unit_cutoff_is_uniform() {
        let pi = invariant_distribution(&transition_matrix(&params(50, 1)).unwrap()).unwrap();
        for &x in pi.probs() {
            assert!((x - 0.02).abs() < 1e-15);
        }
    }

    #[test]
    fn three_state_absorption() {
        let m = transition_matrix(&params(3, 1)).unwrap();
        assert!((mean_fpt_discrete(&m, 2).unwrap() - 2.0).abs() < 1e-14);
        assert!(mean_fpt_discrete(&m, 1).is_err());
        assert!(mean_fpt_discrete(&m, 3).is_err());
    }

    #[test]
    fn power_iteration_agrees_with_direct_solve() {
        let m = transition_matrix(&params(20, 3)).unwrap();
        let direct = invariant_distribution(&m).unwrap();
        let power = power_iteration(&m, 1e-14, 1_000_000).unwrap();
        assert!(direct.total_variation(&power) < 1e-10);
    }

    #[test]
    fn power_iteration_reports_non_convergence() {
        let m = transition_matrix(&params(40, 1)).unwrap();
        // the uniform start is already stationary here, so use a tight cap on a non-uniform chain
        let m2 = transition_matrix(&params(40, 3)).unwrap();
        assert!(power_iteration(&m, 1e-12, 5).is_ok());
        assert!(matches!(
            power_iteration(&m2, 1e-15, 3),
            Err(Error::NotConverged { iterations: 3, .. })
        ));
    }

    #[test]
    fn distribution_validation() {
        assert!(PriceDistribution::new(vec![]).is_err());
        assert!(PriceDistribution::new(vec![0.5, 0.6]).is_err());
        assert!(PriceDistribution::new(vec![-0.1, 1.1]).is_err());
        assert!(PriceDistribution::from_counts(&[0, 0]).is_err());
        let d = PriceDistribution::from_counts(&[1, 3]).unwrap();
        assert_eq!(d.probs(), &[0.25, 0.75]);
        let u = PriceDistribution::uniform(2);
        assert!((d.total_variation(&u) - 0.25).abs() < 1e-15);
    }

    #[test]
    fn sampler_respects_support() {
        let m = transition_matrix(&params(10, 2)).unwrap();
        let s = ChainSampler::new(&m);
        let mut rng = crate::rng::RngSpec::new(1, 0).rng();
        for _ in 0..10_000 {
            let q = s.step(1, &mut rng);
            assert!((1..=3).contains(&q));
            let q = s.step(10, &mut rng);
            assert!((8..=10).contains(&q));
        }
    }
}
