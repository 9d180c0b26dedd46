//! Event-driven Monte Carlo engine for the auction.
//!
//! The four order streams are Poisson with rates `lambda` (limit bids, limit
//! asks) and `mu` (market buys, market sells). They are sampled as one
//! superposed stream of rate `2 lambda + 2 mu` with a categorical kind.
//!
//! [`Auction::step`] applies every arrival. [`Auction::step_effective`] jumps
//! straight to the next arrival that changes the state: the waiting time is
//! exponential with the rate of the effective kinds only, and the number of
//! skipped no-op arrivals in that window is Poisson. The joint law of the
//! state path, the clock and the arrival count is the same as with
//! [`Auction::step`]; only the draws differ.

use rand::Rng;
use rand_distr::{Distribution, Exp, Poisson};
use rayon::prelude::*;

use crate::chain::PriceDistribution;
use crate::error::{invalid, Result};
use crate::model::{
    apply_event, is_effective, AuctionState, Event, EventKind, ModelParams, Price, Trade,
};
use crate::rng::{RngSpec, StreamPurpose};

/// Default arrival cap for a single first-passage run.
pub const DEFAULT_EVENT_CAP: u64 = 1_000_000_000;

/// Samples the next arrival of the superposed order stream after `now`.
pub fn next_event<R: Rng + ?Sized>(params: &ModelParams, now: f64, rng: &mut R) -> Event {
    let total = params.total_rate();
    let dt = Exp::new(total).expect("positive rate").sample(rng);
    let u = rng.random::<f64>() * total;
    let kind = if u < params.lambda {
        EventKind::LimitBid
    } else if u < 2.0 * params.lambda {
        EventKind::LimitAsk
    } else if u < 2.0 * params.lambda + params.mu {
        EventKind::MarketBuy
    } else {
        EventKind::MarketSell
    };
    Event {
        kind,
        time: now + dt,
    }
}

fn kind_rate(params: &ModelParams, kind: EventKind) -> f64 {
    if kind.is_limit() {
        params.lambda
    } else {
        params.mu
    }
}

/// A running auction: parameters, state and the number of arrivals so far.
#[derive(Debug, Clone)]
pub struct Auction {
    params: ModelParams,
    state: AuctionState,
    events_seen: u64,
}

impl Auction {
    pub fn new(params: ModelParams, opening: Price) -> Self {
        Self {
            state: AuctionState::opening(&params, opening),
            params,
            events_seen: 0,
        }
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn state(&self) -> &AuctionState {
        &self.state
    }

    pub fn into_state(self) -> AuctionState {
        self.state
    }

    /// Order arrivals processed so far, including no-ops.
    pub fn events_seen(&self) -> u64 {
        self.events_seen
    }

    /// Applies exactly one arrival.
    pub fn step<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Option<Trade> {
        let event = next_event(&self.params, self.state.clock, rng);
        self.events_seen += 1;
        apply_event(&mut self.state, &self.params, &event, rng)
    }

    /// Advances to the next arrival that changes the state and applies it.
    pub fn step_effective<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Option<Trade> {
        let mut rates = [0.0; 4];
        let mut effective = 0.0;
        for (slot, kind) in rates.iter_mut().zip(EventKind::ALL) {
            if is_effective(&self.state, &self.params, kind) {
                *slot = kind_rate(&self.params, kind);
                effective += *slot;
            }
        }
        // Both limit intervals can't be empty together, so effective >= lambda.
        let dt = Exp::new(effective).expect("positive rate").sample(rng);
        let idle = self.params.total_rate() - effective;
        let skipped = if idle > 0.0 {
            Poisson::new(idle * dt).map_or(0.0, |p| p.sample(rng)) as u64
        } else {
            0
        };
        let mut u = rng.random::<f64>() * effective;
        let mut kind = EventKind::MarketSell;
        for (&rate, k) in rates.iter().zip(EventKind::ALL) {
            if rate > 0.0 {
                kind = k;
                if u < rate {
                    break;
                }
                u -= rate;
            }
        }
        self.events_seen += skipped + 1;
        let event = Event {
            kind,
            time: self.state.clock + dt,
        };
        apply_event(&mut self.state, &self.params, &event, rng)
    }
}

/// Trades of one run: the realization of the transaction counting process.
#[derive(Debug, Clone)]
pub struct PricePath {
    pub trades: Vec<Trade>,
    pub events_seen: u64,
    pub final_state: AuctionState,
}

/// Runs `max_events` arrivals from an empty book opened at `opening`.
pub fn run_path<R: Rng + ?Sized>(
    params: &ModelParams,
    opening: Price,
    max_events: u64,
    rng: &mut R,
) -> PricePath {
    let mut auction = Auction::new(*params, opening);
    let mut trades = Vec::new();
    for _ in 0..max_events {
        if let Some(t) = auction.step(rng) {
            trades.push(t);
        }
    }
    PricePath {
        trades,
        events_seen: auction.events_seen,
        final_state: auction.state,
    }
}

/// Trade counts per price (index `p - 1`) over `events` state-changing
/// arrivals, ignoring trades among the first `burn_in` of them.
pub fn trade_price_counts<R: Rng + ?Sized>(
    params: &ModelParams,
    opening: Price,
    events: u64,
    burn_in: u64,
    rng: &mut R,
) -> Result<Vec<u64>> {
    if burn_in >= events {
        return Err(invalid(
            "burn_in",
            format!("must be below events ({burn_in} >= {events})"),
        ));
    }
    let mut auction = Auction::new(*params, opening);
    let mut counts = vec![0u64; params.n_prices as usize];
    for i in 0..events {
        if let Some(t) = auction.step_effective(rng) {
            if i >= burn_in {
                counts[t.price.get() as usize - 1] += 1;
            }
        }
    }
    Ok(counts)
}

/// Empirical trade-price distribution after burn-in.
///
/// `events` and `burn_in` count state-changing arrivals (placed limit orders
/// and executed market orders). At small `rho` almost every raw arrival is a
/// market order hitting an empty book, so counting raw arrivals would leave
/// only a handful of trades.
pub fn equilibrium_histogram<R: Rng + ?Sized>(
    params: &ModelParams,
    opening: Price,
    events: u64,
    burn_in: u64,
    rng: &mut R,
) -> Result<PriceDistribution> {
    let counts = trade_price_counts(params, opening, events, burn_in, rng)?;
    PriceDistribution::from_counts(&counts)
}

/// One first-passage run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FptSample {
    /// Time of the first trade at 1 or N, or the clock when the cap was hit.
    pub hit_time: f64,
    /// Order arrivals up to and including the hitting trade.
    pub events: u64,
    /// `None` when the run was censored by the arrival cap.
    pub hit_price: Option<Price>,
}

impl FptSample {
    pub fn is_censored(&self) -> bool {
        self.hit_price.is_none()
    }
}

/// First passage at 1 or N from the median price with an empty book.
pub fn first_passage_sample<R: Rng + ?Sized>(
    params: &ModelParams,
    rng: &mut R,
) -> Result<FptSample> {
    first_passage_sample_capped(params, DEFAULT_EVENT_CAP, rng)
}

pub fn first_passage_sample_capped<R: Rng + ?Sized>(
    params: &ModelParams,
    event_cap: u64,
    rng: &mut R,
) -> Result<FptSample> {
    if params.n_prices < 3 {
        return Err(invalid("N", "first passage needs N >= 3"));
    }
    let top = params.n_prices;
    let mut auction = Auction::new(*params, params.median_price());
    while auction.events_seen < event_cap {
        if let Some(t) = auction.step_effective(rng) {
            let p = t.price.get();
            if p == 1 || p == top {
                return Ok(FptSample {
                    hit_time: t.time,
                    events: auction.events_seen,
                    hit_price: Some(t.price),
                });
            }
        }
    }
    Ok(FptSample {
        hit_time: auction.state.clock,
        events: auction.events_seen,
        hit_price: None,
    })
}

/// `replicates` independent first-passage runs; replicate `i` uses
/// auction stream `i` of `master_seed`. Runs in parallel, returned in order.
pub fn first_passage_batch(
    params: &ModelParams,
    replicates: usize,
    master_seed: u64,
    event_cap: u64,
) -> Result<Vec<FptSample>> {
    if params.n_prices < 3 {
        return Err(invalid("N", "first passage needs N >= 3"));
    }
    (0..replicates as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = RngSpec::for_purpose(master_seed, StreamPurpose::Auction, i).rng();
            first_passage_sample_capped(params, event_cap, &mut rng)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngSpec;

    #[test]
    fn zero_events_is_identity() {
        let p = ModelParams::new(10, 2, 1.0, 1.0).unwrap();
        let path = run_path(
            &p,
            Price::new(5, 10).unwrap(),
            0,
            &mut RngSpec::new(1, 0).rng(),
        );
        assert!(path.trades.is_empty());
        assert_eq!(path.events_seen, 0);
        assert_eq!(path.final_state.clock, 0.0);
        assert_eq!(path.final_state.last_trade_price.get(), 5);
    }

    #[test]
    fn equal_rates_give_uniform_kinds() {
        let p = ModelParams::new(10, 2, 2.0, 2.0).unwrap();
        let mut rng = RngSpec::new(2, 0).rng();
        let mut counts = [0u32; 4];
        let draws = 200_000;
        for _ in 0..draws {
            let e = next_event(&p, 0.0, &mut rng);
            counts[EventKind::ALL.iter().position(|&k| k == e.kind).unwrap()] += 1;
        }
        // binomial sd at p = 1/4 is about 194
        for c in counts {
            assert!((f64::from(c) - 50_000.0).abs() < 1000.0, "{counts:?}");
        }
    }

    #[test]
    fn histogram_rejects_bad_burn_in() {
        let p = ModelParams::new(10, 2, 0.1, 1.0).unwrap();
        let r = equilibrium_histogram(&p, p.median_price(), 10, 10, &mut RngSpec::new(3, 0).rng());
        assert!(r.is_err());
    }

    #[test]
    fn histogram_is_normalized() {
        let p = ModelParams::new(10, 2, 0.1, 1.0).unwrap();
        let h = equilibrium_histogram(
            &p,
            p.median_price(),
            20_000,
            2_000,
            &mut RngSpec::new(3, 0).rng(),
        )
        .unwrap();
        assert!((h.probs().iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn smallest_grid_first_passage_hits_a_boundary() {
        let p = ModelParams::with_rho(3, 1, 0.1, 1.0).unwrap();
        let mut rng = RngSpec::new(4, 0).rng();
        for _ in 0..200 {
            let s = first_passage_sample(&p, &mut rng).unwrap();
            let hit = s.hit_price.unwrap().get();
            assert!(hit == 1 || hit == 3);
            assert!(s.hit_time > 0.0);
            assert!(s.events >= 2);
        }
    }

    #[test]
    fn first_passage_needs_three_prices() {
        let p = ModelParams::with_rho(2, 1, 0.1, 1.0).unwrap();
        assert!(first_passage_sample(&p, &mut RngSpec::new(4, 0).rng()).is_err());
    }

    #[test]
    fn capped_run_is_flagged() {
        let p = ModelParams::with_rho(101, 1, 0.01, 1.0).unwrap();
        let s = first_passage_sample_capped(&p, 10, &mut RngSpec::new(5, 0).rng()).unwrap();
        assert!(s.is_censored());
        assert!(s.events >= 10);
    }

    #[test]
    fn batch_is_reproducible() {
        let p = ModelParams::with_rho(11, 1, 0.1, 1.0).unwrap();
        let a = first_passage_batch(&p, 64, 9, DEFAULT_EVENT_CAP).unwrap();
        let b = first_passage_batch(&p, 64, 9, DEFAULT_EVENT_CAP).unwrap();
        assert_eq!(a, b);
    }
}
