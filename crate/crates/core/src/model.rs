//! Order book, auction state and the deterministic transition rules.
//!
//! Prices live on the integer grid `1..=N`. Every order carries one share.
//! Limit bids are placed uniformly in `[p_a - n, p_a - 1]` below the best
//! ask, limit asks uniformly in `[p_b + 1, p_b + n]` above the best bid, and
//! both intervals are clipped to the grid. When the reference quote is
//! missing, the interval is anchored at the last trade price `p`:
//! `[p - n, p]` for bids and `[p, p + n]` for asks.
//!
//! Two cases are not pinned down by the model itself and are resolved here:
//!
//! * a market order whose target side is empty is discarded;
//! * a limit order whose reference quote is missing uses the interval
//!   anchored at the last trade price, whether or not its own side holds
//!   resting orders.

use std::collections::VecDeque;
use std::fmt;

use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Static parameters of a symmetric auction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    /// Grid size `N`; prices are `1..=N`.
    pub n_prices: u32,
    /// Cut-off `n` for the width of limit-order placement intervals.
    pub cutoff: u32,
    /// Limit-order arrival rate per side.
    pub lambda: f64,
    /// Market-order arrival rate per side.
    pub mu: f64,
    rho: f64,
}

impl ModelParams {
    pub fn new(n_prices: u32, cutoff: u32, lambda: f64, mu: f64) -> Result<Self> {
        if n_prices < 2 {
            return Err(invalid(
                "N",
                format!("grid needs at least 2 prices, got {n_prices}"),
            ));
        }
        if cutoff < 1 {
            return Err(invalid("n", "cut-off must be at least 1"));
        }
        if !(lambda.is_finite() && lambda > 0.0) {
            return Err(invalid(
                "lambda",
                format!("must be finite and positive, got {lambda}"),
            ));
        }
        if !(mu.is_finite() && mu > 0.0) {
            return Err(invalid(
                "mu",
                format!("must be finite and positive, got {mu}"),
            ));
        }
        Ok(Self {
            n_prices,
            cutoff,
            lambda,
            mu,
            rho: lambda / mu,
        })
    }

    /// Parameterize by traffic intensity: `lambda = rho * mu`.
    pub fn with_rho(n_prices: u32, cutoff: u32, rho: f64, mu: f64) -> Result<Self> {
        if !(rho.is_finite() && rho > 0.0) {
            return Err(invalid(
                "rho",
                format!("must be finite and positive, got {rho}"),
            ));
        }
        Self::new(n_prices, cutoff, rho * mu, mu)
    }

    /// Traffic intensity `lambda / mu`.
    pub fn rho(&self) -> f64 {
        self.rho
    }

    /// Total rate of the four superposed order streams.
    pub fn total_rate(&self) -> f64 {
        2.0 * self.lambda + 2.0 * self.mu
    }

    /// The median price `floor((N + 1) / 2)`, also the default opening price.
    pub fn median_price(&self) -> Price {
        Price(self.n_prices.div_ceil(2))
    }

    pub fn price(&self, value: u32) -> Result<Price> {
        Price::new(value, self.n_prices)
    }

    /// Maps a price to its reflection `N + 1 - p`.
    pub fn mirror(&self, p: Price) -> Price {
        Price(self.n_prices + 1 - p.0)
    }
}

/// A tick on the price grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Price(u32);

impl Price {
    pub fn new(value: u32, n_prices: u32) -> Result<Self> {
        if value == 0 || value > n_prices {
            return Err(Error::PriceOutOfRange {
                price: value,
                n_prices,
            });
        }
        Ok(Self(value))
    }

    pub fn get(self) -> u32 {
        self.0
    }
}

impl fmt::Display for Price {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Side {
    Bid,
    Ask,
}

impl Side {
    pub fn opposite(self) -> Self {
        match self {
            Side::Bid => Side::Ask,
            Side::Ask => Side::Bid,
        }
    }
}

/// Closed integer interval `[lo, hi]` of candidate prices; empty when `lo > hi`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PriceInterval {
    lo: u32,
    hi: u32,
}

impl PriceInterval {
    pub const EMPTY: Self = Self { lo: 1, hi: 0 };

    /// Intersects `[lo, hi]` with the grid `1..=n_prices`.
    pub fn clipped(lo: i64, hi: i64, n_prices: u32) -> Self {
        let lo = lo.max(1);
        let hi = hi.min(i64::from(n_prices));
        if lo > hi {
            Self::EMPTY
        } else {
            Self {
                lo: lo as u32,
                hi: hi as u32,
            }
        }
    }

    pub fn is_empty(&self) -> bool {
        self.lo > self.hi
    }

    pub fn len(&self) -> u32 {
        if self.is_empty() {
            0
        } else {
            self.hi - self.lo + 1
        }
    }

    /// `(lo, hi)` bounds, or `None` when empty.
    pub fn bounds(&self) -> Option<(u32, u32)> {
        (!self.is_empty()).then_some((self.lo, self.hi))
    }
}

pub type OrderId = u64;

/// Resting limit orders of one side, queued FIFO per price level.
#[derive(Debug, Clone)]
struct BookSide {
    side: Side,
    levels: Vec<VecDeque<OrderId>>,
    best: Option<u32>,
    len: usize,
}

impl BookSide {
    fn new(side: Side, n_prices: u32) -> Self {
        Self {
            side,
            levels: vec![VecDeque::new(); n_prices as usize + 1],
            best: None,
            len: 0,
        }
    }

    fn is_better(&self, candidate: u32, current: u32) -> bool {
        match self.side {
            Side::Bid => candidate > current,
            Side::Ask => candidate < current,
        }
    }

    fn insert(&mut self, price: u32, id: OrderId) {
        self.levels[price as usize].push_back(id);
        self.len += 1;
        match self.best {
            Some(best) if !self.is_better(price, best) => {}
            _ => self.best = Some(price),
        }
    }

    fn pop_best(&mut self) -> Option<(u32, OrderId)> {
        let best = self.best?;
        let id = self.levels[best as usize]
            .pop_front()
            .expect("cached best level is non-empty");
        self.len -= 1;
        if self.levels[best as usize].is_empty() {
            self.best = if self.len == 0 {
                None
            } else {
                match self.side {
                    Side::Bid => (1..best)
                        .rev()
                        .find(|&p| !self.levels[p as usize].is_empty()),
                    Side::Ask => (best + 1..self.levels.len() as u32)
                        .find(|&p| !self.levels[p as usize].is_empty()),
                }
            };
        }
        Some((best, id))
    }

    fn prices(&self) -> impl Iterator<Item = (u32, usize)> + '_ {
        self.levels
            .iter()
            .enumerate()
            .filter(|(_, q)| !q.is_empty())
            .map(|(p, q)| (p as u32, q.len()))
    }
}

/// Unit-quantity limit order book on the grid `1..=N`.
#[derive(Debug, Clone)]
pub struct OrderBook {
    bids: BookSide,
    asks: BookSide,
}

impl OrderBook {
    pub fn new(n_prices: u32) -> Self {
        Self {
            bids: BookSide::new(Side::Bid, n_prices),
            asks: BookSide::new(Side::Ask, n_prices),
        }
    }

    pub fn best_bid(&self) -> Option<Price> {
        self.bids.best.map(Price)
    }

    pub fn best_ask(&self) -> Option<Price> {
        self.asks.best.map(Price)
    }

    pub fn best(&self, side: Side) -> Option<Price> {
        match side {
            Side::Bid => self.best_bid(),
            Side::Ask => self.best_ask(),
        }
    }

    pub fn depth(&self, side: Side) -> usize {
        self.side(side).len
    }

    pub fn is_empty(&self) -> bool {
        self.bids.len == 0 && self.asks.len == 0
    }

    /// Occupied price levels of one side with their queue lengths, ascending by price.
    pub fn levels(&self, side: Side) -> Vec<(Price, usize)> {
        self.side(side)
            .prices()
            .map(|(p, k)| (Price(p), k))
            .collect()
    }

    fn side(&self, side: Side) -> &BookSide {
        match side {
            Side::Bid => &self.bids,
            Side::Ask => &self.asks,
        }
    }

    fn side_mut(&mut self, side: Side) -> &mut BookSide {
        match side {
            Side::Bid => &mut self.bids,
            Side::Ask => &mut self.asks,
        }
    }
}

/// Book, last trade price and clock.
#[derive(Debug, Clone)]
pub struct AuctionState {
    pub book: OrderBook,
    pub last_trade_price: Price,
    pub clock: f64,
    next_order_id: OrderId,
}

impl AuctionState {
    /// Empty book opened at `opening`, clock at zero.
    pub fn opening(params: &ModelParams, opening: Price) -> Self {
        debug_assert!(opening.0 >= 1 && opening.0 <= params.n_prices);
        Self {
            book: OrderBook::new(params.n_prices),
            last_trade_price: opening,
            clock: 0.0,
            next_order_id: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EventKind {
    LimitBid,
    LimitAsk,
    /// Buys one share from the best ask.
    MarketBuy,
    /// Sells one share to the best bid.
    MarketSell,
}

impl EventKind {
    pub const ALL: [EventKind; 4] = [
        EventKind::LimitBid,
        EventKind::LimitAsk,
        EventKind::MarketBuy,
        EventKind::MarketSell,
    ];

    /// The same order seen on the reflected grid.
    pub fn mirror(self) -> Self {
        match self {
            EventKind::LimitBid => EventKind::LimitAsk,
            EventKind::LimitAsk => EventKind::LimitBid,
            EventKind::MarketBuy => EventKind::MarketSell,
            EventKind::MarketSell => EventKind::MarketBuy,
        }
    }

    pub fn is_limit(self) -> bool {
        matches!(self, EventKind::LimitBid | EventKind::LimitAsk)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Event {
    pub kind: EventKind,
    pub time: f64,
}

/// An executed market order.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Trade {
    pub price: Price,
    pub time: f64,
    /// The resting limit order that was filled.
    pub maker: OrderId,
}

/// Source of uniform offsets used to place limit orders.
pub trait TickDraw {
    /// Uniform integer in `0..len`; `len >= 1`.
    fn offset(&mut self, len: u32) -> u32;
}

impl<R: RngCore + ?Sized> TickDraw for R {
    fn offset(&mut self, len: u32) -> u32 {
        self.random_range(0..len)
    }
}

/// Reverses every draw, so that placements follow the reflected grid.
#[derive(Debug)]
pub struct Mirrored<D>(pub D);

impl<D: TickDraw> TickDraw for Mirrored<D> {
    fn offset(&mut self, len: u32) -> u32 {
        len - 1 - self.0.offset(len)
    }
}

/// Interval from which an incoming limit bid is drawn.
pub fn bid_interval(state: &AuctionState, params: &ModelParams) -> PriceInterval {
    let n = i64::from(params.cutoff);
    match state.book.best_ask() {
        Some(pa) => {
            let pa = i64::from(pa.0);
            PriceInterval::clipped(pa - n, pa - 1, params.n_prices)
        }
        None => {
            let p = i64::from(state.last_trade_price.0);
            PriceInterval::clipped(p - n, p, params.n_prices)
        }
    }
}

/// Interval from which an incoming limit ask is drawn.
pub fn ask_interval(state: &AuctionState, params: &ModelParams) -> PriceInterval {
    let n = i64::from(params.cutoff);
    match state.book.best_bid() {
        Some(pb) => {
            let pb = i64::from(pb.0);
            PriceInterval::clipped(pb + 1, pb + n, params.n_prices)
        }
        None => {
            let p = i64::from(state.last_trade_price.0);
            PriceInterval::clipped(p, p + n, params.n_prices)
        }
    }
}

/// Whether `kind` would change `state`. Limit orders with an empty interval and
/// market orders against an empty side are no-ops.
pub fn is_effective(state: &AuctionState, params: &ModelParams, kind: EventKind) -> bool {
    match kind {
        EventKind::LimitBid => !bid_interval(state, params).is_empty(),
        EventKind::LimitAsk => !ask_interval(state, params).is_empty(),
        EventKind::MarketBuy => state.book.best_ask().is_some(),
        EventKind::MarketSell => state.book.best_bid().is_some(),
    }
}

/// Applies one order arrival. Returns the trade if a market order executed.
pub fn apply_event<D: TickDraw + ?Sized>(
    state: &mut AuctionState,
    params: &ModelParams,
    event: &Event,
    draw: &mut D,
) -> Option<Trade> {
    debug_assert!(
        event.time >= state.clock,
        "events must arrive in time order"
    );
    state.clock = event.time;
    match event.kind {
        EventKind::LimitBid => {
            place_limit(state, Side::Bid, bid_interval(state, params), draw);
            None
        }
        EventKind::LimitAsk => {
            place_limit(state, Side::Ask, ask_interval(state, params), draw);
            None
        }
        EventKind::MarketBuy => execute_market(state, Side::Ask, event.time),
        EventKind::MarketSell => execute_market(state, Side::Bid, event.time),
    }
}

fn place_limit<D: TickDraw + ?Sized>(
    state: &mut AuctionState,
    side: Side,
    interval: PriceInterval,
    draw: &mut D,
) {
    let Some((lo, _)) = interval.bounds() else {
        return;
    };
    let price = lo + draw.offset(interval.len());
    let id = state.next_order_id;
    state.next_order_id += 1;
    state.book.side_mut(side).insert(price, id);
}

fn execute_market(state: &mut AuctionState, target: Side, time: f64) -> Option<Trade> {
    let (price, maker) = state.book.side_mut(target).pop_best()?;
    state.last_trade_price = Price(price);
    Some(Trade {
        price: Price(price),
        time,
        maker,
    })
}
