use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("price {price} outside grid 1..={n_prices}")]
    PriceOutOfRange { price: u32, n_prices: u32 },

    #[error("block layout needs N >= 2n (N = {n_prices}, n = {cutoff})")]
    BlockLayout { n_prices: u32, cutoff: u32 },

    #[error("linear system is singular")]
    Singular,

    #[error(
        "power iteration did not converge after {iterations} iterations (residual {residual:e})"
    )]
    NotConverged { iterations: usize, residual: f64 },

    #[error("no trades recorded after burn-in")]
    NoTrades,

    #[error("empty sample")]
    EmptySample,
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
