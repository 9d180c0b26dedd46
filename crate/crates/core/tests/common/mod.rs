#![allow(dead_code)]

use std::time::Duration;

/// First-hit distribution of a simple symmetric ±1 walk on `1..=n_prices`
/// started at the midpoint, by enumerating every one of the `2^max_h` step
/// sequences. Entry `h - 1` is `P(H = h)` for `h <= max_h`.
pub fn enumerate_first_hits(n_prices: u32, max_h: u32) -> Vec<f64> {
    assert!(max_h <= 24);
    let start = i64::from(n_prices.div_ceil(2));
    let top = i64::from(n_prices);
    let mut hits = vec![0u64; max_h as usize];
    for path in 0u64..(1 << max_h) {
        let mut p = start;
        for step in 0..max_h {
            p += if path >> step & 1 == 1 { 1 } else { -1 };
            if p == 1 || p == top {
                hits[step as usize] += 1;
                break;
            }
        }
    }
    let total = (1u64 << max_h) as f64;
    hits.iter().map(|&c| c as f64 / total).collect()
}

pub const TABLE_RHOS: [f64; 5] = [0.01, 0.02, 0.05, 0.10, 0.50];

/// One `(N, n)` row of the reference first-passage table.
pub struct TableRow {
    pub n_prices: u32,
    pub cutoff: u32,
    /// Low-traffic mean `x / (2 rho)`; exactly proportional to `1 / rho`.
    pub analytic: [f64; 5],
    /// Monte Carlo means of the full auction.
    pub monte_carlo: [f64; 5],
}

// The reference headers label these two columns the other way round; the
// values are assigned here by what they are.
pub const TABLE1: [TableRow; 7] = [
    TableRow {
        n_prices: 10,
        cutoff: 5,
        analytic: [273.17, 136.58, 54.63, 27.32, 5.46],
        monte_carlo: [275.67, 137.76, 56.44, 29.47, 8.72],
    },
    TableRow {
        n_prices: 40,
        cutoff: 5,
        analytic: [2787.28, 1393.64, 557.46, 278.73, 55.75],
        monte_carlo: [2821.84, 1433.86, 598.03, 319.18, 124.99],
    },
    TableRow {
        n_prices: 40,
        cutoff: 10,
        analytic: [1176.20, 588.10, 235.24, 117.62, 23.52],
        monte_carlo: [1197.19, 604.54, 248.15, 132.71, 45.54],
    },
    TableRow {
        n_prices: 80,
        cutoff: 5,
        analytic: [9939.48, 4969.74, 1987.90, 993.95, 198.79],
        monte_carlo: [9888.86, 5181.18, 2164.12, 1159.32, 495.32],
    },
    TableRow {
        n_prices: 80,
        cutoff: 20,
        analytic: [1598.81, 799.41, 319.76, 159.88, 31.98],
        monte_carlo: [1617.58, 824.12, 342.19, 182.86, 62.29],
    },
    TableRow {
        n_prices: 100,
        cutoff: 5,
        analytic: [15151.93, 7575.97, 3030.39, 1515.19, 303.04],
        monte_carlo: [15183.58, 7807.49, 3267.66, 1780.02, 769.96],
    },
    TableRow {
        n_prices: 100,
        cutoff: 25,
        analytic: [1763.36, 881.68, 352.67, 176.34, 35.27],
        monte_carlo: [1768.67, 903.18, 369.58, 198.62, 70.41],
    },
];

pub fn table_cell(n_prices: u32, cutoff: u32, rho: f64) -> (f64, f64) {
    let row = TABLE1
        .iter()
        .find(|r| r.n_prices == n_prices && r.cutoff == cutoff)
        .expect("row in table");
    let k = TABLE_RHOS
        .iter()
        .position(|&r| r == rho)
        .expect("rho in table");
    (row.analytic[k], row.monte_carlo[k])
}

/// Prints one pass/fail line and returns `ok`.
pub fn report(id: &str, ok: bool, elapsed: Duration, detail: &str) -> bool {
    let tag = if ok { "PASS" } else { "FAIL" };
    println!("[{tag}] criterion {id} ({:.2?}): {detail}", elapsed);
    ok
}
