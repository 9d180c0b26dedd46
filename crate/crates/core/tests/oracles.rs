//! Closed-form and exact results checked against independent oracles.

mod common;

use cda_core::chain::{
    block_matrix, block_matrix_exact, invariant_distribution, mean_absorption_steps,
    mean_fpt_continuous, mean_fpt_discrete, transition_matrix, transition_matrix_exact,
    ChainSampler,
};
use cda_core::fpt::{discrete_fpt_mean, discrete_fpt_pmf, DiscreteFptDist, MixtureApprox};
use cda_core::{ModelParams, RngSpec};
use num_rational::Rational64;

use common::{enumerate_first_hits, table_cell};

fn params(n_prices: u32, cutoff: u32) -> ModelParams {
    ModelParams::with_rho(n_prices, cutoff, 0.01, 1.0).unwrap()
}

fn frac(s: &str) -> Rational64 {
    let (n, d) = s.split_once('/').unwrap_or((s, "1"));
    Rational64::new(n.parse().unwrap(), d.parse().unwrap())
}

#[test]
fn ten_price_matrix_matches_reference_fixture() {
    let fixture = [
        "4/6 1/6 1/6 0 0 0 0 0 0 0",
        "1/4 5/12 1/6 1/6 0 0 0 0 0 0",
        "1/6 1/6 1/3 1/6 1/6 0 0 0 0 0",
        "0 1/6 1/6 1/3 1/6 1/6 0 0 0 0",
        "0 0 1/6 1/6 1/3 1/6 1/6 0 0 0",
        "0 0 0 1/6 1/6 1/3 1/6 1/6 0 0",
        "0 0 0 0 1/6 1/6 1/3 1/6 1/6 0",
        "0 0 0 0 0 1/6 1/6 1/3 1/6 1/6",
        "0 0 0 0 0 0 1/6 1/6 5/12 1/4",
        "0 0 0 0 0 0 0 1/6 1/6 4/6",
    ];
    let exact = transition_matrix_exact(&params(10, 2)).unwrap();
    let block = block_matrix_exact(&params(10, 2)).unwrap();
    for (i, line) in fixture.iter().enumerate() {
        let expected: Vec<Rational64> = line.split_whitespace().map(frac).collect();
        assert_eq!(
            exact.row(i as u32 + 1),
            expected.as_slice(),
            "row {}",
            i + 1
        );
        assert_eq!(
            block.row(i as u32 + 1),
            expected.as_slice(),
            "block row {}",
            i + 1
        );
    }
}

#[test]
fn ten_price_invariant_distribution() {
    let reference = [
        0.1171, 0.0895, 0.1, 0.0961, 0.0974, 0.0974, 0.0961, 0.1, 0.0895, 0.1171,
    ];
    let m = transition_matrix(&params(10, 2)).unwrap();
    let pi = invariant_distribution(&m).unwrap();
    for (p, (&got, &want)) in pi.probs().iter().zip(&reference).enumerate() {
        assert!(
            (got - want).abs() < 1e-3,
            "price {}: {got} vs {want}",
            p + 1
        );
    }
    assert!(pi.stationarity_residual(&m) <= 1e-12);
}

#[test]
fn unit_cutoff_invariant_is_uniform() {
    for n_prices in [5, 50, 101] {
        let pi = invariant_distribution(&transition_matrix(&params(n_prices, 1)).unwrap()).unwrap();
        let u = 1.0 / f64::from(n_prices);
        for &x in pi.probs() {
            assert!((x - u).abs() <= 1e-12, "N={n_prices}: {x}");
        }
    }
}

#[test]
fn block_and_kernel_constructions_agree() {
    for n_prices in [10, 17, 30] {
        for cutoff in 1..=n_prices / 2 {
            let p = params(n_prices, cutoff);
            assert_eq!(
                block_matrix_exact(&p).unwrap(),
                transition_matrix_exact(&p).unwrap(),
                "N={n_prices} n={cutoff}"
            );
            let (a, b) = (block_matrix(&p).unwrap(), transition_matrix(&p).unwrap());
            let worst = a
                .entries()
                .iter()
                .zip(b.entries())
                .map(|(x, y)| (x - y).abs())
                .fold(0.0, f64::max);
            assert!(worst <= 1e-15);
        }
    }
}

#[test]
fn exact_and_float_matrices_agree() {
    let p = params(23, 4);
    let exact = transition_matrix_exact(&p).unwrap().to_f64();
    let float = transition_matrix(&p).unwrap();
    for (x, y) in exact.entries().iter().zip(float.entries()) {
        assert!((x - y).abs() <= 1e-16);
    }
}

#[test]
fn three_price_absorption_takes_two_steps() {
    let m = transition_matrix(&params(3, 1)).unwrap();
    assert!((mean_fpt_discrete(&m, 2).unwrap() - 2.0).abs() < 1e-13);
}

#[test]
fn unit_cutoff_absorption_is_doubled_gamblers_ruin() {
    // ±1 walk needs (s - 1)(N - s) moves; each step moves with probability 1/2
    for n_prices in [5u32, 11, 20, 41] {
        let m = transition_matrix(&params(n_prices, 1)).unwrap();
        let steps = mean_absorption_steps(&m).unwrap();
        for s in 2..n_prices {
            let want = 2.0 * f64::from((s - 1) * (n_prices - s));
            assert!(
                (steps[s as usize - 2] - want).abs() < 1e-9 * want,
                "N={n_prices} s={s}"
            );
        }
    }
    let m = transition_matrix(&params(11, 1)).unwrap();
    assert!((mean_fpt_discrete(&m, 6).unwrap() - 50.0).abs() < 1e-10);
}

#[test]
fn discrete_mean_from_reference_low_traffic_mean() {
    // analytic (10, 5, 0.01) entry 273.17 is x / (2 rho), printed to 2 decimals
    let (analytic, _) = table_cell(10, 5, 0.01);
    let m = transition_matrix(&params(10, 5)).unwrap();
    let x = mean_fpt_discrete(&m, 5).unwrap();
    assert!(
        (x - 2.0 * 0.01 * analytic).abs() <= 2.0 * 0.01 * 0.005,
        "{x}"
    );
}

#[test]
fn continuous_mean_scales_with_limit_rate() {
    let base = mean_fpt_continuous(&ModelParams::new(40, 10, 0.02, 1.0).unwrap()).unwrap();
    assert!((base - 588.10).abs() < 0.01);
    // same rho, rates doubled: time halves
    let fast = mean_fpt_continuous(&ModelParams::new(40, 10, 0.04, 2.0).unwrap()).unwrap();
    assert!((fast - base / 2.0).abs() < 1e-9 * base);
}

#[test]
fn discrete_mean_matches_embedded_chain_monte_carlo() {
    for (seed, (n_prices, cutoff)) in [(10, 2), (10, 5), (25, 3), (40, 10)]
        .into_iter()
        .enumerate()
    {
        let m = transition_matrix(&params(n_prices, cutoff)).unwrap();
        let start = n_prices.div_ceil(2);
        let want = mean_fpt_discrete(&m, start).unwrap();
        let sampler = ChainSampler::new(&m);
        let mut rng = RngSpec::new(100 + seed as u64, 0).rng();
        let reps = 100_000;
        let xs: Vec<f64> = (0..reps)
            .map(|_| sampler.absorption_steps(start, &mut rng) as f64)
            .collect();
        let mean = xs.iter().sum::<f64>() / reps as f64;
        let sd = (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (reps as f64 - 1.0)).sqrt();
        let se = sd / (reps as f64).sqrt();
        assert!(
            (mean - want).abs() < 3.0 * se,
            "N={n_prices} n={cutoff}: {mean} ± {se} vs {want}"
        );
    }
}

#[test]
fn invariant_distribution_matches_long_chain_run() {
    let m = transition_matrix(&params(10, 2)).unwrap();
    let pi = invariant_distribution(&m).unwrap();
    let sampler = ChainSampler::new(&m);
    let mut rng = RngSpec::new(7, 0).rng();
    let mut counts = [0u64; 10];
    let mut p = 5;
    for _ in 0..100_000_000u64 {
        p = sampler.step(p, &mut rng);
        counts[p as usize - 1] += 1;
    }
    let empirical = cda_core::PriceDistribution::from_counts(&counts).unwrap();
    assert!(empirical.total_variation(&pi) <= 0.005);
}

#[test]
fn two_barrier_pmf_matches_exhaustive_enumeration() {
    for n_prices in [3, 5, 7, 9] {
        let enumerated = enumerate_first_hits(n_prices, 20);
        for (i, &want) in enumerated.iter().enumerate() {
            let got = discrete_fpt_pmf(n_prices, i as u64 + 1).unwrap();
            assert!(
                (got - want).abs() < 1e-12,
                "N={n_prices} h={}: {got} vs {want}",
                i + 1
            );
        }
    }
}

#[test]
fn two_barrier_table_keeps_required_mass() {
    for n_prices in (3..=51).step_by(2) {
        let d = DiscreteFptDist::new(n_prices).unwrap();
        let mass: f64 = d.pmf().iter().sum();
        assert!(mass >= 1.0 - 1e-9, "N={n_prices}: {mass}");
        assert!(d.pmf().iter().all(|&p| (0.0..=1.0).contains(&p)));
    }
}

#[test]
fn mixture_mean_equals_fundamental_matrix_mean() {
    for n_prices in [11, 21, 51] {
        for rho in [0.01, 0.1, 0.5] {
            let p = ModelParams::with_rho(n_prices, 1, rho, 1.0).unwrap();
            let mixture = MixtureApprox::new(&p).unwrap().mean();
            let chain = mean_fpt_continuous(&p).unwrap();
            assert!(
                (mixture - chain).abs() <= 1e-9 * chain,
                "N={n_prices} rho={rho}"
            );
        }
    }
    let p = ModelParams::with_rho(11, 1, 0.01, 1.0).unwrap();
    assert!((MixtureApprox::new(&p).unwrap().mean() - 2500.0).abs() < 1e-8);
    assert!((discrete_fpt_mean(11).unwrap() - 25.0).abs() < 1e-12);
}
