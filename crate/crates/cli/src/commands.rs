use cda_core::chain::{
    invariant_distribution, mean_fpt_continuous, transition_matrix, transition_matrix_exact,
};
use cda_core::simulator::{first_passage_batch, trade_price_counts, FptSample};
use cda_core::stats::{freedman_diaconis_bins, histogram, Summary};
use cda_core::{
    ks_two_sample, Ecdf, MixtureApprox, ModelParams, PriceDistribution, RngSpec, StreamPurpose,
};
use serde_json::{json, Value};

use crate::config::ExperimentConfig;
use crate::error::CliError;
use crate::output::{fmt_float, fmt_opt, Outcome, SeedBlock, Table};

pub fn chain(cfg: &ExperimentConfig) -> Result<Outcome, CliError> {
    let (n_prices, cutoff) = cfg.grid();
    // the chain does not depend on the rates
    let params = ModelParams::new(n_prices, cutoff, 1.0, 1.0)?;
    let exact = cfg.exact == Some(true);
    let exact_matrix = if exact {
        Some(transition_matrix_exact(&params)?)
    } else {
        None
    };
    let matrix = match &exact_matrix {
        Some(m) => m.to_f64(),
        None => transition_matrix(&params)?,
    };
    let pi = invariant_distribution(&matrix)?;
    let residual = pi.stationarity_residual(&matrix);

    let mut header = vec!["from".to_string()];
    header.extend((1..=n_prices).map(|p| p.to_string()));
    let mut table = Table::with_header("matrix.csv", header);
    for from in 1..=n_prices {
        let mut row = vec![from.to_string()];
        match &exact_matrix {
            Some(m) => row.extend(m.row(from).iter().map(|r| r.to_string())),
            None => row.extend(matrix.row(from).iter().map(|&x| fmt_float(x))),
        }
        table.push(row);
    }
    let mut invariant = Table::new("invariant.csv", &["price", "probability"]);
    for (i, &p) in pi.probs().iter().enumerate() {
        invariant.push(vec![(i + 1).to_string(), fmt_float(p)]);
    }

    let rows: Vec<&[f64]> = (1..=n_prices).map(|p| matrix.row(p)).collect();
    let mut payload = json!({
        "matrix": rows,
        "invariant": pi.probs(),
        "stationarity_residual": residual,
    });
    if let Some(m) = &exact_matrix {
        let rows: Vec<Vec<String>> = (1..=n_prices)
            .map(|p| m.row(p).iter().map(|r| r.to_string()).collect())
            .collect();
        payload["exact_matrix"] = json!(rows);
    }
    Ok(Outcome {
        tables: vec![table, invariant],
        payload,
        seeds: Vec::new(),
        summary: json!({ "stationarity_residual": residual }),
    })
}

pub fn simulate(cfg: &ExperimentConfig) -> Result<Outcome, CliError> {
    let (n_prices, cutoff) = cfg.grid();
    let params = ModelParams::with_rho(n_prices, cutoff, cfg.rho[0], cfg.mu())?;
    let low_traffic = invariant_distribution(&transition_matrix(&params)?)?;
    let opening = params.price(cfg.opening.expect("resolved"))?;
    let (events, burn_in) = (
        cfg.events.expect("resolved"),
        cfg.burn_in.expect("resolved"),
    );
    let seed = RngSpec::for_purpose(cfg.seed(), StreamPurpose::Auction, 0);
    let counts = trade_price_counts(&params, opening, events, burn_in, &mut seed.rng())?;
    let empirical = PriceDistribution::from_counts(&counts)?;
    let tv = empirical.total_variation(&low_traffic);
    let trades: u64 = counts.iter().sum();

    let mut table = Table::new(
        "prices.csv",
        &["price", "count", "empirical", "low_traffic"],
    );
    for (i, &c) in counts.iter().enumerate() {
        table.push(vec![
            (i + 1).to_string(),
            c.to_string(),
            fmt_float(empirical.probs()[i]),
            fmt_float(low_traffic.probs()[i]),
        ]);
    }
    Ok(Outcome {
        tables: vec![table],
        payload: json!({
            "counts": counts,
            "empirical": empirical.probs(),
            "low_traffic": low_traffic.probs(),
            "trades": trades,
            "total_variation": tv,
        }),
        seeds: vec![SeedBlock {
            label: "auction".to_string(),
            master_seed: seed.master_seed,
            first_stream: seed.stream_index,
            count: 1,
        }],
        summary: json!({ "trades": trades, "total_variation": tv }),
    })
}

struct FptTables {
    samples: Table,
    mixture_samples: Table,
    histogram: Table,
    ecdf: Table,
    ks: Table,
    means: Table,
}

fn summary_or_none(xs: &[f64]) -> Option<Summary> {
    Summary::of(xs).ok()
}

pub fn fpt(cfg: &ExperimentConfig) -> Result<Outcome, CliError> {
    let (n_prices, cutoff) = cfg.grid();
    let replicates = cfg.replicates();
    let event_cap = cfg.event_cap.expect("resolved");
    let permutations = cfg.permutations.expect("resolved");
    let with_mixture = cutoff == 1 && !n_prices.is_multiple_of(2);
    let params: Vec<ModelParams> = cfg
        .rho
        .iter()
        .map(|&rho| ModelParams::with_rho(n_prices, cutoff, rho, cfg.mu()))
        .collect::<Result<_, _>>()?;

    let mut t = FptTables {
        samples: Table::new(
            "fpt_samples.csv",
            &[
                "rho",
                "replicate",
                "hit_time",
                "log_hit_time",
                "events",
                "hit_price",
                "censored",
            ],
        ),
        mixture_samples: Table::new(
            "mixture_samples.csv",
            &["rho", "sample", "time", "log_time"],
        ),
        histogram: Table::new(
            "log_histogram.csv",
            &[
                "rho",
                "bin",
                "lower",
                "upper",
                "count",
                "density",
                "normal_density",
            ],
        ),
        ecdf: Table::new("ecdf.csv", &["rho", "source", "log_time", "ecdf"]),
        ks: Table::new(
            "ks.csv",
            &[
                "rho",
                "statistic",
                "d_plus",
                "d_minus",
                "p_value",
                "p_value_plus",
                "p_value_minus",
                "permutations",
            ],
        ),
        means: Table::new(
            "means.csv",
            &[
                "rho",
                "replicates",
                "censored",
                "mean_time",
                "se_time",
                "mean_log_time",
                "se_log_time",
                "sd_log_time",
                "skewness_log_time",
                "low_traffic_mean",
                "mixture_mean",
                "mixture_mean_log_time",
                "mixture_se_log_time",
            ],
        ),
    };
    let mut payload = Vec::new();
    let mut seeds = Vec::new();
    let mut summary = Vec::new();

    for (j, p) in params.iter().enumerate() {
        let rho = p.rho();
        let r = fmt_float(rho);
        let master = cfg.seed().wrapping_add(j as u64);
        let runs = first_passage_batch(p, replicates, master, event_cap)?;
        seeds.push(block(
            format!("auction rho={r}"),
            master,
            StreamPurpose::Auction,
            replicates,
        ));
        write_samples(&mut t.samples, &r, &runs);

        let done: Vec<f64> = runs
            .iter()
            .filter(|s| !s.is_censored())
            .map(|s| s.hit_time)
            .collect();
        let censored = runs.len() - done.len();
        let logs: Vec<f64> = done.iter().map(|x| x.ln()).collect();
        let time_stats = summary_or_none(&done);
        let log_stats = summary_or_none(&logs);

        let mut hist_json = Value::Null;
        if !logs.is_empty() {
            let bins = match cfg.bins {
                Some(b) => b,
                None => freedman_diaconis_bins(&logs)?,
            };
            let h = histogram(&logs, bins)?;
            let n = logs.len() as f64;
            for (k, &count) in h.counts.iter().enumerate() {
                let (lo, hi) = (h.edges[k], h.edges[k + 1]);
                let width = hi - lo;
                let density = if width > 0.0 {
                    count as f64 / (n * width)
                } else {
                    f64::NAN
                };
                t.histogram.push(vec![
                    r.clone(),
                    (k + 1).to_string(),
                    fmt_float(lo),
                    fmt_float(hi),
                    count.to_string(),
                    fmt_float(density),
                    fmt_float(h.fit.density(0.5 * (lo + hi))),
                ]);
            }
            for (x, f) in Ecdf::new(&logs)?.steps() {
                t.ecdf.push(vec![
                    r.clone(),
                    "simulated".into(),
                    fmt_float(x),
                    fmt_float(f),
                ]);
            }
            hist_json = json!(h);
        }

        let low_traffic = mean_fpt_continuous(p).ok();
        let mut mixture_json = Value::Null;
        let (mut mix_mean, mut mix_log) = (None, None);
        if with_mixture {
            let approx = MixtureApprox::new(p)?;
            let times = approx.sample_batch(replicates, master);
            seeds.push(block(
                format!("mixture rho={r}"),
                master,
                StreamPurpose::Mixture,
                replicates,
            ));
            let mix_logs: Vec<f64> = times.iter().map(|x| x.ln()).collect();
            for (i, (&x, &l)) in times.iter().zip(&mix_logs).enumerate() {
                t.mixture_samples.push(vec![
                    r.clone(),
                    (i + 1).to_string(),
                    fmt_float(x),
                    fmt_float(l),
                ]);
            }
            for (x, f) in Ecdf::new(&mix_logs)?.steps() {
                t.ecdf.push(vec![
                    r.clone(),
                    "mixture".into(),
                    fmt_float(x),
                    fmt_float(f),
                ]);
            }
            let mix_stats = Summary::of(&mix_logs)?;
            mix_mean = Some(approx.mean());
            mix_log = Some(mix_stats);
            let mut ks_json = Value::Null;
            if !logs.is_empty() {
                let spec = RngSpec::for_purpose(master, StreamPurpose::Permutation, 0);
                seeds.push(block(
                    format!("permutation rho={r}"),
                    master,
                    StreamPurpose::Permutation,
                    1,
                ));
                let ks = ks_two_sample(&logs, &mix_logs, permutations, &mut spec.rng())?;
                t.ks.push(vec![
                    r.clone(),
                    fmt_float(ks.statistic),
                    fmt_float(ks.d_plus),
                    fmt_float(ks.d_minus),
                    fmt_float(ks.p_value),
                    fmt_float(ks.p_value_plus),
                    fmt_float(ks.p_value_minus),
                    ks.replicates.to_string(),
                ]);
                ks_json = json!(ks);
            }
            mixture_json = json!({
                "samples": times,
                "mean": approx.mean(),
                "move_prob": approx.move_prob,
                "event_time_scale": approx.event_time_scale,
                "log_time": mix_stats,
                "ks": ks_json,
            });
        }

        t.means.push(vec![
            r.clone(),
            replicates.to_string(),
            censored.to_string(),
            fmt_opt(time_stats.map(|s| s.mean)),
            fmt_opt(time_stats.map(|s| s.std_error)),
            fmt_opt(log_stats.map(|s| s.mean)),
            fmt_opt(log_stats.map(|s| s.std_error)),
            fmt_opt(log_stats.map(|s| s.sd)),
            fmt_opt(log_stats.map(|s| s.skewness)),
            fmt_opt(low_traffic),
            fmt_opt(mix_mean),
            fmt_opt(mix_log.map(|s| s.mean)),
            fmt_opt(mix_log.map(|s| s.std_error)),
        ]);
        summary.push(json!({
            "rho": rho,
            "censored": censored,
            "mean_time": time_stats.map(|s| s.mean),
            "mean_log_time": log_stats.map(|s| s.mean),
            "low_traffic_mean": low_traffic,
            "ks_p_value": mixture_json.get("ks").and_then(|k| k.get("p_value")).cloned(),
        }));
        payload.push(json!({
            "rho": rho,
            "samples": runs.iter().map(sample_json).collect::<Vec<_>>(),
            "censored": censored,
            "time": time_stats,
            "log_time": log_stats,
            "log_histogram": hist_json,
            "low_traffic_mean": low_traffic,
            "mixture": mixture_json,
        }));
    }

    let mut tables = vec![t.samples, t.histogram, t.ecdf, t.means];
    if with_mixture {
        tables.push(t.mixture_samples);
        tables.push(t.ks);
    }
    Ok(Outcome {
        tables,
        payload: json!({ "mixture_available": with_mixture, "by_rho": payload }),
        seeds,
        summary: json!(summary),
    })
}

fn write_samples(table: &mut Table, rho: &str, runs: &[FptSample]) {
    for (i, s) in runs.iter().enumerate() {
        table.push(vec![
            rho.to_string(),
            (i + 1).to_string(),
            fmt_float(s.hit_time),
            fmt_float(s.hit_time.ln()),
            s.events.to_string(),
            s.hit_price.map(|p| p.get().to_string()).unwrap_or_default(),
            u8::from(s.is_censored()).to_string(),
        ]);
    }
}

fn sample_json(s: &FptSample) -> Value {
    json!({
        "hit_time": s.hit_time,
        "events": s.events,
        "hit_price": s.hit_price.map(|p| p.get()),
    })
}

fn block(label: String, master_seed: u64, purpose: StreamPurpose, count: usize) -> SeedBlock {
    SeedBlock {
        label,
        master_seed,
        first_stream: RngSpec::for_purpose(master_seed, purpose, 0).stream_index,
        count: count as u64,
    }
}

struct SweepCell {
    mc: Option<Summary>,
    censored: usize,
    low_traffic: Option<f64>,
    error: Option<String>,
}

fn sweep_cell(
    params: cda_core::Result<ModelParams>,
    replicates: usize,
    seed: u64,
    cap: u64,
) -> SweepCell {
    let mut cell = SweepCell {
        mc: None,
        censored: 0,
        low_traffic: None,
        error: None,
    };
    let mut errors = Vec::new();
    let params = match params {
        Ok(p) => p,
        Err(e) => {
            cell.error = Some(e.to_string());
            return cell;
        }
    };
    match mean_fpt_continuous(&params) {
        Ok(m) => cell.low_traffic = Some(m),
        Err(e) => errors.push(format!("low-traffic mean: {e}")),
    }
    match first_passage_batch(&params, replicates, seed, cap) {
        Ok(runs) => {
            let done: Vec<f64> = runs
                .iter()
                .filter(|s| !s.is_censored())
                .map(|s| s.hit_time)
                .collect();
            cell.censored = runs.len() - done.len();
            cell.mc = summary_or_none(&done);
            if cell.mc.is_none() {
                errors.push("every replicate was censored".to_string());
            }
        }
        Err(e) => errors.push(format!("simulation: {e}")),
    }
    if !errors.is_empty() {
        cell.error = Some(errors.join("; "));
    }
    cell
}

pub fn sweep(cfg: &ExperimentConfig) -> Result<Outcome, CliError> {
    let replicates = cfg.replicates();
    let cap = cfg.event_cap.expect("resolved");
    let mut table = Table::new(
        "table1.csv",
        &[
            "N",
            "n",
            "rho",
            "replicates",
            "mc_mean",
            "mc_se",
            "censored",
            "low_traffic_mean",
            "delta_pct",
            "error",
        ],
    );
    let mut payload = Vec::new();
    let mut seeds = Vec::new();
    let mut failed = 0;
    let mut k = 0u64;
    for cell in &cfg.cells {
        for &rho in &cfg.rho {
            let master = cfg.seed().wrapping_add(k);
            k += 1;
            let params = ModelParams::with_rho(cell.n_prices, cell.cutoff, rho, cfg.mu());
            let res = sweep_cell(params, replicates, master, cap);
            seeds.push(block(
                format!("auction {cell} rho={}", fmt_float(rho)),
                master,
                StreamPurpose::Auction,
                replicates,
            ));
            // relative gap of the low-traffic mean to the Monte Carlo mean
            let delta = match (res.low_traffic, res.mc) {
                (Some(lt), Some(mc)) => Some(100.0 * (lt - mc.mean) / mc.mean),
                _ => None,
            };
            failed += usize::from(res.error.is_some());
            table.push(vec![
                cell.n_prices.to_string(),
                cell.cutoff.to_string(),
                fmt_float(rho),
                replicates.to_string(),
                fmt_opt(res.mc.map(|s| s.mean)),
                fmt_opt(res.mc.map(|s| s.std_error)),
                res.censored.to_string(),
                fmt_opt(res.low_traffic),
                fmt_opt(delta),
                res.error.clone().unwrap_or_default(),
            ]);
            payload.push(json!({
                "N": cell.n_prices,
                "n": cell.cutoff,
                "rho": rho,
                "mc": res.mc,
                "censored": res.censored,
                "low_traffic_mean": res.low_traffic,
                "delta_pct": delta,
                "error": res.error,
            }));
        }
    }
    Ok(Outcome {
        tables: vec![table],
        payload: json!({ "cells": payload }),
        seeds,
        summary: json!({ "cells": k, "failed": failed }),
    })
}
