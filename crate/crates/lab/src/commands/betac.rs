//! `betac`: bracket for the critical point.

use lrp_core::critical::{bisect_beta_c, crossing_fraction, BisectionOptions};
use serde_json::json;

use super::{progress, Context, Outcome};
use crate::error::LabResult;
use crate::report;

pub fn betac(ctx: &mut Context<'_>) -> LabResult<Outcome> {
    let cfg = ctx.config;
    let [lo, hi] = cfg.model.beta_bracket.expect("validated");
    let spec = cfg.spec_at(lo)?;
    let n = cfg.run.boxes[0];
    let opts = BisectionOptions {
        n,
        beta_low: lo,
        beta_high: hi,
        tolerance: cfg.betac.tolerance,
        replicas: cfg.run.replicas,
        max_replicas: cfg.betac.max_replicas.unwrap_or(8 * cfg.run.replicas),
        two_sizes: cfg.betac.two_sizes,
    };
    progress!("bisecting on [{lo}, {hi}] at radius {n}{}", if opts.two_sizes { format!(" and {}", 2 * n) } else { String::new() });
    let est = bisect_beta_c(ctx.exec, &spec, &opts, ctx.seed())?;
    progress!("bracket [{}, {}]", est.beta_low, est.beta_high);

    // Cross-check at the final bracket ends with a second indicator.
    let eps = cfg.betac.crossing_eps;
    let mut cross = Vec::new();
    for (end, beta) in [("beta_low", est.beta_low), ("beta_high", est.beta_high)] {
        let c = crossing_fraction(ctx.exec, &spec.with_beta(beta), n, eps, cfg.run.replicas, ctx.seed())?;
        cross.push(json!({"end": end, "beta": beta, "estimate": report::estimate(&c)}));
    }
    ctx.out.write_json(
        "betac.json",
        &json!({
            "config": cfg,
            "bracket": [est.beta_low, est.beta_high],
            "critical": report::critical(&est),
            "crossing_fraction": {"eps": eps, "n": n, "ends": cross},
        }),
    )?;
    Ok(Outcome::default())
}
