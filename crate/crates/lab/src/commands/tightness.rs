//! `tightness`: the two tightness inequalities per box, then the quantile and
//! moment bounds under the tail exponent read off the two largest boxes.

use lrp_core::analysis::{
    bound_hypothesis_theta, check_moment_bound, check_quantile_bound, quantile_bound_theta, setting_label, theta_consistent_with_tail, tightness_from_samples, InequalityKind,
    InequalityReport, Side, Verdict, TIGHTNESS_M_SALT,
};
use lrp_core::clusters::estimate_typical_value;
use lrp_core::kernel::{KernelSpec, LatticeBox};
use lrp_core::observables::{sample_box_statistics, BoxStatistics, JACKKNIFE_BLOCKS};
use lrp_core::rng::SeedSpec;
use serde_json::{json, Value};

use super::{progress, sorted_boxes, Context, Outcome};
use crate::error::LabResult;
use crate::report;

pub(crate) fn inconclusive(kind: InequalityKind, setting: &str, note: String) -> InequalityReport {
    let nan = Side { value: f64::NAN, std_error: f64::NAN };
    InequalityReport { kind, left: nan, right: nan, difference_std_error: f64::NAN, tolerance: 0.0, verdict: Verdict::Inconclusive, setting: setting.into(), note }
}

pub(crate) fn model_label(spec: &KernelSpec) -> String {
    format!("d={} alpha={} beta={}", spec.d, spec.alpha, spec.beta)
}

/// Quantile and moment bounds from per-box statistics (ascending radii) and
/// independent `M` estimates. Returns the reports and the tail fit as JSON.
pub(crate) fn bound_checks(
    spec: &KernelSpec,
    stats: &[(LatticeBox, BoxStatistics)],
    quantiles: &[(LatticeBox, lrp_core::clusters::QuantileEstimate)],
    two_eta: Option<(f64, f64)>,
    setting: &str,
) -> LabResult<(Vec<InequalityReport>, Value)> {
    let mut reports = Vec::new();
    if stats.len() < 2 {
        let note = "needs at least two boxes".to_string();
        reports.push(inconclusive(InequalityKind::MomentBoundTheta, setting, note.clone()));
        reports.push(inconclusive(InequalityKind::QuantileBound { radius: stats.last().map_or(0, |s| s.0.n) }, setting, note));
        return Ok((reports, Value::Null));
    }
    let (large, small) = (&stats[stats.len() - 1].1, &stats[stats.len() - 2].1);
    match bound_hypothesis_theta(large, small, JACKKNIFE_BLOCKS as usize) {
        Ok(fit) => {
            let hist = large.origin_histogram();
            let theta = theta_consistent_with_tail(&fit, &hist).min(1.0);
            reports.extend(check_quantile_bound(&hist, theta, quantiles, setting)?);
            let means: Vec<(u32, f64, f64)> = stats
                .iter()
                .map(|(l, s)| {
                    let m = s.origin_mean();
                    (l.n, m.mean, m.std_error)
                })
                .collect();
            let mut moment = check_moment_bound(spec.d as u32, &means, (theta, fit.fit.std_error), two_eta, setting)?;
            // halves both steeper than k^-1 clamp to the same theta = 1
            let clamped_agree = fit.fit.half_slopes.is_some_and(|(a, b)| -a >= 1.0 && -b >= 1.0);
            if !fit.fit.converged && !clamped_agree {
                // same rule as the cluster decay check: a drifting tail slope is not an exponent
                let note = format!("tail fit for theta not converged (half-window slopes {:?}); growth {:.4}", fit.fit.half_slopes, moment[0].left.value);
                moment[0] = inconclusive(InequalityKind::MomentBoundTheta, setting, note);
            }
            reports.extend(moment);
            Ok((reports, json!({"fit": report::tail_fit(&fit), "theta_used": theta})))
        }
        Err(e) => {
            // the quantile bound holds for any theta with its own C, so it is still checkable
            let hist = large.origin_histogram();
            let size = quantiles.iter().map(|(l, _)| l.len()).max().unwrap_or(1);
            let theta = quantile_bound_theta(&hist, size)?;
            reports.extend(check_quantile_bound(&hist, theta, quantiles, setting)?);
            reports.push(inconclusive(InequalityKind::MomentBoundTheta, setting, format!("no usable tail exponent: {e}")));
            Ok((reports, json!({"error": e.to_string(), "quantile_theta": theta})))
        }
    }
}

pub fn tightness(ctx: &mut Context<'_>) -> LabResult<Outcome> {
    let cfg = ctx.config;
    let spec = cfg.spec_at(cfg.beta()?)?;
    let boxes = sorted_boxes(cfg);
    let m_seed = SeedSpec::derived_master(ctx.seed(), TIGHTNESS_M_SALT);
    ctx.record_seed("typical_value", m_seed);
    let mut reports = Vec::new();
    let mut per_box = Vec::new();
    let (mut stats, mut quantiles) = (Vec::new(), Vec::new());
    for &n in &boxes {
        let lattice = LatticeBox::new(spec.d, n)?;
        progress!("tightness on radius {n}, {} replicas", cfg.run.replicas);
        let s = sample_box_statistics(ctx.exec, &spec, lattice, 0..cfg.run.replicas, ctx.seed(), false)?;
        let (q, _) = estimate_typical_value(ctx.exec, &spec, lattice, cfg.run.replicas, m_seed)?;
        reports.extend(tightness_from_samples(&s, &q, &cfg.tightness.multipliers, &setting_label(&spec, lattice))?);
        per_box.push(json!({"n": n, "typical_value": report::quantile(&q), "origin_cluster": report::estimate(&s.origin_mean())}));
        stats.push((lattice, s));
        quantiles.push((lattice, q));
    }
    let (bounds, theta) = bound_checks(&spec, &stats, &quantiles, None, &model_label(&spec))?;
    reports.extend(bounds);
    let outcome = Outcome::from_reports(&reports);
    progress!("{} checks: {} violated, {} inconclusive", reports.len(), outcome.violated, outcome.inconclusive);
    ctx.out.write_json(
        "tightness.json",
        &json!({
            "config": cfg,
            "spec": report::spec(&spec),
            "boxes": per_box,
            "theta_hypothesis": theta,
            "inequality_reports": reports.iter().map(report::inequality).collect::<Vec<_>>(),
            "summary": {"checks": reports.len(), "violated": outcome.violated, "inconclusive": outcome.inconclusive, "replicas": cfg.run.replicas},
        }),
    )?;
    Ok(outcome)
}
