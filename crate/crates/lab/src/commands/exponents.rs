//! `exponents`: bracket `beta_c`, then fit `delta` and `2 - eta` at both ends
//! of the bracket and run the inequality checks.
//!
//! Lower-bound checks use the upper end of the bracket and upper-bound checks
//! the lower end. All of the bounded quantities are monotone in `beta`, so
//! each check is made where it is hardest to pass.

use lrp_core::analysis::{
    bound_hypothesis_theta, check_phi_averaging, check_propositions, dyadic_window, fit_tail_exponent, fit_two_point_axis, fit_two_point_exponent, ExponentReport, InequalityKind,
    InequalityReport, TailData,
};
use lrp_core::clusters::typical_value_from_histogram;
use lrp_core::critical::{bisect_beta_c, BisectionOptions};
use lrp_core::kernel::{KernelSpec, LatticeBox};
use lrp_core::observables::{phi_profile, sample_box_statistics, tail_from_histogram, BoxStatistics, TwoPointTable, JACKKNIFE_BLOCKS};
use lrp_core::rng::SeedSpec;
use serde_json::{json, Value};

use super::tightness::{bound_checks, inconclusive, model_label};
use super::{progress, sorted_boxes, Context, Outcome};
use crate::error::LabResult;
use crate::output::{jnum, num};
use crate::report;

const BISECTION_SALT: u64 = 0xb1;
const ESTIMATE_SALT: u64 = 0xe5;

/// Axis values `t_hat((m, 0, ..., 0))`, averaged with the mirror point, for
/// dyadic `m` from 4 up to `n / 4`.
fn axis_fit(table: &TwoPointTable, d: u32) -> Option<lrp_core::analysis::TwoPointExponentFit> {
    let n = table.lattice.n;
    let (mut ms, mut t, mut se) = (Vec::new(), Vec::new(), Vec::new());
    let mut m = 4u32;
    while m <= n / 4 {
        let mut x = vec![0i64; d as usize];
        x[0] = m as i64;
        let v = table.lattice.index_of(&x)?;
        let w = table.mirror(v);
        ms.push(m);
        t.push(0.5 * (table.t_hat(v) + table.t_hat(w)));
        se.push(table.std_error(v).max(table.std_error(w)));
        m *= 2;
    }
    fit_two_point_axis(d, &ms, &t, &se).ok()
}

struct Endpoint {
    label: &'static str,
    report: ExponentReport,
    reports: Vec<InequalityReport>,
    data: Value,
}

fn run_endpoint(ctx: &mut Context<'_>, label: &'static str, spec: &KernelSpec, boxes: &[u32], seed: u64, lower_checks: bool) -> LabResult<Endpoint> {
    let cfg = ctx.config;
    let replicas = cfg.run.replicas;
    let d = spec.d as u32;
    let largest = *boxes.last().expect("validated");
    let mut stats: Vec<(LatticeBox, BoxStatistics)> = Vec::new();
    for &n in boxes {
        let lattice = LatticeBox::new(spec.d, n)?;
        progress!("{label} (beta = {}): radius {n}, {replicas} replicas", spec.beta);
        stats.push((lattice, sample_box_statistics(ctx.exec, spec, lattice, 0..replicas, seed, n == largest)?));
    }
    let skip = cfg.exponents.skip_smallest;
    let fit_stats = &stats[skip..];
    let sums: Vec<(u32, f64, f64)> = fit_stats
        .iter()
        .map(|(l, s)| {
            let m = s.origin_mean();
            (l.n, m.mean, m.std_error)
        })
        .collect();
    let radii: Vec<u32> = sums.iter().map(|s| s.0).collect();
    let lens: Vec<f64> = fit_stats.iter().map(|(l, _)| l.len() as f64).collect();
    let avgs: Vec<f64> = sums.iter().zip(&lens).map(|(s, l)| s.1 / l).collect();
    let ses: Vec<f64> = sums.iter().zip(&lens).map(|(s, l)| s.2 / l).collect();
    let two_point = fit_two_point_exponent(d, &radii, &avgs, &ses).ok();

    let (big_lattice, big) = stats.last().expect("at least one box");
    let table = TwoPointTable::from_statistics(big)?;
    let unaveraged = axis_fit(&table, d);
    let window = dyadic_window(big_lattice.len() as u64);
    let tail = fit_tail_exponent(TailData::Replicas { thresholds: &window, sizes: &big.origin_sizes, blocks: JACKKNIFE_BLOCKS as usize }).ok();
    let stable = if stats.len() >= 2 { bound_hypothesis_theta(big, &stats[stats.len() - 2].1, JACKKNIFE_BLOCKS as usize).ok() } else { None };
    let report = ExponentReport::new(spec, tail.clone(), two_point.clone(), unaveraged)?;

    let setting = format!("{label}: {}", model_label(spec));
    let mut reports = Vec::new();
    if lower_checks {
        let delta = tail.as_ref().filter(|t| t.fit.converged && !t.delta_infinite).map(|t| (t.delta, t.delta_std_error));
        reports.extend(check_propositions(spec, &sums, delta, &setting)?);
        if delta.is_none() {
            let why = match &tail {
                Some(t) if !t.fit.converged => format!("tail fit not converged (half-window slopes {:?}); delta_hat is not an exponent estimate", t.fit.half_slopes),
                Some(_) => "tail slope is zero".to_string(),
                None => "no usable tail fit".to_string(),
            };
            reports.push(inconclusive(InequalityKind::ClusterDecay, &setting, why));
        }
        let profile = phi_profile(ctx.exec, spec, cfg.exponents.phi_radius, replicas, seed)?;
        reports.push(check_phi_averaging(&profile, &setting)?);
    } else {
        let quantiles: Vec<_> = fit_stats.iter().map(|(l, s)| (*l, typical_value_from_histogram(&s.largest_histogram()))).collect();
        let te = two_point.as_ref().map(|t| (t.two_eta, t.std_error));
        reports.extend(bound_checks(spec, fit_stats, &quantiles, te, &setting)?.0);
    }

    let sum_rows = stats
        .iter()
        .map(|(l, s)| {
            let m = s.origin_mean();
            let len = l.len() as f64;
            vec![l.n.to_string(), num(m.mean), num(m.std_error), num(m.mean / len), num(m.std_error / len)]
        })
        .collect::<Vec<_>>();
    ctx.out.write_csv(&format!("sums_{label}.csv"), &["n", "sum_t_hat", "std_error", "box_average", "box_average_std_error"], sum_rows)?;
    let thresholds: Vec<u64> = std::iter::successors(Some(1u64), |m| Some(m * 2)).take_while(|&m| m <= big_lattice.len() as u64).collect();
    let tail_est = tail_from_histogram(&big.origin_histogram(), &thresholds);
    let tail_rows = thresholds.iter().zip(&tail_est).map(|(m, e)| vec![m.to_string(), num(e.mean), num(e.std_error)]);
    ctx.out.write_csv(&format!("tail_{label}.csv"), &["threshold", "p_hat", "std_error"], tail_rows)?;

    let data = json!({
        "beta": spec.beta,
        "boxes": stats.iter().map(|(l, s)| json!({"n": l.n, "origin_cluster": report::estimate(&s.origin_mean())})).collect::<Vec<_>>(),
        "fit_boxes": radii,
        "finite_size_stable_tail": stable.as_ref().map(report::tail_fit),
        "largest_box_sum_t_hat": jnum(table.sum()),
    });
    Ok(Endpoint { label, report, reports, data })
}

pub fn exponents(ctx: &mut Context<'_>) -> LabResult<Outcome> {
    let cfg = ctx.config;
    let opts = &cfg.exponents;
    let [lo, hi] = cfg.model.beta_bracket.expect("validated");
    let spec = cfg.spec_at(lo)?;
    let bisection_seed = SeedSpec::derived_master(ctx.seed(), BISECTION_SALT);
    let estimate_seed = SeedSpec::derived_master(ctx.seed(), ESTIMATE_SALT);
    ctx.record_seed("bisection", bisection_seed);
    ctx.record_seed("estimates", estimate_seed);

    let bopts = BisectionOptions {
        n: opts.bisection_radius,
        beta_low: lo,
        beta_high: hi,
        tolerance: opts.tolerance,
        replicas: opts.bisection_replicas,
        max_replicas: opts.max_replicas.unwrap_or(8 * opts.bisection_replicas),
        two_sizes: true,
    };
    progress!("bisecting on [{lo}, {hi}] at radii {} and {}", bopts.n, 2 * bopts.n);
    let critical = bisect_beta_c(ctx.exec, &spec, &bopts, bisection_seed)?;
    progress!("bracket [{}, {}]", critical.beta_low, critical.beta_high);

    let boxes = sorted_boxes(cfg);
    let low = run_endpoint(ctx, "beta_low", &spec.with_beta(critical.beta_low), &boxes, estimate_seed, false)?;
    let high = run_endpoint(ctx, "beta_high", &spec.with_beta(critical.beta_high), &boxes, estimate_seed, true)?;

    let reports: Vec<InequalityReport> = low.reports.iter().chain(&high.reports).cloned().collect();
    let outcome = Outcome::from_reports(&reports);
    progress!("{} checks: {} violated, {} inconclusive", reports.len(), outcome.violated, outcome.inconclusive);
    let endpoint_json = |e: &Endpoint| json!({"exponents": report::exponent_report(&e.report), "data": e.data});
    ctx.out.write_json(
        "exponents.json",
        &json!({
            "config": cfg,
            "critical": report::critical(&critical),
            "exponent_report": {low.label: endpoint_json(&low), high.label: endpoint_json(&high)},
            "inequality_reports": reports.iter().map(report::inequality).collect::<Vec<_>>(),
            "provenance": {
                "seeds": {"master": ctx.seed(), "bisection": bisection_seed, "estimates": estimate_seed},
                "replica_counts": {
                    "per_box": cfg.run.replicas,
                    "bisection_initial": opts.bisection_replicas,
                    "bisection_max_used": critical.boxes.iter().map(|b| b.max_replicas_used).max(),
                },
                "content_hash": cfg.content_hash(),
            },
        }),
    )?;
    Ok(outcome)
}
