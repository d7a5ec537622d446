//! `sample`, `twopoint`, `tail` and `phi-scan`.

use lrp_core::analysis::{check_phi_averaging, dyadic_window, fit_tail_exponent, fit_two_point_exponent, setting_label, TailData};
use lrp_core::clusters::{build_partition, largest_cluster_size, typical_value_from_histogram, SizeHistogram};
use lrp_core::kernel::LatticeBox;
use lrp_core::observables::{estimate_tail_stable, estimate_two_point, phi_profile_with, sample_box_statistics, tail_from_histogram, ExteriorTable, JACKKNIFE_BLOCKS};
use lrp_core::rng::SeedSpec;
use lrp_core::sampler::{expected_edge_count, sample_grouped};
use lrp_core::stats::ObservableEstimate;
use serde_json::{json, Value};

use super::{progress, sorted_boxes, Context, Outcome};
use crate::error::{LabError, LabResult};
use crate::format::write_configuration;
use crate::output::{jnum, num};
use crate::report;

fn histogram_rows(h: &SizeHistogram) -> Vec<Vec<String>> {
    h.rows().map(|(s, c)| vec![s.to_string(), c.to_string()]).collect()
}

fn tail_rows(thresholds: &[u64], est: &[ObservableEstimate]) -> Vec<Vec<String>> {
    thresholds.iter().zip(est).map(|(m, e)| vec![m.to_string(), num(e.mean), num(e.std_error)]).collect()
}

pub fn sample(ctx: &mut Context<'_>) -> LabResult<Outcome> {
    let cfg = ctx.config;
    let spec = cfg.spec_at(cfg.beta()?)?;
    let n = cfg.largest_box()?;
    let lattice = LatticeBox::new(spec.d, n)?;
    let seed = SeedSpec::new(ctx.seed(), cfg.sample.replica);
    progress!("sampling one configuration on a box of radius {n} ({} vertices)", lattice.len());
    let conf = sample_grouped(&spec, lattice, seed)?;
    ctx.out.write_text("configuration.txt", &write_configuration(&conf))?;
    let partition = build_partition(&conf)?;
    let mut hist = SizeHistogram::default();
    partition.component_sizes().into_iter().for_each(|s| hist.record(s));
    ctx.out.write_csv("clusters.csv", &["size", "count"], histogram_rows(&hist))?;
    ctx.out.write_json(
        "sample.json",
        &json!({
            "config": cfg,
            "spec": report::spec(&spec),
            "n": n,
            "vertices": lattice.len(),
            "replica": cfg.sample.replica,
            "edges": conf.edges.len(),
            "expected_edges": jnum(expected_edge_count(&spec, lattice)?),
            "clusters": hist.total(),
            "origin_cluster": partition.origin_cluster_size(),
            "largest_cluster": largest_cluster_size(&partition),
        }),
    )?;
    Ok(Outcome::default())
}

pub fn two_point(ctx: &mut Context<'_>) -> LabResult<Outcome> {
    let cfg = ctx.config;
    let spec = cfg.spec_at(cfg.beta()?)?;
    let boxes = sorted_boxes(cfg);
    let mut header: Vec<String> = (1..=spec.d).map(|i| format!("x{i}")).collect();
    header.extend(["t_hat".into(), "std_error".into()]);
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    let (mut summary, mut per_box) = (Vec::new(), Vec::new());
    let (mut radii, mut avgs, mut ses) = (Vec::new(), Vec::new(), Vec::new());
    for &n in &boxes {
        let lattice = LatticeBox::new(spec.d, n)?;
        progress!("two-point function on radius {n}, {} replicas", cfg.run.replicas);
        let table = estimate_two_point(ctx.exec, &spec, lattice, cfg.run.replicas, ctx.seed())?;
        let rows = (0..lattice.len()).map(|v| {
            let mut row: Vec<String> = lattice.coords(v).iter().map(|c| c.to_string()).collect();
            row.extend([num(table.t_hat(v)), num(table.std_error(v))]);
            row
        });
        ctx.out.write_csv(&format!("twopoint_n{n}.csv"), &header, rows)?;
        let avg = table.box_average();
        summary.push(vec![n.to_string(), num(table.sum()), num(table.origin_cluster.std_error), num(avg.mean), num(avg.std_error)]);
        per_box.push(json!({"n": n, "sum": jnum(table.sum()), "origin_cluster": report::estimate(&table.origin_cluster), "box_average": report::estimate(&avg)}));
        radii.push(n);
        avgs.push(avg.mean);
        ses.push(avg.std_error);
    }
    ctx.out.write_csv("twopoint_summary.csv", &["n", "sum_t_hat", "std_error", "box_average", "box_average_std_error"], summary)?;
    let fit = fit_two_point_exponent(spec.d as u32, &radii, &avgs, &ses).ok();
    ctx.out.write_json("twopoint.json", &json!({"config": cfg, "boxes": per_box, "two_point_fit": fit.as_ref().map(report::two_point_fit)}))?;
    Ok(Outcome::default())
}

/// Powers of two from 1 up to `max`.
fn default_thresholds(max: u64) -> Vec<u64> {
    std::iter::successors(Some(1u64), |m| m.checked_mul(2)).take_while(|&m| m <= max).collect()
}

pub fn tail(ctx: &mut Context<'_>) -> LabResult<Outcome> {
    let cfg = ctx.config;
    let spec = cfg.spec_at(cfg.beta()?)?;
    let boxes = sorted_boxes(cfg);
    let largest = *boxes.last().expect("validated");
    let largest_len = LatticeBox::new(spec.d, largest)?.len() as u64;
    let thresholds = cfg.tail.thresholds.clone().unwrap_or_else(|| default_thresholds(largest_len));
    let mut per_box = Vec::new();
    let mut largest_stats = None;
    for &n in &boxes {
        let lattice = LatticeBox::new(spec.d, n)?;
        let usable: Vec<u64> = thresholds.iter().copied().filter(|&m| m <= lattice.len() as u64).collect();
        if cfg.tail.thresholds.is_some() && n == largest && usable.len() < thresholds.len() {
            return Err(LabError::Precondition(format!("a tail threshold exceeds |Lambda_{n}| = {}", lattice.len())));
        }
        progress!("cluster sizes on radius {n}, {} replicas", cfg.run.replicas);
        let stats = sample_box_statistics(ctx.exec, &spec, lattice, 0..cfg.run.replicas, ctx.seed(), false)?;
        let est = tail_from_histogram(&stats.origin_histogram(), &usable);
        ctx.out.write_csv(&format!("tail_n{n}.csv"), &["threshold", "p_hat", "std_error"], tail_rows(&usable, &est))?;
        let largest_hist = stats.largest_histogram();
        ctx.out.write_csv(&format!("largest_n{n}.csv"), &["size", "count"], histogram_rows(&largest_hist))?;
        per_box.push(json!({
            "n": n,
            "origin_cluster": report::estimate(&stats.origin_mean()),
            "typical_value": report::quantile(&typical_value_from_histogram(&largest_hist)),
        }));
        if n == largest {
            largest_stats = Some(stats);
        }
    }
    let stats = largest_stats.expect("at least one box");
    let window = dyadic_window(largest_len);
    let fit = fit_tail_exponent(TailData::Replicas { thresholds: &window, sizes: &stats.origin_sizes, blocks: JACKKNIFE_BLOCKS as usize });
    let stable = match cfg.tail.stable_up_to {
        Some(n_max) => {
            let usable: Vec<u64> = thresholds.iter().copied().filter(|&m| m <= largest_len).collect();
            progress!("doubling the box from radius {largest} until the tail settles (at most {n_max})");
            let st = estimate_tail_stable(ctx.exec, &spec, largest, n_max, &usable, cfg.run.replicas, ctx.seed())?;
            ctx.out.write_csv("tail_stable.csv", &["threshold", "p_hat", "std_error"], tail_rows(&usable, &st.estimates))?;
            Some(json!({"n": st.n, "stable": st.stable, "radii": st.history.iter().map(|h| h.0).collect::<Vec<_>>()}))
        }
        None => None,
    };
    ctx.out.write_json(
        "tail.json",
        &json!({
            "config": cfg,
            "thresholds": thresholds,
            "boxes": per_box,
            "tail_fit": fit.as_ref().ok().map(report::tail_fit),
            "tail_fit_error": fit.as_ref().err().map(|e| e.to_string()),
            "stable_doubling": stable,
        }),
    )?;
    Ok(Outcome::default())
}

pub fn phi_scan(ctx: &mut Context<'_>) -> LabResult<Outcome> {
    let cfg = ctx.config;
    let betas = match &cfg.phi_scan.betas {
        Some(b) => b.clone(),
        None => vec![cfg.beta()?],
    };
    let n = cfg.largest_box()?;
    let mut entries = Vec::new();
    let mut reports = Vec::new();
    for (i, &beta) in betas.iter().enumerate() {
        let spec = cfg.spec_at(beta)?;
        let lattice = LatticeBox::new(spec.d, n)?;
        progress!("phi profile at beta = {beta} up to k = {n}, {} replicas", cfg.run.replicas);
        let table = ExteriorTable::new(&spec, lattice)?;
        let profile = phi_profile_with(ctx.exec, &spec, lattice, n, &table, cfg.run.replicas, ctx.seed(), true)?;
        let rows = profile.points.iter().map(|p| vec![p.k.to_string(), num(p.phi.mean), num(p.phi.std_error)]);
        let file = format!("phi_profile_{i}.csv");
        ctx.out.write_csv(&file, &["k", "phi_hat", "std_error"], rows)?;
        let averaging = if n >= 2 { Some(check_phi_averaging(&profile, &setting_label(&spec, lattice))?) } else { None };
        entries.push(json!({
            "beta": beta,
            "file": file,
            "profile": report::phi_profile(&profile),
            "above_critical_indicator": profile.minimum.mean >= 1.0,
            "averaging_check": averaging.as_ref().map(report::inequality),
        }));
        reports.extend(averaging);
    }
    ctx.out.write_json("phi_scan.json", &json!({"config": cfg, "scans": entries, "inequality_reports": reports.iter().map(report::inequality).collect::<Vec<Value>>()}))?;
    Ok(Outcome::from_reports(&reports))
}
