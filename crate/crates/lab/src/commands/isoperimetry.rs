//! `isoperimetry`: exact `E|boundary(Lambda_n)|` against `n^d f(n, alpha)`.

use lrp_core::analysis::{f_scaling, fit_power_law};
use lrp_core::kernel::{expected_boundary_edges, LatticeBox};
use serde_json::json;

use super::{progress, sorted_boxes, Context, Outcome};
use crate::error::LabResult;
use crate::output::{jnum, num};
use crate::report;

pub fn isoperimetry(ctx: &mut Context<'_>) -> LabResult<Outcome> {
    let cfg = ctx.config;
    let spec = cfg.spec_at(cfg.beta()?)?;
    let boxes = sorted_boxes(cfg);
    let mut rows = Vec::new();
    let (mut ns, mut values, mut scaled) = (Vec::new(), Vec::new(), Vec::new());
    for &n in &boxes {
        let lattice = LatticeBox::new(spec.d, n)?;
        progress!("boundary edges of the box of radius {n}");
        let b = expected_boundary_edges(&spec, lattice)?;
        let scale = if n >= 2 { Some((n as f64).powi(spec.d as i32) * f_scaling(n as u64, spec.alpha)?) } else { None };
        let ratio = scale.map(|s| b.value / s);
        rows.push(vec![n.to_string(), num(b.value), num(b.error), ratio.map(num).unwrap_or_default()]);
        ns.push(n as f64);
        values.push(b.value);
        scaled.push(ratio);
    }
    ctx.out.write_csv("isoperimetry.csv", &["n", "expected_boundary_edges", "error_bound", "ratio_to_scaling"], rows)?;

    // Log-log slopes are only defined when every value is positive (not at beta = 0).
    let zeros = vec![0.0; ns.len()];
    let raw = fit_power_law(&ns, &values, &zeros).ok();
    let ratio_fit = scaled.iter().zip(&ns).filter_map(|(r, &n)| r.map(|r| (n, r))).unzip::<f64, f64, Vec<f64>, Vec<f64>>();
    let ratio_slope = fit_power_law(&ratio_fit.0, &ratio_fit.1, &vec![0.0; ratio_fit.0.len()]).ok();
    ctx.out.write_json(
        "isoperimetry.json",
        &json!({
            "config": cfg,
            "spec": report::spec(&spec),
            "boxes": boxes,
            "values": values.iter().map(|&v| jnum(v)).collect::<Vec<_>>(),
            "log_slope": raw.as_ref().map(report::slope_fit),
            "scaled_log_slope": ratio_slope.as_ref().map(report::slope_fit),
        }),
    )?;
    Ok(Outcome::default())
}
