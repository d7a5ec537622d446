//! JSON views of core result types.

use lrp_core::analysis::{ExponentReport, InequalityKind, InequalityReport, SlopeFit, TailExponentFit, TwoPointExponentFit};
use lrp_core::clusters::QuantileEstimate;
use lrp_core::critical::CriticalEstimate;
use lrp_core::kernel::{KernelSpec, Norm};
use lrp_core::observables::PhiProfile;
use lrp_core::stats::{DefinitionTag, ObservableEstimate};
use serde_json::{json, Value};

use crate::output::jnum;

pub fn tag(t: &DefinitionTag) -> Value {
    match *t {
        DefinitionTag::TailSurvival { threshold } => json!({"quantity": "tail_survival", "threshold": threshold}),
        DefinitionTag::OriginClusterMean => json!({"quantity": "origin_cluster_mean"}),
        DefinitionTag::BoxAverageTwoPoint => json!({"quantity": "box_average_two_point"}),
        DefinitionTag::Phi { k } => json!({"quantity": "phi", "k": k}),
        DefinitionTag::PhiMinimum => json!({"quantity": "phi_minimum"}),
        DefinitionTag::PhiAverage => json!({"quantity": "phi_average"}),
        DefinitionTag::BoundaryCrossings { k } => json!({"quantity": "boundary_crossings", "k": k}),
        DefinitionTag::BoundaryCrossingsCorrected { k } => json!({"quantity": "boundary_crossings_corrected", "k": k}),
        DefinitionTag::CrossingFraction => json!({"quantity": "crossing_fraction"}),
        DefinitionTag::Probability => json!({"quantity": "probability"}),
    }
}

pub fn estimate(e: &ObservableEstimate) -> Value {
    json!({"mean": jnum(e.mean), "std_error": jnum(e.std_error), "replicas": e.replicas, "definition": tag(&e.tag)})
}

pub fn spec(s: &KernelSpec) -> Value {
    let norm = match s.norm {
        Norm::Sup => "sup",
        Norm::Euclidean => "euclidean",
    };
    json!({"d": s.d, "alpha": s.alpha, "beta": s.beta, "amplitude": s.amplitude, "norm": norm})
}

pub fn slope_fit(f: &SlopeFit) -> Value {
    json!({
        "slope": jnum(f.slope),
        "intercept": jnum(f.intercept),
        "std_error": jnum(f.std_error),
        "window": [f.window.min, f.window.max],
        "points": f.points,
        "half_slopes": f.half_slopes.map(|(a, b)| json!([jnum(a), jnum(b)])),
        "drift": f.drift.map(|(a, b)| json!({"value": jnum(a), "std_error": jnum(b)})),
        "converged": f.converged,
    })
}

pub fn tail_fit(t: &TailExponentFit) -> Value {
    json!({
        "theta_hat": jnum(t.theta),
        "delta_hat": jnum(t.delta),
        "delta_std_error": jnum(t.delta_std_error),
        "delta_infinite": t.delta_infinite,
        "thresholds": t.thresholds,
        "fit": slope_fit(&t.fit),
    })
}

pub fn two_point_fit(t: &TwoPointExponentFit) -> Value {
    json!({"two_eta_hat": jnum(t.two_eta), "std_error": jnum(t.std_error), "box_averaged": t.averaged, "fit": slope_fit(&t.fit)})
}

pub fn exponent_report(r: &ExponentReport) -> Value {
    json!({
        "d": r.d,
        "alpha": r.alpha,
        "beta": r.beta,
        "tail": r.tail.as_ref().map(tail_fit),
        "two_point": r.two_point.as_ref().map(two_point_fit),
        "two_point_unaveraged": r.two_point_unaveraged.as_ref().map(two_point_fit),
        "lower_bound_delta": r.lower_bound_delta,
        "lower_bound_two_eta": r.lower_bound_two_eta,
        "conjectured": {"delta": r.conjectured.delta, "two_eta": r.conjectured.two_eta, "alpha_c": r.conjectured.alpha_c},
        "hyperscaling": r.hyperscaling.as_ref().map(|h| json!({"two_eta_times_delta_plus_one": jnum(h.left), "d_times_delta_minus_one": jnum(h.right)})),
        "converged": r.converged(),
        "flags": r.flags,
    })
}

pub fn inequality(r: &InequalityReport) -> Value {
    let multiplier = match r.kind {
        InequalityKind::LargestClusterTightness { multiplier } | InequalityKind::SingleClusterTightness { multiplier } => Some(multiplier),
        _ => None,
    };
    let radius = match r.kind {
        InequalityKind::QuantileBound { radius } => Some(radius),
        _ => None,
    };
    json!({
        "name": r.kind.name(),
        "multiplier": multiplier,
        "radius": radius,
        "left": {"value": jnum(r.left.value), "std_error": jnum(r.left.std_error)},
        "right": {"value": jnum(r.right.value), "std_error": jnum(r.right.std_error)},
        "difference_std_error": jnum(r.difference_std_error),
        "tolerance": jnum(r.tolerance),
        "verdict": r.verdict.name(),
        "setting": r.setting,
        "note": r.note,
    })
}

pub fn quantile(q: &QuantileEstimate) -> Value {
    json!({"m_hat": q.m_hat, "m_low": q.m_low, "m_high": q.m_high, "samples": q.samples, "confidence": q.confidence})
}

pub fn critical(c: &CriticalEstimate) -> Value {
    json!({
        "beta_low": c.beta_low,
        "beta_high": c.beta_high,
        "indicator": c.indicator.name(),
        "boxes_used": c.boxes_used(),
        "boxes": c.boxes.iter().map(|b| json!({"n": b.n, "beta_low": b.beta_low, "beta_high": b.beta_high, "max_replicas": b.max_replicas_used})).collect::<Vec<_>>(),
        "drift": c.drift,
        "steps": c.steps.iter().map(|s| json!({
            "n": s.n, "beta": s.beta, "indicator": jnum(s.indicator), "std_error": jnum(s.std_error),
            "replicas": s.replicas, "uncertain": s.uncertain, "bracket": [s.bracket.0, s.bracket.1],
        })).collect::<Vec<_>>(),
    })
}

pub fn phi_profile(p: &PhiProfile) -> Value {
    json!({
        "spec": spec(&p.spec),
        "n": p.n,
        "replicas": p.replicas,
        "minimum": estimate(&p.minimum),
        "argmin": p.argmin,
        "average": estimate(&p.average),
        "origin_cluster": p.origin_cluster.as_ref().map(estimate),
        "averaging_constant": p.averaging_constant.map(jnum),
        "f_n": p.f_n.map(jnum),
        "exterior_error": jnum(p.exterior_error),
        "crossing_split": p.xk.iter().map(|x| json!({
            "k": x.k, "crossings": estimate(&x.crossings), "corrected": estimate(&x.corrected), "difference": estimate(&x.difference),
        })).collect::<Vec<_>>(),
    })
}
