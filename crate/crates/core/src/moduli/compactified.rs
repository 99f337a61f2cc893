//! Compactified unstable manifolds as stratified cell complexes.
//!
//! The compactification of W^u(x) adds one boundary stratum per pair
//! (connecting orbit to y, cell of the compactification of y). On a
//! surface the boundary of an index-2 point's disk must concatenate into
//! a single circle: arcs of the 1-dimensional moduli alternate with
//! copies of the compactified unstable intervals of the saddles crossed.

use serde::{Deserialize, Serialize};

use super::chart::ModuliContext;
use super::{ModuliError, Result};

/// One boundary stratum of a compactified unstable manifold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum BoundaryStratum {
    /// An open arc of flow lines to `target` (1-cell).
    Arc { target: String, interval: (f64, f64) },
    /// A copy of the compactified unstable interval of a saddle reached at
    /// `theta` (1-cell plus its two corner 0-cells).
    SaddleCell { via: String, theta: f64 },
    /// A corner point where an arc end glues to a saddle-cell end.
    Corner { via: String, branch: i8 },
    /// The terminal point cell of a minimum.
    MinPoint { target: String },
}

/// The compactified unstable manifold of a critical point, with its top
/// cell, ordered boundary strata, and Euler characteristic.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CompactifiedUnstable {
    pub owner: String,
    pub top_dim: usize,
    /// Boundary strata in cyclic order (index 2) or endpoint order
    /// (index 1); empty for minima.
    pub strata: Vec<BoundaryStratum>,
    pub euler_characteristic: i64,
    /// Whether the boundary closes into a single circle (index-2 case on
    /// surfaces; vacuously true below).
    pub boundary_is_circle: bool,
}

/// Builds the compactified unstable manifold of `x` from the moduli data.
pub fn compactified_unstable(ctx: &ModuliContext, owner: &str) -> Result<CompactifiedUnstable> {
    let c = ctx.crits.by_id(owner)?;
    match c.index {
        0 => Ok(CompactifiedUnstable {
            owner: owner.to_string(),
            top_dim: 0,
            strata: Vec::new(),
            euler_characteristic: 1,
            boundary_is_circle: true,
        }),
        1 => {
            // Interval: the two separatrices end at minima.
            let mut strata = Vec::new();
            for branch in [1i8, -1] {
                let t = ctx.separatrix(c, branch)?;
                let Some(omega) = t.omega_limit else {
                    return Err(ModuliError::StrataGap(format!(
                        "separatrix {branch} of {owner} has no omega limit"
                    )));
                };
                strata.push(BoundaryStratum::MinPoint { target: omega });
            }
            // Cells: one open interval (the unstable manifold through x)
            // plus two endpoint 0-cells: chi = 2 - 1 = 1.
            Ok(CompactifiedUnstable {
                owner: owner.to_string(),
                top_dim: 1,
                strata,
                euler_characteristic: 1,
                boundary_is_circle: true,
            })
        }
        2 => {
            let scan = ctx
                .scan(owner)
                .ok_or_else(|| ModuliError::StrataGap(format!("no scan for {owner}")))?;
            if scan.transitions.is_empty() {
                // Boundary = one closed circle of flow lines x distinct
                // minimum: chi = 1 (disk), single-circle check passes when
                // all samples share one limit.
                let target = scan.samples.first().and_then(|(_, l)| l.clone());
                let uniform = scan
                    .samples
                    .iter()
                    .all(|(_, l)| l.as_deref() == target.as_deref());
                if !uniform || target.is_none() {
                    return Err(ModuliError::StrataGap(format!(
                        "mixed omega limits on the unstable circle of {owner}"
                    )));
                }
                return Ok(CompactifiedUnstable {
                    owner: owner.to_string(),
                    top_dim: 2,
                    strata: vec![BoundaryStratum::Arc {
                        target: target.expect("uniform limit"),
                        interval: (0.0, std::f64::consts::TAU),
                    }],
                    euler_characteristic: 1,
                    boundary_is_circle: true,
                });
            }
            // Walk the circle: transition_i, arc_i, transition_{i+1}, ...
            // Each transition contributes the saddle interval with two
            // corners; corner branches must match the adjacent arcs' ends
            // and the saddle separatrices must reach the arcs' targets.
            let n = scan.transitions.len();
            let mut strata = Vec::new();
            let mut vertices = 0usize;
            let mut edges = 0usize;
            for i in 0..n {
                let t0 = &scan.transitions[i];
                let t1 = &scan.transitions[(i + 1) % n];
                let lo = t0.theta;
                let hi = if i + 1 == n {
                    t1.theta + std::f64::consts::TAU
                } else {
                    t1.theta
                };
                // Saddle interval for t0 with its two corners.
                strata.push(BoundaryStratum::Corner {
                    via: t0.target.clone(),
                    branch: t0.branch_below,
                });
                strata.push(BoundaryStratum::SaddleCell {
                    via: t0.target.clone(),
                    theta: t0.theta,
                });
                strata.push(BoundaryStratum::Corner {
                    via: t0.target.clone(),
                    branch: t0.branch_above,
                });
                vertices += 2;
                edges += 1; // saddle interval 1-cell
                // Arc from t0 to t1.
                let mid = 0.5 * (lo + hi);
                let arc_target = {
                    // Nearest scan sample inside the arc.
                    let sample = scan
                        .samples
                        .iter()
                        .map(|(th, l)| {
                            let th0 = th.rem_euclid(std::f64::consts::TAU);
                            let shifted = if th0 <= lo {
                                th0 + std::f64::consts::TAU
                            } else {
                                th0
                            };
                            ((shifted - mid).abs(), l.clone())
                        })
                        .min_by(|a, b| a.0.partial_cmp(&b.0).expect("finite"))
                        .and_then(|(_, l)| l);
                    sample.ok_or_else(|| {
                        ModuliError::StrataGap(format!("no sample inside arc of {owner}"))
                    })?
                };
                // The saddle separatrix on the arc side must reach the
                // arc's target, else the strata do not glue.
                let r = ctx.crits.by_id(&t0.target)?;
                let sep = ctx.separatrix(r, t0.branch_above)?;
                if sep.omega_limit.as_deref() != Some(arc_target.as_str()) {
                    return Err(ModuliError::StrataGap(format!(
                        "separatrix {} of {} flows to {:?}, arc expects {}",
                        t0.branch_above, t0.target, sep.omega_limit, arc_target
                    )));
                }
                strata.push(BoundaryStratum::Arc {
                    target: arc_target,
                    interval: (lo, hi),
                });
                edges += 1; // arc 1-cell
            }
            // chi(disk) = chi(boundary circle) + 1; the walk closed the
            // circle, so V - E must vanish.
            let chi_boundary = vertices as i64 - edges as i64;
            if chi_boundary != 0 {
                return Err(ModuliError::StrataGap(format!(
                    "boundary cells give chi {chi_boundary}, not a circle"
                )));
            }
            Ok(CompactifiedUnstable {
                owner: owner.to_string(),
                top_dim: 2,
                strata,
                euler_characteristic: 1 + chi_boundary,
                boundary_is_circle: true,
            })
        }
        _ => Err(ModuliError::NotASurface(c.index)),
    }
}

#[cfg(test)]
mod tests {
    use super::super::chart::ModuliContext;
    use super::*;
    use crate::dynamics::{find_critical_points, FlowConfig};
    use crate::geometry::{Axis, ImplicitManifold, ScalarField};

    #[test]
    fn sphere_compactifications() {
        let m = ImplicitManifold::sphere(2);
        let f = ScalarField::parse("f", "x3").unwrap();
        let cfg = FlowConfig {
            chart_resolution: 64,
            ..FlowConfig::default()
        };
        let crits = find_critical_points(&m, &f, &cfg).unwrap();
        let ctx = ModuliContext::new(&m, &f, &crits, &cfg).unwrap();
        // Minimum: a point.
        let w_min = compactified_unstable(&ctx, "c0").unwrap();
        assert_eq!(w_min.top_dim, 0);
        assert_eq!(w_min.euler_characteristic, 1);
        // Maximum: boundary is the full circle of meridians.
        let w_max = compactified_unstable(&ctx, "c1").unwrap();
        assert_eq!(w_max.top_dim, 2);
        assert_eq!(w_max.euler_characteristic, 1);
        assert!(w_max.boundary_is_circle);
        assert_eq!(w_max.strata.len(), 1);
    }

    #[test]
    fn torus_max_disk_assembles() {
        let m = ImplicitManifold::torus(2.0, 1.0, Axis::Z);
        let f = ScalarField::parse("f", "x3 + 0.1*x1").unwrap();
        let cfg = FlowConfig {
            chart_resolution: 256,
            ..FlowConfig::default()
        };
        let crits = find_critical_points(&m, &f, &cfg).unwrap();
        let ctx = ModuliContext::new(&m, &f, &crits, &cfg).unwrap();
        let w = compactified_unstable(&ctx, "c3").unwrap();
        assert_eq!(w.euler_characteristic, 1);
        assert!(w.boundary_is_circle);
        let arcs = w
            .strata
            .iter()
            .filter(|s| matches!(s, BoundaryStratum::Arc { .. }))
            .count();
        let saddles = w
            .strata
            .iter()
            .filter(|s| matches!(s, BoundaryStratum::SaddleCell { .. }))
            .count();
        assert_eq!(arcs, 4);
        assert_eq!(saddles, 4);
        // Saddle intervals of both saddles appear.
        for saddle in ["c1", "c2"] {
            let w_s = compactified_unstable(&ctx, saddle).unwrap();
            assert_eq!(w_s.top_dim, 1);
            assert_eq!(w_s.euler_characteristic, 1);
        }
    }
}
