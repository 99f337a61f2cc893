//! Connecting manifolds: signed orbit sets (index difference one) and arc
//! decompositions with broken boundary (index difference two).

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::dynamics::{CriticalPoint, Trajectory};
use crate::geometry::ImplicitManifold;

use super::chart::{ChartParam, ModuliContext};
use super::{ModuliError, Result};

/// One connecting flow line between critical points of index difference 1.
#[derive(Debug, Clone)]
pub struct Orbit {
    pub param: ChartParam,
    pub trajectory: Trajectory,
    pub sign: i64,
}

/// The zero-dimensional moduli space of flow lines from `source` to
/// `target` (index difference one), living in the unstable sphere of the
/// source.
#[derive(Debug, Clone)]
pub struct ConnectingManifold0D {
    pub source: String,
    pub target: String,
    pub orbits: Vec<Orbit>,
}

impl ConnectingManifold0D {
    pub fn count(&self) -> usize {
        self.orbits.len()
    }

    pub fn signed_count(&self) -> i64 {
        self.orbits.iter().map(|o| o.sign).sum()
    }

    pub fn mod2_count(&self) -> i64 {
        (self.count() as i64).rem_euclid(2)
    }
}

/// One broken end of an arc: the limit breaks through `via` as the pair
/// (orbit of M^P_via at `orbit_param`, separatrix `branch` of via).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BrokenEnd {
    pub via: String,
    /// Index into the scan's transition list (the M^P_R orbit).
    pub transition: usize,
    /// Which separatrix of `via` the arc end follows (the M^R_Q orbit).
    pub branch: i8,
}

/// A connected open arc of a one-dimensional connecting manifold,
/// parametrized by the angle interval between two transitions.
#[derive(Debug, Clone)]
pub struct Arc1D {
    /// Angle interval (start, end) with end > start, possibly wrapping
    /// past 2 pi.
    pub interval: (f64, f64),
    pub end_below: BrokenEnd,
    pub end_above: BrokenEnd,
}

/// The one-dimensional moduli space of flow lines from an index-2 source
/// to an index-0 target, as arcs plus closed components of the unstable
/// circle.
#[derive(Debug, Clone)]
pub struct ConnectingManifold1D {
    pub source: String,
    pub target: String,
    pub arcs: Vec<Arc1D>,
    pub closed_components: usize,
    /// Total broken ends (always even for a compact 1-manifold).
    pub boundary_ends: usize,
}

/// Computes M^P_Q for |P| - |Q| = 1 with orientation signs.
pub fn connecting_0d(ctx: &ModuliContext, source: &str, target: &str) -> Result<ConnectingManifold0D> {
    let p = ctx.crits.by_id(source)?;
    let q = ctx.crits.by_id(target)?;
    let diff = p.index as i64 - q.index as i64;
    if diff != 1 {
        return Err(ModuliError::WrongIndexDifference {
            got: diff,
            want: 1,
            context: "connecting_0d",
        });
    }
    let mut orbits = Vec::new();
    match p.index {
        1 => {
            for branch in [1i8, -1] {
                let t = ctx.separatrix(p, branch)?;
                if t.omega_limit.as_deref() == Some(target) {
                    let sign = orbit_sign(ctx.m, p, q, &t, branch as f64)?;
                    orbits.push(Orbit {
                        param: ChartParam::Branch(branch),
                        trajectory: t,
                        sign,
                    });
                }
            }
        }
        2 => {
            let scan = ctx.scan(source).expect("scans precomputed for maxima");
            for tr in &scan.transitions {
                if tr.target == target {
                    let sign = orbit_sign(ctx.m, p, q, &tr.trajectory, 1.0)?;
                    orbits.push(Orbit {
                        param: ChartParam::Angle(tr.theta),
                        trajectory: tr.trajectory.clone(),
                        sign,
                    });
                }
            }
        }
        _ => {
            return Err(ModuliError::WrongIndexDifference {
                got: p.index as i64,
                want: 1,
                context: "connecting_0d source index",
            })
        }
    }
    Ok(ConnectingManifold0D {
        source: source.to_string(),
        target: target.to_string(),
        orbits,
    })
}

/// Computes M^P_Q for |P| - |Q| = 2 (source a maximum, target a minimum on
/// surfaces) and verifies the broken-boundary identity exactly.
pub fn connecting_1d(ctx: &ModuliContext, source: &str, target: &str) -> Result<ConnectingManifold1D> {
    let p = ctx.crits.by_id(source)?;
    let q = ctx.crits.by_id(target)?;
    let diff = p.index as i64 - q.index as i64;
    if diff != 2 {
        return Err(ModuliError::WrongIndexDifference {
            got: diff,
            want: 2,
            context: "connecting_1d",
        });
    }
    let scan = ctx
        .scan(source)
        .ok_or_else(|| ModuliError::WrongIndexDifference {
            got: p.index as i64,
            want: 2,
            context: "connecting_1d source index",
        })?;

    if scan.transitions.is_empty() {
        // No intermediate critical points reached: every sample must flow
        // to a single minimum; the moduli space is the whole circle.
        let all_target = scan
            .samples
            .iter()
            .all(|(_, l)| l.as_deref() == Some(target));
        if !all_target {
            return Err(ModuliError::UnresolvedLimit {
                param: 0.0,
                reason: "no transitions yet mixed omega limits on the circle".into(),
            });
        }
        return Ok(ConnectingManifold1D {
            source: source.to_string(),
            target: target.to_string(),
            arcs: Vec::new(),
            closed_components: 1,
            boundary_ends: 0,
        });
    }

    // Arc between consecutive transitions; samples inside each arc
    // determine (and must agree on) its omega limit.
    let n = scan.transitions.len();
    let mut arcs = Vec::new();
    let mut ends_multiset: Vec<(String, usize, i8)> = Vec::new();
    for i in 0..n {
        let t0 = &scan.transitions[i];
        let t1 = &scan.transitions[(i + 1) % n];
        let lo = t0.theta;
        let hi = if i + 1 == n {
            t1.theta + std::f64::consts::TAU
        } else {
            t1.theta
        };
        let inside: Vec<&(f64, Option<String>)> = scan
            .samples
            .iter()
            .filter(|(th, _)| {
                let th0 = th.rem_euclid(std::f64::consts::TAU);
                let shifted = if th0 <= lo { th0 + std::f64::consts::TAU } else { th0 };
                shifted > lo && shifted < hi
            })
            .collect();
        let arc_limit = inside
            .first()
            .and_then(|(_, l)| l.clone())
            .or_else(|| t0.trajectory.omega_limit.clone());
        if inside
            .iter()
            .any(|(_, l)| l.as_deref() != arc_limit.as_deref())
        {
            return Err(ModuliError::UnresolvedLimit {
                param: lo,
                reason: "omega limit changes inside an arc without a transition".into(),
            });
        }
        if arc_limit.as_deref() != Some(target) {
            continue;
        }
        let end_below = BrokenEnd {
            via: t0.target.clone(),
            transition: i,
            branch: t0.branch_above,
        };
        let end_above = BrokenEnd {
            via: t1.target.clone(),
            transition: (i + 1) % n,
            branch: t1.branch_below,
        };
        ends_multiset.push((end_below.via.clone(), end_below.transition, end_below.branch));
        ends_multiset.push((end_above.via.clone(), end_above.transition, end_above.branch));
        arcs.push(Arc1D {
            interval: (lo, hi),
            end_below,
            end_above,
        });
    }

    // Boundary identity: the multiset of broken ends must equal
    // U_R M^P_R x M^R_Q, where M^P_R are the transitions to R and M^R_Q
    // the separatrices of R reaching Q.
    let mut product_multiset: Vec<(String, usize, i8)> = Vec::new();
    for (i, t) in scan.transitions.iter().enumerate() {
        let r = ctx.crits.by_id(&t.target)?;
        for branch in [1i8, -1] {
            let sep = ctx.separatrix(r, branch)?;
            if sep.omega_limit.as_deref() == Some(target) {
                product_multiset.push((t.target.clone(), i, branch));
            }
        }
    }
    ends_multiset.sort();
    product_multiset.sort();
    if ends_multiset != product_multiset {
        return Err(ModuliError::InconsistentBoundary {
            source: source.to_string(),
            target: target.to_string(),
            ends: ends_multiset.len(),
            expected: product_multiset.len(),
        });
    }
    let boundary_ends = ends_multiset.len();
    // A compact 1-manifold has an even number of boundary points.
    assert!(boundary_ends % 2 == 0, "odd boundary end count");

    Ok(ConnectingManifold1D {
        source: source.to_string(),
        target: target.to_string(),
        arcs,
        closed_components: 0,
        boundary_ends,
    })
}

/// Orientation sign of a connecting orbit (index difference one), read off
/// by parallel-transporting the source's unstable frame along the orbit
/// and comparing, at basin entry, against the frame [flow direction,
/// target unstable frame]. Stable-orientation tokens enter through the
/// induced co-orientations.
fn orbit_sign(
    m: &ImplicitManifold,
    p: &CriticalPoint,
    q: &CriticalPoint,
    traj: &Trajectory,
    initial_branch: f64,
) -> Result<i64> {
    // Transported frame starts as the source's unstable frame; for an
    // index-1 source the one frame vector is oriented along the launch
    // branch so the transport follows the actual curve.
    let mut frame: Vec<DVector<f64>> = p
        .unstable_frame
        .iter()
        .map(|u| u * initial_branch.signum())
        .collect();
    if p.index == 1 {
        // Branch sign belongs to the moduli parameter, not the frame
        // orientation: transport the oriented frame +u and remember the
        // launch side separately.
        frame = vec![p.unstable_frame[0].clone()];
    }

    let project = |x: &DVector<f64>, v: &DVector<f64>| -> Result<DVector<f64>> {
        Ok(m.tangent_project(&m.point(x.clone()), v)?)
    };
    let orthonormalize = |vs: &mut Vec<DVector<f64>>| {
        for i in 0..vs.len() {
            for j in 0..i {
                let d = vs[j].dot(&vs[i]);
                let prev = vs[j].clone();
                vs[i] -= prev * d;
            }
            let n = vs[i].norm();
            vs[i] /= n;
        }
    };

    for pt in &traj.points {
        let mut next: Vec<DVector<f64>> = Vec::with_capacity(frame.len());
        for v in &frame {
            next.push(project(&pt.coords, v)?);
        }
        orthonormalize(&mut next);
        frame = next;
    }

    // Reference frame at the terminal point: unit velocity first, then the
    // target's unstable directions projected in. The stored trajectory's
    // last segment serves as the velocity direction.
    let terminal = traj.terminal();
    let k = traj.points.len();
    let vel = if k >= 2 {
        &traj.points[k - 1].coords - &traj.points[k - 2].coords
    } else {
        &q.location.coords - &terminal.coords
    };
    let mut reference: Vec<DVector<f64>> = vec![project(&terminal.coords, &vel)?];
    for u in &q.unstable_frame {
        reference.push(project(&terminal.coords, u)?);
    }
    orthonormalize(&mut reference);

    let a = DMatrix::from_columns(&frame);
    let b = DMatrix::from_columns(&reference);
    let change = b.transpose() * a;
    let det = change.determinant();
    let raw = if det >= 0.0 { 1.0 } else { -1.0 };
    let launch = if p.index == 1 { initial_branch.signum() } else { 1.0 };
    let sign = raw * launch * p.unstable_coorientation(m)? * q.unstable_coorientation(m)?;
    Ok(sign as i64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{find_critical_points, FlowConfig};
    use crate::geometry::{Axis, ImplicitManifold, ScalarField};

    fn setup(
        m: &ImplicitManifold,
        src: &str,
        cfg: &FlowConfig,
    ) -> (ScalarField, crate::dynamics::CriticalSet) {
        let f = ScalarField::parse("f", src).unwrap();
        let crits = find_critical_points(m, &f, cfg).unwrap();
        (f, crits)
    }

    #[test]
    fn sphere_height_circle_moduli() {
        let m = ImplicitManifold::sphere(2);
        let cfg = FlowConfig {
            chart_resolution: 64,
            ..FlowConfig::default()
        };
        let (f, crits) = setup(&m, "x3", &cfg);
        let ctx = ModuliContext::new(&m, &f, &crits, &cfg).unwrap();
        // No index-difference-1 pairs at all.
        let scan = ctx.scan("c1").unwrap();
        assert!(scan.transitions.is_empty());
        let m1 = connecting_1d(&ctx, "c1", "c0").unwrap();
        assert_eq!(m1.closed_components, 1);
        assert_eq!(m1.boundary_ends, 0);
        assert!(m1.arcs.is_empty());
    }

    #[test]
    fn bumpy_sphere_counts() {
        let m = ImplicitManifold::sphere(2);
        let cfg = FlowConfig {
            chart_resolution: 128,
            ..FlowConfig::default()
        };
        let (f, crits) = setup(&m, "x3^2 + 0.4*x1", &cfg);
        let ctx = ModuliContext::new(&m, &f, &crits, &cfg).unwrap();
        // c0 min, c1 saddle, c2/c3 maxima.
        for max_id in ["c2", "c3"] {
            let m0 = connecting_0d(&ctx, max_id, "c1").unwrap();
            assert_eq!(m0.count(), 1, "one orbit {max_id} -> saddle");
            let m1 = connecting_1d(&ctx, max_id, "c0").unwrap();
            assert_eq!(m1.arcs.len(), 1);
            assert_eq!(m1.boundary_ends, 2);
        }
        // Saddle to minimum: both separatrices.
        let sm = connecting_0d(&ctx, "c1", "c0").unwrap();
        assert_eq!(sm.count(), 2);
        assert_eq!(sm.signed_count(), 0, "opposite signs on the separatrices");
    }

    #[test]
    fn tilted_torus_boundary_formula() {
        let m = ImplicitManifold::torus(2.0, 1.0, Axis::Z);
        let cfg = FlowConfig {
            chart_resolution: 256,
            ..FlowConfig::default()
        };
        let (f, crits) = setup(&m, "x3 + 0.1*x1", &cfg);
        let ctx = ModuliContext::new(&m, &f, &crits, &cfg).unwrap();
        // c0 min, c1/c2 saddles, c3 max.
        for saddle in ["c1", "c2"] {
            let sm = connecting_0d(&ctx, saddle, "c0").unwrap();
            assert_eq!(sm.count(), 2, "{saddle} has two descending separatrices");
            assert_eq!(sm.signed_count(), 0);
            let ms = connecting_0d(&ctx, "c3", saddle).unwrap();
            assert_eq!(ms.count(), 2, "two orbits max -> {saddle}");
            assert_eq!(ms.signed_count(), 0);
        }
        let m1 = connecting_1d(&ctx, "c3", "c0").unwrap();
        assert_eq!(m1.arcs.len(), 4);
        assert_eq!(m1.boundary_ends, 8);
        assert_eq!(m1.closed_components, 0);
    }
}
