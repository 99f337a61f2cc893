//! Loop extraction: closing flow lines up through a fixed base path.
//!
//! A fixed simple path joins all critical points; collapsing it to a point
//! turns every flow line between critical points into a based loop. Loops
//! are stored as polylines with a monotone nondecreasing parameter that
//! equals -f along flow segments (base-path segments ride at constant
//! parameter), so broken flow lines concatenate with parameter ranges
//! abutting at the intermediate critical value.

use nalgebra::DVector;

use crate::dynamics::{CriticalSet, Trajectory};
use crate::geometry::{ImplicitManifold, TorusAngles};

use super::{ModuliError, Result};

const BASE_STEP: f64 = 0.02;

/// The fixed simple path through all critical points, stored per ordered
/// pair of consecutive chain members as dense polylines.
#[derive(Debug, Clone)]
pub struct BasePath {
    /// Critical ids in chain order (descending f-value).
    pub chain: Vec<String>,
    /// legs[i] joins chain[i] to chain[i+1].
    pub legs: Vec<Vec<DVector<f64>>>,
    /// Base point: location of the last chain member (the deepest
    /// minimum), where all loops start and end.
    pub basepoint: DVector<f64>,
}

impl BasePath {
    /// Builds the base path for a critical set on a catalog surface.
    /// Sphere legs follow great circles; torus legs follow angle-space
    /// L-paths whose wrap directions are searched so the whole chain stays
    /// simple (no self-intersections away from shared endpoints).
    pub fn new(m: &ImplicitManifold, crits: &CriticalSet) -> Result<Self> {
        let mut order: Vec<usize> = (0..crits.points.len()).collect();
        order.sort_by(|&a, &b| {
            crits.points[b]
                .value
                .partial_cmp(&crits.points[a].value)
                .expect("finite values")
        });
        let chain: Vec<String> = order.iter().map(|&i| crits.points[i].id.clone()).collect();
        let locs: Vec<DVector<f64>> = order
            .iter()
            .map(|&i| crits.points[i].location.coords.clone())
            .collect();

        let mut legs: Vec<Vec<DVector<f64>>> = Vec::new();
        if m.torus_angles(&locs[0]).is_some() {
            // Torus: plan in angle space with simplicity search.
            let angles: Vec<TorusAngles> = locs
                .iter()
                .map(|l| m.torus_angles(l).expect("catalog torus"))
                .collect();
            let mut placed: Vec<((f64, f64), (f64, f64))> = Vec::new();
            for w in angles.windows(2) {
                let leg = plan_torus_leg(w[0], w[1], &mut placed)?;
                legs.push(
                    leg.iter()
                        .map(|&(t, p)| {
                            m.torus_point(TorusAngles { theta: t, phi: p })
                                .expect("catalog torus")
                                .coords
                        })
                        .collect(),
                );
            }
        } else {
            // Sphere (or generic): great-circle-ish legs by chord
            // subdivision plus retraction.
            for w in locs.windows(2) {
                legs.push(retracted_segment(m, &w[0], &w[1])?);
            }
        }
        let basepoint = locs.last().expect("nonempty critical set").clone();
        Ok(BasePath {
            chain,
            legs,
            basepoint,
        })
    }

    /// A second, disjointly routed base path (for invariance checks):
    /// reverses the chain order, which reroutes every leg.
    pub fn alternate(m: &ImplicitManifold, crits: &CriticalSet) -> Result<Self> {
        let mut order: Vec<usize> = (0..crits.points.len()).collect();
        // Ascending f, then reversed pairs: a genuinely different route.
        order.sort_by(|&a, &b| {
            crits.points[a]
                .value
                .partial_cmp(&crits.points[b].value)
                .expect("finite values")
        });
        let chain: Vec<String> = order.iter().map(|&i| crits.points[i].id.clone()).collect();
        let locs: Vec<DVector<f64>> = order
            .iter()
            .map(|&i| crits.points[i].location.coords.clone())
            .collect();
        let mut legs = Vec::new();
        if m.torus_angles(&locs[0]).is_some() {
            let angles: Vec<TorusAngles> = locs
                .iter()
                .map(|l| m.torus_angles(l).expect("catalog torus"))
                .collect();
            let mut placed: Vec<((f64, f64), (f64, f64))> = Vec::new();
            for w in angles.windows(2) {
                let leg = plan_torus_leg(w[0], w[1], &mut placed)?;
                legs.push(
                    leg.iter()
                        .map(|&(t, p)| {
                            m.torus_point(TorusAngles { theta: t, phi: p })
                                .expect("catalog torus")
                                .coords
                        })
                        .collect(),
                );
            }
        } else {
            for w in locs.windows(2) {
                legs.push(retracted_segment(m, &w[0], &w[1])?);
            }
        }
        let basepoint = locs.last().expect("nonempty critical set").clone();
        Ok(BasePath {
            chain,
            legs,
            basepoint,
        })
    }

    fn chain_pos(&self, id: &str) -> Result<usize> {
        self.chain
            .iter()
            .position(|c| c == id)
            .ok_or_else(|| ModuliError::Dynamics(crate::dynamics::DynamicsError::UnknownCritical(
                id.to_string(),
            )))
    }

    /// Polyline along the base path from critical `from` to critical `to`
    /// (walking the chain through intermediate members).
    pub fn walk(&self, from: &str, to: &str) -> Result<Vec<DVector<f64>>> {
        let a = self.chain_pos(from)?;
        let b = self.chain_pos(to)?;
        let mut out = Vec::new();
        if a <= b {
            for leg in &self.legs[a..b] {
                out.extend(leg.iter().cloned());
            }
        } else {
            for leg in self.legs[b..a].iter().rev() {
                out.extend(leg.iter().rev().cloned());
            }
        }
        if out.is_empty() {
            // from == to: a constant segment.
            let i = self.chain_pos(from)?;
            let loc = if i < self.legs.len() {
                self.legs[i].first().cloned()
            } else {
                self.legs.last().and_then(|l| l.last().cloned())
            };
            out.push(loc.unwrap_or_else(|| self.basepoint.clone()));
        }
        Ok(out)
    }
}

/// Chord-subdivided, retracted segment between two ambient points.
fn retracted_segment(
    m: &ImplicitManifold,
    a: &DVector<f64>,
    b: &DVector<f64>,
) -> Result<Vec<DVector<f64>>> {
    let dist = (b - a).norm();
    let steps = ((dist / BASE_STEP).ceil() as usize).max(2);
    let mut out = Vec::with_capacity(steps + 1);
    for i in 0..=steps {
        let t = i as f64 / steps as f64;
        let raw = a * (1.0 - t) + b * t;
        // Midpoints of near-antipodal chords can leave the retraction
        // basin; nudge off-center slightly if Newton fails.
        let p = m.retract(&m.point(raw.clone())).or_else(|_| {
            let nudged = &raw + DVector::from_element(raw.len(), 1e-3);
            m.retract(&m.point(nudged))
        })?;
        out.push(p.coords);
    }
    Ok(out)
}

/// Angle-space L-path between two torus points. Each leg runs theta first,
/// then phi, choosing wrap directions so no placed segment is crossed.
fn plan_torus_leg(
    from: TorusAngles,
    to: TorusAngles,
    placed: &mut Vec<((f64, f64), (f64, f64))>,
) -> Result<Vec<(f64, f64)>> {
    let tau = std::f64::consts::TAU;
    let wrap_options = |d: f64| -> [f64; 2] {
        let base = d.rem_euclid(tau);
        [base, base - tau]
    };
    for dt in wrap_options(to.theta - from.theta) {
        for dp in wrap_options(to.phi - from.phi) {
            // Candidate: theta leg then phi leg.
            let corner = (from.theta + dt, from.phi);
            let seg1 = ((from.theta, from.phi), corner);
            let seg2 = (corner, (from.theta + dt, from.phi + dp));
            if placed
                .iter()
                .all(|s| !segments_cross(*s, seg1) && !segments_cross(*s, seg2))
                && !segments_cross(seg1, seg2)
            {
                placed.push(seg1);
                placed.push(seg2);
                let mut pts = Vec::new();
                let n1 = ((dt.abs() / BASE_STEP).ceil() as usize).max(1);
                for i in 0..=n1 {
                    pts.push((from.theta + dt * i as f64 / n1 as f64, from.phi));
                }
                let n2 = ((dp.abs() / BASE_STEP).ceil() as usize).max(1);
                for i in 1..=n2 {
                    pts.push((from.theta + dt, from.phi + dp * i as f64 / n2 as f64));
                }
                return Ok(pts);
            }
        }
    }
    Err(ModuliError::NoBasePath)
}

/// Axis-aligned segment crossing test in the angle plane, endpoints
/// excluded (shared junctions are legitimate).
fn segments_cross(a: ((f64, f64), (f64, f64)), b: ((f64, f64), (f64, f64))) -> bool {
    let eps = 1e-9;
    let (a0, a1) = a;
    let (b0, b1) = b;
    let a_horiz = (a0.1 - a1.1).abs() < eps;
    let b_horiz = (b0.1 - b1.1).abs() < eps;
    let overlap = |lo1: f64, hi1: f64, lo2: f64, hi2: f64| -> bool {
        lo1.max(lo2) < hi1.min(hi2) - eps
    };
    let span = |x: f64, y: f64| if x < y { (x, y) } else { (y, x) };
    match (a_horiz, b_horiz) {
        (true, true) => {
            if (a0.1 - b0.1).abs() > eps {
                return false;
            }
            let (l1, h1) = span(a0.0, a1.0);
            let (l2, h2) = span(b0.0, b1.0);
            overlap(l1, h1, l2, h2)
        }
        (false, false) => {
            if (a0.0 - b0.0).abs() > eps {
                return false;
            }
            let (l1, h1) = span(a0.1, a1.1);
            let (l2, h2) = span(b0.1, b1.1);
            overlap(l1, h1, l2, h2)
        }
        (true, false) => cross_perp(a, b, eps),
        (false, true) => cross_perp(b, a, eps),
    }
}

fn cross_perp(h: ((f64, f64), (f64, f64)), v: ((f64, f64), (f64, f64)), eps: f64) -> bool {
    let y = h.0 .1;
    let x = v.0 .0;
    let (hx0, hx1) = if h.0 .0 < h.1 .0 {
        (h.0 .0, h.1 .0)
    } else {
        (h.1 .0, h.0 .0)
    };
    let (vy0, vy1) = if v.0 .1 < v.1 .1 {
        (v.0 .1, v.1 .1)
    } else {
        (v.1 .1, v.0 .1)
    };
    x > hx0 + eps && x < hx1 - eps && y > vy0 + eps && y < vy1 - eps
}

/// A flow line closed up into a based loop through the base path.
#[derive(Debug, Clone)]
pub struct LoopImage {
    /// Polyline points (closed: first == last).
    pub polyline: Vec<DVector<f64>>,
    /// Monotone nondecreasing parameter, equal to -f on flow segments.
    pub params: Vec<f64>,
    /// (source id, target id) of the underlying flow line(s).
    pub endpoints: (String, String),
}

impl LoopImage {
    pub fn is_closed(&self, tol: f64) -> bool {
        let (Some(a), Some(b)) = (self.polyline.first(), self.polyline.last()) else {
            return false;
        };
        (a - b).norm() < tol
    }

    /// Concatenation of two based loops (pointwise).
    pub fn concatenate(&self, other: &LoopImage) -> LoopImage {
        let mut polyline = self.polyline.clone();
        let mut params = self.params.clone();
        polyline.extend(other.polyline.iter().cloned());
        params.extend(other.params.iter().cloned());
        LoopImage {
            polyline,
            params,
            endpoints: (self.endpoints.0.clone(), other.endpoints.1.clone()),
        }
    }
}

/// Closes a single connecting flow line into a based loop:
/// base -> source (along w), flow line, target -> base (along w).
pub fn extract_loop(
    crits: &CriticalSet,
    base: &BasePath,
    traj: &Trajectory,
) -> Result<LoopImage> {
    let src = traj
        .alpha_limit
        .clone()
        .ok_or_else(|| ModuliError::UnresolvedLimit {
            param: 0.0,
            reason: "trajectory has no alpha limit".into(),
        })
        .or_else(|_| -> Result<String> {
            // Orbits launched from a shot point carry the source
            // implicitly: nearest critical above the first point.
            nearest_critical(crits, traj.initial())
        })?;
    let tgt = traj
        .omega_limit
        .clone()
        .ok_or_else(|| ModuliError::UnresolvedLimit {
            param: 0.0,
            reason: "trajectory has no omega limit".into(),
        })?;
    let src_pt = crits.by_id(&src)?.location.coords.clone();
    let tgt_pt = crits.by_id(&tgt)?.location.coords.clone();
    let f_src = crits.by_id(&src)?.value;
    let f_tgt = crits.by_id(&tgt)?.value;
    let base_id = base.chain.last().expect("nonempty chain").clone();

    let mut polyline: Vec<DVector<f64>> = Vec::new();
    let mut params: Vec<f64> = Vec::new();
    // Prefix: base -> source at constant parameter -f(source).
    for p in base.walk(&base_id, &src)? {
        polyline.push(p);
        params.push(-f_src);
    }
    // Flow segment, parametrized by -f: source location, points, target.
    polyline.push(src_pt);
    params.push(-f_src);
    for (p, fv) in traj.points.iter().zip(&traj.f_values) {
        polyline.push(p.coords.clone());
        params.push(-fv);
    }
    polyline.push(tgt_pt);
    params.push(-f_tgt);
    // Suffix: target -> base at constant parameter -f(target).
    for p in base.walk(&tgt, &base_id)? {
        polyline.push(p);
        params.push(-f_tgt);
    }
    // Closure is structural: both walks end at the basepoint.
    let li = LoopImage {
        polyline,
        params,
        endpoints: (src, tgt),
    };
    let gap = (li.polyline.first().expect("nonempty") - li.polyline.last().expect("nonempty"))
        .norm();
    if gap > 1e-8 {
        return Err(ModuliError::OpenLoop(gap));
    }
    Ok(li)
}

/// Loop of a broken flow line: by construction the concatenation of the
/// pieces' loops, so parameter ranges abut at the intermediate value.
pub fn extract_loop_broken(
    crits: &CriticalSet,
    base: &BasePath,
    pieces: &[&Trajectory],
) -> Result<LoopImage> {
    assert!(!pieces.is_empty());
    let mut loops = pieces
        .iter()
        .map(|t| extract_loop(crits, base, t))
        .collect::<Result<Vec<_>>>()?;
    let mut out = loops.remove(0);
    for l in loops {
        out = out.concatenate(&l);
    }
    Ok(out)
}

fn nearest_critical(crits: &CriticalSet, p: &crate::geometry::AmbientPoint) -> Result<String> {
    crits
        .points
        .iter()
        .map(|c| ((&c.location.coords - &p.coords).norm(), c.id.clone()))
        .min_by(|a, b| a.0.partial_cmp(&b.0).expect("finite distances"))
        .map(|(_, id)| id)
        .ok_or_else(|| ModuliError::UnresolvedLimit {
            param: 0.0,
            reason: "empty critical set".into(),
        })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{find_critical_points, integrate_flow, FlowConfig, FlowDirection};
    use crate::geometry::{Axis, ImplicitManifold, ScalarField};

    #[test]
    fn sphere_meridian_loop_closes_and_is_monotone() {
        let m = ImplicitManifold::sphere(2);
        let f = ScalarField::parse("f", "x3").unwrap();
        let cfg = FlowConfig::default();
        let crits = find_critical_points(&m, &f, &cfg).unwrap();
        let base = BasePath::new(&m, &crits).unwrap();
        let north = &crits.points[1];
        let x0 = m
            .retract(&m.point(&north.location.coords + &north.unstable_frame[0] * 1e-4))
            .unwrap();
        let mut t = integrate_flow(&m, &f, &x0, FlowDirection::Forward, &crits.points, &cfg)
            .unwrap();
        t.alpha_limit = Some("c1".into());
        let l = extract_loop(&crits, &base, &t).unwrap();
        assert!(l.is_closed(1e-8));
        for w in l.params.windows(2) {
            assert!(w[1] >= w[0] - 1e-12, "parameter must be nondecreasing");
        }
        assert_eq!(l.endpoints, ("c1".to_string(), "c0".to_string()));
    }

    #[test]
    fn constant_trajectory_gives_constant_loop() {
        let m = ImplicitManifold::sphere(2);
        let f = ScalarField::parse("f", "x3").unwrap();
        let cfg = FlowConfig::default();
        let crits = find_critical_points(&m, &f, &cfg).unwrap();
        let base = BasePath::new(&m, &crits).unwrap();
        let south = crits.points[0].location.clone();
        let t = integrate_flow(&m, &f, &south, FlowDirection::Forward, &crits.points, &cfg)
            .unwrap();
        let l = extract_loop(&crits, &base, &t).unwrap();
        assert!(l.is_closed(1e-8));
        // Loop stays at the basepoint: all parameters equal.
        assert!(l.params.iter().all(|&p| (p - l.params[0]).abs() < 1e-12));
    }

    #[test]
    fn torus_base_path_is_simple_and_complete() {
        let m = ImplicitManifold::torus(2.0, 1.0, Axis::Z);
        let f = ScalarField::parse("f", "x3 + 0.1*x1").unwrap();
        let cfg = FlowConfig::default();
        let crits = find_critical_points(&m, &f, &cfg).unwrap();
        let base = BasePath::new(&m, &crits).unwrap();
        assert_eq!(base.chain.len(), 4);
        assert_eq!(base.legs.len(), 3);
        for leg in &base.legs {
            assert!(leg.len() >= 2);
            for p in leg {
                assert!(m.residual(p) < 1e-8);
            }
        }
        let alt = BasePath::alternate(&m, &crits).unwrap();
        assert_ne!(alt.chain, base.chain);
    }

    #[test]
    fn broken_loop_is_pointwise_concatenation() {
        let m = ImplicitManifold::sphere(2);
        let f = ScalarField::parse("f", "x3^2 + 0.4*x1").unwrap();
        let cfg = FlowConfig::default();
        let crits = find_critical_points(&m, &f, &cfg).unwrap();
        let base = BasePath::new(&m, &crits).unwrap();
        // Piece 1: a maximum down to the saddle; piece 2: saddle to min.
        let maxp = crits.by_id("c3").unwrap();
        let x0 = m
            .retract(&m.point(&maxp.location.coords + &maxp.unstable_frame[0] * 1e-4))
            .unwrap();
        let mut t1 = integrate_flow(&m, &f, &x0, FlowDirection::Forward, &crits.points, &cfg)
            .unwrap();
        t1.alpha_limit = Some("c3".into());
        let saddle = crits.by_id("c1").unwrap();
        let y0 = m
            .retract(&m.point(&saddle.location.coords + &saddle.unstable_frame[0] * 1e-4))
            .unwrap();
        let mut t2 = integrate_flow(&m, &f, &y0, FlowDirection::Forward, &crits.points, &cfg)
            .unwrap();
        t2.alpha_limit = Some("c1".into());
        if t1.omega_limit.as_deref() == Some("c1") {
            let broken = extract_loop_broken(&crits, &base, &[&t1, &t2]).unwrap();
            let l1 = extract_loop(&crits, &base, &t1).unwrap();
            let l2 = extract_loop(&crits, &base, &t2).unwrap();
            let manual = l1.concatenate(&l2);
            assert_eq!(broken.polyline.len(), manual.polyline.len());
            for (a, b) in broken.polyline.iter().zip(&manual.polyline) {
                assert!((a - b).norm() < 1e-8);
            }
            // Parameter ranges abut at the saddle value.
            let f_saddle = -crits.by_id("c1").unwrap().value;
            assert!((l1.params.last().unwrap() - f_saddle).abs() < 1e-9);
            assert!((l2.params.first().unwrap() - f_saddle).abs() < 1e-9);
        }
    }
}
