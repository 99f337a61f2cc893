//! Negative-gradient flow integration with per-step retraction.
//!
//! The velocity field is the tangent-projected ambient gradient (negated
//! for forward flow); steps come from the Dormand-Prince 5(4) embedded
//! pair, each accepted step is retracted back onto the constraint set, and
//! termination is by basin entry: within `basin_radius` of a critical
//! point with the velocity aligned to the appropriate invariant cone.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::geometry::{AmbientPoint, ImplicitManifold, ScalarField, TOL_CONSTRAINT};

use super::config::FlowConfig;
use super::critical::CriticalPoint;
use super::{DynamicsError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FlowDirection {
    /// Follow -grad f (f decreases).
    Forward,
    /// Follow +grad f (f increases).
    Backward,
}

/// A recorded passage near a saddle: which unstable branch the trajectory
/// exited along. Transition detection keys on these.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SaddlePassage {
    pub saddle_id: String,
    /// Sign of the exit component along the saddle's unstable direction.
    pub branch: i8,
}

/// A flow line, stored in forward-flow order (f strictly decreasing along
/// `points`), regardless of the direction it was integrated in.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Trajectory {
    pub points: Vec<AmbientPoint>,
    pub f_values: Vec<f64>,
    pub alpha_limit: Option<String>,
    pub omega_limit: Option<String>,
    pub budget_exhausted: bool,
    /// Near-saddle passages in flow order.
    pub passages: Vec<SaddlePassage>,
    /// Integration time actually spent.
    pub flow_time: f64,
}

impl Trajectory {
    /// Endpoint in flow direction.
    pub fn terminal(&self) -> &AmbientPoint {
        self.points.last().expect("nonempty trajectory")
    }

    pub fn initial(&self) -> &AmbientPoint {
        self.points.first().expect("nonempty trajectory")
    }

    /// Discrete classification signature used by transition bisection.
    pub fn signature(&self) -> (Option<String>, Vec<(String, i8)>) {
        (
            self.omega_limit.clone(),
            self.passages
                .iter()
                .map(|p| (p.saddle_id.clone(), p.branch))
                .collect(),
        )
    }
}

/// Dormand-Prince 5(4) coefficients.
const A: [[f64; 6]; 6] = [
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
const B5: [f64; 7] = [
    35.0 / 384.0,
    0.0,
    500.0 / 1113.0,
    125.0 / 192.0,
    -2187.0 / 6784.0,
    11.0 / 84.0,
    0.0,
];
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

pub(crate) struct FlowField<'a> {
    pub m: &'a ImplicitManifold,
    pub f: &'a ScalarField,
}

impl FlowField<'_> {
    /// Velocity at raw ambient coordinates (projection of the gradient).
    fn velocity(&self, x: &DVector<f64>, dir: FlowDirection) -> Result<DVector<f64>> {
        let g = self.m.field_jet1(self.f, x)?.g;
        let p = self.m.point(x.clone());
        let t = self.m.tangent_project(&p, &g)?;
        Ok(match dir {
            FlowDirection::Forward => -t,
            FlowDirection::Backward => t,
        })
    }
}

struct BasinTracker<'a> {
    crits: &'a [CriticalPoint],
    cfg: &'a FlowConfig,
    dir: FlowDirection,
    passages: Vec<SaddlePassage>,
    /// Saddle currently within passage radius: (index, deepest approach,
    /// exit component at deepest approach).
    active: Option<(usize, f64)>,
}

impl<'a> BasinTracker<'a> {
    fn new(crits: &'a [CriticalPoint], cfg: &'a FlowConfig, dir: FlowDirection) -> Self {
        BasinTracker {
            crits,
            cfg,
            dir,
            passages: Vec::new(),
            active: None,
        }
    }

    /// The cone frame relevant for limit classification: incoming
    /// trajectories hug the stable manifold under forward flow and the
    /// unstable manifold under backward flow.
    fn cone<'b>(&self, c: &'b CriticalPoint) -> &'b [DVector<f64>] {
        match self.dir {
            FlowDirection::Forward => &c.stable_frame,
            FlowDirection::Backward => &c.unstable_frame,
        }
    }

    /// Checks basin entry; returns the limit's id when the trajectory is
    /// classified. Also records saddle passages.
    fn observe(&mut self, x: &DVector<f64>, v: &DVector<f64>) -> Option<String> {
        let speed = v.norm();
        for (i, c) in self.crits.iter().enumerate() {
            let dist = (x - &c.location.coords).norm();
            // Passage bookkeeping for saddles (any index strictly between
            // 0 and the top dimension behaves like a saddle here).
            let is_saddle = !c.unstable_frame.is_empty() && !c.stable_frame.is_empty();
            if is_saddle && dist < self.cfg.passage_radius {
                match &mut self.active {
                    Some((j, _)) if *j == i => {}
                    None => self.active = Some((i, dist)),
                    _ => {}
                }
            } else if let Some((j, _)) = self.active {
                if j == i && dist >= self.cfg.passage_radius {
                    // Leaving the passage ball: record the exit branch.
                    let exit = x - &c.location.coords;
                    let comp: f64 = c
                        .unstable_frame
                        .iter()
                        .map(|u| u.dot(&exit))
                        .fold(0.0, |acc, d| if d.abs() > acc.abs() { d } else { acc });
                    self.passages.push(SaddlePassage {
                        saddle_id: c.id.clone(),
                        branch: if comp >= 0.0 { 1 } else { -1 },
                    });
                    self.active = None;
                }
            }
            if dist < self.cfg.basin_radius {
                // Cone test: velocity must point along the span of the
                // relevant frame within 45 degrees.
                let cone = self.cone(c);
                if cone.is_empty() {
                    // Reaching an extremum of the wrong kind is possible
                    // only by being it; require near-zero speed.
                    if speed < self.cfg.tol_crit {
                        return Some(c.id.clone());
                    }
                    continue;
                }
                if speed < self.cfg.tol_crit {
                    return Some(c.id.clone());
                }
                let proj: f64 = cone.iter().map(|u| u.dot(v).powi(2)).sum::<f64>().sqrt();
                if proj / speed > std::f64::consts::FRAC_1_SQRT_2 {
                    return Some(c.id.clone());
                }
            }
        }
        None
    }
}

/// Integrates the flow of `f` from `x0` until basin entry or budget
/// exhaustion. The returned trajectory is in forward-flow order with
/// strictly monotone f-values.
pub fn integrate_flow(
    m: &ImplicitManifold,
    f: &ScalarField,
    x0: &AmbientPoint,
    direction: FlowDirection,
    crits: &[CriticalPoint],
    cfg: &FlowConfig,
) -> Result<Trajectory> {
    let field = FlowField { m, f };
    let x0 = m.retract(x0)?;

    // Constant trajectory at a critical point.
    let g0 = m.riemannian_gradient(f, &x0)?;
    if g0.norm() < cfg.tol_crit {
        let here = crits
            .iter()
            .find(|c| (&x0.coords - &c.location.coords).norm() < cfg.basin_radius)
            .map(|c| c.id.clone());
        let fv = f.value(x0.coords.as_slice())?;
        return Ok(Trajectory {
            points: vec![x0],
            f_values: vec![fv],
            alpha_limit: here.clone(),
            omega_limit: here,
            budget_exhausted: false,
            passages: Vec::new(),
            flow_time: 0.0,
        });
    }

    let mut tracker = BasinTracker::new(crits, cfg, direction);
    let mut x = x0.coords.clone();
    let mut fx = f.value(x.as_slice())?;
    let mut points = vec![m.point(x.clone())];
    let mut fvals = vec![fx];
    let mut h = cfg.h_init;
    let mut t = 0.0;
    let mut steps = 0usize;
    let mut limit: Option<String> = None;
    let mut budget_exhausted = false;
    let scale = m.bounding_radius();

    'outer: while steps < cfg.max_steps {
        if t > cfg.descent_budget {
            budget_exhausted = true;
            break;
        }
        // One embedded RK step with error control.
        let mut k: Vec<DVector<f64>> = Vec::with_capacity(7);
        k.push(field.velocity(&x, direction)?);
        for stage in 0..6 {
            let mut xs = x.clone();
            for (j, kj) in k.iter().enumerate() {
                let a = A[stage][j];
                if a != 0.0 {
                    xs += kj * (a * h);
                }
            }
            k.push(field.velocity(&xs, direction)?);
        }
        let mut x5 = x.clone();
        let mut x4 = x.clone();
        for (j, kj) in k.iter().enumerate() {
            if B5[j] != 0.0 {
                x5 += kj * (B5[j] * h);
            }
            if B4[j] != 0.0 {
                x4 += kj * (B4[j] * h);
            }
        }
        let err = (&x5 - &x4).norm() / (cfg.atol + cfg.rtol * scale);
        if err > 1.0 {
            h *= (0.9 * err.powf(-0.2)).clamp(0.1, 1.0);
            if h < 1e-14 * scale {
                return Err(DynamicsError::StepSizeUnderflow {
                    location: format!("{:?}", x.as_slice()),
                    steps,
                });
            }
            continue;
        }
        let next = m.retract(&m.point(x5))?;
        let fnext = f.value(next.coords.as_slice())?;
        // Monotonicity guard: reject any step that does not strictly
        // descend (ascend when backward).
        let descending = match direction {
            FlowDirection::Forward => fnext < fx,
            FlowDirection::Backward => fnext > fx,
        };
        if !descending {
            h *= 0.5;
            if h < 1e-14 * scale {
                return Err(DynamicsError::StepSizeUnderflow {
                    location: format!("{:?}", x.as_slice()),
                    steps,
                });
            }
            continue;
        }
        t += h;
        steps += 1;
        x = next.coords.clone();
        fx = fnext;
        points.push(next);
        fvals.push(fx);
        h = (h * (0.9 * err.max(1e-10).powf(-0.2)).clamp(0.2, 5.0)).min(cfg.h_max);

        let v = field.velocity(&x, direction)?;
        if let Some(id) = tracker.observe(&x, &v) {
            limit = Some(id);
            break 'outer;
        }
    }
    if steps >= cfg.max_steps {
        budget_exhausted = true;
    }

    // Canonicalize to forward-flow order.
    let (alpha, omega) = match direction {
        FlowDirection::Forward => (None, limit),
        FlowDirection::Backward => {
            points.reverse();
            fvals.reverse();
            tracker.passages.reverse();
            (limit, None)
        }
    };
    debug_assert!(points
        .iter()
        .all(|p| p.on_manifold_residual < 10.0 * TOL_CONSTRAINT));
    Ok(Trajectory {
        points,
        f_values: fvals,
        alpha_limit: alpha,
        omega_limit: omega,
        budget_exhausted,
        passages: tracker.passages,
        flow_time: t,
    })
}

/// Flows forward from `x0` until f crosses `level`, then refines the
/// crossing point onto f^{-1}(level) (within the manifold) by step-size
/// bisection. Used to place unstable-sphere samples on the level set.
pub fn flow_to_level(
    m: &ImplicitManifold,
    f: &ScalarField,
    x0: &AmbientPoint,
    level: f64,
    cfg: &FlowConfig,
) -> Result<AmbientPoint> {
    let field = FlowField { m, f };
    let mut x = m.retract(x0)?.coords;
    let mut fx = f.value(x.as_slice())?;
    if fx <= level {
        return Ok(m.point(x));
    }
    let mut h = cfg.h_init;
    let scale = m.bounding_radius();
    for _ in 0..cfg.max_steps {
        // Single forward-Euler-in-RK4 step is enough here: the level
        // refinement below controls accuracy.
        let step = |x: &DVector<f64>, h: f64| -> Result<DVector<f64>> {
            let k1 = field.velocity(x, FlowDirection::Forward)?;
            let k2 = field.velocity(&(x + &k1 * (h / 2.0)), FlowDirection::Forward)?;
            let k3 = field.velocity(&(x + &k2 * (h / 2.0)), FlowDirection::Forward)?;
            let k4 = field.velocity(&(x + &k3 * h), FlowDirection::Forward)?;
            Ok(x + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0))
        };
        let cand = m.retract(&m.point(step(&x, h)?))?;
        let fc = f.value(cand.coords.as_slice())?;
        if fc > level {
            if fc >= fx {
                h *= 0.5;
                if h < 1e-15 * scale {
                    return Err(DynamicsError::StepSizeUnderflow {
                        location: format!("{:?}", x.as_slice()),
                        steps: 0,
                    });
                }
                continue;
            }
            x = cand.coords;
            fx = fc;
            h = (h * 1.5).min(cfg.h_max);
            continue;
        }
        // Crossing bracketed in [0, h]: bisect the sub-step.
        let mut lo = 0.0;
        let mut hi = h;
        for _ in 0..80 {
            let mid = 0.5 * (lo + hi);
            let p = m.retract(&m.point(step(&x, mid)?))?;
            let fp = f.value(p.coords.as_slice())?;
            if (fp - level).abs() < 1e-13 {
                return Ok(p);
            }
            if fp > level {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let p = m.retract(&m.point(step(&x, 0.5 * (lo + hi))?))?;
        return Ok(p);
    }
    Err(DynamicsError::StepSizeUnderflow {
        location: format!("{:?}", x.as_slice()),
        steps: cfg.max_steps,
    })
}

#[cfg(test)]
mod tests {
    use super::super::critical::find_critical_points;
    use super::*;
    use crate::geometry::Axis;
    use approx::assert_abs_diff_eq;

    fn field(src: &str) -> ScalarField {
        ScalarField::parse("f", src).unwrap()
    }

    #[test]
    fn equatorial_point_descends_to_south_pole() {
        let m = ImplicitManifold::sphere(2);
        let f = field("x3");
        let cfg = FlowConfig::default();
        let crits = find_critical_points(&m, &f, &cfg).unwrap();
        let x0 = m.retract(&m.point(nalgebra::dvector![1.0, 0.0, 0.001])).unwrap();
        let t = integrate_flow(&m, &f, &x0, FlowDirection::Forward, &crits.points, &cfg)
            .unwrap();
        assert_eq!(t.omega_limit.as_deref(), Some("c0"));
        assert_eq!(t.alpha_limit, None);
        assert!(!t.budget_exhausted);
        for w in t.f_values.windows(2) {
            assert!(w[1] < w[0], "f must strictly decrease");
        }
        for p in &t.points {
            assert!(p.on_manifold_residual < 1e-9);
        }
    }

    #[test]
    fn critical_point_yields_constant_trajectory() {
        let m = ImplicitManifold::sphere(2);
        let f = field("x3");
        let cfg = FlowConfig::default();
        let crits = find_critical_points(&m, &f, &cfg).unwrap();
        let north = crits.points[1].location.clone();
        let t = integrate_flow(&m, &f, &north, FlowDirection::Forward, &crits.points, &cfg)
            .unwrap();
        assert_eq!(t.points.len(), 1);
        assert_eq!(t.omega_limit.as_deref(), Some("c1"));
        assert_eq!(t.alpha_limit.as_deref(), Some("c1"));
    }

    #[test]
    fn torus_flow_descends_monotonically() {
        let m = ImplicitManifold::torus(2.0, 1.0, Axis::Z);
        let f = field("x3 + 0.1*x1");
        let cfg = FlowConfig::default();
        let crits = find_critical_points(&m, &f, &cfg).unwrap();
        let top = &crits.points[3];
        assert_eq!(top.index, 2);
        // Nudge off the maximum along its unstable frame and flow down.
        let x0 = m
            .retract(&m.point(&top.location.coords + &top.unstable_frame[0] * 1e-4))
            .unwrap();
        let t = integrate_flow(&m, &f, &x0, FlowDirection::Forward, &crits.points, &cfg)
            .unwrap();
        assert!(t.omega_limit.is_some());
        assert_ne!(t.omega_limit.as_deref(), Some(top.id.as_str()));
        for w in t.f_values.windows(2) {
            assert!(w[1] < w[0]);
        }
    }

    #[test]
    fn backward_flow_recovers_alpha_limit() {
        // Displace along each saddle's unstable eigenvector; backward flow
        // must come back to the saddle.
        let m = ImplicitManifold::sphere(2);
        let f = field("x3^2 + 0.4*x1");
        let cfg = FlowConfig::default();
        let crits = find_critical_points(&m, &f, &cfg).unwrap();
        for c in &crits.points {
            if c.index != 1 {
                continue;
            }
            for sign in [1.0, -1.0] {
                let x0 = m
                    .retract(&m.point(&c.location.coords + &c.unstable_frame[0] * (1e-4 * sign)))
                    .unwrap();
                let t = integrate_flow(
                    &m,
                    &f,
                    &x0,
                    FlowDirection::Backward,
                    &crits.points,
                    &cfg,
                )
                .unwrap();
                assert_eq!(t.alpha_limit.as_deref(), Some(c.id.as_str()));
                // Forward-flow order: f decreasing from the saddle.
                for w in t.f_values.windows(2) {
                    assert!(w[1] < w[0]);
                }
            }
        }
    }

    #[test]
    fn tiny_budget_sets_flag() {
        let m = ImplicitManifold::sphere(2);
        let f = field("x3");
        let cfg = FlowConfig {
            descent_budget: 1e-4,
            ..FlowConfig::default()
        };
        let crits = find_critical_points(&m, &f, &FlowConfig::default()).unwrap();
        let x0 = m.retract(&m.point(nalgebra::dvector![1.0, 0.0, 0.001])).unwrap();
        let t = integrate_flow(&m, &f, &x0, FlowDirection::Forward, &crits.points, &cfg)
            .unwrap();
        assert!(t.budget_exhausted);
        assert_eq!(t.omega_limit, None);
    }

    #[test]
    fn flow_to_level_lands_on_level_set() {
        let m = ImplicitManifold::sphere(2);
        let f = field("x3");
        let cfg = FlowConfig::default();
        let x0 = m.retract(&m.point(nalgebra::dvector![0.1, 0.1, 0.99])).unwrap();
        let p = flow_to_level(&m, &f, &x0, 0.5, &cfg).unwrap();
        assert_abs_diff_eq!(f.value(p.coords.as_slice()).unwrap(), 0.5, epsilon = 1e-10);
        assert!(p.on_manifold_residual < 1e-9);
    }
}
