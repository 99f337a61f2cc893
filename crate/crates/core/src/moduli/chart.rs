//! Unstable-sphere charts and the circle scan locating connecting orbits.

use std::collections::BTreeMap;

use nalgebra::DVector;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{
    integrate_flow, CriticalPoint, CriticalSet, FlowConfig, FlowDirection, Trajectory,
};
use crate::geometry::{AmbientPoint, ImplicitManifold, ScalarField};

use super::{ModuliError, Result};

/// Parameter on the unstable sphere of a critical point: two signs for an
/// index-1 source, an angle for an index-2 source.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ChartParam {
    Branch(i8),
    Angle(f64),
}

impl ChartParam {
    pub fn as_angle(&self) -> Option<f64> {
        match self {
            ChartParam::Angle(a) => Some(*a),
            ChartParam::Branch(_) => None,
        }
    }
}

/// Samples of the unstable sphere of `owner` pushed down to the level set
/// f^{-1}(level).
#[derive(Debug, Clone)]
pub struct UnstableSphereChart {
    pub owner: String,
    pub level: f64,
    pub radius: f64,
    pub samples: Vec<(ChartParam, AmbientPoint)>,
}

/// A refined discontinuity of the omega-limit map on the unstable circle:
/// the parameter of a connecting orbit to a saddle.
#[derive(Debug, Clone)]
pub struct Transition {
    pub theta: f64,
    /// Intermediate critical point reached at this parameter.
    pub target: String,
    /// Exit branch recorded in the last refined sample on each side.
    pub branch_below: i8,
    pub branch_above: i8,
    /// The connecting orbit itself.
    pub trajectory: Trajectory,
}

/// Scan of the unstable circle of an index-2 critical point: per-sample
/// omega limits plus the refined transition parameters between them.
#[derive(Debug, Clone)]
pub struct CircleScan {
    pub owner: String,
    pub level: f64,
    /// (theta, omega limit id) at scan resolution, theta ascending.
    pub samples: Vec<(f64, Option<String>)>,
    /// Refined transitions sorted by theta.
    pub transitions: Vec<Transition>,
}

/// Shared state for moduli computations on one scene: geometry, field,
/// critical set, config, plus eagerly computed circle scans for every
/// index-2 critical point. Immutable after construction.
pub struct ModuliContext<'a> {
    pub m: &'a ImplicitManifold,
    pub f: &'a ScalarField,
    pub crits: &'a CriticalSet,
    pub cfg: &'a FlowConfig,
    scans: BTreeMap<String, CircleScan>,
}

impl<'a> ModuliContext<'a> {
    pub fn new(
        m: &'a ImplicitManifold,
        f: &'a ScalarField,
        crits: &'a CriticalSet,
        cfg: &'a FlowConfig,
    ) -> Result<Self> {
        if m.dim != 2 {
            return Err(ModuliError::NotASurface(m.dim));
        }
        let mut scans = BTreeMap::new();
        for c in &crits.points {
            if c.index == 2 {
                scans.insert(c.id.clone(), scan_circle(m, f, crits, c, cfg)?);
            }
        }
        Ok(ModuliContext {
            m,
            f,
            crits,
            cfg,
            scans,
        })
    }

    pub fn scan(&self, owner: &str) -> Option<&CircleScan> {
        self.scans.get(owner)
    }

    /// Level-set value for the unstable sphere of `c`: a fixed fraction of
    /// the drop to the next lower critical value.
    pub fn chart_level(&self, c: &CriticalPoint) -> f64 {
        chart_level(self.crits, c, self.cfg)
    }

    /// Shot point on the unstable sphere of an index-2 point.
    pub fn shoot(&self, c: &CriticalPoint, theta: f64) -> Result<AmbientPoint> {
        Ok(shoot_angle(self.m, c, theta, self.cfg)?)
    }

    /// Separatrix trajectory of an index-1 point along the given branch.
    pub fn separatrix(&self, c: &CriticalPoint, branch: i8) -> Result<Trajectory> {
        let x0 = self.m.retract(&self.m.point(
            &c.location.coords + &c.unstable_frame[0] * (self.cfg.shoot_radius * branch as f64),
        ))?;
        Ok(integrate_flow(
            self.m,
            self.f,
            &x0,
            FlowDirection::Forward,
            &self.crits.points,
            self.cfg,
        )?)
    }

    /// Builds the level-set chart of the unstable sphere (samples verified
    /// to lie on f^{-1}(level)).
    pub fn chart(&self, owner: &str) -> Result<UnstableSphereChart> {
        let c = self.crits.by_id(owner)?;
        let level = self.chart_level(c);
        let mut samples = Vec::new();
        match c.index {
            1 => {
                for branch in [1i8, -1] {
                    let t = self.separatrix(c, branch)?;
                    let p = crate::dynamics::flow_to_level(
                        self.m, self.f, t.initial(), level, self.cfg,
                    )?;
                    samples.push((ChartParam::Branch(branch), p));
                }
            }
            2 => {
                let res = self.cfg.chart_resolution.min(64);
                for k in 0..res {
                    let theta = std::f64::consts::TAU * k as f64 / res as f64;
                    let x0 = self.shoot(c, theta)?;
                    let p = crate::dynamics::flow_to_level(
                        self.m, self.f, &x0, level, self.cfg,
                    )?;
                    samples.push((ChartParam::Angle(theta), p));
                }
            }
            _ => {
                return Err(ModuliError::WrongIndexDifference {
                    got: c.index as i64,
                    want: 1,
                    context: "unstable sphere chart",
                })
            }
        }
        Ok(UnstableSphereChart {
            owner: owner.to_string(),
            level,
            radius: self.cfg.shoot_radius,
            samples,
        })
    }
}

fn chart_level(crits: &CriticalSet, c: &CriticalPoint, cfg: &FlowConfig) -> f64 {
    let below = crits.next_value_below(c.value).unwrap_or(c.value - 1.0);
    c.value - cfg.level_fraction * (c.value - below)
}

fn shoot_angle(
    m: &ImplicitManifold,
    c: &CriticalPoint,
    theta: f64,
    cfg: &FlowConfig,
) -> crate::geometry::Result<AmbientPoint> {
    let dir = &c.unstable_frame[0] * theta.cos() + &c.unstable_frame[1] * theta.sin();
    m.retract(&m.point(&c.location.coords + dir * cfg.shoot_radius))
}

fn classify(
    m: &ImplicitManifold,
    f: &ScalarField,
    crits: &CriticalSet,
    c: &CriticalPoint,
    theta: f64,
    cfg: &FlowConfig,
) -> Result<Trajectory> {
    let x0 = shoot_angle(m, c, theta, cfg)?;
    let t = integrate_flow(m, f, &x0, FlowDirection::Forward, &crits.points, cfg)?;
    if t.omega_limit.is_none() {
        return Err(ModuliError::UnresolvedLimit {
            param: theta,
            reason: "flow budget exhausted before basin entry".into(),
        });
    }
    Ok(t)
}

/// Scans the unstable circle of an index-2 critical point, locating every
/// signature discontinuity by bisection. Genuine transitions converge onto
/// an orbit whose omega limit is a saddle; signature changes that come
/// only from grazing the passage radius refine to a same-limit bracket and
/// are discarded.
fn scan_circle(
    m: &ImplicitManifold,
    f: &ScalarField,
    crits: &CriticalSet,
    c: &CriticalPoint,
    cfg: &FlowConfig,
) -> Result<CircleScan> {
    let level = chart_level(crits, c, cfg);
    let res = cfg.chart_resolution;
    let thetas: Vec<f64> = (0..res)
        .map(|k| std::f64::consts::TAU * k as f64 / res as f64)
        .collect();
    let trajs: Vec<Trajectory> = thetas
        .par_iter()
        .map(|&t| classify(m, f, crits, c, t, cfg))
        .collect::<Result<Vec<_>>>()?;
    let samples: Vec<(f64, Option<String>)> = thetas
        .iter()
        .zip(&trajs)
        .map(|(&t, tr)| (t, tr.omega_limit.clone()))
        .collect();

    let mut transitions = Vec::new();
    for k in 0..res {
        let k1 = (k + 1) % res;
        let sig_lo = trajs[k].signature();
        let sig_hi = trajs[k1].signature();
        if sig_lo == sig_hi {
            continue;
        }
        let mut lo = thetas[k];
        let mut hi = thetas[k] + std::f64::consts::TAU / res as f64;
        let mut sig_lo = sig_lo;
        let mut sig_hi = sig_hi;
        let mut traj_lo = trajs[k].clone();
        let mut traj_hi = trajs[k1].clone();
        while hi - lo > cfg.bisect_tol {
            let mid = 0.5 * (lo + hi);
            let t = classify(m, f, crits, c, mid, cfg)?;
            let sig = t.signature();
            if sig == sig_lo {
                lo = mid;
                traj_lo = t;
            } else {
                hi = mid;
                sig_hi = sig;
                traj_hi = t;
            }
        }
        // Pick the connecting orbit: a bracket end whose omega limit is an
        // intermediate (saddle) critical point.
        let saddle_of = |tr: &Trajectory| -> Option<String> {
            tr.omega_limit.as_ref().and_then(|id| {
                let t = crits.by_id(id).ok()?;
                (t.index == 1).then(|| id.clone())
            })
        };
        let chosen = if let Some(target) = saddle_of(&traj_hi) {
            Some((hi, target, traj_hi.clone()))
        } else if let Some(target) = saddle_of(&traj_lo) {
            Some((lo, target, traj_lo.clone()))
        } else {
            None
        };
        let Some((theta_star, target, trajectory)) = chosen else {
            // Same omega limit on both sides: a passage-radius artifact,
            // not a stable-manifold crossing.
            if sig_lo.0 == sig_hi.0 {
                continue;
            }
            return Err(ModuliError::UnresolvedLimit {
                param: 0.5 * (lo + hi),
                reason: format!(
                    "limits {:?} vs {:?} across an unresolvable bracket",
                    sig_lo.0, sig_hi.0
                ),
            });
        };
        // Exit branches on either side of the connecting orbit, probed at
        // geometrically growing offsets: very close to the transition the
        // flow terminates at the saddle itself and records no passage.
        let probe_branch = |side: f64| -> Result<i8> {
            let mut offset = 10.0 * cfg.bisect_tol;
            let spacing = std::f64::consts::TAU / res as f64;
            while offset < spacing {
                let t = classify(m, f, crits, c, theta_star + side * offset, cfg)?;
                if t.omega_limit.as_deref() != Some(target.as_str()) {
                    if let Some((_, b)) = t
                        .passages
                        .iter()
                        .rev()
                        .map(|p| (p.saddle_id.clone(), p.branch))
                        .find(|(id, _)| *id == target)
                    {
                        return Ok(b);
                    }
                }
                offset *= 8.0;
            }
            Err(ModuliError::UnresolvedLimit {
                param: theta_star,
                reason: format!("no recorded passage of {target} beside the transition"),
            })
        };
        let branch_below = probe_branch(-1.0)?;
        let branch_above = probe_branch(1.0)?;
        if branch_below == branch_above {
            return Err(ModuliError::UnresolvedLimit {
                param: theta_star,
                reason: format!("exit branch of {target} does not flip across the transition"),
            });
        }
        transitions.push(Transition {
            theta: theta_star.rem_euclid(std::f64::consts::TAU),
            target,
            branch_below,
            branch_above,
            trajectory,
        });
    }
    transitions.sort_by(|a, b| a.theta.partial_cmp(&b.theta).expect("finite angles"));
    // Orbits must be separated well beyond the bisection tolerance.
    for w in transitions.windows(2) {
        if (w[1].theta - w[0].theta).abs() < 10.0 * cfg.bisect_tol {
            return Err(ModuliError::UnresolvedLimit {
                param: w[0].theta,
                reason: "two transitions within bisection tolerance".into(),
            });
        }
    }
    Ok(CircleScan {
        owner: c.id.clone(),
        level,
        samples,
        transitions,
    })
}
