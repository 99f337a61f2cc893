//! Critical point search and Morse-index classification.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::geometry::{AmbientPoint, ImplicitManifold, ScalarField};

use super::config::FlowConfig;
use super::{DynamicsError, Result};

const NEWTON_ITERS: usize = 60;

/// A nondegenerate critical point of f on the manifold.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CriticalPoint {
    /// Stable identifier within a critical set ("c0", "c1", ... ordered by
    /// ascending f-value, ties by coordinates).
    pub id: String,
    pub location: AmbientPoint,
    pub value: f64,
    /// Count of negative tangential-Hessian eigenvalues.
    pub index: usize,
    /// Orthonormal ambient vectors spanning the negative eigenspace.
    pub unstable_frame: Vec<DVector<f64>>,
    /// Orthonormal ambient vectors spanning the nonnegative eigenspace.
    pub stable_frame: Vec<DVector<f64>>,
    /// Orientation token for the stable manifold: the stored stable_frame
    /// order is declared positively oriented.
    pub stable_orientation: i8,
    /// Tangential Hessian eigenvalues, ascending.
    pub eigenvalues: Vec<f64>,
}

impl CriticalPoint {
    /// Sign relating the stored unstable-frame orientation to the
    /// co-orientation induced by the stable orientation and the outward
    /// normal (surfaces only): sign of det [unstable | stable | normal].
    pub fn unstable_coorientation(&self, m: &ImplicitManifold) -> Result<f64> {
        let n = m.ambient_dim;
        let mut cols: Vec<DVector<f64>> = Vec::with_capacity(n);
        cols.extend(self.unstable_frame.iter().cloned());
        cols.extend(self.stable_frame.iter().cloned());
        cols.push(m.unit_normal(&self.location)?);
        let mat = DMatrix::from_columns(&cols);
        Ok(if mat.determinant() >= 0.0 { 1.0 } else { -1.0 } * self.stable_orientation as f64)
    }
}

/// The deduplicated critical set of a field, with audit notes.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CriticalSet {
    pub points: Vec<CriticalPoint>,
    /// Sum of (-1)^index over the set.
    pub index_sum: i64,
    /// Warnings from the Poincaré-Hopf audit and seeding.
    pub warnings: Vec<String>,
}

impl CriticalSet {
    pub fn by_id(&self, id: &str) -> Result<&CriticalPoint> {
        self.points
            .iter()
            .find(|p| p.id == id)
            .ok_or_else(|| DynamicsError::UnknownCritical(id.to_string()))
    }

    pub fn of_index(&self, index: usize) -> Vec<&CriticalPoint> {
        self.points.iter().filter(|p| p.index == index).collect()
    }

    pub fn indices(&self) -> Vec<usize> {
        let mut v: Vec<usize> = self.points.iter().map(|p| p.index).collect();
        v.sort_unstable();
        v
    }

    /// Next critical value strictly below `value`, if any.
    pub fn next_value_below(&self, value: f64) -> Option<f64> {
        self.points
            .iter()
            .map(|p| p.value)
            .filter(|v| *v < value - 1e-12)
            .fold(None, |acc, v| Some(acc.map_or(v, |a: f64| a.max(v))))
    }
}

/// One Newton iteration state for the stationarity system
/// grad f(x) = J(x)^T lambda, c(x) = 0.
fn newton_refine(
    m: &ImplicitManifold,
    f: &ScalarField,
    start: &DVector<f64>,
    cfg: &FlowConfig,
) -> Option<DVector<f64>> {
    let n = m.ambient_dim;
    let k = m.constraints.len();
    let mut x = start.clone();
    // Lagrange multipliers from least squares at the start point.
    let jac = m.constraint_jacobian(&x).ok()?;
    let grad = m.field_jet1(f, &x).ok()?.g;
    let gram = &jac * jac.transpose();
    let mut lambda = gram.clone().cholesky()?.solve(&(&jac * &grad));

    for _ in 0..NEWTON_ITERS {
        let fj = m.field_jet2(f, &x).ok()?;
        let mut cjets = Vec::with_capacity(k);
        for c in &m.constraints {
            cjets.push(m.field_jet2(c, &x).ok()?);
        }
        // Residual: [grad f - sum lambda_i grad c_i ; c]
        let mut res = DVector::zeros(n + k);
        let mut top = fj.g.clone();
        for (i, cj) in cjets.iter().enumerate() {
            top -= &cj.g * lambda[i];
        }
        res.rows_mut(0, n).copy_from(&top);
        for (i, cj) in cjets.iter().enumerate() {
            res[n + i] = cj.v;
        }
        if res.norm() < cfg.tol_crit * 1e-2 {
            return Some(x);
        }
        // Jacobian of the system.
        let mut sys = DMatrix::zeros(n + k, n + k);
        let mut hess = fj.h.clone();
        for (i, cj) in cjets.iter().enumerate() {
            hess -= &cj.h * lambda[i];
        }
        sys.view_mut((0, 0), (n, n)).copy_from(&hess);
        for (i, cj) in cjets.iter().enumerate() {
            sys.view_mut((0, n + i), (n, 1)).copy_from(&(-&cj.g));
            sys.view_mut((n + i, 0), (1, n)).copy_from(&cj.g.transpose());
        }
        let delta = sys.lu().solve(&(-res))?;
        let dx = delta.rows(0, n).into_owned();
        // Reject wild steps early; seeds outside any basin diverge fast.
        if dx.norm() > 2.0 * m.bounding_radius() {
            return None;
        }
        x += dx;
        for i in 0..k {
            lambda[i] += delta[n + i];
        }
    }
    None
}

/// Classifies a refined stationary point: projected-Hessian spectrum,
/// Morse check, frames.
fn classify(
    m: &ImplicitManifold,
    f: &ScalarField,
    coords: &DVector<f64>,
    cfg: &FlowConfig,
) -> Result<CriticalPoint> {
    let p = m.retract(&m.point(coords.clone()))?;
    let fj = m.field_jet2(f, &p.coords)?;
    let jac = m.constraint_jacobian(&p.coords)?;
    let gram = &jac * jac.transpose();
    let lambda = gram
        .cholesky()
        .ok_or_else(|| crate::geometry::GeometryError::RankDeficient {
            location: format!("{:?}", p.coords.as_slice()),
        })?
        .solve(&(&jac * &fj.g));
    // Second-order stationarity matrix restricted to the tangent space.
    let mut hess = fj.h.clone();
    for (i, c) in m.constraints.iter().enumerate() {
        let cj = m.field_jet2(c, &p.coords)?;
        hess -= &cj.h * lambda[i];
    }
    let basis = m.tangent_basis(&p)?; // N x dim, orthonormal
    let tangential = basis.transpose() * &hess * &basis;
    let sym = (&tangential + tangential.transpose()) * 0.5;
    let eig = sym.symmetric_eigen();
    let mut pairs: Vec<(f64, DVector<f64>)> = eig
        .eigenvalues
        .iter()
        .enumerate()
        .map(|(i, &ev)| (ev, eig.eigenvectors.column(i).into_owned()))
        .collect();
    pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite eigenvalues"));
    for (ev, _) in &pairs {
        if ev.abs() < cfg.tol_degenerate {
            return Err(DynamicsError::DegenerateCritical {
                location: format!("{:?}", p.coords.as_slice()),
                eigenvalue: *ev,
                tol: cfg.tol_degenerate,
            });
        }
    }
    let index = pairs.iter().filter(|(ev, _)| *ev < 0.0).count();
    let to_ambient = |v: &DVector<f64>| -> DVector<f64> { &basis * v };
    let unstable_frame: Vec<DVector<f64>> = pairs[..index]
        .iter()
        .map(|(_, v)| to_ambient(v))
        .collect();
    let stable_frame: Vec<DVector<f64>> = pairs[index..]
        .iter()
        .map(|(_, v)| to_ambient(v))
        .collect();
    let value = f.value(p.coords.as_slice())?;
    Ok(CriticalPoint {
        id: String::new(),
        location: p,
        value,
        index,
        unstable_frame,
        stable_frame,
        stable_orientation: 1,
        eigenvalues: pairs.iter().map(|(ev, _)| *ev).collect(),
    })
}

/// Finds the critical points of `f` on `m` by Newton refinement from a
/// dense ambient grid, deduplicates, classifies indices, and audits the
/// index sum against the catalog Euler characteristic.
pub fn find_critical_points(
    m: &ImplicitManifold,
    f: &ScalarField,
    cfg: &FlowConfig,
) -> Result<CriticalSet> {
    let n = m.ambient_dim;
    let l = m.bounding_radius();
    let density = cfg.seed_grid_density.max(2);
    let mut seeds: Vec<DVector<f64>> = Vec::new();
    let mut idx = vec![0usize; n];
    loop {
        let coords: Vec<f64> = idx
            .iter()
            .map(|&i| -l + 2.0 * l * (i as f64 + 0.5) / density as f64)
            .collect();
        seeds.push(DVector::from_vec(coords));
        let mut carry = 0;
        loop {
            idx[carry] += 1;
            if idx[carry] < density {
                break;
            }
            idx[carry] = 0;
            carry += 1;
            if carry == n {
                break;
            }
        }
        if carry == n {
            break;
        }
    }

    // Retraction basin filter plus Newton refinement, in parallel. Results
    // are merged in seed order, so the outcome is deterministic.
    let found: Vec<DVector<f64>> = seeds
        .par_iter()
        .filter_map(|s| {
            let p = m.retract(&m.point(s.clone())).ok()?;
            newton_refine(m, f, &p.coords, cfg)
        })
        .collect();

    let mut distinct: Vec<DVector<f64>> = Vec::new();
    for x in found {
        if m.residual(&x) > 1e-6 {
            continue;
        }
        if distinct
            .iter()
            .all(|y| (&x - y).norm() > cfg.dedup_distance())
        {
            distinct.push(x);
        }
    }
    if distinct.is_empty() {
        return Err(DynamicsError::NoCriticalPoints(density));
    }

    let mut points = Vec::with_capacity(distinct.len());
    for x in &distinct {
        points.push(classify(m, f, x, cfg)?);
    }
    // Stable ids: ascending value, then lexicographic coordinates.
    points.sort_by(|a, b| {
        a.value
            .partial_cmp(&b.value)
            .expect("finite values")
            .then_with(|| {
                a.location
                    .coords
                    .as_slice()
                    .partial_cmp(b.location.coords.as_slice())
                    .expect("finite coordinates")
            })
    });
    for (i, p) in points.iter_mut().enumerate() {
        p.id = format!("c{i}");
    }

    let index_sum: i64 = points
        .iter()
        .map(|p| if p.index % 2 == 0 { 1 } else { -1 })
        .sum();
    let mut warnings = Vec::new();
    if let Some(chi) = m.euler_characteristic() {
        if index_sum != chi {
            warnings.push(format!(
                "index sum {index_sum} differs from Euler characteristic {chi}: \
                 critical points are likely missing (grid density {density})"
            ));
        }
    }
    // Gradient-norm invariant check, recorded rather than silently trusted.
    for p in &points {
        let g = m.riemannian_gradient(f, &p.location)?;
        if g.norm() >= cfg.tol_crit {
            warnings.push(format!(
                "critical point {} has Riemannian gradient norm {:.3e}",
                p.id,
                g.norm()
            ));
        }
    }
    Ok(CriticalSet {
        points,
        index_sum,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Axis;
    use approx::assert_abs_diff_eq;

    fn field(src: &str) -> ScalarField {
        ScalarField::parse("f", src).unwrap()
    }

    #[test]
    fn sphere_height_has_two_poles() {
        let m = ImplicitManifold::sphere(2);
        let cs = find_critical_points(&m, &field("x3"), &FlowConfig::default()).unwrap();
        assert_eq!(cs.points.len(), 2);
        assert!(cs.warnings.is_empty(), "{:?}", cs.warnings);
        let south = &cs.points[0];
        let north = &cs.points[1];
        assert_eq!(south.index, 0);
        assert_eq!(north.index, 2);
        assert_abs_diff_eq!(south.value, -1.0, epsilon = 1e-9);
        assert_abs_diff_eq!(north.value, 1.0, epsilon = 1e-9);
        assert_abs_diff_eq!(
            (&north.location.coords - DVector::from_vec(vec![0.0, 0.0, 1.0])).norm(),
            0.0,
            epsilon = 1e-8
        );
        assert_eq!(cs.index_sum, 2);
    }

    #[test]
    fn bumpy_sphere_has_four_points() {
        // Height-squared plus a pull toward +x1: two near-polar maxima, a
        // saddle at (1,0,0), the minimum at (-1,0,0).
        let m = ImplicitManifold::sphere(2);
        let cs = find_critical_points(&m, &field("x3^2 + 0.4*x1"), &FlowConfig::default())
            .unwrap();
        assert_eq!(cs.indices(), vec![0, 1, 2, 2]);
        assert!(cs.warnings.is_empty(), "{:?}", cs.warnings);
        assert_eq!(cs.index_sum, 2);
        let min = &cs.points[0];
        assert_abs_diff_eq!(min.location.coords[0], -1.0, epsilon = 1e-8);
        let saddle = cs.of_index(1)[0];
        assert_abs_diff_eq!(saddle.location.coords[0], 1.0, epsilon = 1e-8);
    }

    #[test]
    fn tilted_torus_has_four_points() {
        let m = ImplicitManifold::torus(2.0, 1.0, Axis::Z);
        let cs = find_critical_points(&m, &field("x3 + 0.1*x1"), &FlowConfig::default())
            .unwrap();
        assert_eq!(cs.indices(), vec![0, 1, 1, 2]);
        assert_eq!(cs.index_sum, 0);
        assert!(cs.warnings.is_empty(), "{:?}", cs.warnings);
    }

    #[test]
    fn upright_torus_height_has_four_points() {
        let m = ImplicitManifold::torus(2.0, 1.0, Axis::X);
        let cs = find_critical_points(&m, &field("x3"), &FlowConfig::default()).unwrap();
        assert_eq!(cs.indices(), vec![0, 1, 1, 2]);
        // Heights are -(R+r), -(R-r), R-r, R+r.
        let values: Vec<f64> = cs.points.iter().map(|p| p.value).collect();
        for (got, want) in values.iter().zip([-3.0, -1.0, 1.0, 3.0]) {
            assert_abs_diff_eq!(*got, want, epsilon = 1e-8);
        }
    }

    #[test]
    fn flat_torus_height_is_degenerate() {
        // Height on the flat torus is constant on two whole circles; the
        // Morse condition fails and is reported as such.
        let m = ImplicitManifold::torus(2.0, 1.0, Axis::Z);
        let r = find_critical_points(&m, &field("x3"), &FlowConfig::default());
        assert!(matches!(r, Err(DynamicsError::DegenerateCritical { .. })));
    }

    #[test]
    fn index_invariant_under_tolerance_halving() {
        let m = ImplicitManifold::sphere(2);
        let cfg = FlowConfig::default();
        let a = find_critical_points(&m, &field("x3^2 + 0.4*x1"), &cfg).unwrap();
        let b = find_critical_points(&m, &field("x3^2 + 0.4*x1"), &cfg.halved_tolerances())
            .unwrap();
        assert_eq!(a.indices(), b.indices());
    }

    #[test]
    fn frames_are_orthonormal_and_complete() {
        let m = ImplicitManifold::torus(2.0, 1.0, Axis::Z);
        let cs = find_critical_points(&m, &field("x3 + 0.1*x1"), &FlowConfig::default())
            .unwrap();
        for p in &cs.points {
            assert_eq!(p.index + p.stable_frame.len(), m.dim);
            for v in p.unstable_frame.iter().chain(&p.stable_frame) {
                assert_abs_diff_eq!(v.norm(), 1.0, epsilon = 1e-8);
            }
            if p.index == 1 {
                let u = &p.unstable_frame[0];
                let s = &p.stable_frame[0];
                assert_abs_diff_eq!(u.dot(s), 0.0, epsilon = 1e-8);
            }
        }
    }
}
