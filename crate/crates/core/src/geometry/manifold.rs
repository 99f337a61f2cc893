//! Implicit submanifolds of Euclidean space: constraint zero sets with
//! tangent projection and Newton retraction.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::expr::ScalarField;
use super::jet::{Jet1, Jet2};
use super::{GeometryError, Result, TOL_CONSTRAINT};

const MAX_NEWTON_ITERS: usize = 60;
const RANK_TOL: f64 = 1e-9;

/// Revolution axis of the catalog torus.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    /// Donut lying flat: tube circles around the x3 axis.
    #[default]
    Z,
    /// Upright wheel: tube circles around the x1 axis.
    X,
}

/// A point of the ambient space with its recorded constraint residual.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AmbientPoint {
    pub coords: DVector<f64>,
    /// max_i |c_i| at construction time; never silently discarded.
    pub on_manifold_residual: f64,
}

impl AmbientPoint {
    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn distance(&self, other: &AmbientPoint) -> f64 {
        (&self.coords - &other.coords).norm()
    }
}

/// Torus angle coordinates (used by winding computations).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TorusAngles {
    /// Angle around the revolution axis.
    pub theta: f64,
    /// Angle around the tube.
    pub phi: f64,
}

/// Identifies a bundled manifold so that scene code can use closed-form
/// knowledge (Euler characteristic, angle charts, seeding boxes).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum CatalogId {
    /// Round S^n = { |x|^2 = 1 } in R^{n+1}.
    Sphere { dim: usize },
    /// Embedded torus of revolution, R > r > 0.
    Torus { big_r: f64, small_r: f64, axis: Axis },
}

/// A submanifold of R^N cut out by k constraint fields; dim = N - k.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ImplicitManifold {
    pub ambient_dim: usize,
    pub constraints: Vec<ScalarField>,
    pub dim: usize,
    pub catalog_id: Option<CatalogId>,
}

impl ImplicitManifold {
    pub fn new(ambient_dim: usize, constraints: Vec<ScalarField>) -> Self {
        let dim = ambient_dim - constraints.len();
        ImplicitManifold {
            ambient_dim,
            constraints,
            dim,
            catalog_id: None,
        }
    }

    /// Round sphere S^n in R^{n+1}.
    pub fn sphere(dim: usize) -> Self {
        let n = dim + 1;
        let src = (1..=n)
            .map(|i| format!("x{i}^2"))
            .collect::<Vec<_>>()
            .join(" + ")
            + " - 1";
        let c = ScalarField::parse("sphere", &src).expect("catalog expression");
        let mut m = ImplicitManifold::new(n, vec![c]);
        m.catalog_id = Some(CatalogId::Sphere { dim });
        m
    }

    /// Torus of revolution in R^3 with the given axis.
    pub fn torus(big_r: f64, small_r: f64, axis: Axis) -> Self {
        assert!(big_r > small_r && small_r > 0.0, "torus needs R > r > 0");
        let src = match axis {
            Axis::Z => format!("(sqrt(x1^2 + x2^2) - {big_r})^2 + x3^2 - {}", small_r * small_r),
            Axis::X => format!("(sqrt(x2^2 + x3^2) - {big_r})^2 + x1^2 - {}", small_r * small_r),
        };
        let c = ScalarField::parse("torus", &src).expect("catalog expression");
        let mut m = ImplicitManifold::new(3, vec![c]);
        m.catalog_id = Some(CatalogId::Torus {
            big_r,
            small_r,
            axis,
        });
        m
    }

    /// Euler characteristic, when the catalog knows it.
    pub fn euler_characteristic(&self) -> Option<i64> {
        match self.catalog_id {
            Some(CatalogId::Sphere { dim }) => Some(if dim % 2 == 0 { 2 } else { 0 }),
            Some(CatalogId::Torus { .. }) => Some(0),
            None => None,
        }
    }

    /// Half-width of an ambient box guaranteed to contain the manifold.
    pub fn bounding_radius(&self) -> f64 {
        match self.catalog_id {
            Some(CatalogId::Sphere { .. }) => 1.2,
            Some(CatalogId::Torus { big_r, small_r, .. }) => 1.1 * (big_r + small_r),
            None => 2.0,
        }
    }

    /// Angle chart of the catalog torus at an ambient point.
    pub fn torus_angles(&self, coords: &DVector<f64>) -> Option<TorusAngles> {
        match self.catalog_id {
            Some(CatalogId::Torus { big_r, axis, .. }) => {
                let (a, b, c) = match axis {
                    Axis::Z => (coords[0], coords[1], coords[2]),
                    Axis::X => (coords[1], coords[2], coords[0]),
                };
                let rho = (a * a + b * b).sqrt();
                Some(TorusAngles {
                    theta: b.atan2(a),
                    phi: c.atan2(rho - big_r),
                })
            }
            _ => None,
        }
    }

    /// Inverse of the angle chart (catalog torus only).
    pub fn torus_point(&self, angles: TorusAngles) -> Option<AmbientPoint> {
        match self.catalog_id {
            Some(CatalogId::Torus {
                big_r,
                small_r,
                axis,
            }) => {
                let rho = big_r + small_r * angles.phi.cos();
                let (a, b, c) = (
                    rho * angles.theta.cos(),
                    rho * angles.theta.sin(),
                    small_r * angles.phi.sin(),
                );
                let coords = match axis {
                    Axis::Z => DVector::from_vec(vec![a, b, c]),
                    Axis::X => DVector::from_vec(vec![c, a, b]),
                };
                Some(self.point(coords))
            }
            _ => None,
        }
    }

    /// Max constraint residual at raw coordinates.
    pub fn residual(&self, coords: &DVector<f64>) -> f64 {
        self.constraints
            .iter()
            .map(|c| c.value(coords.as_slice()).map_or(f64::INFINITY, f64::abs))
            .fold(0.0, f64::max)
    }

    /// Wraps coordinates into an [`AmbientPoint`], recording the residual.
    pub fn point(&self, coords: DVector<f64>) -> AmbientPoint {
        let r = self.residual(&coords);
        AmbientPoint {
            coords,
            on_manifold_residual: r,
        }
    }

    pub fn on_manifold(&self, p: &AmbientPoint) -> bool {
        self.residual(&p.coords) < TOL_CONSTRAINT
    }

    /// Constraint Jacobian, k rows of ambient gradients.
    pub fn constraint_jacobian(&self, coords: &DVector<f64>) -> Result<DMatrix<f64>> {
        let n = self.ambient_dim;
        let mut jac = DMatrix::zeros(self.constraints.len(), n);
        let seeds = Jet1::seed(coords.as_slice());
        for (i, c) in self.constraints.iter().enumerate() {
            let jet = c.eval_jet_arith(&seeds)?;
            jac.row_mut(i).copy_from(&jet.g.transpose());
        }
        Ok(jac)
    }

    /// Orthogonal projection of an ambient vector onto the tangent space at
    /// `p`: the result is orthogonal to every constraint gradient and the
    /// removed part lies in their span.
    pub fn tangent_project(&self, p: &AmbientPoint, v: &DVector<f64>) -> Result<DVector<f64>> {
        let jac = self.constraint_jacobian(&p.coords)?;
        let gram = &jac * jac.transpose();
        let k = self.constraints.len();
        let chol = gram.clone().cholesky().ok_or_else(|| {
            GeometryError::RankDeficient {
                location: format!("{:?}", p.coords.as_slice()),
            }
        })?;
        // Cholesky succeeds on positive-definite Gram matrices only, but
        // near-singular ones can still slip through; check conditioning.
        let diag_min = (0..k).map(|i| chol.l()[(i, i)]).fold(f64::MAX, f64::min);
        if diag_min < RANK_TOL {
            return Err(GeometryError::RankDeficient {
                location: format!("{:?}", p.coords.as_slice()),
            });
        }
        let lambda = chol.solve(&(&jac * v));
        Ok(v - jac.transpose() * lambda)
    }

    /// Orthonormal basis of the tangent space at `p` (N x dim matrix),
    /// from the eigendecomposition of the tangent projector.
    pub fn tangent_basis(&self, p: &AmbientPoint) -> Result<DMatrix<f64>> {
        let jac = self.constraint_jacobian(&p.coords)?;
        let n = self.ambient_dim;
        let k = self.constraints.len();
        let gram = &jac * jac.transpose();
        let chol = gram.cholesky().ok_or_else(|| GeometryError::RankDeficient {
            location: format!("{:?}", p.coords.as_slice()),
        })?;
        let proj = DMatrix::identity(n, n) - jac.transpose() * chol.solve(&jac);
        let eig = proj.symmetric_eigen();
        let mut cols: Vec<(f64, DVector<f64>)> = eig
            .eigenvalues
            .iter()
            .enumerate()
            .map(|(i, &ev)| (ev, eig.eigenvectors.column(i).into_owned()))
            .collect();
        // Projector eigenvalues split into k zeros and dim ones.
        cols.sort_by(|a, b| b.0.partial_cmp(&a.0).expect("finite eigenvalues"));
        if cols[self.dim - 1].0 < 0.5 || cols.get(self.dim).is_some_and(|c| c.0 > 0.5) {
            return Err(GeometryError::RankDeficient {
                location: format!("{:?}", p.coords.as_slice()),
            });
        }
        let _ = k;
        let basis_cols: Vec<DVector<f64>> =
            cols[..self.dim].iter().map(|(_, v)| v.clone()).collect();
        Ok(DMatrix::from_columns(&basis_cols))
    }

    /// Newton retraction onto the constraint zero set. Displacement stays in
    /// the constraint-gradient span up to tolerance; idempotent on points
    /// already on the manifold.
    pub fn retract(&self, p: &AmbientPoint) -> Result<AmbientPoint> {
        let mut x = p.coords.clone();
        let k = self.constraints.len();
        for it in 0..MAX_NEWTON_ITERS {
            let mut c = DVector::zeros(k);
            for (i, field) in self.constraints.iter().enumerate() {
                c[i] = field.value(x.as_slice())?;
            }
            let res = c.amax();
            if res < TOL_CONSTRAINT {
                return Ok(AmbientPoint {
                    coords: x,
                    on_manifold_residual: res,
                });
            }
            let jac = self.constraint_jacobian(&x)?;
            let gram = &jac * jac.transpose();
            let chol = gram.cholesky().ok_or(GeometryError::NoConvergence {
                iters: it,
                residual: res,
            })?;
            let lambda = chol.solve(&c);
            x -= jac.transpose() * lambda;
        }
        Err(GeometryError::NoConvergence {
            iters: MAX_NEWTON_ITERS,
            residual: self.residual(&x),
        })
    }

    /// Value, ambient gradient and ambient Hessian of a field at `p`.
    pub fn field_jet2(&self, field: &ScalarField, coords: &DVector<f64>) -> Result<Jet2> {
        field.eval_jet_arith(&Jet2::seed(coords.as_slice()))
    }

    /// Value and ambient gradient of a field at raw coordinates.
    pub fn field_jet1(&self, field: &ScalarField, coords: &DVector<f64>) -> Result<Jet1> {
        field.eval_jet_arith(&Jet1::seed(coords.as_slice()))
    }

    /// Riemannian gradient: tangent projection of the ambient gradient.
    pub fn riemannian_gradient(
        &self,
        field: &ScalarField,
        p: &AmbientPoint,
    ) -> Result<DVector<f64>> {
        let jet = self.field_jet1(field, &p.coords)?;
        self.tangent_project(p, &jet.g)
    }

    /// Outward unit normal for surfaces cut out by a single constraint.
    pub fn unit_normal(&self, p: &AmbientPoint) -> Result<DVector<f64>> {
        let jac = self.constraint_jacobian(&p.coords)?;
        let g = jac.row(0).transpose();
        let n = g.norm();
        if n < RANK_TOL {
            return Err(GeometryError::RankDeficient {
                location: format!("{:?}", p.coords.as_slice()),
            });
        }
        Ok(g / n)
    }
}

/// Returns (value, gradient, Hessian) of `field` at `p` up to the requested
/// order; entries beyond the order are `None`.
pub fn eval_jet(
    field: &ScalarField,
    p: &AmbientPoint,
    order: u8,
) -> Result<(f64, Option<DVector<f64>>, Option<DMatrix<f64>>)> {
    match order {
        0 => Ok((field.value(p.coords.as_slice())?, None, None)),
        1 => {
            let j = field.eval_jet_arith(&Jet1::seed(p.coords.as_slice()))?;
            Ok((j.v, Some(j.g), None))
        }
        _ => {
            let j = field.eval_jet_arith(&Jet2::seed(p.coords.as_slice()))?;
            Ok((j.v, Some(j.g), Some(j.h)))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn vecd(v: &[f64]) -> DVector<f64> {
        DVector::from_vec(v.to_vec())
    }

    #[test]
    fn eval_jet_examples() {
        let s2 = ImplicitManifold::sphere(2);
        let f = ScalarField::parse("f", "x3").unwrap();
        let p = s2.point(vecd(&[0.0, 0.0, 1.0]));
        let (v, g, h) = eval_jet(&f, &p, 2).unwrap();
        assert_eq!(v, 1.0);
        assert_eq!(g.unwrap(), vecd(&[0.0, 0.0, 1.0]));
        assert_eq!(h.unwrap(), DMatrix::zeros(3, 3));

        let q = ScalarField::parse("q", "x1^2 + x2^2").unwrap();
        let p = s2.point(vecd(&[1.0, 1.0, 0.0]));
        let (v, g, h) = eval_jet(&q, &p, 2).unwrap();
        assert_eq!(v, 2.0);
        assert_eq!(g.unwrap(), vecd(&[2.0, 2.0, 0.0]));
        let h = h.unwrap();
        assert_eq!((h[(0, 0)], h[(1, 1)], h[(2, 2)]), (2.0, 2.0, 0.0));
    }

    #[test]
    fn torus_constraint_vanishes_on_torus() {
        let t = ImplicitManifold::torus(2.0, 1.0, Axis::Z);
        let p = vecd(&[3.0, 0.0, 0.0]);
        assert_abs_diff_eq!(t.constraints[0].value(p.as_slice()).unwrap(), 0.0);
        // The torus axis is a genuine non-smooth locus for the constraint.
        let axis = t.point(vecd(&[0.0, 0.0, 0.0]));
        assert!(t.constraint_jacobian(&axis.coords).is_err());
    }

    #[test]
    fn tangent_project_sphere_examples() {
        let s2 = ImplicitManifold::sphere(2);
        let north = s2.point(vecd(&[0.0, 0.0, 1.0]));
        let w = s2.tangent_project(&north, &vecd(&[1.0, 0.0, 0.0])).unwrap();
        assert_abs_diff_eq!((w - vecd(&[1.0, 0.0, 0.0])).norm(), 0.0, epsilon = 1e-14);
        let w = s2.tangent_project(&north, &vecd(&[0.0, 0.0, 5.0])).unwrap();
        assert_abs_diff_eq!(w.norm(), 0.0, epsilon = 1e-14);
        let equator = s2.point(vecd(&[1.0, 0.0, 0.0]));
        let w = s2.tangent_project(&equator, &vecd(&[0.0, 0.0, 1.0])).unwrap();
        assert_abs_diff_eq!((w - vecd(&[0.0, 0.0, 1.0])).norm(), 0.0, epsilon = 1e-14);
    }

    #[test]
    fn retract_examples() {
        let s2 = ImplicitManifold::sphere(2);
        let p = s2.retract(&s2.point(vecd(&[0.0, 0.0, 1.01]))).unwrap();
        assert_abs_diff_eq!((p.coords - vecd(&[0.0, 0.0, 1.0])).norm(), 0.0, epsilon = 1e-12);

        let on = s2.point(vecd(&[0.6, 0.0, 0.8]));
        let q = s2.retract(&on).unwrap();
        assert_abs_diff_eq!((q.coords - on.coords).norm(), 0.0, epsilon = 1e-12);

        // Newton on |x|^2 - 1 converges from a far radial point too.
        let far = s2.retract(&s2.point(vecd(&[0.0, 0.0, 2.0]))).unwrap();
        assert_abs_diff_eq!((far.coords - vecd(&[0.0, 0.0, 1.0])).norm(), 0.0, epsilon = 1e-10);
    }

    #[test]
    fn retract_is_idempotent_and_robust() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for m in [
            ImplicitManifold::sphere(2),
            ImplicitManifold::torus(2.0, 1.0, Axis::Z),
            ImplicitManifold::torus(2.0, 0.5, Axis::X),
        ] {
            let l = m.bounding_radius();
            let mut ok = 0;
            for _ in 0..1000 {
                let raw = vecd(&[
                    rng.gen_range(-l..l),
                    rng.gen_range(-l..l),
                    rng.gen_range(-l..l),
                ]);
                if let Ok(p) = m.retract(&m.point(raw)) {
                    assert!(p.on_manifold_residual < TOL_CONSTRAINT);
                    let again = m.retract(&p).unwrap();
                    assert!((again.coords - &p.coords).norm() < TOL_CONSTRAINT);
                    ok += 1;
                }
            }
            // Most random draws land in the Newton basin.
            assert!(ok > 800, "only {ok} retractions converged");
        }
    }

    #[test]
    fn riemannian_gradient_vanishes_at_poles() {
        let s2 = ImplicitManifold::sphere(2);
        let f = ScalarField::parse("f", "x3").unwrap();
        for z in [-1.0, 1.0] {
            let p = s2.point(vecd(&[0.0, 0.0, z]));
            let g = s2.riemannian_gradient(&f, &p).unwrap();
            assert_abs_diff_eq!(g.norm(), 0.0, epsilon = 1e-14);
        }
        let equator = s2.point(vecd(&[1.0, 0.0, 0.0]));
        assert!(s2.riemannian_gradient(&f, &equator).unwrap().norm() > 0.9);
    }

    #[test]
    fn torus_angle_chart_round_trips() {
        for axis in [Axis::Z, Axis::X] {
            let t = ImplicitManifold::torus(2.0, 1.0, axis);
            for (theta, phi) in [(0.3, -1.2), (2.9, 0.4), (-2.0, 3.0)] {
                let p = t.torus_point(TorusAngles { theta, phi }).unwrap();
                assert!(p.on_manifold_residual < 1e-9);
                let a = t.torus_angles(&p.coords).unwrap();
                let wrap = |x: f64| (x - (x / std::f64::consts::TAU).round() * std::f64::consts::TAU);
                assert_abs_diff_eq!(wrap(a.theta - theta), 0.0, epsilon = 1e-12);
                assert_abs_diff_eq!(wrap(a.phi - phi), 0.0, epsilon = 1e-12);
            }
        }
    }
}
