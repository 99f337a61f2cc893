//! Tunables for critical-point search and flow integration.

use serde::{Deserialize, Serialize};

/// Step-controller and classification parameters. Defaults are tuned for
/// the catalog surfaces; the robustness checks rerun everything with
/// `halved_tolerances` / `doubled_resolution` variants.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FlowConfig {
    /// Initial integration step.
    pub h_init: f64,
    /// Largest accepted step.
    pub h_max: f64,
    /// Relative local error tolerance of the embedded pair.
    pub rtol: f64,
    /// Absolute local error tolerance.
    pub atol: f64,
    /// Radius around a critical point that arms limit classification.
    pub basin_radius: f64,
    /// Larger radius in which near-saddle passages are recorded.
    pub passage_radius: f64,
    /// Integration-time budget per trajectory; exceeding it sets the
    /// trajectory's budget_exhausted flag.
    pub descent_budget: f64,
    /// Hard cap on accepted steps per trajectory.
    pub max_steps: usize,
    /// Riemannian-gradient norm below which a point is critical.
    pub tol_crit: f64,
    /// Tangential Hessian eigenvalues below this fail the Morse condition.
    pub tol_degenerate: f64,
    /// Seeds per ambient axis for the critical-point grid search.
    pub seed_grid_density: usize,
    /// Shooting radius on the unstable sphere, in unstable-frame units.
    pub shoot_radius: f64,
    /// Fraction of the drop to the next critical value at which the
    /// unstable-sphere level set is taken.
    pub level_fraction: f64,
    /// Samples around the unstable circle of an index-2 point.
    pub chart_resolution: usize,
    /// Parameter-bracket width at which transition bisection stops.
    pub bisect_tol: f64,
    /// RNG seed for seed orderings and perturbation reruns.
    pub seed: u64,
}

impl Default for FlowConfig {
    fn default() -> Self {
        FlowConfig {
            h_init: 1e-3,
            h_max: 0.2,
            rtol: 1e-10,
            atol: 1e-12,
            basin_radius: 1e-2,
            passage_radius: 6e-2,
            descent_budget: 2e4,
            max_steps: 400_000,
            tol_crit: 1e-8,
            tol_degenerate: 1e-6,
            seed_grid_density: 14,
            shoot_radius: 1e-3,
            level_fraction: 0.1,
            chart_resolution: 512,
            bisect_tol: 1e-10,
            seed: 42,
        }
    }
}

impl FlowConfig {
    /// All integration tolerances halved (robustness sweep).
    pub fn halved_tolerances(&self) -> Self {
        FlowConfig {
            rtol: self.rtol / 2.0,
            atol: self.atol / 2.0,
            h_init: self.h_init / 2.0,
            bisect_tol: self.bisect_tol / 2.0,
            ..self.clone()
        }
    }

    /// Chart resolution doubled (robustness sweep).
    pub fn doubled_resolution(&self) -> Self {
        FlowConfig {
            chart_resolution: self.chart_resolution * 2,
            ..self.clone()
        }
    }

    /// Deduplication distance for distinct critical points.
    pub fn dedup_distance(&self) -> f64 {
        10.0 * self.tol_crit
    }
}
