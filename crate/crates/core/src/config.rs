use serde::{Deserialize, Serialize};

/// All tunable defaults live here; every numeric report embeds the config it ran with.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct RunConfig {
    /// Radius of the space disk D(0, r).
    pub radius: f64,
    /// Radius of the parameter interval / disk.
    pub param_radius: f64,
    /// Target residual for the Abel-equation solvers.
    pub tol: f64,
    /// Newton tolerance for chart inversion and fixed-point location.
    pub newton_tol: f64,
    /// Sector margin delta for the lifted parameter, in radians.
    pub delta: f64,
    /// Largest Fourier mode extracted from a transition map.
    pub nmax: usize,
    /// Sampling height above/below the principal hole for Fourier extraction.
    pub sample_height: f64,
    /// Truncation degree in the space variable.
    pub deg_w: usize,
    /// Truncation degree in the parameter.
    pub deg_eps: usize,
    /// Iteration cap for orbit-anchored Fatou solves.
    pub orbit_cap: usize,
    /// Number of nodes for the canonical-parameter grid fit.
    pub fit_nodes: usize,
    /// Seed for generated test families.
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            radius: 0.5,
            param_radius: 0.05,
            tol: 1e-8,
            newton_tol: 1e-12,
            delta: 0.2,
            nmax: 16,
            sample_height: 1.5,
            deg_w: 12,
            deg_eps: 6,
            orbit_cap: 100_000,
            fit_nodes: 24,
            seed: 7,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> crate::error::Result<()> {
        use crate::error::Error;
        if self.radius <= 0.0 || self.param_radius <= 0.0 {
            return Err(Error::Invalid("radii must be positive".into()));
        }
        if self.tol <= 0.0 || self.newton_tol <= 0.0 {
            return Err(Error::Invalid("tolerances must be positive".into()));
        }
        if !(self.delta > 0.0 && self.delta < std::f64::consts::FRAC_PI_2) {
            return Err(Error::Invalid("delta must lie in (0, pi/2)".into()));
        }
        if self.deg_w < 2 {
            return Err(Error::Invalid("deg_w must be at least 2".into()));
        }
        Ok(())
    }
}
