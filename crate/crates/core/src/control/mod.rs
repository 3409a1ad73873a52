//! Single-quadcopter attitude dynamics under adaptive twisting sliding-mode
//! control, with an outer position loop for formation flights.

mod atsm;
mod dynamics;
mod sim;

use nalgebra::Vector3;

use crate::error::{Error, Result};

pub use atsm::{
    adapt_gain, equivalent_control, sign, sliding_variable, twisting_control, AtsmController, ControlOutput,
    ALPHA_FLOOR,
};
pub use dynamics::{body_rates_from_euler_rates, gyroscopic_moments, rk4_step, step_dynamics, step_flight, GRAVITY};
pub use sim::{
    settling_time, simulate_attitude_tracking, simulate_formation_flight, AxisStep, Disturbance, FlightOptions,
    FlightResult, PositionGains, ReferenceProfile, SimOptions, SimTrace, TraceRecord,
};

/// Diagonal inertia of the airframe, kg m^2.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadParams {
    pub inertia_xx: f64,
    pub inertia_yy: f64,
    pub inertia_zz: f64,
}

impl Default for QuadParams {
    fn default() -> Self {
        Self {
            inertia_xx: 0.01,
            inertia_yy: 0.01,
            inertia_zz: 0.02,
        }
    }
}

impl QuadParams {
    pub fn new(inertia_xx: f64, inertia_yy: f64, inertia_zz: f64) -> Result<Self> {
        if !(inertia_xx > 0.0 && inertia_yy > 0.0 && inertia_zz > 0.0) {
            return Err(Error::Validation("inertias must be positive".into()));
        }
        Ok(Self {
            inertia_xx,
            inertia_yy,
            inertia_zz,
        })
    }

    pub fn inertia(&self) -> Vector3<f64> {
        Vector3::new(self.inertia_xx, self.inertia_yy, self.inertia_zz)
    }
}

/// Plant state. Body rates are derived from the Euler rates on demand.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct QuadState {
    /// Roll, pitch, yaw.
    pub euler: Vector3<f64>,
    pub euler_rates: Vector3<f64>,
    pub position: Vector3<f64>,
    pub velocity: Vector3<f64>,
}

impl QuadState {
    pub fn at_rest(position: Vector3<f64>) -> Self {
        Self {
            position,
            ..Self::default()
        }
    }
}

/// Per-axis gains of the adaptive twisting controller (roll, pitch, yaw).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AtsmConfig {
    /// Sliding-surface slopes.
    pub lambda: [f64; 3],
    /// Gain fraction used while the sliding variable is converging.
    pub mu: [f64; 3],
    pub alpha0: [f64; 3],
    /// Below this gain the adaptation switches to constant regrowth.
    pub alpha_min: [f64; 3],
    pub omega_bar: [f64; 3],
    /// Deadband on `|sigma|^rho` separating gain growth from decay.
    pub epsilon: [f64; 3],
    pub rho: [f64; 3],
    /// Regrowth rate below `alpha_min`.
    pub eta: [f64; 3],
}

impl Default for AtsmConfig {
    fn default() -> Self {
        Self {
            lambda: [5.0; 3],
            mu: [0.5; 3],
            alpha0: [0.6; 3],
            alpha_min: [0.5; 3],
            omega_bar: [1.0; 3],
            epsilon: [0.5; 3],
            rho: [0.5; 3],
            eta: [1.0; 3],
        }
    }
}

impl AtsmConfig {
    pub fn validate(&self) -> Result<()> {
        for i in 0..3 {
            if !(self.lambda[i] > 0.0) {
                return Err(Error::Validation("lambda must be > 0".into()));
            }
            if !(self.mu[i] > 0.0 && self.mu[i] < 1.0) {
                return Err(Error::Validation("mu must lie in (0, 1)".into()));
            }
            if !(self.alpha0[i] > 0.0 && self.eta[i] > 0.0 && self.epsilon[i] > 0.0) {
                return Err(Error::Validation("alpha0, eta and epsilon must be > 0".into()));
            }
            if !(self.omega_bar[i] >= 0.0 && self.rho[i] > 0.0) {
                return Err(Error::Validation("omega_bar must be >= 0 and rho > 0".into()));
            }
        }
        Ok(())
    }
}
