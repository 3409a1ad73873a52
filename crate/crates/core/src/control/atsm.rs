use nalgebra::Vector3;

use super::dynamics::gyroscopic_moments;
use super::{AtsmConfig, QuadParams};

/// Adapted gains never drop below this.
pub const ALPHA_FLOOR: f64 = 1e-6;

/// Sign with `sign(0) = 0`.
#[inline]
pub fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// `sigma = e_dot + lambda * e`, componentwise.
pub fn sliding_variable(error: &Vector3<f64>, error_rate: &Vector3<f64>, lambda: &Vector3<f64>) -> Vector3<f64> {
    error_rate + lambda.component_mul(error)
}

/// Model-based torque that holds `sigma_dot = 0` without disturbance.
pub fn equivalent_control(
    params: &QuadParams,
    reference_accel: &Vector3<f64>,
    error_rate: &Vector3<f64>,
    lambda: &Vector3<f64>,
    gyroscopic: &Vector3<f64>,
) -> Vector3<f64> {
    params
        .inertia()
        .component_mul(&(reference_accel - lambda.component_mul(error_rate)))
        - gyroscopic
}

/// Twisting switch: full gain while `sigma` moves away from zero, reduced
/// gain `mu * alpha` while it approaches.
pub fn twisting_control(sigma: f64, sigma_rate: f64, alpha: f64, mu: f64) -> f64 {
    if sigma * sigma_rate <= 0.0 {
        -mu * alpha * sign(sigma)
    } else {
        -alpha * sign(sigma)
    }
}

/// One explicit Euler step of the gain adaptation for a single axis.
pub fn adapt_gain(alpha: f64, sigma: f64, cfg: &AtsmConfig, axis: usize, dt: f64) -> f64 {
    let rate = if alpha > cfg.alpha_min[axis] {
        let s = sigma.abs();
        cfg.omega_bar[axis] * s * sign(s.powf(cfg.rho[axis]) - cfg.epsilon[axis])
    } else {
        cfg.eta[axis]
    };
    (alpha + rate * dt).max(ALPHA_FLOOR)
}

/// Stateful ATSM attitude controller: holds the adapted gains and the last
/// torque it applied.
#[derive(Debug, Clone)]
pub struct AtsmController {
    pub config: AtsmConfig,
    pub alpha: [f64; 3],
    pub adaptation: bool,
    /// Replace `sign(sigma)` by `sat(sigma / width)` when set.
    pub boundary_layer: Option<f64>,
    last_torque: Vector3<f64>,
}

/// Output of one controller evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControlOutput {
    pub torque: Vector3<f64>,
    pub sigma: Vector3<f64>,
    pub alpha: [f64; 3],
}

impl AtsmController {
    pub fn new(config: AtsmConfig, adaptation: bool, boundary_layer: Option<f64>) -> Self {
        Self {
            alpha: config.alpha0,
            config,
            adaptation,
            boundary_layer,
            last_torque: Vector3::zeros(),
        }
    }

    pub fn last_torque(&self) -> Vector3<f64> {
        self.last_torque
    }

    /// Computes `u = u_eq + u_T` and then adapts the gains for the next step.
    ///
    /// `measured_accel` is the plant's current Euler acceleration under the
    /// previously applied torque; it gives `sigma_dot` analytically.
    #[allow(clippy::too_many_arguments)]
    pub fn update(
        &mut self,
        params: &QuadParams,
        euler: &Vector3<f64>,
        euler_rates: &Vector3<f64>,
        body_rates: &Vector3<f64>,
        reference: &Vector3<f64>,
        reference_rate: &Vector3<f64>,
        reference_accel: &Vector3<f64>,
        measured_accel: &Vector3<f64>,
        dt: f64,
    ) -> ControlOutput {
        let lambda = Vector3::from(self.config.lambda);
        let e = euler - reference;
        let e_dot = euler_rates - reference_rate;
        let sigma = sliding_variable(&e, &e_dot, &lambda);
        let sigma_rate = measured_accel - reference_accel + lambda.component_mul(&e_dot);

        let f = gyroscopic_moments(params, body_rates);
        let u_eq = equivalent_control(params, reference_accel, &e_dot, &lambda, &f);
        let mut u_t = Vector3::zeros();
        for i in 0..3 {
            let (alpha, mu) = (self.alpha[i], self.config.mu[i]);
            u_t[i] = match self.boundary_layer {
                None => twisting_control(sigma[i], sigma_rate[i], alpha, mu),
                Some(width) => {
                    let s = (sigma[i] / width).clamp(-1.0, 1.0);
                    let gain = if sigma[i] * sigma_rate[i] <= 0.0 {
                        mu * alpha
                    } else {
                        alpha
                    };
                    -gain * s
                }
            };
        }
        let torque = u_eq + u_t;
        let out = ControlOutput {
            torque,
            sigma,
            alpha: self.alpha,
        };
        if self.adaptation {
            for i in 0..3 {
                self.alpha[i] = adapt_gain(self.alpha[i], sigma[i], &self.config, i, dt);
            }
        }
        self.last_torque = torque;
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn sliding_variable_examples() {
        let l = Vector3::repeat(2.0);
        assert_eq!(
            sliding_variable(&Vector3::zeros(), &Vector3::zeros(), &l),
            Vector3::zeros()
        );
        assert_eq!(
            sliding_variable(&Vector3::repeat(1.0), &Vector3::repeat(1.0), &l),
            Vector3::repeat(3.0)
        );
        let e = Vector3::new(0.3, -1.2, 4.0);
        assert_eq!(sliding_variable(&e, &(-l.component_mul(&e)), &l), Vector3::zeros());
    }

    #[test]
    fn equivalent_control_examples() {
        let p = QuadParams::new(0.02, 0.01, 0.03).unwrap();
        let l = Vector3::repeat(5.0);
        let z = Vector3::zeros();
        assert_eq!(equivalent_control(&p, &z, &z, &l, &z), z);
        assert_eq!(
            equivalent_control(&p, &Vector3::new(1.0, 0.0, 0.0), &z, &l, &z),
            Vector3::new(0.02, 0.0, 0.0)
        );
        assert_eq!(
            equivalent_control(&p, &z, &z, &l, &Vector3::new(0.1, 0.0, 0.0)),
            Vector3::new(-0.1, 0.0, 0.0)
        );
    }

    #[test]
    fn twisting_examples() {
        assert_eq!(twisting_control(2.0, 1.0, 3.0, 0.5), -3.0);
        assert_eq!(twisting_control(2.0, -1.0, 3.0, 0.5), -1.5);
        assert_eq!(twisting_control(0.0, 1.0, 3.0, 0.5), 0.0);
        assert_eq!(twisting_control(-2.0, -1.0, 3.0, 0.5), 3.0);
    }

    #[test]
    fn adaptation_examples() {
        let cfg = AtsmConfig {
            alpha_min: [0.5; 3],
            eta: [2.0; 3],
            omega_bar: [10.0; 3],
            epsilon: [0.1; 3],
            rho: [0.5; 3],
            ..AtsmConfig::default()
        };
        let dt = 0.01;
        // Below the threshold the gain regrows at eta.
        assert!((adapt_gain(0.3, 0.0, &cfg, 0, dt) - (0.3 + 2.0 * dt)).abs() < 1e-15);
        // Above it, a large sigma grows the gain at omega_bar * |sigma|.
        assert!((adapt_gain(1.0, 0.5, &cfg, 1, dt) - (1.0 + 10.0 * 0.5 * dt)).abs() < 1e-15);
        // Small sigma inside the deadband shrinks it.
        assert!(adapt_gain(1.0, 0.001, &cfg, 2, dt) < 1.0);
        // sigma = 0 leaves it untouched.
        assert_eq!(adapt_gain(1.0, 0.0, &cfg, 0, dt), 1.0);
        // Floor.
        let fast = AtsmConfig {
            omega_bar: [1e9; 3],
            alpha_min: [0.0; 3],
            ..cfg
        };
        assert_eq!(adapt_gain(1e-3, 1e-6, &fast, 0, dt), ALPHA_FLOOR);
    }

    proptest! {
        #[test]
        fn twisting_magnitude_is_zero_mu_alpha_or_alpha(
            s in -10.0..10.0f64, sd in -10.0..10.0f64, a in 0.01..50.0f64, mu in 0.01..0.99f64,
        ) {
            let u = twisting_control(s, sd, a, mu).abs();
            prop_assert!(u == 0.0 || u == mu * a || u == a);
        }
    }
}
