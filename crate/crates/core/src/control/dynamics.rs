use std::f64::consts::FRAC_PI_2;

use nalgebra::Vector3;

use super::{QuadParams, QuadState};
use crate::error::{Error, Result};
use crate::formation::rotation_formation_to_inertial;

pub const GRAVITY: f64 = 9.81;

/// Pitch must stay this far from +-pi/2.
const SINGULARITY_MARGIN: f64 = 1e-3;

fn check_pitch(pitch: f64) -> Result<()> {
    if pitch.abs() < FRAC_PI_2 - SINGULARITY_MARGIN {
        Ok(())
    } else {
        Err(Error::Singularity { pitch })
    }
}

#[inline]
fn body_rates(euler: &Vector3<f64>, rates: &Vector3<f64>) -> Vector3<f64> {
    let (sf, cf) = euler.x.sin_cos();
    let (st, ct) = euler.y.sin_cos();
    Vector3::new(
        rates.x - st * rates.z,
        cf * rates.y + ct * sf * rates.z,
        -sf * rates.y + ct * cf * rates.z,
    )
}

/// Maps Euler-angle rates to body angular rates `(p, q, r)`.
pub fn body_rates_from_euler_rates(euler: &Vector3<f64>, euler_rates: &Vector3<f64>) -> Result<Vector3<f64>> {
    check_pitch(euler.y)?;
    Ok(body_rates(euler, euler_rates))
}

/// Gyroscopic coupling moments for a diagonal inertia.
pub fn gyroscopic_moments(params: &QuadParams, body_rates: &Vector3<f64>) -> Vector3<f64> {
    let (p, q, r) = (body_rates.x, body_rates.y, body_rates.z);
    Vector3::new(
        (params.inertia_yy - params.inertia_zz) * q * r,
        (params.inertia_zz - params.inertia_xx) * p * r,
        (params.inertia_xx - params.inertia_yy) * p * q,
    )
}

/// Angular acceleration in Euler coordinates for a combined input `u + d`.
#[inline]
pub(crate) fn angular_acceleration(
    params: &QuadParams,
    euler: &Vector3<f64>,
    rates: &Vector3<f64>,
    input: &Vector3<f64>,
) -> Vector3<f64> {
    let f = gyroscopic_moments(params, &body_rates(euler, rates));
    (f + input).component_div(&params.inertia())
}

/// Classic fixed-step fourth-order Runge-Kutta step.
pub fn rk4_step<const N: usize>(y: &[f64; N], dt: f64, f: impl Fn(&[f64; N]) -> [f64; N]) -> [f64; N] {
    let add = |a: &[f64; N], k: &[f64; N], h: f64| -> [f64; N] {
        let mut out = *a;
        for i in 0..N {
            out[i] += h * k[i];
        }
        out
    };
    let k1 = f(y);
    let k2 = f(&add(y, &k1, 0.5 * dt));
    let k3 = f(&add(y, &k2, 0.5 * dt));
    let k4 = f(&add(y, &k3, dt));
    let mut out = *y;
    for i in 0..N {
        out[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    out
}

fn validate_step(dt: f64) -> Result<()> {
    if dt > 0.0 && dt <= 0.01 {
        Ok(())
    } else {
        Err(Error::Domain(format!("time step must lie in (0, 0.01] s, got {dt}")))
    }
}

/// Advances the attitude by one RK4 step with torque and disturbance held
/// constant; position and velocity are left untouched.
pub fn step_dynamics(
    state: &QuadState,
    torque: &Vector3<f64>,
    disturbance: &Vector3<f64>,
    params: &QuadParams,
    dt: f64,
) -> Result<QuadState> {
    validate_step(dt)?;
    check_pitch(state.euler.y)?;
    let input = torque + disturbance;
    let y = [
        state.euler.x,
        state.euler.y,
        state.euler.z,
        state.euler_rates.x,
        state.euler_rates.y,
        state.euler_rates.z,
    ];
    let next = rk4_step(&y, dt, |s| {
        let e = Vector3::new(s[0], s[1], s[2]);
        let w = Vector3::new(s[3], s[4], s[5]);
        let a = angular_acceleration(params, &e, &w, &input);
        [s[3], s[4], s[5], a.x, a.y, a.z]
    });
    let out = QuadState {
        euler: Vector3::new(next[0], next[1], next[2]),
        euler_rates: Vector3::new(next[3], next[4], next[5]),
        ..*state
    };
    check_pitch(out.euler.y)?;
    Ok(out)
}

/// Full rigid-body step: attitude as in [`step_dynamics`] plus translation
/// driven by a collective specific thrust along the body z axis.
pub fn step_flight(
    state: &QuadState,
    torque: &Vector3<f64>,
    disturbance: &Vector3<f64>,
    thrust_accel: f64,
    params: &QuadParams,
    dt: f64,
) -> Result<QuadState> {
    validate_step(dt)?;
    check_pitch(state.euler.y)?;
    let input = torque + disturbance;
    let y = [
        state.euler.x,
        state.euler.y,
        state.euler.z,
        state.euler_rates.x,
        state.euler_rates.y,
        state.euler_rates.z,
        state.position.x,
        state.position.y,
        state.position.z,
        state.velocity.x,
        state.velocity.y,
        state.velocity.z,
    ];
    let next = rk4_step(&y, dt, |s| {
        let e = Vector3::new(s[0], s[1], s[2]);
        let w = Vector3::new(s[3], s[4], s[5]);
        let a = angular_acceleration(params, &e, &w, &input);
        let thrust = rotation_formation_to_inertial(&e) * Vector3::new(0.0, 0.0, thrust_accel);
        [
            s[3],
            s[4],
            s[5],
            a.x,
            a.y,
            a.z,
            s[9],
            s[10],
            s[11],
            thrust.x,
            thrust.y,
            thrust.z - GRAVITY,
        ]
    });
    let out = QuadState {
        euler: Vector3::new(next[0], next[1], next[2]),
        euler_rates: Vector3::new(next[3], next[4], next[5]),
        position: Vector3::new(next[6], next[7], next[8]),
        velocity: Vector3::new(next[9], next[10], next[11]),
    };
    check_pitch(out.euler.y)?;
    Ok(out)
}
