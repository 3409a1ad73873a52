use std::f64::consts::PI;

use nalgebra::Vector3;
use rayon::prelude::*;

use super::atsm::AtsmController;
use super::dynamics::{angular_acceleration, body_rates_from_euler_rates, step_dynamics, step_flight, GRAVITY};
use super::{AtsmConfig, QuadParams, QuadState};
use crate::error::{Error, Result};
use crate::formation::{position_errors, FormationErrors};
use crate::scenario::Path;

/// Any `|sigma|` above this aborts the run.
const DIVERGENCE_LIMIT: f64 = 1e3;

/// A step change of one Euler-angle reference.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AxisStep {
    pub time: f64,
    /// 0 = roll, 1 = pitch, 2 = yaw.
    pub axis: usize,
    pub value: f64,
}

/// Piecewise-constant Euler-angle references.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ReferenceProfile {
    pub initial: Vector3<f64>,
    pub steps: Vec<AxisStep>,
}

impl ReferenceProfile {
    /// Roll -10 deg at 0.5 s, pitch 10 deg at 1 s, yaw 45 deg at 2 s.
    pub fn inspection_steps() -> Self {
        Self {
            initial: Vector3::zeros(),
            steps: vec![
                AxisStep {
                    time: 0.5,
                    axis: 0,
                    value: (-10.0f64).to_radians(),
                },
                AxisStep {
                    time: 1.0,
                    axis: 1,
                    value: 10.0f64.to_radians(),
                },
                AxisStep {
                    time: 2.0,
                    axis: 2,
                    value: 45.0f64.to_radians(),
                },
            ],
        }
    }

    pub fn at(&self, t: f64) -> Vector3<f64> {
        let mut r = self.initial;
        for s in &self.steps {
            if t >= s.time {
                r[s.axis] = s.value;
            }
        }
        r
    }

    pub fn last_step_time(&self) -> f64 {
        self.steps.iter().map(|s| s.time).fold(0.0, f64::max)
    }
}

/// Additive torque disturbance.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum Disturbance {
    #[default]
    None,
    Constant(Vector3<f64>),
    Sinusoid {
        amplitude: Vector3<f64>,
        frequency_hz: f64,
        phase: Vector3<f64>,
    },
}

impl Disturbance {
    /// 0.1 N m sinusoid at 1 Hz on every axis, phases spread by 120 deg.
    pub fn bounded_sinusoid() -> Self {
        Self::sinusoid(0.1)
    }

    /// 1 Hz sinusoid of the given amplitude on every axis, phases spread by
    /// 120 deg. A zero amplitude gives no disturbance.
    pub fn sinusoid(amplitude: f64) -> Self {
        if amplitude == 0.0 {
            return Disturbance::None;
        }
        Disturbance::Sinusoid {
            amplitude: Vector3::repeat(amplitude),
            frequency_hz: 1.0,
            phase: Vector3::new(0.0, 2.0 * PI / 3.0, 4.0 * PI / 3.0),
        }
    }

    pub fn at(&self, t: f64) -> Vector3<f64> {
        match self {
            Disturbance::None => Vector3::zeros(),
            Disturbance::Constant(d) => *d,
            Disturbance::Sinusoid {
                amplitude,
                frequency_hz,
                phase,
            } => Vector3::from_fn(|i, _| amplitude[i] * (2.0 * PI * frequency_hz * t + phase[i]).sin()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimOptions {
    pub dt: f64,
    pub duration: f64,
    pub adaptation: bool,
    pub boundary_layer: Option<f64>,
    /// Keep every n-th step in the trace.
    pub record_every: usize,
}

impl Default for SimOptions {
    fn default() -> Self {
        Self {
            dt: 1e-3,
            duration: 5.0,
            adaptation: true,
            boundary_layer: None,
            record_every: 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRecord {
    pub t: f64,
    pub position: Vector3<f64>,
    pub desired_position: Vector3<f64>,
    pub euler: Vector3<f64>,
    pub reference: Vector3<f64>,
    pub euler_rates: Vector3<f64>,
    pub body_rates: Vector3<f64>,
    pub torque: Vector3<f64>,
    pub sigma: Vector3<f64>,
    pub alpha: [f64; 3],
    pub disturbance: Vector3<f64>,
}

/// Time series of one closed-loop run, sampled every `dt` seconds.
#[derive(Debug, Clone, PartialEq)]
pub struct SimTrace {
    pub dt: f64,
    pub records: Vec<TraceRecord>,
}

impl SimTrace {
    pub const CSV_HEADER: &'static str = "t,x,y,z,phi,theta,psi,p,q,r,u_phi,u_theta,u_psi,sigma_phi,sigma_theta,sigma_psi,alpha_phi,alpha_theta,alpha_psi";

    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(self.records.len() * 200);
        out.push_str(Self::CSV_HEADER);
        out.push('\n');
        for r in &self.records {
            let cols = [
                r.position.x,
                r.position.y,
                r.position.z,
                r.euler.x,
                r.euler.y,
                r.euler.z,
                r.body_rates.x,
                r.body_rates.y,
                r.body_rates.z,
                r.torque.x,
                r.torque.y,
                r.torque.z,
                r.sigma.x,
                r.sigma.y,
                r.sigma.z,
                r.alpha[0],
                r.alpha[1],
                r.alpha[2],
            ];
            out.push_str(&format!("{:.4}", r.t));
            for c in cols {
                out.push_str(&format!(",{c:.9e}"));
            }
            out.push('\n');
        }
        out
    }
}

/// Seconds after `step_time` from which `|angle - target| <= tol` holds for
/// the rest of the trace, or `None` if the band is never kept.
pub fn settling_time(trace: &SimTrace, axis: usize, step_time: f64, target: f64, tol: f64) -> Option<f64> {
    let after: Vec<&TraceRecord> = trace.records.iter().filter(|r| r.t >= step_time).collect();
    let last_violation = after.iter().rposition(|r| (r.euler[axis] - target).abs() > tol);
    match last_violation {
        None => after.first().map(|r| r.t - step_time),
        Some(i) if i + 1 < after.len() => Some(after[i + 1].t - step_time),
        Some(_) => None,
    }
}

fn check_divergence(sigma: &Vector3<f64>, t: f64) -> Result<()> {
    let worst = sigma.amax();
    if worst > DIVERGENCE_LIMIT || !worst.is_finite() {
        Err(Error::Divergence { time: t, sigma: worst })
    } else {
        Ok(())
    }
}

fn validate(options: &SimOptions, cfg: &AtsmConfig) -> Result<()> {
    cfg.validate()?;
    if !(options.duration > 0.0) {
        return Err(Error::Domain("duration must be > 0".into()));
    }
    if options.record_every == 0 {
        return Err(Error::Domain("record_every must be >= 1".into()));
    }
    Ok(())
}

/// Closed-loop attitude response to piecewise-constant references under an
/// additive torque disturbance.
pub fn simulate_attitude_tracking(
    references: &ReferenceProfile,
    disturbance: &Disturbance,
    cfg: &AtsmConfig,
    params: &QuadParams,
    options: &SimOptions,
) -> Result<SimTrace> {
    validate(options, cfg)?;
    if options.duration < references.last_step_time() {
        return Err(Error::Domain("duration ends before the last reference step".into()));
    }
    let dt = options.dt;
    let steps = (options.duration / dt).round() as usize;
    let mut controller = AtsmController::new(*cfg, options.adaptation, options.boundary_layer);
    let mut state = QuadState::default();
    let mut records = Vec::with_capacity(steps / options.record_every + 1);
    let zero = Vector3::zeros();

    for k in 0..=steps {
        let t = k as f64 * dt;
        let reference = references.at(t);
        let d = disturbance.at(t);
        let body = body_rates_from_euler_rates(&state.euler, &state.euler_rates)?;
        let accel = angular_acceleration(
            params,
            &state.euler,
            &state.euler_rates,
            &(controller.last_torque() + d),
        );
        let out = controller.update(
            params,
            &state.euler,
            &state.euler_rates,
            &body,
            &reference,
            &zero,
            &zero,
            &accel,
            dt,
        );
        check_divergence(&out.sigma, t)?;
        if k % options.record_every == 0 {
            records.push(TraceRecord {
                t,
                position: state.position,
                desired_position: state.position,
                euler: state.euler,
                reference,
                euler_rates: state.euler_rates,
                body_rates: body,
                torque: out.torque,
                sigma: out.sigma,
                alpha: out.alpha,
                disturbance: d,
            });
        }
        if k < steps {
            state = step_dynamics(&state, &out.torque, &d, params, dt)?;
        }
    }
    Ok(SimTrace {
        dt: dt * options.record_every as f64,
        records,
    })
}

/// Outer-loop PID gains, identical on every axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PositionGains {
    pub kp: f64,
    pub ki: f64,
    pub kd: f64,
    /// Tilt references are clamped to this angle.
    pub max_tilt: f64,
}

impl Default for PositionGains {
    fn default() -> Self {
        Self {
            kp: 4.0,
            ki: 0.2,
            kd: 4.0,
            max_tilt: 25f64.to_radians(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlightOptions {
    pub sim: SimOptions,
    /// Cruise speed along the planned waypoints, m/s.
    pub speed: f64,
    /// Hover time after the last waypoint when no duration is forced.
    pub settle_time: f64,
    pub gains: PositionGains,
    pub shape_euler: Vector3<f64>,
    pub disturbance: Disturbance,
}

impl Default for FlightOptions {
    fn default() -> Self {
        Self {
            sim: SimOptions {
                duration: 0.0,
                record_every: 10,
                ..SimOptions::default()
            },
            speed: 2.0,
            settle_time: 3.0,
            gains: PositionGains::default(),
            shape_euler: Vector3::zeros(),
            disturbance: Disturbance::None,
        }
    }
}

/// Piecewise-linear constant-speed timing shared by all UAVs so that
/// matched waypoints are reached simultaneously.
#[derive(Debug, Clone)]
struct Timeline {
    times: Vec<f64>,
}

impl Timeline {
    fn new(paths: &[Path], speed: f64) -> Self {
        let n = paths[0].len();
        let mut times = vec![0.0];
        for k in 1..n {
            let seg = paths
                .iter()
                .map(|p| (p.waypoints[k] - p.waypoints[k - 1]).norm())
                .fold(0.0, f64::max);
            times.push(times[k - 1] + seg / speed);
        }
        Self { times }
    }

    fn end(&self) -> f64 {
        *self.times.last().unwrap()
    }

    fn sample(&self, path: &Path, t: f64) -> (Vector3<f64>, Vector3<f64>) {
        let w = &path.waypoints;
        if w.len() == 1 || t >= self.end() {
            return (*w.last().unwrap(), Vector3::zeros());
        }
        let k = self.times.partition_point(|&s| s <= t).clamp(1, w.len() - 1);
        let (t0, t1) = (self.times[k - 1], self.times[k]);
        if t1 <= t0 {
            return (w[k], Vector3::zeros());
        }
        let vel = (w[k] - w[k - 1]) / (t1 - t0);
        (w[k - 1] + vel * (t - t0), vel)
    }
}

/// Result of a multi-UAV formation flight.
#[derive(Debug, Clone, PartialEq)]
pub struct FlightResult {
    pub traces: Vec<SimTrace>,
    /// Planned-vs-flown errors of every UAV at each recorded instant.
    pub errors: Vec<(f64, FormationErrors)>,
    /// Root-mean-square position error per UAV, meters.
    pub rms_error: Vec<f64>,
}

impl FlightResult {
    pub fn errors_csv(&self) -> String {
        let mut out = String::from("t,uav,e_x,e_y,e_z,ef_x,ef_y,ef_z\n");
        for (t, e) in &self.errors {
            for (n, (ei, ef)) in e.inertial.iter().zip(&e.formation_frame).enumerate() {
                out.push_str(&format!(
                    "{t:.4},{},{:.9e},{:.9e},{:.9e},{:.9e},{:.9e},{:.9e}\n",
                    n + 1,
                    ei.x,
                    ei.y,
                    ei.z,
                    ef.x,
                    ef.y,
                    ef.z
                ));
            }
        }
        out
    }
}

fn fly_one(
    path: &Path,
    timeline: &Timeline,
    cfg: &AtsmConfig,
    params: &QuadParams,
    options: &FlightOptions,
) -> Result<SimTrace> {
    let dt = options.sim.dt;
    let duration = if options.sim.duration > 0.0 {
        options.sim.duration
    } else {
        timeline.end() + options.settle_time
    };
    let steps = (duration / dt).round() as usize;
    let g = &options.gains;
    let mut controller = AtsmController::new(*cfg, options.sim.adaptation, options.sim.boundary_layer);
    let mut state = QuadState::at_rest(path.waypoints[0]);
    let mut integral = Vector3::zeros();
    let mut records = Vec::with_capacity(steps / options.sim.record_every + 1);
    let zero = Vector3::zeros();

    for k in 0..=steps {
        let t = k as f64 * dt;
        let (p_d, v_d) = timeline.sample(path, t);
        let e = p_d - state.position;
        integral += e * dt;
        let a = e * g.kp + (v_d - state.velocity) * g.kd + integral * g.ki;

        let yaw = 0.0f64;
        let (sy, cy) = yaw.sin_cos();
        let pitch_ref = ((cy * a.x + sy * a.y) / GRAVITY).clamp(-g.max_tilt, g.max_tilt);
        let roll_ref = ((sy * a.x - cy * a.y) / GRAVITY).clamp(-g.max_tilt, g.max_tilt);
        let reference = Vector3::new(roll_ref, pitch_ref, yaw);
        let thrust = ((GRAVITY + a.z) / (state.euler.x.cos() * state.euler.y.cos())).clamp(0.0, 3.0 * GRAVITY);

        let d = options.disturbance.at(t);
        let body = body_rates_from_euler_rates(&state.euler, &state.euler_rates)?;
        let accel = angular_acceleration(
            params,
            &state.euler,
            &state.euler_rates,
            &(controller.last_torque() + d),
        );
        let out = controller.update(
            params,
            &state.euler,
            &state.euler_rates,
            &body,
            &reference,
            &zero,
            &zero,
            &accel,
            dt,
        );
        check_divergence(&out.sigma, t)?;
        if k % options.sim.record_every == 0 {
            records.push(TraceRecord {
                t,
                position: state.position,
                desired_position: p_d,
                euler: state.euler,
                reference,
                euler_rates: state.euler_rates,
                body_rates: body,
                torque: out.torque,
                sigma: out.sigma,
                alpha: out.alpha,
                disturbance: d,
            });
        }
        if k < steps {
            state = step_flight(&state, &out.torque, &d, thrust, params, dt)?;
        }
    }
    Ok(SimTrace {
        dt: dt * options.sim.record_every as f64,
        records,
    })
}

/// Flies every UAV along its own path with the shared timeline. With
/// `options.sim.duration <= 0` the flight lasts until the last waypoint
/// plus `settle_time`.
pub fn simulate_formation_flight(
    uav_paths: &[Path],
    cfg: &AtsmConfig,
    params: &QuadParams,
    options: &FlightOptions,
) -> Result<FlightResult> {
    cfg.validate()?;
    if uav_paths.is_empty() || uav_paths.iter().any(|p| p.is_empty()) {
        return Err(Error::Domain("need at least one non-empty path".into()));
    }
    if uav_paths.iter().any(|p| p.len() != uav_paths[0].len()) {
        return Err(Error::DimensionMismatch(
            "UAV paths have different waypoint counts".into(),
        ));
    }
    if !(options.speed > 0.0) {
        return Err(Error::Domain("speed must be > 0".into()));
    }
    if options.sim.record_every == 0 {
        return Err(Error::Domain("record_every must be >= 1".into()));
    }
    let timeline = Timeline::new(uav_paths, options.speed);
    let traces = uav_paths
        .par_iter()
        .map(|p| fly_one(p, &timeline, cfg, params, options))
        .collect::<Result<Vec<_>>>()?;

    let samples = traces[0].records.len();
    let mut errors = Vec::with_capacity(samples);
    let mut sq = vec![0.0; traces.len()];
    for i in 0..samples {
        let actual: Vec<_> = traces.iter().map(|tr| tr.records[i].position).collect();
        let desired: Vec<_> = traces.iter().map(|tr| tr.records[i].desired_position).collect();
        let e = position_errors(&actual, &desired, &options.shape_euler)?;
        for (n, v) in e.inertial.iter().enumerate() {
            sq[n] += v.norm_squared();
        }
        errors.push((traces[0].records[i].t, e));
    }
    let rms_error = sq.iter().map(|s| (s / samples as f64).sqrt()).collect();
    Ok(FlightResult {
        traces,
        errors,
        rms_error,
    })
}
