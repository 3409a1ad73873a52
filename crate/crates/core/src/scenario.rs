//! Planning world: workspace box, mission endpoints and spherical obstacles,
//! plus the path geometry queries the planner's cost is built on.

use nalgebra::Vector3;

use crate::coverage::{CameraModel, CoverageRequest};
use crate::error::{Error, Result};
use crate::kv::{self, fmt_f64, fmt_vec3, Section};

/// The ten-obstacle bridge-inspection scenario shipped with the crate.
pub const BRIDGE_SCENARIO: &str = include_str!("../data/bridge_scenario.txt");

/// Default number of samples per path segment for clearance and penalties.
pub const DEFAULT_SAMPLES_PER_SEGMENT: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Obstacle {
    pub center: Vector3<f64>,
    pub radius: f64,
    /// Safety inflation added to the radius.
    pub margin: f64,
}

impl Obstacle {
    pub fn new(center: Vector3<f64>, radius: f64, margin: f64) -> Result<Self> {
        if !(radius > 0.0) {
            return Err(Error::Validation(format!("obstacle radius must be > 0, got {radius}")));
        }
        if !(margin >= 0.0) {
            return Err(Error::Validation(format!("obstacle margin must be >= 0, got {margin}")));
        }
        Ok(Self { center, radius, margin })
    }

    /// Signed distance from `p` to the inflated sphere surface.
    #[inline]
    pub fn clearance(&self, p: &Vector3<f64>) -> f64 {
        (p - self.center).norm() - self.radius - self.margin
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub workspace_min: Vector3<f64>,
    pub workspace_max: Vector3<f64>,
    pub start: Vector3<f64>,
    pub target: Vector3<f64>,
    pub obstacles: Vec<Obstacle>,
    /// Desired flying altitude for the altitude cost term.
    pub altitude_ref: f64,
    pub camera: Option<CameraModel>,
    pub coverage: Option<CoverageRequest>,
}

fn strictly_inside(p: &Vector3<f64>, lo: &Vector3<f64>, hi: &Vector3<f64>) -> bool {
    (0..3).all(|i| p[i] > lo[i] && p[i] < hi[i])
}

impl Scenario {
    /// Obstacle-free scenario, mostly useful for tests.
    pub fn empty(
        workspace_min: Vector3<f64>,
        workspace_max: Vector3<f64>,
        start: Vector3<f64>,
        target: Vector3<f64>,
        altitude_ref: f64,
    ) -> Result<Self> {
        let s = Self {
            workspace_min,
            workspace_max,
            start,
            target,
            obstacles: Vec::new(),
            altitude_ref,
            camera: None,
            coverage: None,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = (&self.workspace_min, &self.workspace_max);
        if !(0..3).all(|i| lo[i] < hi[i]) {
            return Err(Error::Validation(format!(
                "workspace_min {} must be < workspace_max {} componentwise",
                fmt_vec3(lo),
                fmt_vec3(hi)
            )));
        }
        if !strictly_inside(&self.start, lo, hi) {
            return Err(Error::Validation(format!(
                "start {} lies outside the workspace",
                fmt_vec3(&self.start)
            )));
        }
        if !strictly_inside(&self.target, lo, hi) {
            return Err(Error::Validation(format!(
                "target {} lies outside the workspace",
                fmt_vec3(&self.target)
            )));
        }
        for (i, o) in self.obstacles.iter().enumerate() {
            if !(o.radius > 0.0) || !(o.margin >= 0.0) {
                return Err(Error::Validation(format!(
                    "obstacle {i}: radius must be > 0 and margin >= 0"
                )));
            }
            if !(0..3).all(|k| o.center[k] >= lo[k] && o.center[k] <= hi[k]) {
                return Err(Error::Validation(format!(
                    "obstacle {i} center {} lies outside the workspace",
                    fmt_vec3(&o.center)
                )));
            }
        }
        if let Some(c) = &self.camera {
            c.validate()?;
        }
        if let Some(c) = &self.coverage {
            c.validate()?;
        }
        Ok(())
    }

    pub fn load(text: &str) -> Result<Self> {
        let sections = kv::parse(text)?;
        let mut workspace: Option<&Section> = None;
        let mut mission: Option<&Section> = None;
        let mut camera = None;
        let mut coverage = None;
        let mut obstacles = Vec::new();

        for s in &sections {
            let once = |slot: &Option<&Section>| -> Result<()> {
                if slot.is_some() {
                    Err(Error::Parse {
                        line: s.line,
                        message: format!("duplicate [{}] section", s.name),
                    })
                } else {
                    Ok(())
                }
            };
            match s.name.as_str() {
                "workspace" => {
                    once(&workspace)?;
                    s.check_keys(&["min", "max"])?;
                    workspace = Some(s);
                }
                "mission" => {
                    once(&mission)?;
                    s.check_keys(&["start", "target", "altitude_ref"])?;
                    mission = Some(s);
                }
                "obstacle" => {
                    s.check_keys(&["center", "radius", "margin"])?;
                    let margin = match s.get("margin") {
                        Some(e) => e.f64()?,
                        None => 0.0,
                    };
                    obstacles.push(Obstacle {
                        center: s.require("center")?.vec3()?,
                        radius: s.require("radius")?.f64()?,
                        margin,
                    });
                }
                "camera" => {
                    if camera.is_some() {
                        return Err(Error::Parse {
                            line: s.line,
                            message: "duplicate [camera] section".into(),
                        });
                    }
                    s.check_keys(&["resolution_px", "focal_length", "sensor_size"])?;
                    let d = CameraModel::default();
                    camera = Some(CameraModel {
                        resolution_px: opt_f64(s, "resolution_px", d.resolution_px)?,
                        focal_length: opt_f64(s, "focal_length", d.focal_length)?,
                        sensor_size: opt_f64(s, "sensor_size", d.sensor_size)?,
                    });
                }
                "coverage" => {
                    if coverage.is_some() {
                        return Err(Error::Parse {
                            line: s.line,
                            message: "duplicate [coverage] section".into(),
                        });
                    }
                    s.check_keys(&["smallest_feature", "overlap", "extent"])?;
                    coverage = Some(CoverageRequest {
                        smallest_feature: s.require("smallest_feature")?.f64()?,
                        overlap_fraction: opt_f64(s, "overlap", 0.0)?,
                        surface_extent: s.require("extent")?.vec2()?,
                    });
                }
                other => {
                    return Err(Error::Parse {
                        line: s.line,
                        message: format!("unknown section [{other}]"),
                    })
                }
            }
        }

        let workspace = workspace.ok_or_else(|| Error::Parse {
            line: 0,
            message: "missing [workspace] section".into(),
        })?;
        let mission = mission.ok_or_else(|| Error::Parse {
            line: 0,
            message: "missing [mission] section".into(),
        })?;
        let start = mission.require("start")?.vec3()?;
        let target = mission.require("target")?.vec3()?;
        let altitude_ref = match mission.get("altitude_ref") {
            Some(e) => e.f64()?,
            None => 0.5 * (start.z + target.z),
        };

        let scenario = Scenario {
            workspace_min: workspace.require("min")?.vec3()?,
            workspace_max: workspace.require("max")?.vec3()?,
            start,
            target,
            obstacles,
            altitude_ref,
            camera,
            coverage,
        };
        scenario.validate()?;
        Ok(scenario)
    }

    /// Serializes in the same grammar [`Scenario::load`] accepts.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        out.push_str("[workspace]\n");
        out.push_str(&format!("min = {}\n", fmt_vec3(&self.workspace_min)));
        out.push_str(&format!("max = {}\n", fmt_vec3(&self.workspace_max)));
        out.push_str("\n[mission]\n");
        out.push_str(&format!("start = {}\n", fmt_vec3(&self.start)));
        out.push_str(&format!("target = {}\n", fmt_vec3(&self.target)));
        out.push_str(&format!("altitude_ref = {}\n", fmt_f64(self.altitude_ref)));
        if let Some(c) = &self.camera {
            out.push_str("\n[camera]\n");
            out.push_str(&format!("resolution_px = {}\n", fmt_f64(c.resolution_px)));
            out.push_str(&format!("focal_length = {}\n", fmt_f64(c.focal_length)));
            out.push_str(&format!("sensor_size = {}\n", fmt_f64(c.sensor_size)));
        }
        if let Some(c) = &self.coverage {
            out.push_str("\n[coverage]\n");
            out.push_str(&format!("smallest_feature = {}\n", fmt_f64(c.smallest_feature)));
            out.push_str(&format!("overlap = {}\n", fmt_f64(c.overlap_fraction)));
            out.push_str(&format!(
                "extent = {},{}\n",
                fmt_f64(c.surface_extent.x),
                fmt_f64(c.surface_extent.y)
            ));
        }
        for o in &self.obstacles {
            out.push_str("\n[obstacle]\n");
            out.push_str(&format!("center = {}\n", fmt_vec3(&o.center)));
            out.push_str(&format!("radius = {}\n", fmt_f64(o.radius)));
            out.push_str(&format!("margin = {}\n", fmt_f64(o.margin)));
        }
        out
    }

    pub fn workspace_extent(&self) -> Vector3<f64> {
        self.workspace_max - self.workspace_min
    }

    pub fn contains(&self, p: &Vector3<f64>) -> bool {
        (0..3).all(|i| p[i] >= self.workspace_min[i] && p[i] <= self.workspace_max[i])
    }
}

fn opt_f64(s: &Section, key: &str, default: f64) -> Result<f64> {
    s.get(key).map_or(Ok(default), |e| e.f64())
}

/// Ordered polyline of waypoints, endpoints included.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Path {
    pub waypoints: Vec<Vector3<f64>>,
}

impl Path {
    pub fn new(waypoints: Vec<Vector3<f64>>) -> Self {
        Self { waypoints }
    }

    pub fn len(&self) -> usize {
        self.waypoints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.waypoints.is_empty()
    }

    pub fn reversed(&self) -> Path {
        Path::new(self.waypoints.iter().rev().copied().collect())
    }

    pub fn translated(&self, by: &Vector3<f64>) -> Path {
        Path::new(self.waypoints.iter().map(|w| w + by).collect())
    }

    /// Parses `x,y,z` rows; a non-numeric first row is taken as a header.
    pub fn from_csv(text: &str) -> Result<Path> {
        let mut waypoints = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let parts: Vec<&str> = line.split(',').map(str::trim).collect();
            let nums: Option<Vec<f64>> = parts.iter().map(|p| p.parse().ok()).collect();
            match nums {
                Some(v) if v.len() == 3 => waypoints.push(Vector3::new(v[0], v[1], v[2])),
                None if waypoints.is_empty() && idx == 0 => continue,
                _ => {
                    return Err(Error::Parse {
                        line: idx + 1,
                        message: format!("expected `x,y,z`, found `{line}`"),
                    })
                }
            }
        }
        Ok(Path::new(waypoints))
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("x,y,z\n");
        for w in &self.waypoints {
            out.push_str(&format!("{:.6},{:.6},{:.6}\n", w.x, w.y, w.z));
        }
        out
    }

    /// Points along the polyline, `samples_per_segment` per segment with the
    /// segment's end excluded, followed by the final waypoint once.
    pub fn sample(&self, samples_per_segment: usize) -> Vec<Vector3<f64>> {
        let n = samples_per_segment.max(2);
        let mut pts = Vec::with_capacity((self.len().saturating_sub(1)) * (n - 1) + 1);
        for seg in self.waypoints.windows(2) {
            let (a, b) = (seg[0], seg[1]);
            for s in 0..n - 1 {
                let t = s as f64 / (n - 1) as f64;
                pts.push(a + (b - a) * t);
            }
        }
        if let Some(last) = self.waypoints.last() {
            pts.push(*last);
        }
        pts
    }
}

/// Sum of Euclidean segment lengths.
pub fn path_length(path: &Path) -> f64 {
    path.waypoints.windows(2).map(|w| (w[1] - w[0]).norm()).sum()
}

/// Smallest signed clearance between sampled path points and inflated
/// obstacles; `f64::INFINITY` when there are no obstacles.
pub fn min_clearance(path: &Path, obstacles: &[Obstacle], samples_per_segment: usize) -> f64 {
    if obstacles.is_empty() {
        return f64::INFINITY;
    }
    path.sample(samples_per_segment)
        .iter()
        .flat_map(|p| obstacles.iter().map(move |o| o.clearance(p)))
        .fold(f64::INFINITY, f64::min)
}
