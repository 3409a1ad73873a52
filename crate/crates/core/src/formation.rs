//! Rigid formation geometry: formation-frame rotation, centroid, tracking
//! errors and per-UAV trajectory expansion from a centroid path.

use nalgebra::{Matrix3, Vector3};

use crate::error::{Error, Result};
use crate::kv::{self, fmt_f64, fmt_vec3};
use crate::scenario::Path;

/// Minimum separation between UAV offsets unless configured otherwise.
pub const DEFAULT_SAFE_DISTANCE: f64 = 2.0;

#[derive(Debug, Clone, PartialEq)]
pub struct FormationSpec {
    /// Per-UAV offsets from the centroid, formation frame.
    pub offsets: Vec<Vector3<f64>>,
    /// Roll, pitch, yaw of the formation frame.
    pub shape_euler: Vector3<f64>,
    pub safe_distance: f64,
}

impl FormationSpec {
    pub fn new(offsets: Vec<Vector3<f64>>, shape_euler: Vector3<f64>, safe_distance: f64) -> Result<Self> {
        let spec = Self {
            offsets,
            shape_euler,
            safe_distance,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Three-UAV triangle: (0,0,2), (3,0,-1), (-3,0,-1) m, level frame.
    pub fn triangle() -> Self {
        Self {
            offsets: vec![
                Vector3::new(0.0, 0.0, 2.0),
                Vector3::new(3.0, 0.0, -1.0),
                Vector3::new(-3.0, 0.0, -1.0),
            ],
            shape_euler: Vector3::zeros(),
            safe_distance: DEFAULT_SAFE_DISTANCE,
        }
    }

    /// A single UAV flying the centroid path itself.
    pub fn single() -> Self {
        Self {
            offsets: vec![Vector3::zeros()],
            shape_euler: Vector3::zeros(),
            safe_distance: DEFAULT_SAFE_DISTANCE,
        }
    }

    pub fn len(&self) -> usize {
        self.offsets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.offsets.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        if self.offsets.is_empty() {
            return Err(Error::Validation("formation needs at least one UAV".into()));
        }
        if !(self.safe_distance >= 0.0) {
            return Err(Error::Validation("safe distance must be >= 0".into()));
        }
        for i in 0..self.offsets.len() {
            for j in i + 1..self.offsets.len() {
                let d = (self.offsets[i] - self.offsets[j]).norm();
                if d == 0.0 {
                    return Err(Error::Validation(format!("offsets {i} and {j} coincide")));
                }
                if d < self.safe_distance {
                    return Err(Error::Validation(format!(
                        "offsets {i} and {j} are {d:.3} m apart, below the safe distance {}",
                        self.safe_distance
                    )));
                }
            }
        }
        Ok(())
    }

    /// Offsets rotated into the inertial frame.
    pub fn inertial_offsets(&self) -> Vec<Vector3<f64>> {
        let r = rotation_formation_to_inertial(&self.shape_euler);
        self.offsets.iter().map(|o| r * o).collect()
    }

    /// Reads a `[formation]` section with repeated `offset = x,y,z` entries and
    /// optional `euler` and `safe_distance`.
    pub fn load(text: &str) -> Result<Self> {
        let sections = kv::parse(text)?;
        let section = match sections.as_slice() {
            [s] if s.name == "formation" => s,
            _ => {
                return Err(Error::Parse {
                    line: sections.first().map_or(0, |s| s.line),
                    message: "expected exactly one [formation] section".into(),
                })
            }
        };
        Self::from_section(section)
    }

    pub(crate) fn from_section(section: &kv::Section) -> Result<Self> {
        section.check_keys(&["offset", "euler", "safe_distance"])?;
        let offsets = section.all("offset").map(|e| e.vec3()).collect::<Result<Vec<_>>>()?;
        let shape_euler = match section.get("euler") {
            Some(e) => e.vec3()?,
            None => Vector3::zeros(),
        };
        let safe_distance = match section.get("safe_distance") {
            Some(e) => e.f64()?,
            None => DEFAULT_SAFE_DISTANCE,
        };
        Self::new(offsets, shape_euler, safe_distance)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::from("[formation]\n");
        for o in &self.offsets {
            out.push_str(&format!("offset = {}\n", fmt_vec3(o)));
        }
        out.push_str(&format!("euler = {}\n", fmt_vec3(&self.shape_euler)));
        out.push_str(&format!("safe_distance = {}\n", fmt_f64(self.safe_distance)));
        out
    }
}

/// Tracking errors of every UAV in both frames.
#[derive(Debug, Clone, PartialEq)]
pub struct FormationErrors {
    pub inertial: Vec<Vector3<f64>>,
    pub formation_frame: Vec<Vector3<f64>>,
}

/// Z-Y-X Euler rotation from the formation frame to the inertial frame.
pub fn rotation_formation_to_inertial(euler: &Vector3<f64>) -> Matrix3<f64> {
    let (sf, cf) = euler.x.sin_cos();
    let (st, ct) = euler.y.sin_cos();
    let (sp, cp) = euler.z.sin_cos();
    Matrix3::new(
        cp * ct,
        cp * st * sf - sp * cf,
        cp * st * cf + sp * sf,
        sp * ct,
        sp * st * sf + cp * cf,
        sp * st * cf - cp * sf,
        -st,
        ct * sf,
        ct * cf,
    )
}

pub fn formation_centroid(positions: &[Vector3<f64>]) -> Result<Vector3<f64>> {
    if positions.is_empty() {
        return Err(Error::Domain("centroid of an empty set".into()));
    }
    let sum: Vector3<f64> = positions.iter().sum();
    Ok(sum / positions.len() as f64)
}

/// `desired - actual` per UAV, also expressed in the formation frame.
pub fn position_errors(
    actual: &[Vector3<f64>],
    desired: &[Vector3<f64>],
    shape_euler: &Vector3<f64>,
) -> Result<FormationErrors> {
    if actual.len() != desired.len() {
        return Err(Error::Domain(format!(
            "{} actual positions vs {} desired",
            actual.len(),
            desired.len()
        )));
    }
    let r_fo = rotation_formation_to_inertial(shape_euler).transpose();
    let inertial: Vec<_> = desired.iter().zip(actual).map(|(d, a)| d - a).collect();
    let formation_frame = inertial.iter().map(|e| r_fo * e).collect();
    Ok(FormationErrors {
        inertial,
        formation_frame,
    })
}

/// One path per UAV: the reference shifted by the UAV's rotated offset.
pub fn individual_trajectories(reference: &Path, spec: &FormationSpec) -> Vec<Path> {
    spec.inertial_offsets()
        .iter()
        .map(|o| reference.translated(o))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use std::f64::consts::FRAC_PI_2;

    #[test]
    fn rotation_examples() {
        assert_eq!(rotation_formation_to_inertial(&Vector3::zeros()), Matrix3::identity());
        let yaw = rotation_formation_to_inertial(&Vector3::new(0.0, 0.0, FRAC_PI_2));
        let expected = Matrix3::new(0.0, -1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0);
        assert_abs_diff_eq!(yaw, expected, epsilon = 1e-15);
    }

    #[test]
    fn centroid_examples() {
        let p = Vector3::new(1.5, -2.0, 7.0);
        assert_eq!(formation_centroid(&[p, p, p]).unwrap(), p);
        let c = formation_centroid(&[
            Vector3::zeros(),
            Vector3::new(3.0, 0.0, 0.0),
            Vector3::new(0.0, 3.0, 0.0),
        ])
        .unwrap();
        assert_eq!(c, Vector3::new(1.0, 1.0, 0.0));
        assert_eq!(
            formation_centroid(&FormationSpec::triangle().offsets).unwrap(),
            Vector3::zeros()
        );
        assert!(formation_centroid(&[]).is_err());
    }

    #[test]
    fn error_examples() {
        let a = vec![Vector3::new(1.0, 2.0, 3.0), Vector3::new(-1.0, 0.0, 4.0)];
        let e = position_errors(&a, &a, &Vector3::new(0.3, 0.2, 0.1)).unwrap();
        assert!(e
            .inertial
            .iter()
            .chain(&e.formation_frame)
            .all(|v| *v == Vector3::zeros()));

        let e = position_errors(&[Vector3::zeros()], &[Vector3::new(1.0, 2.0, 3.0)], &Vector3::zeros()).unwrap();
        assert_eq!(e.formation_frame[0], Vector3::new(1.0, 2.0, 3.0));

        let e = position_errors(
            &[Vector3::zeros()],
            &[Vector3::new(1.0, 0.0, 0.0)],
            &Vector3::new(0.0, 0.0, FRAC_PI_2),
        )
        .unwrap();
        assert_abs_diff_eq!(e.formation_frame[0], Vector3::new(0.0, -1.0, 0.0), epsilon = 1e-15);

        assert!(position_errors(&a, &a[..1], &Vector3::zeros()).is_err());
    }

    #[test]
    fn trajectory_examples() {
        let reference = Path::new(vec![
            Vector3::new(0.0, 0.0, 10.0),
            Vector3::new(5.0, 2.0, 11.0),
            Vector3::new(9.0, 9.0, 12.0),
        ]);
        let zero = FormationSpec {
            offsets: vec![Vector3::zeros()],
            ..FormationSpec::triangle()
        };
        assert_eq!(individual_trajectories(&reference, &zero), vec![reference.clone()]);

        let paths = individual_trajectories(&reference, &FormationSpec::triangle());
        assert_eq!(paths.len(), 3);
        for k in 0..reference.len() {
            let pts: Vec<_> = paths.iter().map(|p| p.waypoints[k]).collect();
            assert_abs_diff_eq!(
                formation_centroid(&pts).unwrap(),
                reference.waypoints[k],
                epsilon = 1e-12
            );
        }

        let yawed = FormationSpec::new(
            vec![Vector3::new(3.0, 0.0, -1.0)],
            Vector3::new(0.0, 0.0, FRAC_PI_2),
            2.0,
        )
        .unwrap();
        let out = individual_trajectories(&reference, &yawed);
        for (w, r) in out[0].waypoints.iter().zip(&reference.waypoints) {
            assert_abs_diff_eq!(w - r, Vector3::new(0.0, 3.0, -1.0), epsilon = 1e-12);
        }
    }

    #[test]
    fn spec_validation() {
        assert!(FormationSpec::triangle().validate().is_ok());
        assert!(FormationSpec::new(vec![], Vector3::zeros(), 2.0).is_err());
        let dup = vec![Vector3::zeros(), Vector3::zeros()];
        assert!(FormationSpec::new(dup, Vector3::zeros(), 0.0).is_err());
        let close = vec![Vector3::zeros(), Vector3::new(1.0, 0.0, 0.0)];
        assert!(FormationSpec::new(close, Vector3::zeros(), 2.0).is_err());
    }

    #[test]
    fn text_round_trip() {
        let spec = FormationSpec {
            shape_euler: Vector3::new(0.1, -0.2, 0.3),
            ..FormationSpec::triangle()
        };
        assert_eq!(FormationSpec::load(&spec.to_text()).unwrap(), spec);
    }

    fn arb_euler() -> impl Strategy<Value = Vector3<f64>> {
        (-3.2..3.2f64, -3.2..3.2f64, -3.2..3.2f64).prop_map(|(a, b, c)| Vector3::new(a, b, c))
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn rotation_is_proper_orthonormal(e in arb_euler()) {
            let r = rotation_formation_to_inertial(&e);
            // Independent product oracle, entry by entry.
            for i in 0..3 {
                for j in 0..3 {
                    let dot: f64 = (0..3).map(|k| r[(i, k)] * r[(j, k)]).sum();
                    let want = if i == j { 1.0 } else { 0.0 };
                    prop_assert!((dot - want).abs() < 1e-10);
                }
            }
            prop_assert!((r.determinant() - 1.0).abs() < 1e-10);
        }

        #[test]
        fn errors_preserve_norm(
            e in arb_euler(),
            a in (-100.0..100.0f64, -100.0..100.0f64, -100.0..100.0f64),
            d in (-100.0..100.0f64, -100.0..100.0f64, -100.0..100.0f64),
        ) {
            let a = Vector3::new(a.0, a.1, a.2);
            let d = Vector3::new(d.0, d.1, d.2);
            let errs = position_errors(&[a], &[d], &e).unwrap();
            let (ni, nf) = (errs.inertial[0].norm(), errs.formation_frame[0].norm());
            prop_assert!((ni - nf).abs() <= 1e-9 * ni.max(1e-300));
        }
    }

    proptest! {
        #[test]
        fn zero_sum_offsets_reproduce_the_reference(
            e in arb_euler(),
            raw in prop::collection::vec((-5.0..5.0f64, -5.0..5.0f64, -5.0..5.0f64), 2..5),
            wps in prop::collection::vec((-50.0..50.0f64, -50.0..50.0f64, 0.0..40.0f64), 2..8),
        ) {
            let mut offsets: Vec<_> = raw.iter().map(|t| Vector3::new(t.0, t.1, t.2)).collect();
            let mean = formation_centroid(&offsets).unwrap();
            offsets.iter_mut().for_each(|o| *o -= mean);
            let spec = FormationSpec { offsets, shape_euler: e, safe_distance: 0.0 };
            let reference = Path::new(wps.iter().map(|t| Vector3::new(t.0, t.1, t.2)).collect());
            let paths = individual_trajectories(&reference, &spec);
            for k in 0..reference.len() {
                let pts: Vec<_> = paths.iter().map(|p| p.waypoints[k]).collect();
                let c = formation_centroid(&pts).unwrap();
                prop_assert!((c - reference.waypoints[k]).norm() < 1e-9);
                for i in 0..pts.len() {
                    for j in i + 1..pts.len() {
                        let d0 = (paths[i].waypoints[0] - paths[j].waypoints[0]).norm();
                        prop_assert!(((pts[i] - pts[j]).norm() - d0).abs() < 1e-9);
                    }
                }
            }
        }
    }
}
