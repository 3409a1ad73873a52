//! Camera footprint, standoff distance and viewpoint tiling for a planar
//! surface patch.

use nalgebra::{Vector2, Vector3};

use crate::error::{Error, Result};

/// Pinhole camera parameters relevant to coverage.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameraModel {
    /// Pixel count along the footprint dimension.
    pub resolution_px: f64,
    /// Focal length in meters.
    pub focal_length: f64,
    /// Sensor size along the same dimension, meters.
    pub sensor_size: f64,
}

impl CameraModel {
    pub fn new(resolution_px: f64, focal_length: f64, sensor_size: f64) -> Result<Self> {
        let cam = Self {
            resolution_px,
            focal_length,
            sensor_size,
        };
        cam.validate()?;
        Ok(cam)
    }

    pub fn validate(&self) -> Result<()> {
        positive("resolution_px", self.resolution_px)?;
        positive("focal_length", self.focal_length)?;
        positive("sensor_size", self.sensor_size)
    }
}

impl Default for CameraModel {
    /// 12 MP 4:3 sensor (4000 px across), 34.4 mm focal length and an
    /// assumed 6.17 mm sensor width.
    fn default() -> Self {
        Self {
            resolution_px: 4000.0,
            focal_length: 0.0344,
            sensor_size: 0.00617,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoverageRequest {
    /// Smallest feature that must be resolvable, meters.
    pub smallest_feature: f64,
    /// Required image overlap in [0, 1].
    pub overlap_fraction: f64,
    /// Planar patch size to tile, meters.
    pub surface_extent: Vector2<f64>,
}

impl CoverageRequest {
    pub fn validate(&self) -> Result<()> {
        positive("smallest_feature", self.smallest_feature)?;
        overlap_in_range(self.overlap_fraction)?;
        if !(self.surface_extent.x > 0.0 && self.surface_extent.y > 0.0) {
            return Err(Error::Domain(format!(
                "surface extent must be positive, got ({}, {})",
                self.surface_extent.x, self.surface_extent.y
            )));
        }
        Ok(())
    }
}

/// One camera pose: where the shot is taken and what it covers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ViewConfiguration {
    pub position: Vector3<f64>,
    /// Unit camera axis, pointing at the surface.
    pub orientation: Vector3<f64>,
    pub footprint: f64,
    pub standoff: f64,
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("{name} must be positive, got {v}")))
    }
}

fn overlap_in_range(o: f64) -> Result<()> {
    if (0.0..=1.0).contains(&o) {
        Ok(())
    } else {
        Err(Error::Domain(format!("overlap fraction must lie in [0, 1], got {o}")))
    }
}

/// Footprint side length that resolves `smallest_feature` across half the
/// sensor's pixels: `a = r_c * s_f / 2`.
pub fn field_of_view(camera: &CameraModel, smallest_feature: f64) -> Result<f64> {
    positive("resolution_px", camera.resolution_px)?;
    positive("smallest_feature", smallest_feature)?;
    Ok(0.5 * camera.resolution_px * smallest_feature)
}

/// Camera-to-surface distance giving the requested footprint.
pub fn standoff_distance(camera: &CameraModel, footprint: f64) -> Result<f64> {
    positive("sensor_size", camera.sensor_size)?;
    positive("focal_length", camera.focal_length)?;
    positive("footprint", footprint)?;
    Ok(footprint * camera.focal_length / camera.sensor_size)
}

/// Footprint reduced by the overlap shared with neighbouring shots.
pub fn effective_footprint(footprint: f64, overlap_fraction: f64) -> Result<f64> {
    overlap_in_range(overlap_fraction)?;
    Ok((1.0 - overlap_fraction) * footprint)
}

/// Orthonormal in-plane axes for a surface with the given unit normal.
fn surface_axes(normal: &Vector3<f64>) -> (Vector3<f64>, Vector3<f64>) {
    let helper = if normal.z.abs() < 0.9 {
        Vector3::z()
    } else {
        Vector3::x()
    };
    let u = helper.cross(normal).normalize();
    let v = normal.cross(&u);
    (u, v)
}

/// Tiles the patch spanned from `surface_origin` (a corner) with an
/// axis-aligned grid of viewpoints spaced one effective footprint apart and
/// centered on the patch.
pub fn generate_viewpoints(
    request: &CoverageRequest,
    camera: &CameraModel,
    surface_origin: &Vector3<f64>,
    surface_normal: &Vector3<f64>,
) -> Result<Vec<ViewConfiguration>> {
    request.validate()?;
    camera.validate()?;
    if (surface_normal.norm() - 1.0).abs() > 1e-9 {
        return Err(Error::Domain(format!(
            "surface normal must be unit length, |n| = {}",
            surface_normal.norm()
        )));
    }
    let footprint = field_of_view(camera, request.smallest_feature)?;
    let standoff = standoff_distance(camera, footprint)?;
    let spacing = effective_footprint(footprint, request.overlap_fraction)?;
    if spacing <= 0.0 {
        return Err(Error::Domain(
            "degenerate coverage: full overlap leaves a zero-size primitive".into(),
        ));
    }

    let counts = request.surface_extent.map(|e| (e / spacing).ceil().max(1.0) as usize);
    let (u, v) = surface_axes(surface_normal);
    let first = |extent: f64, n: usize| 0.5 * extent - 0.5 * (n as f64 - 1.0) * spacing;
    let (u0, v0) = (
        first(request.surface_extent.x, counts.x),
        first(request.surface_extent.y, counts.y),
    );

    let mut views = Vec::with_capacity(counts.x * counts.y);
    for j in 0..counts.y {
        for i in 0..counts.x {
            let cu = u0 + i as f64 * spacing;
            let cv = v0 + j as f64 * spacing;
            views.push(ViewConfiguration {
                position: surface_origin + u * cu + v * cv + surface_normal * standoff,
                orientation: -surface_normal,
                footprint,
                standoff,
            });
        }
    }
    Ok(views)
}

/// In-plane coordinates of a viewpoint relative to the patch origin.
pub fn surface_coordinates(
    view: &ViewConfiguration,
    surface_origin: &Vector3<f64>,
    surface_normal: &Vector3<f64>,
) -> Vector2<f64> {
    let (u, v) = surface_axes(surface_normal);
    let d = view.position - surface_origin;
    Vector2::new(d.dot(&u), d.dot(&v))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn cam(r: f64) -> CameraModel {
        CameraModel::new(r, 0.0344, 0.00617).unwrap()
    }

    #[test]
    fn field_of_view_examples() {
        assert_abs_diff_eq!(field_of_view(&cam(4000.0), 0.002).unwrap(), 4.0, epsilon = 1e-12);
        assert_abs_diff_eq!(field_of_view(&cam(4000.0), 0.004).unwrap(), 8.0, epsilon = 1e-12);
        assert_eq!(field_of_view(&cam(2.0), 1.0).unwrap(), 1.0);
        assert!(field_of_view(&cam(2.0), 0.0).is_err());
        assert!(field_of_view(&cam(2.0), -1.0).is_err());
    }

    #[test]
    fn standoff_examples() {
        let c = cam(4000.0);
        assert_abs_diff_eq!(standoff_distance(&c, 4.0).unwrap(), 22.301, epsilon = 1e-3);
        assert_abs_diff_eq!(
            standoff_distance(&c, c.sensor_size / c.focal_length).unwrap(),
            1.0,
            epsilon = 1e-12
        );
        let a = standoff_distance(&c, 3.0).unwrap();
        assert_abs_diff_eq!(standoff_distance(&c, 6.0).unwrap(), 2.0 * a, epsilon = 1e-12);
        let zero = CameraModel { sensor_size: 0.0, ..c };
        assert!(standoff_distance(&zero, 4.0).is_err());
    }

    #[test]
    fn effective_footprint_examples() {
        assert_eq!(effective_footprint(4.0, 0.25).unwrap(), 3.0);
        assert_eq!(effective_footprint(4.0, 0.0).unwrap(), 4.0);
        assert_eq!(effective_footprint(4.0, 1.0).unwrap(), 0.0);
        assert!(effective_footprint(4.0, 1.5).is_err());
        assert!(effective_footprint(4.0, -0.1).is_err());
    }

    fn request(w: f64, h: f64, overlap: f64) -> CoverageRequest {
        CoverageRequest {
            smallest_feature: 0.002,
            overlap_fraction: overlap,
            surface_extent: Vector2::new(w, h),
        }
    }

    #[test]
    fn viewpoint_grid_counts() {
        let c = cam(4000.0);
        let o = Vector3::zeros();
        let n = Vector3::z();
        let one = generate_viewpoints(&request(4.0, 4.0, 0.0), &c, &o, &n).unwrap();
        assert_eq!(one.len(), 1);
        let uv = surface_coordinates(&one[0], &o, &n);
        assert_abs_diff_eq!(uv.x, 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(uv.y, 2.0, epsilon = 1e-12);
        assert_eq!(
            generate_viewpoints(&request(8.0, 4.0, 0.0), &c, &o, &n).unwrap().len(),
            2
        );
        assert_eq!(
            generate_viewpoints(&request(9.0, 9.0, 0.0), &c, &o, &n).unwrap().len(),
            9
        );
    }

    #[test]
    fn viewpoints_face_the_surface_at_standoff() {
        let c = cam(4000.0);
        let o = Vector3::new(1.0, 2.0, 3.0);
        let n = Vector3::new(1.0, 1.0, 0.0).normalize();
        let views = generate_viewpoints(&request(9.0, 5.0, 0.3), &c, &o, &n).unwrap();
        let d = standoff_distance(&c, field_of_view(&c, 0.002).unwrap()).unwrap();
        for v in &views {
            assert_eq!(v.orientation, -n);
            assert_eq!(v.standoff, d);
            assert_abs_diff_eq!((v.position - o).dot(&n), d, epsilon = 1e-9);
        }
    }

    #[test]
    fn full_overlap_is_degenerate() {
        let r = generate_viewpoints(&request(4.0, 4.0, 1.0), &cam(4000.0), &Vector3::zeros(), &Vector3::z());
        assert!(matches!(r, Err(Error::Domain(_))));
    }

    #[test]
    fn rejects_non_unit_normal() {
        let r = generate_viewpoints(
            &request(4.0, 4.0, 0.0),
            &cam(4000.0),
            &Vector3::zeros(),
            &Vector3::new(0.0, 0.0, 2.0),
        );
        assert!(r.is_err());
    }
}
