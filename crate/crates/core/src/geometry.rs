//! Frames, the pinhole camera model, boxes and the depth image container.
//!
//! Conventions: the camera frame is x right, y down, z along the optical
//! axis. The map frame is right-handed with z up. A [`Pose`] maps camera
//! coordinates into the map: `p_map = rotation * p_cam + translation`.

use nalgebra::{Matrix3, Vector2, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const ORTHONORMAL_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraIntrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: usize,
    pub height: usize,
    pub depth_min: f64,
    pub depth_max: f64,
}

impl CameraIntrinsics {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        fx: f64,
        fy: f64,
        cx: f64,
        cy: f64,
        width: usize,
        height: usize,
        depth_min: f64,
        depth_max: f64,
    ) -> Result<Self> {
        let intr = Self {
            fx,
            fy,
            cx,
            cy,
            width,
            height,
            depth_min,
            depth_max,
        };
        intr.validate()?;
        Ok(intr)
    }

    /// Builds intrinsics from horizontal/vertical field of view in degrees,
    /// with the principal point at the image center.
    pub fn from_fov(
        width: usize,
        height: usize,
        hfov_deg: f64,
        vfov_deg: f64,
        depth_min: f64,
        depth_max: f64,
    ) -> Result<Self> {
        if !(hfov_deg > 0.0 && hfov_deg < 180.0 && vfov_deg > 0.0 && vfov_deg < 180.0) {
            return Err(Error::invalid(format!(
                "field of view must be in (0, 180) degrees, got {hfov_deg}x{vfov_deg}"
            )));
        }
        let fx = (width as f64 / 2.0) / (hfov_deg.to_radians() / 2.0).tan();
        let fy = (height as f64 / 2.0) / (vfov_deg.to_radians() / 2.0).tan();
        Self::new(
            fx,
            fy,
            (width as f64 - 1.0) / 2.0,
            (height as f64 - 1.0) / 2.0,
            width,
            height,
            depth_min,
            depth_max,
        )
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.fx > 0.0 && self.fy > 0.0) {
            return Err(Error::invalid("focal lengths must be positive"));
        }
        if self.width == 0 || self.height == 0 {
            return Err(Error::invalid("image dimensions must be nonzero"));
        }
        if !(self.cx >= 0.0 && self.cx < self.width as f64) {
            return Err(Error::invalid(format!("cx {} outside [0, width)", self.cx)));
        }
        if !(self.cy >= 0.0 && self.cy < self.height as f64) {
            return Err(Error::invalid(format!("cy {} outside [0, height)", self.cy)));
        }
        if !(self.depth_min > 0.0 && self.depth_min < self.depth_max) {
            return Err(Error::invalid("depth range must satisfy 0 < depth_min < depth_max"));
        }
        Ok(())
    }

    pub fn pixel_count(&self) -> usize {
        self.width * self.height
    }

    /// Same camera at a different resolution, scaling the focal lengths and
    /// principal point.
    pub fn rescaled(&self, width: usize, height: usize) -> Result<Self> {
        let sx = width as f64 / self.width as f64;
        let sy = height as f64 / self.height as f64;
        Self::new(
            self.fx * sx,
            self.fy * sy,
            (self.cx + 0.5) * sx - 0.5,
            (self.cy + 0.5) * sy - 0.5,
            width,
            height,
            self.depth_min,
            self.depth_max,
        )
    }
}

/// Camera-to-map rigid transform.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    pub translation: Vector3<f64>,
    pub rotation: Matrix3<f64>,
}

impl Pose {
    pub fn new(translation: Vector3<f64>, rotation: Matrix3<f64>) -> Result<Self> {
        let err = (rotation.transpose() * rotation - Matrix3::identity()).abs().max();
        if !(err <= ORTHONORMAL_TOL) {
            return Err(Error::invalid(format!(
                "rotation is not orthonormal (max |RᵀR - I| = {err:e})"
            )));
        }
        Ok(Self {
            translation,
            rotation,
        })
    }

    pub fn identity() -> Self {
        Self {
            translation: Vector3::zeros(),
            rotation: Matrix3::identity(),
        }
    }

    /// A camera at `position` whose optical axis points along map heading
    /// `yaw` (radians, counter-clockwise from +x) tilted up by `pitch`.
    /// Image rows point down (-z) when `pitch` is zero.
    pub fn looking(position: Vector3<f64>, yaw: f64, pitch: f64) -> Self {
        // camera x -> map -y, camera y -> map -z, camera z -> map +x
        #[rustfmt::skip]
        let base = Matrix3::new(
             0.0,  0.0, 1.0,
            -1.0,  0.0, 0.0,
             0.0, -1.0, 0.0,
        );
        let (sy, cy) = yaw.sin_cos();
        #[rustfmt::skip]
        let rz = Matrix3::new(
            cy, -sy, 0.0,
            sy,  cy, 0.0,
            0.0, 0.0, 1.0,
        );
        let (sp, cp) = (-pitch).sin_cos();
        #[rustfmt::skip]
        let ry = Matrix3::new(
             cp, 0.0, sp,
            0.0, 1.0, 0.0,
            -sp, 0.0, cp,
        );
        Self {
            translation: position,
            rotation: rz * ry * base,
        }
    }

    pub fn transform_point(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * p + self.translation
    }

    pub fn inverse(&self) -> Self {
        let rt = self.rotation.transpose();
        Self {
            translation: -(rt * self.translation),
            rotation: rt,
        }
    }
}

/// Row-major metric depth samples; `0.0` marks an invalid pixel.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthImage {
    intrinsics: CameraIntrinsics,
    data: Vec<f32>,
}

impl DepthImage {
    pub fn new(intrinsics: CameraIntrinsics, data: Vec<f32>) -> Result<Self> {
        intrinsics.validate()?;
        if data.len() != intrinsics.pixel_count() {
            return Err(Error::DimensionMismatch {
                expected: intrinsics.pixel_count(),
                actual: data.len(),
            });
        }
        let (lo, hi) = (intrinsics.depth_min as f32, intrinsics.depth_max as f32);
        if let Some(bad) = data.iter().find(|&&d| d != 0.0 && !(d >= lo && d <= hi)) {
            return Err(Error::invalid(format!(
                "depth {bad} outside [{lo}, {hi}]"
            )));
        }
        Ok(Self { intrinsics, data })
    }

    /// An all-invalid image.
    pub fn empty(intrinsics: CameraIntrinsics) -> Self {
        Self {
            data: vec![0.0; intrinsics.pixel_count()],
            intrinsics,
        }
    }

    pub fn intrinsics(&self) -> &CameraIntrinsics {
        &self.intrinsics
    }

    pub fn width(&self) -> usize {
        self.intrinsics.width
    }

    pub fn height(&self) -> usize {
        self.intrinsics.height
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn row(&self, v: usize) -> &[f32] {
        let w = self.width();
        &self.data[v * w..(v + 1) * w]
    }

    #[inline]
    pub fn depth(&self, u: usize, v: usize) -> f32 {
        self.data[v * self.intrinsics.width + u]
    }

    /// Writes one pixel. Values outside the valid range are stored as invalid.
    pub fn set_depth(&mut self, u: usize, v: usize, depth: f32) {
        let lo = self.intrinsics.depth_min as f32;
        let hi = self.intrinsics.depth_max as f32;
        let d = if depth >= lo && depth <= hi { depth } else { 0.0 };
        let w = self.intrinsics.width;
        self.data[v * w + u] = d;
    }

    pub fn valid_count(&self) -> usize {
        self.data.iter().filter(|&&d| d > 0.0).count()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Frame {
    Camera,
    Map,
}

/// Axis-aligned 3D box in the camera or map frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObstacleBox {
    pub frame: Frame,
    pub center: Vector3<f64>,
    pub size: Vector3<f64>,
}

impl ObstacleBox {
    pub fn new(frame: Frame, center: Vector3<f64>, size: Vector3<f64>) -> Result<Self> {
        if !size.iter().all(|&s| s > 0.0) {
            return Err(Error::invalid(format!(
                "box size must be positive, got {:?}",
                size.as_slice()
            )));
        }
        Ok(Self {
            frame,
            center,
            size,
        })
    }

    pub fn from_min_max(frame: Frame, min: Vector3<f64>, max: Vector3<f64>) -> Result<Self> {
        Self::new(frame, (min + max) / 2.0, max - min)
    }

    pub fn min(&self) -> Vector3<f64> {
        self.center - self.size / 2.0
    }

    pub fn max(&self) -> Vector3<f64> {
        self.center + self.size / 2.0
    }

    pub fn corners(&self) -> [Vector3<f64>; 8] {
        let h = self.size / 2.0;
        std::array::from_fn(|i| {
            let sx = if i & 1 == 0 { -1.0 } else { 1.0 };
            let sy = if i & 2 == 0 { -1.0 } else { 1.0 };
            let sz = if i & 4 == 0 { -1.0 } else { 1.0 };
            self.center + Vector3::new(sx * h.x, sy * h.y, sz * h.z)
        })
    }

    pub fn footprint_area(&self) -> f64 {
        self.size.x * self.size.y
    }

    pub fn volume(&self) -> f64 {
        self.size.x * self.size.y * self.size.z
    }

    /// Scales the box about its center by `factor` on every axis.
    pub fn inflated(&self, factor: f64) -> Self {
        Self {
            size: self.size * factor,
            ..*self
        }
    }

    pub fn contains_point(&self, p: &Vector3<f64>) -> bool {
        let (lo, hi) = (self.min(), self.max());
        (0..3).all(|i| p[i] >= lo[i] && p[i] <= hi[i])
    }

    pub fn contains_box(&self, other: &ObstacleBox, tol: f64) -> bool {
        let (lo, hi) = (self.min(), self.max());
        let (olo, ohi) = (other.min(), other.max());
        (0..3).all(|i| olo[i] >= lo[i] - tol && ohi[i] <= hi[i] + tol)
    }
}

/// A detection in pixel coordinates: an inclusive column/row range plus the
/// depth the box was found at.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ImageBox {
    pub col_min: usize,
    pub col_max: usize,
    pub row_min: usize,
    pub row_max: usize,
    pub depth: f64,
}

impl ImageBox {
    pub fn center(&self) -> Vector2<f64> {
        Vector2::new(
            (self.col_min + self.col_max) as f64 / 2.0,
            (self.row_min + self.row_max) as f64 / 2.0,
        )
    }

    pub fn size(&self) -> Vector2<f64> {
        Vector2::new(
            (self.col_max - self.col_min + 1) as f64,
            (self.row_max - self.row_min + 1) as f64,
        )
    }
}

pub(crate) fn back_project(u: f64, v: f64, d: f64, intr: &CameraIntrinsics) -> Vector3<f64> {
    Vector3::new((u - intr.cx) * d / intr.fx, (v - intr.cy) * d / intr.fy, d)
}

/// Pinhole back-projection of pixel `(u, v)` at depth `d`.
pub fn project_pixel_to_camera(
    u: f64,
    v: f64,
    d: f64,
    intr: &CameraIntrinsics,
) -> Result<Vector3<f64>> {
    if !(d > 0.0) {
        return Err(Error::invalid(format!("depth must be positive, got {d}")));
    }
    if !(u >= 0.0 && u < intr.width as f64 && v >= 0.0 && v < intr.height as f64) {
        return Err(Error::invalid(format!(
            "pixel ({u}, {v}) outside {}x{} image",
            intr.width, intr.height
        )));
    }
    Ok(back_project(u, v, d, intr))
}

/// Forward projection; `None` for points at or behind the image plane.
pub fn project_camera_to_pixel(p: &Vector3<f64>, intr: &CameraIntrinsics) -> Option<Vector2<f64>> {
    (p.z > 0.0).then(|| {
        Vector2::new(
            intr.fx * p.x / p.z + intr.cx,
            intr.fy * p.y / p.z + intr.cy,
        )
    })
}

/// Axis-aligned extent of `bx` after applying `pose` to all eight corners.
fn transform_box(bx: &ObstacleBox, pose: &Pose, frame: Frame) -> ObstacleBox {
    let corners = bx.corners().map(|c| pose.transform_point(&c));
    let mut lo = corners[0];
    let mut hi = corners[0];
    for c in &corners[1..] {
        lo = lo.inf(c);
        hi = hi.sup(c);
    }
    ObstacleBox {
        frame,
        center: pose.transform_point(&bx.center),
        size: hi - lo,
    }
}

pub fn transform_box_camera_to_map(bx: &ObstacleBox, pose: &Pose) -> Result<ObstacleBox> {
    if bx.frame != Frame::Camera {
        return Err(Error::invalid("expected a camera-frame box"));
    }
    Ok(transform_box(bx, pose, Frame::Map))
}

pub fn transform_box_map_to_camera(bx: &ObstacleBox, pose: &Pose) -> Result<ObstacleBox> {
    if bx.frame != Frame::Map {
        return Err(Error::invalid("expected a map-frame box"));
    }
    Ok(transform_box(bx, &pose.inverse(), Frame::Camera))
}

/// Intersection area of the x-y footprints of two map boxes.
pub fn top_view_overlap_area(a: &ObstacleBox, b: &ObstacleBox) -> f64 {
    let (alo, ahi) = (a.min(), a.max());
    let (blo, bhi) = (b.min(), b.max());
    let dx = ahi.x.min(bhi.x) - alo.x.max(blo.x);
    let dy = ahi.y.min(bhi.y) - alo.y.max(blo.y);
    if dx <= 0.0 || dy <= 0.0 {
        0.0
    } else {
        dx * dy
    }
}

/// True when every corner of `bx` projects strictly inside the image with
/// `margin` pixels to spare.
pub fn box_fully_in_view(
    bx: &ObstacleBox,
    pose: &Pose,
    intr: &CameraIntrinsics,
    margin: f64,
) -> bool {
    let inv = pose.inverse();
    bx.corners().iter().all(|c| {
        let pc = inv.transform_point(c);
        match project_camera_to_pixel(&pc, intr) {
            Some(px) => {
                px.x > margin
                    && px.y > margin
                    && px.x < intr.width as f64 - 1.0 - margin
                    && px.y < intr.height as f64 - 1.0 - margin
            }
            None => false,
        }
    })
}
