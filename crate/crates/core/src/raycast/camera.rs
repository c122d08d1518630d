use glam::DVec3;

use super::RayError;
use crate::paint::Room;

/// Direction rooms are viewed from by default.
const ROOM_VIEW_DIR: DVec3 = DVec3::new(-0.55, -0.35, -0.76);

/// Pinhole camera held in double precision.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Camera {
    pub eye: DVec3,
    pub right: DVec3,
    pub up: DVec3,
    pub forward: DVec3,
    /// Vertical field of view, radians.
    pub fov_y: f64,
    pub width: u32,
    pub height: u32,
}

impl Camera {
    pub fn look_at(
        eye: DVec3,
        target: DVec3,
        up_hint: DVec3,
        fov_y: f64,
        width: u32,
        height: u32,
    ) -> Result<Self, RayError> {
        Self::look_dir(eye, target - eye, up_hint, fov_y, width, height)
    }

    pub fn look_dir(
        eye: DVec3,
        dir: DVec3,
        up_hint: DVec3,
        fov_y: f64,
        width: u32,
        height: u32,
    ) -> Result<Self, RayError> {
        let forward = dir
            .try_normalize()
            .ok_or(RayError::InvalidCamera("zero view direction"))?;
        let right = forward
            .cross(up_hint)
            .try_normalize()
            .ok_or(RayError::InvalidCamera(
                "up vector parallel to view direction",
            ))?;
        let up = right.cross(forward);
        let cam = Camera {
            eye,
            right,
            up,
            forward,
            fov_y,
            width,
            height,
        };
        cam.validate()?;
        Ok(cam)
    }

    /// Preset looking at a room's center along a fixed oblique direction,
    /// backed off until the whole box fits the vertical field of view.
    pub fn room_view(room: &Room, fov_y: f64, width: u32, height: u32) -> Result<Self, RayError> {
        let b = room.aabb();
        let dist = 0.5 * room.diameter() / (fov_y * 0.5).sin();
        let forward = ROOM_VIEW_DIR.normalize();
        Self::look_dir(
            b.center() - forward * dist,
            forward,
            DVec3::Y,
            fov_y,
            width,
            height,
        )
    }

    pub fn validate(&self) -> Result<(), RayError> {
        if !self.eye.is_finite() {
            return Err(RayError::InvalidCamera("eye not finite"));
        }
        if !(self.fov_y > 0.0 && self.fov_y < std::f64::consts::PI) {
            return Err(RayError::InvalidCamera("fov must be in (0, pi)"));
        }
        if self.width == 0 || self.height == 0 {
            return Err(RayError::InvalidCamera("empty image"));
        }
        let tol = 1e-12;
        let unit = |v: DVec3| (v.length() - 1.0).abs() <= tol;
        if !(unit(self.right) && unit(self.up) && unit(self.forward)) {
            return Err(RayError::InvalidCamera("basis not normalized"));
        }
        if self.right.dot(self.up).abs() > tol
            || self.right.dot(self.forward).abs() > tol
            || self.up.dot(self.forward).abs() > tol
        {
            return Err(RayError::InvalidCamera("basis not orthogonal"));
        }
        Ok(())
    }

    /// Unit direction through image position `(x, y)` in pixels, with `y`
    /// growing downwards. Pixel centers sit at half-integers.
    pub fn direction(&self, x: f64, y: f64) -> DVec3 {
        let tan = (self.fov_y * 0.5).tan();
        let aspect = self.width as f64 / self.height as f64;
        let sx = (2.0 * x / self.width as f64 - 1.0) * tan * aspect;
        let sy = (1.0 - 2.0 * y / self.height as f64) * tan;
        (self.forward + self.right * sx + self.up * sy).normalize()
    }

    pub fn pixel_direction(&self, px: u32, py: u32) -> DVec3 {
        self.direction(px as f64 + 0.5, py as f64 + 0.5)
    }

    /// View angle subtended by one pixel at the image center, radians.
    pub fn pixel_angle(&self) -> f64 {
        2.0 * (self.fov_y * 0.5).tan() / self.height as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn room_view_sees_the_whole_box() {
        let room = Room::new("r", [10.0, 0.0, -5.0], [14.0, 3.0, 1.0], 1.0);
        let cam = Camera::room_view(&room, 0.8, 64, 64).unwrap();
        let b = room.aabb();
        for k in 0..8 {
            let corner = DVec3::new(
                if k & 1 == 0 { b.min.x } else { b.max.x },
                if k & 2 == 0 { b.min.y } else { b.max.y },
                if k & 4 == 0 { b.min.z } else { b.max.z },
            );
            let v = (corner - cam.eye).normalize();
            assert!(v.dot(cam.forward) >= (cam.fov_y * 0.5).cos() - 1e-12);
        }
    }

    #[test]
    fn center_pixel_looks_forward() {
        let c = Camera::look_at(DVec3::ZERO, DVec3::Z, DVec3::Y, 1.0, 3, 3).unwrap();
        assert!((c.pixel_direction(1, 1) - DVec3::Z).length() < 1e-15);
        assert!(c.pixel_direction(0, 0).y > 0.0);
        assert!(c.pixel_direction(2, 1).dot(c.right) > 0.0);
    }

    #[test]
    fn rejects_bad_fov_and_up() {
        assert!(Camera::look_at(DVec3::ZERO, DVec3::Z, DVec3::Y, 0.0, 1, 1).is_err());
        assert!(Camera::look_at(DVec3::ZERO, DVec3::Z, DVec3::Y, 3.2, 1, 1).is_err());
        assert!(Camera::look_at(DVec3::ZERO, DVec3::Z, DVec3::Z, 1.0, 1, 1).is_err());
    }
}
