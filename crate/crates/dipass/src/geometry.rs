//! 3-D geometry: positions, PA orientations and the global-to-local
//! coordinate transform that places a user in a PA's beam frame.

use std::f64::consts::{FRAC_PI_2, PI};

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::config::SystemConfig;
use crate::DipassError;

/// A point in the global frame, meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Vec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Vec3 {
    pub fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn as_vector(&self) -> Vector3<f64> {
        Vector3::new(self.x, self.y, self.z)
    }

    pub fn distance(&self, other: &Vec3) -> f64 {
        (self.as_vector() - other.as_vector()).norm()
    }
}

/// PA beam orientation: elevation `theta` in (pi/2, pi] measured from the
/// positive z-axis (pi points straight down) and azimuth `phi` in (-pi, pi]
/// measured from the positive x-axis in the x-y plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Orientation {
    theta: f64,
    phi: f64,
}

impl Orientation {
    pub fn new(theta: f64, phi: f64) -> Result<Self, DipassError> {
        if !theta.is_finite() || !phi.is_finite() {
            return Err(DipassError::Geometry("non-finite orientation angle".into()));
        }
        if !(theta > FRAC_PI_2 && theta <= PI) {
            return Err(DipassError::Geometry(format!(
                "elevation must lie in (pi/2, pi], got {theta}"
            )));
        }
        Ok(Self {
            theta,
            phi: normalize_angle(phi),
        })
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn phi(&self) -> f64 {
        self.phi
    }

    /// Unit vector of the beam axis in the global frame.
    pub fn boresight(&self) -> Vector3<f64> {
        Vector3::new(
            self.theta.sin() * self.phi.cos(),
            self.theta.sin() * self.phi.sin(),
            self.theta.cos(),
        )
    }
}

/// Wraps an angle into (-pi, pi].
pub fn normalize_angle(a: f64) -> f64 {
    let mut r = a.rem_euclid(2.0 * PI);
    if r > PI {
        r -= 2.0 * PI;
    }
    r
}

/// A user position expressed in a PA's beam frame: the beam propagates along
/// the local +y axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalCoords {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl LocalCoords {
    pub fn norm(&self) -> f64 {
        (self.x * self.x + self.y * self.y + self.z * self.z).sqrt()
    }
}

/// Rotation by `angle` around the z-axis (right-hand rule).
pub fn rotation_z(angle: f64) -> Matrix3<f64> {
    let (s, c) = angle.sin_cos();
    Matrix3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0)
}

/// Rotation by `angle` around the x-axis (right-hand rule).
pub fn rotation_x(angle: f64) -> Matrix3<f64> {
    let (s, c) = angle.sin_cos();
    Matrix3::new(1.0, 0.0, 0.0, 0.0, c, -s, 0.0, s, c)
}

/// Transforms a user position into the PA's local beam frame:
/// R_x(theta - pi/2) * R_z(pi/2 - phi) * (user - pa).
pub fn to_local(user: &Vec3, pa: &Vec3, orient: &Orientation) -> Result<LocalCoords, DipassError> {
    let rel = user.as_vector() - pa.as_vector();
    if rel.norm() == 0.0 {
        return Err(DipassError::Geometry(
            "user and PA positions coincide".into(),
        ));
    }
    let local = rotation_x(orient.theta() - FRAC_PI_2) * rotation_z(FRAC_PI_2 - orient.phi()) * rel;
    Ok(LocalCoords {
        x: local.x,
        y: local.y,
        z: local.z,
    })
}

/// Entrance coordinates of the N waveguides: x = (2n-1) Dx / (2N), y = 0,
/// z = Dz, for n = 1..N.
pub fn waveguide_entrances(cfg: &SystemConfig) -> Vec<Vec3> {
    let [dx, _, dz] = cfg.region;
    let n = cfg.num_waveguides;
    (1..=n)
        .map(|i| Vec3::new((2 * i - 1) as f64 * dx / (2.0 * n as f64), 0.0, dz))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn cfg_with_n(n: usize) -> SystemConfig {
        let mut raw = crate::config::RawConfig::default();
        raw.num_waveguides = n;
        SystemConfig::from_raw(raw).unwrap()
    }

    #[test]
    fn entrances() {
        let xs: Vec<f64> = waveguide_entrances(&cfg_with_n(1)).iter().map(|p| p.x).collect();
        assert_eq!(xs, vec![5.0]);
        let xs: Vec<f64> = waveguide_entrances(&cfg_with_n(2)).iter().map(|p| p.x).collect();
        assert_eq!(xs, vec![2.5, 7.5]);
        let xs: Vec<f64> = waveguide_entrances(&cfg_with_n(4)).iter().map(|p| p.x).collect();
        assert_eq!(xs, vec![1.25, 3.75, 6.25, 8.75]);
        for p in waveguide_entrances(&cfg_with_n(4)) {
            assert_eq!(p.y, 0.0);
            assert_eq!(p.z, 3.0);
        }
    }

    #[test]
    fn rotations() {
        assert_relative_eq!(rotation_z(0.0), Matrix3::identity());
        let v = rotation_x(FRAC_PI_2) * Vector3::new(0.0, 0.0, -3.0);
        assert_relative_eq!(v, Vector3::new(0.0, 3.0, 0.0), epsilon = 1e-12);
        let v = rotation_z(FRAC_PI_2) * Vector3::new(1.0, 0.0, 0.0);
        assert_relative_eq!(v, Vector3::new(0.0, 1.0, 0.0), epsilon = 1e-12);
    }

    #[test]
    fn local_frame_examples() {
        let pa = Vec3::new(0.0, 0.0, 3.0);
        // User straight below a downward-pointing PA.
        let o = Orientation::new(PI, FRAC_PI_2).unwrap();
        let l = to_local(&Vec3::new(0.0, 0.0, 0.0), &pa, &o).unwrap();
        assert_relative_eq!(l.x, 0.0, epsilon = 1e-12);
        assert_relative_eq!(l.y, 3.0, epsilon = 1e-12);
        assert_relative_eq!(l.z, 0.0, epsilon = 1e-12);

        // Beam along +y, user on axis. theta = pi/2 is outside the allowed
        // range, so nudge by an epsilon that stays below the tolerance.
        let o = Orientation::new(FRAC_PI_2 + 1e-13, FRAC_PI_2).unwrap();
        let l = to_local(&Vec3::new(0.0, 5.0, 3.0), &pa, &o).unwrap();
        assert_relative_eq!(l.y, 5.0, epsilon = 1e-9);
        assert_relative_eq!(l.x, 0.0, epsilon = 1e-9);

        // Orientation produced by the single-PA solver puts the user on
        // boresight; verified here by direct matrix multiplication.
        let user = Vec3::new(3.0, 4.0, 0.0);
        let o = Orientation::new(f64::atan2(5.0, -3.0), f64::atan2(4.0, 3.0)).unwrap();
        let l = to_local(&user, &pa, &o).unwrap();
        assert_relative_eq!(l.x, 0.0, epsilon = 1e-9);
        assert_relative_eq!(l.z, 0.0, epsilon = 1e-9);
        assert_relative_eq!(l.y, 34.0f64.sqrt(), epsilon = 1e-9);
    }

    #[test]
    fn coincident_points_rejected() {
        let p = Vec3::new(1.0, 2.0, 3.0);
        let o = Orientation::new(PI, 0.0).unwrap();
        assert!(to_local(&p, &p, &o).is_err());
    }

    proptest! {
        #[test]
        fn rotation_orthonormal(a in -10.0f64..10.0) {
            for r in [rotation_z(a), rotation_x(a)] {
                let e = (r.transpose() * r - Matrix3::identity()).norm();
                prop_assert!(e < 1e-12);
                prop_assert!((r.determinant() - 1.0).abs() < 1e-12);
            }
        }

        #[test]
        fn local_transform_is_isometry(
            ux in -10.0f64..10.0, uy in -10.0f64..10.0, uz in -10.0f64..10.0,
            theta in 1.5708f64..std::f64::consts::PI,
            phi in -3.14f64..3.14,
        ) {
            let pa = Vec3::new(5.0, 2.0, 3.0);
            let user = Vec3::new(ux, uy, uz);
            prop_assume!(user.distance(&pa) > 1e-6);
            let o = Orientation::new(theta.max(1.5709), phi).unwrap();
            let l = to_local(&user, &pa, &o).unwrap();
            prop_assert!((l.norm() - user.distance(&pa)).abs() < 1e-12 * (1.0 + l.norm()));
            // Round trip recovers the offset.
            let back = rotation_z(o.phi() - FRAC_PI_2)
                * rotation_x(FRAC_PI_2 - o.theta())
                * Vector3::new(l.x, l.y, l.z);
            let rel = user.as_vector() - pa.as_vector();
            prop_assert!((back - rel).norm() < 1e-12 * (1.0 + rel.norm()));
        }
    }
}
