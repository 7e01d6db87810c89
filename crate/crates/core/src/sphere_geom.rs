//! Coordinate systems on the viewing sphere.
//!
//! Three frames are in play:
//!
//! * [`SphereDir`]: longitude/latitude in degrees, lon in `[-180, 180)`,
//!   lat in `[-90, 90]`.
//! * [`EquirectCoord`]: continuous pixel coordinates of an equirectangular
//!   raster. Integer pixel `p` is sampled at `p + 0.5`; x is cyclic with
//!   period `w`, y is clamped to `[0, h]`.
//! * [`ViewportCoord`]: normalized tangent-plane coordinates of a gnomonic
//!   viewport, `|u| = 1` / `|v| = 1` on the viewport border, `v` pointing
//!   north.
//!
//! The 3D axis convention is `x = cos(lat)cos(lon)`, `y = cos(lat)sin(lon)`,
//! `z = sin(lat)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tessellation::Viewport;

/// Slack allowed on the viewport border by [`gnomonic_forward`] so that
/// points exactly at half-FOV map to `|u| = 1` instead of falling outside
/// through rounding.
pub const BORDER_EPS: f64 = 1e-12;

/// A direction on the viewing sphere, in degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SphereDir {
    lon: f64,
    lat: f64,
}

impl SphereDir {
    /// Builds a canonical direction; see [`normalize_dir`].
    pub fn new(lon: f64, lat: f64) -> Result<Self> {
        normalize_dir(lon, lat)
    }

    pub fn lon(&self) -> f64 {
        self.lon
    }

    pub fn lat(&self) -> f64 {
        self.lat
    }

    pub fn to_vec(&self) -> UnitVec3 {
        dir_to_vec(*self)
    }
}

/// Reduces `lon` into `[-180, 180)`. Already-canonical values are returned
/// untouched, which keeps the reduction idempotent bit for bit.
pub fn wrap_lon(lon: f64) -> f64 {
    if (-180.0..180.0).contains(&lon) {
        return lon;
    }
    let r = (lon + 180.0).rem_euclid(360.0) - 180.0;
    // rem_euclid may round up to the modulus itself.
    if r >= 180.0 {
        -180.0
    } else {
        r
    }
}

/// Canonicalizes a longitude/latitude pair. Latitudes beyond the poles are
/// rejected rather than reflected.
pub fn normalize_dir(lon: f64, lat: f64) -> Result<SphereDir> {
    if !lon.is_finite() {
        return Err(Error::NonFinite("longitude"));
    }
    if !lat.is_finite() {
        return Err(Error::NonFinite("latitude"));
    }
    if !(-90.0..=90.0).contains(&lat) {
        return Err(Error::LatitudeOutOfRange(lat));
    }
    Ok(SphereDir {
        lon: wrap_lon(lon),
        lat,
    })
}

/// A unit-norm vector in the sphere's 3D frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UnitVec3 {
    x: f64,
    y: f64,
    z: f64,
}

impl UnitVec3 {
    /// Normalizes `(x, y, z)`; fails on the zero vector.
    pub fn new(x: f64, y: f64, z: f64) -> Result<Self> {
        let n = (x * x + y * y + z * z).sqrt();
        if !n.is_finite() {
            return Err(Error::NonFinite("vector component"));
        }
        if n == 0.0 {
            return Err(Error::ZeroVector);
        }
        Ok(Self {
            x: x / n,
            y: y / n,
            z: z / n,
        })
    }

    pub(crate) fn from_array_unchecked(a: [f64; 3]) -> Self {
        let n = norm(a);
        Self {
            x: a[0] / n,
            y: a[1] / n,
            z: a[2] / n,
        }
    }

    pub fn x(&self) -> f64 {
        self.x
    }

    pub fn y(&self) -> f64 {
        self.y
    }

    pub fn z(&self) -> f64 {
        self.z
    }

    pub fn to_array(&self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }

    pub fn dot(&self, other: &UnitVec3) -> f64 {
        dot(self.to_array(), other.to_array())
    }
}

pub(crate) fn dot(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub(crate) fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

pub(crate) fn norm(a: [f64; 3]) -> f64 {
    dot(a, a).sqrt()
}

pub fn dir_to_vec(d: SphereDir) -> UnitVec3 {
    let (sin_lon, cos_lon) = d.lon.to_radians().sin_cos();
    let (sin_lat, cos_lat) = d.lat.to_radians().sin_cos();
    UnitVec3 {
        x: cos_lat * cos_lon,
        y: cos_lat * sin_lon,
        z: sin_lat,
    }
}

/// Inverse of [`dir_to_vec`]. At the poles the longitude is defined as 0.
pub fn vec_to_dir(v: UnitVec3) -> SphereDir {
    let [x, y, z] = v.to_array();
    let rho = x.hypot(y);
    let lat = z.atan2(rho).to_degrees().clamp(-90.0, 90.0);
    let lon = if rho == 0.0 {
        0.0
    } else {
        wrap_lon(y.atan2(x).to_degrees())
    };
    SphereDir { lon, lat }
}

/// Continuous equirectangular pixel coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EquirectCoord {
    pub x: f64,
    pub y: f64,
}

impl EquirectCoord {
    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }
}

fn wrap_x(x: f64, w: f64) -> f64 {
    if (0.0..w).contains(&x) {
        return x;
    }
    let r = x.rem_euclid(w);
    if r >= w {
        0.0
    } else {
        r
    }
}

pub fn equirect_to_dir(c: EquirectCoord, w: usize, h: usize) -> SphereDir {
    let (wf, hf) = (w as f64, h as f64);
    let x = wrap_x(c.x, wf);
    let y = c.y.clamp(0.0, hf);
    SphereDir {
        lon: wrap_lon(x / wf * 360.0 - 180.0),
        lat: (90.0 - y / hf * 180.0).clamp(-90.0, 90.0),
    }
}

pub fn dir_to_equirect(d: SphereDir, w: usize, h: usize) -> EquirectCoord {
    let (wf, hf) = (w as f64, h as f64);
    EquirectCoord {
        x: wrap_x((d.lon + 180.0) / 360.0 * wf, wf),
        y: (90.0 - d.lat) / 180.0 * hf,
    }
}

/// Normalized coordinates on a viewport's tangent plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ViewportCoord {
    pub u: f64,
    pub v: f64,
}

impl ViewportCoord {
    pub fn new(u: f64, v: f64) -> Self {
        Self { u, v }
    }

    /// Strict interior of the square footprint; the border is outside.
    pub fn is_interior(&self) -> bool {
        self.u.abs() < 1.0 && self.v.abs() < 1.0
    }
}

/// Tangent-plane basis of a north-aligned gnomonic viewport.
///
/// `east` and `north` are the local directions of increasing longitude and
/// latitude at the center. At a pole the center longitude is taken as 0, so
/// the frame is the limit of the north-aligned frame along the lon 0
/// meridian.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ViewportFrame {
    center: [f64; 3],
    east: [f64; 3],
    north: [f64; 3],
    tan_half_fov: f64,
}

impl ViewportFrame {
    pub fn new(center: SphereDir, fov_deg: f64) -> Self {
        let lon = if center.lat.abs() == 90.0 {
            0.0
        } else {
            center.lon
        };
        let (sin_lon, cos_lon) = lon.to_radians().sin_cos();
        let (sin_lat, cos_lat) = center.lat.to_radians().sin_cos();
        Self {
            center: [cos_lat * cos_lon, cos_lat * sin_lon, sin_lat],
            east: [-sin_lon, cos_lon, 0.0],
            north: [-sin_lat * cos_lon, -sin_lat * sin_lon, cos_lat],
            tan_half_fov: (fov_deg / 2.0).to_radians().tan(),
        }
    }

    pub fn for_viewport(vp: &Viewport) -> Self {
        Self::new(vp.center, vp.fov)
    }

    pub fn center(&self) -> UnitVec3 {
        UnitVec3::from_array_unchecked(self.center)
    }

    pub fn tan_half_fov(&self) -> f64 {
        self.tan_half_fov
    }

    /// Central projection onto the tangent plane; `None` for directions in
    /// the hemisphere facing away from the center.
    pub fn project(&self, p: [f64; 3]) -> Option<ViewportCoord> {
        let cos_c = dot(p, self.center);
        if cos_c <= 0.0 {
            return None;
        }
        let scale = 1.0 / (cos_c * self.tan_half_fov);
        Some(ViewportCoord {
            u: dot(p, self.east) * scale,
            v: dot(p, self.north) * scale,
        })
    }

    /// Point of the tangent plane back onto the sphere (not normalized).
    pub fn unproject_raw(&self, c: ViewportCoord) -> [f64; 3] {
        let a = c.u * self.tan_half_fov;
        let b = c.v * self.tan_half_fov;
        [
            self.center[0] + a * self.east[0] + b * self.north[0],
            self.center[1] + a * self.east[1] + b * self.north[1],
            self.center[2] + a * self.east[2] + b * self.north[2],
        ]
    }

    pub fn unproject(&self, c: ViewportCoord) -> UnitVec3 {
        UnitVec3::from_array_unchecked(self.unproject_raw(c))
    }

    /// Whether `p` lies strictly inside the square footprint.
    pub fn contains(&self, p: [f64; 3]) -> bool {
        self.project(p).is_some_and(|c| c.is_interior())
    }
}

/// Gnomonic projection of `d` into `vp`. Returns `None` (the outside
/// marker) when `d` is behind the tangent plane or beyond the border.
pub fn gnomonic_forward(d: SphereDir, vp: &Viewport) -> Option<ViewportCoord> {
    let frame = ViewportFrame::for_viewport(vp);
    frame
        .project(dir_to_vec(d).to_array())
        .filter(|c| c.u.abs() <= 1.0 + BORDER_EPS && c.v.abs() <= 1.0 + BORDER_EPS)
}

/// Inverse gnomonic projection; defined on the whole tangent plane.
pub fn gnomonic_inverse(c: ViewportCoord, vp: &Viewport) -> SphereDir {
    vec_to_dir(ViewportFrame::for_viewport(vp).unproject(c))
}

/// Great-circle angle between two directions in degrees, `atan2(|a x b|, a.b)`.
pub fn angular_distance(a: SphereDir, b: SphereDir) -> f64 {
    angle_between(dir_to_vec(a).to_array(), dir_to_vec(b).to_array())
}

pub(crate) fn angle_between(a: [f64; 3], b: [f64; 3]) -> f64 {
    norm(cross(a, b)).atan2(dot(a, b)).to_degrees()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tessellation::Viewport;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    fn vp(lon: f64, lat: f64, fov: f64) -> Viewport {
        Viewport::new(SphereDir::new(lon, lat).unwrap(), fov, 64, 0).unwrap()
    }

    #[test]
    fn normalize_examples() {
        let d = normalize_dir(190.0, 10.0).unwrap();
        assert_eq!((d.lon(), d.lat()), (-170.0, 10.0));
        let d = normalize_dir(-180.0, 0.0).unwrap();
        assert_eq!((d.lon(), d.lat()), (-180.0, 0.0));
        let d = normalize_dir(540.0, -45.0).unwrap();
        assert_eq!((d.lon(), d.lat()), (-180.0, -45.0));
        let d = normalize_dir(180.0, 0.0).unwrap();
        assert_eq!(d.lon(), -180.0);
    }

    #[test]
    fn normalize_rejects_out_of_range_latitude() {
        assert_eq!(
            normalize_dir(0.0, 90.5),
            Err(Error::LatitudeOutOfRange(90.5))
        );
        assert!(normalize_dir(0.0, -91.0).is_err());
        assert!(normalize_dir(f64::NAN, 0.0).is_err());
        assert!(normalize_dir(0.0, 90.0).is_ok());
    }

    #[test]
    fn normalize_is_idempotent_on_tiny_negative() {
        // rem_euclid(-1e-300 + 180, 360) path must stay in range
        let d = normalize_dir(-540.0 - 1e-13, 0.0).unwrap();
        assert!((-180.0..180.0).contains(&d.lon()));
        let again = normalize_dir(d.lon(), d.lat()).unwrap();
        assert_eq!(d, again);
    }

    #[test]
    fn dir_to_vec_axes() {
        let v = dir_to_vec(SphereDir::new(0.0, 0.0).unwrap());
        assert_eq!(v.to_array(), [1.0, 0.0, 0.0]);
        let v = dir_to_vec(SphereDir::new(90.0, 0.0).unwrap());
        assert!(close(v.x(), 0.0, 1e-15) && close(v.y(), 1.0, 1e-15) && v.z() == 0.0);
        let v = dir_to_vec(SphereDir::new(0.0, 90.0).unwrap());
        assert!(close(v.x(), 0.0, 1e-15) && v.y() == 0.0 && close(v.z(), 1.0, 1e-15));
    }

    #[test]
    fn vec_to_dir_examples() {
        let d = vec_to_dir(UnitVec3::new(0.0, 0.0, 1.0).unwrap());
        assert_eq!((d.lon(), d.lat()), (0.0, 90.0));
        let d = vec_to_dir(UnitVec3::new(-1.0, 0.0, 0.0).unwrap());
        assert_eq!((d.lon(), d.lat()), (-180.0, 0.0));
        let s = 0.5f64.sqrt();
        let d = vec_to_dir(UnitVec3::new(0.5, 0.5, s).unwrap());
        assert!(close(d.lon(), 45.0, 1e-12) && close(d.lat(), 45.0, 1e-12));
        let back = dir_to_vec(SphereDir::new(45.0, 45.0).unwrap());
        assert!(close(back.x(), 0.5, 1e-15) && close(back.z(), s, 1e-15));
    }

    #[test]
    fn zero_vector_is_rejected() {
        assert_eq!(UnitVec3::new(0.0, 0.0, 0.0), Err(Error::ZeroVector));
    }

    #[test]
    fn equirect_examples() {
        let (w, h) = (1024, 512);
        let d = equirect_to_dir(EquirectCoord::new(512.0, 256.0), w, h);
        assert_eq!((d.lon(), d.lat()), (0.0, 0.0));
        let d = equirect_to_dir(EquirectCoord::new(0.0, 0.0), w, h);
        assert_eq!((d.lon(), d.lat()), (-180.0, 90.0));
        let d = equirect_to_dir(EquirectCoord::new(768.0, 128.0), w, h);
        assert_eq!((d.lon(), d.lat()), (90.0, 45.0));

        let c = dir_to_equirect(SphereDir::new(0.0, 0.0).unwrap(), w, h);
        assert_eq!((c.x, c.y), (512.0, 256.0));
        let c = dir_to_equirect(SphereDir::new(-180.0, 90.0).unwrap(), w, h);
        assert_eq!((c.x, c.y), (0.0, 0.0));
    }

    #[test]
    fn equirect_wraps_x_and_clamps_y() {
        let d = equirect_to_dir(EquirectCoord::new(1024.0 + 512.0, -5.0), 1024, 512);
        assert_eq!((d.lon(), d.lat()), (0.0, 90.0));
        let d = equirect_to_dir(EquirectCoord::new(-256.0, 600.0), 1024, 512);
        assert_eq!((d.lon(), d.lat()), (90.0, -90.0));
    }

    #[test]
    fn gnomonic_examples() {
        let v = vp(0.0, 0.0, 24.0);
        let c = gnomonic_forward(v.center, &v).unwrap();
        assert_eq!((c.u, c.v), (0.0, 0.0));

        let c = gnomonic_forward(SphereDir::new(12.0, 0.0).unwrap(), &v).unwrap();
        assert!(close(c.u, 1.0, 1e-12) && close(c.v, 0.0, 1e-15));
        assert!(!c.is_interior());

        let c = gnomonic_forward(SphereDir::new(6.0, 0.0).unwrap(), &v).unwrap();
        let expected = 6f64.to_radians().tan() / 12f64.to_radians().tan();
        assert!(close(c.u, expected, 1e-14));
        assert!(close(c.u, 0.4945, 1e-4));

        let d = gnomonic_inverse(ViewportCoord::new(1.0, 0.0), &v);
        assert!(close(d.lon(), 12.0, 1e-12) && close(d.lat(), 0.0, 1e-12));
        assert_eq!(gnomonic_inverse(ViewportCoord::new(0.0, 0.0), &v), v.center);
    }

    #[test]
    fn gnomonic_v_points_north() {
        let v = vp(30.0, 20.0, 24.0);
        let c = gnomonic_forward(SphereDir::new(30.0, 25.0).unwrap(), &v).unwrap();
        assert!(c.v > 0.0 && close(c.u, 0.0, 1e-12));
        let c = gnomonic_forward(SphereDir::new(33.0, 20.0).unwrap(), &v).unwrap();
        assert!(c.u > 0.0);
    }

    #[test]
    fn gnomonic_outside_marker() {
        let v = vp(0.0, 0.0, 24.0);
        assert!(gnomonic_forward(SphereDir::new(180.0, 0.0).unwrap(), &v).is_none());
        assert!(gnomonic_forward(SphereDir::new(90.0, 0.0).unwrap(), &v).is_none());
        assert!(gnomonic_forward(SphereDir::new(13.0, 0.0).unwrap(), &v).is_none());
    }

    #[test]
    fn polar_viewport_uses_meridian_zero_frame() {
        let v = vp(123.0, 90.0, 24.0);
        let d = gnomonic_inverse(ViewportCoord::new(0.0, 0.5), &v);
        // north on the tangent plane at the pole points toward lon 180
        assert!(close(d.lon().abs(), 180.0, 1e-9));
        let c = gnomonic_forward(d, &v).unwrap();
        assert!(close(c.v, 0.5, 1e-12) && close(c.u, 0.0, 1e-12));
    }

    #[test]
    fn angular_distance_examples() {
        let o = SphereDir::new(0.0, 0.0).unwrap();
        assert_eq!(angular_distance(o, o), 0.0);
        assert!(close(angular_distance(o, SphereDir::new(180.0, 0.0).unwrap()), 180.0, 1e-12));
        assert!(close(angular_distance(o, SphereDir::new(90.0, 0.0).unwrap()), 90.0, 1e-12));
        // tiny separations stay accurate where acos would lose them
        let a = SphereDir::new(0.0, 0.0).unwrap();
        let b = SphereDir::new(1e-9, 0.0).unwrap();
        assert!(close(angular_distance(a, b), 1e-9, 1e-20));
    }
}
