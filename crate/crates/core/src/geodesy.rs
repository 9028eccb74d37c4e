//! WGS84 conversions between geodetic, ECEF and local East-North-Up frames.
//!
//! Angles cross the public API in degrees and are converted to radians
//! internally. Altitudes are heights above the ellipsoid.

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::GeodesyError;

/// Reference ellipsoid with its derived eccentricities.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EllipsoidModel {
    pub semi_major_a: f64,
    pub semi_minor_b: f64,
    pub flattening_f: f64,
    /// First eccentricity squared, (a² − b²)/a².
    pub ecc2_e2: f64,
    /// Second eccentricity squared, (a² − b²)/b².
    pub ecc2p_ep2: f64,
}

impl EllipsoidModel {
    pub const WGS84: EllipsoidModel = EllipsoidModel::from_axis_flattening(6378137.0, 1.0 / 298.257223563);

    pub const fn from_axis_flattening(semi_major_a: f64, flattening_f: f64) -> Self {
        let semi_minor_b = semi_major_a * (1.0 - flattening_f);
        let a2 = semi_major_a * semi_major_a;
        let b2 = semi_minor_b * semi_minor_b;
        EllipsoidModel {
            semi_major_a,
            semi_minor_b,
            flattening_f,
            ecc2_e2: (a2 - b2) / a2,
            ecc2p_ep2: (a2 - b2) / b2,
        }
    }
}

impl Default for EllipsoidModel {
    fn default() -> Self {
        Self::WGS84
    }
}

/// Latitude, longitude (degrees) and ellipsoidal height (meters).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeodeticCoord {
    #[serde(rename = "lat")]
    pub lat_deg: f64,
    #[serde(rename = "lon")]
    pub lon_deg: f64,
    #[serde(rename = "alt")]
    pub alt_m: f64,
}

impl GeodeticCoord {
    /// Validating constructor. Longitude is normalized into (−180, 180].
    pub fn new(lat_deg: f64, lon_deg: f64, alt_m: f64) -> Result<Self, GeodesyError> {
        if !(lat_deg.is_finite() && lon_deg.is_finite() && alt_m.is_finite()) {
            return Err(GeodesyError::NonFinite);
        }
        if !(-90.0..=90.0).contains(&lat_deg) {
            return Err(GeodesyError::LatitudeOutOfRange(lat_deg));
        }
        Ok(GeodeticCoord { lat_deg, lon_deg: normalize_lon_deg(lon_deg), alt_m })
    }

    pub fn is_valid(&self) -> bool {
        self.lat_deg.is_finite()
            && self.lon_deg.is_finite()
            && self.alt_m.is_finite()
            && (-90.0..=90.0).contains(&self.lat_deg)
            && self.lon_deg > -180.0
            && self.lon_deg <= 180.0
    }
}

/// Earth-Centered Earth-Fixed position in meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EcefCoord {
    pub x_m: f64,
    pub y_m: f64,
    pub z_m: f64,
}

impl EcefCoord {
    pub const fn new(x_m: f64, y_m: f64, z_m: f64) -> Self {
        EcefCoord { x_m, y_m, z_m }
    }

    pub fn to_vector(self) -> Vector3<f64> {
        Vector3::new(self.x_m, self.y_m, self.z_m)
    }

    pub fn from_vector(v: Vector3<f64>) -> Self {
        EcefCoord::new(v.x, v.y, v.z)
    }

    pub fn norm(&self) -> f64 {
        self.to_vector().norm()
    }
}

/// Offset in the local tangent frame of some reference point.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct EnuVector {
    pub east_m: f64,
    pub north_m: f64,
    pub up_m: f64,
}

impl EnuVector {
    pub const fn new(east_m: f64, north_m: f64, up_m: f64) -> Self {
        EnuVector { east_m, north_m, up_m }
    }

    pub fn to_vector(self) -> Vector3<f64> {
        Vector3::new(self.east_m, self.north_m, self.up_m)
    }

    pub fn from_vector(v: Vector3<f64>) -> Self {
        EnuVector::new(v.x, v.y, v.z)
    }

    pub fn norm(&self) -> f64 {
        self.to_vector().norm()
    }

    pub fn horizontal_norm(&self) -> f64 {
        self.east_m.hypot(self.north_m)
    }
}

pub fn normalize_lon_deg(lon_deg: f64) -> f64 {
    let mut lon = lon_deg % 360.0;
    if lon > 180.0 {
        lon -= 360.0;
    } else if lon <= -180.0 {
        lon += 360.0;
    }
    lon
}

/// Geodetic to ECEF through the geocentric latitude of the surface point
/// below `p`, then along the ellipsoid normal by the height.
pub fn geodetic_to_ecef(p: GeodeticCoord, e: &EllipsoidModel) -> EcefCoord {
    let lat = p.lat_deg.to_radians();
    let lon = p.lon_deg.to_radians();
    let one_minus_f_sq = (1.0 - e.flattening_f).powi(2);

    // atan2 form of atan((1 − f)² tan μ); well defined at the poles.
    let geocentric_lat = (one_minus_f_sq * lat.sin()).atan2(lat.cos());
    let sin_gc = geocentric_lat.sin();
    let surface_radius = (e.semi_major_a.powi(2) / (1.0 + (1.0 / one_minus_f_sq - 1.0) * sin_gc * sin_gc)).sqrt();

    let (sin_lon, cos_lon) = lon.sin_cos();
    let (sin_lat, cos_lat) = lat.sin_cos();
    let cos_gc = geocentric_lat.cos();
    let h = p.alt_m;

    EcefCoord::new(
        surface_radius * cos_gc * cos_lon + h * cos_lat * cos_lon,
        surface_radius * cos_gc * sin_lon + h * cos_lat * sin_lon,
        surface_radius * sin_gc + h * sin_lat,
    )
}

/// Closed-form ECEF to geodetic conversion (Zhu / Heikkinen).
///
/// Accurate to well below a micrometre for points near the surface. Points
/// deep inside the Earth, where the closed form has no real solution, and
/// the Earth center itself yield [`GeodesyError::DegenerateInput`].
pub fn ecef_to_geodetic(p: EcefCoord, e: &EllipsoidModel) -> Result<GeodeticCoord, GeodesyError> {
    let EcefCoord { x_m: x, y_m: y, z_m: z } = p;
    if !(x.is_finite() && y.is_finite() && z.is_finite()) {
        return Err(GeodesyError::NonFinite);
    }
    if x == 0.0 && y == 0.0 && z == 0.0 {
        return Err(GeodesyError::DegenerateInput);
    }

    let a = e.semi_major_a;
    let b = e.semi_minor_b;
    let e2 = e.ecc2_e2;
    let ep2 = e.ecc2p_ep2;
    let a2 = a * a;
    let b2 = b * b;
    let e4 = e2 * e2;
    let z2 = z * z;

    let r = x.hypot(y);
    let r2 = r * r;
    let big_f = 54.0 * b2 * z2;
    let g = r2 + (1.0 - e2) * z2 - e2 * (a2 - b2);
    let c = e4 * big_f * r2 / (g * g * g);
    let s = (1.0 + c + (c * c + 2.0 * c).sqrt()).cbrt();
    let k = s + 1.0 + 1.0 / s;
    let big_p = big_f / (3.0 * k * k * g * g);
    let q = (1.0 + 2.0 * e4 * big_p).sqrt();
    // The radicand reaches zero on the polar axis; rounding can push it
    // slightly negative there.
    let radicand = 0.5 * a2 * (1.0 + 1.0 / q) - big_p * (1.0 - e2) * z2 / (q * (1.0 + q)) - 0.5 * big_p * r2;
    let r0 = -big_p * e2 * r / (1.0 + q) + radicand.max(0.0).sqrt();
    let t = r - e2 * r0;
    let u = (t * t + z2).sqrt();
    let v = (t * t + (1.0 - e2) * z2).sqrt();
    let z0 = b2 * z / (a * v);
    let h = u * (1.0 - b2 / (a * v));

    let lat = (z + ep2 * z0).atan2(r);
    let lon = y.atan2(x);

    if !(lat.is_finite() && h.is_finite()) {
        return Err(GeodesyError::DegenerateInput);
    }
    Ok(GeodeticCoord {
        lat_deg: lat.to_degrees(),
        lon_deg: normalize_lon_deg(lon.to_degrees()),
        alt_m: h,
    })
}

/// Rotation taking ENU components at (`lat_deg`, `lon_deg`) to ECEF components.
///
/// Columns are the east, north and up unit vectors expressed in ECEF.
pub fn enu_to_ecef_rotation(lat_deg: f64, lon_deg: f64) -> Matrix3<f64> {
    let (sin_lat, cos_lat) = lat_deg.to_radians().sin_cos();
    let (sin_lon, cos_lon) = lon_deg.to_radians().sin_cos();
    Matrix3::new(
        -sin_lon, -sin_lat * cos_lon, cos_lat * cos_lon,
        cos_lon, -sin_lat * sin_lon, cos_lat * sin_lon,
        0.0, cos_lat, sin_lat,
    )
}

pub fn enu_to_ecef(v: EnuVector, reference: GeodeticCoord, e: &EllipsoidModel) -> EcefCoord {
    let origin = geodetic_to_ecef(reference, e).to_vector();
    let rot = enu_to_ecef_rotation(reference.lat_deg, reference.lon_deg);
    EcefCoord::from_vector(rot * v.to_vector() + origin)
}

pub fn ecef_to_enu(p: EcefCoord, reference: GeodeticCoord, e: &EllipsoidModel) -> EnuVector {
    let origin = geodetic_to_ecef(reference, e).to_vector();
    let rot = enu_to_ecef_rotation(reference.lat_deg, reference.lon_deg);
    EnuVector::from_vector(rot.transpose() * (p.to_vector() - origin))
}

/// Geodetic position of `reference` displaced by the ENU offset `v`.
pub fn offset_geodetic(
    reference: GeodeticCoord,
    v: EnuVector,
    e: &EllipsoidModel,
) -> Result<GeodeticCoord, GeodesyError> {
    ecef_to_geodetic(enu_to_ecef(v, reference, e), e)
}

/// Horizontal separation of `b` from `a`, measured in the tangent frame of `a`.
pub fn horizontal_distance(a: GeodeticCoord, b: GeodeticCoord, e: &EllipsoidModel) -> f64 {
    ecef_to_enu(geodetic_to_ecef(b, e), a, e).horizontal_norm()
}

#[cfg(test)]
mod tests {
    use super::*;

    const WGS84: EllipsoidModel = EllipsoidModel::WGS84;

    fn geo(lat: f64, lon: f64, alt: f64) -> GeodeticCoord {
        GeodeticCoord::new(lat, lon, alt).unwrap()
    }

    // Prime-vertical-radius form, kept independent of the geocentric
    // latitude route used by the library.
    fn standard_geodetic_to_ecef(p: GeodeticCoord) -> EcefCoord {
        let a = 6378137.0_f64;
        let f = 1.0 / 298.257223563_f64;
        let e2 = f * (2.0 - f);
        let lat = p.lat_deg.to_radians();
        let lon = p.lon_deg.to_radians();
        let n = a / (1.0 - e2 * lat.sin().powi(2)).sqrt();
        EcefCoord::new(
            (n + p.alt_m) * lat.cos() * lon.cos(),
            (n + p.alt_m) * lat.cos() * lon.sin(),
            (n * (1.0 - e2) + p.alt_m) * lat.sin(),
        )
    }

    fn assert_ecef_close(got: EcefCoord, want: EcefCoord, tol: f64) {
        let d = (got.to_vector() - want.to_vector()).norm();
        assert!(d <= tol, "got {got:?}, want {want:?}, |d| = {d:e}");
    }

    #[test]
    fn wgs84_constants_are_consistent() {
        let e = WGS84;
        assert!((e.semi_minor_b - e.semi_major_a * (1.0 - e.flattening_f)).abs() < 1e-6);
        assert!((e.semi_minor_b - 6356752.314245179).abs() < 1e-6);
        let a2 = e.semi_major_a.powi(2);
        let b2 = e.semi_minor_b.powi(2);
        assert!((e.ecc2_e2 - (a2 - b2) / a2).abs() < 1e-15);
        assert!((e.ecc2p_ep2 - (a2 - b2) / b2).abs() < 1e-15);
        assert!((e.ecc2_e2 - 0.0066943799901413165).abs() < 1e-15);
    }

    #[test]
    fn forward_equator_and_pole() {
        assert_ecef_close(geodetic_to_ecef(geo(0.0, 0.0, 0.0), &WGS84), EcefCoord::new(6378137.0, 0.0, 0.0), 1e-6);
        assert_ecef_close(geodetic_to_ecef(geo(90.0, 0.0, 0.0), &WGS84), EcefCoord::new(0.0, 0.0, 6356752.314245), 1e-6);
        assert_ecef_close(
            geodetic_to_ecef(geo(-90.0, 0.0, 10.0), &WGS84),
            EcefCoord::new(0.0, 0.0, -6356762.314245),
            1e-6,
        );
    }

    #[test]
    fn forward_matches_frozen_standard_form_value() {
        // Computed offline with the N(φ) formula.
        let want = EcefCoord::new(2.766659582847929e-10, 4518297.985630118, 4488055.515647106);
        let p = geo(45.0, 90.0, 1000.0);
        assert_ecef_close(geodetic_to_ecef(p, &WGS84), want, 1e-6);
        assert_ecef_close(standard_geodetic_to_ecef(p), want, 1e-6);
    }

    #[test]
    fn inverse_trivial_points() {
        let g = ecef_to_geodetic(EcefCoord::new(6378137.0, 0.0, 0.0), &WGS84).unwrap();
        assert!(g.lat_deg.abs() < 1e-12 && g.lon_deg.abs() < 1e-12 && g.alt_m.abs() < 1e-6, "{g:?}");

        let g = ecef_to_geodetic(EcefCoord::new(0.0, 0.0, 6356752.314245), &WGS84).unwrap();
        assert_eq!(g.lat_deg, 90.0);
        assert_eq!(g.lon_deg, 0.0);
        assert!(g.alt_m.abs() < 1e-6, "{g:?}");

        let g = ecef_to_geodetic(EcefCoord::new(0.0, 0.0, -6356852.314245), &WGS84).unwrap();
        assert_eq!(g.lat_deg, -90.0);
        assert!((g.alt_m - 100.0).abs() < 1e-6, "{g:?}");
    }

    #[test]
    fn inverse_rejects_earth_center() {
        assert_eq!(ecef_to_geodetic(EcefCoord::new(0.0, 0.0, 0.0), &WGS84), Err(GeodesyError::DegenerateInput));
    }

    #[test]
    fn longitude_is_normalized() {
        let g = ecef_to_geodetic(EcefCoord::new(-6378137.0, 0.0, 0.0), &WGS84).unwrap();
        assert_eq!(g.lon_deg, 180.0);
        let g = ecef_to_geodetic(EcefCoord::new(-6378137.0, -0.0, 0.0), &WGS84).unwrap();
        assert_eq!(g.lon_deg, 180.0);
        assert_eq!(normalize_lon_deg(-180.0), 180.0);
        assert_eq!(normalize_lon_deg(540.0), 180.0);
        assert_eq!(normalize_lon_deg(-190.0), 170.0);
    }

    #[test]
    fn constructor_validates() {
        assert!(GeodeticCoord::new(90.5, 0.0, 0.0).is_err());
        assert!(GeodeticCoord::new(0.0, f64::NAN, 0.0).is_err());
        assert_eq!(GeodeticCoord::new(0.0, -180.0, 0.0).unwrap().lon_deg, 180.0);
    }

    #[test]
    fn enu_axes_at_origin() {
        let origin = geo(0.0, 0.0, 0.0);
        assert_ecef_close(enu_to_ecef(EnuVector::default(), origin, &WGS84), EcefCoord::new(6378137.0, 0.0, 0.0), 1e-9);
        assert_ecef_close(enu_to_ecef(EnuVector::new(1.0, 0.0, 0.0), origin, &WGS84), EcefCoord::new(6378137.0, 1.0, 0.0), 1e-9);
        assert_ecef_close(enu_to_ecef(EnuVector::new(0.0, 0.0, 1.0), origin, &WGS84), EcefCoord::new(6378138.0, 0.0, 0.0), 1e-9);
        assert_ecef_close(enu_to_ecef(EnuVector::new(0.0, 1.0, 0.0), origin, &WGS84), EcefCoord::new(6378137.0, 0.0, 1.0), 1e-9);
    }

    #[test]
    fn ecef_to_enu_inverts_examples() {
        let origin = geo(0.0, 0.0, 0.0);
        let v = ecef_to_enu(EcefCoord::new(6378137.0, 1.0, 0.0), origin, &WGS84);
        assert!((v.to_vector() - nalgebra::Vector3::new(1.0, 0.0, 0.0)).norm() < 1e-9, "{v:?}");
        let r = geo(41.7, -86.2, 220.0);
        let v = ecef_to_enu(geodetic_to_ecef(r, &WGS84), r, &WGS84);
        assert!(v.norm() < 1e-9);
    }

    #[test]
    fn horizontal_distance_examples() {
        let a = geo(0.0, 0.0, 0.0);
        assert_eq!(horizontal_distance(a, a, &WGS84), 0.0);

        let b = geo(0.0, 1.0, 0.0);
        let arc = 6378137.0 * std::f64::consts::PI / 180.0;
        assert!((arc - 111319.49079327358).abs() < 1e-6);
        let d = horizontal_distance(a, b, &WGS84);
        assert!(((d - arc) / arc).abs() < 5e-4, "{d}");

        let r = geo(41.7, -86.2, 180.0);
        let b = offset_geodetic(r, EnuVector::new(2.6, 0.0, 0.0), &WGS84).unwrap();
        assert!((horizontal_distance(r, b, &WGS84) - 2.6).abs() < 1e-6);
    }

    #[test]
    fn rotation_is_orthonormal_at_grid() {
        for lat in (-90..=90).step_by(15) {
            for lon in (-180..=180).step_by(30) {
                let m = enu_to_ecef_rotation(lat as f64, lon as f64);
                assert!((m.transpose() * m - Matrix3::identity()).abs().max() < 1e-12);
                assert!((m.determinant() - 1.0).abs() < 1e-12);
            }
        }
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn roundtrip(lat in -89.9f64..=89.9, lon in -179.999f64..=180.0, alt in -100.0f64..=10000.0) {
                let p = geo(lat, lon, alt);
                let q = ecef_to_geodetic(geodetic_to_ecef(p, &WGS84), &WGS84).unwrap();
                prop_assert!((q.lat_deg - p.lat_deg).abs() <= 1e-9);
                prop_assert!((q.lon_deg - p.lon_deg).abs() <= 1e-9);
                prop_assert!((q.alt_m - p.alt_m).abs() <= 1e-6);
            }

            #[test]
            fn forms_agree(lat in -90.0f64..=90.0, lon in -180.0f64..=180.0, alt in -100.0f64..=10000.0) {
                let p = geo(lat, lon, alt);
                let d = (geodetic_to_ecef(p, &WGS84).to_vector() - standard_geodetic_to_ecef(p).to_vector()).norm();
                prop_assert!(d <= 1e-6, "{}", d);
            }

            #[test]
            fn enu_composition(lat in -89.0f64..89.0, lon in -180.0f64..180.0,
                               e in -5000.0f64..5000.0, n in -5000.0f64..5000.0, u in -500.0f64..500.0) {
                let r = geo(lat, lon, 100.0);
                let v = EnuVector::new(e, n, u);
                let back = ecef_to_enu(enu_to_ecef(v, r, &WGS84), r, &WGS84);
                prop_assert!((back.to_vector() - v.to_vector()).norm() <= 1e-9);
            }

            // Symmetry holds for points at equal height; differing heights
            // leak into the horizontal through the tilt between the two frames.
            #[test]
            fn distance_symmetric(lat in -80.0f64..80.0, lon in -179.0f64..179.0,
                                  dlat in -0.006f64..0.006, dlon in -0.006f64..0.006) {
                let a = geo(lat, lon, 200.0);
                let b = geo(lat + dlat, lon + dlon, 200.0);
                prop_assume!(horizontal_distance(a, b, &WGS84) < 1000.0);
                let d1 = horizontal_distance(a, b, &WGS84);
                let d2 = horizontal_distance(b, a, &WGS84);
                prop_assert!((d1 - d2).abs() <= 1e-9, "{} vs {}", d1, d2);
            }
        }
    }
}
