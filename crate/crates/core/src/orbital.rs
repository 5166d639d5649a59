//! Constants, orbit-state representations and the Keplerian conversions
//! shared by the rest of the crate.

use std::f64::consts::{PI, TAU};

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Eccentricity below which the argument of periapsis is reported as zero and
/// the whole in-plane phase is folded into the true anomaly.
pub const CIRCULAR_ECC_EPS: f64 = 1e-8;

/// Inclination (rad) below which the ascending node is treated as undefined.
const EQUATORIAL_EPS: f64 = 1e-11;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OrbitError {
    #[error("eccentricity {0} outside [0, 1)")]
    Eccentricity(f64),
    #[error("semi-major axis {0} m must be positive")]
    SemiMajorAxis(f64),
    #[error("position vector has zero length")]
    ZeroRadius,
    #[error("degenerate state: angular momentum vanishes (rectilinear motion)")]
    Rectilinear,
    #[error("state is not bound (specific energy {0} J/kg >= 0)")]
    Unbound(f64),
    #[error("invalid constant `{name}`: {value}")]
    InvalidConstant { name: &'static str, value: f64 },
    #[error("invalid spacecraft parameter `{name}`: {value}")]
    InvalidSpacecraft { name: &'static str, value: f64 },
}

/// Earth model constants. Zonal coefficients are indexed by degree, so
/// `j[2]` is J2; `j[0]` and `j[1]` are always zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EarthConstants {
    /// Gravitational parameter, m^3/s^2.
    pub mu: f64,
    /// Equatorial radius, m.
    pub r_eq: f64,
    /// Zonal harmonics J0..J6 (J0 = J1 = 0).
    pub j: [f64; 7],
    /// Earth rotation rate, rad/s.
    pub omega_earth: f64,
}

impl Default for EarthConstants {
    /// WGS-84 / EGM-96 values.
    fn default() -> Self {
        Self {
            mu: 3.986004418e14,
            r_eq: 6.378137e6,
            j: [0.0, 0.0, 1.08262668e-3, -2.5327e-6, -1.6196e-6, -2.2730e-7, 5.4068e-7],
            omega_earth: 7.2921159e-5,
        }
    }
}

impl EarthConstants {
    pub fn j2(&self) -> f64 {
        self.j[2]
    }

    /// Same body with every zonal term removed (point-mass gravity).
    pub fn spherical(&self) -> Self {
        Self { j: [0.0; 7], ..*self }
    }

    pub fn validate(&self) -> Result<(), OrbitError> {
        let bad = |name, value| Err(OrbitError::InvalidConstant { name, value });
        if !(self.mu > 0.0) {
            return bad("mu", self.mu);
        }
        if !(self.r_eq > 0.0) {
            return bad("r_eq", self.r_eq);
        }
        if !(self.omega_earth > 0.0) {
            return bad("omega_earth", self.omega_earth);
        }
        if self.j[0] != 0.0 || self.j[1] != 0.0 {
            return bad("j[0..2]", self.j[0].abs().max(self.j[1].abs()));
        }
        if !(self.j[2] > 1.05e-3 && self.j[2] < 1.10e-3) {
            return bad("j2", self.j[2]);
        }
        Ok(())
    }
}

/// Classical osculating elements. Angles in radians.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OrbitalElements {
    pub a: f64,
    pub e: f64,
    pub i: f64,
    pub raan: f64,
    pub argp: f64,
    pub nu: f64,
}

impl OrbitalElements {
    /// Argument of latitude, argp + nu, normalized to [0, 2π).
    pub fn aol(&self) -> f64 {
        normalize_angle(self.argp + self.nu)
    }

    /// Circular-ish orbit placed by argument of latitude: argp = 0, nu = aol.
    pub fn from_aol(a: f64, e: f64, i: f64, raan: f64, aol: f64) -> Self {
        Self {
            a,
            e,
            i,
            raan: normalize_angle(raan),
            argp: 0.0,
            nu: normalize_angle(aol),
        }
    }
}

/// Inertial (ECI) position and velocity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CartesianState {
    pub r: Vector3<f64>,
    pub v: Vector3<f64>,
}

impl CartesianState {
    pub fn new(r: Vector3<f64>, v: Vector3<f64>) -> Self {
        Self { r, v }
    }

    pub fn specific_energy(&self, mu: f64) -> f64 {
        0.5 * self.v.norm_squared() - mu / self.r.norm()
    }

    pub fn angular_momentum(&self) -> Vector3<f64> {
        self.r.cross(&self.v)
    }

    /// Geometric altitude above the equatorial radius, m.
    pub fn altitude(&self, c: &EarthConstants) -> f64 {
        self.r.norm() - c.r_eq
    }
}

/// Mass and aerodynamic properties of one satellite.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpacecraftParams {
    /// kg
    pub mass: f64,
    pub c_d: f64,
    /// m^2, high-drag configuration
    pub area_max: f64,
    /// m^2, low-drag configuration
    pub area_min: f64,
}

impl Default for SpacecraftParams {
    /// 1.5 kg CubeSat: 15x10 cm face plus two 20x15 cm panels, 5:1 usable
    /// drag ratio.
    fn default() -> Self {
        Self {
            mass: 1.5,
            c_d: 2.2,
            area_max: 0.075,
            area_min: 0.015,
        }
    }
}

impl SpacecraftParams {
    pub fn validate(&self) -> Result<(), OrbitError> {
        let bad = |name, value| Err(OrbitError::InvalidSpacecraft { name, value });
        if !(self.mass > 0.0) {
            return bad("mass", self.mass);
        }
        if !(self.c_d > 0.0) {
            return bad("c_d", self.c_d);
        }
        if !(self.area_min > 0.0) {
            return bad("area_min", self.area_min);
        }
        if !(self.area_max >= self.area_min) {
            return bad("area_max", self.area_max);
        }
        Ok(())
    }

    /// Smallest commandable drag ratio, area_min / area_max.
    pub fn min_ratio(&self) -> f64 {
        self.area_min / self.area_max
    }
}

/// Maps any angle onto [0, 2π).
pub fn normalize_angle(x: f64) -> f64 {
    let y = x.rem_euclid(TAU);
    // rem_euclid can return exactly TAU for tiny negative inputs
    if y >= TAU {
        0.0
    } else {
        y
    }
}

/// Maps any angle onto (−π, π].
pub fn wrap_pi(x: f64) -> f64 {
    let y = normalize_angle(x);
    if y > PI {
        y - TAU
    } else {
        y
    }
}

pub fn orbital_period(a: f64, c: &EarthConstants) -> f64 {
    TAU * (a * a * a / c.mu).sqrt()
}

pub fn elements_to_cartesian(
    oe: &OrbitalElements,
    c: &EarthConstants,
) -> Result<CartesianState, OrbitError> {
    if !(oe.e >= 0.0 && oe.e < 1.0) {
        return Err(OrbitError::Eccentricity(oe.e));
    }
    if !(oe.a > 0.0) {
        return Err(OrbitError::SemiMajorAxis(oe.a));
    }
    let p = oe.a * (1.0 - oe.e * oe.e);
    let (snu, cnu) = oe.nu.sin_cos();
    let r_mag = p / (1.0 + oe.e * cnu);
    let vk = (c.mu / p).sqrt();

    // perifocal frame
    let r_pf = Vector3::new(r_mag * cnu, r_mag * snu, 0.0);
    let v_pf = Vector3::new(-vk * snu, vk * (oe.e + cnu), 0.0);

    let rot = perifocal_to_eci(oe.raan, oe.i, oe.argp);
    Ok(CartesianState {
        r: rot * r_pf,
        v: rot * v_pf,
    })
}

fn perifocal_to_eci(raan: f64, i: f64, argp: f64) -> nalgebra::Matrix3<f64> {
    let (so, co) = raan.sin_cos();
    let (si, ci) = i.sin_cos();
    let (sw, cw) = argp.sin_cos();
    nalgebra::Matrix3::new(
        co * cw - so * sw * ci,
        -co * sw - so * cw * ci,
        so * si,
        so * cw + co * sw * ci,
        -so * sw + co * cw * ci,
        -co * si,
        sw * si,
        cw * si,
        ci,
    )
}

pub fn cartesian_to_elements(
    s: &CartesianState,
    c: &EarthConstants,
) -> Result<OrbitalElements, OrbitError> {
    let r_mag = s.r.norm();
    if r_mag == 0.0 {
        return Err(OrbitError::ZeroRadius);
    }
    let h = s.angular_momentum();
    let h_mag = h.norm();
    if h_mag <= 1e-12 * r_mag * s.v.norm().max(1.0) {
        return Err(OrbitError::Rectilinear);
    }
    let energy = s.specific_energy(c.mu);
    if energy >= 0.0 {
        return Err(OrbitError::Unbound(energy));
    }
    let a = -c.mu / (2.0 * energy);
    let e_vec = ((s.v.norm_squared() - c.mu / r_mag) * s.r - s.r.dot(&s.v) * s.v) / c.mu;
    let e = e_vec.norm();
    let h_hat = h / h_mag;
    let i = h_hat.z.clamp(-1.0, 1.0).acos();

    // Node line; for equatorial orbits fall back to the inertial x axis.
    let node = Vector3::new(-h.y, h.x, 0.0);
    let node_mag = node.norm();
    let (raan, n_hat) = if node_mag > EQUATORIAL_EPS * h_mag {
        let n_hat = node / node_mag;
        (normalize_angle(n_hat.y.atan2(n_hat.x)), n_hat)
    } else {
        (0.0, Vector3::x())
    };
    // In-plane axis 90° ahead of the node.
    let m_hat = h_hat.cross(&n_hat);
    let aol = s.r.dot(&m_hat).atan2(s.r.dot(&n_hat));

    let (argp, nu) = if e < CIRCULAR_ECC_EPS {
        (0.0, normalize_angle(aol))
    } else {
        let argp = e_vec.dot(&m_hat).atan2(e_vec.dot(&n_hat));
        (normalize_angle(argp), normalize_angle(aol - argp))
    };

    Ok(OrbitalElements {
        a,
        e,
        i,
        raan,
        argp,
        nu,
    })
}

/// Osculating (a, raan, aol) without building the full element set; the
/// propagator calls this every step.
pub(crate) fn osculating_a_raan_aol(s: &CartesianState, mu: f64) -> (f64, f64, f64) {
    let r_mag = s.r.norm();
    let a = 1.0 / (2.0 / r_mag - s.v.norm_squared() / mu);
    let h = s.angular_momentum();
    let h_mag = h.norm();
    let node = Vector3::new(-h.y, h.x, 0.0);
    let node_mag = node.norm();
    let (raan, n_hat) = if node_mag > EQUATORIAL_EPS * h_mag {
        let n_hat = node / node_mag;
        (normalize_angle(n_hat.y.atan2(n_hat.x)), n_hat)
    } else {
        (0.0, Vector3::x())
    };
    let m_hat = (h / h_mag).cross(&n_hat);
    let aol = normalize_angle(s.r.dot(&m_hat).atan2(s.r.dot(&n_hat)));
    (a, raan, aol)
}
