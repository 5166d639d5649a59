//! Perturbation models: piecewise-exponential atmosphere, drag with a
//! co-rotating atmosphere, zonal gravity up to J6, and the secular J2 rates.

use std::path::Path;
use std::sync::OnceLock;

use nalgebra::Vector3;
use thiserror::Error;

use crate::orbital::{CartesianState, EarthConstants, SpacecraftParams};

const DEFAULT_TABLE_CSV: &str = include_str!("../data/atmosphere_default.csv");

/// Highest supported zonal degree.
pub const MAX_ZONAL_DEGREE: usize = 6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EnvironmentError {
    #[error("altitude {altitude_km:.3} km is below the atmosphere table floor ({floor_km} km)")]
    BelowFloor { altitude_km: f64, floor_km: f64 },
    #[error("atmosphere table: {0}")]
    Table(String),
    #[error("zonal degree {0} outside 2..=6")]
    Degree(usize),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AtmosphereLayer {
    pub h_base_km: f64,
    pub rho_base: f64,
    pub scale_height_km: f64,
}

/// Static piecewise-exponential density model.
#[derive(Debug, Clone, PartialEq)]
pub struct AtmosphereTable {
    layers: Vec<AtmosphereLayer>,
}

impl AtmosphereTable {
    pub fn new(layers: Vec<AtmosphereLayer>) -> Result<Self, EnvironmentError> {
        if layers.is_empty() {
            return Err(EnvironmentError::Table("no layers".into()));
        }
        for (k, l) in layers.iter().enumerate() {
            if !(l.rho_base > 0.0 && l.scale_height_km > 0.0) || !l.h_base_km.is_finite() {
                return Err(EnvironmentError::Table(format!(
                    "layer {k}: density and scale height must be positive"
                )));
            }
            if k > 0 && !(l.h_base_km > layers[k - 1].h_base_km) {
                return Err(EnvironmentError::Table(format!(
                    "layer {k}: base altitudes must be strictly increasing"
                )));
            }
        }
        Ok(Self { layers })
    }

    /// Parses a CSV with header `h_base_km,rho_kg_m3,scale_height_km`.
    pub fn from_csv_str(text: &str) -> Result<Self, EnvironmentError> {
        #[derive(serde::Deserialize)]
        #[serde(deny_unknown_fields)]
        struct Row {
            h_base_km: f64,
            rho_kg_m3: f64,
            scale_height_km: f64,
        }
        let mut reader = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .comment(Some(b'#'))
            .from_reader(text.as_bytes());
        let headers = reader
            .headers()
            .map_err(|e| EnvironmentError::Table(e.to_string()))?
            .clone();
        if headers != vec!["h_base_km", "rho_kg_m3", "scale_height_km"] {
            return Err(EnvironmentError::Table(format!(
                "unexpected header `{}`",
                headers.iter().collect::<Vec<_>>().join(",")
            )));
        }
        let layers = reader
            .deserialize::<Row>()
            .map(|r| {
                r.map(|r| AtmosphereLayer {
                    h_base_km: r.h_base_km,
                    rho_base: r.rho_kg_m3,
                    scale_height_km: r.scale_height_km,
                })
                .map_err(|e| EnvironmentError::Table(e.to_string()))
            })
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(layers)
    }

    pub fn from_csv_path(path: &Path) -> Result<Self, EnvironmentError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| EnvironmentError::Table(format!("{}: {e}", path.display())))?;
        Self::from_csv_str(&text)
    }

    /// The shipped table (reference values at 0–1000 km).
    pub fn default_table() -> &'static AtmosphereTable {
        static TABLE: OnceLock<AtmosphereTable> = OnceLock::new();
        TABLE.get_or_init(|| {
            AtmosphereTable::from_csv_str(DEFAULT_TABLE_CSV).expect("embedded table is valid")
        })
    }

    pub fn layers(&self) -> &[AtmosphereLayer] {
        &self.layers
    }

    pub fn floor_km(&self) -> f64 {
        self.layers[0].h_base_km
    }

    /// Density in kg/m^3 at altitude `h_km`.
    pub fn density(&self, h_km: f64) -> Result<f64, EnvironmentError> {
        if !(h_km >= self.floor_km()) {
            return Err(EnvironmentError::BelowFloor {
                altitude_km: h_km,
                floor_km: self.floor_km(),
            });
        }
        let idx = self.layers.partition_point(|l| l.h_base_km <= h_km) - 1;
        let l = &self.layers[idx];
        Ok(l.rho_base * (-(h_km - l.h_base_km) / l.scale_height_km).exp())
    }
}

/// Free-function form of [`AtmosphereTable::density`].
pub fn density(h_km: f64, atm: &AtmosphereTable) -> Result<f64, EnvironmentError> {
    atm.density(h_km)
}

/// Velocity relative to an atmosphere co-rotating with the Earth.
pub fn relative_wind(s: &CartesianState, c: &EarthConstants) -> Vector3<f64> {
    let w = Vector3::new(0.0, 0.0, c.omega_earth);
    s.v - w.cross(&s.r)
}

/// Drag acceleration for drag ratio `u` (incident area `u * area_max`).
/// Altitude is measured from the equatorial radius (spherical Earth).
pub fn drag_acceleration(
    s: &CartesianState,
    u: f64,
    p: &SpacecraftParams,
    atm: &AtmosphereTable,
    c: &EarthConstants,
) -> Result<Vector3<f64>, EnvironmentError> {
    let rho = atm.density(s.altitude(c) / 1e3)?;
    let v_rel = relative_wind(s, c);
    let k = -0.5 * rho * u * p.area_max * p.c_d / p.mass;
    Ok(k * v_rel.norm() * v_rel)
}

/// Magnitude of the drag acceleration on a circular orbit of radius `a`
/// with the full area exposed, ignoring atmospheric rotation. Used as the
/// linearization reference.
pub fn reference_drag(
    a: f64,
    p: &SpacecraftParams,
    atm: &AtmosphereTable,
    c: &EarthConstants,
) -> Result<f64, EnvironmentError> {
    let rho = atm.density((a - c.r_eq) / 1e3)?;
    let v2 = c.mu / a;
    Ok(0.5 * rho * p.area_max * p.c_d * v2 / p.mass)
}

/// Legendre polynomials P_0..P_N and their derivatives at `s`.
fn legendre(s: f64) -> ([f64; MAX_ZONAL_DEGREE + 1], [f64; MAX_ZONAL_DEGREE + 1]) {
    let mut p = [0.0; MAX_ZONAL_DEGREE + 1];
    let mut dp = [0.0; MAX_ZONAL_DEGREE + 1];
    p[0] = 1.0;
    p[1] = s;
    dp[1] = 1.0;
    for n in 1..MAX_ZONAL_DEGREE {
        let nf = n as f64;
        p[n + 1] = ((2.0 * nf + 1.0) * s * p[n] - nf * p[n - 1]) / (nf + 1.0);
        dp[n + 1] = dp[n - 1] + (2.0 * nf + 1.0) * p[n];
    }
    (p, dp)
}

/// Point-mass plus zonal (J2..J`max_degree`) gravitational acceleration.
pub fn zonal_acceleration(
    r: &Vector3<f64>,
    c: &EarthConstants,
    max_degree: usize,
) -> Result<Vector3<f64>, EnvironmentError> {
    if !(2..=MAX_ZONAL_DEGREE).contains(&max_degree) {
        return Err(EnvironmentError::Degree(max_degree));
    }
    let rn = r.norm();
    let r_hat = r / rn;
    let s = r_hat.z;
    let mut acc = -c.mu / (rn * rn) * r_hat;

    let (p, dp) = legendre(s);
    let z_hat = Vector3::z();
    let ratio = c.r_eq / rn;
    let mut ratio_n = ratio;
    for n in 2..=max_degree {
        ratio_n *= ratio;
        let jn = c.j[n];
        if jn == 0.0 {
            continue;
        }
        // grad of r^-(n+1) P_n(z/r), scaled by R^n
        let coef = -c.mu * jn * ratio_n / (rn * rn);
        let radial = -((n + 1) as f64) * p[n] - dp[n] * s;
        acc += coef * (radial * r_hat + dp[n] * z_hat);
    }
    Ok(acc)
}

/// Gravitational potential of the point mass plus zonals J2..J`max_degree`,
/// with the sign convention `acceleration = grad U`.
pub fn zonal_potential(r: &Vector3<f64>, c: &EarthConstants, max_degree: usize) -> Result<f64, EnvironmentError> {
    if !(2..=MAX_ZONAL_DEGREE).contains(&max_degree) {
        return Err(EnvironmentError::Degree(max_degree));
    }
    let rn = r.norm();
    let (p, _) = legendre(r.z / rn);
    let ratio = c.r_eq / rn;
    let mut sum = 1.0;
    let mut ratio_n = ratio;
    for n in 2..=max_degree {
        ratio_n *= ratio;
        sum -= c.j[n] * ratio_n * p[n];
    }
    Ok(c.mu / rn * sum)
}

/// Secular J2 nodal regression rate, rad/s.
pub fn mean_raan_rate(a: f64, i: f64, c: &EarthConstants) -> f64 {
    -1.5 * c.j2() * c.mu.sqrt() * c.r_eq * c.r_eq * a.powf(-3.5) * i.cos()
}

/// Mean argument-of-latitude rate (Keplerian mean motion), rad/s.
pub fn mean_aol_rate(a: f64, c: &EarthConstants) -> f64 {
    (c.mu / (a * a * a)).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::orbital::{elements_to_cartesian, orbital_period, OrbitalElements};
    use std::f64::consts::{FRAC_PI_2, TAU};

    #[test]
    fn layer_bases_return_base_density() {
        let atm = AtmosphereTable::default_table();
        for l in atm.layers() {
            assert_eq!(atm.density(l.h_base_km).unwrap(), l.rho_base);
        }
    }

    #[test]
    fn density_monotone_200_to_700() {
        let atm = AtmosphereTable::default_table();
        let mut prev = f64::INFINITY;
        for h in 200..=700 {
            let rho = atm.density(h as f64).unwrap();
            assert!(rho <= prev, "density increases at {h} km");
            prev = rho;
        }
    }

    #[test]
    fn density_at_440_km() {
        // 3.725e-12 * exp(-40 / 58.515) from the 400 km layer
        let rho = AtmosphereTable::default_table().density(440.0).unwrap();
        assert!((rho - 1.880e-12).abs() < 0.01e-12, "{rho}");
    }

    #[test]
    fn shipped_table_is_nearly_continuous() {
        let atm = AtmosphereTable::default_table();
        for w in atm.layers().windows(2) {
            let (lo, hi) = (w[0], w[1]);
            let from_below =
                lo.rho_base * (-(hi.h_base_km - lo.h_base_km) / lo.scale_height_km).exp();
            let jump = (from_below - hi.rho_base).abs() / hi.rho_base;
            assert!(jump < 0.2, "jump {jump} at {} km", hi.h_base_km);
        }
    }

    #[test]
    fn below_floor_is_an_error() {
        let atm = AtmosphereTable::from_csv_str("h_base_km,rho_kg_m3,scale_height_km\n100,1e-7,6\n200,2e-10,30\n").unwrap();
        assert!(matches!(
            atm.density(99.0),
            Err(EnvironmentError::BelowFloor { .. })
        ));
        assert!(atm.density(f64::NAN).is_err());
    }

    #[test]
    fn table_validation() {
        assert!(AtmosphereTable::from_csv_str("").is_err());
        assert!(AtmosphereTable::from_csv_str("100,1e-7,6\n100,1e-8,6\n").is_err());
        assert!(AtmosphereTable::from_csv_str("100,-1e-7,6\n").is_err());
        assert!(AtmosphereTable::from_csv_str("100,1e-7\n").is_err());
        assert!(AtmosphereTable::from_csv_str("alt,rho,h\n100,1e-7,6\n").is_err());
    }

    fn iss_state() -> CartesianState {
        let c = EarthConstants::default();
        let oe = OrbitalElements::from_aol(6.818137e6, 0.0, 51.5f64.to_radians(), 0.0, 0.7);
        elements_to_cartesian(&oe, &c).unwrap()
    }

    #[test]
    fn drag_zero_relative_wind() {
        let c = EarthConstants::default();
        let r = Vector3::new(6.8e6, 0.0, 0.0);
        let v = Vector3::new(0.0, 0.0, c.omega_earth).cross(&r);
        let s = CartesianState::new(r, v);
        let a = drag_acceleration(
            &s,
            1.0,
            &SpacecraftParams::default(),
            AtmosphereTable::default_table(),
            &c,
        )
        .unwrap();
        assert_eq!(a.norm(), 0.0);
    }

    #[test]
    fn drag_direction_linearity_magnitude() {
        let c = EarthConstants::default();
        let s = iss_state();
        let p = SpacecraftParams::default();
        let atm = AtmosphereTable::default_table();
        let a1 = drag_acceleration(&s, 0.4, &p, atm, &c).unwrap();
        let a2 = drag_acceleration(&s, 0.8, &p, atm, &c).unwrap();
        assert!((a2 - 2.0 * a1).norm() <= 1e-15 * a2.norm());
        let w = relative_wind(&s, &c);
        let cos = a1.dot(&w) / (a1.norm() * w.norm());
        assert!((cos + 1.0).abs() < 1e-12);

        // 0.5 * rho * A * Cd * v_rel^2 / m evaluated by hand: v_rel ≈ 7.22 km/s
        // at this point of the orbit, rho = 1.88e-12
        let full = drag_acceleration(&s, 1.0, &p, atm, &c).unwrap().norm();
        assert!(full > 5e-6 && full < 7e-6, "{full}");
        assert_eq!(drag_acceleration(&s, 0.0, &p, atm, &c).unwrap().norm(), 0.0);
    }

    #[test]
    fn zonal_reduces_to_two_body() {
        let c = EarthConstants::default().spherical();
        let r = Vector3::new(3.1e6, -4.2e6, 4.4e6);
        let a = zonal_acceleration(&r, &c, 6).unwrap();
        let expect = -c.mu / r.norm().powi(3) * r;
        assert!((a - expect).norm() <= 1e-15 * expect.norm());
    }

    #[test]
    fn zonal_axial_symmetry() {
        let c = EarthConstants::default();
        let r = Vector3::new(3.1e6, -4.2e6, 4.4e6);
        let rot = nalgebra::Rotation3::from_axis_angle(&Vector3::z_axis(), 1.234);
        let a = zonal_acceleration(&r, &c, 6).unwrap();
        let b = zonal_acceleration(&(rot * r), &c, 6).unwrap();
        assert!((rot * a - b).norm() < 1e-13 * a.norm());
    }

    #[test]
    fn zonal_degree_checked() {
        let c = EarthConstants::default();
        let r = Vector3::new(7e6, 0.0, 0.0);
        assert!(zonal_acceleration(&r, &c, 1).is_err());
        assert!(zonal_acceleration(&r, &c, 7).is_err());
    }

    /// Gravitational potential written out with closed-form Legendre
    /// polynomials, independent of the recurrence used by the force model.
    fn potential(r: &Vector3<f64>, c: &EarthConstants, deg: usize) -> f64 {
        let rn = r.norm();
        let s = r.z / rn;
        let s2 = s * s;
        let p = [
            1.0,
            s,
            0.5 * (3.0 * s2 - 1.0),
            0.5 * (5.0 * s2 * s - 3.0 * s),
            (35.0 * s2 * s2 - 30.0 * s2 + 3.0) / 8.0,
            (63.0 * s2 * s2 * s - 70.0 * s2 * s + 15.0 * s) / 8.0,
            (231.0 * s2 * s2 * s2 - 315.0 * s2 * s2 + 105.0 * s2 - 5.0) / 16.0,
        ];
        let mut sum = 1.0;
        for n in 2..=deg {
            sum -= c.j[n] * (c.r_eq / rn).powi(n as i32) * p[n];
        }
        c.mu / rn * sum
    }

    #[test]
    fn zonal_matches_potential_gradient() {
        use rand::{Rng, SeedableRng};
        let c = EarthConstants::default();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..100 {
            let dir = Vector3::new(
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
            );
            if dir.norm() < 1e-3 {
                continue;
            }
            let r = dir.normalize() * rng.gen_range(6.6e6..8.0e6);
            for deg in [2, MAX_ZONAL_DEGREE] {
                let acc = zonal_acceleration(&r, &c, deg).unwrap();
                let h = 1.0;
                let mut grad = Vector3::zeros();
                for k in 0..3 {
                    let mut e = Vector3::zeros();
                    e[k] = h;
                    grad[k] = (potential(&(r + e), &c, deg) - potential(&(r - e), &c, deg)) / (2.0 * h);
                }
                let err = (acc - grad).norm() / acc.norm();
                assert!(err < 1e-6, "relative error {err} at {r:?}, degree {deg}");
                let u = zonal_potential(&r, &c, deg).unwrap();
                assert!((u - potential(&r, &c, deg)).abs() < 1e-12 * u.abs());
            }
        }
    }

    #[test]
    fn j2_equator_vs_pole() {
        // Closed-form J2 magnitudes: equator g(1 + 1.5 J2 (R/r)^2),
        // pole g(1 - 3 J2 (R/r)^2).
        let c = EarthConstants::default();
        let rn = 7.0e6;
        let g = c.mu / (rn * rn);
        let q = c.j2() * (c.r_eq / rn).powi(2);
        let eq = zonal_acceleration(&Vector3::new(rn, 0.0, 0.0), &c, 2).unwrap();
        let po = zonal_acceleration(&Vector3::new(0.0, 0.0, rn), &c, 2).unwrap();
        assert!((eq.norm() - g * (1.0 + 1.5 * q)).abs() < 1e-12 * g);
        assert!((po.norm() - g * (1.0 - 3.0 * q)).abs() < 1e-12 * g);
    }

    #[test]
    fn raan_rates() {
        let c = EarthConstants::default();
        assert!(mean_raan_rate(6.9e6, FRAC_PI_2, &c).abs() < 1e-20);
        let per_day = |a: f64, i: f64| mean_raan_rate(a, i.to_radians(), &c).to_degrees() * 86400.0;
        let iss = per_day(6.818137e6, 51.5);
        assert!((iss + 4.96).abs() < 0.05, "{iss}");
        let sso = per_day(6.928137e6, 98.0);
        assert!((sso - 1.04).abs() < 0.02, "{sso}");
    }

    #[test]
    fn aol_rate_consistency() {
        let c = EarthConstants::default();
        let a = 6.818137e6;
        assert!((TAU / mean_aol_rate(a, &c) - orbital_period(a, &c)).abs() < 1e-9);
        assert!((mean_aol_rate(a, &c) - 1.1215e-3).abs() < 1e-7);
        let half = mean_aol_rate(a * 2f64.powf(2.0 / 3.0), &c);
        assert!((half / mean_aol_rate(a, &c) - 0.5).abs() < 1e-14);
    }
}
