//! Linearized relative dynamics of a deputy with respect to the chief.
//!
//! The relative state of a pair is `[Δθ̄, Δa]` (deputy minus chief). Around
//! a reference semi-major axis the mean rates are linear in `Δa`:
//!
//! ```text
//! dΔθ̄/dt = k1 Δa        dΔa/dt = k3 (u_dep − u_chief)        dΔΩ̄/dt = k2 Δa
//! ```
//!
//! so any achieved along-track separation carries a cross-track one,
//! `ΔΩ̄ = k4 Δθ̄` with `k4 = k2 / k1`. Drag ratios `u` are dimensionless and
//! `k3 < 0`: more drag lowers the orbit.

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::orbital::EarthConstants;
use crate::propagator::MeanElements;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RelativeError {
    #[error("reference semi-major axis {0} m must exceed the equatorial radius")]
    ReferenceAxis(f64),
    #[error("reference drag {0} m/s^2 must be positive")]
    ReferenceDrag(f64),
    #[error("time step {0} s must be positive")]
    Step(f64),
    #[error("wrapped along-track target {0} rad must satisfy |Δθ_f| < 2π")]
    WrappedTarget(f64),
    #[error("reference orbit is polar (k4 = 0): no cross-track authority")]
    NoCrossTrackAuthority,
    #[error("mean elements refer to different epochs ({chief} s vs {deputy} s)")]
    EpochMismatch { chief: f64, deputy: f64 },
}

/// Linearization constants for one reference orbit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GainSet {
    /// rad s^-1 m^-1
    pub k1: f64,
    /// rad s^-1 m^-1
    pub k2: f64,
    /// m/s per unit drag ratio
    pub k3: f64,
    /// dimensionless, k2 / k1
    pub k4: f64,
    pub a_ref: f64,
    pub i_ref: f64,
    /// Full-area drag acceleration at the reference orbit, m/s^2.
    pub d_ref: f64,
}

impl GainSet {
    /// Cross-track drift per full revolution of along-track separation, deg.
    pub fn deg_raan_per_rev(&self) -> f64 {
        self.k4 * 360.0
    }
}

pub fn compute_gains(
    a_ref: f64,
    i_ref: f64,
    d_ref: f64,
    c: &EarthConstants,
) -> Result<GainSet, RelativeError> {
    if !(a_ref > c.r_eq) {
        return Err(RelativeError::ReferenceAxis(a_ref));
    }
    if !(d_ref > 0.0) {
        return Err(RelativeError::ReferenceDrag(d_ref));
    }
    let mu = c.mu;
    let k1 = -1.5 * (mu / a_ref.powi(5)).sqrt();
    let k2 = 21.0 / 4.0 * c.j2() * (mu / a_ref.powi(9)).sqrt() * c.r_eq * c.r_eq * i_ref.cos();
    let k3 = -2.0 * (a_ref.powi(3) / mu).sqrt() * d_ref;
    Ok(GainSet {
        k1,
        k2,
        k3,
        k4: k2 / k1,
        a_ref,
        i_ref,
        d_ref,
    })
}

/// Zero-order-hold discretization of the pair dynamics over `dt`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiscreteLinearModel {
    pub ad: [[f64; 2]; 2],
    pub bd: [f64; 2],
    pub dt: f64,
}

impl DiscreteLinearModel {
    /// Next `[Δθ̄, Δa]` under differential drag ratio `du`.
    pub fn apply(&self, x: [f64; 2], du: f64) -> [f64; 2] {
        [
            self.ad[0][0] * x[0] + self.ad[0][1] * x[1] + self.bd[0] * du,
            self.ad[1][0] * x[0] + self.ad[1][1] * x[1] + self.bd[1] * du,
        ]
    }

    /// `self` followed by `next`, both with the same input held.
    pub fn then(&self, next: &Self) -> Self {
        let (a1, a2) = (&self.ad, &next.ad);
        let mut ad = [[0.0; 2]; 2];
        for r in 0..2 {
            for c in 0..2 {
                ad[r][c] = a2[r][0] * a1[0][c] + a2[r][1] * a1[1][c];
            }
        }
        let bd = [
            a2[0][0] * self.bd[0] + a2[0][1] * self.bd[1] + next.bd[0],
            a2[1][0] * self.bd[0] + a2[1][1] * self.bd[1] + next.bd[1],
        ];
        Self {
            ad,
            bd,
            dt: self.dt + next.dt,
        }
    }
}

pub fn discretize(g: &GainSet, dt: f64) -> Result<DiscreteLinearModel, RelativeError> {
    if !(dt > 0.0) {
        return Err(RelativeError::Step(dt));
    }
    Ok(discretize_unchecked(g, dt))
}

pub(crate) fn discretize_unchecked(g: &GainSet, dt: f64) -> DiscreteLinearModel {
    DiscreteLinearModel {
        ad: [[1.0, g.k1 * dt], [0.0, 1.0]],
        bd: [0.5 * g.k1 * g.k3 * dt * dt, g.k3 * dt],
        dt,
    }
}

/// Final mean RAAN separation reachable for a wrapped along-track target
/// plus `ell` whole revolutions.
pub fn feasible_raan(d_theta_f: f64, ell: i64, g: &GainSet) -> Result<f64, RelativeError> {
    if !(d_theta_f.abs() < TAU) {
        return Err(RelativeError::WrappedTarget(d_theta_f));
    }
    Ok(g.k4 * (d_theta_f + TAU * ell as f64))
}

/// Revolution count whose feasible RAAN separation is closest to
/// `d_omega_desired`; ties go to the smaller |ℓ|.
pub fn select_ell(d_omega_desired: f64, d_theta_f: f64, g: &GainSet) -> Result<i64, RelativeError> {
    if g.k4 == 0.0 || !g.k4.is_finite() {
        return Err(RelativeError::NoCrossTrackAuthority);
    }
    if !(d_theta_f.abs() < TAU) {
        return Err(RelativeError::WrappedTarget(d_theta_f));
    }
    let guess = ((d_omega_desired / g.k4 - d_theta_f) / TAU).round() as i64;
    let miss = |l: i64| (g.k4 * (d_theta_f + TAU * l as f64) - d_omega_desired).abs();
    let mut best = guess;
    for l in [guess - 1, guess + 1] {
        let (m, mb) = (miss(l), miss(best));
        if m < mb || (m == mb && l.abs() < best.abs()) {
            best = l;
        }
    }
    Ok(best)
}

/// `[Δθ̄, Δa]` of one deputy relative to the chief.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RelativePairState {
    /// Unwrapped, rad.
    pub d_theta: f64,
    /// m
    pub d_a: f64,
}

impl RelativePairState {
    pub fn as_array(&self) -> [f64; 2] {
        [self.d_theta, self.d_a]
    }

    pub fn from_array(x: [f64; 2]) -> Self {
        Self {
            d_theta: x[0],
            d_a: x[1],
        }
    }
}

/// Relative states of every deputy, in satellite order (satellite 0 is the
/// chief, deputy `p` is satellite `p + 1`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FormationState {
    pub chief: usize,
    pub deputies: Vec<RelativePairState>,
}

impl FormationState {
    pub fn zeros(n_deputies: usize) -> Self {
        Self {
            chief: 0,
            deputies: vec![RelativePairState::default(); n_deputies],
        }
    }
}

pub fn relative_state(
    chief: &MeanElements,
    deputy: &MeanElements,
) -> Result<RelativePairState, RelativeError> {
    if (chief.epoch - deputy.epoch).abs() > 1e-6 {
        return Err(RelativeError::EpochMismatch {
            chief: chief.epoch,
            deputy: deputy.epoch,
        });
    }
    Ok(RelativePairState {
        d_theta: deputy.theta_mean_cum - chief.theta_mean_cum,
        d_a: deputy.a_mean - chief.a_mean,
    })
}

/// Great-circle separation at radius `r` between the chief at its ascending
/// node and a deputy offset by `d_theta` along track and `d_raan` in node.
pub fn spherical_distance(d_theta: f64, d_raan: f64, i: f64, r: f64) -> f64 {
    let dir = |raan: f64, theta: f64| {
        let (so, co) = raan.sin_cos();
        let (st, ct) = theta.sin_cos();
        let (si, ci) = i.sin_cos();
        nalgebra::Vector3::new(co * ct - so * st * ci, so * ct + co * st * ci, st * si)
    };
    let a = dir(0.0, 0.0);
    let b = dir(d_raan, d_theta.rem_euclid(TAU));
    r * a.cross(&b).norm().atan2(a.dot(&b))
}
