//! Fixed-step RK4 truth propagation under zonal gravity and drag, plus the
//! unwrapped angle bookkeeping and trailing-window mean elements that the
//! controller measures.

use std::collections::VecDeque;
use std::fmt::Write as _;
use std::sync::Arc;

use nalgebra::Vector3;
use thiserror::Error;

use crate::environment::{
    drag_acceleration, zonal_acceleration, AtmosphereTable, EnvironmentError,
};
use crate::orbital::{
    cartesian_to_elements, elements_to_cartesian, normalize_angle,
    osculating_a_raan_aol, wrap_pi, CartesianState, EarthConstants, OrbitError, OrbitalElements,
    SpacecraftParams,
};
use crate::par::{self, Execution};

/// Steps per orbit required by [`step`].
pub const MIN_STEPS_PER_ORBIT: f64 = 50.0;

/// Minimum window coverage accepted by [`extract_mean`], as a fraction of
/// the requested window.
pub const MIN_WINDOW_FRACTION: f64 = 0.95;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PropagationError {
    #[error("step size {dt} s invalid (must be in (0, {max:.3}] s)")]
    InvalidStep { dt: f64, max: f64 },
    #[error(transparent)]
    Environment(#[from] EnvironmentError),
    #[error(transparent)]
    Orbit(#[from] OrbitError),
    #[error("control schedule: {0}")]
    Schedule(String),
    #[error("mean-element window spans {span:.1} s, need at least {required:.1} s")]
    InsufficientWindow { span: f64, required: f64 },
    #[error("satellites do not share an epoch")]
    EpochMismatch,
}

/// Drag-related parts of the force model.
#[derive(Debug, Clone)]
pub struct DragModel {
    pub spacecraft: SpacecraftParams,
    pub atmosphere: Arc<AtmosphereTable>,
}

/// Everything `state_derivative` needs besides the state itself.
#[derive(Debug, Clone)]
pub struct ForceModel {
    pub constants: EarthConstants,
    /// Highest zonal degree, 2..=6.
    pub max_degree: usize,
    pub drag: Option<DragModel>,
}

impl ForceModel {
    /// Point-mass gravity only.
    pub fn two_body(c: &EarthConstants) -> Self {
        Self {
            constants: c.spherical(),
            max_degree: 2,
            drag: None,
        }
    }

    /// Zonal gravity without drag.
    pub fn zonal(c: &EarthConstants, max_degree: usize) -> Self {
        Self {
            constants: *c,
            max_degree,
            drag: None,
        }
    }

    pub fn with_drag(mut self, spacecraft: SpacecraftParams, atmosphere: Arc<AtmosphereTable>) -> Self {
        self.drag = Some(DragModel {
            spacecraft,
            atmosphere,
        });
        self
    }
}

/// Truth state of one satellite.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SatelliteSimState {
    pub cart: CartesianState,
    /// Seconds since the scenario epoch.
    pub t: f64,
    /// Unwrapped osculating argument of latitude, rad.
    pub theta_cum: f64,
    /// Unwrapped osculating RAAN, rad.
    pub raan_cum: f64,
    /// Drag ratio applied over the step that produced this state.
    pub u_applied: f64,
}

impl SatelliteSimState {
    pub fn from_elements(
        oe: &OrbitalElements,
        c: &EarthConstants,
        t: f64,
        u: f64,
    ) -> Result<Self, OrbitError> {
        let cart = elements_to_cartesian(oe, c)?;
        Ok(Self::from_cartesian(cart, c, t, u))
    }

    pub fn from_cartesian(cart: CartesianState, c: &EarthConstants, t: f64, u: f64) -> Self {
        let (_, raan, aol) = osculating_a_raan_aol(&cart, c.mu);
        Self {
            cart,
            t,
            theta_cum: aol,
            raan_cum: raan,
            u_applied: u,
        }
    }

    pub fn osculating(&self, c: &EarthConstants) -> Result<OrbitalElements, OrbitError> {
        cartesian_to_elements(&self.cart, c)
    }

    pub fn sample(&self, mu: f64) -> OscSample {
        let (a, _, _) = osculating_a_raan_aol(&self.cart, mu);
        OscSample {
            t: self.t,
            a,
            raan_cum: self.raan_cum,
            theta_cum: self.theta_cum,
        }
    }
}

/// Time derivative (velocity, acceleration) of the Cartesian state.
pub fn state_derivative(
    s: &CartesianState,
    u: f64,
    model: &ForceModel,
) -> Result<(Vector3<f64>, Vector3<f64>), PropagationError> {
    let mut acc = zonal_acceleration(&s.r, &model.constants, model.max_degree)?;
    if let Some(d) = &model.drag {
        if u != 0.0 {
            acc += drag_acceleration(s, u, &d.spacecraft, &d.atmosphere, &model.constants)?;
        }
    }
    Ok((s.v, acc))
}

/// Largest step accepted at the current state.
pub fn max_step(s: &CartesianState, mu: f64) -> f64 {
    let r = s.r.norm();
    let a = 1.0 / (2.0 / r - s.v.norm_squared() / mu);
    let a = if a > 0.0 { a } else { r };
    std::f64::consts::TAU * (a * a * a / mu).sqrt() / MIN_STEPS_PER_ORBIT
}

/// One RK4 step of length `dt` with drag ratio `u` held constant.
pub fn step(
    s: &SatelliteSimState,
    u: f64,
    dt: f64,
    model: &ForceModel,
) -> Result<SatelliteSimState, PropagationError> {
    let mu = model.constants.mu;
    let max = max_step(&s.cart, mu);
    if !(dt > 0.0 && dt <= max) {
        return Err(PropagationError::InvalidStep { dt, max });
    }
    let y0 = s.cart;
    let shifted = |k: &(Vector3<f64>, Vector3<f64>), h: f64| CartesianState {
        r: y0.r + h * k.0,
        v: y0.v + h * k.1,
    };
    let k1 = state_derivative(&y0, u, model)?;
    let k2 = state_derivative(&shifted(&k1, 0.5 * dt), u, model)?;
    let k3 = state_derivative(&shifted(&k2, 0.5 * dt), u, model)?;
    let k4 = state_derivative(&shifted(&k3, dt), u, model)?;
    let cart = CartesianState {
        r: y0.r + dt / 6.0 * (k1.0 + 2.0 * k2.0 + 2.0 * k3.0 + k4.0),
        v: y0.v + dt / 6.0 * (k1.1 + 2.0 * k2.1 + 2.0 * k3.1 + k4.1),
    };

    let (_, raan, aol) = osculating_a_raan_aol(&cart, mu);
    Ok(SatelliteSimState {
        cart,
        t: s.t + dt,
        theta_cum: s.theta_cum + wrap_pi(aol - s.theta_cum),
        raan_cum: s.raan_cum + wrap_pi(raan - s.raan_cum),
        u_applied: u,
    })
}

/// Osculating quantities recorded for mean-element extraction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OscSample {
    pub t: f64,
    pub a: f64,
    pub raan_cum: f64,
    pub theta_cum: f64,
}

/// Orbit-averaged elements over a trailing window.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeanElements {
    pub a_mean: f64,
    /// Unwrapped, rad.
    pub raan_mean: f64,
    /// Unwrapped, rad.
    pub theta_mean_cum: f64,
    /// Averaging span actually used, s.
    pub window: f64,
    /// End of the window (measurement time), s.
    pub epoch: f64,
}

impl MeanElements {
    /// Time the averages are representative of (window midpoint).
    pub fn center(&self) -> f64 {
        self.epoch - 0.5 * self.window
    }
}

/// Time-weighted average of the samples over `[t_end - window, t_end]`,
/// with the window start interpolated between samples.
pub fn extract_mean(samples: &[OscSample], window: f64) -> Result<MeanElements, PropagationError> {
    let required = MIN_WINDOW_FRACTION * window;
    let Some(last) = samples.last() else {
        return Err(PropagationError::InsufficientWindow { span: 0.0, required });
    };
    let t_end = last.t;
    let t_start = (t_end - window).max(samples[0].t);
    let span = t_end - t_start;
    if !(span >= required) || span <= 0.0 {
        return Err(PropagationError::InsufficientWindow { span, required });
    }

    let lerp = |p: &OscSample, q: &OscSample, t: f64| {
        let w = (t - p.t) / (q.t - p.t);
        [
            p.a + w * (q.a - p.a),
            p.raan_cum + w * (q.raan_cum - p.raan_cum),
            p.theta_cum + w * (q.theta_cum - p.theta_cum),
        ]
    };
    let mut acc = [0.0; 3];
    let first = samples.partition_point(|s| s.t <= t_start);
    // segment [t_start, samples[first]] starts from an interpolated point
    let mut prev_t = t_start;
    let mut prev = if first == 0 {
        let s = &samples[0];
        [s.a, s.raan_cum, s.theta_cum]
    } else {
        lerp(&samples[first - 1], &samples[first.min(samples.len() - 1)], t_start)
    };
    for s in &samples[first..] {
        let cur = [s.a, s.raan_cum, s.theta_cum];
        let h = s.t - prev_t;
        for k in 0..3 {
            acc[k] += 0.5 * h * (prev[k] + cur[k]);
        }
        prev = cur;
        prev_t = s.t;
    }
    Ok(MeanElements {
        a_mean: acc[0] / span,
        raan_mean: acc[1] / span,
        theta_mean_cum: acc[2] / span,
        window: span,
        epoch: t_end,
    })
}

/// Rolling buffer of osculating samples, long enough for one window.
#[derive(Debug, Clone)]
pub struct OrbitHistory {
    samples: VecDeque<OscSample>,
    keep_s: f64,
}

impl OrbitHistory {
    pub fn new(keep_s: f64) -> Self {
        Self {
            samples: VecDeque::new(),
            keep_s,
        }
    }

    pub fn push(&mut self, s: OscSample) {
        self.samples.push_back(s);
        let t_end = s.t;
        // keep one sample at or before the cut so interpolation has a left end
        while self.samples.len() > 2 && self.samples[1].t <= t_end - self.keep_s {
            self.samples.pop_front();
        }
    }

    pub fn samples(&mut self) -> &[OscSample] {
        self.samples.make_contiguous()
    }

    pub fn last(&self) -> Option<&OscSample> {
        self.samples.back()
    }

    pub fn span(&self) -> f64 {
        match (self.samples.front(), self.samples.back()) {
            (Some(a), Some(b)) => b.t - a.t,
            _ => 0.0,
        }
    }

    /// Time at which the unwrapped AoL was `theta` (linear interpolation),
    /// if the buffer reaches back that far.
    pub fn time_at_theta(&self, theta: f64) -> Option<f64> {
        let n = self.samples.len();
        if n < 2 || self.samples[0].theta_cum > theta {
            return None;
        }
        let (a, b) = self.samples.as_slices();
        let idx = {
            let mut lo = 0usize;
            let mut hi = n;
            let get = |k: usize| if k < a.len() { a[k] } else { b[k - a.len()] };
            while hi - lo > 1 {
                let mid = (lo + hi) / 2;
                if get(mid).theta_cum <= theta {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            if hi >= n {
                return None;
            }
            (get(lo), get(hi))
        };
        let (p, q) = idx;
        let w = (theta - p.theta_cum) / (q.theta_cum - p.theta_cum);
        Some(p.t + w * (q.t - p.t))
    }
}

/// Piecewise-constant drag ratios: `u[sat]` applies on `[start, end)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlSegment {
    pub start: f64,
    pub end: f64,
    pub u: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ControlSchedule {
    pub segments: Vec<ControlSegment>,
}

impl ControlSchedule {
    /// One segment holding `u` over `[start, end)`.
    pub fn constant(start: f64, end: f64, u: Vec<f64>) -> Self {
        Self {
            segments: vec![ControlSegment { start, end, u }],
        }
    }

    fn validate(&self, n_sats: usize, t0: f64, t1: f64) -> Result<(), PropagationError> {
        let gap = |msg: String| Err(PropagationError::Schedule(msg));
        let Some(first) = self.segments.first() else {
            return gap("empty".into());
        };
        if first.start > t0 {
            return gap(format!("starts at {} s, after epoch {} s", first.start, t0));
        }
        for (k, s) in self.segments.iter().enumerate() {
            if s.u.len() != n_sats {
                return gap(format!("segment {k} has {} controls for {n_sats} satellites", s.u.len()));
            }
            if !(s.end > s.start) {
                return gap(format!("segment {k} is empty or reversed"));
            }
            if s.u.iter().any(|u| !(0.0..=1.0).contains(u)) {
                return gap(format!("segment {k} has a drag ratio outside [0, 1]"));
            }
            if k > 0 && s.start != self.segments[k - 1].end {
                return gap(format!("gap or overlap before segment {k} at {} s", s.start));
            }
        }
        let last = self.segments.last().unwrap();
        if last.end < t1 {
            return gap(format!("ends at {} s, before {} s", last.end, t1));
        }
        Ok(())
    }

    /// Segment index active at time `t`, plus the time the segment ends.
    fn active(&self, t: f64, from: usize) -> (usize, f64) {
        let mut k = from;
        while k + 1 < self.segments.len() && self.segments[k].end <= t {
            k += 1;
        }
        (k, self.segments[k].end)
    }
}

/// Sampled multi-satellite trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    /// `states[sat][sample]`
    pub states: Vec<Vec<SatelliteSimState>>,
}

impl Trajectory {
    pub fn n_sats(&self) -> usize {
        self.states.len()
    }

    pub fn u_series(&self, sat: usize) -> Vec<f64> {
        self.states[sat].iter().map(|s| s.u_applied).collect()
    }

    pub fn final_states(&self) -> Vec<SatelliteSimState> {
        self.states.iter().map(|s| *s.last().unwrap()).collect()
    }

    /// CSV with one row per (sample, satellite); see [`TRAJECTORY_CSV_HEADER`].
    pub fn to_csv(&self, c: &EarthConstants) -> Result<String, OrbitError> {
        let mut out = String::from(TRAJECTORY_CSV_HEADER);
        out.push('\n');
        for (k, t) in self.times.iter().enumerate() {
            for (sat, series) in self.states.iter().enumerate() {
                write_state_row(&mut out, *t, sat, &series[k], c)?;
            }
        }
        Ok(out)
    }
}

pub const TRAJECTORY_CSV_HEADER: &str =
    "t_s,sat_id,x,y,z,vx,vy,vz,a_m,e,i_deg,raan_deg,theta_cum_deg,u";

pub(crate) fn write_state_row(
    out: &mut String,
    t: f64,
    sat: usize,
    s: &SatelliteSimState,
    c: &EarthConstants,
) -> Result<(), OrbitError> {
    let oe = s.osculating(c)?;
    let (r, v) = (s.cart.r, s.cart.v);
    writeln!(
        out,
        "{t:.3},{sat},{:.4},{:.4},{:.4},{:.7},{:.7},{:.7},{:.4},{:.8},{:.8},{:.8},{:.8},{:.6}",
        r.x,
        r.y,
        r.z,
        v.x,
        v.y,
        v.z,
        oe.a,
        oe.e,
        oe.i.to_degrees(),
        normalize_angle(oe.raan).to_degrees(),
        s.theta_cum.to_degrees(),
        s.u_applied,
    )
    .expect("writing to a String cannot fail");
    Ok(())
}

/// Propagates every satellite over `duration` seconds on a uniform grid of
/// step `dt`, holding the scheduled drag ratio constant within each segment
/// (steps are split at segment boundaries). A sample is recorded every
/// `sample_every` grid steps and at the final time.
pub fn propagate(
    states: &[SatelliteSimState],
    schedule: &ControlSchedule,
    duration: f64,
    model: &ForceModel,
    dt: f64,
    sample_every: usize,
    exec: Execution,
) -> Result<Trajectory, PropagationError> {
    let Some(first) = states.first() else {
        return Ok(Trajectory {
            times: Vec::new(),
            states: Vec::new(),
        });
    };
    let t0 = first.t;
    if states.iter().any(|s| s.t != t0) {
        return Err(PropagationError::EpochMismatch);
    }
    if !(dt > 0.0) || !(duration >= 0.0) {
        return Err(PropagationError::InvalidStep { dt, max: f64::NAN });
    }
    let t1 = t0 + duration;
    schedule.validate(states.len(), t0, t1)?;
    let sample_every = sample_every.max(1);
    let n_grid = (duration / dt - 1e-9).ceil().max(0.0) as usize;
    let grid_time = |k: usize| if k == n_grid { t1 } else { t0 + k as f64 * dt };

    let mut times = vec![t0];
    for k in 1..=n_grid {
        if k % sample_every == 0 || k == n_grid {
            times.push(grid_time(k));
        }
    }

    let per_sat = par::map_range(exec, states.len(), |sat| {
        let mut s = states[sat];
        let mut seg = 0usize;
        let mut out = Vec::with_capacity(times.len());
        out.push(s);
        for k in 1..=n_grid {
            let target = grid_time(k);
            while s.t < target {
                let (idx, seg_end) = schedule.active(s.t, seg);
                seg = idx;
                let end = target.min(seg_end);
                let h = if end - s.t < 1e-9 { target - s.t } else { end - s.t };
                s = step(&s, schedule.segments[seg].u[sat], h, model)?;
                if (s.t - end).abs() < 1e-6 {
                    s.t = end;
                }
            }
            if k % sample_every == 0 || k == n_grid {
                out.push(s);
            }
        }
        Ok::<_, PropagationError>(out)
    });
    let states = per_sat.into_iter().collect::<Result<Vec<_>, _>>()?;
    Ok(Trajectory { times, states })
}
