//! Phase-domain model of a Costas loop with a PI loop filter.
//!
//! State is the phase error `θe` and the scalar filter state `x`:
//!
//! ```text
//! u   = −K_pd·φ(θe)            loop-filter input
//! ẋ   = A·x + b·u              A = 0, b = 1/τ1
//! g   = c·x + h·u              c = 1, h = τ2/τ1
//! θ̇e  = (ω_ref − ω_free) − K_vco·g
//! ```
//!
//! The negated detector output makes the negative-slope zero of `φ` the
//! restoring one (see [`crate::pd_char::find_stable_zero`]).

use std::f64::consts::FRAC_PI_2;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pd_char::{find_stable_zero, PdKind, PD_PERIOD};

/// Proportional-integral loop filter `H(s) = (1 + τ2·s)/(τ1·s)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PiFilter {
    pub tau1: f64,
    pub tau2: f64,
}

impl PiFilter {
    pub fn new(tau1: f64, tau2: f64) -> Result<Self> {
        let f = PiFilter { tau1, tau2 };
        f.validate()?;
        Ok(f)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tau1 > 0.0 && self.tau1.is_finite()) {
            return Err(Error::InvalidParameter(format!("tau1 must be > 0, got {}", self.tau1)));
        }
        if !(self.tau2 >= 0.0 && self.tau2.is_finite()) {
            return Err(Error::InvalidParameter(format!("tau2 must be >= 0, got {}", self.tau2)));
        }
        Ok(())
    }

    pub fn a(&self) -> f64 {
        0.0
    }
    pub fn b(&self) -> f64 {
        1.0 / self.tau1
    }
    pub fn c(&self) -> f64 {
        1.0
    }
    pub fn h(&self) -> f64 {
        self.tau2 / self.tau1
    }

    /// `H(s) = −c·(A − sI)⁻¹·b + h` from the state-space realization.
    pub fn transfer(&self, s: Complex64) -> Complex64 {
        -self.c() * self.b() / (Complex64::new(self.a(), 0.0) - s) + self.h()
    }
}

/// Parameters of one loop in the phase domain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LoopParams {
    pub pd: PdKind,
    pub k_vco: f64,
    pub k_pd: f64,
    pub omega_ref: f64,
    pub omega_free: f64,
    pub filter: PiFilter,
}

impl LoopParams {
    /// Uses the detector's own gain for `k_pd`.
    pub fn new(pd: PdKind, k_vco: f64, omega_ref: f64, omega_free: f64, filter: PiFilter) -> Result<Self> {
        let p = LoopParams {
            pd,
            k_vco,
            k_pd: pd.k_pd(),
            omega_ref,
            omega_free,
            filter,
        };
        p.validate()?;
        Ok(p)
    }

    /// Convenience constructor from the frequency offset alone.
    pub fn with_offset(pd: PdKind, k_vco: f64, offset: f64, filter: PiFilter) -> Result<Self> {
        Self::new(pd, k_vco, offset, 0.0, filter)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.k_vco > 0.0 && self.k_vco.is_finite()) {
            return Err(Error::InvalidParameter(format!("k_vco must be > 0, got {}", self.k_vco)));
        }
        if !(self.k_pd > 0.0 && self.k_pd.is_finite()) {
            return Err(Error::InvalidParameter(format!("k_pd must be > 0, got {}", self.k_pd)));
        }
        if !self.omega_ref.is_finite() || !self.omega_free.is_finite() {
            return Err(Error::InvalidParameter("frequencies must be finite".into()));
        }
        self.filter.validate()
    }

    /// `ω_ref − ω_free`.
    pub fn offset(&self) -> f64 {
        self.omega_ref - self.omega_free
    }

    pub fn set_offset(&mut self, offset: f64) {
        self.omega_ref = self.omega_free + offset;
    }

    /// `K_pd·φ(θe)` with this loop's gain.
    pub fn detector(&self, theta_e: f64) -> f64 {
        self.k_pd * self.pd.normalized(theta_e)
    }

    /// Slope of the loop-filter input `−K_pd·φ` at the stable zero.
    pub fn restoring_slope(&self) -> f64 {
        let z = find_stable_zero(self.pd);
        let d = 1e-6;
        -(self.detector(z + d) - self.detector(z - d)) / (2.0 * d)
    }

    /// Roots of the loop linearized about its lock point.
    pub fn linear_poles(&self) -> (Complex64, Complex64) {
        let s = self.restoring_slope();
        let p = self.k_vco * self.filter.h() * s * self.filter.c();
        let q = self.k_vco * self.filter.b() * s * self.filter.c();
        let disc = Complex64::new(p * p - 4.0 * q, 0.0).sqrt();
        ((-p + disc) / 2.0, (-p - disc) / 2.0)
    }

    /// Slowest exponential decay rate of the linearized loop.
    pub fn settle_rate(&self) -> f64 {
        let (a, b) = self.linear_poles();
        (-a.re).min(-b.re)
    }

    /// Step-size guideline `0.01·min(τ1, τ2 (or τ1), 1/K_vco)`.
    pub fn recommended_dt(&self) -> f64 {
        let t2 = if self.filter.tau2 > 0.0 { self.filter.tau2 } else { self.filter.tau1 };
        0.01 * self.filter.tau1.min(t2).min(1.0 / self.k_vco)
    }

    /// Locked equilibrium: stable zero, control `g = (ω_ref − ω_free)/K_vco`.
    pub fn equilibrium(&self) -> PhaseState {
        PhaseState {
            theta_e: find_stable_zero(self.pd),
            x: self.offset() / (self.k_vco * self.filter.c()),
            t: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseState {
    /// Unwrapped phase error, radians.
    pub theta_e: f64,
    pub x: f64,
    pub t: f64,
}

impl PhaseState {
    pub fn new(theta_e: f64, x: f64) -> Self {
        PhaseState { theta_e, x, t: 0.0 }
    }

    pub fn is_finite(&self) -> bool {
        self.theta_e.is_finite() && self.x.is_finite() && self.t.is_finite()
    }
}

/// VCO control signal `g = c·x − h·K_pd·φ(θe)`.
pub fn control(params: &LoopParams, state: &PhaseState) -> f64 {
    let u = -params.detector(state.theta_e);
    params.filter.c() * state.x + params.filter.h() * u
}

/// Right-hand side `(θ̇e, ẋ)`.
pub fn phase_ode_rhs(params: &LoopParams, state: &PhaseState) -> (f64, f64) {
    rhs(params, state.theta_e, state.x)
}

#[inline]
fn rhs(params: &LoopParams, theta_e: f64, x: f64) -> (f64, f64) {
    let f = &params.filter;
    let u = -params.detector(theta_e);
    let g = f.c() * x + f.h() * u;
    (params.offset() - params.k_vco * g, f.a() * x + f.b() * u)
}

#[inline]
fn rk4_step(f: impl Fn(f64, f64) -> (f64, f64), y0: f64, y1: f64, dt: f64) -> (f64, f64) {
    let (k1a, k1b) = f(y0, y1);
    let (k2a, k2b) = f(y0 + 0.5 * dt * k1a, y1 + 0.5 * dt * k1b);
    let (k3a, k3b) = f(y0 + 0.5 * dt * k2a, y1 + 0.5 * dt * k2b);
    let (k4a, k4b) = f(y0 + dt * k3a, y1 + dt * k3b);
    (
        y0 + dt / 6.0 * (k1a + 2.0 * k2a + 2.0 * k3a + k4a),
        y1 + dt / 6.0 * (k1b + 2.0 * k2b + 2.0 * k3b + k4b),
    )
}

/// Phase-error tolerance of the lock test, radians.
pub const LOCK_PHASE_TOL: f64 = 1e-3;
/// Residual phase-rate tolerance of the lock test, relative to `K_vco`.
pub const LOCK_RATE_TOL: f64 = 1e-3;
/// Phase excursion counted as a cycle slip: one detector period.
pub const SLIP_EXCURSION: f64 = FRAC_PI_2;

/// Fixed-step RK4 trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub samples: Vec<PhaseState>,
    pub locked: bool,
    pub slipped: bool,
    /// Largest `|θe − θ*₀|` seen, where `θ*₀` is the stable zero nearest the start.
    pub max_excursion: f64,
    /// Signed number of detector periods between the initial and final lock points.
    pub periods_slipped: i64,
    /// Time at which an early stop on lock happened.
    pub lock_time: Option<f64>,
    pub final_state: PhaseState,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimOptions {
    pub dt: f64,
    pub t_end: f64,
    /// Keep every n-th step; 0 keeps only the endpoints.
    pub record_every: usize,
    /// Stop as soon as the excursion reaches one detector period.
    pub stop_on_slip: bool,
    /// Stop once the lock test has held for this many consecutive steps.
    pub stop_when_locked: Option<usize>,
}

impl SimOptions {
    pub fn new(dt: f64, t_end: f64) -> Self {
        SimOptions {
            dt,
            t_end,
            record_every: 1,
            stop_on_slip: false,
            stop_when_locked: None,
        }
    }
}

fn nearest_zero_index(theta: f64, zero: f64) -> i64 {
    ((theta - zero) / PD_PERIOD).round() as i64
}

fn lock_test(params: &LoopParams, zero: f64, theta: f64, x: f64) -> bool {
    let k = nearest_zero_index(theta, zero);
    let near = zero + k as f64 * PD_PERIOD;
    let (rate, _) = rhs(params, theta, x);
    (theta - near).abs() < LOCK_PHASE_TOL && rate.abs() < LOCK_RATE_TOL * params.k_vco
}

/// Integrate with explicit options.
pub fn simulate(params: &LoopParams, initial: PhaseState, opts: &SimOptions) -> Result<Trajectory> {
    params.validate()?;
    if !(opts.dt > 0.0 && opts.dt.is_finite()) {
        return Err(Error::InvalidParameter(format!("dt must be > 0, got {}", opts.dt)));
    }
    if !(opts.t_end >= 0.0 && opts.t_end.is_finite()) {
        return Err(Error::InvalidParameter(format!("t_end must be >= 0, got {}", opts.t_end)));
    }
    if !initial.is_finite() {
        return Err(Error::InvalidParameter("initial state must be finite".into()));
    }
    let zero = find_stable_zero(params.pd);
    let k0 = nearest_zero_index(initial.theta_e, zero);
    let home = zero + k0 as f64 * PD_PERIOD;
    let n_steps = (opts.t_end / opts.dt).round() as usize;

    let mut samples = Vec::with_capacity(match opts.record_every {
        0 => 2,
        n => n_steps / n + 2,
    });
    samples.push(initial);
    let (mut theta, mut x) = (initial.theta_e, initial.x);
    let mut t = initial.t;
    let mut max_excursion = (theta - home).abs();
    let mut lock_run = 0usize;
    let mut lock_time = None;
    let mut last_recorded = 0usize;
    let mut steps_done = 0usize;

    for step in 1..=n_steps {
        (theta, x) = rk4_step(|a, b| rhs(params, a, b), theta, x, opts.dt);
        t = initial.t + step as f64 * opts.dt;
        steps_done = step;
        if !theta.is_finite() || !x.is_finite() {
            return Err(Error::NumericalBlowUp {
                t,
                what: format!("theta_e = {theta}, x = {x}"),
            });
        }
        max_excursion = max_excursion.max((theta - home).abs());
        if opts.record_every > 0 && step % opts.record_every == 0 {
            samples.push(PhaseState { theta_e: theta, x, t });
            last_recorded = step;
        }
        if opts.stop_on_slip && max_excursion >= SLIP_EXCURSION {
            break;
        }
        if let Some(hold) = opts.stop_when_locked {
            if lock_test(params, zero, theta, x) {
                lock_run += 1;
                if lock_run >= hold.max(1) {
                    lock_time = Some(t);
                    break;
                }
            } else {
                lock_run = 0;
            }
        }
    }
    let final_state = PhaseState { theta_e: theta, x, t };
    if last_recorded != steps_done {
        samples.push(final_state);
    }
    let kf = nearest_zero_index(theta, zero);
    Ok(Trajectory {
        samples,
        locked: lock_test(params, zero, theta, x),
        slipped: max_excursion >= SLIP_EXCURSION || kf != k0,
        max_excursion,
        periods_slipped: kf - k0,
        lock_time,
        final_state,
    })
}

/// Fixed-step RK4 from `initial` to `t_end`, recording every step.
pub fn integrate(params: &LoopParams, initial: PhaseState, dt: f64, t_end: f64) -> Result<Trajectory> {
    simulate(params, initial, &SimOptions::new(dt, t_end))
}

/// State in the `2π`-periodic coordinates `θ̃ = 4θe`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransformedState {
    pub theta_tilde: f64,
    pub x: f64,
    pub t: f64,
    /// `(ω_ref − ω_free)/4`.
    pub omega_tilde: f64,
}

pub fn transform_coordinates(state: &PhaseState, params: &LoopParams) -> TransformedState {
    TransformedState {
        theta_tilde: 4.0 * state.theta_e,
        x: state.x,
        t: state.t,
        omega_tilde: params.offset() / 4.0,
    }
}

/// Right-hand side in transformed coordinates,
/// `ẋ = −b·ṽ(θ̃)`, `θ̃̇ = 4(ω_ref − ω_free) − 4K_vco·(c·x − h·ṽ(θ̃))`
/// with `ṽ(θ̃) = K_pd·φ(θ̃/4)`.
pub fn transformed_rhs(params: &LoopParams, theta_tilde: f64, x: f64) -> (f64, f64) {
    let f = &params.filter;
    let v = params.detector(theta_tilde / 4.0);
    (
        4.0 * params.omega_ref - 4.0 * params.omega_free - 4.0 * params.k_vco * (f.c() * x - f.h() * v),
        f.a() * x - f.b() * v,
    )
}

/// RK4 in transformed coordinates; returns `(t, θ̃, x)` per step.
pub fn integrate_transformed(
    params: &LoopParams,
    initial: TransformedState,
    dt: f64,
    t_end: f64,
) -> Result<Vec<(f64, f64, f64)>> {
    params.validate()?;
    if dt.is_nan() || dt <= 0.0 {
        return Err(Error::InvalidParameter(format!("dt must be > 0, got {dt}")));
    }
    let n = (t_end / dt).round() as usize;
    let mut out = Vec::with_capacity(n + 1);
    let (mut th, mut x) = (initial.theta_tilde, initial.x);
    out.push((initial.t, th, x));
    for step in 1..=n {
        (th, x) = rk4_step(|a, b| transformed_rhs(params, a, b), th, x, dt);
        let t = initial.t + step as f64 * dt;
        if !th.is_finite() || !x.is_finite() {
            return Err(Error::NumericalBlowUp { t, what: "transformed state".into() });
        }
        out.push((t, th, x));
    }
    Ok(out)
}
