//! Lock-in range: closed-form estimates for the classical and folding loops,
//! and a cycle-slip bisection estimator usable with any detector.

use std::f64::consts::PI;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::loop_model::{simulate, LoopParams, SimOptions};
use crate::pd_char::{PdKind, PD_PERIOD};

/// Which branch of the folding formula applies, by the sign of `a² − 2π`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LockinRegime {
    /// `a² − 2π > 0`
    NodeCase,
    /// `a² − 2π = 0`
    CriticalCase,
    /// `a² − 2π < 0`
    FocusCase,
}

impl LockinRegime {
    pub fn label(self) -> &'static str {
        match self {
            LockinRegime::NodeCase => "i",
            LockinRegime::CriticalCase => "ii",
            LockinRegime::FocusCase => "iii",
        }
    }
}

impl fmt::Display for LockinRegime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LockinParams {
    pub a: f64,
    pub d_minus: f64,
    pub d_plus: f64,
    pub omega_l: f64,
    /// Set for the folding formula only.
    pub regime: Option<LockinRegime>,
}

fn check_positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("{name} must be > 0, got {v}")))
    }
}

/// Classical loop: `a = √(4K_vco·τ2²/τ1)`, `d− = |a|`, `d+ = √(a² + 4π)`.
pub fn classical_params(k_vco: f64, tau1: f64, tau2: f64) -> Result<LockinParams> {
    check_positive("k_vco", k_vco)?;
    check_positive("tau1", tau1)?;
    check_positive("tau2", tau2)?;
    let a = (4.0 * k_vco * tau2 * tau2 / tau1).sqrt();
    let d_minus = a.abs();
    let d_plus = (a * a + 4.0 * PI).sqrt();
    let omega_l = 2.0 * a * PI.sqrt() / tau2
        * (a / (2.0 * d_minus) * ((d_plus + d_minus) / (d_plus - d_minus)).ln()).exp();
    Ok(LockinParams {
        a,
        d_minus,
        d_plus,
        omega_l,
        regime: None,
    })
}

/// Closed-form lock-in range of the classical loop, rad/s.
pub fn lockin_classical(k_vco: f64, tau1: f64, tau2: f64) -> Result<f64> {
    classical_params(k_vco, tau1, tau2).map(|p| p.omega_l)
}

/// Folding loop: `a = √(4K_vco·K_pd·τ2²/τ1)`, `d− = √|a² − 2π|`,
/// `d+ = √|a² − 4π|`, three cases on the sign of `a² − 2π`.
pub fn folding_params(k_vco: f64, k_pd: f64, tau1: f64, tau2: f64) -> Result<LockinParams> {
    check_positive("k_vco", k_vco)?;
    check_positive("k_pd", k_pd)?;
    check_positive("tau1", tau1)?;
    check_positive("tau2", tau2)?;
    let a2 = 4.0 * k_vco * k_pd * tau2 * tau2 / tau1;
    let a = a2.sqrt();
    let d_minus = (a2 - 2.0 * PI).abs().sqrt();
    let d_plus = (a2 - 4.0 * PI).abs().sqrt();
    let pre = 2.0 * a * PI.sqrt() / tau2;
    let gap = a2 - 2.0 * PI;

    let (regime, omega_l) = if gap.abs() < 1e-12 * a2 {
        (LockinRegime::CriticalCase, pre * (a / d_plus).exp())
    } else if gap > 0.0 {
        if d_plus <= d_minus {
            return Err(Error::Singularity(format!(
                "node case needs d+ > d- for the logarithm; a^2 = {a2} gives d+ = {d_plus}, d- = {d_minus}"
            )));
        }
        let e = a / (2.0 * d_minus) * ((d_plus + d_minus) / (d_plus - d_minus)).ln();
        (LockinRegime::NodeCase, pre * e.exp())
    } else {
        let e = a / d_minus * (d_minus / d_plus).atan();
        (LockinRegime::FocusCase, pre * e.exp())
    };
    Ok(LockinParams {
        a,
        d_minus,
        d_plus,
        omega_l,
        regime: Some(regime),
    })
}

/// Closed-form lock-in range of the folding loop and the branch used.
pub fn lockin_folding(k_vco: f64, k_pd: f64, tau1: f64, tau2: f64) -> Result<(f64, LockinRegime)> {
    let p = folding_params(k_vco, k_pd, tau1, tau2)?;
    Ok((p.omega_l, p.regime.expect("folding params carry a regime")))
}

/// Settings of the cycle-slip bisection.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NumericLockin {
    /// Integration horizon in units of the slowest linear time constant.
    pub horizon_time_constants: f64,
    /// Upper bracket in units of `a/τ2`.
    pub upper_bracket_scale: f64,
}

impl Default for NumericLockin {
    fn default() -> Self {
        NumericLockin {
            horizon_time_constants: 40.0,
            upper_bracket_scale: 100.0,
        }
    }
}

impl NumericLockin {
    /// Whether an abrupt change of the offset from `−ω` to `+ω`, starting in
    /// the locked state, is re-acquired without a cycle slip.
    pub fn reacquires(&self, params: &LoopParams, omega: f64) -> Result<bool> {
        let rate = params.settle_rate();
        if !(rate > 0.0 && rate.is_finite()) {
            return Err(Error::InvalidParameter(
                "loop has no damping (tau2 = 0); lock-in is undefined".into(),
            ));
        }
        let mut before = *params;
        before.set_offset(-omega);
        let start = before.equilibrium();
        let mut after = *params;
        after.set_offset(omega);

        // resolve the initial phase rate 2ω at ≥ 100 steps per detector period
        let dt = params
            .recommended_dt()
            .min(0.01 * PD_PERIOD / (2.0 * omega.abs()).max(f64::MIN_POSITIVE));
        let opts = SimOptions {
            dt,
            t_end: self.horizon_time_constants / rate,
            record_every: 0,
            stop_on_slip: true,
            stop_when_locked: Some(10),
        };
        let tr = simulate(&after, start, &opts)?;
        Ok(tr.locked && !tr.slipped)
    }

    /// Bisection for the largest offset that is re-acquired without slipping.
    ///
    /// Assumes the pass/fail predicate is monotone in `ω` over the bracket.
    pub fn estimate(&self, params: &LoopParams, tolerance: f64) -> Result<f64> {
        params.validate()?;
        check_positive("tolerance", tolerance)?;
        let f = &params.filter;
        let a = (4.0 * params.k_vco * params.k_pd * f.tau2 * f.tau2 / f.tau1).sqrt();
        if a.is_nan() || a <= 0.0 {
            return Err(Error::InvalidParameter(
                "tau2 must be > 0 for a lock-in estimate".into(),
            ));
        }
        let mut hi = self.upper_bracket_scale * a / f.tau2;
        if self.reacquires(params, hi)? {
            return Err(Error::Bracket(format!(
                "no cycle slip at the upper bracket {hi} rad/s; parameters look degenerate"
            )));
        }
        let mut lo = 0.0;
        if !self.reacquires(params, lo)? {
            return Err(Error::Bracket("loop does not hold lock at zero offset".into()));
        }
        while hi - lo > tolerance {
            let mid = 0.5 * (lo + hi);
            if self.reacquires(params, mid)? {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(0.5 * (lo + hi))
    }
}

/// Frequency scale `a/τ2` of a loop with `a = √(4·K_vco·K_pd·τ2²/τ1)`;
/// lock-in ranges are of this order, so it is a natural unit for
/// tolerances.
pub fn natural_scale(params: &LoopParams) -> f64 {
    let f = &params.filter;
    (4.0 * params.k_vco * params.k_pd / f.tau1).sqrt()
}

/// Cycle-slip bisection estimate of the lock-in range with default settings.
pub fn lockin_numeric(params: &LoopParams, tolerance: f64) -> Result<f64> {
    NumericLockin::default().estimate(params, tolerance)
}

/// Convenience: loop parameters with zero offset for a detector kind.
pub fn params_for(pd: PdKind, k_vco: f64, tau1: f64, tau2: f64) -> Result<LoopParams> {
    let filter = crate::loop_model::PiFilter::new(tau1, tau2)?;
    LoopParams::with_offset(pd, k_vco, 0.0, filter)
}
