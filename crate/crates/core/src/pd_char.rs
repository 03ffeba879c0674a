//! Phase-detector characteristics of the QPSK Costas loop variants.
//!
//! Every characteristic here is a total, `π/2`-periodic function of the
//! phase error `θe = θ_ref − θ_vco`. The "raw" functions return the
//! averaged loop-filter input `K_pd·φ(θe)`; [`PdKind::normalized`] divides by
//! `K_pd` to give the unit-amplitude shape `φ(θe)`.
//!
//! | kind        | `K_pd`        | raw value on `(−π/4, π/4)`          |
//! |-------------|---------------|-------------------------------------|
//! | Classical   | 1/2           | `−sin(θe)/√2`                       |
//! | FourthPower | 1             | `−sin(4θe)`                         |
//! | Folding     | `sin(π/8)`    | `2·|sin(θe/2)| − sin(π/8)`          |

use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2, FRAC_PI_4, PI, SQRT_2};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One period of every supported characteristic.
pub const PD_PERIOD: f64 = FRAC_PI_2;

/// Detector gain of the classical loop.
pub const K_PD_CLASSICAL: f64 = 0.5;

/// Detector gain of the fourth-power loop.
pub const K_PD_FOURTH: f64 = 1.0;

/// Detector gain of the folding loop, `√(2−√2)/2` (equal to `sin(π/8)`).
pub const K_PD_FOLDING: f64 = 0.382_683_432_365_089_8;

/// Phase-detector variants and the reference shapes they are compared to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PdKind {
    Classical,
    FourthPower,
    Folding,
    SinusoidalRef,
    SawtoothRef,
    TriangularRef,
}

impl PdKind {
    pub const ALL: [PdKind; 6] = [
        PdKind::Classical,
        PdKind::FourthPower,
        PdKind::Folding,
        PdKind::SinusoidalRef,
        PdKind::SawtoothRef,
        PdKind::TriangularRef,
    ];

    /// The three loop circuits (the remaining kinds are reference shapes).
    pub const CIRCUITS: [PdKind; 3] = [PdKind::Classical, PdKind::FourthPower, PdKind::Folding];

    pub fn is_circuit(self) -> bool {
        matches!(self, PdKind::Classical | PdKind::FourthPower | PdKind::Folding)
    }

    /// Gain relating the raw characteristic to its unit-amplitude shape.
    pub fn k_pd(self) -> f64 {
        match self {
            PdKind::Classical => K_PD_CLASSICAL,
            PdKind::FourthPower => K_PD_FOURTH,
            PdKind::Folding => K_PD_FOLDING,
            PdKind::SinusoidalRef | PdKind::SawtoothRef | PdKind::TriangularRef => 1.0,
        }
    }

    /// `K_pd·φ(θe)`.
    pub fn eval(self, theta_e: f64) -> f64 {
        match self {
            PdKind::Classical => pd_classical(theta_e),
            PdKind::FourthPower => pd_fourth(theta_e),
            PdKind::Folding => pd_folding(theta_e),
            PdKind::SinusoidalRef | PdKind::SawtoothRef | PdKind::TriangularRef => {
                pd_reference(self, theta_e)
            }
        }
    }

    /// `φ(θe)`, unit amplitude.
    pub fn normalized(self, theta_e: f64) -> f64 {
        self.eval(theta_e) / self.k_pd()
    }

    /// Reference shape that a circuit characteristic approximates.
    pub fn reference(self) -> PdKind {
        match self {
            PdKind::Classical | PdKind::SawtoothRef => PdKind::SawtoothRef,
            PdKind::FourthPower | PdKind::SinusoidalRef => PdKind::SinusoidalRef,
            PdKind::Folding | PdKind::TriangularRef => PdKind::TriangularRef,
        }
    }

    /// Phase errors inside one period `[−π/4, π/4)` where the curve jumps.
    fn jumps(self) -> &'static [f64] {
        match self {
            PdKind::Classical | PdKind::SawtoothRef => &[-FRAC_PI_4],
            _ => &[],
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            PdKind::Classical => "classical",
            PdKind::FourthPower => "fourth-power",
            PdKind::Folding => "folding",
            PdKind::SinusoidalRef => "sinusoidal-ref",
            PdKind::SawtoothRef => "sawtooth-ref",
            PdKind::TriangularRef => "triangular-ref",
        }
    }
}

impl fmt::Display for PdKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PdKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        PdKind::ALL
            .iter()
            .copied()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown phase detector kind `{s}`")))
    }
}

/// Reduce `theta` into `(−π/4, π/4]`.
///
/// Points exactly on a branch boundary land on `+π/4`, which selects the
/// left-limit branch of the piecewise characteristics.
pub fn wrap_quarter(theta: f64) -> f64 {
    let k = ((theta - FRAC_PI_4) / FRAC_PI_2).ceil();
    let r = theta - k * FRAC_PI_2;
    if r <= -FRAC_PI_4 {
        r + FRAC_PI_2
    } else {
        r
    }
}

/// `sign` with `sign(0) = +1`.
pub fn sign(v: f64) -> f64 {
    if v < 0.0 {
        -1.0
    } else {
        1.0
    }
}

/// Classical characteristic `K_pd·φ(θe)` in `[−1/2, 1/2]`.
pub fn pd_classical(theta_e: f64) -> f64 {
    -FRAC_1_SQRT_2 * wrap_quarter(theta_e).sin()
}

/// Fourth-power characteristic `−sin(4θe)`.
pub fn pd_fourth(theta_e: f64) -> f64 {
    -(4.0 * theta_e).sin()
}

/// Folding characteristic in the collapsed-radical form.
pub fn pd_folding(theta_e: f64) -> f64 {
    let s = (theta_e + FRAC_PI_4).sin().abs() + (theta_e + FRAC_PI_4).cos().abs();
    (2.0 - SQRT_2 * s).max(0.0).sqrt() - K_PD_FOLDING
}

/// Folding characteristic as the centred magnitude of the shifted complex
/// signal `(|cos(θe+π/4)| − cos π/4) + j(|sin(θe+π/4)| − sin π/4)`.
pub fn pd_folding_complex(theta_e: f64) -> f64 {
    folding_from_iq(
        (theta_e + FRAC_PI_4).cos(),
        (theta_e + FRAC_PI_4).sin(),
    )
}

/// Folding detector applied directly to filtered branch signals.
pub fn folding_from_iq(i_val: f64, q_val: f64) -> f64 {
    let re = i_val.abs() - FRAC_PI_4.cos();
    let im = q_val.abs() - FRAC_PI_4.sin();
    re.hypot(im) - K_PD_FOLDING
}

/// Classical detector `I·sign(Q) − Q·sign(I)` applied to branch signals.
///
/// With unit-magnitude `I + jQ` this is the unit-amplitude shape `φ`; the
/// loop applies `K_pd` on top.
pub fn classical_from_iq(i_val: f64, q_val: f64) -> f64 {
    i_val * sign(q_val) - q_val * sign(i_val)
}

/// Fourth-power detector: the quadrature part of `(I + jQ)^4`, computed as
/// two complex squarings.
pub fn fourth_from_iq(i_val: f64, q_val: f64) -> f64 {
    let (re2, im2) = (i_val * i_val - q_val * q_val, 2.0 * i_val * q_val);
    2.0 * re2 * im2
}

/// Unit-amplitude reference shapes.
///
/// Non-reference kinds fall back to their own normalized characteristic.
pub fn pd_reference(kind: PdKind, theta_e: f64) -> f64 {
    match kind {
        PdKind::SinusoidalRef => -(4.0 * theta_e).sin(),
        PdKind::SawtoothRef => -(4.0 / PI) * wrap_quarter(theta_e),
        PdKind::TriangularRef => (8.0 / PI) * wrap_quarter(theta_e).abs() - 1.0,
        other => other.normalized(theta_e),
    }
}

/// Maximum of `|φ_a − φ_b|` over one period of a uniform grid.
///
/// Grid points sitting on a jump of either curve are replaced by both
/// one-sided limits.
pub fn max_deviation(kind_a: PdKind, kind_b: PdKind, n_samples: usize) -> Result<f64> {
    if n_samples < 1000 {
        return Err(Error::InvalidParameter(format!(
            "max_deviation needs at least 1000 samples, got {n_samples}"
        )));
    }
    let jumps: Vec<f64> = kind_a.jumps().iter().chain(kind_b.jumps()).copied().collect();
    let start = -FRAC_PI_4;
    let step = PD_PERIOD / n_samples as f64;
    let eps = 1e-9;
    let diff = |t: f64| (kind_a.normalized(t) - kind_b.normalized(t)).abs();

    let mut worst = 0.0_f64;
    for k in 0..n_samples {
        let t = start + k as f64 * step;
        let on_jump = jumps
            .iter()
            .any(|&j| (wrap_quarter(t - j)).abs() < 0.5 * step);
        let d = if on_jump {
            diff(t - eps).max(diff(t + eps))
        } else {
            diff(t)
        };
        worst = worst.max(d);
    }
    Ok(worst)
}

/// Locally stable lock point in `[−π/4, π/4)`.
///
/// The loop filter is driven by `−K_pd·φ(θe)`, so the restoring zero is the
/// one where the raw characteristic crosses from positive to negative.
pub fn find_stable_zero(kind: PdKind) -> f64 {
    const GRID: usize = 4096;
    let start = -FRAC_PI_4;
    let step = PD_PERIOD / GRID as f64;
    let f = |t: f64| kind.eval(t);

    // exact zero on the grid with the right slope
    for k in 0..GRID {
        let t = start + k as f64 * step;
        if f(t) == 0.0 && f(t - step) > 0.0 && f(t + step) < 0.0 {
            return t;
        }
    }
    for k in 0..GRID {
        let lo = start + k as f64 * step;
        let hi = lo + step;
        if f(lo) > 0.0 && f(hi) < 0.0 {
            return bisect(f, lo, hi);
        }
    }
    unreachable!("every supported characteristic has a restoring zero per period")
}

fn bisect(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let v = f(mid);
        if v == 0.0 {
            return mid;
        }
        if v > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    if f(lo).abs() <= f(hi).abs() {
        lo
    } else {
        hi
    }
}

/// Decision table for QPSK symbols, `sign(0) = +1`.
pub fn decide_symbol(i_val: f64, q_val: f64) -> u8 {
    match (sign(i_val) > 0.0, sign(q_val) > 0.0) {
        (true, true) => 1,
        (false, true) => 3,
        (false, false) => 5,
        (true, false) => 7,
    }
}

/// Sampled characteristic over one period.
#[derive(Debug, Clone, PartialEq)]
pub struct PdCurve {
    pub kind: PdKind,
    pub thetas: Vec<f64>,
    pub values: Vec<f64>,
    pub k_pd: f64,
}

impl PdCurve {
    /// Sample `n_samples` points uniformly on `[−π/4, π/4)`.
    pub fn sample(kind: PdKind, n_samples: usize) -> Result<Self> {
        if n_samples < 2 {
            return Err(Error::InvalidParameter(format!(
                "a curve needs at least 2 samples, got {n_samples}"
            )));
        }
        let step = PD_PERIOD / n_samples as f64;
        let thetas: Vec<f64> = (0..n_samples)
            .map(|k| -FRAC_PI_4 + k as f64 * step)
            .collect();
        let values = thetas.iter().map(|&t| kind.eval(t)).collect();
        Ok(PdCurve {
            kind,
            thetas,
            values,
            k_pd: kind.k_pd(),
        })
    }

    pub fn normalized(&self) -> impl Iterator<Item = f64> + '_ {
        self.values.iter().map(move |v| v / self.k_pd)
    }

    pub fn max_abs_normalized(&self) -> f64 {
        self.normalized().fold(0.0, |m, v| m.max(v.abs()))
    }
}
