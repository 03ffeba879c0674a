//! C ABI over `costas-lab`.
//!
//! Every fallible function returns a [`CostasStatus`]; on failure the
//! message is available through [`costas_last_error_message`] on the same
//! thread. Loop circuits and trajectories are opaque handles that must be
//! released with their `_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use costas_lab::loop_model::{self, LoopParams, PhaseState, PiFilter, SimOptions, Trajectory};
use costas_lab::signal_sim::{self, LoopCircuit, LoopDesign, ModemConfig, SerProtocol};
use costas_lab::{lockin, pd_char, Error, PdKind};

/// Result codes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CostasStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidParameter = 2,
    NumericalBlowUp = 3,
    Singularity = 4,
    Bracket = 5,
    NotLocked = 6,
    LengthMismatch = 7,
    OutOfRange = 8,
    Panic = 9,
}

/// Phase detector kinds.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CostasPdKind {
    Classical = 0,
    FourthPower = 1,
    Folding = 2,
    SinusoidalRef = 3,
    SawtoothRef = 4,
    TriangularRef = 5,
}

impl From<CostasPdKind> for PdKind {
    fn from(k: CostasPdKind) -> Self {
        match k {
            CostasPdKind::Classical => PdKind::Classical,
            CostasPdKind::FourthPower => PdKind::FourthPower,
            CostasPdKind::Folding => PdKind::Folding,
            CostasPdKind::SinusoidalRef => PdKind::SinusoidalRef,
            CostasPdKind::SawtoothRef => PdKind::SawtoothRef,
            CostasPdKind::TriangularRef => PdKind::TriangularRef,
        }
    }
}

/// Folding lock-in regime: 1 = node case, 2 = critical, 3 = focus.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CostasRegime {
    Node = 1,
    Critical = 2,
    Focus = 3,
}

impl From<lockin::LockinRegime> for CostasRegime {
    fn from(r: lockin::LockinRegime) -> Self {
        match r {
            lockin::LockinRegime::NodeCase => CostasRegime::Node,
            lockin::LockinRegime::CriticalCase => CostasRegime::Critical,
            lockin::LockinRegime::FocusCase => CostasRegime::Focus,
        }
    }
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CostasStepOutput {
    pub i_val: f64,
    pub q_val: f64,
    pub control_g: f64,
    pub vco_phase: f64,
}

/// Mirrors the core modem configuration. `pulse_cutoff <= 0` disables pulse
/// smoothing.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CostasModemConfig {
    pub carrier_freq: f64,
    pub sample_rate: f64,
    pub symbol_rate: f64,
    pub lpf_cutoff: f64,
    pub noise_sigma: f64,
    pub seed: u64,
    pub pulse_cutoff: f64,
}

impl From<&CostasModemConfig> for ModemConfig {
    fn from(c: &CostasModemConfig) -> Self {
        ModemConfig {
            carrier_freq: c.carrier_freq,
            sample_rate: c.sample_rate,
            symbol_rate: c.symbol_rate,
            lpf_cutoff: c.lpf_cutoff,
            noise_sigma: c.noise_sigma,
            seed: c.seed,
            pulse_cutoff: (c.pulse_cutoff > 0.0).then_some(c.pulse_cutoff),
        }
    }
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CostasLoopDesign {
    pub k_vco: f64,
    pub tau1: f64,
    pub tau2: f64,
    pub freq_offset: f64,
}

impl From<&CostasLoopDesign> for LoopDesign {
    fn from(d: &CostasLoopDesign) -> Self {
        LoopDesign { k_vco: d.k_vco, tau1: d.tau1, tau2: d.tau2, freq_offset: d.freq_offset }
    }
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CostasSerPoint {
    pub snr_db: f64,
    pub symbols: u64,
    pub errors: u64,
    pub ser: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    /// 1 when the loop locked during warm-up.
    pub locked: u8,
}

/// Opaque waveform-level loop circuit.
pub struct CostasLoopCircuit {
    inner: LoopCircuit,
    dt: f64,
}

/// Opaque phase-model trajectory.
pub struct CostasTrajectory {
    inner: Trajectory,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(err: &Error) -> CostasStatus {
    match err {
        Error::InvalidParameter(_) => CostasStatus::InvalidParameter,
        Error::NumericalBlowUp { .. } => CostasStatus::NumericalBlowUp,
        Error::Singularity(_) => CostasStatus::Singularity,
        Error::Bracket(_) => CostasStatus::Bracket,
        Error::NotLocked => CostasStatus::NotLocked,
        Error::LengthMismatch(_) => CostasStatus::LengthMismatch,
    }
}

fn guard(f: impl FnOnce() -> Result<(), CostasStatus>) -> CostasStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => CostasStatus::Ok,
        Ok(Err(s)) => s,
        Err(_) => {
            set_error("internal panic".into());
            CostasStatus::Panic
        }
    }
}

trait IntoStatus<T> {
    fn st(self) -> Result<T, CostasStatus>;
}

impl<T> IntoStatus<T> for costas_lab::Result<T> {
    fn st(self) -> Result<T, CostasStatus> {
        self.map_err(|e| {
            set_error(e.to_string());
            status_of(&e)
        })
    }
}

fn out<'a, T>(p: *mut T) -> Result<&'a mut T, CostasStatus> {
    // SAFETY: callers pass either null or a pointer valid for writes of T.
    unsafe { p.as_mut() }.ok_or_else(|| {
        set_error("null output pointer".into());
        CostasStatus::NullPointer
    })
}

fn input<'a, T>(p: *const T) -> Result<&'a T, CostasStatus> {
    // SAFETY: callers pass either null or a pointer valid for reads of T.
    unsafe { p.as_ref() }.ok_or_else(|| {
        set_error("null input pointer".into());
        CostasStatus::NullPointer
    })
}

/// Copy the last error message of this thread into `buf` (NUL-terminated,
/// truncated to `len`). Returns the full message length without the NUL,
/// or 0 when there is none.
///
/// # Safety
/// `buf` must be null or valid for `len` bytes of writes.
#[no_mangle]
pub unsafe extern "C" fn costas_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let e = e.borrow();
        let Some(msg) = e.as_ref() else {
            return 0;
        };
        let bytes = msg.as_bytes();
        if !buf.is_null() && len > 0 {
            let n = bytes.len().min(len - 1);
            // SAFETY: buf is valid for len bytes and n < len.
            unsafe {
                ptr::copy_nonoverlapping(bytes.as_ptr().cast::<c_char>(), buf, n);
                *buf.add(n) = 0;
            }
        }
        bytes.len()
    })
}

/// Detector gain `K_pd` of a kind (1 for the reference shapes).
#[no_mangle]
pub extern "C" fn costas_pd_gain(kind: CostasPdKind) -> f64 {
    PdKind::from(kind).k_pd()
}

/// Evaluate a detector characteristic `K_pd·φ(θe)`.
///
/// # Safety
/// `value` must be null or valid for writes.
#[no_mangle]
pub unsafe extern "C" fn costas_pd_eval(kind: CostasPdKind, theta_e: f64, value: *mut f64) -> CostasStatus {
    guard(|| {
        let v = out(value)?;
        if !theta_e.is_finite() {
            set_error(format!("theta_e must be finite, got {theta_e}"));
            return Err(CostasStatus::InvalidParameter);
        }
        *v = PdKind::from(kind).eval(theta_e);
        Ok(())
    })
}

/// Maximum normalized deviation between two characteristics on an
/// `n_samples` grid over one period.
///
/// # Safety
/// `value` must be null or valid for writes.
#[no_mangle]
pub unsafe extern "C" fn costas_pd_max_deviation(
    a: CostasPdKind,
    b: CostasPdKind,
    n_samples: usize,
    value: *mut f64,
) -> CostasStatus {
    guard(|| {
        let v = out(value)?;
        *v = pd_char::max_deviation(a.into(), b.into(), n_samples).st()?;
        Ok(())
    })
}

/// Stable lock point of a detector inside `[−π/4, π/4)`.
#[no_mangle]
pub extern "C" fn costas_pd_stable_zero(kind: CostasPdKind) -> f64 {
    pd_char::find_stable_zero(kind.into())
}

/// Closed-form lock-in range of the classical loop.
///
/// # Safety
/// `omega_l` must be null or valid for writes.
#[no_mangle]
pub unsafe extern "C" fn costas_lockin_classical(k_vco: f64, tau1: f64, tau2: f64, omega_l: *mut f64) -> CostasStatus {
    guard(|| {
        let v = out(omega_l)?;
        *v = lockin::lockin_classical(k_vco, tau1, tau2).st()?;
        Ok(())
    })
}

/// Closed-form lock-in range of the folding loop and its regime.
///
/// # Safety
/// `omega_l` and `regime` must be null or valid for writes.
#[no_mangle]
pub unsafe extern "C" fn costas_lockin_folding(
    k_vco: f64,
    k_pd: f64,
    tau1: f64,
    tau2: f64,
    omega_l: *mut f64,
    regime: *mut CostasRegime,
) -> CostasStatus {
    guard(|| {
        let v = out(omega_l)?;
        let r = out(regime)?;
        let (w, reg) = lockin::lockin_folding(k_vco, k_pd, tau1, tau2).st()?;
        *v = w;
        *r = reg.into();
        Ok(())
    })
}

/// Cycle-slip bisection estimate of the lock-in range.
///
/// # Safety
/// `omega_l` must be null or valid for writes.
#[no_mangle]
pub unsafe extern "C" fn costas_lockin_numeric(
    kind: CostasPdKind,
    k_vco: f64,
    tau1: f64,
    tau2: f64,
    tolerance: f64,
    omega_l: *mut f64,
) -> CostasStatus {
    guard(|| {
        let v = out(omega_l)?;
        let params = lockin::params_for(kind.into(), k_vco, tau1, tau2).st()?;
        *v = lockin::lockin_numeric(&params, tolerance).st()?;
        Ok(())
    })
}

/// Integrate the phase model after a frequency step of `offset` rad/s.
///
/// # Safety
/// `handle` must be null or valid for writes. The returned handle must be
/// released with [`costas_trajectory_free`].
#[no_mangle]
#[allow(clippy::too_many_arguments)]
pub unsafe extern "C" fn costas_simulate(
    kind: CostasPdKind,
    k_vco: f64,
    offset: f64,
    tau1: f64,
    tau2: f64,
    theta0: f64,
    x0: f64,
    dt: f64,
    t_end: f64,
    record_every: usize,
    handle: *mut *mut CostasTrajectory,
) -> CostasStatus {
    guard(|| {
        let h = out(handle)?;
        let filter = PiFilter::new(tau1, tau2).st()?;
        let params = LoopParams::with_offset(kind.into(), k_vco, offset, filter).st()?;
        let opts = SimOptions { record_every, ..SimOptions::new(dt, t_end) };
        let tr = loop_model::simulate(&params, PhaseState::new(theta0, x0), &opts).st()?;
        *h = Box::into_raw(Box::new(CostasTrajectory { inner: tr }));
        Ok(())
    })
}

/// Number of recorded samples (0 for a null handle).
///
/// # Safety
/// `handle` must be null or a live trajectory handle.
#[no_mangle]
pub unsafe extern "C" fn costas_trajectory_len(handle: *const CostasTrajectory) -> usize {
    // SAFETY: per contract.
    unsafe { handle.as_ref() }.map_or(0, |t| t.inner.samples.len())
}

/// Read sample `index` of a trajectory.
///
/// # Safety
/// `handle` must be null or live; output pointers null or valid for writes.
#[no_mangle]
pub unsafe extern "C" fn costas_trajectory_get(
    handle: *const CostasTrajectory,
    index: usize,
    t: *mut f64,
    theta_e: *mut f64,
    x: *mut f64,
) -> CostasStatus {
    guard(|| {
        let tr = input(handle)?;
        let s = tr.inner.samples.get(index).ok_or_else(|| {
            set_error(format!("index {index} out of range ({} samples)", tr.inner.samples.len()));
            CostasStatus::OutOfRange
        })?;
        *out(t)? = s.t;
        *out(theta_e)? = s.theta_e;
        *out(x)? = s.x;
        Ok(())
    })
}

/// Lock/slip flags and the net number of slipped periods.
///
/// # Safety
/// `handle` must be null or live; output pointers null or valid for writes.
#[no_mangle]
pub unsafe extern "C" fn costas_trajectory_status(
    handle: *const CostasTrajectory,
    locked: *mut u8,
    slipped: *mut u8,
    periods_slipped: *mut i64,
) -> CostasStatus {
    guard(|| {
        let tr = &input(handle)?.inner;
        *out(locked)? = tr.locked as u8;
        *out(slipped)? = tr.slipped as u8;
        *out(periods_slipped)? = tr.periods_slipped;
        Ok(())
    })
}

/// # Safety
/// `handle` must be null or a handle from [`costas_simulate`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn costas_trajectory_free(handle: *mut CostasTrajectory) {
    if !handle.is_null() {
        // SAFETY: created by Box::into_raw in costas_simulate.
        drop(unsafe { Box::from_raw(handle) });
    }
}

/// Create a waveform loop circuit. `omega_ref` is the carrier, `omega_free`
/// the VCO free-running frequency, `dt` the sample period.
///
/// # Safety
/// `handle` must be null or valid for writes. Release the result with
/// [`costas_circuit_free`].
#[no_mangle]
#[allow(clippy::too_many_arguments)]
pub unsafe extern "C" fn costas_circuit_new(
    kind: CostasPdKind,
    k_vco: f64,
    omega_ref: f64,
    omega_free: f64,
    tau1: f64,
    tau2: f64,
    lpf_cutoff: f64,
    dt: f64,
    handle: *mut *mut CostasLoopCircuit,
) -> CostasStatus {
    guard(|| {
        let h = out(handle)?;
        let filter = PiFilter::new(tau1, tau2).st()?;
        let params = LoopParams::new(kind.into(), k_vco, omega_ref, omega_free, filter).st()?;
        let inner = LoopCircuit::new(params, lpf_cutoff, dt).st()?;
        *h = Box::into_raw(Box::new(CostasLoopCircuit { inner, dt }));
        Ok(())
    })
}

/// Feed one input sample.
///
/// # Safety
/// `handle` must be a live circuit; `result` null or valid for writes.
#[no_mangle]
pub unsafe extern "C" fn costas_circuit_step(
    handle: *mut CostasLoopCircuit,
    sample: f64,
    result: *mut CostasStepOutput,
) -> CostasStatus {
    guard(|| {
        let c = out(handle)?;
        let r = out(result)?;
        let o = c.inner.step(sample, c.dt).st()?;
        *r = CostasStepOutput { i_val: o.i_val, q_val: o.q_val, control_g: o.control_g, vco_phase: o.vco_phase };
        Ok(())
    })
}

/// # Safety
/// `handle` must be null or a handle from [`costas_circuit_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn costas_circuit_free(handle: *mut CostasLoopCircuit) {
    if !handle.is_null() {
        // SAFETY: created by Box::into_raw in costas_circuit_new.
        drop(unsafe { Box::from_raw(handle) });
    }
}

/// Fill `buf` with `len` input samples for `symbols` (values 1, 3, 5, 7);
/// `len` must equal `n_symbols × sample_rate / symbol_rate`.
///
/// # Safety
/// `config` and `symbols` must be valid for reads, `buf` for `len` writes.
#[no_mangle]
pub unsafe extern "C" fn costas_generate_qpsk(
    config: *const CostasModemConfig,
    symbols: *const u8,
    n_symbols: usize,
    buf: *mut f64,
    len: usize,
) -> CostasStatus {
    guard(|| {
        let cfg = ModemConfig::from(input(config)?);
        if symbols.is_null() || buf.is_null() {
            set_error("null buffer".into());
            return Err(CostasStatus::NullPointer);
        }
        // SAFETY: per contract.
        let syms = unsafe { std::slice::from_raw_parts(symbols, n_symbols) };
        let w = signal_sim::generate_qpsk(&cfg, syms).st()?;
        if w.len() != len {
            set_error(format!("buffer holds {len} samples, waveform has {}", w.len()));
            return Err(CostasStatus::LengthMismatch);
        }
        // SAFETY: per contract.
        unsafe { std::slice::from_raw_parts_mut(buf, len) }.copy_from_slice(&w);
        Ok(())
    })
}

/// Monte-Carlo SER of one circuit at one SNR.
///
/// # Safety
/// `config` and `design` must be valid for reads, `result` for writes.
#[no_mangle]
pub unsafe extern "C" fn costas_measure_ser(
    kind: CostasPdKind,
    config: *const CostasModemConfig,
    design: *const CostasLoopDesign,
    warmup_symbols: usize,
    snr_db: f64,
    n_symbols: usize,
    result: *mut CostasSerPoint,
) -> CostasStatus {
    guard(|| {
        let cfg = ModemConfig::from(input(config)?);
        let d = LoopDesign::from(input(design)?);
        let r = out(result)?;
        let p = signal_sim::measure_ser(kind.into(), &cfg, &d, &SerProtocol { warmup_symbols }, snr_db, n_symbols)
            .st()?;
        *r = CostasSerPoint {
            snr_db: p.snr_db,
            symbols: p.symbols,
            errors: p.errors,
            ser: p.ser,
            ci_low: p.ci95.0,
            ci_high: p.ci95.1,
            locked: p.locked as u8,
        };
        Ok(())
    })
}
