//! Waveform-level simulation: QPSK generator, the three Costas circuits on
//! raw samples, an integrate-and-dump demodulator and SER Monte Carlo.
//!
//! The input carrier is `√2·sin(ω_ref·t + n·π/4)` with rectangular symbol
//! pulses. Each circuit mixes it with `√2·cos θ_vco` (giving `Q`) and
//! `√2·sin θ_vco` (giving `I`), low-pass filters both branches and feeds the
//! negated detector output into the PI loop filter, matching
//! [`crate::loop_model`].

use std::f64::consts::{FRAC_PI_4, SQRT_2};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::loop_model::{LoopParams, PiFilter};
use crate::pd_char::{
    classical_from_iq, decide_symbol, find_stable_zero, folding_from_iq, fourth_from_iq, sign,
    wrap_quarter, PdKind, K_PD_CLASSICAL, K_PD_FOLDING,
};

const SYMBOL_STREAM: u64 = 0;
const NOISE_STREAM: u64 = 1;

/// Carrier, sampling and noise settings of one run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModemConfig {
    /// Carrier `ω_ref`, rad/s.
    pub carrier_freq: f64,
    /// Samples per second.
    pub sample_rate: f64,
    /// Symbols per second.
    pub symbol_rate: f64,
    /// Front-end low-pass cutoff, rad/s.
    pub lpf_cutoff: f64,
    /// Per-sample Gaussian noise standard deviation.
    pub noise_sigma: f64,
    pub seed: u64,
    /// Optional first-order smoothing of the baseband symbol pulses, rad/s.
    #[serde(default)]
    pub pulse_cutoff: Option<f64>,
}

impl ModemConfig {
    /// Configuration with the default front-end cutoff (geometric mean of
    /// the symbol rate and the carrier, both in rad/s), noise off.
    pub fn new(carrier_hz: f64, samples_per_cycle: u32, cycles_per_symbol: u32, seed: u64) -> Result<Self> {
        let two_pi = std::f64::consts::TAU;
        let symbol_rate = carrier_hz / cycles_per_symbol as f64;
        let cfg = ModemConfig {
            carrier_freq: two_pi * carrier_hz,
            sample_rate: carrier_hz * samples_per_cycle as f64,
            symbol_rate,
            lpf_cutoff: two_pi * (symbol_rate * carrier_hz).sqrt(),
            noise_sigma: 0.0,
            seed,
            pulse_cutoff: None,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let two_pi = std::f64::consts::TAU;
        let bad = |m: String| Err(Error::InvalidParameter(m));
        for (name, v) in [
            ("carrier_freq", self.carrier_freq),
            ("sample_rate", self.sample_rate),
            ("symbol_rate", self.symbol_rate),
            ("lpf_cutoff", self.lpf_cutoff),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return bad(format!("{name} must be > 0, got {v}"));
            }
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return bad(format!("noise_sigma must be >= 0, got {}", self.noise_sigma));
        }
        let carrier_hz = self.carrier_freq / two_pi;
        if self.sample_rate < 20.0 * carrier_hz * (1.0 - 1e-12) {
            return bad(format!(
                "sample_rate {} gives fewer than 20 samples per carrier cycle",
                self.sample_rate
            ));
        }
        if self.symbol_rate * 5.0 > carrier_hz * (1.0 + 1e-12) {
            return bad(format!(
                "symbol_rate {} must be at most a fifth of the carrier frequency {carrier_hz} Hz",
                self.symbol_rate
            ));
        }
        if !(self.lpf_cutoff > two_pi * self.symbol_rate && self.lpf_cutoff < 2.0 * self.carrier_freq) {
            return bad(format!(
                "lpf_cutoff {} must lie strictly between 2π·symbol_rate and 2·carrier_freq",
                self.lpf_cutoff
            ));
        }
        let sps = self.sample_rate / self.symbol_rate;
        if (sps - sps.round()).abs() > 1e-9 * sps {
            return bad(format!("sample_rate/symbol_rate = {sps} must be an integer"));
        }
        if let Some(c) = self.pulse_cutoff {
            if !(c > 0.0 && c.is_finite()) {
                return bad(format!("pulse_cutoff must be > 0, got {c}"));
            }
        }
        Ok(())
    }

    pub fn samples_per_symbol(&self) -> usize {
        (self.sample_rate / self.symbol_rate).round() as usize
    }

    pub fn dt(&self) -> f64 {
        1.0 / self.sample_rate
    }

    /// Smoothing factor of the discrete first-order front-end LPF.
    pub fn lpf_alpha(&self) -> f64 {
        1.0 - (-self.lpf_cutoff * self.dt()).exp()
    }

    /// Per-sample noise standard deviation for a given SNR.
    ///
    /// SNR is signal power (1) over the complex noise power `E|n_I + j n_Q|²`
    /// at the outputs of the front-end LPFs, i.e. the noise inside the
    /// front-end bandwidth.
    pub fn sigma_for_snr_db(&self, snr_db: f64) -> f64 {
        let snr = 10f64.powf(snr_db / 10.0);
        let a = self.lpf_alpha();
        ((2.0 - a) / (2.0 * a * snr)).sqrt()
    }

    pub fn with_snr_db(mut self, snr_db: f64) -> Self {
        self.noise_sigma = self.sigma_for_snr_db(snr_db);
        self
    }
}

/// Loop gains shared by the waveform circuits.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LoopDesign {
    pub k_vco: f64,
    pub tau1: f64,
    pub tau2: f64,
    /// `ω_ref − ω_free`, rad/s.
    #[serde(default)]
    pub freq_offset: f64,
}

impl LoopDesign {
    pub fn loop_params(&self, variant: PdKind, config: &ModemConfig) -> Result<LoopParams> {
        LoopParams::new(
            variant,
            self.k_vco,
            config.carrier_freq,
            config.carrier_freq - self.freq_offset,
            PiFilter::new(self.tau1, self.tau2)?,
        )
    }
}

fn ensure_symbol(n: u8) -> Result<()> {
    if matches!(n, 1 | 3 | 5 | 7) {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("symbol {n} is not in {{1, 3, 5, 7}}")))
    }
}

/// Uniform random QPSK symbols from the seeded symbol stream.
pub fn random_symbols(n: usize, seed: u64) -> Vec<u8> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(SYMBOL_STREAM);
    (0..n).map(|_| 1 + 2 * rng.random_range(0..4u8)).collect()
}

/// Streaming QPSK sample source.
pub struct QpskSource<'a> {
    config: ModemConfig,
    symbols: &'a [u8],
    sps: usize,
    k: usize,
    noise: ChaCha8Rng,
    base: (f64, f64),
}

impl<'a> QpskSource<'a> {
    pub fn new(config: &ModemConfig, symbols: &'a [u8]) -> Result<Self> {
        config.validate()?;
        if symbols.is_empty() {
            return Err(Error::InvalidParameter("symbol stream is empty".into()));
        }
        symbols.iter().try_for_each(|&n| ensure_symbol(n))?;
        let mut noise = ChaCha8Rng::seed_from_u64(config.seed);
        noise.set_stream(NOISE_STREAM);
        let start = symbols[0] as f64 * FRAC_PI_4;
        Ok(QpskSource {
            config: *config,
            symbols,
            sps: config.samples_per_symbol(),
            k: 0,
            noise,
            base: (start.cos(), start.sin()),
        })
    }

    pub fn len(&self) -> usize {
        self.symbols.len() * self.sps
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    /// Reference carrier phase `ω_ref·t` at sample `k`.
    pub fn ref_phase(&self, k: usize) -> f64 {
        self.config.carrier_freq * (k as f64 / self.config.sample_rate)
    }
}

impl Iterator for QpskSource<'_> {
    type Item = f64;

    fn next(&mut self) -> Option<f64> {
        let k = self.k;
        let n = *self.symbols.get(k / self.sps)?;
        self.k += 1;
        let phase = n as f64 * FRAC_PI_4;
        let (c, s) = (phase.cos(), phase.sin());
        // baseband (cos, sin) of the symbol phase, optionally smoothed
        let (bc, bs) = match self.config.pulse_cutoff {
            Some(w) => {
                let a = 1.0 - (-w / self.config.sample_rate).exp();
                self.base.0 += a * (c - self.base.0);
                self.base.1 += a * (s - self.base.1);
                self.base
            }
            None => (c, s),
        };
        let (sc, cc) = self.ref_phase(k).sin_cos();
        let clean = SQRT_2 * (sc * bc + cc * bs);
        let w = if self.config.noise_sigma > 0.0 {
            let z: f64 = self.noise.sample(StandardNormal);
            self.config.noise_sigma * z
        } else {
            0.0
        };
        Some(clean + w)
    }
}

/// Full input waveform for a symbol stream.
pub fn generate_qpsk(config: &ModemConfig, symbols: &[u8]) -> Result<Vec<f64>> {
    Ok(QpskSource::new(config, symbols)?.collect())
}

/// Per-tick outputs of a loop circuit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOutput {
    pub i_val: f64,
    pub q_val: f64,
    pub control_g: f64,
    /// VCO phase used to mix this sample.
    pub vco_phase: f64,
}

/// One waveform-level Costas loop.
#[derive(Debug, Clone, PartialEq)]
pub struct LoopCircuit {
    pub variant: PdKind,
    pub lpf_i: f64,
    pub lpf_q: f64,
    /// PI filter state.
    pub loop_filter: f64,
    pub vco_phase: f64,
    pub params: LoopParams,
    lpf_alpha: f64,
}

impl LoopCircuit {
    pub fn new(params: LoopParams, lpf_cutoff: f64, dt: f64) -> Result<Self> {
        params.validate()?;
        if !params.pd.is_circuit() {
            return Err(Error::InvalidParameter(format!(
                "{} is a reference shape, not a loop circuit",
                params.pd
            )));
        }
        if !(lpf_cutoff > 0.0 && dt > 0.0) {
            return Err(Error::InvalidParameter("lpf_cutoff and dt must be > 0".into()));
        }
        Ok(LoopCircuit {
            variant: params.pd,
            lpf_i: 0.0,
            lpf_q: 0.0,
            loop_filter: 0.0,
            vco_phase: 0.0,
            params,
            lpf_alpha: 1.0 - (-lpf_cutoff * dt).exp(),
        })
    }

    pub fn for_modem(variant: PdKind, config: &ModemConfig, design: &LoopDesign) -> Result<Self> {
        config.validate()?;
        Self::new(design.loop_params(variant, config)?, config.lpf_cutoff, config.dt())
    }

    /// Detector output `K_pd·φ` formed from the filtered branches.
    pub fn detector(variant: PdKind, i_val: f64, q_val: f64) -> f64 {
        match variant {
            PdKind::Classical => K_PD_CLASSICAL * classical_from_iq(i_val, q_val),
            PdKind::FourthPower => fourth_from_iq(i_val, q_val),
            PdKind::Folding => folding_from_iq(i_val, q_val),
            other => unreachable!("{other} is not a circuit"),
        }
    }

    /// Advance one sample tick.
    pub fn step(&mut self, sample: f64, dt: f64) -> Result<StepOutput> {
        if !sample.is_finite() {
            return Err(Error::NumericalBlowUp {
                t: f64::NAN,
                what: format!("non-finite input sample {sample}"),
            });
        }
        let phase = self.vco_phase;
        let (s, c) = phase.sin_cos();
        self.lpf_q += self.lpf_alpha * (SQRT_2 * c * sample - self.lpf_q);
        self.lpf_i += self.lpf_alpha * (SQRT_2 * s * sample - self.lpf_i);

        let u = -Self::detector(self.variant, self.lpf_i, self.lpf_q);
        let f = &self.params.filter;
        let g = f.c() * self.loop_filter + f.h() * u;
        self.loop_filter += (f.a() * self.loop_filter + f.b() * u) * dt;
        self.vco_phase += (self.params.omega_free + self.params.k_vco * g) * dt;
        if !self.vco_phase.is_finite() || !self.loop_filter.is_finite() {
            return Err(Error::NumericalBlowUp {
                t: f64::NAN,
                what: "loop circuit state".into(),
            });
        }
        Ok(StepOutput {
            i_val: self.lpf_i,
            q_val: self.lpf_q,
            control_g: g,
            vco_phase: phase,
        })
    }
}

/// Folding detector as first drawn: the branch products `Q·sign I` and
/// `I·sign Q` pass through absolute-value blocks before the shift and
/// complex magnitude.
pub fn folding_chain_original(i_val: f64, q_val: f64) -> f64 {
    let re = (i_val * sign(q_val)).abs() - FRAC_PI_4.cos();
    let im = (q_val * sign(i_val)).abs() - FRAC_PI_4.sin();
    re.hypot(im) - K_PD_FOLDING
}

/// Simplified folding detector working on `|I|` and `|Q|` directly.
pub fn folding_chain_simplified(i_val: f64, q_val: f64) -> f64 {
    folding_from_iq(i_val, q_val)
}

/// Free function form of [`LoopCircuit::step`].
pub fn step_loop(circuit: &mut LoopCircuit, sample: f64, dt: f64) -> Result<StepOutput> {
    circuit.step(sample, dt)
}

/// Demodulator phase rotation that cancels the lock-point phase error.
pub fn rotation_compensation(variant: PdKind) -> f64 {
    find_stable_zero(variant)
}

/// Integrate-and-dump of `s·√2·sin(θ + ρ)` (I) and `s·√2·cos(θ + ρ)` (Q)
/// over each symbol interval.
pub fn integrate_and_dump(
    config: &ModemConfig,
    waveform: &[f64],
    vco_phase: &[f64],
    rho: f64,
) -> Result<Vec<(f64, f64)>> {
    config.validate()?;
    if waveform.len() != vco_phase.len() {
        return Err(Error::LengthMismatch(format!(
            "waveform has {} samples, phase series {}",
            waveform.len(),
            vco_phase.len()
        )));
    }
    let sps = config.samples_per_symbol();
    let dt = config.dt();
    Ok(waveform
        .chunks_exact(sps)
        .zip(vco_phase.chunks_exact(sps))
        .map(|(w, p)| {
            w.iter().zip(p).fold((0.0, 0.0), |(i, q), (&s, &th)| {
                let (sn, cs) = (th + rho).sin_cos();
                (i + SQRT_2 * s * sn * dt, q + SQRT_2 * s * cs * dt)
            })
        })
        .collect())
}

/// Symbol decisions from the recovered carrier phase.
pub fn demodulate(config: &ModemConfig, waveform: &[f64], vco_phase: &[f64], rho: f64) -> Result<Vec<u8>> {
    Ok(integrate_and_dump(config, waveform, vco_phase, rho)?
        .into_iter()
        .map(|(i, q)| decide_symbol(i, q))
        .collect())
}

fn symbol_index(n: u8) -> u8 {
    (n - 1) / 2
}

/// Rotate a decision by `k` quarter turns back.
pub fn derotate(decision: u8, k: u8) -> u8 {
    1 + 2 * ((symbol_index(decision) + 4 - k % 4) % 4)
}

/// Quarter-turn rotation `k` that best maps decisions onto known symbols.
pub fn resolve_ambiguity(decisions: &[u8], truth: &[u8]) -> u8 {
    (0..4u8)
        .max_by_key(|&k| {
            let hits = decisions
                .iter()
                .zip(truth)
                .filter(|(&d, &t)| derotate(d, k) == t)
                .count();
            // ties resolve to the smallest rotation
            (hits, std::cmp::Reverse(k))
        })
        .unwrap_or(0)
}

/// Recorded waveform run.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ChainRecord {
    pub t: Vec<f64>,
    pub input: Vec<f64>,
    pub i_val: Vec<f64>,
    pub q_val: Vec<f64>,
    pub control_g: Vec<f64>,
    pub vco_phase: Vec<f64>,
    /// `θ_ref − θ_vco`, unwrapped.
    pub theta_e: Vec<f64>,
}

/// Run one circuit over a symbol stream, keeping every `record_every`-th tick.
pub fn run_chain(
    variant: PdKind,
    config: &ModemConfig,
    design: &LoopDesign,
    symbols: &[u8],
    record_every: usize,
) -> Result<ChainRecord> {
    let mut src = QpskSource::new(config, symbols)?;
    let mut circuit = LoopCircuit::for_modem(variant, config, design)?;
    let dt = config.dt();
    let every = record_every.max(1);
    let mut rec = ChainRecord::default();
    for k in 0..src.len() {
        let ref_phase = src.ref_phase(k);
        let s = src.next().expect("source length");
        let out = circuit.step(s, dt)?;
        if k % every == 0 {
            rec.t.push(k as f64 * dt);
            rec.input.push(s);
            rec.i_val.push(out.i_val);
            rec.q_val.push(out.q_val);
            rec.control_g.push(out.control_g);
            rec.vco_phase.push(out.vco_phase);
            rec.theta_e.push(ref_phase - out.vco_phase);
        }
    }
    Ok(rec)
}

/// Wilson score interval at 95% confidence.
pub fn wilson_interval(errors: u64, trials: u64) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let z = 1.959_963_984_540_054;
    let n = trials as f64;
    let p = errors as f64 / n;
    let denom = 1.0 + z * z / n;
    let centre = (p + z * z / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z * z / (4.0 * n * n)).sqrt() / denom;
    let low = if errors == 0 { 0.0 } else { (centre - half).max(0.0) };
    let high = if errors >= trials { 1.0 } else { (centre + half).min(1.0) };
    (low, high)
}

/// One Monte-Carlo SER measurement.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SerPoint {
    pub variant: PdKind,
    pub snr_db: f64,
    /// Symbols counted (after warm-up).
    pub symbols: u64,
    pub errors: u64,
    pub ser: f64,
    pub ci95: (f64, f64),
    /// False when the loop did not lock during warm-up; such points are
    /// excluded from curves.
    pub locked: bool,
}

/// Monte-Carlo protocol settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SerProtocol {
    /// Acquisition symbols excluded from counting (at least 100).
    pub warmup_symbols: usize,
}

impl Default for SerProtocol {
    fn default() -> Self {
        SerProtocol { warmup_symbols: 300 }
    }
}

/// Residual phase error threshold of the warm-up lock check.
const WARMUP_LOCK_TOL: f64 = std::f64::consts::PI / 16.0;

/// Measure SER of one circuit at one SNR.
///
/// The symbol stream and the unit-variance noise sequence depend only on
/// `config.seed`, so points at different SNRs (and different variants) use
/// common random numbers.
pub fn measure_ser(
    variant: PdKind,
    config: &ModemConfig,
    design: &LoopDesign,
    protocol: &SerProtocol,
    snr_db: f64,
    n_symbols: usize,
) -> Result<SerPoint> {
    if n_symbols < 1000 {
        return Err(Error::InvalidParameter(format!(
            "n_symbols must be at least 1000, got {n_symbols}"
        )));
    }
    if protocol.warmup_symbols < 100 {
        return Err(Error::InvalidParameter(format!(
            "warm-up must be at least 100 symbols, got {}",
            protocol.warmup_symbols
        )));
    }
    // +∞ dB is accepted and means noise off
    if snr_db.is_nan() || snr_db == f64::NEG_INFINITY {
        return Err(Error::InvalidParameter(format!("snr_db must be a number or +inf, got {snr_db}")));
    }
    let cfg = config.with_snr_db(snr_db);
    let warmup = protocol.warmup_symbols;
    let total = warmup + n_symbols;
    let symbols = random_symbols(total, cfg.seed);
    let mut src = QpskSource::new(&cfg, &symbols)?;
    let mut circuit = LoopCircuit::for_modem(variant, &cfg, design)?;
    let rho = rotation_compensation(variant);
    let zero = find_stable_zero(variant);
    let sps = cfg.samples_per_symbol();
    let dt = cfg.dt();

    let mut decisions = Vec::with_capacity(total);
    let mut residuals = Vec::with_capacity(warmup);
    let mut k = 0usize;
    for _ in 0..total {
        let (mut i_acc, mut q_acc) = (0.0, 0.0);
        for _ in 0..sps {
            let ref_phase = src.ref_phase(k);
            let s = src.next().expect("source length");
            let out = circuit.step(s, dt)?;
            let (sn, cs) = (out.vco_phase + rho).sin_cos();
            i_acc += s * sn;
            q_acc += s * cs;
            k += 1;
            if decisions.len() < warmup && k.is_multiple_of(sps) {
                residuals.push(wrap_quarter(ref_phase - out.vco_phase - zero));
            }
        }
        decisions.push(decide_symbol(i_acc, q_acc));
    }

    // lock check over the last quarter of the warm-up
    let tail = &residuals[residuals.len() * 3 / 4..];
    let mean_abs = tail.iter().map(|r| r.abs()).sum::<f64>() / tail.len() as f64;
    let locked = mean_abs < WARMUP_LOCK_TOL;

    let half = warmup / 2;
    let rot = resolve_ambiguity(&decisions[half..warmup], &symbols[half..warmup]);
    let errors = decisions[warmup..]
        .iter()
        .zip(&symbols[warmup..])
        .filter(|(&d, &t)| derotate(d, rot) != t)
        .count() as u64;
    let n = n_symbols as u64;
    Ok(SerPoint {
        variant,
        snr_db,
        symbols: n,
        errors,
        ser: errors as f64 / n as f64,
        ci95: wilson_interval(errors, n),
        locked,
    })
}

/// SER for every (variant, SNR) pair, in input order. Points run in
/// parallel; each uses the same seed, so all share one symbol and noise
/// sequence.
pub fn ser_sweep(
    variants: &[PdKind],
    config: &ModemConfig,
    design: &LoopDesign,
    protocol: &SerProtocol,
    snrs_db: &[f64],
    n_symbols: usize,
) -> Result<Vec<SerPoint>> {
    let jobs: Vec<(PdKind, f64)> = variants
        .iter()
        .flat_map(|&v| snrs_db.iter().map(move |&s| (v, s)))
        .collect();
    jobs.par_iter()
        .map(|&(v, snr)| measure_ser(v, config, design, protocol, snr, n_symbols))
        .collect()
}
