use std::f64::consts::FRAC_PI_4;

use costas_lab::pd_char::{find_stable_zero, PD_PERIOD};
use costas_lab::signal_sim::{self, LoopCircuit, LoopDesign, ModemConfig, QpskSource, SerProtocol};
use costas_lab::PdKind;
use proptest::prelude::*;

fn modem(seed: u64) -> ModemConfig {
    ModemConfig::new(10_000.0, 20, 10, seed).unwrap()
}

fn design(offset: f64) -> LoopDesign {
    LoopDesign { k_vco: 500.0, tau1: 0.05, tau2: 0.02, freq_offset: offset }
}

#[test]
fn noise_free_power_is_one() {
    let cfg = modem(1);
    let w = signal_sim::generate_qpsk(&cfg, &signal_sim::random_symbols(1000, 1)).unwrap();
    let p = w.iter().map(|s| s * s).sum::<f64>() / w.len() as f64;
    assert!((p - 1.0).abs() < 1e-3, "{p}");
}

#[test]
fn noise_has_requested_variance() {
    let mut cfg = modem(2);
    cfg.noise_sigma = 0.5;
    let syms = signal_sim::random_symbols(500, 2);
    let clean = signal_sim::generate_qpsk(&modem(2), &syms).unwrap();
    let noisy = signal_sim::generate_qpsk(&cfg, &syms).unwrap();
    let n = clean.len() as f64;
    let var = clean.iter().zip(&noisy).map(|(a, b)| (b - a).powi(2)).sum::<f64>() / n;
    assert!((var - 0.25).abs() < 0.01, "{var}");
}

/// Run a circuit and return, for the symbol starting at `symbol`, the
/// per-symbol average of I and Q plus the phase error at its midpoint.
fn averaged_branches(variant: PdKind, symbol: usize) -> (f64, f64, f64, u8) {
    let cfg = modem(3);
    let syms = signal_sim::random_symbols(symbol + 1, 3);
    let mut src = QpskSource::new(&cfg, &syms).unwrap();
    let mut c = LoopCircuit::for_modem(variant, &cfg, &design(4.0)).unwrap();
    let sps = cfg.samples_per_symbol();
    let (mut si, mut sq, mut th) = (0.0, 0.0, 0.0);
    for k in 0..src.len() {
        let r = src.ref_phase(k);
        let o = c.step(src.next().unwrap(), cfg.dt()).unwrap();
        if k / sps == symbol {
            // skip the LPF transient at the symbol edge
            if k % sps >= sps / 4 {
                si += o.i_val;
                sq += o.q_val;
            }
            if k % sps == sps / 2 {
                th = r - o.vco_phase;
            }
        }
    }
    let m = (sps - sps / 4) as f64;
    (si / m, sq / m, th, syms[symbol])
}

#[test]
fn averaged_branches_match_phase_model() {
    for v in PdKind::CIRCUITS {
        let (i, q, th, n) = averaged_branches(v, 400);
        let zero = find_stable_zero(v);
        let k = ((th - zero) / PD_PERIOD).round();
        let lock = zero + k * PD_PERIOD + n as f64 * FRAC_PI_4;
        assert!((i - lock.cos()).abs() < 0.05, "{v}: I {i} vs {}", lock.cos());
        assert!((q - lock.sin()).abs() < 0.05, "{v}: Q {q} vs {}", lock.sin());
    }
}

#[test]
fn steady_state_control_matches_offset() {
    let cfg = modem(4);
    let offset = 8.0;
    let rec = signal_sim::run_chain(PdKind::Classical, &cfg, &design(offset), &signal_sim::random_symbols(400, 4), 1).unwrap();
    let half = rec.control_g.len() / 2;
    let tail = &rec.control_g[half..];
    let mean = tail.iter().sum::<f64>() / tail.len() as f64;
    assert!((mean - offset / 500.0).abs() < 0.01 * offset / 500.0, "{mean}");
    // no residual beat: the phase error stops drifting
    let th = &rec.theta_e[half..];
    assert!((th[th.len() - 1] - th[0]).abs() < 0.02);
}

#[test]
fn classical_loop_demodulates_without_errors() {
    let cfg = modem(5);
    let syms = signal_sim::random_symbols(2000, 5);
    let w = signal_sim::generate_qpsk(&cfg, &syms).unwrap();
    let mut c = LoopCircuit::for_modem(PdKind::Classical, &cfg, &design(6.0)).unwrap();
    let phases: Vec<f64> = w.iter().map(|&s| c.step(s, cfg.dt()).unwrap().vco_phase).collect();
    let dec = signal_sim::demodulate(&cfg, &w, &phases, 0.0).unwrap();
    let rot = signal_sim::resolve_ambiguity(&dec[100..300], &syms[100..300]);
    let errors = dec[300..]
        .iter()
        .zip(&syms[300..])
        .filter(|(&d, &t)| signal_sim::derotate(d, rot) != t)
        .count();
    assert_eq!(errors, 0);
}

#[test]
fn high_snr_has_no_errors() {
    let cfg = modem(6);
    for v in PdKind::CIRCUITS {
        let p = signal_sim::measure_ser(v, &cfg, &design(5.0), &SerProtocol::default(), 30.0, 10_000).unwrap();
        assert_eq!(p.errors, 0, "{v}");
        assert!(p.locked);
    }
}

#[test]
fn ser_monotone_with_common_random_numbers() {
    let cfg = modem(7);
    let snrs = [0.0, 1.0, 2.0, 4.0];
    let pts = signal_sim::ser_sweep(&[PdKind::Classical], &cfg, &design(5.0), &SerProtocol::default(), &snrs, 5000).unwrap();
    assert!(pts[0].errors > 0);
    for w in pts.windows(2) {
        assert!(w[1].ser <= w[0].ser, "{} dB {} > {} dB {}", w[1].snr_db, w[1].ser, w[0].snr_db, w[0].ser);
    }
}

#[test]
fn repeated_ser_is_identical() {
    let cfg = modem(8);
    let run = || signal_sim::measure_ser(PdKind::Folding, &cfg, &design(2.0), &SerProtocol::default(), 12.0, 1000).unwrap();
    assert_eq!(run(), run());
}

#[test]
fn unlocked_points_are_flagged() {
    let cfg = modem(9);
    let p = signal_sim::measure_ser(PdKind::Folding, &cfg, &design(5.0), &SerProtocol::default(), 4.0, 1000).unwrap();
    assert!(!p.locked);
}

proptest! {
    #[test]
    fn folding_chains_agree(i in -2.0f64..2.0, q in -2.0f64..2.0) {
        let a = signal_sim::folding_chain_original(i, q);
        let b = signal_sim::folding_chain_simplified(i, q);
        prop_assert!((a - b).abs() <= 1e-12);
    }

    #[test]
    fn derotation_inverts_rotation(n in 0u8..4, k in 0u8..4) {
        let sym = 1 + 2 * n;
        let rotated = 1 + 2 * ((n + k) % 4);
        prop_assert_eq!(signal_sim::derotate(rotated, k), sym);
    }

    #[test]
    fn wilson_contains_estimate(errors in 0u64..500, extra in 0u64..5000) {
        let n = errors + extra + 1;
        let (lo, hi) = signal_sim::wilson_interval(errors, n);
        let p = errors as f64 / n as f64;
        prop_assert!(0.0 <= lo && lo <= p && p <= hi && hi <= 1.0);
    }
}
