//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any
//! criterion fails.

use std::f64::consts::{FRAC_PI_4, FRAC_PI_8, PI};
use std::process::Command;
use std::time::{Duration, Instant};

use costas_lab::lockin;
use costas_lab::loop_model::{self, PhaseState, SimOptions};
use costas_lab::pd_char::{self, PdCurve, PdKind, K_PD_CLASSICAL, K_PD_FOLDING, PD_PERIOD};
use costas_lab::signal_sim::{self, LoopDesign, ModemConfig, SerPoint, SerProtocol};

struct Outcome {
    pass: bool,
    detail: String,
}

fn verdict(id: u32, title: &str, limit: Duration, f: impl FnOnce() -> Outcome) -> bool {
    let t0 = Instant::now();
    let out = f();
    let elapsed = t0.elapsed();
    let in_time = elapsed <= limit;
    let pass = out.pass && in_time;
    let timing = if in_time {
        format!("{:.2} s", elapsed.as_secs_f64())
    } else {
        format!("{:.2} s, over the {:.0} s limit", elapsed.as_secs_f64(), limit.as_secs_f64())
    };
    println!(
        "criterion {id} {}: {title}: {} ({timing})",
        if pass { "PASS" } else { "FAIL" },
        out.detail
    );
    pass
}

fn c1() -> Outcome {
    let dc = pd_char::max_deviation(PdKind::Classical, PdKind::SawtoothRef, 100_000).unwrap();
    let df = pd_char::max_deviation(PdKind::Folding, PdKind::TriangularRef, 100_000).unwrap();
    Outcome {
        pass: dc <= 0.05 && df <= 0.03,
        detail: format!("classical vs sawtooth {dc:.6} (<= 0.05), folding vs triangular {df:.6} (<= 0.03)"),
    }
}

fn c2() -> Outcome {
    let grid_max = |k: PdKind| {
        let c = PdCurve::sample(k, 100_000).unwrap();
        c.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    };
    let mc = grid_max(PdKind::Classical);
    let mf = grid_max(PdKind::Folding);
    let want_f = (2.0 - 2f64.sqrt()).sqrt() / 2.0;
    Outcome {
        pass: (mc - 0.5).abs() <= 1e-6
            && (mf - want_f).abs() <= 1e-6
            && (K_PD_CLASSICAL - 0.5).abs() <= 1e-6
            && (K_PD_FOLDING - want_f).abs() <= 1e-6,
        detail: format!("grid max classical {mc:.9} (0.5), folding {mf:.9} ({want_f:.9})"),
    }
}

fn c3() -> Outcome {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2024);
    let mut worst = 0.0f64;
    for _ in 0..10_000 {
        let theta: f64 = rng.random_range(-PI..PI);
        let n = 1 + 2 * rng.random_range(0..4u8);
        let phase = theta + n as f64 * FRAC_PI_4;
        let (i, q) = (phase.cos(), phase.sin());
        let a = signal_sim::folding_chain_original(i, q);
        let b = signal_sim::folding_chain_simplified(i, q);
        worst = worst.max((a - b).abs());
    }
    Outcome {
        pass: worst <= 1e-12,
        detail: format!("max |original - simplified| = {worst:.3e} over 10^4 pairs"),
    }
}

fn c4_variant(variant: PdKind) -> (f64, f64) {
    let cfg = ModemConfig::new(100_000.0, 20, 100, 1).unwrap();
    let design = LoopDesign { k_vco: 500.0, tau1: 0.05, tau2: 0.02, freq_offset: 20.0 };
    let params = design.loop_params(variant, &cfg).unwrap();
    let t_start = 8.0 / params.settle_rate();
    let t_end = t_start + 0.2;
    let n_symbols = (t_end * cfg.symbol_rate).ceil() as usize;
    let symbols = signal_sim::random_symbols(n_symbols, 5);
    let every = 100;
    let rec = signal_sim::run_chain(variant, &cfg, &design, &symbols, every).unwrap();

    let ode_dt = every as f64 / cfg.sample_rate / 5.0;
    let tr = loop_model::integrate(&params, PhaseState::new(0.0, 0.0), ode_dt, t_end).unwrap();
    let mut worst = 0.0f64;
    for (k, &t) in rec.t.iter().enumerate() {
        if t < t_start {
            continue;
        }
        let idx = (t / ode_dt).round() as usize;
        let Some(s) = tr.samples.get(idx) else { break };
        worst = worst.max((rec.theta_e[k] - s.theta_e).abs());
    }
    (worst, t_start)
}

fn c4() -> Vec<(PdKind, f64, f64, Duration)> {
    PdKind::CIRCUITS
        .iter()
        .map(|&v| {
            let t0 = Instant::now();
            let (d, ts) = c4_variant(v);
            (v, d, ts, t0.elapsed())
        })
        .collect()
}

/// Lock-in of the linearized loop (sawtooth or triangular detector) under
/// the −ω → +ω step: the phase error starts at the lock point with rate 2ω
/// and must stay inside the linear region of half-width `w`.
fn linear_lockin_oracle(slope: f64, w: f64, k_vco: f64, tau1: f64, tau2: f64) -> f64 {
    let wn = (k_vco * slope / tau1).sqrt();
    let zeta = k_vco * slope * tau2 / tau1 / (2.0 * wn);
    let peak = if (zeta - 1.0).abs() < 1e-9 {
        (-1.0f64).exp()
    } else if zeta < 1.0 {
        let r = (1.0 - zeta * zeta).sqrt();
        (-(zeta / r) * (r / zeta).atan()).exp()
    } else {
        let r = (zeta * zeta - 1.0).sqrt();
        (-(zeta / r) * (r / zeta).atanh()).exp()
    };
    // max excursion = (2ω/ωn)·peak
    w * wn / (2.0 * peak)
}

const LOCKIN_SETS: [(f64, f64, f64); 4] = [(500.0, 0.05, 0.02), (100.0, 0.1, 0.05), (2000.0, 0.02, 0.005), (50.0, 1.0, 0.3)];

fn numeric(kind: PdKind, k: f64, t1: f64, t2: f64) -> f64 {
    let p = lockin::params_for(kind, k, t1, t2).unwrap();
    lockin::lockin_numeric(&p, 1e-3 * lockin::natural_scale(&p)).unwrap()
}

fn c5() -> Outcome {
    let mut lines = Vec::new();
    let mut ok = true;
    for &(k, t1, t2) in &LOCKIN_SETS {
        let formula = lockin::lockin_classical(k, t1, t2).unwrap();
        let num = numeric(PdKind::Classical, k, t1, t2);
        let rel = formula / num - 1.0;
        ok &= rel.abs() <= 0.10;
        let oracle = linear_lockin_oracle(4.0 * K_PD_CLASSICAL / PI, FRAC_PI_4, k, t1, t2);
        lines.push(format!(
            "  classical K={k} tau1={t1} tau2={t2}: formula {formula:.3}, numeric {num:.3} (rel {rel:+.3}), linear-model oracle {oracle:.3} (numeric rel {:+.3})",
            num / oracle - 1.0
        ));
    }
    for &(k, t1, t2) in &LOCKIN_SETS {
        let num = numeric(PdKind::Folding, k, t1, t2);
        let oracle = linear_lockin_oracle(8.0 * K_PD_FOLDING / PI, FRAC_PI_8, k, t1, t2);
        match lockin::lockin_folding(k, K_PD_FOLDING, t1, t2) {
            Ok((formula, regime)) => {
                let rel = formula / num - 1.0;
                ok &= rel.abs() <= 0.10;
                lines.push(format!(
                    "  folding K={k} tau1={t1} tau2={t2} regime {}: formula {formula:.3}, numeric {num:.3} (rel {rel:+.3}), linear-model oracle {oracle:.3} (numeric rel {:+.3})",
                    regime.label(),
                    num / oracle - 1.0
                ));
            }
            Err(e) => {
                ok = false;
                lines.push(format!("  folding K={k} tau1={t1} tau2={t2}: formula error {e}, numeric {num:.3}"));
            }
        }
    }
    let ks = [100.0, 200.0, 400.0, 800.0];
    let fourth: Vec<f64> = ks.iter().map(|&k| numeric(PdKind::FourthPower, k, 0.05, 0.02)).collect();
    let monotone = fourth.windows(2).all(|w| w[1] > w[0]);
    ok &= monotone;
    lines.push(format!("  fourth-power K={ks:?}: numeric {fourth:.3?}, monotone {monotone}"));
    Outcome {
        pass: ok,
        detail: format!("closed forms vs bisection within 10%, fourth-power sweep monotone\n{}", lines.join("\n")),
    }
}

fn c6() -> Outcome {
    let sets = [
        (PdKind::Classical, 500.0, 0.05, 0.02),
        (PdKind::Classical, 50.0, 1.0, 0.3),
        (PdKind::Folding, 500.0, 0.05, 0.02),
        (PdKind::Folding, 2000.0, 0.02, 0.005),
        (PdKind::FourthPower, 200.0, 0.05, 0.02),
    ];
    let mut ok = true;
    let mut lines = Vec::new();
    for (v, k, t1, t2) in sets {
        let p = lockin::params_for(v, k, t1, t2).unwrap();
        let wl = lockin::lockin_numeric(&p, 0.01 * lockin::natural_scale(&p)).unwrap();
        for mult in [2.0, 10.0] {
            let mut q = p;
            q.set_offset(mult * wl);
            let opts = SimOptions {
                dt: q.recommended_dt().min(0.01 * PD_PERIOD / (mult * wl)),
                t_end: 300.0,
                record_every: 0,
                stop_on_slip: false,
                stop_when_locked: Some(10),
            };
            let tr = loop_model::simulate(&q, PhaseState::new(0.0, 0.0), &opts).unwrap();
            ok &= tr.locked;
            lines.push(format!(
                "  {v} K={k} tau1={t1} tau2={t2} offset {mult}x{wl:.2}: locked {} at t={:.3} s after {} slips",
                tr.locked,
                tr.lock_time.unwrap_or(f64::NAN),
                tr.periods_slipped
            ));
        }
    }
    Outcome {
        pass: ok,
        detail: format!("locks from offsets up to 10x the numeric lock-in range\n{}", lines.join("\n")),
    }
}

fn ser_modem(seed: u64) -> (ModemConfig, LoopDesign) {
    let cfg = ModemConfig::new(10_000.0, 20, 10, seed).unwrap();
    let design = LoopDesign { k_vco: 500.0, tau1: 0.05, tau2: 0.02, freq_offset: 5.0 };
    (cfg, design)
}

fn c7() -> Outcome {
    let (cfg, design) = ser_modem(42);
    let snrs = [4.0, 6.0, 8.0, 10.0, 12.0];
    let variants = [PdKind::Classical, PdKind::Folding];
    let pts = signal_sim::ser_sweep(&variants, &cfg, &design, &SerProtocol::default(), &snrs, 100_000).unwrap();
    let (c, f): (Vec<&SerPoint>, Vec<&SerPoint>) = pts.iter().partition(|p| p.variant == PdKind::Classical);
    let mut ordered = true;
    let mut separated = false;
    let mut lines = Vec::new();
    for (pc, pf) in c.iter().zip(&f) {
        // an unlocked folding loop counts against the ordering
        ordered &= pf.locked && pf.ser <= pc.ser;
        separated |= pf.locked && pf.ci95.1 < pc.ci95.0;
        lines.push(format!(
            "  {:>4} dB: classical {:.5} [{:.5}, {:.5}] locked {}; folding {:.5} [{:.5}, {:.5}] locked {}",
            pc.snr_db, pc.ser, pc.ci95.0, pc.ci95.1, pc.locked, pf.ser, pf.ci95.0, pf.ci95.1, pf.locked
        ));
    }
    Outcome {
        pass: ordered && separated,
        detail: format!(
            "SER(folding) <= SER(classical) at every point: {ordered}, non-overlapping interval somewhere: {separated}\n{}",
            lines.join("\n")
        ),
    }
}

fn c8() -> Vec<(PdKind, SerPoint, Duration)> {
    let (cfg, design) = ser_modem(8);
    PdKind::CIRCUITS
        .iter()
        .map(|&v| {
            let t0 = Instant::now();
            let p = signal_sim::measure_ser(v, &cfg, &design, &SerProtocol::default(), f64::INFINITY, 10_000).unwrap();
            (v, p, t0.elapsed())
        })
        .collect()
}

fn c9() -> Outcome {
    // RK4 order on the smooth fourth-power model
    let p = loop_model::LoopParams::with_offset(
        PdKind::FourthPower,
        500.0,
        30.0,
        loop_model::PiFilter::new(0.05, 0.02).unwrap(),
    )
    .unwrap();
    let end = |dt: f64| {
        loop_model::integrate(&p, PhaseState::new(0.3, 0.0), dt, 0.05).unwrap().final_state
    };
    let reference = end(1e-6);
    let err = |dt: f64| {
        let s = end(dt);
        (s.theta_e - reference.theta_e).abs() + (s.x - reference.x).abs()
    };
    let (e1, e2) = (err(4e-4), err(2e-4));
    let ratio = e1 / e2;

    // seeded runs through the binary
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = dir.path().join("ser.toml");
    std::fs::write(
        &cfg_path,
        "seed = 11\n[ser]\nsnr_db = [2.0, 6.0]\nsymbols = 1000\nwarmup_symbols = 200\n[loop]\nk_vco = 500.0\ntau1 = 0.05\ntau2 = 0.02\nfreq_offset = 5.0\n",
    )
    .unwrap();
    let run = |name: &str| {
        let out = dir.path().join(name);
        let st = Command::new(env!("CARGO_BIN_EXE_costas-lab"))
            .args(["ser", "--config"])
            .arg(&cfg_path)
            .arg("--out")
            .arg(&out)
            .status()
            .unwrap();
        assert!(st.success());
        std::fs::read(out).unwrap()
    };
    let (a, b) = (run("a.csv"), run("b.csv"));
    let identical = a == b && !a.is_empty();
    Outcome {
        pass: ratio >= 12.0 && identical,
        detail: format!("RK4 error ratio {ratio:.2} (>= 12), repeated seeded SER runs byte-identical: {identical}"),
    }
}

fn main() {
    let mut all = true;
    all &= verdict(1, "PD deviation bounds", Duration::from_secs(1), c1);
    all &= verdict(2, "PD amplitude constants", Duration::from_secs(1), c2);
    all &= verdict(3, "folding chain equivalence", Duration::from_secs(60), c3);

    let t0 = Instant::now();
    let fid = c4();
    let total = t0.elapsed();
    let ok4 = fid.iter().all(|(_, d, _, t)| *d <= 0.05 && *t <= Duration::from_secs(30));
    let parts: Vec<String> = fid
        .iter()
        .map(|(v, d, ts, t)| format!("{v} max |dtheta| {d:.4} rad after t={ts:.3} s in {:.2} s", t.as_secs_f64()))
        .collect();
    all &= verdict(4, "phase-model fidelity", Duration::from_secs(90).max(total), || Outcome {
        pass: ok4,
        detail: format!("waveform vs ODE within 0.05 rad, <= 30 s per variant: {}", parts.join("; ")),
    });

    all &= verdict(5, "lock-in cross-validation", Duration::from_secs(300), c5);
    all &= verdict(6, "pull-in", Duration::from_secs(120), c6);
    all &= verdict(7, "SER ordering", Duration::from_secs(600), c7);

    let t0 = Instant::now();
    let e2e = c8();
    let total = t0.elapsed();
    let ok8 = e2e.iter().all(|(_, p, t)| p.errors == 0 && p.locked && *t <= Duration::from_secs(60));
    let parts: Vec<String> = e2e
        .iter()
        .map(|(v, p, t)| format!("{v} {} errors / {} (locked {}) in {:.2} s", p.errors, p.symbols, p.locked, t.as_secs_f64()))
        .collect();
    all &= verdict(8, "noise-free end-to-end", Duration::from_secs(180).max(total), || Outcome {
        pass: ok8,
        detail: parts.join("; "),
    });

    all &= verdict(9, "numerical hygiene", Duration::from_secs(120), c9);

    if !all {
        println!("acceptance: some criteria FAILED");
        std::process::exit(1);
    }
    println!("acceptance: all criteria PASS");
}
