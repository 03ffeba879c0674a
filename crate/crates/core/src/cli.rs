//! Command-line front end: config loading, experiment runs, CSV output and
//! optional SVG plots.
//!
//! Exit codes: 0 ok (or locked), 1 other failure, 2 cycle slip, 3 numerical
//! abort, 4 configuration error.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::lockin::{self, LockinRegime};
use crate::loop_model::{self, LoopParams, PhaseState, PiFilter, SimOptions};
use crate::pd_char::{self, find_stable_zero, PdCurve, PdKind, PD_PERIOD};
use crate::signal_sim::{self, LoopDesign, ModemConfig, SerPoint, SerProtocol};

pub mod plot;

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_SLIP: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;
pub const EXIT_CONFIG: i32 = 4;

/// Grid used for the deviation report next to a PD curve.
const REPORT_GRID: usize = 100_000;

#[derive(Debug, Parser)]
#[command(name = "costas-lab", version, about = "QPSK Costas loop simulation and analysis")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sample a phase detector characteristic over one period.
    PdCurve(CommonArgs),
    /// Integrate the phase model (or run the waveform circuit) after a frequency step.
    Simulate(CommonArgs),
    /// Closed-form and numeric lock-in ranges over a parameter sweep.
    Lockin(CommonArgs),
    /// Monte-Carlo symbol error rate sweep.
    Ser(CommonArgs),
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::PdCurve(_) => "pd-curve",
            Command::Simulate(_) => "simulate",
            Command::Lockin(_) => "lockin",
            Command::Ser(_) => "ser",
        }
    }

    fn args(&self) -> &CommonArgs {
        match self {
            Command::PdCurve(a) | Command::Simulate(a) | Command::Lockin(a) | Command::Ser(a) => a,
        }
    }
}

#[derive(Debug, Clone, Default, Args)]
pub struct CommonArgs {
    /// classical, fourth-power, folding (or a reference shape for pd-curve)
    #[arg(long)]
    pub variant: Option<PdKind>,
    /// TOML experiment file
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output CSV path (stdout when omitted)
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Curve points for pd-curve, symbols per point for ser
    #[arg(long)]
    pub samples: Option<usize>,
    /// Also write an SVG plot next to the CSV
    #[arg(long)]
    pub plot: bool,
}

/// Bad or inconsistent configuration.
#[derive(Debug, thiserror::Error)]
#[error("{0}")]
pub struct ConfigError(pub String);

/// Declarative description of one run.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Optional guard: must match the subcommand when given.
    pub command: Option<String>,
    pub variant: Option<PdKind>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    #[serde(rename = "loop")]
    pub loop_design: Option<LoopDesign>,
    pub modem: Option<ModemSection>,
    pub pd_curve: Option<PdCurveSection>,
    pub simulate: Option<SimulateSection>,
    pub lockin: Option<LockinSection>,
    pub ser: Option<SerSection>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModemSection {
    #[serde(default = "default_carrier_hz")]
    pub carrier_hz: f64,
    #[serde(default = "default_samples_per_cycle")]
    pub samples_per_cycle: u32,
    #[serde(default = "default_cycles_per_symbol")]
    pub cycles_per_symbol: u32,
    /// rad/s; defaults to the geometric mean of symbol rate and carrier
    pub lpf_cutoff: Option<f64>,
    pub pulse_cutoff: Option<f64>,
}

impl Default for ModemSection {
    fn default() -> Self {
        ModemSection {
            carrier_hz: default_carrier_hz(),
            samples_per_cycle: default_samples_per_cycle(),
            cycles_per_symbol: default_cycles_per_symbol(),
            lpf_cutoff: None,
            pulse_cutoff: None,
        }
    }
}

fn default_carrier_hz() -> f64 {
    10_000.0
}
fn default_samples_per_cycle() -> u32 {
    20
}
fn default_cycles_per_symbol() -> u32 {
    10
}

impl ModemSection {
    pub fn build(&self, seed: u64) -> crate::Result<ModemConfig> {
        let mut cfg = ModemConfig::new(self.carrier_hz, self.samples_per_cycle, self.cycles_per_symbol, seed)?;
        if let Some(c) = self.lpf_cutoff {
            cfg.lpf_cutoff = c;
        }
        cfg.pulse_cutoff = self.pulse_cutoff;
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PdCurveSection {
    pub samples: Option<usize>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SimLevel {
    #[default]
    Phase,
    Waveform,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateSection {
    #[serde(default)]
    pub level: SimLevel,
    #[serde(default = "default_t_end")]
    pub t_end: f64,
    /// phase level only; defaults to the model's recommended step
    pub dt: Option<f64>,
    pub record_every: Option<usize>,
    #[serde(default)]
    pub initial_theta: f64,
    #[serde(default)]
    pub initial_x: f64,
}

fn default_t_end() -> f64 {
    1.0
}

impl Default for SimulateSection {
    fn default() -> Self {
        SimulateSection {
            level: SimLevel::Phase,
            t_end: default_t_end(),
            dt: None,
            record_every: None,
            initial_theta: 0.0,
            initial_x: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParameter {
    KVco,
    Tau1,
    Tau2,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LockinSection {
    pub parameter: SweepParameter,
    pub values: Vec<f64>,
    /// Bisection tolerance as a fraction of `√(4·K_vco·K_pd/τ1)`.
    #[serde(default = "default_relative_tolerance")]
    pub relative_tolerance: f64,
}

fn default_relative_tolerance() -> f64 {
    1e-3
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SerSection {
    pub snr_db: Vec<f64>,
    #[serde(default = "default_ser_symbols")]
    pub symbols: usize,
    #[serde(default = "default_warmup")]
    pub warmup_symbols: usize,
    pub variants: Option<Vec<PdKind>>,
}

fn default_ser_symbols() -> usize {
    100_000
}
fn default_warmup() -> usize {
    SerProtocol::default().warmup_symbols
}

impl Default for SerSection {
    fn default() -> Self {
        SerSection {
            snr_db: vec![4.0, 6.0, 8.0, 10.0, 12.0],
            symbols: default_ser_symbols(),
            warmup_symbols: default_warmup(),
            variants: None,
        }
    }
}

pub fn default_loop_design() -> LoopDesign {
    LoopDesign { k_vco: 500.0, tau1: 0.05, tau2: 0.02, freq_offset: 0.0 }
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError(format!("invalid config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| ConfigError(format!("{}: {}", path.display(), e.0)))
    }

    fn loop_design(&self) -> LoopDesign {
        self.loop_design.unwrap_or_else(default_loop_design)
    }
}

/// Effective settings after applying command-line overrides.
struct Ctx {
    cfg: ExperimentConfig,
    variant: Option<PdKind>,
    seed: u64,
    out: Option<PathBuf>,
    samples: Option<usize>,
    plot: bool,
}

impl Ctx {
    fn new(command: &Command) -> anyhow::Result<Self> {
        let args = command.args();
        let cfg = match &args.config {
            Some(p) => ExperimentConfig::load(p)?,
            None => ExperimentConfig::default(),
        };
        if let Some(c) = &cfg.command {
            if c != command.name() {
                return Err(ConfigError(format!(
                    "config is for `{c}` but the `{}` subcommand was run",
                    command.name()
                ))
                .into());
            }
        }
        let out = args.out.clone().or_else(|| cfg.out.clone());
        if args.plot && out.is_none() {
            return Err(ConfigError("--plot needs an output path (--out)".into()).into());
        }
        Ok(Ctx {
            variant: args.variant.or(cfg.variant),
            seed: args.seed.or(cfg.seed).unwrap_or(0),
            samples: args.samples,
            plot: args.plot,
            out,
            cfg,
        })
    }

    fn circuit_variant(&self) -> anyhow::Result<PdKind> {
        let v = self.variant.unwrap_or(PdKind::Classical);
        if !v.is_circuit() {
            return Err(ConfigError(format!("{v} is a reference shape, not a loop variant")).into());
        }
        Ok(v)
    }

    fn modem(&self) -> anyhow::Result<ModemConfig> {
        let section = self.cfg.modem.clone().unwrap_or_default();
        Ok(section.build(self.seed)?)
    }

    fn plot_path(&self) -> Option<PathBuf> {
        if self.plot {
            self.out.as_ref().map(|p| p.with_extension("svg"))
        } else {
            None
        }
    }
}

fn open_output(path: Option<&Path>) -> anyhow::Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("cannot write {}", p.display()))?,
        )),
        None => Box::new(io::stdout().lock()),
    })
}

fn write_rows<T: Serialize>(path: Option<&Path>, rows: &[T]) -> anyhow::Result<()> {
    let mut w = csv::Writer::from_writer(open_output(path)?);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Serialize, Deserialize, PartialEq)]
pub struct PdCurveRow {
    pub theta_e: f64,
    pub value: f64,
    pub normalized_value: f64,
}

#[derive(Debug, Serialize, Deserialize, PartialEq)]
pub struct DeviationRow {
    pub variant: String,
    pub reference: String,
    pub max_deviation: f64,
    pub grid_points: usize,
}

#[derive(Debug, Serialize, Deserialize, PartialEq)]
pub struct TrajectoryRow {
    pub t: f64,
    pub theta_e: f64,
    pub x: f64,
    pub g: f64,
}

#[derive(Debug, Serialize, Deserialize, PartialEq)]
pub struct WaveformRow {
    pub t: f64,
    pub input: f64,
    #[serde(rename = "I")]
    pub i_val: f64,
    #[serde(rename = "Q")]
    pub q_val: f64,
    pub g: f64,
    pub vco_phase: f64,
}

#[derive(Debug, Serialize, Deserialize, PartialEq)]
pub struct LockinRow {
    pub parameter: f64,
    pub omega_l_formula: Option<f64>,
    pub omega_l_numeric: f64,
    pub regime: String,
}

#[derive(Debug, Serialize, Deserialize, PartialEq)]
pub struct SerRow {
    pub variant: String,
    pub snr_db: f64,
    pub symbols: u64,
    pub errors: u64,
    pub ser: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub locked: bool,
}

impl From<&SerPoint> for SerRow {
    fn from(p: &SerPoint) -> Self {
        SerRow {
            variant: p.variant.to_string(),
            snr_db: p.snr_db,
            symbols: p.symbols,
            errors: p.errors,
            ser: p.ser,
            ci_low: p.ci95.0,
            ci_high: p.ci95.1,
            locked: p.locked,
        }
    }
}

/// Companion file name for the deviation report of a PD curve.
pub fn deviation_path(out: &Path) -> PathBuf {
    let stem = out.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    out.with_file_name(format!("{stem}.deviation.csv"))
}

fn cmd_pd_curve(ctx: &Ctx) -> anyhow::Result<i32> {
    let kind = ctx.variant.unwrap_or(PdKind::Classical);
    let n = ctx
        .samples
        .or(ctx.cfg.pd_curve.as_ref().and_then(|s| s.samples))
        .unwrap_or(1000);
    let curve = PdCurve::sample(kind, n)?;
    let rows: Vec<PdCurveRow> = curve
        .thetas
        .iter()
        .zip(&curve.values)
        .zip(curve.normalized())
        .map(|((&theta_e, &value), normalized_value)| PdCurveRow { theta_e, value, normalized_value })
        .collect();
    write_rows(ctx.out.as_deref(), &rows)?;

    let reference = kind.reference();
    let report = DeviationRow {
        variant: kind.to_string(),
        reference: reference.to_string(),
        max_deviation: pd_char::max_deviation(kind, reference, REPORT_GRID)?,
        grid_points: REPORT_GRID,
    };
    eprintln!(
        "max normalized deviation {} vs {}: {:.6}",
        report.variant, report.reference, report.max_deviation
    );
    if let Some(out) = &ctx.out {
        write_rows(Some(&deviation_path(out)), &[report])?;
    }
    if let Some(svg) = ctx.plot_path() {
        let own: Vec<(f64, f64)> = rows.iter().map(|r| (r.theta_e, r.normalized_value)).collect();
        let refc = PdCurve::sample(reference, n.max(2))?;
        let other: Vec<(f64, f64)> = refc.thetas.iter().copied().zip(refc.normalized()).collect();
        plot::write_svg(
            &svg,
            &format!("{kind} phase detector (normalized)"),
            "theta_e [rad]",
            &[(kind.name(), &own), (reference.name(), &other)],
        )?;
    }
    Ok(EXIT_OK)
}

fn cmd_simulate(ctx: &Ctx) -> anyhow::Result<i32> {
    let variant = ctx.circuit_variant()?;
    let design = ctx.cfg.loop_design();
    let sim = ctx.cfg.simulate.clone().unwrap_or_default();
    if !(sim.t_end > 0.0 && sim.t_end.is_finite()) {
        return Err(ConfigError(format!("simulate.t_end must be > 0, got {}", sim.t_end)).into());
    }
    match sim.level {
        SimLevel::Phase => simulate_phase(ctx, variant, &design, &sim),
        SimLevel::Waveform => simulate_waveform(ctx, variant, &design, &sim),
    }
}

fn simulate_phase(ctx: &Ctx, variant: PdKind, design: &LoopDesign, sim: &SimulateSection) -> anyhow::Result<i32> {
    let params = LoopParams::with_offset(
        variant,
        design.k_vco,
        design.freq_offset,
        PiFilter::new(design.tau1, design.tau2)?,
    )?;
    let opts = SimOptions {
        dt: sim.dt.unwrap_or_else(|| params.recommended_dt()),
        t_end: sim.t_end,
        record_every: sim.record_every.unwrap_or(1),
        stop_on_slip: false,
        stop_when_locked: None,
    };
    let tr = loop_model::simulate(&params, PhaseState::new(sim.initial_theta, sim.initial_x), &opts)?;
    let rows: Vec<TrajectoryRow> = tr
        .samples
        .iter()
        .map(|s| TrajectoryRow { t: s.t, theta_e: s.theta_e, x: s.x, g: loop_model::control(&params, s) })
        .collect();
    write_rows(ctx.out.as_deref(), &rows)?;
    if let Some(svg) = ctx.plot_path() {
        let pts: Vec<(f64, f64)> = rows.iter().map(|r| (r.t, r.theta_e)).collect();
        plot::write_svg(&svg, &format!("{variant} phase error"), "t [s]", &[("theta_e", &pts)])?;
    }
    eprintln!(
        "locked: {}, slipped: {} ({} periods), max excursion {:.4} rad",
        tr.locked, tr.slipped, tr.periods_slipped, tr.max_excursion
    );
    if tr.slipped {
        return Ok(EXIT_SLIP);
    }
    if !tr.locked {
        eprintln!("note: not yet within the lock tolerance at t_end");
    }
    Ok(EXIT_OK)
}

/// Lock tolerance for the waveform circuit (ripple included), rad.
const WAVEFORM_LOCK_TOL: f64 = 0.05;

fn simulate_waveform(ctx: &Ctx, variant: PdKind, design: &LoopDesign, sim: &SimulateSection) -> anyhow::Result<i32> {
    let modem = ctx.modem()?;
    let n_symbols = (sim.t_end * modem.symbol_rate).ceil().max(1.0) as usize;
    let symbols = signal_sim::random_symbols(n_symbols, modem.seed);
    let every = sim.record_every.unwrap_or(10);
    let rec = signal_sim::run_chain(variant, &modem, design, &symbols, every)?;
    let rows: Vec<WaveformRow> = (0..rec.t.len())
        .map(|k| WaveformRow {
            t: rec.t[k],
            input: rec.input[k],
            i_val: rec.i_val[k],
            q_val: rec.q_val[k],
            g: rec.control_g[k],
            vco_phase: rec.vco_phase[k],
        })
        .collect();
    write_rows(ctx.out.as_deref(), &rows)?;
    if let Some(svg) = ctx.plot_path() {
        let pts: Vec<(f64, f64)> = rec.t.iter().copied().zip(rec.theta_e.iter().copied()).collect();
        plot::write_svg(&svg, &format!("{variant} circuit phase error"), "t [s]", &[("theta_e", &pts)])?;
    }
    let (locked, slipped) = waveform_status(variant, &rec.theta_e);
    eprintln!("locked: {locked}, slipped: {slipped}");
    if slipped {
        return Ok(EXIT_SLIP);
    }
    if !locked {
        eprintln!("note: not yet within the lock tolerance at t_end");
    }
    Ok(EXIT_OK)
}

/// Lock and slip status of a recorded waveform phase error.
pub fn waveform_status(variant: PdKind, theta_e: &[f64]) -> (bool, bool) {
    let zero = find_stable_zero(variant);
    let Some(&first) = theta_e.first() else {
        return (false, false);
    };
    let idx = |th: f64| ((th - zero) / PD_PERIOD).round() as i64;
    let k0 = idx(first);
    let home = zero + k0 as f64 * PD_PERIOD;
    let excursion = theta_e.iter().fold(0.0f64, |m, &th| m.max((th - home).abs()));
    let last = *theta_e.last().unwrap_or(&first);
    let slipped = excursion >= loop_model::SLIP_EXCURSION || idx(last) != k0;
    let tail = &theta_e[theta_e.len() * 9 / 10..];
    let locked = tail.iter().all(|&th| {
        let near = zero + idx(th) as f64 * PD_PERIOD;
        (th - near).abs() < WAVEFORM_LOCK_TOL
    });
    (locked, slipped)
}

fn cmd_lockin(ctx: &Ctx) -> anyhow::Result<i32> {
    let variant = ctx.circuit_variant()?;
    let Some(sweep) = ctx.cfg.lockin.clone() else {
        return Err(ConfigError("lockin needs a [lockin] section with parameter and values".into()).into());
    };
    if sweep.values.is_empty() {
        return Err(ConfigError("lockin.values is empty".into()).into());
    }
    if sweep.relative_tolerance.is_nan() || sweep.relative_tolerance <= 0.0 {
        return Err(ConfigError("lockin.relative_tolerance must be > 0".into()).into());
    }
    let base = ctx.cfg.loop_design();
    let mut rows = Vec::with_capacity(sweep.values.len());
    for &v in &sweep.values {
        let mut d = base;
        match sweep.parameter {
            SweepParameter::KVco => d.k_vco = v,
            SweepParameter::Tau1 => d.tau1 = v,
            SweepParameter::Tau2 => d.tau2 = v,
        }
        let params = lockin::params_for(variant, d.k_vco, d.tau1, d.tau2)?;
        let (formula, regime) = match variant {
            PdKind::Classical => (Some(lockin::lockin_classical(d.k_vco, d.tau1, d.tau2)?), String::new()),
            PdKind::Folding => match lockin::lockin_folding(d.k_vco, params.k_pd, d.tau1, d.tau2) {
                Ok((w, r)) => (Some(w), r.label().to_string()),
                Err(Error::Singularity(_)) => {
                    let p = lockin::folding_params(d.k_vco, params.k_pd, d.tau1, d.tau2).ok();
                    let label = p.and_then(|p| p.regime).map(LockinRegime::label).unwrap_or("i");
                    (None, label.to_string())
                }
                Err(e) => return Err(e.into()),
            },
            _ => (None, String::new()),
        };
        let tol = sweep.relative_tolerance * lockin::natural_scale(&params);
        let numeric = lockin::lockin_numeric(&params, tol)?;
        match formula {
            Some(f) => eprintln!("{v}: formula {f:.6}, numeric {numeric:.6}"),
            None => eprintln!("{v}: formula n/a, numeric {numeric:.6}"),
        }
        rows.push(LockinRow { parameter: v, omega_l_formula: formula, omega_l_numeric: numeric, regime });
    }
    write_rows(ctx.out.as_deref(), &rows)?;
    if let Some(svg) = ctx.plot_path() {
        let num: Vec<(f64, f64)> = rows.iter().map(|r| (r.parameter, r.omega_l_numeric)).collect();
        let form: Vec<(f64, f64)> = rows
            .iter()
            .filter_map(|r| r.omega_l_formula.map(|f| (r.parameter, f)))
            .collect();
        let mut series: Vec<(&str, &[(f64, f64)])> = vec![("numeric", &num)];
        if !form.is_empty() {
            series.push(("formula", &form));
        }
        plot::write_svg(&svg, &format!("{variant} lock-in range [rad/s]"), "parameter", &series)?;
    }
    Ok(EXIT_OK)
}

fn cmd_ser(ctx: &Ctx) -> anyhow::Result<i32> {
    let section = ctx.cfg.ser.clone().unwrap_or_default();
    if section.snr_db.is_empty() {
        return Err(ConfigError("ser.snr_db is empty".into()).into());
    }
    let variants = match (ctx.variant, &section.variants) {
        (Some(v), _) => vec![v],
        (None, Some(vs)) => vs.clone(),
        (None, None) => PdKind::CIRCUITS.to_vec(),
    };
    if let Some(v) = variants.iter().find(|v| !v.is_circuit()) {
        return Err(ConfigError(format!("{v} is a reference shape, not a loop variant")).into());
    }
    let n = ctx.samples.unwrap_or(section.symbols);
    let modem = ctx.modem()?;
    let design = ctx.cfg.loop_design();
    let protocol = SerProtocol { warmup_symbols: section.warmup_symbols };
    let points = signal_sim::ser_sweep(&variants, &modem, &design, &protocol, &section.snr_db, n)?;
    let rows: Vec<SerRow> = points.iter().map(SerRow::from).collect();
    for p in points.iter().filter(|p| !p.locked) {
        eprintln!("warning: {} did not lock during warm-up at {} dB", p.variant, p.snr_db);
    }
    write_rows(ctx.out.as_deref(), &rows)?;
    if let Some(svg) = ctx.plot_path() {
        let curves: Vec<(String, Vec<(f64, f64)>)> = variants
            .iter()
            .map(|v| {
                let pts = points
                    .iter()
                    .filter(|p| p.variant == *v && p.ser > 0.0)
                    .map(|p| (p.snr_db, p.ser.log10()))
                    .collect();
                (v.to_string(), pts)
            })
            .collect();
        let series: Vec<(&str, &[(f64, f64)])> = curves.iter().map(|(n, p)| (n.as_str(), p.as_slice())).collect();
        plot::write_svg(&svg, "log10 SER", "SNR [dB]", &series)?;
    }
    Ok(EXIT_OK)
}

/// Run a parsed command and return its exit code.
pub fn run(cli: &Cli) -> anyhow::Result<i32> {
    let ctx = Ctx::new(&cli.command)?;
    match &cli.command {
        Command::PdCurve(_) => cmd_pd_curve(&ctx),
        Command::Simulate(_) => cmd_simulate(&ctx),
        Command::Lockin(_) => cmd_lockin(&ctx),
        Command::Ser(_) => cmd_ser(&ctx),
    }
}

/// Exit code for an error that escaped [`run`].
pub fn exit_code_for(err: &anyhow::Error) -> i32 {
    if err.downcast_ref::<ConfigError>().is_some() {
        return EXIT_CONFIG;
    }
    match err.downcast_ref::<Error>() {
        Some(Error::NumericalBlowUp { .. }) => EXIT_NUMERIC,
        Some(Error::InvalidParameter(_)) => EXIT_CONFIG,
        Some(_) => EXIT_FAILURE,
        None => EXIT_FAILURE,
    }
}

/// Parse `args`, run, report errors on stderr and return the exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_CONFIG,
            };
        }
    };
    match run(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            exit_code_for(&e)
        }
    }
}
