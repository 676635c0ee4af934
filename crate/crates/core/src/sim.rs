//! Experiment drivers: SER sweeps, capacity sweeps, decoder self-tests, the
//! verification suite and the minimum-determinant report.

use std::fmt::Write as _;
use std::time::Instant;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Deserialize;

use crate::channel::{sample_channel, transmit, Constellation, Prng};
use crate::code::{verify_g_group, LinearDispersionCode};
use crate::decoder::{brute_force_ml, r_structure_report, Receiver, BRUTE_FORCE_LIMIT};
use crate::error::{Error, Result};
use crate::frame::{build_frame, verify_frame};
use crate::info::{capacity_samples, db_to_linear, expansion_i1, mutual_info_samples, CapacityEstimate, LogUnit};
use crate::linalg::{det_complex, ComplexMatrix};
use crate::rate1::{build_rate1_4group, min_determinant, rotate_code, rotation_pair, MinDet};
use crate::silver::{assemble_generator, hr_pair_census, self_interference_trace_check, silver_code};

pub const CSV_HEADER: &str = "# silverforge v1";

/// Per-trial decoder budget for SER sweeps.
pub const DECODER_HYPOTHESIS_LIMIT: f64 = (1u64 << 22) as f64;

/// Error-event target floor for the adaptive stopping rule.
pub const MIN_TARGET_ERRORS: u64 = 100;

const BATCH: u64 = 256;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CodeSelector {
    Silver,
    Rate1,
    None,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulationConfig {
    pub nt: usize,
    pub nr: usize,
    pub code: CodeSelector,
    /// QAM size.
    #[serde(rename = "M")]
    pub m: usize,
    pub snr_db: Vec<f64>,
    pub trials: Option<u64>,
    pub target_errors: Option<u64>,
    pub max_trials: u64,
    pub seed: Option<u64>,
    pub phase_deg: Option<f64>,
    /// Apply the `W^T V` rotation inside every group (2, 4 and 8 antennas).
    pub rotate: bool,
    /// Include wall-clock time in CSV output.
    pub timing: bool,
    pub output: Option<String>,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        Self {
            nt: 2,
            nr: 2,
            code: CodeSelector::Silver,
            m: 4,
            snr_db: Vec::new(),
            trials: None,
            target_errors: None,
            max_trials: 1_000_000,
            seed: None,
            phase_deg: None,
            rotate: true,
            timing: false,
            output: None,
        }
    }
}

impl SimulationConfig {
    pub fn validate(&self) -> Result<()> {
        if ![2, 4, 8, 16].contains(&self.nt) {
            return Err(Error::config("nt", format!("must be 2, 4, 8 or 16, got {}", self.nt)));
        }
        if self.nr == 0 {
            return Err(Error::config("nr", "must be at least 1"));
        }
        Constellation::qam(self.m)?;
        if let Some(t) = self.target_errors {
            if t < MIN_TARGET_ERRORS {
                return Err(Error::config(
                    "target_errors",
                    format!("must be at least {MIN_TARGET_ERRORS}, got {t}"),
                ));
            }
        }
        if self.snr_db.iter().any(|s| !s.is_finite()) {
            return Err(Error::config("snr_db", "values must be finite"));
        }
        Ok(())
    }

    pub fn require_seed(&self) -> Result<u64> {
        self.seed.ok_or_else(|| Error::config("seed", "a seed is required"))
    }

    pub fn layers(&self) -> usize {
        self.nt.min(self.nr)
    }

    pub fn constellation(&self) -> Result<Constellation> {
        Constellation::qam(self.m)
    }

    /// The code this configuration simulates.
    pub fn build_code(&self) -> Result<LinearDispersionCode> {
        let code = match self.code {
            CodeSelector::Silver => silver_code(self.nt, self.layers(), self.phase_deg)?,
            CodeSelector::Rate1 => build_rate1_4group(self.nt.trailing_zeros() as usize)?,
            CodeSelector::None => {
                return Err(Error::config("code", "this command needs a code"));
            }
        };
        if self.rotate && self.nt <= 8 {
            rotate_code(&code, &rotation_pair(self.nt)?)
        } else {
            Ok(code)
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SerPoint {
    pub snr_db: f64,
    pub symbol_errors: u64,
    pub symbols_sent: u64,
    pub ser: f64,
    pub wall_time: f64,
    pub trials: u64,
    /// Channels redrawn because `H_eq` was rank deficient.
    pub resampled: u64,
}

/// Worst-case hypotheses of the conditional decoder: all later-layer real symbols
/// times one group search with its first symbol quantized.
pub fn conditional_hypotheses(code: &LinearDispersionCode, cons: &Constellation) -> f64 {
    let levels = cons.size_per_real() as f64;
    let head = code.layer_indices(0).len();
    let gs = code.groups().first().map_or(1, Vec::len);
    let tail = code.weights().len() - head;
    levels.powi(tail as i32) * 4.0 * levels.powi(gs as i32 - 1)
}

struct TrialOutcome {
    errors: u64,
    resampled: u64,
}

fn ser_trial(
    code: &LinearDispersionCode,
    cons: &Constellation,
    n_r: usize,
    snr: f64,
    rng: &mut Prng,
) -> Result<TrialOutcome> {
    let n_t = code.n_t();
    let mut resampled = 0;
    let (ch, rx) = loop {
        let ch = sample_channel(n_t, n_r, snr, rng);
        match Receiver::new(&ch, code) {
            Ok(rx) => break (ch, rx),
            Err(Error::RankDeficient { .. }) => resampled += 1,
            Err(e) => return Err(e),
        }
    };
    let idx = cons.random_indices(code.weights().len(), rng);
    let s = code.codeword(&cons.symbols(&idx))?;
    let y = transmit(&s, &ch, rng)?;
    let out = rx.conditional(&y, code, cons)?;
    // complex symbol c of a layer pairs real symbols c and c + n_t
    let mut errors = 0;
    for l in 0..code.n_layers() {
        let base = code.layer_indices(l)[0];
        for c in 0..n_t {
            let (re, im) = (base + c, base + c + n_t);
            if out.indices[re] != idx[re] || out.indices[im] != idx[im] {
                errors += 1;
            }
        }
    }
    Ok(TrialOutcome { errors, resampled })
}

fn stream_id(point: usize, trial: u64) -> u64 {
    ((point as u64) << 40) | trial
}

/// Symbol error rate per SNR point with the conditional group decoder.
pub fn run_ser_sweep(cfg: &SimulationConfig) -> Result<Vec<SerPoint>> {
    cfg.validate()?;
    let seed = cfg.require_seed()?;
    if cfg.trials.is_none() && cfg.target_errors.is_none() {
        return Err(Error::config("trials", "set trials or target_errors"));
    }
    if cfg.trials == Some(0) {
        return Ok(Vec::new());
    }
    let code = cfg.build_code()?;
    let cons = cfg.constellation()?;
    let hyp = conditional_hypotheses(&code, &cons);
    if hyp > DECODER_HYPOTHESIS_LIMIT {
        return Err(Error::config(
            "nt",
            format!("conditional decoder needs {hyp:.3e} hypotheses per trial, limit {DECODER_HYPOTHESIS_LIMIT:.3e}"),
        ));
    }
    let symbols_per_trial = (code.weights().len() / 2) as u64;
    let mut points = Vec::with_capacity(cfg.snr_db.len());
    for (p, &snr_db) in cfg.snr_db.iter().enumerate() {
        let snr = db_to_linear(snr_db);
        let start = Instant::now();
        let limit = cfg.trials.unwrap_or(cfg.max_trials);
        let mut done = 0u64;
        let mut errors = 0u64;
        let mut resampled = 0u64;
        while done < limit {
            let batch = if cfg.trials.is_some() { limit - done } else { BATCH.min(limit - done) };
            let outcomes: Vec<TrialOutcome> = (done..done + batch)
                .into_par_iter()
                .map(|t| {
                    let mut rng = Prng::for_trial(seed, stream_id(p, t));
                    ser_trial(&code, &cons, cfg.nr, snr, &mut rng)
                })
                .collect::<Result<_>>()?;
            for o in &outcomes {
                errors += o.errors;
                resampled += o.resampled;
            }
            done += batch;
            if cfg.target_errors.is_some_and(|t| errors >= t) {
                break;
            }
        }
        let sent = done * symbols_per_trial;
        points.push(SerPoint {
            snr_db,
            symbol_errors: errors,
            symbols_sent: sent,
            ser: errors as f64 / sent as f64,
            wall_time: start.elapsed().as_secs_f64(),
            trials: done,
            resampled,
        });
    }
    Ok(points)
}

pub fn ser_csv(points: &[SerPoint], timing: bool) -> String {
    let mut out = format!("{CSV_HEADER}\nsnr_db,symbol_errors,symbols_sent,ser");
    out.push_str(if timing { ",wall_time\n" } else { "\n" });
    for p in points {
        let _ = write!(out, "{},{},{},{}", p.snr_db, p.symbol_errors, p.symbols_sent, p.ser);
        if timing {
            let _ = write!(out, ",{}", p.wall_time);
        }
        out.push('\n');
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct CapacityRow {
    pub snr_db: f64,
    pub capacity: CapacityEstimate,
    pub mutual_info: Option<CapacityEstimate>,
}

/// Ergodic capacity and (unless the code is `none`) the paired STBC mutual
/// information, in bits, per SNR point.
pub fn run_capacity_sweep(cfg: &SimulationConfig) -> Result<Vec<CapacityRow>> {
    cfg.validate()?;
    let seed = cfg.require_seed()?;
    let trials = cfg.trials.unwrap_or(10_000) as usize;
    if trials < 100 {
        return Err(Error::config("trials", format!("at least 100 trials required, got {trials}")));
    }
    let g = match cfg.code {
        CodeSelector::None => None,
        _ => Some(assemble_generator(&cfg.build_code()?)),
    };
    cfg.snr_db
        .iter()
        .map(|&snr_db| {
            let snr = db_to_linear(snr_db);
            let cap = capacity_samples(cfg.nt, cfg.nr, snr, trials, seed, LogUnit::Bits);
            let mi = match &g {
                Some(g) => Some(CapacityEstimate::from_samples(
                    &mutual_info_samples(g, cfg.nt, cfg.nr, snr, trials, seed, LogUnit::Bits)?,
                    snr,
                    LogUnit::Bits,
                )),
                None => None,
            };
            Ok(CapacityRow {
                snr_db,
                capacity: CapacityEstimate::from_samples(&cap, snr, LogUnit::Bits),
                mutual_info: mi,
            })
        })
        .collect()
}

pub fn capacity_csv(rows: &[CapacityRow]) -> String {
    let mut out = format!("{CSV_HEADER}\nsnr_db,capacity,cap_stderr,mi,mi_stderr\n");
    for r in rows {
        let (mi, mi_se) = match &r.mutual_info {
            Some(m) => (m.mean.to_string(), m.std_error.to_string()),
            None => (String::new(), String::new()),
        };
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            r.snr_db, r.capacity.mean, r.capacity.std_error, mi, mi_se
        );
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelftestRow {
    pub trial: u64,
    /// `None` when the exhaustive search exceeds its cap.
    pub metric_bf: Option<f64>,
    pub metric_sd: f64,
    pub metric_cond: f64,
    pub nodes_sd: u64,
    pub nodes_cond: u64,
    /// Same decision from every decoder that ran.
    pub agree: bool,
}

/// Decodes `trials` noisy transmissions with all three decoders at `snr_db`.
pub fn run_decode_selftest(cfg: &SimulationConfig, snr_db: f64) -> Result<Vec<SelftestRow>> {
    cfg.validate()?;
    let seed = cfg.require_seed()?;
    let code = cfg.build_code()?;
    let cons = cfg.constellation()?;
    let snr = db_to_linear(snr_db);
    let brute_ok = (cons.size_per_real() as f64).powi(code.weights().len() as i32) <= BRUTE_FORCE_LIMIT;
    let trials = cfg.trials.unwrap_or(1000);
    (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = Prng::for_trial(seed, t);
            let (ch, rx) = loop {
                let ch = sample_channel(code.n_t(), cfg.nr, snr, &mut rng);
                match Receiver::new(&ch, &code) {
                    Ok(rx) => break (ch, rx),
                    Err(Error::RankDeficient { .. }) => continue,
                    Err(e) => return Err(e),
                }
            };
            let idx = cons.random_indices(code.weights().len(), &mut rng);
            let s = code.codeword(&cons.symbols(&idx))?;
            let y = transmit(&s, &ch, &mut rng)?;
            let sd = rx.sphere(&y, &cons)?;
            let cd = rx.conditional(&y, &code, &cons)?;
            let bf = if brute_ok {
                Some(brute_force_ml(&y, &ch, &code, &cons)?)
            } else {
                None
            };
            let agree = sd.indices == cd.indices && bf.as_ref().is_none_or(|b| b.indices == sd.indices);
            Ok(SelftestRow {
                trial: t,
                metric_bf: bf.map(|b| b.metric),
                metric_sd: sd.metric,
                metric_cond: cd.metric,
                nodes_sd: sd.nodes_visited,
                nodes_cond: cd.nodes_visited,
                agree,
            })
        })
        .collect()
}

pub fn selftest_csv(rows: &[SelftestRow]) -> String {
    let mut out = format!("{CSV_HEADER}\ntrial,metric_bf,metric_sd,metric_cond,nodes_sd,nodes_cond\n");
    for r in rows {
        let bf = r.metric_bf.map_or_else(|| "NA".to_string(), |m| m.to_string());
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            r.trial, bf, r.metric_sd, r.metric_cond, r.nodes_sd, r.nodes_cond
        );
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct VerificationReport {
    pub checks: Vec<CheckResult>,
}

impl VerificationReport {
    fn push(&mut self, name: impl Into<String>, passed: bool, detail: impl Into<String>) {
        self.checks.push(CheckResult {
            name: name.into(),
            passed,
            detail: detail.into(),
        });
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> Vec<&str> {
        self.checks
            .iter()
            .filter(|c| !c.passed)
            .map(|c| c.name.as_str())
            .collect()
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for c in &self.checks {
            let _ = writeln!(out, "{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
        }
        let _ = writeln!(out, "{}", if self.passed() { "ALL CHECKS PASSED" } else { "CHECKS FAILED" });
        out
    }
}

/// Structural checks on an arbitrary layered code received by `n_r` antennas.
pub fn verify_code(code: &LinearDispersionCode, n_r: usize, seed: u64) -> Result<VerificationReport> {
    let mut report = VerificationReport::default();
    for l in 0..code.n_layers() {
        let layer = code.layer(l)?;
        match verify_g_group(&layer, 4) {
            Ok(g) => report.push(
                format!("layer {} four-group conditions", l + 1),
                g.passed(),
                if g.passed() {
                    "all six conditions and cross-group HR hold".to_string()
                } else {
                    format!("violated: {}", g.failures().join(", "))
                },
            ),
            Err(e) => report.push(format!("layer {} four-group conditions", l + 1), false, e.to_string()),
        }
    }
    let energy = code.total_energy();
    let target = 2.0 * (code.n_t() * code.t()) as f64;
    report.push(
        "power constraint",
        (energy - target).abs() <= 1e-9 * target,
        format!("sum tr(AA^H) = {energy}, expected {target}; I1 = {}", expansion_i1(code, n_r)),
    );
    let g = assemble_generator(code);
    let defect = g.matrix().orthonormality_defect();
    report.push(
        "generator orthonormal columns",
        defect <= 1e-9,
        format!("max |G^T G - I| = {defect:.3e}, rank {} of {}", g.rank(), code.weights().len()),
    );
    let trace = self_interference_trace_check(code);
    report.push("self-interference traceless", trace <= 1e-9, format!("max |tr S_ij| = {trace:.3e}"));
    let (zero, total) = hr_pair_census(code);
    report.push("HR pair census", true, format!("{zero} of {total} pairs HR-orthogonal"));
    let rows = 2 * n_r * code.t();
    if rows >= code.weights().len() {
        match r_structure_report(code, n_r, 100, None, &mut Prng::new(seed)) {
            Ok(r) => report.push(
                "R zero pattern",
                r.passed(),
                format!("leak {:.3e}, T mismatch {:.3e} over {} channels", r.max_leak, r.t_mismatch, r.trials),
            ),
            Err(e) => report.push("R zero pattern", false, e.to_string()),
        }
    }
    Ok(report)
}

/// Frame checks plus [`verify_code`] on the configured code.
pub fn run_verification(cfg: &SimulationConfig) -> Result<VerificationReport> {
    cfg.validate()?;
    let a = cfg.nt.trailing_zeros() as usize;
    let mut report = VerificationReport::default();
    let frame = verify_frame(&build_frame(a)?);
    report.push(
        "frame identities",
        frame.passed(),
        format!("max deviation {:.3e}", frame.max_deviation()),
    );
    let rate1 = verify_g_group(&build_rate1_4group(a)?, 4)?;
    report.push(
        "rate-1 four-group conditions",
        rate1.passed(),
        if rate1.passed() {
            "all six conditions hold".to_string()
        } else {
            format!("violated: {}", rate1.failures().join(", "))
        },
    );
    // the in-group rotation mixes weights, so the per-weight conditions are checked before it
    let plain = SimulationConfig { rotate: false, ..cfg.clone() };
    let inner = verify_code(&plain.build_code()?, cfg.nr, cfg.seed.unwrap_or(1))?;
    report.checks.extend(inner.checks);
    Ok(report)
}

/// `min |det ΔS|^2` over all nonzero symbol differences of a (power-scaled) code.
pub fn exhaustive_min_determinant(code: &LinearDispersionCode, cons: &Constellation, limit: f64) -> Result<f64> {
    let n = code.weights().len();
    let alphabet: Vec<f64> = std::iter::once(0.0).chain(cons.nonzero_differences()).collect();
    let total = (alphabet.len() as f64).powi(n as i32);
    if total > limit {
        return Err(Error::SearchTooLarge { hypotheses: total, limit });
    }
    let base = alphabet.len() as u64;
    let weights = code.effective_weights();
    let shape = (code.n_t(), code.t());
    Ok((1..total as u64)
        .into_par_iter()
        .map(|mut idx| {
            let mut data = vec![Complex64::new(0.0, 0.0); shape.0 * shape.1];
            for w in &weights {
                let d = alphabet[(idx % base) as usize];
                idx /= base;
                if d != 0.0 {
                    for (o, a) in data.iter_mut().zip(w.as_slice()) {
                        *o += a * d;
                    }
                }
            }
            let s = ComplexMatrix::new(shape.0, shape.1, data).expect("shape matches");
            det_complex(&s).norm_sqr()
        })
        .reduce(|| f64::INFINITY, f64::min))
}

#[derive(Debug, Clone, PartialEq)]
pub struct MinDetReport {
    pub n_t: usize,
    pub m: usize,
    pub rate1: MinDet,
    /// `(phase_deg, min det)` for the 2-layer code.
    pub phase_sweep: Vec<(f64, f64)>,
}

impl MinDetReport {
    /// Phases attaining the largest swept minimum determinant (relative tolerance 1e-9).
    pub fn argmax_phases(&self) -> Vec<f64> {
        let best = self.phase_sweep.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
        self.phase_sweep
            .iter()
            .filter(|p| p.1 >= best * (1.0 - 1e-9))
            .map(|p| p.0)
            .collect()
    }

    pub fn render(&self) -> String {
        let mut out = format!(
            "{CSV_HEADER}\n# rate-1 code n_t={} M={}: factorized {}",
            self.n_t, self.m, self.rate1.factorized
        );
        match self.rate1.brute {
            Some(b) => {
                let _ = writeln!(out, ", exhaustive {b}");
            }
            None => out.push_str(", exhaustive n/a\n"),
        }
        if !self.phase_sweep.is_empty() {
            out.push_str("phase_deg,min_det\n");
            for (p, d) in &self.phase_sweep {
                let _ = writeln!(out, "{p},{d}");
            }
        }
        out
    }
}

pub const PHASE_GRID: [f64; 7] = [0.0, 15.0, 30.0, 45.0, 60.0, 75.0, 90.0];

/// Limit on difference vectors enumerated by the phase sweep.
pub const PHASE_SWEEP_LIMIT: f64 = 5e7;

/// Minimum determinant of the 2-layer code at `phase_deg` (rotated layers).
pub fn two_layer_min_determinant(n_t: usize, phase_deg: f64, cons: &Constellation) -> Result<f64> {
    let code = match silver_code(n_t, 2, Some(phase_deg)) {
        Ok(c) => c,
        // a nonzero symbol difference then maps to the zero codeword difference
        Err(Error::DependentLayers { .. }) => return Ok(0.0),
        Err(e) => return Err(e),
    };
    let code = rotate_code(&code, &rotation_pair(n_t)?)?;
    exhaustive_min_determinant(&code, cons, PHASE_SWEEP_LIMIT)
}

pub fn run_mindet(cfg: &SimulationConfig) -> Result<MinDetReport> {
    cfg.validate()?;
    if cfg.nt > 8 {
        return Err(Error::config("nt", "minimum determinant search limited to n_t <= 8"));
    }
    let cons = cfg.constellation()?;
    let code = build_rate1_4group(cfg.nt.trailing_zeros() as usize)?;
    let rate1 = min_determinant(&code, &rotation_pair(cfg.nt)?, &cons)?;
    let phase_sweep = if cfg.nt <= 4 && cfg.m == 4 {
        PHASE_GRID
            .iter()
            .map(|&p| Ok((p, two_layer_min_determinant(cfg.nt, p, &cons)?)))
            .collect::<Result<_>>()?
    } else {
        Vec::new()
    };
    Ok(MinDetReport {
        n_t: cfg.nt,
        m: cfg.m,
        rate1,
        phase_sweep,
    })
}
