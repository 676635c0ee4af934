//! `silverforge` command-line front end.
//!
//! Exit status: 0 on success, 1 when a check fails, 2 on configuration or input errors.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use silverforge::code::{verify_g_group, LinearDispersionCode};
use silverforge::frame::{build_frame, verify_frame};
use silverforge::linalg::text::{write_complex_matrix, write_real_matrix};
use silverforge::rate1::build_rate1_4group;
use silverforge::silver::{assemble_generator, hr_pair_census, self_interference_trace_check, silver_code};
use silverforge::sim::{
    capacity_csv, run_capacity_sweep, run_decode_selftest, run_mindet, run_ser_sweep, run_verification,
    selftest_csv, ser_csv, verify_code, CodeSelector, SimulationConfig,
};

#[derive(Parser)]
#[command(name = "silverforge", version, about = "Generalized Silver space-time block codes")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the anticommuting frame F_1..F_2a and its identity check.
    Frame {
        #[arg(long)]
        a: usize,
    },
    /// Print the rate-1, 4-group decodable code for `nt` antennas.
    Build {
        #[arg(long)]
        nt: usize,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Print a generalized Silver code with its generator and census.
    Silver {
        #[arg(long)]
        nt: usize,
        #[arg(long)]
        nr: usize,
        /// Phase of even layers, degrees.
        #[arg(long, allow_negative_numbers = true)]
        phase: Option<f64>,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Compare brute-force, sphere and conditional decoding on noisy trials.
    DecodeSelftest {
        #[command(flatten)]
        sim: SimArgs,
        /// Operating point of the self-test.
        #[arg(long, default_value_t = 10.0, allow_negative_numbers = true)]
        snr: f64,
    },
    /// Ergodic capacity and STBC mutual information sweep.
    Capacity(SimArgs),
    /// Symbol error rate sweep.
    Ser(SimArgs),
    /// Minimum determinant of the rate-1 code and the layer phase sweep.
    Mindet(SimArgs),
    /// Run the verification suite on a built code or a weight file.
    Verify {
        #[command(flatten)]
        sim: SimArgs,
        /// Weight file in the `build`/`silver` text format.
        #[arg(long)]
        weights: Option<PathBuf>,
    },
}

#[derive(Args, Default, Clone)]
struct SimArgs {
    /// TOML file with `SimulationConfig` fields; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    nt: Option<usize>,
    #[arg(long)]
    nr: Option<usize>,
    #[arg(long, value_enum)]
    code: Option<CodeArg>,
    /// QAM constellation size.
    #[arg(short = 'M', long = "qam")]
    m: Option<usize>,
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    snr_db: Option<Vec<f64>>,
    #[arg(long)]
    trials: Option<u64>,
    #[arg(long)]
    target_errors: Option<u64>,
    #[arg(long)]
    max_trials: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, allow_negative_numbers = true)]
    phase_deg: Option<f64>,
    /// Transmit the unrotated layers.
    #[arg(long)]
    no_rotate: bool,
    /// Add a wall_time column.
    #[arg(long)]
    timing: bool,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(clap::ValueEnum, Clone, Copy)]
enum CodeArg {
    Silver,
    Rate1,
    None,
}

enum Failure {
    Check(String),
    Config(String),
}

impl From<silverforge::Error> for Failure {
    fn from(e: silverforge::Error) -> Self {
        Failure::Config(e.to_string())
    }
}

type CliResult<T> = std::result::Result<T, Failure>;

impl SimArgs {
    fn config(&self) -> CliResult<SimulationConfig> {
        let mut cfg = match &self.config {
            Some(path) => {
                let text = fs::read_to_string(path)
                    .map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
                toml::from_str(&text).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?
            }
            None => SimulationConfig::default(),
        };
        if let Some(v) = self.nt {
            cfg.nt = v;
        }
        if let Some(v) = self.nr {
            cfg.nr = v;
        }
        if let Some(v) = self.code {
            cfg.code = match v {
                CodeArg::Silver => CodeSelector::Silver,
                CodeArg::Rate1 => CodeSelector::Rate1,
                CodeArg::None => CodeSelector::None,
            };
        }
        if let Some(v) = self.m {
            cfg.m = v;
        }
        if let Some(v) = &self.snr_db {
            cfg.snr_db = v.clone();
        }
        if self.trials.is_some() {
            cfg.trials = self.trials;
        }
        if self.target_errors.is_some() {
            cfg.target_errors = self.target_errors;
        }
        if let Some(v) = self.max_trials {
            cfg.max_trials = v;
        }
        if self.seed.is_some() {
            cfg.seed = self.seed;
        }
        if self.phase_deg.is_some() {
            cfg.phase_deg = self.phase_deg;
        }
        if self.no_rotate {
            cfg.rotate = false;
        }
        if self.timing {
            cfg.timing = true;
        }
        if let Some(p) = &self.output {
            cfg.output = Some(p.display().to_string());
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn emit(output: Option<&Path>, text: &str) -> CliResult<()> {
    match output {
        Some(path) => fs::write(path, text).map_err(|e| Failure::Config(format!("{}: {e}", path.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn emit_cfg(cfg: &SimulationConfig, text: &str) -> CliResult<()> {
    emit(cfg.output.as_deref().map(Path::new), text)
}

fn exponent(nt: usize) -> CliResult<usize> {
    if nt >= 2 && nt.is_power_of_two() {
        Ok(nt.trailing_zeros() as usize)
    } else {
        Err(Failure::Config(format!("nt must be a power of two >= 2, got {nt}")))
    }
}

fn frame_cmd(a: usize) -> CliResult<()> {
    let frame = build_frame(a)?;
    let mut out = String::new();
    for (i, f) in frame.matrices().iter().enumerate() {
        let _ = writeln!(out, "# F{}", i + 1);
        out.push_str(&write_complex_matrix(f));
    }
    let report = verify_frame(&frame);
    let _ = writeln!(
        out,
        "# unitarity {:.3e}, anti-hermiticity {:.3e}, max deviation {:.3e}",
        report.unitarity,
        report.anti_hermiticity,
        report.max_deviation()
    );
    print!("{out}");
    if report.passed() {
        Ok(())
    } else {
        Err(Failure::Check("frame identities violated".into()))
    }
}

fn build_cmd(nt: usize, output: Option<&Path>) -> CliResult<()> {
    let code = build_rate1_4group(exponent(nt)?)?;
    let report = verify_g_group(&code, 4)?;
    let mut out = code.to_text();
    for c in &report.conditions {
        let _ = writeln!(out, "# {}: max deviation {:.3e}", c.name, c.max_deviation);
    }
    emit(output, &out)?;
    if report.passed() {
        Ok(())
    } else {
        Err(Failure::Check(format!("violated: {}", report.failures().join(", "))))
    }
}

fn commented(block: &str) -> String {
    block.lines().map(|l| format!("# {l}\n")).collect()
}

fn silver_cmd(nt: usize, nr: usize, phase: Option<f64>, output: Option<&Path>) -> CliResult<()> {
    exponent(nt)?;
    let layers = nt.min(nr);
    if layers == 0 {
        return Err(Failure::Config("nr must be at least 1".into()));
    }
    let code = silver_code(nt, layers, phase)?;
    let g = assemble_generator(&code);
    let (zero, total) = hr_pair_census(&code);
    let defect = g.matrix().orthonormality_defect();
    let square = g.matrix().rows() == g.matrix().cols();
    let mut out = code.to_text();
    out.push_str("# generator\n");
    out.push_str(&commented(&write_real_matrix(g.matrix())));
    let _ = writeln!(out, "# HR-orthogonal pairs: {zero} of {total}");
    let _ = writeln!(out, "# max |tr S_ij|: {:.3e}", self_interference_trace_check(&code));
    let _ = writeln!(out, "# max |G^T G - I|: {defect:.3e}");
    let _ = writeln!(
        out,
        "# information lossless: {}",
        if square && defect <= 1e-9 { "yes" } else { "no (punctured)" }
    );
    emit(output, &out)?;
    if defect <= 1e-9 {
        Ok(())
    } else {
        Err(Failure::Check("generator columns not orthonormal".into()))
    }
}

fn selftest_cmd(sim: &SimArgs, snr: f64) -> CliResult<()> {
    let cfg = sim.config()?;
    let rows = run_decode_selftest(&cfg, snr)?;
    emit_cfg(&cfg, &selftest_csv(&rows))?;
    let bad = rows.iter().filter(|r| !r.agree).count();
    if bad == 0 {
        Ok(())
    } else {
        Err(Failure::Check(format!("{bad} trials with differing decisions")))
    }
}

fn verify_cmd(sim: &SimArgs, weights: Option<&Path>) -> CliResult<()> {
    let report = match weights {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
            let code = LinearDispersionCode::from_text(&text)?;
            let nr = sim.nr.unwrap_or(code.n_layers());
            verify_code(&code, nr, sim.seed.unwrap_or(1))?
        }
        None => run_verification(&sim.config()?)?,
    };
    print!("{}", report.render());
    if report.passed() {
        Ok(())
    } else {
        Err(Failure::Check(format!("failed: {}", report.failures().join(", "))))
    }
}

fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Frame { a } => frame_cmd(a),
        Command::Build { nt, output } => build_cmd(nt, output.as_deref()),
        Command::Silver { nt, nr, phase, output } => silver_cmd(nt, nr, phase, output.as_deref()),
        Command::DecodeSelftest { sim, snr } => selftest_cmd(&sim, snr),
        Command::Capacity(sim) => {
            let cfg = sim.config()?;
            emit_cfg(&cfg, &capacity_csv(&run_capacity_sweep(&cfg)?))
        }
        Command::Ser(sim) => {
            let cfg = sim.config()?;
            emit_cfg(&cfg, &ser_csv(&run_ser_sweep(&cfg)?, cfg.timing))
        }
        Command::Mindet(sim) => {
            let cfg = sim.config()?;
            emit_cfg(&cfg, &run_mindet(&cfg)?.render())
        }
        Command::Verify { sim, weights } => verify_cmd(&sim, weights.as_deref()),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Check(msg)) => {
            eprintln!("check failed: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Config(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
