//! Command line front end.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Map, Value};

use crate::error::{Error, Result};
use crate::estimation::{crb_sweep, SweepConfig};
use crate::fisher::{self, qfi_matrix_consistency, FisherReport, QfiTarget, StepEstimate};
use crate::geometry::{build_amplitude_matrix, Parameter, Scenario};
use crate::interferometer::{self, saturation_report, Interferometer};
use crate::scenario_file::bundled;

#[derive(Debug, Parser)]
#[command(
    name = "qfi-imaging",
    version,
    about = "Fisher information and optimal interferometers for point-emitter imaging"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Quantum Fisher information along a direction
    Qfi(Common),
    /// Classical Fisher information behind an interferometer
    Cfi(Measured),
    /// Synthesize the interferometer for a direction
    Design(Common),
    /// Synthesize and check that classical and quantum information agree
    Saturate(Common),
    /// Closed-form paraxial QFI matrix against finite differences
    Qfimatrix(MatrixArgs),
    /// Monte-Carlo maximum-likelihood estimation
    Simulate(SimulateArgs),
}

#[derive(Debug, Args)]
pub struct Common {
    /// Scenario file (TOML, or JSON by extension) or bundled name such as `bundled:two_collector`
    #[arg(long)]
    pub scenario: String,
    /// Preset (separation-x, centroid-z, source1-y, ...) or comma separated vector
    #[arg(long)]
    pub direction: Option<String>,
    /// Write the JSON result here instead of stdout
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Report transverse information per radian (multiplies by z0²)
    #[arg(long)]
    pub angular: bool,
    /// Plain whitespace separated columns for external plotting
    #[arg(long, value_name = "PATH")]
    pub gnuplot_dat: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct Measured {
    #[command(flatten)]
    pub common: Common,
    /// identity, qft, bs, bs:<alpha>, optimal, or a JSON interferometer file
    #[arg(long, default_value = "optimal")]
    pub interferometer: String,
}

#[derive(Debug, Args)]
pub struct MatrixArgs {
    #[command(flatten)]
    pub common: Common,
    /// single, separation or centroid; defaults from the number of sources
    #[arg(long)]
    pub target: Option<String>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub measured: Measured,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 100_000)]
    pub photons: u64,
    #[arg(long, default_value_t = 500)]
    pub trials: usize,
    /// Worker threads for the trials (default: all cores)
    #[arg(long)]
    pub threads: Option<usize>,
    /// True parameter offset from the scenario
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub theta: f64,
    /// Per-trial CSV output
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

/// Resolves a scenario argument: an existing path first, then a bundled name.
pub fn resolve_scenario(arg: &str) -> Result<Scenario> {
    if let Some(name) = arg.strip_prefix("bundled:") {
        return bundled(name)
            .ok_or_else(|| Error::Validation(format!("no bundled scenario named '{name}'")))?
            .scenario();
    }
    let path = Path::new(arg);
    if path.exists() {
        return Scenario::load(path);
    }
    match bundled(arg) {
        Some(b) => b.scenario(),
        None => Err(Error::Validation(format!(
            "scenario '{arg}' is neither a file nor a bundled name"
        ))),
    }
}

fn resolve_parameter(scenario: &Scenario, direction: Option<&str>) -> Result<Parameter> {
    let default = if scenario.n_sources() == 2 {
        "separation-x"
    } else {
        "centroid-x"
    };
    Parameter::parse(direction.unwrap_or(default), scenario.n_sources())
}

/// Resolves the interferometer argument; `optimal` synthesizes one for `param`.
pub fn resolve_interferometer(
    arg: &str,
    scenario: &Scenario,
    param: &Parameter,
) -> Result<Interferometer> {
    if arg == "optimal" {
        return Ok(interferometer::design(scenario, param)?.interferometer);
    }
    let path = Path::new(arg);
    let r = if arg.ends_with(".json") || path.exists() {
        Interferometer::from_json_str(&fs::read_to_string(path)?)?
    } else {
        Interferometer::builtin(arg, scenario.n_collectors())?
    };
    if r.dim() != scenario.n_collectors() {
        return Err(Error::ShapeMismatch {
            expected: format!("{0}x{0} interferometer", scenario.n_collectors()),
            got: format!("{0}x{0}", r.dim()),
        });
    }
    Ok(r)
}

/// `z0²` when angular reporting is requested; rejects axial directions.
fn angular_factor(common: &Common, scenario: &Scenario, param: &Parameter) -> Result<f64> {
    if !common.angular {
        return Ok(1.0);
    }
    let axial = param.direction.components().chunks(3).any(|c| c[2] != 0.0);
    if axial {
        return Err(Error::Validation(
            "--angular applies to transverse directions only".into(),
        ));
    }
    Ok(scenario.z0() * scenario.z0())
}

fn steps_json(steps: &[StepEstimate], factor: f64) -> Value {
    let mut prev: Option<f64> = None;
    let rows: Vec<Value> = steps
        .iter()
        .map(|s| {
            let residual = prev.map(|p| (s.estimate - p).abs() * factor);
            prev = Some(s.estimate);
            json!({
                "step": s.step,
                "estimate": s.estimate * factor,
                "extrapolated": s.extrapolated.map(|e| e * factor),
                "residual": residual,
            })
        })
        .collect();
    Value::Array(rows)
}

struct Document {
    fields: Map<String, Value>,
}

impl Document {
    fn new(command: &str, scenario: &Scenario) -> Self {
        let mut fields = Map::new();
        fields.insert("command".into(), json!(command));
        fields.insert(
            "scenario_digest".into(),
            json!({ "fingerprint": scenario.fingerprint(), "scenario": scenario.to_json_value() }),
        );
        Self { fields }
    }

    fn set(&mut self, key: &str, value: Value) {
        self.fields.insert(key.into(), value);
    }

    fn parameter(&mut self, param: &Parameter, factor: f64) {
        self.set(
            "parameter",
            json!({ "label": param.label, "direction": param.direction.components(), "scale": param.scale }),
        );
        if factor != 1.0 {
            self.set("angular_factor", json!(factor));
        }
    }

    fn fisher(&mut self, report: &FisherReport, factor: f64) {
        if let Some(q) = report.qfi {
            self.set("qfi", json!(q * factor));
        }
        if let Some(c) = report.cfi {
            self.set("cfi", json!(c * factor));
        }
        if let Some(r) = report.saturation_ratio {
            self.set("saturation_ratio", json!(r));
        }
        let mut steps = Map::new();
        if report.qfi.is_some() {
            steps.insert("qfi".into(), steps_json(&report.qfi_steps, factor));
        }
        if report.cfi.is_some() {
            steps.insert("cfi".into(), steps_json(&report.cfi_steps, factor));
        }
        self.set(
            "convergence",
            json!({ "steps": steps, "converged": report.converged }),
        );
        if !report.divergent_ports.is_empty() {
            self.set("divergent_ports", json!(report.divergent_ports));
        }
    }

    fn emit(self, out: Option<&Path>) -> Result<()> {
        let text = serde_json::to_string_pretty(&Value::Object(self.fields))
            .map_err(|e| Error::Numerical(e.to_string()))?;
        match out {
            Some(p) => fs::write(p, text + "\n")?,
            None => {
                let mut stdout = std::io::stdout().lock();
                writeln!(stdout, "{text}")?;
            }
        }
        Ok(())
    }
}

fn write_dat(
    path: Option<&Path>,
    header: &str,
    rows: impl IntoIterator<Item = Vec<f64>>,
) -> Result<()> {
    let Some(path) = path else { return Ok(()) };
    let mut f = std::io::BufWriter::new(fs::File::create(path)?);
    writeln!(f, "# {header}")?;
    for row in rows {
        let line: Vec<String> = row.iter().map(|v| format!("{v:.17e}")).collect();
        writeln!(f, "{}", line.join(" "))?;
    }
    f.flush()?;
    Ok(())
}

fn step_rows(steps: &[StepEstimate], factor: f64) -> Vec<Vec<f64>> {
    steps
        .iter()
        .map(|s| {
            vec![
                s.step,
                s.estimate * factor,
                s.extrapolated.map_or(f64::NAN, |e| e * factor),
            ]
        })
        .collect()
}

fn not_converged(report: &FisherReport) -> Result<()> {
    if report.converged {
        Ok(())
    } else if !report.divergent_ports.is_empty() {
        Err(Error::Numerical(format!(
            "classical Fisher information diverges at dark ports {:?}",
            report.divergent_ports
        )))
    } else {
        Err(Error::Numerical(
            "finite-difference limit did not converge".into(),
        ))
    }
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Qfi(c) => run_qfi(&c),
        Command::Cfi(m) => run_cfi(&m),
        Command::Design(c) => run_design(&c),
        Command::Saturate(c) => run_saturate(&c),
        Command::Qfimatrix(m) => run_matrix(&m),
        Command::Simulate(s) => run_simulate(&s),
    }
}

fn run_qfi(c: &Common) -> Result<()> {
    let scenario = resolve_scenario(&c.scenario)?;
    let param = resolve_parameter(&scenario, c.direction.as_deref())?;
    let factor = angular_factor(c, &scenario, &param)?;
    let report = fisher::qfi(&scenario, &param)?;
    let mut doc = Document::new("qfi", &scenario);
    doc.parameter(&param, factor);
    doc.fisher(&report, factor);
    write_dat(
        c.gnuplot_dat.as_deref(),
        "step qfi extrapolated",
        step_rows(&report.qfi_steps, factor),
    )?;
    doc.emit(c.out.as_deref())?;
    not_converged(&report)
}

fn run_cfi(m: &Measured) -> Result<()> {
    let c = &m.common;
    let scenario = resolve_scenario(&c.scenario)?;
    let param = resolve_parameter(&scenario, c.direction.as_deref())?;
    let factor = angular_factor(c, &scenario, &param)?;
    let r = resolve_interferometer(&m.interferometer, &scenario, &param)?;
    let report = fisher::fisher_report(&scenario, &param, &r)?;
    let probs = fisher::detection_probabilities(&build_amplitude_matrix(&scenario)?, &r)?;
    let mut doc = Document::new("cfi", &scenario);
    doc.parameter(&param, factor);
    doc.fisher(&report, factor);
    doc.set("interferometer", r.to_json());
    doc.set("probabilities", json!(probs));
    write_dat(
        c.gnuplot_dat.as_deref(),
        "step cfi extrapolated",
        step_rows(&report.cfi_steps, factor),
    )?;
    doc.emit(c.out.as_deref())?;
    not_converged(&report)
}

fn run_design(c: &Common) -> Result<()> {
    let scenario = resolve_scenario(&c.scenario)?;
    let param = resolve_parameter(&scenario, c.direction.as_deref())?;
    let syn = interferometer::design(&scenario, &param)?;
    let probs =
        fisher::detection_probabilities(&build_amplitude_matrix(&scenario)?, &syn.interferometer)?;
    let mut doc = Document::new("design", &scenario);
    doc.parameter(&param, 1.0);
    doc.set(
        "design_step",
        json!(interferometer::default_design_step(&scenario)),
    );
    doc.set("singular_values", json!(syn.alignment.d));
    doc.set("interferometer", syn.interferometer.to_json());
    doc.set("probabilities", json!(probs));
    write_dat(
        c.gnuplot_dat.as_deref(),
        "port probability",
        probs.iter().enumerate().map(|(q, p)| vec![q as f64, *p]),
    )?;
    doc.emit(c.out.as_deref())
}

fn run_saturate(c: &Common) -> Result<()> {
    let scenario = resolve_scenario(&c.scenario)?;
    let param = resolve_parameter(&scenario, c.direction.as_deref())?;
    let factor = angular_factor(c, &scenario, &param)?;
    let step = interferometer::default_design_step(&scenario);
    let rep = saturation_report(&scenario, &param, step)?;
    let mut doc = Document::new("saturate", &scenario);
    doc.parameter(&param, factor);
    doc.set("qfi", json!(rep.qfi * factor));
    doc.set("cfi", json!(rep.cfi * factor));
    doc.set("saturation_ratio", json!(rep.saturation_ratio));
    doc.set("interferometer", rep.interferometer.clone());
    doc.set(
        "convergence",
        json!({ "steps": { "design_step": step }, "converged": rep.converged }),
    );
    let mut checks = serde_json::to_value(&rep).map_err(|e| Error::Numerical(e.to_string()))?;
    if let Value::Object(m) = &mut checks {
        for k in [
            "qfi",
            "cfi",
            "saturation_ratio",
            "interferometer",
            "converged",
        ] {
            m.remove(k);
        }
    }
    doc.set("checks", checks);
    write_dat(
        c.gnuplot_dat.as_deref(),
        "qfi cfi ratio",
        [vec![
            rep.qfi * factor,
            rep.cfi * factor,
            rep.saturation_ratio,
        ]],
    )?;
    doc.emit(c.out.as_deref())?;
    if rep.passed() {
        Ok(())
    } else {
        Err(Error::Saturation(Box::new(rep)))
    }
}

fn run_matrix(m: &MatrixArgs) -> Result<()> {
    let c = &m.common;
    let scenario = resolve_scenario(&c.scenario)?;
    let target = match m.target.as_deref() {
        Some(t) => QfiTarget::parse(t)?,
        None if scenario.n_sources() == 1 => QfiTarget::SingleSource,
        None => QfiTarget::TwoSourceSeparation,
    };
    let rep = qfi_matrix_consistency(&scenario, target)?;
    // Angular units rescale x and y by z0 each.
    let scale = if c.angular {
        [scenario.z0(), scenario.z0(), 1.0]
    } else {
        [1.0; 3]
    };
    let rescale = |a: [[f64; 3]; 3]| -> [[f64; 3]; 3] {
        let mut out = a;
        for i in 0..3 {
            for j in 0..3 {
                out[i][j] *= scale[i] * scale[j];
            }
        }
        out
    };
    let closed = rescale(rep.closed_form);
    let fd = rescale(rep.finite_difference);
    let mut doc = Document::new("qfimatrix", &scenario);
    doc.set("target", json!(target));
    doc.set("closed_form", json!(closed));
    doc.set("finite_difference", json!(fd));
    doc.set("relative_error", json!(rep.relative_error));
    doc.set("max_relative_error", json!(rep.max_relative_error));
    doc.set(
        "convergence",
        json!({ "steps": Value::Null, "converged": rep.converged }),
    );
    if c.angular {
        doc.set("angular_factor", json!(scenario.z0() * scenario.z0()));
    }
    write_dat(
        c.gnuplot_dat.as_deref(),
        "closed_form rows then finite_difference rows",
        closed.iter().chain(fd.iter()).map(|r| r.to_vec()),
    )?;
    doc.emit(c.out.as_deref())?;
    if rep.converged {
        Ok(())
    } else {
        Err(Error::Numerical(
            "finite-difference QFI matrix did not converge".into(),
        ))
    }
}

fn run_simulate(s: &SimulateArgs) -> Result<()> {
    let c = &s.measured.common;
    if c.angular {
        return Err(Error::Validation(
            "--angular is not supported by simulate".into(),
        ));
    }
    let scenario = resolve_scenario(&c.scenario)?;
    let param = resolve_parameter(&scenario, c.direction.as_deref())?;
    let r = resolve_interferometer(&s.measured.interferometer, &scenario, &param)?;
    let mut cfg = SweepConfig::new(s.photons, s.trials, s.seed);
    cfg.theta_true = s.theta;
    cfg.prior_center = s.theta;
    cfg.threads = s.threads;
    let sweep = crb_sweep(&scenario, &param, &r, &cfg)?;
    if let Some(path) = &s.csv {
        sweep.write_csv(std::io::BufWriter::new(fs::File::create(path)?))?;
    }
    let mut doc = Document::new("simulate", &scenario);
    doc.parameter(&param, 1.0);
    doc.set("qfi", json!(sweep.qfi));
    doc.set("cfi", json!(sweep.cfi));
    doc.set(
        "saturation_ratio",
        json!(fisher::saturation_ratio(sweep.cfi, sweep.qfi)),
    );
    doc.set("interferometer", r.to_json());
    doc.set(
        "estimation",
        json!({
            "ratio": sweep.ratio,
            "empirical_variance": sweep.result.empirical_variance,
            "fisher_predicted_variance": sweep.result.fisher_predicted_variance,
            "mean_theta_hat": sweep.result.theta_hat,
            "mean_log_likelihood": sweep.result.log_likelihood,
            "bias": sweep.bias,
            "bias_standard_error": sweep.bias_standard_error,
            "theta_true": sweep.theta_true,
            "interval": [sweep.interval.0, sweep.interval.1],
            "photons": sweep.photons,
            "trials": sweep.result.trials,
            "seed": s.seed,
        }),
    );
    doc.set(
        "convergence",
        json!({ "steps": Value::Null, "converged": true }),
    );
    write_dat(
        c.gnuplot_dat.as_deref(),
        "trial theta_hat",
        sweep
            .per_trial
            .iter()
            .map(|t| vec![t.trial as f64, t.theta_hat]),
    )?;
    doc.emit(c.out.as_deref())
}
