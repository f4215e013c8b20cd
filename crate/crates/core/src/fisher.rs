//! Quantum and classical fidelities and Fisher information.
//!
//! The quantum fidelity between `ρ(r)` and `ρ(r′)` is the trace norm of the
//! overlap matrix `M = C(r)† C(r′)`. The quantum Fisher information is the
//! second-order coefficient of `8(1 − ‖M‖₁)` in the displacement. Numerically
//! we use the equivalent `4‖C V − C′ W‖²_F`, where `V† M W` is the SVD of `M`;
//! it has no cancellation at small displacements.

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{
    build_amplitude_matrix, displace, is_inversion_symmetric, AmplitudeMatrix, Collector,
    GeneralizedCoordinate, Parameter, Scenario,
};
use crate::interferometer::Interferometer;
use crate::linalg::{sorted_svd, CMatrix};

/// Relative agreement between successive extrapolants required for convergence.
pub const CONVERGENCE_RTOL: f64 = 1e-6;
/// Maximum number of step halvings before giving up.
pub const MAX_HALVINGS: usize = 8;
/// Probabilities below this are treated as dark ports.
pub const DARK_PROBABILITY: f64 = 1e-14;
/// Derivative magnitude that separates a removable dark port from a divergent one.
pub const DARK_DERIVATIVE: f64 = 1e-10;

/// `M = C(r)† C(r′)`.
#[derive(Debug, Clone, PartialEq)]
pub struct OverlapMatrix(CMatrix);

impl OverlapMatrix {
    pub fn from_matrix(m: CMatrix) -> Self {
        Self(m)
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.0
    }
}

pub fn overlap_matrix(c: &AmplitudeMatrix, c_prime: &AmplitudeMatrix) -> Result<OverlapMatrix> {
    check_same_shape(c, c_prime)?;
    Ok(OverlapMatrix(c.matrix().adjoint() * c_prime.matrix()))
}

fn check_same_shape(c: &AmplitudeMatrix, c_prime: &AmplitudeMatrix) -> Result<()> {
    if c.matrix().shape() != c_prime.matrix().shape() {
        return Err(Error::ShapeMismatch {
            expected: format!("{:?}", c.matrix().shape()),
            got: format!("{:?}", c_prime.matrix().shape()),
        });
    }
    Ok(())
}

/// Trace norm `‖M‖₁`, the sum of singular values.
pub fn quantum_fidelity(m: &OverlapMatrix) -> Result<f64> {
    let (_, d, _) = sorted_svd(&m.0)?;
    Ok(d.iter().sum())
}

/// Squared Bures distance `min_{V,W} ‖C V − C′ W‖²_F = ‖C‖² + ‖C′‖² − 2‖M‖₁`.
pub fn bures_distance_sq(c: &AmplitudeMatrix, c_prime: &AmplitudeMatrix) -> Result<f64> {
    let m = overlap_matrix(c, c_prime)?;
    let (v, _, w) = sorted_svd(&m.0)?;
    Ok((c.matrix() * v - c_prime.matrix() * w).norm_squared())
}

/// Detector click probabilities `p_q = Σ_s |(R C)_{qs}|²`.
pub fn detection_probabilities(c: &AmplitudeMatrix, r: &Interferometer) -> Result<Vec<f64>> {
    let out = output_amplitudes(c, r)?;
    Ok(row_norms_sq(&out))
}

fn output_amplitudes(c: &AmplitudeMatrix, r: &Interferometer) -> Result<CMatrix> {
    if r.dim() != c.n_collectors() {
        return Err(Error::ShapeMismatch {
            expected: format!("{0}x{0} interferometer", c.n_collectors()),
            got: format!("{0}x{0}", r.dim()),
        });
    }
    Ok(r.matrix() * c.matrix())
}

fn row_norms_sq(m: &CMatrix) -> Vec<f64> {
    m.row_iter()
        .map(|row| row.iter().map(Complex64::norm_sqr).sum())
        .collect()
}

/// Classical (Bhattacharyya) fidelity of the click distributions at `r` and `r′`.
///
/// `Σ_q √(Σ_{s,t} |(RC)_{qs}|² |(RC′)_{qt}|²)`; the double sum factorizes into
/// `p_q p′_q`.
pub fn classical_fidelity(
    c: &AmplitudeMatrix,
    c_prime: &AmplitudeMatrix,
    r: &Interferometer,
) -> Result<f64> {
    check_same_shape(c, c_prime)?;
    let p = detection_probabilities(c, r)?;
    let q = detection_probabilities(c_prime, r)?;
    Ok(p.iter().zip(&q).map(|(a, b)| (a * b).sqrt()).sum())
}

/// One rung of a step-halving sequence.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StepEstimate {
    /// Displacement `δϑ` along the unit direction.
    pub step: f64,
    /// Raw estimate at this step, in units of the parameter.
    pub estimate: f64,
    /// Richardson extrapolant using this step and the previous one.
    pub extrapolated: Option<f64>,
}

/// Result of a limit evaluated by step halving and Richardson extrapolation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LimitEstimate {
    pub value: f64,
    pub steps: Vec<StepEstimate>,
    pub converged: bool,
}

/// Step schedule for the finite-difference limits.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepSchedule {
    pub initial: f64,
    pub max_halvings: usize,
    pub rtol: f64,
    /// Absolute agreement that also counts as converged (for zero information).
    pub atol: f64,
}

impl StepSchedule {
    /// `h₀ = 1e−3/k`, up to eight halvings, 1e−6 relative tolerance.
    pub fn for_scenario(scenario: &Scenario) -> Self {
        let k = scenario.k();
        Self {
            initial: 1e-3 / k,
            max_halvings: MAX_HALVINGS,
            rtol: CONVERGENCE_RTOL,
            atol: 1e-15 * k * k,
        }
    }
}

/// Evaluates `f(h)` on `h₀, h₀/2, …` assuming an even error series in `h`.
fn richardson<F>(schedule: &StepSchedule, mut f: F) -> Result<LimitEstimate>
where
    F: FnMut(f64) -> Result<f64>,
{
    let mut h = schedule.initial;
    let mut steps = vec![StepEstimate {
        step: h,
        estimate: f(h)?,
        extrapolated: None,
    }];
    let mut last: Option<f64> = None;
    for _ in 0..schedule.max_halvings {
        h *= 0.5;
        let e = f(h)?;
        let prev = steps.last().expect("non-empty").estimate;
        let r = (4.0 * e - prev) / 3.0;
        steps.push(StepEstimate {
            step: h,
            estimate: e,
            extrapolated: Some(r),
        });
        if let Some(l) = last {
            if (r - l).abs() <= schedule.rtol * r.abs().max(l.abs()) + schedule.atol {
                return Ok(LimitEstimate {
                    value: r,
                    steps,
                    converged: true,
                });
            }
        }
        last = Some(r);
    }
    let value = last.unwrap_or(steps[0].estimate);
    Ok(LimitEstimate {
        value,
        steps,
        converged: false,
    })
}

/// Fisher information for one parameter, with convergence diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FisherReport {
    pub parameter: String,
    pub theta_direction: GeneralizedCoordinate,
    /// `δϑ = scale · δθ`.
    pub scale: f64,
    pub qfi: Option<f64>,
    pub cfi: Option<f64>,
    pub saturation_ratio: Option<f64>,
    pub qfi_steps: Vec<StepEstimate>,
    pub cfi_steps: Vec<StepEstimate>,
    pub converged: bool,
    /// Ports where `p_q ≈ 0` but `∂p_q/∂ϑ` is not; the CFI is unstable there.
    pub divergent_ports: Vec<usize>,
}

impl FisherReport {
    fn empty(param: &Parameter) -> Self {
        Self {
            parameter: param.label.clone(),
            theta_direction: param.direction.clone(),
            scale: param.scale,
            qfi: None,
            cfi: None,
            saturation_ratio: None,
            qfi_steps: Vec::new(),
            cfi_steps: Vec::new(),
            converged: true,
            divergent_ports: Vec::new(),
        }
    }

    /// Merges a QFI-only and a CFI-only report and fills in `cfi/qfi`.
    pub fn combine(qfi: FisherReport, cfi: FisherReport) -> Self {
        let mut out = qfi;
        out.cfi = cfi.cfi;
        out.cfi_steps = cfi.cfi_steps;
        out.converged &= cfi.converged;
        out.divergent_ports = cfi.divergent_ports;
        out.saturation_ratio = match (out.qfi, out.cfi) {
            (Some(q), Some(c)) => Some(saturation_ratio(c, q)),
            _ => None,
        };
        out
    }
}

/// `cfi/qfi`, defined as 1 when both vanish.
pub fn saturation_ratio(cfi: f64, qfi: f64) -> f64 {
    if qfi == 0.0 && cfi == 0.0 {
        1.0
    } else {
        cfi / qfi
    }
}

fn displaced_amplitudes(
    scenario: &Scenario,
    a: &GeneralizedCoordinate,
    step: f64,
) -> Result<AmplitudeMatrix> {
    build_amplitude_matrix(&displace(scenario, a, step)?)
}

/// QFI of `ϑ` along the parameter direction at the scenario's configuration.
pub fn qfi_limit(
    scenario: &Scenario,
    a: &GeneralizedCoordinate,
    schedule: &StepSchedule,
) -> Result<LimitEstimate> {
    let c = build_amplitude_matrix(scenario)?;
    richardson(schedule, |h| {
        let plus = bures_distance_sq(&c, &displaced_amplitudes(scenario, a, h)?)?;
        let minus = bures_distance_sq(&c, &displaced_amplitudes(scenario, a, -h)?)?;
        Ok(2.0 * (plus + minus) / (h * h))
    })
}

/// Quantum Fisher information for a parameter.
pub fn qfi(scenario: &Scenario, param: &Parameter) -> Result<FisherReport> {
    qfi_with(scenario, param, &StepSchedule::for_scenario(scenario))
}

pub fn qfi_with(
    scenario: &Scenario,
    param: &Parameter,
    schedule: &StepSchedule,
) -> Result<FisherReport> {
    let lim = qfi_limit(scenario, &param.direction, schedule)?;
    let s2 = param.scale * param.scale;
    let mut report = FisherReport::empty(param);
    report.qfi = Some(floor_to_zero(lim.value, schedule) * s2);
    report.qfi_steps = scale_steps(lim.steps, s2);
    report.converged = lim.converged;
    Ok(report)
}

/// Limits within the absolute tolerance of zero are reported as exactly zero.
fn floor_to_zero(value: f64, schedule: &StepSchedule) -> f64 {
    if value <= schedule.atol {
        0.0
    } else {
        value
    }
}

fn scale_steps(steps: Vec<StepEstimate>, s2: f64) -> Vec<StepEstimate> {
    steps
        .into_iter()
        .map(|s| StepEstimate {
            step: s.step,
            estimate: s.estimate * s2,
            extrapolated: s.extrapolated.map(|e| e * s2),
        })
        .collect()
}

/// Classical Fisher information of photon counting behind `r`.
///
/// Bright ports contribute `(∂p)²/p` from a central difference. Dark ports
/// (`p < 1e−14`) contribute `2 ∂²p`, the limit of `(∂p)²/p` when `p` vanishes
/// quadratically; a dark port with a first derivative above `1e−10` is
/// reported in `divergent_ports`.
pub fn cfi(scenario: &Scenario, param: &Parameter, r: &Interferometer) -> Result<FisherReport> {
    cfi_with(scenario, param, r, &StepSchedule::for_scenario(scenario))
}

pub fn cfi_with(
    scenario: &Scenario,
    param: &Parameter,
    r: &Interferometer,
    schedule: &StepSchedule,
) -> Result<FisherReport> {
    let a = &param.direction;
    let p0 = detection_probabilities(&build_amplitude_matrix(scenario)?, r)?;
    let mut divergent = Vec::new();
    let lim = richardson(schedule, |h| {
        let pp = detection_probabilities(&displaced_amplitudes(scenario, a, h)?, r)?;
        let pm = detection_probabilities(&displaced_amplitudes(scenario, a, -h)?, r)?;
        let mut total = 0.0;
        for q in 0..p0.len() {
            let d1 = (pp[q] - pm[q]) / (2.0 * h);
            if p0[q] < DARK_PROBABILITY {
                if d1.abs() < DARK_DERIVATIVE {
                    let d2 = (pp[q] - 2.0 * p0[q] + pm[q]) / (h * h);
                    total += 2.0 * d2.max(0.0);
                } else if !divergent.contains(&q) {
                    divergent.push(q);
                }
            } else {
                total += d1 * d1 / p0[q];
            }
        }
        Ok(total)
    })?;
    let s2 = param.scale * param.scale;
    let mut report = FisherReport::empty(param);
    report.cfi = Some(floor_to_zero(lim.value, schedule) * s2);
    report.cfi_steps = scale_steps(lim.steps, s2);
    report.converged = lim.converged && divergent.is_empty();
    report.divergent_ports = divergent;
    Ok(report)
}

/// QFI, CFI and their ratio in one report.
pub fn fisher_report(
    scenario: &Scenario,
    param: &Parameter,
    r: &Interferometer,
) -> Result<FisherReport> {
    Ok(FisherReport::combine(
        qfi(scenario, param)?,
        cfi(scenario, param, r)?,
    ))
}

/// Mean and covariance of the paraxial generators over the uniform collector state.
///
/// `ĝ_x = k u/z0`, `ĝ_y = k v/z0`, `ĝ_z = k(u² + v²)/(2 z0²)`. Entries are
/// raw values; `ĝ_z` carries an extra inverse length relative to `ĝ_x`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GeneratorMoments {
    pub mean: [f64; 3],
    pub covariance: [[f64; 3]; 3],
}

pub fn generator_moments(collectors: &[Collector], k: f64, z0: f64) -> GeneratorMoments {
    let n = collectors.len() as f64;
    let gens: Vec<[f64; 3]> = collectors
        .iter()
        .map(|c| {
            [
                k * c.u / z0,
                k * c.v / z0,
                k * (c.u * c.u + c.v * c.v) / (2.0 * z0 * z0),
            ]
        })
        .collect();
    let mut mean = [0.0; 3];
    for g in &gens {
        for a in 0..3 {
            mean[a] += g[a] / n;
        }
    }
    let mut covariance = [[0.0; 3]; 3];
    for g in &gens {
        for a in 0..3 {
            for b in 0..3 {
                covariance[a][b] += (g[a] - mean[a]) * (g[b] - mean[b]) / n;
            }
        }
    }
    GeneratorMoments { mean, covariance }
}

/// Which paraxial closed form to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum QfiTarget {
    /// Coordinates of a single source: `4σ`.
    SingleSource,
    /// Separation `r₁ − r₂` of two equal sources: `σ`.
    TwoSourceSeparation,
    /// Centroid of two equal sources on inversion-symmetric collectors: `4σ`.
    TwoSourceCentroid,
}

impl QfiTarget {
    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "single" | "single-source" => Ok(Self::SingleSource),
            "separation" | "two-source-separation" => Ok(Self::TwoSourceSeparation),
            "centroid" | "two-source-centroid" => Ok(Self::TwoSourceCentroid),
            _ => Err(Error::Validation(format!(
                "unknown QFI matrix target '{name}'"
            ))),
        }
    }

    fn tangent(self, axis: usize) -> Vec<f64> {
        match self {
            Self::SingleSource => {
                let mut t = vec![0.0; 3];
                t[axis] = 1.0;
                t
            }
            Self::TwoSourceSeparation => {
                let mut t = vec![0.0; 6];
                t[axis] = 0.5;
                t[3 + axis] = -0.5;
                t
            }
            Self::TwoSourceCentroid => {
                let mut t = vec![0.0; 6];
                t[axis] = 1.0;
                t[3 + axis] = 1.0;
                t
            }
        }
    }

    fn n_sources(self) -> usize {
        match self {
            Self::SingleSource => 1,
            _ => 2,
        }
    }
}

/// Closed-form 3×3 QFI matrix over `(x, y, z)` from the generator covariance.
///
/// The centroid form neglects terms of order `(k Δr ρ/z0)²` and assumes every
/// collector `w` has a partner at `−w`; its transverse block is `4k²⟨u_a u_b⟩/z0²`
/// and the axial entries follow the single-source form.
pub fn paraxial_qfi_matrix(
    collectors: &[Collector],
    k: f64,
    z0: f64,
    target: QfiTarget,
) -> Result<[[f64; 3]; 3]> {
    if collectors.is_empty() {
        return Err(Error::Validation(
            "at least one collector is required".into(),
        ));
    }
    if target == QfiTarget::TwoSourceCentroid {
        let scale = collectors
            .iter()
            .map(|c| c.u.abs().max(c.v.abs()))
            .fold(0.0, f64::max);
        if !is_inversion_symmetric(collectors, 1e-9 * scale.max(1.0)) {
            return Err(Error::Precondition(
                "centroid QFI closed form requires an inversion-symmetric collector array \
                 (every collector at w paired with one at -w)"
                    .into(),
            ));
        }
    }
    let sigma = generator_moments(collectors, k, z0).covariance;
    let factor = match target {
        QfiTarget::SingleSource | QfiTarget::TwoSourceCentroid => 4.0,
        QfiTarget::TwoSourceSeparation => 1.0,
    };
    Ok(sigma.map(|row| row.map(|v| factor * v)))
}

/// Elementwise comparison of a closed form against the trace-norm limit.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConsistencyReport {
    pub target: QfiTarget,
    pub closed_form: [[f64; 3]; 3],
    pub finite_difference: [[f64; 3]; 3],
    /// `|fd − cf| / max(|cf_ab|, √|cf_aa cf_bb|)`; zero when both sides vanish.
    pub relative_error: [[f64; 3]; 3],
    pub max_relative_error: f64,
    pub converged: bool,
}

fn fd_qfi_along(scenario: &Scenario, tangent: Vec<f64>) -> Result<(f64, bool)> {
    if tangent.iter().all(|t| *t == 0.0) {
        return Ok((0.0, true));
    }
    let p = Parameter::from_tangent("polarization", tangent)?;
    let r = qfi(scenario, &p)?;
    Ok((r.qfi.unwrap_or(0.0), r.converged))
}

/// Compares [`paraxial_qfi_matrix`] with finite-difference QFIs on the same
/// scenario, using the polarization identity for off-diagonal entries.
pub fn qfi_matrix_consistency(scenario: &Scenario, target: QfiTarget) -> Result<ConsistencyReport> {
    if scenario.n_sources() != target.n_sources() {
        return Err(Error::Precondition(format!(
            "{target:?} needs {} source(s), scenario has {}",
            target.n_sources(),
            scenario.n_sources()
        )));
    }
    let closed = paraxial_qfi_matrix(scenario.collectors(), scenario.k(), scenario.z0(), target)?;
    let mut fd = [[0.0; 3]; 3];
    let mut converged = true;
    for a in 0..3 {
        let (v, c) = fd_qfi_along(scenario, target.tangent(a))?;
        fd[a][a] = v;
        converged &= c;
    }
    for a in 0..3 {
        for b in (a + 1)..3 {
            let sum: Vec<f64> = target
                .tangent(a)
                .iter()
                .zip(target.tangent(b))
                .map(|(x, y)| x + y)
                .collect();
            let (v, c) = fd_qfi_along(scenario, sum)?;
            converged &= c;
            let off = 0.5 * (v - fd[a][a] - fd[b][b]);
            fd[a][b] = off;
            fd[b][a] = off;
        }
    }
    let mut rel = [[0.0; 3]; 3];
    let mut worst: f64 = 0.0;
    for a in 0..3 {
        for b in 0..3 {
            let denom = closed[a][b]
                .abs()
                .max((closed[a][a] * closed[b][b]).abs().sqrt());
            let diff = (fd[a][b] - closed[a][b]).abs();
            rel[a][b] = if denom > 0.0 {
                diff / denom
            } else if diff <= 1e-15 * scenario.k() * scenario.k() {
                0.0
            } else {
                f64::INFINITY
            };
            worst = worst.max(rel[a][b]);
        }
    }
    Ok(ConsistencyReport {
        target,
        closed_form: closed,
        finite_difference: fd,
        relative_error: rel,
        max_relative_error: worst,
        converged,
    })
}

/// Two-collector beam-splitter phase from the closed form for axial separation
/// at `Δz ≈ 0`: the angle whose sine and cosine are proportional to
/// `Δx cos c` and `−(u₁ + u₂) sin c`, with `c = kΔx(u₁ − u₂)/(2 z0)`.
///
/// This is the phase of steepest `∂p₁/∂Δz`. It maximizes the CFI when
/// `u₁ + u₂ = 0`, where it equals `π/2`.
pub fn axial_phase_two_collector(delta_x: f64, u1: f64, u2: f64, k: f64, z0: f64) -> f64 {
    let c = k * delta_x * (u1 - u2) / (2.0 * z0);
    let s = u1 + u2;
    let norm = (delta_x * delta_x * c.cos().powi(2) + s * s * c.sin().powi(2)).sqrt();
    let first = delta_x * c.cos() / norm;
    let second = -2f64.sqrt() * s * c.sin()
        / ((delta_x * delta_x - s * s) * (2.0 * c).cos() + delta_x * delta_x + s * s).sqrt();
    first.atan2(second)
}
