//! Linear interferometers on collector modes and synthesis of the interferometer
//! aligned with a pair of source configurations.
//!
//! Convention: an interferometer maps collector amplitudes to detector
//! amplitudes as `out = R · in`, so detector `q` sees row `q` of `R C`.
//!
//! Synthesis follows the SVD/QR route: take the SVD `V† M W = D` of the
//! overlap matrix, form `A = C(r) V`, and choose `R` so that `R A` is upper
//! triangular with a real nonnegative diagonal. Scalar products are preserved,
//! so `R B` with `B = C(r′) W` comes out lower triangular and
//! `D_s = |(RA)_ss| |(RB)_ss|`. The classical fidelity equals `‖M‖₁` when
//! `R A` and `R B` are additionally diagonal on their first `N_S` rows, which
//! holds for a single source and for symmetric equal-weight pairs; in general
//! the off-diagonal entries leave `f_c > ‖M‖₁`.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fisher::{self, classical_fidelity, overlap_matrix, quantum_fidelity, OverlapMatrix};
use crate::geometry::{build_amplitude_matrix, displace, AmplitudeMatrix, Parameter, Scenario};
use crate::linalg::{householder_triangularize, sorted_svd, unitarity_residual, CMatrix};

/// Unitarity tolerance on `‖R†R − I‖_F`.
pub const UNITARITY_TOL: f64 = 1e-10;

/// Where an interferometer matrix came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Provenance {
    Identity,
    /// Phase `alpha` on the second input followed by a 50:50 beam splitter.
    BeamSplitterWithPhase {
        alpha: f64,
    },
    /// Discrete Fourier transform over all modes.
    Qft,
    /// Built by [`synthesize_optimal`]; `pivots` records column pivoting, if any.
    Synthesized {
        pivots: Option<Vec<usize>>,
    },
    UserSupplied,
}

/// A validated `N_C × N_C` unitary.
#[derive(Debug, Clone, PartialEq)]
pub struct Interferometer {
    matrix: CMatrix,
    provenance: Provenance,
}

impl Interferometer {
    pub fn new(matrix: CMatrix, provenance: Provenance) -> Result<Self> {
        if !matrix.is_square() || matrix.nrows() == 0 {
            return Err(Error::ShapeMismatch {
                expected: "non-empty square matrix".into(),
                got: format!("{}x{}", matrix.nrows(), matrix.ncols()),
            });
        }
        let residual = unitarity_residual(&matrix);
        if !(residual < UNITARITY_TOL) {
            return Err(Error::NotUnitary { residual });
        }
        Ok(Self { matrix, provenance })
    }

    pub fn identity(n: usize) -> Self {
        Self {
            matrix: CMatrix::identity(n, n),
            provenance: Provenance::Identity,
        }
    }

    /// `(1/√2) [[1, e^{iα}], [1, −e^{iα}]]`.
    pub fn beam_splitter(alpha: f64) -> Self {
        let s = 1.0 / 2f64.sqrt();
        let ph = Complex64::from_polar(s, alpha);
        let one = Complex64::new(s, 0.0);
        Self {
            matrix: CMatrix::from_row_slice(2, 2, &[one, ph, one, -ph]),
            provenance: Provenance::BeamSplitterWithPhase { alpha },
        }
    }

    /// Entry `(j, q) = e^{2πi jq/n}/√n`.
    pub fn qft(n: usize) -> Self {
        let s = 1.0 / (n as f64).sqrt();
        let matrix = CMatrix::from_fn(n, n, |j, q| {
            // Reduce jq mod n first so the phase is exact for small n.
            let t = ((j * q) % n) as f64 / n as f64;
            match (4.0 * t).fract() == 0.0 {
                true => [
                    Complex64::new(s, 0.0),
                    Complex64::new(0.0, s),
                    Complex64::new(-s, 0.0),
                    Complex64::new(0.0, -s),
                ][(4.0 * t) as usize],
                false => Complex64::from_polar(s, 2.0 * PI * t),
            }
        });
        Self {
            matrix,
            provenance: Provenance::Qft,
        }
    }

    /// Builtin by name: `identity`, `qft`, `bs` / `bs_phase` (α = 0) or `bs:<α>`.
    pub fn builtin(name: &str, n: usize) -> Result<Self> {
        let (kind, arg) = match name.split_once(':') {
            Some((k, a)) => (k, Some(a)),
            None => (name, None),
        };
        match kind {
            "identity" if arg.is_none() => Ok(Self::identity(n)),
            "qft" if arg.is_none() => Ok(Self::qft(n)),
            "bs" | "bs_phase" => {
                if n != 2 {
                    return Err(Error::Validation(format!(
                        "beam splitter needs exactly two collectors, scenario has {n}"
                    )));
                }
                let alpha = match arg {
                    Some(a) => a.trim().parse::<f64>().map_err(|e| {
                        Error::Validation(format!("bad beam splitter phase '{a}': {e}"))
                    })?,
                    None => 0.0,
                };
                Ok(Self::beam_splitter(alpha))
            }
            _ => Err(Error::Validation(format!(
                "unknown interferometer '{name}'"
            ))),
        }
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(InterferometerJson::from(self)).expect("interferometer serializes")
    }

    /// Parses the JSON form; the result is tagged `UserSupplied` and revalidated.
    pub fn from_json_str(text: &str) -> Result<Self> {
        let parsed: InterferometerJson =
            serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        parsed.into_user_supplied()
    }

    pub fn from_json_value(value: serde_json::Value) -> Result<Self> {
        let parsed: InterferometerJson =
            serde_json::from_value(value).map_err(|e| Error::Parse(e.to_string()))?;
        parsed.into_user_supplied()
    }
}

/// Wire form: row-major `[re, im]` pairs plus the dimension and provenance.
#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct InterferometerJson {
    dim: usize,
    // informational; anything read back is user supplied
    #[serde(default)]
    provenance: Option<Provenance>,
    matrix: Vec<[f64; 2]>,
}

impl From<&Interferometer> for InterferometerJson {
    fn from(r: &Interferometer) -> Self {
        let n = r.dim();
        let mut matrix = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                let z = r.matrix[(i, j)];
                matrix.push([z.re, z.im]);
            }
        }
        Self {
            dim: n,
            provenance: Some(r.provenance.clone()),
            matrix,
        }
    }
}

impl InterferometerJson {
    fn into_user_supplied(self) -> Result<Interferometer> {
        let n = self.dim;
        if self.matrix.len() != n * n {
            return Err(Error::ShapeMismatch {
                expected: format!("{} entries", n * n),
                got: format!("{}", self.matrix.len()),
            });
        }
        let entries: Vec<Complex64> = self
            .matrix
            .iter()
            .map(|p| Complex64::new(p[0], p[1]))
            .collect();
        Interferometer::new(
            CMatrix::from_row_slice(n, n, &entries),
            Provenance::UserSupplied,
        )
    }
}

/// `V† M W = diag(D)` with `D` sorted in descending order.
#[derive(Debug, Clone, PartialEq)]
pub struct SvdAlignment {
    pub v: CMatrix,
    pub w: CMatrix,
    pub d: Vec<f64>,
}

pub fn svd_alignment(m: &OverlapMatrix) -> Result<SvdAlignment> {
    let (v, d, w) = sorted_svd(m.matrix())?;
    Ok(SvdAlignment { v, w, d })
}

/// Everything produced while synthesizing `R` for a pair of configurations.
#[derive(Debug, Clone)]
pub struct Synthesis {
    pub interferometer: Interferometer,
    pub alignment: SvdAlignment,
    /// `R A`, columns in pivot order.
    pub a_prime: CMatrix,
    /// `R B`, columns in pivot order.
    pub b_prime: CMatrix,
    pub pivots: Option<Vec<usize>>,
}

/// Relative size below which a triangular diagonal entry counts as rank loss.
const RANK_TOL: f64 = 1e-12;

/// Synthesizes the interferometer for `C(r)`, `C(r′)`.
pub fn synthesize_optimal(
    c: &AmplitudeMatrix,
    c_prime: &AmplitudeMatrix,
) -> Result<Interferometer> {
    Ok(synthesize_detailed(c, c_prime)?.interferometer)
}

pub fn synthesize_detailed(c: &AmplitudeMatrix, c_prime: &AmplitudeMatrix) -> Result<Synthesis> {
    let (n_c, n_s) = (c.n_collectors(), c.n_sources());
    if n_c < n_s {
        return Err(Error::Precondition(format!(
            "need at least as many collectors as sources ({n_c} < {n_s})"
        )));
    }
    let m = overlap_matrix(c, c_prime)?;
    let alignment = svd_alignment(&m)?;
    let a = c.matrix() * &alignment.v;
    let b = c_prime.matrix() * &alignment.w;

    let mut tri = householder_triangularize(&a, false);
    let scale = a.norm().max(f64::MIN_POSITIVE);
    let rank_deficient = |q: &CMatrix, cols: &CMatrix| {
        let t = q * cols;
        (0..n_s).any(|s| t[(s, s)].norm() < RANK_TOL * scale)
    };
    let mut pivots = None;
    if rank_deficient(&tri.q, &a) {
        tri = householder_triangularize(&a, true);
        log::warn!(
            "amplitude matrix is rank deficient; triangularized with column pivots {:?}",
            tri.pivots
        );
        pivots = Some(tri.pivots.clone());
    }

    let a_cols = a.select_columns(&tri.pivots);
    let b_cols = b.select_columns(&tri.pivots);
    let a_prime = &tri.q * a_cols;
    let b_prime = &tri.q * b_cols;
    let interferometer = Interferometer::new(
        tri.q,
        Provenance::Synthesized {
            pivots: pivots.clone(),
        },
    )?;
    Ok(Synthesis {
        interferometer,
        alignment,
        a_prime,
        b_prime,
        pivots,
    })
}

/// Displacement used by [`design`]: `1e−4` of the scenario's natural length.
pub fn default_design_step(scenario: &Scenario) -> f64 {
    1e-4 * scenario.natural_length()
}

/// Synthesizes the interferometer for displacing `scenario` along `param` by
/// [`default_design_step`].
pub fn design(scenario: &Scenario, param: &Parameter) -> Result<Synthesis> {
    let step = default_design_step(scenario);
    let c = build_amplitude_matrix(scenario)?;
    let c2 = build_amplitude_matrix(&displace(scenario, &param.direction, step)?)?;
    synthesize_detailed(&c, &c2)
}

/// Tolerances used by [`verify_saturation`].
pub mod tolerance {
    pub const LOWER_RA: f64 = 1e-10;
    pub const UPPER_RB: f64 = 1e-9;
    pub const DIAGONAL: f64 = 1e-9;
    pub const SCALAR_PRODUCT: f64 = 1e-10;
    pub const FIDELITY: f64 = 1e-9;
    pub const RATIO_LOW: f64 = 1e-5;
    pub const RATIO_HIGH: f64 = 1e-6;
}

/// Structural and information-theoretic checks on a synthesized interferometer.
#[derive(Debug, Clone, Serialize)]
pub struct SaturationReport {
    pub step: f64,
    pub quantum_fidelity: f64,
    pub classical_fidelity: f64,
    /// `(f_c − f)/(1 − f)`; zero when `1 − f` is at rounding level.
    pub relative_fidelity_gap: f64,
    pub qfi: f64,
    pub cfi: f64,
    /// `cfi / qfi`.
    pub saturation_ratio: f64,
    pub converged: bool,
    pub unitarity_residual: f64,
    /// Largest `|(RA)_ij|` with `i > j`.
    pub lower_residual_ra: f64,
    /// Largest `|(RB)_ij|` with `j > i`.
    pub upper_residual_rb: f64,
    /// Largest `|D_s − |(RA)_ss| |(RB)_ss||`.
    pub diagonal_residual: f64,
    /// Largest deviation of `A†B` and `(RA)†(RB)` from `diag(D)`.
    pub scalar_product_residual: f64,
    pub pivots: Option<Vec<usize>>,
    pub interferometer: serde_json::Value,
    pub failures: Vec<String>,
}

impl SaturationReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

/// Synthesizes `R` from `C(r)` and `C(r + a δϑ)` and checks that it saturates.
///
/// Returns [`Error::Saturation`] carrying the full report when any check fails.
pub fn verify_saturation(
    scenario: &Scenario,
    param: &Parameter,
    step: f64,
) -> Result<SaturationReport> {
    let report = saturation_report(scenario, param, step)?;
    if report.passed() {
        Ok(report)
    } else {
        Err(Error::Saturation(Box::new(report)))
    }
}

/// Same as [`verify_saturation`] but returns the report whether or not checks pass.
pub fn saturation_report(
    scenario: &Scenario,
    param: &Parameter,
    step: f64,
) -> Result<SaturationReport> {
    let c = build_amplitude_matrix(scenario)?;
    let c2 = build_amplitude_matrix(&displace(scenario, &param.direction, step)?)?;
    let syn = synthesize_detailed(&c, &c2)?;
    let r = &syn.interferometer;
    let n_s = c.n_sources();
    let d = &syn.alignment.d;
    let pivot_order: Vec<usize> = syn.pivots.clone().unwrap_or_else(|| (0..n_s).collect());

    let mut lower_ra: f64 = 0.0;
    let mut upper_rb: f64 = 0.0;
    for i in 0..syn.a_prime.nrows() {
        for j in 0..n_s {
            if i > j {
                lower_ra = lower_ra.max(syn.a_prime[(i, j)].norm());
            }
            if j > i {
                upper_rb = upper_rb.max(syn.b_prime[(i, j)].norm());
            }
        }
    }
    let diagonal = (0..n_s)
        .map(|s| {
            (d[pivot_order[s]] - syn.a_prime[(s, s)].norm() * syn.b_prime[(s, s)].norm()).abs()
        })
        .fold(0.0, f64::max);

    let a = c.matrix() * &syn.alignment.v;
    let b = c2.matrix() * &syn.alignment.w;
    let before = a.adjoint() * &b;
    let after = syn.a_prime.adjoint() * &syn.b_prime;
    let mut scalar: f64 = 0.0;
    for s in 0..n_s {
        for t in 0..n_s {
            let want = if s == t { d[s] } else { 0.0 };
            scalar = scalar.max((before[(s, t)] - Complex64::new(want, 0.0)).norm());
            let want_after = if s == t { d[pivot_order[s]] } else { 0.0 };
            scalar = scalar.max((after[(s, t)] - Complex64::new(want_after, 0.0)).norm());
        }
    }

    let fq = quantum_fidelity(&overlap_matrix(&c, &c2)?)?;
    let fc = classical_fidelity(&c, &c2, r)?;
    let gap = if 1.0 - fq > 1e-13 {
        (fc - fq) / (1.0 - fq)
    } else {
        0.0
    };
    let qfi_report = fisher::qfi(scenario, param)?;
    let cfi_report = fisher::cfi(scenario, param, r)?;
    let qfi = qfi_report.qfi.unwrap_or(0.0);
    let cfi = cfi_report.cfi.unwrap_or(0.0);
    let ratio = fisher::saturation_ratio(cfi, qfi);
    let unitarity = unitarity_residual(r.matrix());

    let mut failures = Vec::new();
    if unitarity >= UNITARITY_TOL {
        failures.push(format!("R not unitary: residual {unitarity:.3e}"));
    }
    if lower_ra >= tolerance::LOWER_RA {
        failures.push(format!(
            "R·A not upper triangular: max below-diagonal {lower_ra:.3e}"
        ));
    }
    if upper_rb >= tolerance::UPPER_RB {
        failures.push(format!(
            "R·B not lower triangular: max above-diagonal {upper_rb:.3e}"
        ));
    }
    if diagonal >= tolerance::DIAGONAL {
        failures.push(format!(
            "D_s != |a'_ss||b'_ss|: max deviation {diagonal:.3e}"
        ));
    }
    if scalar >= tolerance::SCALAR_PRODUCT {
        failures.push(format!(
            "scalar products not preserved: max deviation {scalar:.3e}"
        ));
    }
    if (fc - fq).abs() > tolerance::FIDELITY {
        failures.push(format!(
            "classical fidelity {fc:.15} differs from quantum fidelity {fq:.15}"
        ));
    }
    if step != 0.0 && !(1.0 - tolerance::RATIO_LOW..=1.0 + tolerance::RATIO_HIGH).contains(&ratio) {
        failures.push(format!("CFI/QFI = {ratio:.9} outside [1-1e-5, 1+1e-6]"));
    }
    if !qfi_report.converged || !cfi_report.converged {
        failures.push("finite-difference limits did not converge".into());
    }

    Ok(SaturationReport {
        step,
        quantum_fidelity: fq,
        classical_fidelity: fc,
        relative_fidelity_gap: gap,
        qfi,
        cfi,
        saturation_ratio: ratio,
        converged: qfi_report.converged && cfi_report.converged,
        unitarity_residual: unitarity,
        lower_residual_ra: lower_ra,
        upper_residual_rb: upper_rb,
        diagonal_residual: diagonal,
        scalar_product_residual: scalar,
        pivots: syn.pivots.clone(),
        interferometer: r.to_json(),
        failures,
    })
}
