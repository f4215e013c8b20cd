//! Source and collector geometry, the single-photon amplitude model and
//! generalized coordinates.
//!
//! A photon from source `s` reaches collector `j` with amplitude
//! `γ(w_j, r_s)`. The amplitude matrix has entries `c_js = √p(s) γ(w_j, r_s)`,
//! one row per collector and one column per source, and every column is
//! normalized so that its squared norm equals the emission weight `p(s)`.

use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::CMatrix;

/// Paraxial scenarios warn when any source coordinate exceeds this fraction of `z0`.
pub const PARAXIAL_WARN_RATIO: f64 = 0.1;

const COLUMN_NORM_FLOOR: f64 = 1e-300;

/// Which amplitude model to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// Phase from the full optical path length, modulus proportional to 1/distance.
    Exact,
    /// Phases linear in the source coordinates, uniform modulus `1/√N_C`.
    Paraxial,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Mode::Exact => f.write_str("exact"),
            Mode::Paraxial => f.write_str("paraxial"),
        }
    }
}

/// A point emitter at `(x, y, z0 + z)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourcePoint {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub weight: f64,
}

impl SourcePoint {
    pub fn new(x: f64, y: f64, z: f64, weight: f64) -> Self {
        Self { x, y, z, weight }
    }
}

/// A light collector at `(u, v, 0)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Collector {
    pub u: f64,
    pub v: f64,
}

impl Collector {
    pub fn new(u: f64, v: f64) -> Self {
        Self { u, v }
    }

    fn radius_sq(&self) -> f64 {
        self.u * self.u + self.v * self.v
    }
}

/// A complete problem instance. Weights are normalized to sum to one on construction.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Scenario {
    mode: Mode,
    k: f64,
    z0: f64,
    sources: Vec<SourcePoint>,
    collectors: Vec<Collector>,
}

impl Scenario {
    pub fn new(
        mode: Mode,
        k: f64,
        z0: f64,
        sources: Vec<SourcePoint>,
        collectors: Vec<Collector>,
    ) -> Result<Self> {
        if !(k.is_finite() && k > 0.0) {
            return Err(Error::Validation(format!(
                "wavenumber k must be positive, got {k}"
            )));
        }
        if !(z0.is_finite() && z0 > 0.0) {
            return Err(Error::Validation(format!(
                "reference distance z0 must be positive, got {z0}"
            )));
        }
        if sources.is_empty() {
            return Err(Error::Validation("at least one source is required".into()));
        }
        if collectors.is_empty() {
            return Err(Error::Validation(
                "at least one collector is required".into(),
            ));
        }
        for (i, s) in sources.iter().enumerate() {
            if ![s.x, s.y, s.z].iter().all(|c| c.is_finite()) {
                return Err(Error::Validation(format!(
                    "source {i} has a non-finite coordinate"
                )));
            }
            if !(s.weight.is_finite() && s.weight > 0.0) {
                return Err(Error::Validation(format!(
                    "source {i} weight must be positive, got {}",
                    s.weight
                )));
            }
        }
        for (j, c) in collectors.iter().enumerate() {
            if !(c.u.is_finite() && c.v.is_finite()) {
                return Err(Error::Validation(format!(
                    "collector {j} has a non-finite coordinate"
                )));
            }
        }

        let total: f64 = sources.iter().map(|s| s.weight).sum();
        let sources: Vec<SourcePoint> = sources
            .into_iter()
            .map(|s| SourcePoint {
                weight: s.weight / total,
                ..s
            })
            .collect();

        let scenario = Self {
            mode,
            k,
            z0,
            sources,
            collectors,
        };
        if mode == Mode::Paraxial {
            let ratio = scenario.max_source_offset() / z0;
            if ratio > PARAXIAL_WARN_RATIO {
                log::warn!(
                    "paraxial scenario has source offsets up to {ratio:.3} z0; the approximation assumes offsets << z0"
                );
            }
        }
        Ok(scenario)
    }

    /// Builds a scenario where every source has weight `1/N_S`.
    pub fn uniform(
        mode: Mode,
        k: f64,
        z0: f64,
        positions: &[[f64; 3]],
        collectors: Vec<Collector>,
    ) -> Result<Self> {
        let sources = positions
            .iter()
            .map(|p| SourcePoint::new(p[0], p[1], p[2], 1.0))
            .collect();
        Self::new(mode, k, z0, sources, collectors)
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn k(&self) -> f64 {
        self.k
    }

    pub fn z0(&self) -> f64 {
        self.z0
    }

    pub fn sources(&self) -> &[SourcePoint] {
        &self.sources
    }

    pub fn collectors(&self) -> &[Collector] {
        &self.collectors
    }

    pub fn n_sources(&self) -> usize {
        self.sources.len()
    }

    pub fn n_collectors(&self) -> usize {
        self.collectors.len()
    }

    pub fn with_mode(&self, mode: Mode) -> Self {
        Self {
            mode,
            ..self.clone()
        }
    }

    pub fn with_collectors(&self, collectors: Vec<Collector>) -> Result<Self> {
        Self::new(self.mode, self.k, self.z0, self.sources.clone(), collectors)
    }

    fn max_source_offset(&self) -> f64 {
        self.sources
            .iter()
            .flat_map(|s| [s.x.abs(), s.y.abs(), s.z.abs()])
            .fold(0.0, f64::max)
    }

    /// Largest collector distance from the optical axis.
    pub fn max_collector_radius(&self) -> f64 {
        self.collectors
            .iter()
            .map(|c| c.radius_sq())
            .fold(0.0, f64::max)
            .sqrt()
    }

    /// Length over which a source displacement shifts collector phases by about one radian.
    pub fn natural_length(&self) -> f64 {
        let rho = self.max_collector_radius();
        if rho > 0.0 {
            self.z0 / (self.k * rho)
        } else {
            1.0 / self.k
        }
    }

    /// Source coordinates flattened as `(x_1, y_1, z_1, …, x_N, y_N, z_N)`.
    pub fn coordinates(&self) -> Vec<f64> {
        self.sources.iter().flat_map(|s| [s.x, s.y, s.z]).collect()
    }
}

/// Single-photon amplitude `γ(w_j, r_s)` before column normalization.
///
/// Exact mode returns `e^{ik·d}/d` with `d` the source–collector distance.
/// Paraxial mode returns the already normalized `e^{iφ}/√N_C` with
/// `φ = −k(u x + v y)/z0 − k z (u² + v²)/(2 z0²)`.
pub fn amplitude(
    collector: &Collector,
    source: &SourcePoint,
    k: f64,
    z0: f64,
    mode: Mode,
    n_collectors: usize,
) -> Result<Complex64> {
    match mode {
        Mode::Exact => {
            let d = distance(collector, source, z0);
            if d == 0.0 {
                return Err(Error::DegenerateGeometry(format!(
                    "source at ({}, {}, {}) coincides with collector at ({}, {})",
                    source.x,
                    source.y,
                    z0 + source.z,
                    collector.u,
                    collector.v
                )));
            }
            Ok(Complex64::from_polar(1.0 / d, k * d))
        }
        Mode::Paraxial => {
            let phase = paraxial_phase(collector, source, k, z0);
            Ok(Complex64::from_polar(
                1.0 / (n_collectors as f64).sqrt(),
                phase,
            ))
        }
    }
}

fn distance(collector: &Collector, source: &SourcePoint, z0: f64) -> f64 {
    let dx = source.x - collector.u;
    let dy = source.y - collector.v;
    let dz = z0 + source.z;
    (dx * dx + dy * dy + dz * dz).sqrt()
}

/// `d − z0`, computed without cancellation.
fn path_excess(collector: &Collector, source: &SourcePoint, z0: f64) -> f64 {
    let dx = source.x - collector.u;
    let dy = source.y - collector.v;
    let d = distance(collector, source, z0);
    (dx * dx + dy * dy + source.z * (2.0 * z0 + source.z)) / (d + z0)
}

fn paraxial_phase(collector: &Collector, source: &SourcePoint, k: f64, z0: f64) -> f64 {
    -k * (collector.u * source.x + collector.v * source.y) / z0
        - k * source.z * collector.radius_sq() / (2.0 * z0 * z0)
}

/// The `N_C × N_S` matrix `C(r)`; column `s` has squared norm `p(s)`.
#[derive(Debug, Clone, PartialEq)]
pub struct AmplitudeMatrix(CMatrix);

impl AmplitudeMatrix {
    /// Wraps a raw matrix without renormalizing it.
    pub fn from_matrix(m: CMatrix) -> Self {
        Self(m)
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.0
    }

    pub fn into_matrix(self) -> CMatrix {
        self.0
    }

    pub fn n_collectors(&self) -> usize {
        self.0.nrows()
    }

    pub fn n_sources(&self) -> usize {
        self.0.ncols()
    }
}

/// Builds `C(r)` for a scenario.
///
/// In exact mode the phase common to every entry, `k·z0`, is dropped so the
/// remaining phases stay small; fidelities and probabilities are unaffected.
pub fn build_amplitude_matrix(scenario: &Scenario) -> Result<AmplitudeMatrix> {
    let n_c = scenario.n_collectors();
    let n_s = scenario.n_sources();
    let mut m = CMatrix::zeros(n_c, n_s);
    for (s, src) in scenario.sources.iter().enumerate() {
        for (j, col) in scenario.collectors.iter().enumerate() {
            m[(j, s)] = match scenario.mode {
                Mode::Exact => {
                    let d = distance(col, src, scenario.z0);
                    if d == 0.0 {
                        return Err(Error::DegenerateGeometry(format!(
                            "source {s} coincides with collector {j}"
                        )));
                    }
                    Complex64::from_polar(1.0 / d, scenario.k * path_excess(col, src, scenario.z0))
                }
                Mode::Paraxial => {
                    Complex64::from_polar(1.0, paraxial_phase(col, src, scenario.k, scenario.z0))
                }
            };
        }
        let norm = m.column(s).norm();
        if !(norm > COLUMN_NORM_FLOOR) || !norm.is_finite() {
            return Err(Error::DegenerateGeometry(format!(
                "amplitude column for source {s} has norm {norm:e}"
            )));
        }
        let scale = src.weight.sqrt() / norm;
        m.column_mut(s).scale_mut(scale);
    }
    Ok(AmplitudeMatrix(m))
}

/// A unit vector `a` of length `3·N_S`; the coordinate is `ϑ = a·r`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct GeneralizedCoordinate(Vec<f64>);

impl GeneralizedCoordinate {
    /// Accepts a vector that is already unit length (to 1e-12).
    pub fn new(a: Vec<f64>) -> Result<Self> {
        let norm = euclidean(&a);
        if a.is_empty() || !a.len().is_multiple_of(3) {
            return Err(Error::Validation(format!(
                "direction length must be a positive multiple of 3, got {}",
                a.len()
            )));
        }
        if !norm.is_finite() || (norm - 1.0).abs() > 1e-12 {
            return Err(Error::Validation(format!(
                "direction must have unit norm, got {norm}"
            )));
        }
        Ok(Self(a))
    }

    /// Rescales a nonzero vector to unit length.
    pub fn normalized(a: Vec<f64>) -> Result<Self> {
        let norm = euclidean(&a);
        if !(norm.is_finite() && norm > 0.0) {
            return Err(Error::Validation(
                "direction must be a finite nonzero vector".into(),
            ));
        }
        Self::new(a.into_iter().map(|c| c / norm).collect())
    }

    pub fn components(&self) -> &[f64] {
        &self.0
    }

    pub fn n_sources(&self) -> usize {
        self.0.len() / 3
    }
}

impl TryFrom<Vec<f64>> for GeneralizedCoordinate {
    type Error = Error;

    fn try_from(a: Vec<f64>) -> Result<Self> {
        Self::new(a)
    }
}

impl From<GeneralizedCoordinate> for Vec<f64> {
    fn from(a: GeneralizedCoordinate) -> Self {
        a.0
    }
}

fn euclidean(a: &[f64]) -> f64 {
    a.iter().map(|c| c * c).sum::<f64>().sqrt()
}

/// A physical parameter `θ` whose variation moves the sources along a
/// generalized coordinate: `δϑ = scale · δθ`.
///
/// Fisher information for `θ` is `scale²` times the information for `ϑ`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Parameter {
    pub label: String,
    pub direction: GeneralizedCoordinate,
    pub scale: f64,
}

impl Parameter {
    /// Parameter with tangent `dr/dθ = tangent`.
    pub fn from_tangent(label: impl Into<String>, tangent: Vec<f64>) -> Result<Self> {
        let scale = euclidean(&tangent);
        let direction = GeneralizedCoordinate::normalized(tangent)?;
        Ok(Self {
            label: label.into(),
            direction,
            scale,
        })
    }

    /// Named presets: `centroid-{x,y,z}`, `separation-{x,y,z}` (two sources),
    /// `source<i>-{x,y,z}` (1-based), or a comma separated vector which is
    /// normalized and used with unit scale.
    pub fn parse(arg: &str, n_sources: usize) -> Result<Self> {
        let arg = arg.trim();
        if arg.contains(',') || arg.parse::<f64>().is_ok() {
            let values = arg
                .split(',')
                .map(|t| t.trim().parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| Error::Validation(format!("bad direction vector '{arg}': {e}")))?;
            if values.len() != 3 * n_sources {
                return Err(Error::Validation(format!(
                    "direction vector has {} components, scenario needs {}",
                    values.len(),
                    3 * n_sources
                )));
            }
            let direction = GeneralizedCoordinate::normalized(values)?;
            return Ok(Self {
                label: "custom".into(),
                direction,
                scale: 1.0,
            });
        }

        let (kind, axis) = arg
            .rsplit_once('-')
            .ok_or_else(|| Error::Validation(format!("unknown direction preset '{arg}'")))?;
        let axis = match axis {
            "x" => 0,
            "y" => 1,
            "z" => 2,
            _ => {
                return Err(Error::Validation(format!(
                    "unknown axis in direction preset '{arg}'"
                )))
            }
        };
        let mut t = vec![0.0; 3 * n_sources];
        match kind {
            "centroid" => {
                for s in 0..n_sources {
                    t[3 * s + axis] = 1.0;
                }
            }
            "separation" => {
                if n_sources != 2 {
                    return Err(Error::Validation(format!(
                        "separation presets need exactly two sources, scenario has {n_sources}"
                    )));
                }
                t[axis] = 0.5;
                t[3 + axis] = -0.5;
            }
            _ => {
                let idx = kind
                    .strip_prefix("source")
                    .and_then(|i| i.parse::<usize>().ok())
                    .filter(|&i| i >= 1 && i <= n_sources)
                    .ok_or_else(|| {
                        Error::Validation(format!("unknown direction preset '{arg}'"))
                    })?;
                t[3 * (idx - 1) + axis] = 1.0;
            }
        }
        Self::from_tangent(arg, t)
    }

    /// Source-coordinate offset in `ϑ` units corresponding to `θ`.
    pub fn to_coordinate_step(&self, theta: f64) -> f64 {
        self.scale * theta
    }
}

impl From<GeneralizedCoordinate> for Parameter {
    fn from(direction: GeneralizedCoordinate) -> Self {
        Self {
            label: "custom".into(),
            direction,
            scale: 1.0,
        }
    }
}

/// Moves every source along `a` by `δϑ`: `r' = r + a δϑ`.
pub fn displace(scenario: &Scenario, a: &GeneralizedCoordinate, step: f64) -> Result<Scenario> {
    if a.n_sources() != scenario.n_sources() {
        return Err(Error::ShapeMismatch {
            expected: format!("direction of length {}", 3 * scenario.n_sources()),
            got: format!("length {}", a.components().len()),
        });
    }
    if !step.is_finite() {
        return Err(Error::Validation(format!(
            "displacement must be finite, got {step}"
        )));
    }
    let comps = a.components();
    let sources = scenario
        .sources
        .iter()
        .enumerate()
        .map(|(s, src)| SourcePoint {
            x: src.x + comps[3 * s] * step,
            y: src.y + comps[3 * s + 1] * step,
            z: src.z + comps[3 * s + 2] * step,
            weight: src.weight,
        })
        .collect();
    Ok(Scenario {
        sources,
        ..scenario.clone()
    })
}

/// Collectors on a square vertex grid (including the origin) inside a disc.
pub fn disc_grid(radius: f64, spacing: f64) -> Vec<Collector> {
    let n = (radius / spacing).ceil() as i64 + 1;
    let r2 = radius * radius * (1.0 + 1e-12);
    let mut out = Vec::new();
    for i in -n..=n {
        for j in -n..=n {
            let (u, v) = (i as f64 * spacing, j as f64 * spacing);
            if u * u + v * v <= r2 {
                out.push(Collector::new(u, v));
            }
        }
    }
    out
}

/// `n` collectors evenly spaced on the u axis between `-half_width` and `half_width`.
pub fn linear_array(n: usize, half_width: f64) -> Vec<Collector> {
    if n == 1 {
        return vec![Collector::new(0.0, 0.0)];
    }
    (0..n)
        .map(|i| {
            Collector::new(
                half_width - 2.0 * half_width * i as f64 / (n - 1) as f64,
                0.0,
            )
        })
        .collect()
}

/// True when every collector `w` has a partner at `−w` (within `tol`).
pub fn is_inversion_symmetric(collectors: &[Collector], tol: f64) -> bool {
    collectors.iter().all(|c| {
        collectors
            .iter()
            .any(|d| (c.u + d.u).abs() <= tol && (c.v + d.v).abs() <= tol)
    })
}
