use std::path::{Path, PathBuf};

use num_complex::Complex64;
use schemars::JsonSchema;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use tbg_core::algebra::{parse_pigraded, DualPoint};
use tbg_core::potential::{build_interpolated, build_interpolated_literal, build_u1, build_u2, build_wterm, FourierPotential};

use crate::error::CliError;

/// Complex number as `[re, im]`.
pub type Cplx = [f64; 2];

pub fn to_c(z: Cplx) -> Complex64 {
    Complex64::new(z[0], z[1])
}

pub fn from_c(z: Complex64) -> Cplx {
    [z.re, z.im]
}

/// Accepts `0.85`, `0.96+0.98i`, `-1.2-3i`, `2i`.
pub fn parse_complex(s: &str) -> Result<Cplx, CliError> {
    let t: String = s.chars().filter(|c| !c.is_whitespace()).collect();
    let bad = || CliError::Config(format!("cannot parse complex number {s:?}"));
    let num = |x: &str| x.parse::<f64>().map_err(|_| bad());
    let Some(body) = t.strip_suffix('i') else {
        return Ok([num(&t)?, 0.0]);
    };
    let bytes = body.as_bytes();
    let split = (1..bytes.len()).rev().find(|&j| (bytes[j] == b'+' || bytes[j] == b'-') && !matches!(bytes[j - 1], b'e' | b'E'));
    let imag = |x: &str| match x {
        "" | "+" => Ok(1.0),
        "-" => Ok(-1.0),
        _ => num(x),
    };
    match split {
        Some(j) => Ok([num(&body[..j])?, imag(&body[j..])?]),
        None => Ok([0.0, imag(body)?]),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "lowercase")]
pub enum NamedPotential {
    U1,
    U2,
    W,
}

/// One κ-orbit generator: dual lattice point `m q₁ + n q₂` and its exact coefficient.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct OrbitTerm {
    pub p: [i64; 2],
    pub orbit_coeff: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(untagged)]
pub enum PotentialSpec {
    Named(NamedPotential),
    Interp { interp: f64 },
    InterpLiteral { interp_literal: f64 },
    Orbits(Vec<OrbitTerm>),
}

impl PotentialSpec {
    /// A name, inline JSON, or the path of a JSON file holding either.
    pub fn parse(s: &str) -> Result<Self, CliError> {
        let t = s.trim();
        if t.starts_with('{') || t.starts_with('[') {
            return serde_json::from_str(t).map_err(|e| CliError::Config(format!("potential: {e}")));
        }
        if let Ok(v) = serde_json::from_value::<Self>(serde_json::Value::String(t.to_ascii_lowercase())) {
            return Ok(v);
        }
        let text = std::fs::read_to_string(Path::new(t)).map_err(|e| CliError::Config(format!("potential {t:?} is not a known name and cannot be read: {e}")))?;
        serde_json::from_str(&text).map_err(|e| CliError::Config(format!("potential file {t:?}: {e}")))
    }

    pub fn build(&self) -> Result<FourierPotential, CliError> {
        let p = match self {
            Self::Named(NamedPotential::U1) => build_u1(),
            Self::Named(NamedPotential::U2) => build_u2(),
            Self::Named(NamedPotential::W) => build_wterm(),
            Self::Interp { interp } => build_interpolated(*interp),
            Self::InterpLiteral { interp_literal } => build_interpolated_literal(*interp_literal),
            Self::Orbits(terms) => {
                let mut orbits = Vec::with_capacity(terms.len());
                for t in terms {
                    let c = parse_pigraded(&t.orbit_coeff).map_err(|e| CliError::Config(format!("orbit_coeff {:?}: {e}", t.orbit_coeff)))?;
                    orbits.push((DualPoint::new(t.p[0], t.p[1]), c));
                }
                FourierPotential::from_orbits(&orbits)
            }
        };
        let report = p.validate();
        if !report.passed() {
            return Err(CliError::Core(tbg_core::Error::InvalidPotential(format!("{report:?}"))));
        }
        Ok(p)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "lowercase")]
pub enum WindowSpec {
    Real,
    Complex,
    All,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize, JsonSchema)]
pub enum SpaceSpec {
    #[serde(rename = "full")]
    Full,
    #[serde(rename = "0")]
    L0,
    #[serde(rename = "1")]
    L1,
    #[serde(rename = "2")]
    L2,
}

impl SpaceSpec {
    pub fn parse(s: &str) -> Result<Self, CliError> {
        serde_json::from_value(serde_json::Value::String(s.trim().to_ascii_lowercase())).map_err(|_| CliError::Config(format!("subspace must be full, 0, 1 or 2 (got {s:?})")))
    }

    pub fn label(self) -> &'static str {
        match self {
            Self::Full => "full",
            Self::L0 => "0",
            Self::L1 => "1",
            Self::L2 => "2",
        }
    }

    pub fn all() -> [Self; 4] {
        [Self::Full, Self::L0, Self::L1, Self::L2]
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum KSpec {
    /// Piecewise linear path through named points (`G`, `K`, `K'`, `M`).
    Path { points: Vec<String>, per_segment: usize },
    /// Offset `n × n` grid on the dual cell.
    Grid { n: usize },
    Points { ks: Vec<Cplx> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct MagicParams {
    pub potential: PotentialSpec,
    pub truncation: i64,
    pub window: WindowSpec,
    pub max_modulus: f64,
    /// Fail when an angle moves by more than this between `N` and `N + 4`.
    pub stability: Option<f64>,
    pub classify: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct TraceParams {
    pub potential: PotentialSpec,
    pub ells: Vec<u32>,
    pub spaces: Vec<SpaceSpec>,
    pub exact_remainder: bool,
    pub criterion: bool,
    pub schedule: Vec<i64>,
    pub exponent: i32,
    pub tolerance: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct BandsParams {
    pub potential: PotentialSpec,
    pub truncation: i64,
    pub alpha: Cplx,
    /// Replace `alpha` by the nearest magic angle before computing.
    pub refine: bool,
    pub kpoints: KSpec,
    pub count: usize,
    /// Anti-chiral coupling of the full model; `None` is the chiral model.
    pub beta: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct WavefunctionParams {
    pub potential: PotentialSpec,
    pub truncation: i64,
    /// Seed; refined to the nearest magic angle.
    pub alpha: Cplx,
    pub k: Cplx,
    pub grid: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct ChernParams {
    pub potential: PotentialSpec,
    pub truncation: i64,
    /// Seed; refined to the nearest magic angle.
    pub alpha: Cplx,
    pub frame_grid: usize,
    pub plaquette: Vec<usize>,
    pub field: usize,
    pub contour_radius: Option<f64>,
    pub contour_nodes: usize,
    /// Random momenta for the curvature symmetry checks.
    pub samples: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct SweepParams {
    /// Use `(cos θ − sin θ)U₁ + sin θ·U₂` instead of `cos θ·U₁ + sin θ·W`.
    pub literal: bool,
    pub truncation: i64,
    pub steps: usize,
    pub theta_start: f64,
    pub theta_end: f64,
    pub max_modulus: f64,
    /// Truncation for `tr(A₀²)`; `None` skips traces.
    pub trace_truncation: Option<i64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(tag = "command", rename_all = "snake_case")]
pub enum Task {
    Magic(MagicParams),
    Trace(TraceParams),
    Bands(BandsParams),
    Wavefunction(WavefunctionParams),
    Chern(ChernParams),
    Sweep(SweepParams),
}

impl Task {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Magic(_) => "magic",
            Self::Trace(_) => "trace",
            Self::Bands(_) => "bands",
            Self::Wavefunction(_) => "wavefunction",
            Self::Chern(_) => "chern",
            Self::Sweep(_) => "sweep",
        }
    }
}

/// Everything a run depends on. `output`, `cache` and `jobs` do not affect results and are
/// left out of the hash.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct RunConfig {
    #[serde(flatten)]
    pub task: Task,
    pub seed: u64,
    #[serde(default)]
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub cache: bool,
    #[serde(default)]
    pub jobs: Option<usize>,
}

#[derive(Serialize)]
struct HashKey<'a> {
    version: &'static str,
    task: &'a Task,
    seed: u64,
}

impl RunConfig {
    pub fn new(task: Task) -> Self {
        Self { task, seed: 0, output: None, cache: false, jobs: None }
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    /// SHA-256 over the canonical JSON of the result-relevant fields and the crate version.
    pub fn hash(&self) -> String {
        let key = HashKey { version: env!("CARGO_PKG_VERSION"), task: &self.task, seed: self.seed };
        let bytes = serde_json::to_vec(&key).expect("config serializes");
        hex::encode(Sha256::digest(bytes))
    }

    pub fn result_part(&self) -> Self {
        Self { output: None, cache: false, jobs: None, ..self.clone() }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn complex_parsing() {
        assert_eq!(parse_complex("0.853799").unwrap(), [0.853799, 0.0]);
        assert_eq!(parse_complex("0.9628 + 0.9873i").unwrap(), [0.9628, 0.9873]);
        assert_eq!(parse_complex("-1e-3-2i").unwrap(), [-1e-3, -2.0]);
        assert_eq!(parse_complex("-i").unwrap(), [0.0, -1.0]);
        assert!(parse_complex("abc").is_err());
    }

    #[test]
    fn potential_specs() {
        assert_eq!(PotentialSpec::parse("U2").unwrap(), PotentialSpec::Named(NamedPotential::U2));
        assert_eq!(PotentialSpec::parse(r#"{"interp": 2.5}"#).unwrap(), PotentialSpec::Interp { interp: 2.5 });
        let s = PotentialSpec::parse(r#"[{"p": [0, 0], "orbit_coeff": "(-4/3*z^3)*pi"}]"#).unwrap();
        let (a, b) = (s.build().unwrap(), build_u1());
        assert_eq!(a.plus(), b.plus());
        assert_eq!(a.minus(), b.minus());
        assert!(PotentialSpec::parse("nope").is_err());
    }

    #[test]
    fn hash_ignores_plumbing() {
        let task = Task::Sweep(SweepParams { literal: false, truncation: 6, steps: 4, theta_start: 0.0, theta_end: 1.0, max_modulus: 2.0, trace_truncation: None });
        let a = RunConfig::new(task);
        let mut b = a.clone();
        b.output = Some("x".into());
        b.jobs = Some(3);
        assert_eq!(a.hash(), b.hash());
        b.seed = 1;
        assert_ne!(a.hash(), b.hash());
        let text = serde_json::to_string(&a).unwrap();
        assert_eq!(serde_json::from_str::<RunConfig>(&text).unwrap(), a);
    }
}
