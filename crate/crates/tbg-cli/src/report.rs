use schemars::JsonSchema;
use serde::{Deserialize, Serialize};
use tbg_core::algebra::PiGraded;
use tbg_core::spectral::{Classification, MagicAngle};

use crate::config::{from_c, Cplx, PotentialSpec, SpaceSpec, WindowSpec};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct AngleEntry {
    pub alpha: Cplx,
    pub modulus: f64,
    /// Rotational subspaces `L²_{0,j}` whose block of `A₀` carries `1/α²`.
    pub subspaces: Vec<u8>,
    pub algebraic_multiplicity: usize,
    pub geometric_multiplicity: usize,
    /// `dim ker D(α)` on `L²_{0,j}`, indexed by `j`.
    pub kernel_dims: [usize; 3],
    pub classification: String,
    /// Smallest singular value of `D(α)` on the first listed subspace; absent without a census.
    pub residual: Option<f64>,
    pub drift: Option<f64>,
    pub truncation: i64,
}

pub fn classification_label(c: Classification) -> &'static str {
    match c {
        Classification::Simple => "simple",
        Classification::Double => "double",
        Classification::JordanDegenerate => "jordan_degenerate",
        Classification::Unclassified => "unclassified",
    }
}

impl From<&MagicAngle> for AngleEntry {
    fn from(m: &MagicAngle) -> Self {
        Self {
            alpha: from_c(m.alpha),
            modulus: m.alpha.norm(),
            subspaces: m.subspaces.clone(),
            algebraic_multiplicity: m.algebraic_mult,
            geometric_multiplicity: m.geometric_mult,
            kernel_dims: m.kernel_dims,
            classification: classification_label(m.classification).into(),
            residual: m.residual.is_finite().then_some(m.residual),
            drift: m.drift,
            truncation: m.truncation.radius,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct MagicReport {
    pub potential: PotentialSpec,
    pub truncation: i64,
    pub window: WindowSpec,
    pub angles: Vec<AngleEntry>,
}

/// Rational remainders print as plain fractions; anything else in the π-graded form.
pub fn exact_string(x: &PiGraded) -> String {
    match x.as_monomial() {
        None => "0".into(),
        Some((c, 0)) => match c.as_rational() {
            Some(r) => r.to_string(),
            None => x.to_string(),
        },
        Some(_) => x.to_string(),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct TraceEntry {
    pub ell: u32,
    pub space: SpaceSpec,
    pub value: Cplx,
    /// Unextrapolated value at the largest truncation.
    pub raw: Cplx,
    /// Exact remainder `R_{ℓ,j}` used to assemble a subspace trace.
    pub exact_remainder: Option<String>,
    pub truncations: Vec<i64>,
    pub extrapolated: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct RemainderEntry {
    pub ell: u32,
    /// `R_{ℓ,j}` for `j = 0, 1, 2`.
    pub values: [String; 3],
    pub display: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct CriterionEntry {
    pub space: SpaceSpec,
    /// `tr(A²)·tr(A⁴) < tr(A³)²`, which forces a non-real eigenvalue.
    pub holds: bool,
    pub lhs: f64,
    pub rhs: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct TraceReport {
    pub potential: PotentialSpec,
    pub schedule: Vec<i64>,
    pub traces: Vec<TraceEntry>,
    pub remainders: Vec<RemainderEntry>,
    pub criterion: Vec<CriterionEntry>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct GapEntry {
    /// Number of flat bands `m(α)`.
    pub m: usize,
    pub flat_max: f64,
    pub gap_min: f64,
    /// Whether `gap_min` clears the flatness threshold by the required margin.
    pub conclusive: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct BandsReport {
    pub potential: PotentialSpec,
    pub truncation: i64,
    pub alpha: Cplx,
    pub model: String,
    pub beta: Option<f64>,
    pub kpoints: usize,
    pub count: usize,
    pub band_min: Vec<f64>,
    pub band_max: Vec<f64>,
    /// Chiral model only.
    pub gap: Option<GapEntry>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct ZeroEntry {
    pub location: Cplx,
    pub order: usize,
    pub slope: f64,
    pub depth: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct VectorEntry {
    pub subspace: Option<u8>,
    pub residual: f64,
    pub norm: f64,
    pub zeros: Option<Vec<ZeroEntry>>,
    pub zeros_error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct WavefunctionReport {
    pub potential: PotentialSpec,
    pub truncation: i64,
    pub alpha_seed: Cplx,
    pub alpha: Cplx,
    pub k: Cplx,
    pub grid: usize,
    pub vectors: Vec<VectorEntry>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct PlaquetteEntry {
    pub n: usize,
    pub c1: i64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct ChernReport {
    pub potential: PotentialSpec,
    pub truncation: i64,
    pub alpha_seed: Cplx,
    pub alpha: Cplx,
    /// Rank of the flat-band frame (number of flat bands).
    pub rank: usize,
    /// Subspace of the kernel vector generating the frame.
    pub generator_subspace: Option<u8>,
    pub c1: i64,
    pub plaquette: Vec<PlaquetteEntry>,
    pub curvature_chern: f64,
    pub curvature_min: f64,
    pub curvature_max: f64,
    pub curvature_max_imag: f64,
    pub boundary: f64,
    pub puncture: f64,
    pub boundary_total: f64,
    /// `max |H(ωk) − H(k)| / max H` over the sampled momenta.
    pub rotation_defect: f64,
    /// `max |H(−k) − H(k)| / max H` over the sampled momenta.
    pub parity_defect: f64,
    /// `max | |e_p(k)|⁴ g(k+p)/g(k) − 1 |` over the sampled momenta.
    pub quasi_periodicity_defect: f64,
    /// Slope of `log g` against `log |k|` near `k = 0`.
    pub vanishing_order: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct SweepRowEntry {
    pub step: usize,
    pub theta: f64,
    pub simple: usize,
    pub double: usize,
    pub jordan: usize,
    pub unclassified: usize,
    pub angles: Vec<AngleEntry>,
    pub trace_full: Option<f64>,
    pub trace_sub01: Option<f64>,
    pub trace_sub2: Option<f64>,
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct SweepReport {
    pub family: String,
    pub truncation: i64,
    pub steps: usize,
    pub rows: Vec<SweepRowEntry>,
    /// Steps after which `tr(A₀²)|_{L²_{0,2}}` changes sign.
    pub sub2_sign_changes: Vec<usize>,
}
