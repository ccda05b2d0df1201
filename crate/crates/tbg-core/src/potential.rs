//! Tunnelling potentials `U₊(z) = Σ a_p e^{i⟨p+K,z⟩}` and `U₋(z) = Σ b_p e^{−i⟨p+K,z⟩}`.
//!
//! The rotation law `U_±(ωz) = ωU_±(z)` becomes `a_{κ(p)} = ω a_p` on the orbits of
//! [`kappa`]. For chiral potentials `U₋(z) = U₊(−z)`, i.e. `b = a`.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use num_bigint::BigInt;
use num_complex::Complex64;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive};

use crate::algebra::{kappa, kappa_orbit, pairing, CycloRational, DualPoint, PiGraded, OMEGA};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SymmetryClass {
    /// `U₋(z) = U₊(−z)`.
    ChiralPhysical,
    /// Only the rotation and translation laws.
    RotationalOnly,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Component {
    Plus,
    Minus,
}

/// Exact coefficients; the numeric potential is `√scale_sq` times these.
#[derive(Clone, Debug, PartialEq)]
pub struct ExactCoefficients {
    pub plus: BTreeMap<DualPoint, PiGraded>,
    pub minus: BTreeMap<DualPoint, PiGraded>,
    pub scale_sq: BigRational,
}

#[derive(Clone, Debug)]
pub struct FourierPotential {
    plus: BTreeMap<DualPoint, Complex64>,
    minus: BTreeMap<DualPoint, Complex64>,
    exact: Option<ExactCoefficients>,
    class: SymmetryClass,
}

fn lower(m: &BTreeMap<DualPoint, PiGraded>, s: f64) -> BTreeMap<DualPoint, Complex64> {
    m.iter().map(|(p, c)| (*p, c.embed() * s)).collect()
}

fn expand_orbits(orbits: &[(DualPoint, PiGraded)]) -> BTreeMap<DualPoint, PiGraded> {
    let mut out: BTreeMap<DualPoint, PiGraded> = BTreeMap::new();
    for (p, a) in orbits {
        for (q, w) in kappa_orbit(*p) {
            let v = a.scale(&w);
            let e = out.entry(q).or_default();
            *e = &*e + &v;
        }
    }
    out.retain(|_, v| !v.is_zero());
    out
}

/// `−(4πi/3)`, the common orbit coefficient of both builders.
fn bm_coefficient() -> PiGraded {
    PiGraded::monomial(CycloRational::ratio(-4, 3) * CycloRational::i(), 1)
}

/// `p` with `p + K = −2K`.
fn w_orbit_point() -> DualPoint {
    DualPoint::new(1, 2)
}

impl FourierPotential {
    /// Exact potential with numeric coefficients `√scale_sq · exact`.
    pub fn from_exact(
        plus: BTreeMap<DualPoint, PiGraded>,
        minus: BTreeMap<DualPoint, PiGraded>,
        scale_sq: BigRational,
        class: SymmetryClass,
    ) -> Self {
        let s = libm::sqrt(scale_sq.to_f64().unwrap_or(f64::NAN));
        Self {
            plus: lower(&plus, s),
            minus: lower(&minus, s),
            exact: Some(ExactCoefficients { plus, minus, scale_sq }),
            class,
        }
    }

    pub fn from_numeric(
        plus: BTreeMap<DualPoint, Complex64>,
        minus: BTreeMap<DualPoint, Complex64>,
        class: SymmetryClass,
    ) -> Self {
        Self { plus, minus, exact: None, class }
    }

    /// Chiral potential generated by one coefficient per κ-orbit.
    pub fn from_orbits(orbits: &[(DualPoint, PiGraded)]) -> Self {
        let plus = expand_orbits(orbits);
        Self::from_exact(plus.clone(), plus, BigRational::one(), SymmetryClass::ChiralPhysical)
    }

    /// Chiral potential from floating orbit coefficients.
    pub fn from_numeric_orbits(orbits: &[(DualPoint, Complex64)]) -> Self {
        let mut plus: BTreeMap<DualPoint, Complex64> = BTreeMap::new();
        for (p, a) in orbits {
            let mut q = *p;
            let mut w = Complex64::new(1.0, 0.0);
            for _ in 0..3 {
                *plus.entry(q).or_default() += a * w;
                q = kappa(q);
                w *= OMEGA;
            }
        }
        plus.retain(|_, v| *v != Complex64::new(0.0, 0.0));
        Self::from_numeric(plus.clone(), plus, SymmetryClass::ChiralPhysical)
    }

    pub fn plus(&self) -> &BTreeMap<DualPoint, Complex64> {
        &self.plus
    }

    pub fn minus(&self) -> &BTreeMap<DualPoint, Complex64> {
        &self.minus
    }

    pub fn coefficients(&self, which: Component) -> &BTreeMap<DualPoint, Complex64> {
        match which {
            Component::Plus => &self.plus,
            Component::Minus => &self.minus,
        }
    }

    pub fn exact(&self) -> Option<&ExactCoefficients> {
        self.exact.as_ref()
    }

    pub fn class(&self) -> SymmetryClass {
        self.class
    }

    pub fn support_size(&self) -> usize {
        self.plus.len()
    }

    /// Largest `|s − s'|` over pairs of shifts `s = p + K` in the support of `U₊` and `U₋`.
    pub fn shift_diameter(&self) -> f64 {
        let mut d: f64 = 0.0;
        for p in self.plus.keys() {
            for q in self.minus.keys() {
                d = d.max((p.shift_value() - q.shift_value()).norm());
            }
        }
        d
    }

    /// Multiply every coefficient by `s`.
    pub fn scaled(&self, s: f64) -> Self {
        let f = |m: &BTreeMap<DualPoint, Complex64>| m.iter().map(|(p, c)| (*p, c * s)).collect();
        Self { plus: f(&self.plus), minus: f(&self.minus), exact: None, class: self.class }
    }

    /// `a·P + b·Q`, coefficient-wise.
    pub fn combine(a: f64, p: &Self, b: f64, q: &Self) -> Self {
        let mix = |x: &BTreeMap<DualPoint, Complex64>, y: &BTreeMap<DualPoint, Complex64>| {
            let mut out: BTreeMap<DualPoint, Complex64> = BTreeMap::new();
            for (k, v) in x {
                *out.entry(*k).or_default() += v * a;
            }
            for (k, v) in y {
                *out.entry(*k).or_default() += v * b;
            }
            out.retain(|_, v| *v != Complex64::new(0.0, 0.0));
            out
        };
        let class = if p.class == SymmetryClass::ChiralPhysical && q.class == SymmetryClass::ChiralPhysical {
            SymmetryClass::ChiralPhysical
        } else {
            SymmetryClass::RotationalOnly
        };
        Self { plus: mix(&p.plus, &q.plus), minus: mix(&p.minus, &q.minus), exact: None, class }
    }

    pub fn eval_plus(&self, z: Complex64) -> Complex64 {
        self.plus.iter().map(|(p, a)| a * Complex64::cis(pairing(p.shift_value(), z))).sum()
    }

    pub fn eval_minus(&self, z: Complex64) -> Complex64 {
        self.minus.iter().map(|(p, b)| b * Complex64::cis(-pairing(p.shift_value(), z))).sum()
    }

    /// `V(z) = [[0, U₊(z)], [U₋(z), 0]]`.
    pub fn evaluate(&self, z: Complex64) -> [[Complex64; 2]; 2] {
        let zero = Complex64::new(0.0, 0.0);
        [[zero, self.eval_plus(z)], [self.eval_minus(z), zero]]
    }

    /// Check the orbit law, sector placement and, for chiral potentials, `U₋(z) = U₊(−z)`.
    pub fn validate(&self) -> ValidationReport {
        let mut violation = None;
        if let Some(ex) = &self.exact {
            for (which, m) in [(Component::Plus, &ex.plus), (Component::Minus, &ex.minus)] {
                if violation.is_none() {
                    violation = exact_orbit_violation(which, m);
                }
            }
        } else {
            for (which, m) in [(Component::Plus, &self.plus), (Component::Minus, &self.minus)] {
                if violation.is_none() {
                    violation = numeric_orbit_violation(which, m);
                }
            }
        }
        let chiral_physical = match self.class {
            SymmetryClass::ChiralPhysical => Some(self.chiral_defect() <= 1e-12),
            SymmetryClass::RotationalOnly => None,
        };
        ValidationReport { rotation_ok: violation.is_none(), sector_ok: true, chiral_physical, violation }
    }

    /// Largest relative `|U₋(z) − U₊(−z)|` over 50 fixed sample points.
    pub fn chiral_defect(&self) -> f64 {
        let scale: f64 = self.plus.values().chain(self.minus.values()).map(|c| c.norm()).sum::<f64>().max(1e-300);
        let mut worst: f64 = 0.0;
        let mut state = 0x2545_f491_4f6c_dd1du64;
        for _ in 0..50 {
            let z = Complex64::new(unit(&mut state) * 4.0 - 2.0, unit(&mut state) * 4.0 - 2.0);
            worst = worst.max((self.eval_minus(z) - self.eval_plus(-z)).norm() / scale);
        }
        worst
    }
}

fn unit(state: &mut u64) -> f64 {
    *state ^= *state << 13;
    *state ^= *state >> 7;
    *state ^= *state << 17;
    (*state >> 11) as f64 / (1u64 << 53) as f64
}

fn exact_orbit_violation(which: Component, m: &BTreeMap<DualPoint, PiGraded>) -> Option<OrbitViolation> {
    let w = CycloRational::omega();
    for (p, a) in m {
        let kp = kappa(*p);
        let b = m.get(&kp).cloned().unwrap_or_default();
        let want = a.scale(&w);
        if b != want {
            return Some(OrbitViolation {
                component: which,
                p: *p,
                kappa_p: kp,
                a_p: alloc::format!("{a}"),
                a_kappa_p: alloc::format!("{b}"),
            });
        }
    }
    None
}

fn numeric_orbit_violation(which: Component, m: &BTreeMap<DualPoint, Complex64>) -> Option<OrbitViolation> {
    let scale = m.values().map(|c| c.norm()).fold(0.0, f64::max).max(1e-300);
    for (p, a) in m {
        let kp = kappa(*p);
        let b = m.get(&kp).copied().unwrap_or_default();
        if (b - a * OMEGA).norm() > 1e-12 * scale {
            return Some(OrbitViolation {
                component: which,
                p: *p,
                kappa_p: kp,
                a_p: alloc::format!("{a}"),
                a_kappa_p: alloc::format!("{b}"),
            });
        }
    }
    None
}

#[derive(Clone, Debug, PartialEq)]
pub struct OrbitViolation {
    pub component: Component,
    pub p: DualPoint,
    pub kappa_p: DualPoint,
    pub a_p: String,
    pub a_kappa_p: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ValidationReport {
    pub rotation_ok: bool,
    pub sector_ok: bool,
    /// `None` when the potential does not claim `U₋(z) = U₊(−z)`.
    pub chiral_physical: Option<bool>,
    pub violation: Option<OrbitViolation>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.rotation_ok && self.sector_ok && self.chiral_physical != Some(false)
    }
}

/// Rescaled Bistritzer–MacDonald potential: shifts `K, ωK, ω̄K` with coefficients `−(4πi/3)ω^ℓ`.
pub fn build_u1() -> FourierPotential {
    FourierPotential::from_orbits(&[(DualPoint::default(), bm_coefficient())])
}

/// The second orbit `W`: shifts `−2ω^ℓK` with coefficients `−(4πi/3)ω^ℓ`.
pub fn build_wterm() -> FourierPotential {
    FourierPotential::from_orbits(&[(w_orbit_point(), bm_coefficient())])
}

/// `U₂ = (U₁ − W)/√2`; the exact set stores `U₁ − W` with `scale_sq = 1/2`.
pub fn build_u2() -> FourierPotential {
    let c = bm_coefficient();
    let plus = expand_orbits(&[(DualPoint::default(), c.clone()), (w_orbit_point(), -c)]);
    let half = BigRational::new(BigInt::from(1), BigInt::from(2));
    FourierPotential::from_exact(plus.clone(), plus, half, SymmetryClass::ChiralPhysical)
}

/// `U_θ = cos θ·U₁ + sin θ·W`; `θ = 0` gives `U₁` and `θ = 7π/4` gives `U₂`.
pub fn build_interpolated(theta: f64) -> FourierPotential {
    if theta == 0.0 {
        return build_u1();
    }
    FourierPotential::combine(libm::cos(theta), &build_u1(), libm::sin(theta), &build_wterm())
}

/// `(cos θ − sin θ)·U₁ + sin θ·U₂`.
pub fn build_interpolated_literal(theta: f64) -> FourierPotential {
    if theta == 0.0 {
        return build_u1();
    }
    let (s, c) = (libm::sin(theta), libm::cos(theta));
    FourierPotential::combine(c - s, &build_u1(), s, &build_u2())
}

/// Sample points for property checks.
pub fn sample_points(count: usize, seed: u64) -> Vec<Complex64> {
    let mut state = seed | 1;
    (0..count).map(|_| Complex64::new(unit(&mut state) * 4.0 - 2.0, unit(&mut state) * 4.0 - 2.0)).collect()
}
