//! Moiré lattice `Λ = Z ⊕ ωZ`, its dual `Λ* = (4πi/√3)Λ` and Fourier mode labels.
//!
//! Every mode is stored by integer coordinates `(M, N)` with `ν = c·(M + Nω)`,
//! `c = 4πi/(3√3)`. The dual basis is `q₁ = 3c`, `q₂ = 3cω`, so
//! `⟨1, q₁⟩ = 0`, `⟨ω, q₁⟩ = 2π`, `⟨1, q₂⟩ = −2π`, `⟨ω, q₂⟩ = 0`, and `K = 4π/3 = c·(−1 − 2ω)`.

use core::fmt;

use num_complex::Complex64;

use super::{CycloRational, EisensteinInt, OMEGA};

pub const SQRT3: f64 = 1.732_050_807_568_877_2;
pub const PI: f64 = core::f64::consts::PI;
/// `K = 4π/3`.
pub const K: f64 = 4.0 * PI / 3.0;
/// `c = 4πi/(3√3)`, the mode unit.
pub const MODE_UNIT: Complex64 = Complex64::new(0.0, 4.0 * PI / (3.0 * SQRT3));
/// `q₁ = 4πi/√3`.
pub const Q1: Complex64 = Complex64::new(0.0, 4.0 * PI / SQRT3);
/// `q₂ = ωq₁`.
pub const Q2: Complex64 = Complex64::new(-2.0 * PI, -2.0 * PI / SQRT3);
/// Stacking point `z_S = i/√3`.
pub const Z_S: Complex64 = Complex64::new(0.0, 1.0 / SQRT3);

/// `⟨z, w⟩ = Re(z w̄)`.
pub fn pairing(z: Complex64, w: Complex64) -> f64 {
    z.re * w.re + z.im * w.im
}

/// Rescaling map `z(k) = √3 k/(4πi)`, sending `Λ*` onto `Λ`.
pub fn z_map(k: Complex64) -> Complex64 {
    k * SQRT3 / Complex64::new(0.0, 4.0 * PI)
}

/// Inverse of [`z_map`].
pub fn z_map_inv(z: Complex64) -> Complex64 {
    z * Complex64::new(0.0, 4.0 * PI) / SQRT3
}

/// Coordinates of `z` in the basis `{1, ω}`.
pub fn lattice_coords(z: Complex64) -> (f64, f64) {
    let b = z.im * 2.0 / SQRT3;
    (z.re + b / 2.0, b)
}

/// Coordinates of `k` in the basis `{q₁, q₂}`.
pub fn dual_coords(k: Complex64) -> (f64, f64) {
    lattice_coords(z_map(k))
}

/// Momentum sector of a mode.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Sector {
    PlusK,
    MinusK,
}

impl Sector {
    /// `(M, N)` of `±K`.
    pub fn base(self) -> EisensteinInt {
        match self {
            Sector::PlusK => EisensteinInt::new(-1, -2),
            Sector::MinusK => EisensteinInt::new(1, 2),
        }
    }

    pub fn sign(self) -> i64 {
        match self {
            Sector::PlusK => 1,
            Sector::MinusK => -1,
        }
    }

    pub fn opposite(self) -> Self {
        match self {
            Sector::PlusK => Sector::MinusK,
            Sector::MinusK => Sector::PlusK,
        }
    }

    /// Sector containing the integer coordinates `e`, if any.
    pub fn of(e: EisensteinInt) -> Option<Self> {
        match (e.a.rem_euclid(3), e.b.rem_euclid(3)) {
            (2, 1) => Some(Sector::PlusK),
            (1, 2) => Some(Sector::MinusK),
            _ => None,
        }
    }
}

/// Fourier mode `ν = s·K + m q₁ + n q₂`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ModeIndex {
    pub sector: Sector,
    pub m: i64,
    pub n: i64,
}

impl ModeIndex {
    pub const fn new(sector: Sector, m: i64, n: i64) -> Self {
        Self { sector, m, n }
    }

    pub fn eisenstein(self) -> EisensteinInt {
        self.sector.base() + EisensteinInt::new(3 * self.m, 3 * self.n)
    }

    pub fn from_eisenstein(e: EisensteinInt) -> Option<Self> {
        let sector = Sector::of(e)?;
        let d = e - sector.base();
        Some(Self::new(sector, d.a / 3, d.b / 3))
    }

    pub fn nu(self) -> Complex64 {
        MODE_UNIT * self.eisenstein().to_complex()
    }

    /// `max(|m|, |n|)`.
    pub fn radius(self) -> i64 {
        self.m.abs().max(self.n.abs())
    }

    /// Shift by a dual lattice vector.
    pub fn shifted(self, p: DualPoint) -> Self {
        Self::new(self.sector, self.m + p.m, self.n + p.n)
    }
}

impl fmt::Display for ModeIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self.sector {
            Sector::PlusK => '+',
            Sector::MinusK => '-',
        };
        write!(f, "{s}K+({},{})", self.m, self.n)
    }
}

/// Index of `ω̄ν`; same sector.
pub fn rotate_mode(nu: ModeIndex) -> ModeIndex {
    ModeIndex::from_eisenstein(nu.eisenstein().mul_omega_bar()).expect("rotation preserves sectors")
}

/// Index of `ων`.
pub fn rotate_mode_omega(nu: ModeIndex) -> ModeIndex {
    ModeIndex::from_eisenstein(nu.eisenstein().mul_omega()).expect("rotation preserves sectors")
}

/// `[ν, ων, ω̄ν]`.
pub fn mode_orbit(nu: ModeIndex) -> [ModeIndex; 3] {
    [nu, rotate_mode_omega(nu), rotate_mode(nu)]
}

/// Dual lattice point `p = m q₁ + n q₂`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct DualPoint {
    pub m: i64,
    pub n: i64,
}

impl DualPoint {
    pub const fn new(m: i64, n: i64) -> Self {
        Self { m, n }
    }

    pub fn value(self) -> Complex64 {
        Q1 * self.m as f64 + Q2 * self.n as f64
    }

    /// `z(p) = m + nω`.
    pub fn z(self) -> EisensteinInt {
        EisensteinInt::new(self.m, self.n)
    }

    /// `ωp`.
    pub fn rotate_omega(self) -> Self {
        let e = self.z().mul_omega();
        Self::new(e.a, e.b)
    }

    /// `s = p + K` in mode units.
    pub fn shift(self) -> EisensteinInt {
        Sector::PlusK.base() + EisensteinInt::new(3 * self.m, 3 * self.n)
    }

    /// Inverse of [`DualPoint::shift`].
    pub fn from_shift(s: EisensteinInt) -> Option<Self> {
        let d = s - Sector::PlusK.base();
        if d.a.rem_euclid(3) == 0 && d.b.rem_euclid(3) == 0 {
            Some(Self::new(d.a / 3, d.b / 3))
        } else {
            None
        }
    }

    /// `p + K` as a complex number.
    pub fn shift_value(self) -> Complex64 {
        MODE_UNIT * self.shift().to_complex()
    }
}

impl core::ops::Add for DualPoint {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self::new(self.m + o.m, self.n + o.n)
    }
}

impl core::ops::Neg for DualPoint {
    type Output = Self;
    fn neg(self) -> Self {
        Self::new(-self.m, -self.n)
    }
}

/// `κ(p) = ω(p + K) − K`, the map under which the rotation law `U(ωz) = ωU(z)`
/// reads `a_{κ(p)} = ω a_p`.
pub fn kappa(p: DualPoint) -> DualPoint {
    DualPoint::from_shift(p.shift().mul_omega()).expect("κ preserves Λ*")
}

/// `[(p, 1), (κp, ω), (κ²p, ω²)]`: the orbit of `p` and the relative coefficient weights.
pub fn kappa_orbit(p: DualPoint) -> [(DualPoint, CycloRational); 3] {
    let p1 = kappa(p);
    let p2 = kappa(p1);
    let w = CycloRational::omega();
    [(p, CycloRational::one()), (p1, w.clone()), (p2, &w * &w)]
}

/// Floating twin of the orbit weights.
pub fn kappa_weights() -> [Complex64; 3] {
    [Complex64::new(1.0, 0.0), OMEGA, OMEGA * OMEGA]
}
