use core::fmt;
use core::ops::{Add, Mul, Neg, Sub};

use num_complex::Complex64;

use super::OMEGA;

/// Eisenstein integer `a + b·ω` with `ω = e^{2πi/3}`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct EisensteinInt {
    pub a: i64,
    pub b: i64,
}

impl EisensteinInt {
    pub const ZERO: Self = Self { a: 0, b: 0 };
    pub const ONE: Self = Self { a: 1, b: 0 };
    pub const OMEGA: Self = Self { a: 0, b: 1 };

    pub const fn new(a: i64, b: i64) -> Self {
        Self { a, b }
    }

    /// `N(a + bω) = a² − ab + b²`.
    pub fn norm(self) -> i64 {
        self.a * self.a - self.a * self.b + self.b * self.b
    }

    /// Complex conjugate; `ω̄ = −1 − ω`.
    pub fn conj(self) -> Self {
        Self::new(self.a - self.b, -self.b)
    }

    pub fn mul_omega(self) -> Self {
        Self::new(-self.b, self.a - self.b)
    }

    pub fn mul_omega_bar(self) -> Self {
        Self::new(self.b - self.a, -self.a)
    }

    pub fn is_zero(self) -> bool {
        self.a == 0 && self.b == 0
    }

    pub fn to_complex(self) -> Complex64 {
        Complex64::new(self.a as f64, 0.0) + OMEGA * self.b as f64
    }
}

impl Add for EisensteinInt {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self::new(self.a + o.a, self.b + o.b)
    }
}

impl Sub for EisensteinInt {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Self::new(self.a - o.a, self.b - o.b)
    }
}

impl Neg for EisensteinInt {
    type Output = Self;
    fn neg(self) -> Self {
        Self::new(-self.a, -self.b)
    }
}

impl Mul for EisensteinInt {
    type Output = Self;
    fn mul(self, o: Self) -> Self {
        // (a + bω)(c + dω) = ac + (ad + bc)ω + bd ω², ω² = −1 − ω
        let bd = self.b * o.b;
        Self::new(self.a * o.a - bd, self.a * o.b + self.b * o.a - bd)
    }
}

impl Mul<i64> for EisensteinInt {
    type Output = Self;
    fn mul(self, s: i64) -> Self {
        Self::new(self.a * s, self.b * s)
    }
}

impl fmt::Display for EisensteinInt {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{:+}ω", self.a, self.b)
    }
}
