use alloc::collections::BTreeMap;
use core::fmt;
use core::ops::{Add, Mul, Neg, Sub};

use num_complex::Complex64;

use super::CycloRational;

/// Finite sum `Σ_d c_d π^d` with `c_d ∈ Q(ζ₁₂)`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Default)]
pub struct PiGraded {
    terms: BTreeMap<i32, CycloRational>,
}

impl PiGraded {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn one() -> Self {
        Self::monomial(CycloRational::one(), 0)
    }

    /// `c·π^d`.
    pub fn monomial(c: CycloRational, d: i32) -> Self {
        let mut terms = BTreeMap::new();
        if !c.is_zero() {
            terms.insert(d, c);
        }
        Self { terms }
    }

    pub fn pi() -> Self {
        Self::monomial(CycloRational::one(), 1)
    }

    pub fn terms(&self) -> impl Iterator<Item = (i32, &CycloRational)> {
        self.terms.iter().map(|(d, c)| (*d, c))
    }

    pub fn coefficient(&self, d: i32) -> CycloRational {
        self.terms.get(&d).cloned().unwrap_or_default()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// `Some((c, d))` when the value is a single monomial `c·π^d`.
    pub fn as_monomial(&self) -> Option<(&CycloRational, i32)> {
        if self.terms.len() == 1 {
            self.terms.iter().next().map(|(d, c)| (c, *d))
        } else {
            None
        }
    }

    /// The homogeneous degree, if there is exactly one.
    pub fn degree(&self) -> Option<i32> {
        self.as_monomial().map(|(_, d)| d)
    }

    pub fn conj(&self) -> Self {
        Self { terms: self.terms.iter().map(|(d, c)| (*d, c.conj())).collect() }
    }

    /// Inverse of a monomial; general sums are not invertible here.
    pub fn inv(&self) -> Option<Self> {
        let (c, d) = self.as_monomial()?;
        Some(Self::monomial(c.inv()?, -d))
    }

    pub fn scale(&self, c: &CycloRational) -> Self {
        let mut out = Self::zero();
        for (d, x) in &self.terms {
            out.push(*d, x * c);
        }
        out
    }

    fn push(&mut self, d: i32, c: CycloRational) {
        if c.is_zero() {
            return;
        }
        let e = self.terms.entry(d).or_default();
        *e += &c;
        if e.is_zero() {
            self.terms.remove(&d);
        }
    }

    pub fn embed(&self) -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for (d, c) in &self.terms {
            acc += c.embed() * libm::pow(core::f64::consts::PI, *d as f64);
        }
        acc
    }
}

impl From<CycloRational> for PiGraded {
    fn from(c: CycloRational) -> Self {
        Self::monomial(c, 0)
    }
}

impl<'a> Add<&'a PiGraded> for &'a PiGraded {
    type Output = PiGraded;
    fn add(self, o: &PiGraded) -> PiGraded {
        let mut r = self.clone();
        for (d, c) in &o.terms {
            r.push(*d, c.clone());
        }
        r
    }
}

impl Add for PiGraded {
    type Output = PiGraded;
    fn add(self, o: PiGraded) -> PiGraded {
        &self + &o
    }
}

impl Neg for &PiGraded {
    type Output = PiGraded;
    fn neg(self) -> PiGraded {
        PiGraded { terms: self.terms.iter().map(|(d, c)| (*d, -c)).collect() }
    }
}

impl Neg for PiGraded {
    type Output = PiGraded;
    fn neg(self) -> PiGraded {
        -&self
    }
}

impl<'a> Sub<&'a PiGraded> for &'a PiGraded {
    type Output = PiGraded;
    fn sub(self, o: &PiGraded) -> PiGraded {
        self + &(-o)
    }
}

impl Sub for PiGraded {
    type Output = PiGraded;
    fn sub(self, o: PiGraded) -> PiGraded {
        &self - &o
    }
}

impl<'a> Mul<&'a PiGraded> for &'a PiGraded {
    type Output = PiGraded;
    fn mul(self, o: &PiGraded) -> PiGraded {
        let mut r = PiGraded::zero();
        for (d1, c1) in &self.terms {
            for (d2, c2) in &o.terms {
                r.push(d1 + d2, c1 * c2);
            }
        }
        r
    }
}

impl Mul for PiGraded {
    type Output = PiGraded;
    fn mul(self, o: PiGraded) -> PiGraded {
        &self * &o
    }
}

impl fmt::Display for PiGraded {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        for (n, (d, c)) in self.terms.iter().enumerate() {
            if n > 0 {
                write!(f, " + ")?;
            }
            match d {
                0 => write!(f, "({c})")?,
                1 => write!(f, "({c})*pi")?,
                _ => write!(f, "({c})*pi^{d}")?,
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn degrees_add_under_products() {
        let a = PiGraded::monomial(CycloRational::ratio(4, 3), 1);
        let b = PiGraded::monomial(CycloRational::ratio(3, 4), -1);
        assert_eq!(&a * &b, PiGraded::one());
    }

    #[test]
    fn cancellation_removes_terms() {
        let a = PiGraded::pi();
        assert!((&a - &a).is_zero());
    }

    #[test]
    fn embed_of_bm_scale() {
        let x = PiGraded::monomial(CycloRational::ratio(4, 3) * CycloRational::sqrt3().inv().unwrap(), 1);
        let want = 4.0 * core::f64::consts::PI / (3.0 * 3f64.sqrt());
        assert!((x.embed().re - want).abs() < 1e-14);
        assert!((want - 2.418399).abs() < 1e-6);
    }
}
