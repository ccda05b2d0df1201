use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::ops::{Add, AddAssign, Mul, Neg, Sub};

use num_bigint::BigInt;
use num_complex::Complex64;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

/// Element of the cyclotomic field `Q(ζ)`, `ζ = e^{iπ/6}`, in the power basis
/// `{1, ζ, ζ², ζ³}` with `ζ⁴ = ζ² − 1`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct CycloRational {
    c: [BigRational; 4],
}

fn rat(n: i64) -> BigRational {
    BigRational::from_integer(BigInt::from(n))
}

fn rat_to_f64(r: &BigRational) -> f64 {
    match r.to_f64() {
        Some(x) => x,
        None => {
            // huge numerators and denominators: scale both before dividing
            let n = r.numer();
            let d = r.denom();
            let shift = n.bits().max(d.bits()).saturating_sub(1000);
            let n = (n >> shift).to_f64().unwrap_or(f64::NAN);
            let d = (d >> shift).to_f64().unwrap_or(f64::NAN);
            n / d
        }
    }
}

impl CycloRational {
    pub fn from_coeffs(c: [BigRational; 4]) -> Self {
        Self { c }
    }

    pub fn from_ints(c: [i64; 4]) -> Self {
        Self { c: [rat(c[0]), rat(c[1]), rat(c[2]), rat(c[3])] }
    }

    pub fn from_rational(r: BigRational) -> Self {
        Self { c: [r, BigRational::zero(), BigRational::zero(), BigRational::zero()] }
    }

    pub fn from_int(n: i64) -> Self {
        Self::from_rational(rat(n))
    }

    pub fn ratio(n: i64, d: i64) -> Self {
        Self::from_rational(BigRational::new(BigInt::from(n), BigInt::from(d)))
    }

    pub fn zero() -> Self {
        Self::from_int(0)
    }

    pub fn one() -> Self {
        Self::from_int(1)
    }

    /// `ζ = e^{iπ/6}`.
    pub fn zeta() -> Self {
        Self::from_ints([0, 1, 0, 0])
    }

    /// `ζ^k` for any integer `k`.
    pub fn zeta_pow(k: i64) -> Self {
        let k = k.rem_euclid(12) as u32;
        let mut r = Self::one();
        for _ in 0..k {
            r = r.mul_zeta();
        }
        r
    }

    /// `ω = ζ⁴ = ζ² − 1`.
    pub fn omega() -> Self {
        Self::from_ints([-1, 0, 1, 0])
    }

    pub fn omega_bar() -> Self {
        Self::omega().conj()
    }

    /// `i = ζ³`.
    pub fn i() -> Self {
        Self::from_ints([0, 0, 0, 1])
    }

    /// `√3 = ζ + ζ⁻¹ = 2ζ − ζ³`.
    pub fn sqrt3() -> Self {
        Self::from_ints([0, 2, 0, -1])
    }

    pub fn coeffs(&self) -> &[BigRational; 4] {
        &self.c
    }

    pub fn is_zero(&self) -> bool {
        self.c.iter().all(Zero::is_zero)
    }

    /// The rational value when the element lies in `Q`.
    pub fn as_rational(&self) -> Option<BigRational> {
        if self.c[1..].iter().all(Zero::is_zero) {
            Some(self.c[0].clone())
        } else {
            None
        }
    }

    fn mul_zeta(&self) -> Self {
        // ζ·(c0 + c1ζ + c2ζ² + c3ζ³) = c0ζ + c1ζ² + c2ζ³ + c3(ζ² − 1)
        let [c0, c1, c2, c3] = &self.c;
        Self { c: [-c3.clone(), c0.clone(), c1 + c3, c2.clone()] }
    }

    /// Complex conjugation `ζ ↦ ζ⁻¹`.
    pub fn conj(&self) -> Self {
        // ζ⁻¹ = ζ − ζ³, ζ⁻² = 1 − ζ², ζ⁻³ = −ζ³
        let [c0, c1, c2, c3] = &self.c;
        Self { c: [c0 + c2, c1.clone(), -c2.clone(), -(c1 + c3)] }
    }

    pub fn scale(&self, r: &BigRational) -> Self {
        Self { c: [&self.c[0] * r, &self.c[1] * r, &self.c[2] * r, &self.c[3] * r] }
    }

    /// Multiplicative inverse; `None` for zero.
    pub fn inv(&self) -> Option<Self> {
        if self.is_zero() {
            return None;
        }
        // Solve x·y = 1 as a 4×4 rational linear system whose columns are x·ζ^j.
        let mut cols = Vec::with_capacity(4);
        let mut p = self.clone();
        for _ in 0..4 {
            cols.push(p.c.clone());
            p = p.mul_zeta();
        }
        let mut a: Vec<Vec<BigRational>> = (0..4)
            .map(|r| {
                let mut row: Vec<BigRational> = (0..4).map(|j| cols[j][r].clone()).collect();
                row.push(if r == 0 { BigRational::one() } else { BigRational::zero() });
                row
            })
            .collect();
        for col in 0..4 {
            let piv = (col..4).find(|&r| !a[r][col].is_zero())?;
            a.swap(col, piv);
            let p = a[col][col].clone();
            for j in col..5 {
                a[col][j] = &a[col][j] / &p;
            }
            for r in 0..4 {
                if r != col && !a[r][col].is_zero() {
                    let f = a[r][col].clone();
                    for j in col..5 {
                        let t = &f * &a[col][j];
                        a[r][j] -= t;
                    }
                }
            }
        }
        Some(Self { c: [a[0][4].clone(), a[1][4].clone(), a[2][4].clone(), a[3][4].clone()] })
    }

    pub fn pow(&self, e: u32) -> Self {
        let mut r = Self::one();
        for _ in 0..e {
            r = &r * self;
        }
        r
    }

    /// Floating evaluation.
    pub fn embed(&self) -> Complex64 {
        if self.is_zero() {
            return Complex64::new(0.0, 0.0);
        }
        let z = Complex64::from_polar(1.0, core::f64::consts::PI / 6.0);
        let mut acc = Complex64::new(0.0, 0.0);
        let mut p = Complex64::new(1.0, 0.0);
        for c in &self.c {
            if !c.is_zero() {
                acc += p * rat_to_f64(c);
            }
            p *= z;
        }
        acc
    }
}

impl Default for CycloRational {
    fn default() -> Self {
        Self::zero()
    }
}

impl<'a> Add<&'a CycloRational> for &'a CycloRational {
    type Output = CycloRational;
    fn add(self, o: &CycloRational) -> CycloRational {
        CycloRational {
            c: [&self.c[0] + &o.c[0], &self.c[1] + &o.c[1], &self.c[2] + &o.c[2], &self.c[3] + &o.c[3]],
        }
    }
}

impl Add for CycloRational {
    type Output = CycloRational;
    fn add(self, o: CycloRational) -> CycloRational {
        &self + &o
    }
}

impl AddAssign<&CycloRational> for CycloRational {
    fn add_assign(&mut self, o: &CycloRational) {
        for (a, b) in self.c.iter_mut().zip(o.c.iter()) {
            *a += b;
        }
    }
}

impl<'a> Sub<&'a CycloRational> for &'a CycloRational {
    type Output = CycloRational;
    fn sub(self, o: &CycloRational) -> CycloRational {
        CycloRational {
            c: [&self.c[0] - &o.c[0], &self.c[1] - &o.c[1], &self.c[2] - &o.c[2], &self.c[3] - &o.c[3]],
        }
    }
}

impl Sub for CycloRational {
    type Output = CycloRational;
    fn sub(self, o: CycloRational) -> CycloRational {
        &self - &o
    }
}

impl Neg for &CycloRational {
    type Output = CycloRational;
    fn neg(self) -> CycloRational {
        CycloRational { c: [-&self.c[0], -&self.c[1], -&self.c[2], -&self.c[3]] }
    }
}

impl Neg for CycloRational {
    type Output = CycloRational;
    fn neg(self) -> CycloRational {
        -&self
    }
}

impl<'a> Mul<&'a CycloRational> for &'a CycloRational {
    type Output = CycloRational;
    fn mul(self, o: &CycloRational) -> CycloRational {
        let mut p: [BigRational; 7] = Default::default();
        for i in 0..4 {
            if self.c[i].is_zero() {
                continue;
            }
            for j in 0..4 {
                if !o.c[j].is_zero() {
                    p[i + j] += &self.c[i] * &o.c[j];
                }
            }
        }
        // ζ⁶ = −1, ζ⁵ = ζ³ − ζ, ζ⁴ = ζ² − 1
        let [p0, p1, p2, p3, p4, p5, p6] = p;
        CycloRational { c: [p0 - &p4 - p6, p1 - &p5, p2 + p4, p3 + p5] }
    }
}

impl Mul for CycloRational {
    type Output = CycloRational;
    fn mul(self, o: CycloRational) -> CycloRational {
        &self * &o
    }
}

fn fmt_rational(r: &BigRational) -> String {
    use alloc::string::ToString;
    if r.is_integer() {
        r.numer().to_string()
    } else {
        alloc::format!("{}/{}", r.numer(), r.denom())
    }
}

impl fmt::Display for CycloRational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        let mut first = true;
        for (j, c) in self.c.iter().enumerate() {
            if c.is_zero() {
                continue;
            }
            let neg = c.is_negative();
            let mag = fmt_rational(&c.abs());
            if first {
                if neg {
                    write!(f, "-")?;
                }
            } else {
                write!(f, " {} ", if neg { '-' } else { '+' })?;
            }
            first = false;
            match j {
                0 => write!(f, "{mag}")?,
                _ => {
                    if mag != "1" {
                        write!(f, "{mag}*")?;
                    }
                    if j == 1 {
                        write!(f, "z")?;
                    } else {
                        write!(f, "z^{j}")?;
                    }
                }
            }
        }
        Ok(())
    }
}
