//! Traces of powers of `A₀` on `L²₀` and its rotational subspaces: numeric values with
//! tail extrapolation, and exact finite remainders in `Q(ζ₁₂)[π, π⁻¹]`.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use num_bigint::BigInt;
use num_complex::Complex64;
use num_rational::BigRational;
use num_traits::One;

use crate::algebra::{CycloRational, EisensteinInt, PiGraded, Sector};
use crate::fourier_ops::{resolvent_diag, subspace_weights, CMatrix, ModeSet, OperatorSet, TruncationParams};
use crate::linalg::power_traces;
use crate::potential::FourierPotential;
use crate::{Error, Result};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Default truncation schedule for extrapolation.
pub const DEFAULT_SCHEDULE: [i64; 3] = [16, 24, 32];
/// The missing tail of `tr(P_N A₀^ℓ)` decays like `N^{-DEFAULT_EXPONENT}`.
pub const DEFAULT_EXPONENT: i32 = 4;
/// Default agreement between successive extrapolants (relative).
pub const DEFAULT_TOLERANCE: f64 = 1e-4;
/// Largest power accepted by the exact engine by default.
pub const MAX_EXACT_POWER: u32 = 6;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TraceSpace {
    Full,
    Subspace(u8),
}

#[derive(Clone, Debug)]
pub struct TraceResult {
    pub ell: u32,
    pub space: TraceSpace,
    pub numeric_value: Complex64,
    /// Last unextrapolated value.
    pub raw_value: Complex64,
    pub exact_part: Option<PiGraded>,
    pub n_sequence: Vec<i64>,
    pub extrapolated: bool,
}

#[derive(Clone, Debug)]
pub struct Schedule {
    pub truncations: Vec<i64>,
    pub tolerance: f64,
    pub exponent: i32,
}

impl Default for Schedule {
    fn default() -> Self {
        Self { truncations: DEFAULT_SCHEDULE.to_vec(), tolerance: DEFAULT_TOLERANCE, exponent: DEFAULT_EXPONENT }
    }
}

impl Schedule {
    pub fn fixed(n: i64) -> Self {
        Self { truncations: alloc::vec![n], ..Self::default() }
    }
}

/// Box enlargement that keeps every path of `ℓ` factors of `A₀` from the inner box exact.
fn padding(p: &FourierPotential, ell: u32) -> i64 {
    let reach = p
        .plus()
        .keys()
        .chain(p.minus().keys())
        .map(|q| q.m.abs().max(q.n.abs()) + 1)
        .max()
        .unwrap_or(0);
    2 * ell as i64 * reach + 2
}

/// `tr(P_N A₀^ℓ)` where `P_N` projects on the modes of truncation `n` and `A₀` acts on the
/// whole lattice, so only the tail of the trace beyond `N` is missing.
pub fn truncated_traces(p: &FourierPotential, ells: &[u32], space: TraceSpace, n: i64) -> Result<Vec<Complex64>> {
    let max = ells.iter().copied().max().unwrap_or(0);
    let inner = ModeSet::new(Sector::MinusK, TruncationParams::new(n));
    let ops = OperatorSet::new(p, TruncationParams::new(n + padding(p, max)));
    let r1 = resolvent_diag(ZERO, &ops.basis.first)?;
    let r2 = resolvent_diag(ZERO, &ops.basis.second)?;
    let apply = |x: &[Complex64]| -> Vec<Complex64> {
        let mut y = ops.u_minus.mul_vec(x);
        y.iter_mut().zip(&r2).for_each(|(a, r)| *a *= r);
        let mut z = ops.u_plus.mul_vec(&y);
        z.iter_mut().zip(&r1).for_each(|(a, r)| *a *= r);
        z
    };
    let dim = ops.basis.first.len();
    // sources: (indices in the padded set, weights)
    let sources: Vec<Vec<(usize, Complex64)>> = match space {
        TraceSpace::Full => inner
            .modes()
            .iter()
            .filter_map(|m| ops.basis.first.index_of(m))
            .map(|i| alloc::vec![(i, Complex64::new(1.0, 0.0))])
            .collect(),
        TraceSpace::Subspace(j) => {
            let w = subspace_weights(j);
            inner
                .orbits()
                .iter()
                .map(|o| {
                    o.iter()
                        .zip(w)
                        .filter_map(|(&i, w)| ops.basis.first.index_of(&inner.modes()[i]).map(|k| (k, w)))
                        .collect()
                })
                .collect()
        }
    };
    let mut out = alloc::vec![ZERO; ells.len()];
    for src in &sources {
        let mut x = alloc::vec![ZERO; dim];
        for &(i, w) in src {
            x[i] = w;
        }
        for step in 1..=max {
            x = apply(&x);
            if let Some(slot) = ells.iter().position(|&l| l == step) {
                out[slot] += src.iter().map(|&(i, w)| w.conj() * x[i]).sum::<Complex64>();
            }
        }
    }
    Ok(out)
}

/// Two-point Richardson extrapolation assuming an `N^{-e}` tail.
pub fn richardson(e: i32, n1: i64, t1: Complex64, n2: i64, t2: Complex64) -> Complex64 {
    let (a, b) = (libm::pow(n1 as f64, e as f64), libm::pow(n2 as f64, e as f64));
    (t2 * b - t1 * a) / (b - a)
}

fn extrapolate(e: i32, ns: &[i64], values: &[Complex64], tol: f64) -> Result<(Complex64, bool)> {
    match ns.len() {
        0 => Err(Error::NonConvergent { delta: f64::INFINITY }),
        1 => Ok((values[0], false)),
        len => {
            let last = richardson(e, ns[len - 2], values[len - 2], ns[len - 1], values[len - 1]);
            if len >= 3 {
                let prev = richardson(e, ns[len - 3], values[len - 3], ns[len - 2], values[len - 2]);
                let delta = (last - prev).norm() / last.norm().max(1.0);
                if delta > tol {
                    return Err(Error::NonConvergent { delta });
                }
            }
            Ok((last, true))
        }
    }
}

/// `tr(A₀^ℓ)` for several `ℓ` on one restriction at each truncation of the schedule.
pub fn numeric_traces(p: &FourierPotential, ells: &[u32], space: TraceSpace, schedule: &Schedule) -> Result<Vec<TraceResult>> {
    let mut raw: Vec<Vec<Complex64>> = Vec::new();
    for &n in &schedule.truncations {
        raw.push(truncated_traces(p, ells, space, n)?);
    }
    let mut out = Vec::new();
    for (i, &ell) in ells.iter().enumerate() {
        let vals: Vec<Complex64> = raw.iter().map(|r| r[i]).collect();
        let (v, ex) = extrapolate(schedule.exponent, &schedule.truncations, &vals, schedule.tolerance)?;
        out.push(TraceResult {
            ell,
            space,
            numeric_value: v,
            raw_value: *vals.last().unwrap_or(&ZERO),
            exact_part: None,
            n_sequence: schedule.truncations.clone(),
            extrapolated: ex,
        });
    }
    Ok(out)
}

pub fn numeric_trace(p: &FourierPotential, ell: u32, space: TraceSpace, schedule: &Schedule) -> Result<TraceResult> {
    let mut r = numeric_traces(p, &[ell], space, schedule)?;
    Ok(r.remove(0))
}

fn eisenstein_to_cyclo(e: EisensteinInt) -> CycloRational {
    // a + bω with ω = ζ² − 1
    CycloRational::from_ints([e.a - e.b, 0, e.b, 0])
}

/// `1/e` in `Q(ω)`.
fn eisenstein_inv(e: EisensteinInt) -> CycloRational {
    let n = BigRational::new(BigInt::one(), BigInt::from(e.norm()));
    eisenstein_to_cyclo(e.conj()).scale(&n)
}

type State = BTreeMap<EisensteinInt, PiGraded>;

fn apply_shifts(v: &State, coeffs: &[(EisensteinInt, PiGraded)], sign: i64) -> State {
    let mut out: State = BTreeMap::new();
    for (e, x) in v {
        for (s, a) in coeffs {
            let t = if sign > 0 { *e + *s } else { *e - *s };
            let term = x * a;
            let slot = out.entry(t).or_default();
            *slot = &*slot + &term;
        }
    }
    out.retain(|_, x| !x.is_zero());
    out
}

/// Multiply by `1/e` (the resolvent up to the common factor `1/MODE_UNIT`).
fn apply_resolvent(v: &mut State) {
    for (e, x) in v.iter_mut() {
        *x = x.scale(&eisenstein_inv(*e));
    }
}

/// Exact remainders `R_{ℓ,j}` for `j = 0, 1, 2`:
/// `R_{ℓ,j} = Σ_μ Σ_{d=1,2} ω^{jd} ⟨A₀^ℓ e_μ, e_{ω^d μ}⟩` over the whole first-component lattice.
pub fn exact_remainders(p: &FourierPotential, ell: u32) -> Result<[PiGraded; 3]> {
    let exact = p.exact().ok_or(Error::InexactCoefficients)?;
    let plus: Vec<(EisensteinInt, PiGraded)> = exact.plus.iter().map(|(q, a)| (q.shift(), a.clone())).collect();
    let minus: Vec<(EisensteinInt, PiGraded)> = exact.minus.iter().map(|(q, a)| (q.shift(), a.clone())).collect();
    // one factor of A₀ moves a mode by s₊ − s₋
    let mut diam: i64 = 0;
    for (s, _) in &plus {
        for (t, _) in &minus {
            diam = diam.max((*s - *t).norm());
        }
    }
    // |ω^d μ − μ|² = 3|μ|² ≤ (ℓ·diam)²
    let reach_sq = (ell as i64) * (ell as i64) * diam;
    let bound = 2 * libm::sqrt(reach_sq as f64) as i64 + 2;
    let mut acc: [PiGraded; 3] = Default::default();
    let phase = [CycloRational::one(), CycloRational::omega(), CycloRational::omega_bar()];
    for a in -bound..=bound {
        for b in -bound..=bound {
            let mu = EisensteinInt::new(a, b);
            if Sector::of(mu) != Some(Sector::MinusK) || 3 * mu.norm() > reach_sq {
                continue;
            }
            let mut v: State = BTreeMap::new();
            v.insert(mu, PiGraded::one());
            for _ in 0..ell {
                v = apply_shifts(&v, &minus, -1);
                apply_resolvent(&mut v);
                v = apply_shifts(&v, &plus, 1);
                apply_resolvent(&mut v);
            }
            let targets = [mu.mul_omega(), mu.mul_omega_bar()];
            for (d, t) in targets.iter().enumerate() {
                if let Some(x) = v.get(t) {
                    let d = d + 1;
                    for (j, slot) in acc.iter_mut().enumerate() {
                        let w = &phase[(j * d) % 3];
                        *slot = &*slot + &x.scale(w);
                    }
                }
            }
        }
    }
    // resolvent entries are (MODE_UNIT·e)⁻¹ with MODE_UNIT = π·4i√3/9, coefficients carry √scale_sq
    let unit_inv = (CycloRational::sqrt3() * CycloRational::i()).scale(&BigRational::new(BigInt::from(-3), BigInt::from(4)));
    let mut factor = PiGraded::monomial(unit_inv.pow(2 * ell), -2 * ell as i32);
    let mut s = BigRational::one();
    for _ in 0..ell {
        s *= &exact.scale_sq;
    }
    factor = factor.scale(&CycloRational::from_rational(s));
    Ok(acc.map(|x| &x * &factor))
}

pub fn exact_remainder(p: &FourierPotential, ell: u32, j: u8) -> Result<PiGraded> {
    Ok(exact_remainders(p, ell)?[j as usize % 3].clone())
}

/// `tr(A₀^ℓ)|_{L²_{0,j}} = (tr(A₀^ℓ)|_{L²₀} + R_{ℓ,j}) / 3`.
pub fn subspace_trace(p: &FourierPotential, ell: u32, j: u8, schedule: &Schedule) -> Result<TraceResult> {
    let full = numeric_trace(p, ell, TraceSpace::Full, schedule)?;
    let r = exact_remainder(p, ell, j)?;
    Ok(combine(&full, j, r))
}

/// Subspace trace assembled from an already computed full trace and an exact remainder.
pub fn combine(full: &TraceResult, j: u8, remainder: PiGraded) -> TraceResult {
    TraceResult {
        ell: full.ell,
        space: TraceSpace::Subspace(j),
        numeric_value: (full.numeric_value + remainder.embed()) / 3.0,
        raw_value: (full.raw_value + remainder.embed()) / 3.0,
        exact_part: Some(remainder),
        n_sequence: full.n_sequence.clone(),
        extrapolated: full.extrapolated,
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NonRealReport {
    pub holds: bool,
    /// `tr(A²)·tr(A⁴)`
    pub lhs: f64,
    /// `tr(A³)²`
    pub rhs: f64,
}

/// `tr(A²)tr(A⁴) < tr(A³)²` certifies a non-real eigenvalue (the traces must be real).
pub fn nonreal_from_values(t2: f64, t3: f64, t4: f64) -> NonRealReport {
    let lhs = t2 * t4;
    let rhs = t3 * t3;
    NonRealReport { holds: lhs < rhs, lhs, rhs }
}

pub fn nonreal_from_matrix(m: &CMatrix) -> NonRealReport {
    let t = power_traces(m, &[2, 3, 4]);
    nonreal_from_values(t[0].re, t[1].re, t[2].re)
}

/// Evaluates the criterion on `L²₀` or on one subspace; subspace traces use exact remainders
/// when available and direct block traces otherwise.
pub fn nonreal_criterion(p: &FourierPotential, space: TraceSpace, schedule: &Schedule) -> Result<NonRealReport> {
    let t = traces_234(p, space, schedule)?;
    Ok(nonreal_from_values(t[0].numeric_value.re, t[1].numeric_value.re, t[2].numeric_value.re))
}

fn traces_234(p: &FourierPotential, space: TraceSpace, schedule: &Schedule) -> Result<Vec<TraceResult>> {
    match (space, p.exact()) {
        (TraceSpace::Subspace(j), Some(_)) => {
            let full = numeric_traces(p, &[2, 3, 4], TraceSpace::Full, schedule)?;
            full.iter().map(|f| Ok(combine(f, j, exact_remainder(p, f.ell, j)?))).collect()
        }
        _ => numeric_traces(p, &[2, 3, 4], space, schedule),
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepRow {
    pub theta: f64,
    pub full: f64,
    pub sub01: f64,
    pub sub2: f64,
}

/// `tr(A₀²)` on `L²₀`, `L²_{0,1}` and `L²_{0,2}` for each `θ` of the family `U_θ`.
pub fn theta_sweep(thetas: &[f64], schedule: &Schedule) -> Result<Vec<SweepRow>> {
    thetas
        .iter()
        .map(|&theta| {
            let p = crate::potential::build_interpolated(theta);
            let mut v = [0.0; 3];
            for (i, space) in [TraceSpace::Full, TraceSpace::Subspace(1), TraceSpace::Subspace(2)].into_iter().enumerate() {
                v[i] = numeric_trace(&p, 2, space, schedule)?.numeric_value.re;
            }
            Ok(SweepRow { theta, full: v[0], sub01: v[1], sub2: v[2] })
        })
        .collect()
}

/// Indices `i` where the sign of `f(row)` differs between rows `i` and `i + 1`.
pub fn sign_changes(rows: &[SweepRow], f: impl Fn(&SweepRow) -> f64) -> Vec<usize> {
    rows.windows(2).enumerate().filter(|(_, w)| f(&w[0]) * f(&w[1]) < 0.0).map(|(i, _)| i).collect()
}

impl TraceResult {
    pub fn is_real(&self) -> bool {
        self.numeric_value.im.abs() <= 1e-8 * self.numeric_value.norm().max(1.0)
    }
}
