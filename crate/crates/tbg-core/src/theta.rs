//! Jacobi `θ₁` on the hexagonal lattice `Λ = Z + ωZ`, the Bloch multipliers `F_k`,
//! Weierstrass `℘`, real-space sampling of kernel vectors and their zeros.

use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64;

use crate::algebra::{lattice_coords, z_map, EisensteinInt, Sector, OMEGA, PI, SQRT3};
use crate::fourier_ops::{CMatrix, OperatorSet};
use crate::spectral::KernelVector;
use crate::{Error, Result};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const I: Complex64 = Complex64::new(0.0, 1.0);

/// Points closer than this to `Λ` are poles of `F_k` and `℘`.
pub const POLE_TOLERANCE: f64 = 1e-10;

/// Series for `θ₁(ζ|ω)` and its derivatives, summed over `|n + ½| ≤ terms`.
#[derive(Clone, Copy, Debug)]
pub struct ThetaEvaluator {
    pub terms: i32,
}

impl Default for ThetaEvaluator {
    fn default() -> Self {
        // |q^{(n+½)²}| e^{2π|n+½| Im ζ} < 1e−40 for n = 9 on the reduced cell
        Self { terms: 9 }
    }
}

/// `ζ = ζ₀ + m + nω` with `ζ₀` in the cell centered at the origin.
pub fn reduce(z: Complex64) -> (Complex64, i64, i64) {
    let (a, b) = lattice_coords(z);
    let (m, n) = (libm::round(a) as i64, libm::round(b) as i64);
    (z - Complex64::new(m as f64, 0.0) - OMEGA * n as f64, m, n)
}

/// Distance from `z` to the lattice `Λ`.
pub fn lattice_distance(z: Complex64) -> f64 {
    let (z0, _, _) = reduce(z);
    let mut best = f64::INFINITY;
    for m in -1..=1 {
        for n in -1..=1 {
            best = best.min((z0 - Complex64::new(m as f64, 0.0) - OMEGA * n as f64).norm());
        }
    }
    best
}

impl ThetaEvaluator {
    /// `d^j θ₁/dζ^j` for `j = 0..4` at an unreduced point.
    pub fn derivatives(&self, z: Complex64) -> [Complex64; 4] {
        let mut out = [ZERO; 4];
        for n in -self.terms..self.terms {
            let h = n as f64 + 0.5;
            let term = -(I * PI * h * h * OMEGA + I * 2.0 * PI * h * (z + 0.5)).exp();
            let f = I * 2.0 * PI * h;
            let mut t = term;
            for d in out.iter_mut() {
                *d += t;
                t *= f;
            }
        }
        out
    }

    pub fn theta1(&self, z: Complex64) -> Complex64 {
        self.log_theta1(z).exp()
    }

    /// `log θ₁(ζ)` using `θ(ζ + m + nω) = (−1)^{m+n} e^{−πin²ω − 2πinζ} θ(ζ)`.
    pub fn log_theta1(&self, z: Complex64) -> Complex64 {
        let (z0, m, n) = reduce(z);
        let base = self.derivatives(z0)[0].ln();
        let nf = n as f64;
        base + I * PI * ((m + n).rem_euclid(2) as f64) - I * PI * nf * nf * OMEGA - I * 2.0 * PI * nf * z0
    }
}

pub fn theta1(z: Complex64) -> Complex64 {
    ThetaEvaluator::default().theta1(z)
}

/// `F_k(z) = e^{(i/2)(z−z̄)k} θ(z − z(k)) / θ(z)`.
pub fn f_k(k: Complex64, z: Complex64) -> Result<Complex64> {
    if lattice_distance(z) < POLE_TOLERANCE {
        return Err(Error::PoleAt { z });
    }
    let th = ThetaEvaluator::default();
    let e = I * 0.5 * (z - z.conj()) * k;
    Ok((e + th.log_theta1(z - z_map(k)) - th.log_theta1(z)).exp())
}

/// `e_p(k) = θ(z(k)) / θ(z(k + p))`, so that `F_{k+p} = e_p(k)⁻¹ e^{−i⟨p,z⟩} F_k`.
pub fn e_p(k: Complex64, p: Complex64) -> Complex64 {
    let th = ThetaEvaluator::default();
    (th.log_theta1(z_map(k)) - th.log_theta1(z_map(k + p))).exp()
}

/// `∂_k F_k(z)` (holomorphic in `k`).
pub fn f_k_dk(k: Complex64, z: Complex64) -> Result<Complex64> {
    let f = f_k(k, z)?;
    let th = ThetaEvaluator::default();
    let (z0, _, n) = reduce(z - z_map(k));
    let d = th.derivatives(z0);
    // d/dζ log θ(ζ) picks up −2πin from the quasi-periodicity factor
    let dlog = d[1] / d[0] - I * 2.0 * PI * n as f64;
    let dz = SQRT3 / (I * 4.0 * PI);
    Ok(f * (I * 0.5 * (z - z.conj()) - dlog * dz))
}

fn wp_constant(th: &ThetaEvaluator) -> Complex64 {
    let d = th.derivatives(ZERO);
    d[3] / (d[1] * 3.0)
}

/// Weierstrass `℘(z)` for `Λ = Z + ωZ`: `℘ = −(log θ₁)″ + θ₁‴(0)/(3θ₁′(0))`.
pub fn weierstrass_p(z: Complex64) -> Result<Complex64> {
    if lattice_distance(z) < POLE_TOLERANCE {
        return Err(Error::PoleAt { z });
    }
    let th = ThetaEvaluator::default();
    let (z0, _, _) = reduce(z);
    let d = th.derivatives(z0);
    let l1 = d[1] / d[0];
    Ok(-(d[2] / d[0] - l1 * l1) + wp_constant(&th))
}

/// `℘′(z) = −(log θ₁)‴`.
pub fn weierstrass_p_prime(z: Complex64) -> Result<Complex64> {
    if lattice_distance(z) < POLE_TOLERANCE {
        return Err(Error::PoleAt { z });
    }
    let th = ThetaEvaluator::default();
    let (z0, _, _) = reduce(z);
    let d = th.derivatives(z0);
    let (a, b, c) = (d[1] / d[0], d[2] / d[0], d[3] / d[0]);
    Ok(-(c - 3.0 * b * a + 2.0 * a * a * a))
}

/// Uniform `M × M` grid of the cell `{s + tω : 0 ≤ s, t < 1}`, offset by half a step.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CellGrid {
    pub m: usize,
}

impl CellGrid {
    pub fn new(m: usize) -> Self {
        Self { m }
    }

    pub fn len(&self) -> usize {
        self.m * self.m
    }

    pub fn is_empty(&self) -> bool {
        self.m == 0
    }

    pub fn coord(&self, i: usize) -> f64 {
        (i as f64 + 0.5) / self.m as f64
    }

    /// Sample `idx = i·M + j` sits at `s_i + t_j ω`.
    pub fn point(&self, idx: usize) -> Complex64 {
        let (i, j) = (idx / self.m, idx % self.m);
        Complex64::new(self.coord(i), 0.0) + OMEGA * self.coord(j)
    }

    /// Area element of the cell per sample.
    pub fn weight(&self) -> f64 {
        SQRT3 / 2.0 / self.len() as f64
    }
}

/// Values of `Σ c e^{i⟨ν,z⟩}` on the grid; `e^{i⟨ν, s+tω⟩} = e^{2πi(a t − b s)/3}` for `ν = (a, b)`.
pub fn sample_series(grid: &CellGrid, terms: &[(EisensteinInt, Complex64)]) -> Vec<Complex64> {
    let m = grid.m;
    let mut by_a: alloc::collections::BTreeMap<i64, Vec<Complex64>> = alloc::collections::BTreeMap::new();
    for (e, c) in terms {
        let h = by_a.entry(e.a).or_insert_with(|| vec![ZERO; m]);
        for (i, slot) in h.iter_mut().enumerate() {
            *slot += c * Complex64::cis(-2.0 * PI * e.b as f64 * grid.coord(i) / 3.0);
        }
    }
    let mut out = vec![ZERO; m * m];
    for (a, h) in &by_a {
        let x: Vec<Complex64> = (0..m).map(|j| Complex64::cis(2.0 * PI * *a as f64 * grid.coord(j) / 3.0)).collect();
        for i in 0..m {
            for j in 0..m {
                out[i * m + j] += h[i] * x[j];
            }
        }
    }
    out
}

/// Fourier coefficients of grid samples on the given modes (inverse of [`sample_series`]).
pub fn project_series(grid: &CellGrid, values: &[Complex64], modes: &[EisensteinInt]) -> Vec<Complex64> {
    let m = grid.m;
    let mut cache: alloc::collections::BTreeMap<i64, Vec<Complex64>> = alloc::collections::BTreeMap::new();
    let norm = 1.0 / (m * m) as f64;
    modes
        .iter()
        .map(|e| {
            let g = cache.entry(e.a).or_insert_with(|| {
                (0..m)
                    .map(|i| {
                        (0..m)
                            .map(|j| values[i * m + j] * Complex64::cis(-2.0 * PI * e.a as f64 * grid.coord(j) / 3.0))
                            .sum::<Complex64>()
                    })
                    .collect()
            });
            g.iter().enumerate().map(|(i, v)| v * Complex64::cis(2.0 * PI * e.b as f64 * grid.coord(i) / 3.0)).sum::<Complex64>() * norm
        })
        .collect()
}

/// Two-component samples on a cell grid.
#[derive(Clone, Debug)]
pub struct SpinorSamples {
    pub grid: CellGrid,
    pub comps: [Vec<Complex64>; 2],
}

impl SpinorSamples {
    pub fn norm(&self) -> f64 {
        libm::sqrt(self.comps.iter().flatten().map(|c| c.norm_sqr()).sum::<f64>() * self.grid.weight())
    }

    pub fn max_abs(&self) -> f64 {
        (0..self.grid.len()).map(|i| self.abs_at(i)).fold(0.0, f64::max)
    }

    pub fn abs_at(&self, idx: usize) -> f64 {
        libm::sqrt(self.comps[0][idx].norm_sqr() + self.comps[1][idx].norm_sqr())
    }

    /// `∫ ⟨self, other⟩` over the cell.
    pub fn inner(&self, other: &SpinorSamples) -> Complex64 {
        let mut acc = ZERO;
        for c in 0..2 {
            for (a, b) in self.comps[c].iter().zip(&other.comps[c]) {
                acc += a * b.conj();
            }
        }
        acc * self.grid.weight()
    }

    /// Coefficients on the modes of an operator set, ordered like its basis.
    pub fn coefficients(&self, ops: &OperatorSet) -> Vec<Complex64> {
        let first: Vec<EisensteinInt> = ops.basis.first.modes().iter().map(|m| m.eisenstein()).collect();
        let second: Vec<EisensteinInt> = ops.basis.second.modes().iter().map(|m| m.eisenstein()).collect();
        let mut c = project_series(&self.grid, &self.comps[0], &first);
        c.extend(project_series(&self.grid, &self.comps[1], &second));
        c
    }

    /// `‖(D(α) + k)P u‖ / ‖P u‖` with `P` the projection on the truncated modes.
    pub fn dirac_residual(&self, ops: &OperatorSet, alpha: Complex64, k: Complex64) -> f64 {
        let c = CMatrix::from_vec(ops.basis.first.len() + ops.basis.second.len(), 1, self.coefficients(ops));
        (ops.dirac(alpha, k) * &c).norm() / c.norm()
    }
}

fn split_terms(v: &KernelVector) -> [Vec<(EisensteinInt, Complex64)>; 2] {
    let mut out: [Vec<(EisensteinInt, Complex64)>; 2] = Default::default();
    for (m, c) in v.modes.iter().zip(&v.coeffs) {
        let slot = match m.sector {
            Sector::MinusK => 0,
            Sector::PlusK => 1,
        };
        out[slot].push((m.eisenstein(), *c));
    }
    out
}

pub fn sample_kernel(v: &KernelVector, grid: CellGrid) -> SpinorSamples {
    let [a, b] = split_terms(v);
    SpinorSamples { grid, comps: [sample_series(&grid, &a), sample_series(&grid, &b)] }
}

/// Samples of `f(z)·u(z)`.
pub fn multiply(u: &SpinorSamples, f: impl Fn(Complex64) -> Result<Complex64>) -> Result<SpinorSamples> {
    let mut out = u.clone();
    for idx in 0..u.grid.len() {
        let v = f(u.grid.point(idx))?;
        out.comps[0][idx] *= v;
        out.comps[1][idx] *= v;
    }
    Ok(out)
}

/// `G_{k,r}(z) = F_{k+r}(z) F_{−r}(z) u(z)`; `u` must vanish to second order at `0`.
pub fn flat_band_generator(u: &SpinorSamples, k: Complex64, r: Complex64) -> Result<SpinorSamples> {
    multiply(u, |z| Ok(f_k(k + r, z)? * f_k(-r, z)?))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WronskianReport {
    /// `max|W| / (max|φ| max|ψ|)`.
    pub relative_max: f64,
    /// `max |W(z+1) − W(z)| + |W(z+ω) − W(z)|` at sampled points, relative.
    pub periodicity_defect: f64,
    /// `‖(2D_z̄ + 2k)W‖ / (‖φ‖‖ψ‖)`.
    pub residual: f64,
}

/// Wronskian `W = φ₁ψ₂ − φ₂ψ₁` of two elements of `ker(D(α) + k)`.
pub fn wronskian(phi: &KernelVector, psi: &KernelVector, k: Complex64, grid: CellGrid, radius: i64) -> WronskianReport {
    let a = sample_kernel(phi, grid);
    let b = sample_kernel(psi, grid);
    let w: Vec<Complex64> = (0..grid.len()).map(|i| a.comps[0][i] * b.comps[1][i] - a.comps[1][i] * b.comps[0][i]).collect();
    let wmax = w.iter().map(|x| x.norm()).fold(0.0, f64::max);
    let scale = a.max_abs() * b.max_abs();
    let mut modes = Vec::new();
    for m in -2 * radius..=2 * radius {
        for n in -2 * radius..=2 * radius {
            modes.push(EisensteinInt::new(3 * m, 3 * n));
        }
    }
    let coeffs = project_series(&grid, &w, &modes);
    let res: f64 = modes
        .iter()
        .zip(&coeffs)
        .map(|(e, c)| ((crate::algebra::MODE_UNIT * e.to_complex() + 2.0 * k) * c).norm_sqr())
        .sum::<f64>();
    let wval = |z: Complex64| {
        let (x, y) = (phi.eval(z), psi.eval(z));
        x[0] * y[1] - x[1] * y[0]
    };
    let mut defect: f64 = 0.0;
    for idx in [0, grid.len() / 3, grid.len() / 2 + 7] {
        let z = grid.point(idx % grid.len());
        let w0 = wval(z);
        defect = defect.max((wval(z + 1.0) - w0).norm()).max((wval(z + OMEGA) - w0).norm());
    }
    WronskianReport {
        relative_max: wmax / scale,
        periodicity_defect: defect / scale,
        residual: libm::sqrt(res * SQRT3 / 2.0) / (a.norm() * b.norm()),
    }
}

/// `‖℘u − c v‖ / ‖℘u‖` for the best constant `c`.
pub fn span_residual(u: &SpinorSamples, v: &SpinorSamples) -> Result<f64> {
    let pu = multiply(u, weierstrass_p)?;
    let c = pu.inner(v) / v.inner(v);
    let mut diff = pu.clone();
    for comp in 0..2 {
        for (d, x) in diff.comps[comp].iter_mut().zip(&v.comps[comp]) {
            *d -= c * x;
        }
    }
    Ok(diff.norm() / pu.norm())
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ZeroInfo {
    pub location: Complex64,
    pub order: u32,
    pub slope: f64,
    /// `|v(location)| / max|v|`.
    pub depth: f64,
}

/// Grid minima above this fraction of `max|v|` are not used as seeds.
pub const SEED_FRACTION: f64 = 0.25;
/// Zeros must be this deep relative to `max|v|`.
pub const ZERO_DEPTH: f64 = 1e-5;
/// Accepted deviation of the fitted slope from an integer.
pub const SLOPE_WINDOW: f64 = 0.2;

fn nelder_mead(f: &impl Fn(Complex64) -> f64, start: Complex64, step: f64) -> Complex64 {
    let mut pts = [start, start + step, start + I * step];
    let mut vals = pts.map(f);
    for _ in 0..400 {
        let mut order = [0, 1, 2];
        order.sort_by(|&a, &b| vals[a].total_cmp(&vals[b]));
        let (b, m, w) = (order[0], order[1], order[2]);
        if (pts[w] - pts[b]).norm() < 1e-13 {
            break;
        }
        let c = (pts[b] + pts[m]) / 2.0;
        let r = c + (c - pts[w]);
        let fr = f(r);
        if fr < vals[b] {
            let e = c + (c - pts[w]) * 2.0;
            let fe = f(e);
            if fe < fr {
                pts[w] = e;
                vals[w] = fe;
            } else {
                pts[w] = r;
                vals[w] = fr;
            }
        } else if fr < vals[m] {
            pts[w] = r;
            vals[w] = fr;
        } else {
            let k = c + (pts[w] - c) * 0.5;
            let fk = f(k);
            if fk < vals[w] {
                pts[w] = k;
                vals[w] = fk;
            } else {
                for i in [m, w] {
                    pts[i] = pts[b] + (pts[i] - pts[b]) * 0.5;
                    vals[i] = f(pts[i]);
                }
            }
        }
    }
    let mut best = 0;
    for i in 1..3 {
        if vals[i] < vals[best] {
            best = i;
        }
    }
    pts[best]
}

/// Zeros of `|v|` in one cell: grid minima refined by Nelder–Mead, order from the
/// log–log slope of the circle average of `|v|` over radii `1e−3..1e−2` of the cell diameter.
pub fn zero_census(v: &KernelVector, grid: CellGrid) -> Result<Vec<ZeroInfo>> {
    let s = sample_kernel(v, grid);
    let m = grid.m;
    let vmax = s.max_abs();
    let abs = |z: Complex64| {
        let x = v.eval(z);
        libm::sqrt(x[0].norm_sqr() + x[1].norm_sqr())
    };
    let mut found: Vec<ZeroInfo> = Vec::new();
    for i in 0..m {
        for j in 0..m {
            let here = s.abs_at(i * m + j);
            if here > SEED_FRACTION * vmax {
                continue;
            }
            let mut is_min = true;
            for (di, dj) in [(-1, -1), (-1, 0), (-1, 1), (0, -1), (0, 1), (1, -1), (1, 0), (1, 1)] {
                let ii = (i as i64 + di).rem_euclid(m as i64) as usize;
                let jj = (j as i64 + dj).rem_euclid(m as i64) as usize;
                if s.abs_at(ii * m + jj) < here {
                    is_min = false;
                }
            }
            if !is_min {
                continue;
            }
            let z = nelder_mead(&abs, grid.point(i * m + j), 1.0 / m as f64);
            let depth = abs(z) / vmax;
            if depth > ZERO_DEPTH {
                continue;
            }
            let (z, _, _) = reduce(z);
            if found.iter().any(|f| lattice_distance(f.location - z) < 1e-6) {
                continue;
            }
            let slope = log_slope(&abs, z);
            let order = libm::round(slope);
            if (slope - order).abs() > SLOPE_WINDOW || order < 1.0 {
                return Err(Error::IllConditionedZero { location: z, slope });
            }
            found.push(ZeroInfo { location: z, order: order as u32, slope, depth });
        }
    }
    found.sort_by(|a, b| a.location.im.total_cmp(&b.location.im).then(a.location.re.total_cmp(&b.location.re)));
    Ok(found)
}

fn log_slope(f: &impl Fn(Complex64) -> f64, z: Complex64) -> f64 {
    let diam = SQRT3;
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for s in 0..6 {
        let r = diam * 1e-3 * libm::pow(10.0, s as f64 / 5.0);
        let avg = (0..8).map(|a| f(z + Complex64::from_polar(r, a as f64 * PI / 4.0))).sum::<f64>() / 8.0;
        xs.push(libm::log(r));
        ys.push(libm::log(avg));
    }
    let n = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn theta_quasi_periodic() {
        let th = ThetaEvaluator::default();
        for z in [Complex64::new(0.1, 0.2), Complex64::new(-0.4, 0.3), Complex64::new(0.7, -0.6)] {
            let t = th.theta1(z);
            assert!((th.theta1(z + 1.0) + t).norm() < 1e-12 * t.norm().max(1.0));
            let rhs = -(-I * PI * OMEGA - I * 2.0 * PI * z).exp() * t;
            assert!((th.theta1(z + OMEGA) - rhs).norm() < 1e-12 * rhs.norm().max(1.0));
            assert!((th.derivatives(z)[0] - t).norm() < 1e-12);
        }
    }

    #[test]
    fn f_k_periodic_and_trivial_at_zero() {
        let k = Complex64::new(0.7, -0.4);
        let z = Complex64::new(0.3, 0.2);
        let f = f_k(k, z).unwrap();
        assert!((f_k(k, z + 1.0).unwrap() - f).norm() < 1e-10);
        assert!((f_k(k, z + OMEGA).unwrap() - f).norm() < 1e-10);
        assert!((f_k(ZERO, z).unwrap() - 1.0).norm() < 1e-14);
        assert!(matches!(f_k(k, ZERO), Err(Error::PoleAt { .. })));
    }

    #[test]
    fn f_k_derivative_matches_difference() {
        let (k, z) = (Complex64::new(1.1, 0.3), Complex64::new(0.2, 0.35));
        let h = 1e-6;
        let fd = (f_k(k + h, z).unwrap() - f_k(k - h, z).unwrap()) / (2.0 * h);
        assert!((fd - f_k_dk(k, z).unwrap()).norm() < 1e-7);
        let fd_im = (f_k(k + I * h, z).unwrap() - f_k(k - I * h, z).unwrap()) / (2.0 * h);
        // holomorphic in k
        assert!((fd_im - I * f_k_dk(k, z).unwrap()).norm() < 1e-7);
    }

    #[test]
    fn p_parity_and_pole() {
        let z = Complex64::new(0.31, 0.17);
        assert!((weierstrass_p(-z).unwrap() - weierstrass_p(z).unwrap()).norm() < 1e-10);
        assert!((weierstrass_p_prime(-z).unwrap() + weierstrass_p_prime(z).unwrap()).norm() < 1e-10);
        let e = 1e-3;
        assert!((weierstrass_p(Complex64::new(e, 0.0)).unwrap() * e * e - 1.0).norm() < 1e-5);
    }

    #[test]
    fn sampling_round_trip() {
        let grid = CellGrid::new(16);
        let terms = [(EisensteinInt::new(1, 2), Complex64::new(0.3, 0.1)), (EisensteinInt::new(4, -1), Complex64::new(-1.0, 0.5))];
        let s = sample_series(&grid, &terms);
        let z = grid.point(37);
        let direct: Complex64 = terms.iter().map(|(e, c)| c * Complex64::cis(crate::algebra::pairing(crate::algebra::MODE_UNIT * e.to_complex(), z))).sum();
        assert!((s[37] - direct).norm() < 1e-12);
        let back = project_series(&grid, &s, &[EisensteinInt::new(1, 2), EisensteinInt::new(4, -1), EisensteinInt::new(7, 2)]);
        assert!((back[0] - terms[0].1).norm() < 1e-12);
        assert!((back[1] - terms[1].1).norm() < 1e-12);
        assert!(back[2].norm() < 1e-12);
    }
}
