//! Flat-band topology from the theta frame `u_w(k) = F_k(z − w)·u₀`: Gramian, curvature
//! `H = ∂_k̄∂_k log g`, plaquette and boundary-integral Chern numbers.

use alloc::vec::Vec;

use num_complex::Complex64;

use crate::algebra::{dual_coords, pairing, z_map, PI, Q1, Q2, SQRT3};
use crate::fourier_ops::CMatrix;
use crate::spectral::KernelVector;
use crate::theta::{lattice_distance, reduce, sample_kernel, zero_census, CellGrid, SpinorSamples, ThetaEvaluator};
use crate::{Error, Result};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const I: Complex64 = Complex64::new(0.0, 1.0);

/// Momenta closer than `MASK_FRACTION·|q₁|` to `Λ*` are excluded.
pub const MASK_FRACTION: f64 = 0.05;
/// Gramian determinants below this are singular.
pub const SINGULAR_G: f64 = 1e-14;
/// Largest accepted distance of a plaquette sum from an integer.
pub const QUANTIZATION_GUARD: f64 = 0.05;

/// Distance from `k` to the dual lattice `Λ*`.
pub fn dual_lattice_distance(k: Complex64) -> f64 {
    z_map_distance(z_map(k)) * 4.0 * PI / SQRT3
}

fn z_map_distance(z: Complex64) -> f64 {
    lattice_distance(z)
}

/// Area of the cell `C/Λ*`.
pub fn dual_cell_area() -> f64 {
    (Q1.conj() * Q2).im.abs()
}

/// Holomorphic frame of `ker(D(α) + k)` built from one kernel vector `u₀` at `k = 0` and
/// the simple zeros `w` of `u₀`.
#[derive(Clone, Debug)]
pub struct ThetaFrame {
    pub grid: CellGrid,
    pub zeros: Vec<Complex64>,
    u0: SpinorSamples,
    // per zero and grid point: (i/2)(ζ − ζ̄) and log θ(ζ) with ζ = z − w
    phase: Vec<Vec<Complex64>>,
    log_den: Vec<Vec<Complex64>>,
    shift: Vec<Vec<Complex64>>,
}

impl ThetaFrame {
    pub fn new(u0: &KernelVector, zeros: Vec<Complex64>, grid: CellGrid) -> Self {
        let th = ThetaEvaluator::default();
        let samples = sample_kernel(u0, grid);
        let mut phase = Vec::new();
        let mut log_den = Vec::new();
        let mut shift = Vec::new();
        for &w in &zeros {
            let zs: Vec<Complex64> = (0..grid.len()).map(|i| grid.point(i) - w).collect();
            phase.push(zs.iter().map(|z| I * 0.5 * (z - z.conj())).collect());
            log_den.push(zs.iter().map(|&z| th.log_theta1(z)).collect());
            shift.push(zs);
        }
        Self { grid, zeros, u0: samples, phase, log_den, shift }
    }

    /// Frame from the simple zeros of `u₀` found by [`zero_census`].
    pub fn from_kernel(u0: &KernelVector, grid: CellGrid) -> Result<Self> {
        let zeros: Vec<Complex64> = zero_census(u0, CellGrid::new(grid.m.max(64)))?.into_iter().filter(|z| z.order == 1).map(|z| z.location).collect();
        if zeros.is_empty() {
            return Err(Error::RankChange { expected: 1, found: 0 });
        }
        Ok(Self::new(u0, zeros, grid))
    }

    pub fn rank(&self) -> usize {
        self.zeros.len()
    }

    /// Frame vectors and their `k`-derivatives at `k`.
    pub fn vectors(&self, k: Complex64, with_derivative: bool) -> (Vec<SpinorSamples>, Vec<SpinorSamples>) {
        let th = ThetaEvaluator::default();
        let zk = z_map(k);
        let dz = SQRT3 / (I * 4.0 * PI);
        let mut vs = Vec::new();
        let mut ds = Vec::new();
        for w in 0..self.rank() {
            let mut v = self.u0.clone();
            let mut d = self.u0.clone();
            for idx in 0..self.grid.len() {
                let zeta = self.shift[w][idx] - zk;
                let (z0, m, n) = reduce(zeta);
                let t = th.derivatives(z0);
                let nf = n as f64;
                let log_num = t[0].ln() + I * PI * ((m + n).rem_euclid(2) as f64) - I * PI * nf * nf * crate::algebra::OMEGA - I * 2.0 * PI * nf * z0;
                let f = (self.phase[w][idx] * k + log_num - self.log_den[w][idx]).exp();
                let df = f * (self.phase[w][idx] - (t[1] / t[0] - I * 2.0 * PI * nf) * dz);
                for c in 0..2 {
                    let u = self.u0.comps[c][idx];
                    v.comps[c][idx] = f * u;
                    if with_derivative {
                        d.comps[c][idx] = df * u;
                    }
                }
            }
            vs.push(v);
            if with_derivative {
                ds.push(d);
            }
        }
        (vs, ds)
    }

    pub fn gramian(&self, k: Complex64) -> CMatrix {
        gram_matrix(&self.vectors(k, false).0)
    }
}

/// `G_ij = ⟨v_i, v_j⟩`.
pub fn gram_matrix(v: &[SpinorSamples]) -> CMatrix {
    cross_gram(v, v)
}

/// `M_ij = ⟨a_i, b_j⟩`.
pub fn cross_gram(a: &[SpinorSamples], b: &[SpinorSamples]) -> CMatrix {
    CMatrix::from_fn(a.len(), b.len(), |i, j| a[i].inner(&b[j]))
}

pub fn gram_det(g: &CMatrix) -> f64 {
    g.determinant().re
}

/// `H(k) = tr(G⁻¹∂_k̄∂_kG) − tr(G⁻¹∂_k̄G G⁻¹∂_kG)`; returns `(H, |Im H|)`.
pub fn curvature(frame: &ThetaFrame, k: Complex64) -> Result<(f64, f64)> {
    let (v, d) = frame.vectors(k, true);
    let g = gram_matrix(&v);
    let det = gram_det(&g);
    if !(det > SINGULAR_G) {
        return Err(Error::SingularSample { k, g: det });
    }
    let gi = g.clone().try_inverse().ok_or(Error::SingularSample { k, g: det })?;
    let a = cross_gram(&d, &v);
    let abar = cross_gram(&v, &d);
    let b = cross_gram(&d, &d);
    let h = (&gi * b).trace() - (&gi * abar * &gi * a).trace();
    Ok((h.re, h.im.abs()))
}

/// `∂_k log g = tr(G⁻¹∂_kG)`.
pub fn dlog_g(frame: &ThetaFrame, k: Complex64) -> Result<Complex64> {
    let (v, d) = frame.vectors(k, true);
    let g = gram_matrix(&v);
    let det = gram_det(&g);
    let gi = g.try_inverse().ok_or(Error::SingularSample { k, g: det })?;
    Ok((gi * cross_gram(&d, &v)).trace())
}

#[derive(Clone, Debug)]
pub struct CurvatureField {
    pub n: usize,
    pub ks: Vec<Complex64>,
    pub h: Vec<f64>,
    pub g: Vec<f64>,
    pub masked: Vec<bool>,
    pub max_imag: f64,
}

impl CurvatureField {
    /// `∫ H` over `C/Λ*` by the midpoint rule (masked cells count as their neighbours' mean).
    pub fn integral(&self) -> f64 {
        let live: Vec<f64> = self.h.iter().zip(&self.masked).filter(|(_, m)| !**m).map(|(h, _)| *h).collect();
        let mean_live = live.iter().sum::<f64>() / live.len().max(1) as f64;
        let total: f64 = self.h.iter().zip(&self.masked).map(|(h, m)| if *m { mean_live } else { *h }).sum();
        total * dual_cell_area() / self.ks.len() as f64
    }

    /// `c₁ = −(1/π) ∫ H`.
    pub fn chern(&self) -> f64 {
        -self.integral() / PI
    }

    pub fn max(&self) -> f64 {
        self.unmasked().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.unmasked().fold(f64::INFINITY, f64::min)
    }

    fn unmasked(&self) -> impl Iterator<Item = f64> + '_ {
        self.h.iter().zip(&self.masked).filter(|(_, m)| !**m).map(|(h, _)| *h)
    }
}

/// Offset grid point `((a + ½)/n) q₁ + ((b + ½)/n) q₂`.
pub fn offset_point(n: usize, a: usize, b: usize) -> Complex64 {
    Q1 * ((a as f64 + 0.5) / n as f64) + Q2 * ((b as f64 + 0.5) / n as f64)
}

pub fn curvature_field(frame: &ThetaFrame, n: usize) -> Result<CurvatureField> {
    let mask = MASK_FRACTION * Q1.norm();
    let mut out = CurvatureField { n, ks: Vec::new(), h: Vec::new(), g: Vec::new(), masked: Vec::new(), max_imag: 0.0 };
    for a in 0..n {
        for b in 0..n {
            let k = offset_point(n, a, b);
            out.ks.push(k);
            if dual_lattice_distance(k) < mask {
                out.h.push(0.0);
                out.g.push(0.0);
                out.masked.push(true);
                continue;
            }
            let (h, im) = curvature(frame, k)?;
            out.h.push(h);
            out.g.push(gram_det(&frame.gramian(k)));
            out.masked.push(false);
            out.max_imag = out.max_imag.max(im / h.abs().max(1e-300));
        }
    }
    Ok(out)
}

/// Chern number from link variables `det(ψ(k)†ψ(k'))` on the offset `n × n` grid:
/// `c₁ = −(1/2π) Σ arg`, plaquettes counterclockwise in `(q₁, q₂)`.
pub fn chern_plaquette(frame: &ThetaFrame, n: usize) -> Result<i64> {
    let value = plaquette_sum(frame, n)?;
    let rounded = libm::round(value);
    if (value - rounded).abs() > QUANTIZATION_GUARD {
        return Err(Error::NonQuantized { value });
    }
    Ok(rounded as i64)
}

/// Unrounded plaquette sum. Frames at `k + q₁` and `k + q₂` are computed directly; they span
/// the fibres identified with those at `k` through multiplication by `e^{−i⟨p,z⟩}`.
pub fn plaquette_sum(frame: &ThetaFrame, n: usize) -> Result<f64> {
    let mut frames: Vec<Vec<SpinorSamples>> = Vec::with_capacity((n + 1) * (n + 1));
    for a in 0..=n {
        for b in 0..=n {
            let (v, _) = frame.vectors(offset_point(n, a, b), false);
            let r = gram_matrix(&v).rank(1e-12);
            if r != frame.rank() {
                return Err(Error::RankChange { expected: frame.rank(), found: r });
            }
            frames.push(v);
        }
    }
    let at = |a: usize, b: usize| &frames[a * (n + 1) + b];
    let link = |x: &[SpinorSamples], y: &[SpinorSamples]| {
        let d = cross_gram(y, x).determinant();
        d / d.norm()
    };
    let mut total = 0.0;
    for a in 0..n {
        for b in 0..n {
            let p = link(at(a, b), at(a + 1, b)) * link(at(a + 1, b), at(a + 1, b + 1)) * link(at(a + 1, b + 1), at(a, b + 1)) * link(at(a, b + 1), at(a, b));
            total += p.arg();
        }
    }
    Ok(-total / (2.0 * PI))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundaryReport {
    /// `(i/2π) ∮_{∂F} ∂_k log g dk`
    pub boundary: f64,
    /// `−(i/2π) ∮_{|k|=r} ∂_k log g dk`
    pub puncture: f64,
    pub total: f64,
}

#[derive(Clone, Copy, Debug)]
pub struct ContourSpec {
    /// Center of the parallelogram `{c + a q₁ + b q₂ : |a|, |b| ≤ ½}`.
    pub center: Complex64,
    pub radius: f64,
    pub nodes: usize,
}

impl Default for ContourSpec {
    fn default() -> Self {
        Self { center: ZERO, radius: 0.005 * Q1.norm(), nodes: 48 }
    }
}

/// Gauss–Legendre nodes and weights on `[−1, 1]` by Newton iteration.
pub fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let mut x = libm::cos(PI * (i as f64 + 0.75) / (n as f64 + 0.5));
        let mut dp = 1.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        out.push((x, 2.0 / ((1.0 - x * x) * dp * dp)));
    }
    out
}

fn segment_integral(frame: &ThetaFrame, a: Complex64, b: Complex64, rule: &[(f64, f64)]) -> Result<Complex64> {
    let mid = (a + b) / 2.0;
    let half = (b - a) / 2.0;
    let mut acc = ZERO;
    for &(x, w) in rule {
        acc += dlog_g(frame, mid + half * x)? * w;
    }
    Ok(acc * half)
}

/// Decomposition `c₁ = (i/2π)∮_{∂F} ∂_k log g dk − (i/2π)∮_{∂D(0,r)} ∂_k log g dk`.
pub fn boundary_integral_c1(frame: &ThetaFrame, spec: &ContourSpec) -> Result<BoundaryReport> {
    let mask = MASK_FRACTION * Q1.norm();
    let corners = [
        spec.center + (-Q1 - Q2) / 2.0,
        spec.center + (Q1 - Q2) / 2.0,
        spec.center + (Q1 + Q2) / 2.0,
        spec.center + (-Q1 + Q2) / 2.0,
    ];
    // closest approach of each edge to Λ*
    for e in 0..4 {
        let (a, b) = (corners[e], corners[(e + 1) % 4]);
        for s in 0..=200 {
            let k = a + (b - a) * (s as f64 / 200.0);
            let d = dual_lattice_distance(k);
            if d < mask {
                return Err(Error::ContourTooClose { distance: d });
            }
        }
    }
    if spec.radius < 1e-6 || spec.radius > mask {
        return Err(Error::ContourTooClose { distance: spec.radius });
    }
    let inside: Vec<Complex64> = {
        // Λ* points inside the parallelogram
        let (ca, cb) = dual_coords(spec.center);
        let mut pts = Vec::new();
        for m in -2..=2 {
            for n in -2..=2 {
                let (a, b) = (m as f64 - ca, n as f64 - cb);
                if a.abs() < 0.5 && b.abs() < 0.5 {
                    pts.push(Q1 * m as f64 + Q2 * n as f64);
                }
            }
        }
        pts
    };
    let rule = gauss_legendre(spec.nodes);
    // (q₁, q₂) is positively oriented, so corners run counterclockwise
    let mut boundary = ZERO;
    for e in 0..4 {
        boundary += segment_integral(frame, corners[e], corners[(e + 1) % 4], &rule)?;
    }
    let mut puncture = ZERO;
    for c in &inside {
        let m = 4 * spec.nodes;
        let mut acc = ZERO;
        for j in 0..m {
            let t = 2.0 * PI * j as f64 / m as f64;
            let k = c + Complex64::from_polar(spec.radius, t);
            acc += dlog_g(frame, k)? * (I * Complex64::from_polar(spec.radius, t));
        }
        puncture += acc * (2.0 * PI / m as f64);
    }
    let bterm = (I / (2.0 * PI) * boundary).re;
    let pterm = (-I / (2.0 * PI) * puncture).re;
    Ok(BoundaryReport { boundary: bterm, puncture: pterm, total: bterm + pterm })
}

/// Vanishing order of `g` at `k = 0` from the log–log slope over radii `1e−3..1e−2·|q₁|`,
/// and the fitted `g₀` in `g ≈ g₀|k|^order`.
pub fn gramian_vanishing_order(frame: &ThetaFrame) -> (f64, f64) {
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for s in 0..6 {
        let r = Q1.norm() * 1e-3 * libm::pow(10.0, s as f64 / 5.0);
        let mut avg = 0.0;
        for a in 0..6 {
            avg += gram_det(&frame.gramian(Complex64::from_polar(r, a as f64 * PI / 3.0 + 0.1)));
        }
        xs.push(libm::log(r));
        ys.push(libm::log(avg / 6.0));
    }
    let n = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let slope = sxy / sxx;
    (slope, libm::exp(my - slope * mx))
}

/// `|e_p(k)|^{2r} g(k + p) / g(k) − 1` for rank `r`.
pub fn quasi_periodicity_defect(frame: &ThetaFrame, k: Complex64, p: Complex64) -> f64 {
    let e = crate::theta::e_p(k, p).norm();
    let r = frame.rank() as i32;
    let lhs = libm::pow(e, 2.0 * r as f64) * gram_det(&frame.gramian(k + p));
    let rhs = gram_det(&frame.gramian(k));
    (lhs / rhs - 1.0).abs()
}

/// `e^{−i⟨p,z⟩}` on the grid (the identification between fibres at `k` and `k + p`).
pub fn tau_inverse(grid: &CellGrid, p: Complex64) -> Vec<Complex64> {
    (0..grid.len()).map(|i| Complex64::cis(-pairing(p, grid.point(i)))).collect()
}

/// Link variables of a constant frame: every plaquette is trivial.
pub fn constant_frame_plaquette(v: &[SpinorSamples], n: usize) -> f64 {
    let d = cross_gram(v, v).determinant();
    let l = d / d.norm();
    let mut total = 0.0;
    for _ in 0..n * n {
        total += (l * l * l * l).arg();
    }
    -total / (2.0 * PI)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        let r = gauss_legendre(8);
        let s: f64 = r.iter().map(|(x, w)| w * x.powi(6)).sum();
        assert!((s - 2.0 / 7.0).abs() < 1e-14);
        assert!((r.iter().map(|p| p.1).sum::<f64>() - 2.0).abs() < 1e-14);
    }

    fn u2_frame() -> ThetaFrame {
        use crate::fourier_ops::{OperatorSet, TruncationParams};
        use crate::spectral::{classify_with, kernel_basis_with, BlockSpectra};
        let ops = OperatorSet::new(&crate::potential::build_u2(), TruncationParams::new(6));
        let spectra = BlockSpectra::compute(&ops, [true; 3]).unwrap();
        let a = classify_with(&ops, &spectra, Complex64::new(0.8538, 0.0)).unwrap().alpha;
        let v = kernel_basis_with(&ops, a, ZERO).unwrap();
        let u0 = v.iter().find(|x| x.subspace == Some(0)).unwrap();
        ThetaFrame::from_kernel(u0, CellGrid::new(24)).unwrap()
    }

    #[test]
    fn double_angle_frame_is_rank_two_with_unit_chern() {
        let f = u2_frame();
        assert_eq!(f.rank(), 2);
        assert_eq!(chern_plaquette(&f, 6).unwrap(), -1);
        let (h, im) = curvature(&f, Complex64::new(0.9, -0.4)).unwrap();
        assert!(h > 0.0 && im < 1e-10 * h);
    }

    #[test]
    fn constant_frame_is_trivial() {
        let f = u2_frame();
        let (v, _) = f.vectors(Complex64::new(0.3, 0.2), false);
        assert_eq!(constant_frame_plaquette(&v, 8), 0.0);
    }

    #[test]
    fn dual_distance() {
        assert!(dual_lattice_distance(Q1 + Q2 * 2.0) < 1e-12);
        assert!((dual_lattice_distance(Complex64::new(0.1, 0.0)) - 0.1).abs() < 1e-12);
    }
}
