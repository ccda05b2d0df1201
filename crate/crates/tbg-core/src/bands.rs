//! Bloch bands of the chiral Hamiltonian `H_k(α) = [[0, (D(α)−k)*], [D(α)−k, 0]]`,
//! flat-band multiplicity and gaps, and bands of the full model with an anti-chiral term.

use alloc::vec::Vec;

use num_complex::Complex64;

use crate::algebra::{EisensteinInt, DualPoint, K, Q1, Q2};
use crate::fourier_ops::{CMatrix, OperatorSet, Space, SparseMatrix, TruncationParams};
use crate::linalg::hermitian_eigenvalues;
use crate::potential::{Component, FourierPotential};
use crate::{Error, Result};

/// Bands with `max_k E_j` below this are flat.
pub const FLAT_THRESHOLD: f64 = 1e-4;
/// A gap closer than this factor to the flatness threshold is inconclusive.
pub const GAP_MARGIN: f64 = 10.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Waypoint {
    Gamma,
    K,
    KPrime,
    M,
}

impl Waypoint {
    pub fn value(self) -> Complex64 {
        match self {
            Waypoint::Gamma => Complex64::new(0.0, 0.0),
            Waypoint::K => Complex64::new(K, 0.0),
            Waypoint::KPrime => Complex64::new(-K, 0.0),
            Waypoint::M => -Q2 / 2.0,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Waypoint::Gamma => "G",
            Waypoint::K => "K",
            Waypoint::KPrime => "K'",
            Waypoint::M => "M",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "G" | "Gamma" | "Γ" => Some(Waypoint::Gamma),
            "K" => Some(Waypoint::K),
            "K'" | "Kp" | "K′" => Some(Waypoint::KPrime),
            "M" => Some(Waypoint::M),
            _ => None,
        }
    }
}

/// Piecewise linear path through waypoints, `per_segment` samples per leg (endpoint included once).
pub fn k_path(points: &[Waypoint], per_segment: usize) -> Vec<Complex64> {
    let mut out = Vec::new();
    for w in points.windows(2) {
        let (a, b) = (w[0].value(), w[1].value());
        for i in 0..per_segment {
            out.push(a + (b - a) * (i as f64 / per_segment as f64));
        }
    }
    if let Some(last) = points.last() {
        out.push(last.value());
    }
    out
}

/// `n × n` grid over `C/Λ*` offset by half a cell, avoiding `Γ` and `±K`.
pub fn k_grid(n: usize) -> Vec<Complex64> {
    let mut out = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            let a = (i as f64 + 0.5) / n as f64;
            let b = (j as f64 + 0.5) / n as f64;
            out.push(Q1 * a + Q2 * b);
        }
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum BandModel {
    Chiral,
    /// Anti-chiral tunnelling `β·V` with `V = 2∂_z U₊`.
    FullBm { beta: f64 },
}

#[derive(Clone, Debug)]
pub struct BandGrid {
    pub ks: Vec<Complex64>,
    /// Chiral model: `E_1 ≤ E_2 ≤ …` (positive half; `E_{−j} = −E_j`).
    /// Full model: eigenvalues closest to zero, sorted.
    pub energies: Vec<Vec<f64>>,
    pub alpha: Complex64,
    pub model: BandModel,
}

impl BandGrid {
    /// Column `j` (1-based) of the chiral bands.
    pub fn band(&self, j: usize) -> Vec<f64> {
        self.energies.iter().map(|e| e[j - 1]).collect()
    }
}

/// `E_1, …, E_count`: the smallest singular values of `D(α) − k`.
pub fn bands_at(ops: &OperatorSet, alpha: Complex64, k: Complex64, count: usize) -> Vec<f64> {
    ops.dirac_smallest(alpha, -k, count).values
}

/// Full sorted spectrum of the doubled Hermitian matrix.
pub fn hermitian_spectrum(ops: &OperatorSet, alpha: Complex64, k: Complex64) -> Vec<f64> {
    let d = ops.dirac(alpha, -k);
    let n = d.nrows();
    let mut h = CMatrix::zeros(2 * n, 2 * n);
    h.view_mut((0, n), (n, n)).copy_from(&d.adjoint());
    h.view_mut((n, 0), (n, n)).copy_from(&d);
    hermitian_eigenvalues(&h)
}

pub fn compute_bands(p: &FourierPotential, alpha: Complex64, ks: &[Complex64], t: TruncationParams, count: usize, model: BandModel) -> BandGrid {
    let ops = OperatorSet::new(p, t);
    let energies = match model {
        BandModel::Chiral => ks.iter().map(|&k| bands_at(&ops, alpha, k, count)).collect(),
        BandModel::FullBm { beta } => {
            let v = anti_chiral(p, &ops);
            ks.iter().map(|&k| full_bm_bands_with(&ops, &v, alpha, beta, k, count)).collect()
        }
    };
    BandGrid { ks: ks.to_vec(), energies, alpha, model }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GapReport {
    pub m: usize,
    /// `max_k E_m` (zero when `m = 0`).
    pub flat_max: f64,
    /// `min_k E_{m+1}`.
    pub gap_min: f64,
}

/// Flat-band count and gap on a precomputed chiral band grid.
pub fn gap_from_grid(grid: &BandGrid) -> GapReport {
    let count = grid.energies.iter().map(|e| e.len()).min().unwrap_or(0);
    let max_of = |j: usize| grid.energies.iter().map(|e| e[j]).fold(0.0, f64::max);
    let min_of = |j: usize| grid.energies.iter().map(|e| e[j]).fold(f64::INFINITY, f64::min);
    let mut m = 0;
    while m < count && max_of(m) < FLAT_THRESHOLD {
        m += 1;
    }
    GapReport {
        m,
        flat_max: if m == 0 { 0.0 } else { max_of(m - 1) },
        gap_min: if m < count { min_of(m) } else { 0.0 },
    }
}

pub fn gap_report(p: &FourierPotential, alpha: Complex64, ks: &[Complex64], t: TruncationParams) -> GapReport {
    gap_from_grid(&compute_bands(p, alpha, ks, t, 4, BandModel::Chiral))
}

/// `m(α)`: the number of flat bands, with the smallest sampled value of the next band.
pub fn multiplicity(p: &FourierPotential, alpha: Complex64, ks: &[Complex64], t: TruncationParams) -> Result<GapReport> {
    let r = gap_report(p, alpha, ks, t);
    if r.gap_min < GAP_MARGIN * FLAT_THRESHOLD {
        return Err(Error::InconclusiveGap { flat_max: r.flat_max, gap_min: r.gap_min });
    }
    Ok(r)
}

/// Multiplication by `V = 2∂_z U₊` (second component → first): coefficients `i·s̄·a_s`.
pub fn anti_chiral(p: &FourierPotential, ops: &OperatorSet) -> SparseMatrix {
    let coeffs: Vec<(EisensteinInt, Complex64)> = p
        .coefficients(Component::Plus)
        .iter()
        .map(|(q, a): (&DualPoint, &Complex64)| (q.shift(), Complex64::new(0.0, 1.0) * q.shift_value().conj() * a))
        .collect();
    let (src, dst) = (&ops.basis.second, &ops.basis.first);
    let columns = src
        .modes()
        .iter()
        .map(|nu| {
            let mut col: Vec<(usize, Complex64)> = Vec::new();
            for (s, v) in &coeffs {
                if let Some(r) = dst.index_of_eisenstein(nu.eisenstein() + *s) {
                    match col.iter_mut().find(|e| e.0 == r) {
                        Some(e) => e.1 += v,
                        None => col.push((r, *v)),
                    }
                }
            }
            col
        })
        .collect();
    SparseMatrix { rows: dst.len(), cols: src.len(), columns }
}

/// `H = [[C, (D(α)−k)*], [D(α)−k, C]]` with `C = [[0, βV], [βV*, 0]]`.
pub fn full_bm_matrix(ops: &OperatorSet, v: &SparseMatrix, alpha: Complex64, beta: f64, k: Complex64) -> CMatrix {
    let d = ops.dirac(alpha, -k);
    let n = d.nrows();
    let n1 = ops.basis.dim(Space::First);
    let vd = v.to_dense() * Complex64::new(beta, 0.0);
    let mut c = CMatrix::zeros(n, n);
    c.view_mut((0, n1), (n1, n - n1)).copy_from(&vd);
    c.view_mut((n1, 0), (n - n1, n1)).copy_from(&vd.adjoint());
    let mut h = CMatrix::zeros(2 * n, 2 * n);
    h.view_mut((0, 0), (n, n)).copy_from(&c);
    h.view_mut((n, n), (n, n)).copy_from(&c);
    h.view_mut((0, n), (n, n)).copy_from(&d.adjoint());
    h.view_mut((n, 0), (n, n)).copy_from(&d);
    h
}

pub fn full_bm_bands_with(ops: &OperatorSet, v: &SparseMatrix, alpha: Complex64, beta: f64, k: Complex64, count: usize) -> Vec<f64> {
    let mut e = hermitian_eigenvalues(&full_bm_matrix(ops, v, alpha, beta, k));
    e.sort_by(|a, b| a.abs().total_cmp(&b.abs()));
    e.truncate(2 * count);
    e.sort_by(f64::total_cmp);
    e
}

/// The `2·count` eigenvalues of the full model closest to zero.
pub fn full_bm_bands(p: &FourierPotential, alpha: Complex64, beta: f64, k: Complex64, t: TruncationParams, count: usize) -> Vec<f64> {
    let ops = OperatorSet::new(p, t);
    let v = anti_chiral(p, &ops);
    full_bm_bands_with(&ops, &v, alpha, beta, k, count)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::OMEGA;
    use crate::potential::{build_u1, build_u2};

    const A2: f64 = 0.8537985;

    #[test]
    fn free_dirac_point() {
        let ops = OperatorSet::new(&build_u1(), TruncationParams::new(4));
        let e = bands_at(&ops, Complex64::new(0.0, 0.0), Waypoint::K.value(), 2);
        assert!(e[0] < 1e-12);
    }

    #[test]
    fn singular_values_match_hermitian() {
        let ops = OperatorSet::new(&build_u1(), TruncationParams::new(4));
        let k = Complex64::new(0.3, -0.7);
        let s = bands_at(&ops, Complex64::new(0.4, 0.0), k, 5);
        let h = hermitian_spectrum(&ops, Complex64::new(0.4, 0.0), k);
        let pos: Vec<f64> = h.iter().copied().filter(|x| *x > 0.0).collect();
        let neg: Vec<f64> = h.iter().copied().filter(|x| *x < 0.0).collect();
        for j in 0..5 {
            assert!((s[j] - pos[j]).abs() < 1e-10);
            assert!((s[j] + neg[neg.len() - 1 - j]).abs() < 1e-10);
        }
    }

    #[test]
    fn dirac_points_stay_at_zero() {
        let ops = OperatorSet::new(&build_u1(), TruncationParams::new(6));
        for w in [Waypoint::K, Waypoint::KPrime] {
            let e = bands_at(&ops, Complex64::new(0.5, 0.0), w.value(), 1);
            assert!(e[0] < 1e-8, "{}", e[0]);
        }
    }

    #[test]
    fn u2_flat_pair() {
        let r = multiplicity(&build_u2(), Complex64::new(A2, 0.0), &k_grid(4), TruncationParams::new(8)).unwrap();
        assert_eq!(r.m, 2);
        assert!(r.flat_max < 1e-4 && r.gap_min > 1e3 * r.flat_max);
    }

    #[test]
    fn full_model_reduces_and_rotates() {
        let p = build_u2();
        let t = TruncationParams::new(4);
        let ops = OperatorSet::new(&p, t);
        let k = Complex64::new(0.4, 0.9);
        let chiral = bands_at(&ops, Complex64::new(A2, 0.0), k, 3);
        let full = full_bm_bands(&p, Complex64::new(A2, 0.0), 0.0, k, t, 3);
        for j in 0..3 {
            assert!((full[3 + j] - chiral[j]).abs() < 1e-10);
        }
        let a = full_bm_bands(&p, Complex64::new(A2, 0.0), 0.7 * A2, k, t, 4);
        let b = full_bm_bands(&p, Complex64::new(A2, 0.0), 0.7 * A2, OMEGA * k, t, 4);
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-8, "{x} {y}");
        }
    }
}
