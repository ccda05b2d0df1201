//! Truncated Fourier-space operators.
//!
//! Component 1 lives on modes `ν ∈ −K + Λ*`, component 2 on `ν ∈ K + Λ*`, with
//! `2D_z̄ e_ν = ν e_ν`. Vectors on both components are laid out as
//! `[component 1 | component 2]`.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::algebra::{
    mode_orbit, rotate_mode, rotate_mode_omega, EisensteinInt, ModeIndex, Sector, MODE_UNIT, OMEGA, SQRT3,
};
use crate::linalg::{inverse_iteration, largest_singular_with, smallest_singular, Factored, SmallSingular};
use crate::potential::{Component, FourierPotential};
use crate::{Error, Result};

pub type CMatrix = DMatrix<Complex64>;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Default distance below which `k` counts as a Dirac point.
pub const DIRAC_TOLERANCE: f64 = 1e-6;
/// Diagonal entries below this switch `dirac_smallest` to a plain LU.
pub const SCHUR_FLOOR: f64 = 1e-2;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct TruncationParams {
    /// Keep modes whose whole rotation orbit has `max(|m|, |n|) ≤ radius`.
    pub radius: i64,
}

impl TruncationParams {
    pub const fn new(radius: i64) -> Self {
        Self { radius }
    }
}

/// Rotation-closed set of modes in one sector.
#[derive(Clone, Debug)]
pub struct ModeSet {
    sector: Sector,
    modes: Vec<ModeIndex>,
    index: BTreeMap<ModeIndex, usize>,
}

impl ModeSet {
    pub fn new(sector: Sector, t: TruncationParams) -> Self {
        let r = t.radius;
        let mut modes = Vec::new();
        for m in -r..=r {
            for n in -r..=r {
                let nu = ModeIndex::new(sector, m, n);
                if mode_orbit(nu).iter().all(|x| x.radius() <= r) {
                    modes.push(nu);
                }
            }
        }
        modes.sort();
        let index = modes.iter().enumerate().map(|(i, m)| (*m, i)).collect();
        Self { sector, modes, index }
    }

    pub fn sector(&self) -> Sector {
        self.sector
    }

    pub fn len(&self) -> usize {
        self.modes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }

    pub fn modes(&self) -> &[ModeIndex] {
        &self.modes
    }

    pub fn index_of(&self, m: &ModeIndex) -> Option<usize> {
        self.index.get(m).copied()
    }

    pub fn index_of_eisenstein(&self, e: EisensteinInt) -> Option<usize> {
        ModeIndex::from_eisenstein(e).and_then(|m| self.index_of(&m))
    }

    /// Orbits `[ν, ων, ω̄ν]` as index triples, one per orbit, in mode order.
    pub fn orbits(&self) -> Vec<[usize; 3]> {
        let mut seen = vec![false; self.modes.len()];
        let mut out = Vec::with_capacity(self.modes.len() / 3);
        for (i, &nu) in self.modes.iter().enumerate() {
            if seen[i] {
                continue;
            }
            let a = self.index[&rotate_mode_omega(nu)];
            let b = self.index[&rotate_mode(nu)];
            seen[i] = true;
            seen[a] = true;
            seen[b] = true;
            out.push([i, a, b]);
        }
        out
    }
}

/// Which part of the two-component space an operator acts on.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Space {
    First,
    Second,
    Both,
}

/// Mode sets for both components and the symmetrized rotational bases.
#[derive(Clone, Debug)]
pub struct SectorBasis {
    pub truncation: TruncationParams,
    pub first: ModeSet,
    pub second: ModeSet,
    pub orbits_first: Vec<[usize; 3]>,
    pub orbits_second: Vec<[usize; 3]>,
}

impl SectorBasis {
    pub fn new(t: TruncationParams) -> Self {
        let first = ModeSet::new(Sector::MinusK, t);
        let second = ModeSet::new(Sector::PlusK, t);
        let orbits_first = first.orbits();
        let orbits_second = second.orbits();
        Self { truncation: t, first, second, orbits_first, orbits_second }
    }

    pub fn dim(&self, space: Space) -> usize {
        match space {
            Space::First => self.first.len(),
            Space::Second => self.second.len(),
            Space::Both => self.first.len() + self.second.len(),
        }
    }

    /// Dimension of the rotational block `j` inside `space`.
    pub fn block_dim(&self, space: Space) -> usize {
        match space {
            Space::First => self.orbits_first.len(),
            Space::Second => self.orbits_second.len(),
            Space::Both => self.orbits_first.len() + self.orbits_second.len(),
        }
    }

    /// Mode of row `i` in a `Space::Both` vector.
    pub fn mode(&self, i: usize) -> ModeIndex {
        let n1 = self.first.len();
        if i < n1 {
            self.first.modes()[i]
        } else {
            self.second.modes()[i - n1]
        }
    }

    /// Rows of the symmetrized vectors `e_[ν]` of label `j` (`u(ωz) = ω̄^j u(z)`):
    /// column `c` has entries `(row, weight)` at `ν, ων, ω̄ν` with weights `(1, ω̄^j, ω^j)/√3`.
    pub fn subspace_columns(&self, space: Space, j: u8) -> Vec<[(usize, Complex64); 3]> {
        let w = subspace_weights(j);
        let mut cols = Vec::new();
        let n1 = self.first.len();
        if matches!(space, Space::First | Space::Both) {
            for o in &self.orbits_first {
                cols.push([(o[0], w[0]), (o[1], w[1]), (o[2], w[2])]);
            }
        }
        if matches!(space, Space::Second | Space::Both) {
            let off = if space == Space::Both { n1 } else { 0 };
            for o in &self.orbits_second {
                cols.push([(o[0] + off, w[0]), (o[1] + off, w[1]), (o[2] + off, w[2])]);
            }
        }
        cols
    }

    /// Dense isometry `B_j` whose columns are the `e_[ν]`.
    pub fn subspace_matrix(&self, space: Space, j: u8) -> CMatrix {
        let cols = self.subspace_columns(space, j);
        let mut b = CMatrix::zeros(self.dim(space), cols.len());
        for (c, col) in cols.iter().enumerate() {
            for &(r, w) in col {
                b[(r, c)] = w;
            }
        }
        b
    }

    /// Permutation matrix of `Ω u(z) = u(ωz)`, i.e. `Ω e_ν = e_{ω̄ν}`.
    pub fn rotation_matrix(&self, space: Space) -> CMatrix {
        let n = self.dim(space);
        let mut m = CMatrix::zeros(n, n);
        let n1 = self.first.len();
        let mut fill = |set: &ModeSet, off: usize| {
            for (i, nu) in set.modes().iter().enumerate() {
                let r = set.index_of(&rotate_mode(*nu)).expect("closed under rotation");
                m[(r + off, i + off)] = ONE;
            }
        };
        match space {
            Space::First => fill(&self.first, 0),
            Space::Second => fill(&self.second, 0),
            Space::Both => {
                fill(&self.first, 0);
                fill(&self.second, n1);
            }
        }
        m
    }

    pub fn nu_first(&self) -> Vec<Complex64> {
        self.first.modes().iter().map(|m| m.nu()).collect()
    }

    pub fn nu_second(&self) -> Vec<Complex64> {
        self.second.modes().iter().map(|m| m.nu()).collect()
    }
}

/// `(1, ω̄^j, ω^j)/√3`.
pub fn subspace_weights(j: u8) -> [Complex64; 3] {
    let s = 1.0 / SQRT3;
    let w = OMEGA.powu(j as u32 % 3);
    [Complex64::new(s, 0.0), w.conj() * s, w * s]
}

/// Compressed sparse operator given column-wise.
#[derive(Clone, Debug)]
pub struct SparseMatrix {
    pub rows: usize,
    pub cols: usize,
    /// `columns[c]` lists `(row, value)`.
    pub columns: Vec<Vec<(usize, Complex64)>>,
}

impl SparseMatrix {
    pub fn nnz(&self) -> usize {
        self.columns.iter().map(Vec::len).sum()
    }

    pub fn to_dense(&self) -> CMatrix {
        let mut m = CMatrix::zeros(self.rows, self.cols);
        for (c, col) in self.columns.iter().enumerate() {
            for &(r, v) in col {
                m[(r, c)] += v;
            }
        }
        m
    }

    pub fn mul_vec(&self, x: &[Complex64]) -> Vec<Complex64> {
        let mut y = vec![ZERO; self.rows];
        for (c, col) in self.columns.iter().enumerate() {
            if x[c] == ZERO {
                continue;
            }
            for &(r, v) in col {
                y[r] += v * x[c];
            }
        }
        y
    }

    /// `self · x` for a dense block of columns.
    pub fn mul_mat(&self, x: &CMatrix) -> CMatrix {
        let mut y = CMatrix::zeros(self.rows, x.ncols());
        for (c, col) in self.columns.iter().enumerate() {
            for &(r, v) in col {
                for j in 0..x.ncols() {
                    y[(r, j)] += v * x[(c, j)];
                }
            }
        }
        y
    }

    pub fn adjoint(&self) -> SparseMatrix {
        let mut columns = vec![Vec::new(); self.rows];
        for (c, col) in self.columns.iter().enumerate() {
            for &(r, v) in col {
                columns[r].push((c, v.conj()));
            }
        }
        SparseMatrix { rows: self.cols, cols: self.rows, columns }
    }
}

/// Distance from `k` to the Dirac set `(K + Λ*) ∪ (−K + Λ*)`.
pub fn dirac_distance(k: Complex64) -> f64 {
    // in mode units the Dirac set is every (M, N) not ≡ (0, 0) mod 3 along the ±K classes
    let e = k / MODE_UNIT;
    let b = e.im * 2.0 / SQRT3;
    let a = e.re + b / 2.0;
    let (a0, b0) = (libm::floor(a) as i64, libm::floor(b) as i64);
    let mut best = f64::INFINITY;
    for da in -2..=3 {
        for db in -2..=3 {
            let p = EisensteinInt::new(a0 + da, b0 + db);
            if Sector::of(p).is_some() {
                best = best.min((MODE_UNIT * p.to_complex() - k).norm());
            }
        }
    }
    best
}

fn check_admissible(k: Complex64) -> Result<()> {
    let d = dirac_distance(k);
    if d < DIRAC_TOLERANCE {
        Err(Error::NearDiracPoint { k, distance: d })
    } else {
        Ok(())
    }
}

/// Diagonal of `R(k) = (2D_z̄ − k)⁻¹` on the modes of `set`.
pub fn resolvent_diag(k: Complex64, set: &ModeSet) -> Result<Vec<Complex64>> {
    check_admissible(k)?;
    Ok(set.modes().iter().map(|m| ONE / (m.nu() - k)).collect())
}

/// Multiplication by `U₊` (second component → first) or `U₋` (first → second).
/// Shifts leaving the truncation are dropped.
pub fn potential_matrix(p: &FourierPotential, b: &SectorBasis, which: Component) -> SparseMatrix {
    let (src, dst, sign) = match which {
        Component::Plus => (&b.second, &b.first, 1),
        Component::Minus => (&b.first, &b.second, -1),
    };
    let coeffs = p.coefficients(which);
    let columns = src
        .modes()
        .iter()
        .map(|nu| {
            let mut col: Vec<(usize, Complex64)> = Vec::new();
            for (q, a) in coeffs {
                let s = q.shift();
                let target = if sign > 0 { nu.eisenstein() + s } else { nu.eisenstein() - s };
                if let Some(r) = dst.index_of_eisenstein(target) {
                    match col.iter_mut().find(|(rr, _)| *rr == r) {
                        Some(e) => e.1 += a,
                        None => col.push((r, *a)),
                    }
                }
            }
            col.sort_by_key(|e| e.0);
            col
        })
        .collect();
    SparseMatrix { rows: dst.len(), cols: src.len(), columns }
}

/// Truncated operators for one potential, reusable across `k` and `α`.
#[derive(Clone, Debug)]
pub struct OperatorSet {
    pub basis: SectorBasis,
    pub u_plus: SparseMatrix,
    pub u_minus: SparseMatrix,
}

impl OperatorSet {
    pub fn new(p: &FourierPotential, t: TruncationParams) -> Self {
        let basis = SectorBasis::new(t);
        let u_plus = potential_matrix(p, &basis, Component::Plus);
        let u_minus = potential_matrix(p, &basis, Component::Minus);
        Self { basis, u_plus, u_minus }
    }

    /// `A_k = R(k) U₊ R(k) U₋` on the first component.
    pub fn a_k(&self, k: Complex64) -> Result<CMatrix> {
        let r1 = resolvent_diag(k, &self.basis.first)?;
        let r2 = resolvent_diag(k, &self.basis.second)?;
        let n1 = self.basis.first.len();
        let mut a = CMatrix::zeros(n1, n1);
        for c in 0..n1 {
            for &(m, v) in &self.u_minus.columns[c] {
                let w = v * r2[m];
                for &(r, u) in &self.u_plus.columns[m] {
                    a[(r, c)] += r1[r] * u * w;
                }
            }
        }
        Ok(a)
    }

    /// `T_k = R(k)V` on both components.
    pub fn t_k(&self, k: Complex64) -> Result<CMatrix> {
        let r1 = resolvent_diag(k, &self.basis.first)?;
        let r2 = resolvent_diag(k, &self.basis.second)?;
        let n1 = self.basis.first.len();
        let n = self.basis.dim(Space::Both);
        let mut t = CMatrix::zeros(n, n);
        for (c, col) in self.u_plus.columns.iter().enumerate() {
            for &(r, v) in col {
                t[(r, n1 + c)] = r1[r] * v;
            }
        }
        for (c, col) in self.u_minus.columns.iter().enumerate() {
            for &(r, v) in col {
                t[(n1 + r, c)] = r2[r] * v;
            }
        }
        Ok(t)
    }

    /// `D(α) + shift = [[2D_z̄ + shift, αU₊], [αU₋, 2D_z̄ + shift]]`.
    pub fn dirac(&self, alpha: Complex64, shift: Complex64) -> CMatrix {
        let n1 = self.basis.first.len();
        let n = self.basis.dim(Space::Both);
        let mut d = CMatrix::zeros(n, n);
        for (i, m) in self.basis.first.modes().iter().enumerate() {
            d[(i, i)] = m.nu() + shift;
        }
        for (i, m) in self.basis.second.modes().iter().enumerate() {
            d[(n1 + i, n1 + i)] = m.nu() + shift;
        }
        for (c, col) in self.u_plus.columns.iter().enumerate() {
            for &(r, v) in col {
                d[(r, n1 + c)] += alpha * v;
            }
        }
        for (c, col) in self.u_minus.columns.iter().enumerate() {
            for &(r, v) in col {
                d[(n1 + r, c)] += alpha * v;
            }
        }
        d
    }

    /// `(D(α) + shift)·x`, or the adjoint product, from the sparse factors.
    pub fn dirac_apply(&self, alpha: Complex64, shift: Complex64, x: &CMatrix, adjoint: bool) -> CMatrix {
        let n1 = self.basis.first.len();
        let n2 = self.basis.second.len();
        let (a, up, um) = if adjoint { (alpha.conj(), self.u_minus.adjoint(), self.u_plus.adjoint()) } else { (alpha, self.u_plus.clone(), self.u_minus.clone()) };
        let diag = |m: &ModeIndex| if adjoint { (m.nu() + shift).conj() } else { m.nu() + shift };
        let d1: Vec<Complex64> = self.basis.first.modes().iter().map(diag).collect();
        let d2: Vec<Complex64> = self.basis.second.modes().iter().map(diag).collect();
        let x1 = x.rows(0, n1).into_owned();
        let x2 = x.rows(n1, n2).into_owned();
        let y1 = CMatrix::from_fn(n1, x.ncols(), |r, c| d1[r] * x1[(r, c)]) + up.mul_mat(&x2) * a;
        let y2 = CMatrix::from_fn(n2, x.ncols(), |r, c| d2[r] * x2[(r, c)]) + um.mul_mat(&x1) * a;
        let mut y = CMatrix::zeros(n1 + n2, x.ncols());
        y.rows_mut(0, n1).copy_from(&y1);
        y.rows_mut(n1, n2).copy_from(&y2);
        y
    }

    /// `‖D(α) + shift‖` by sparse power iteration.
    pub fn dirac_norm(&self, alpha: Complex64, shift: Complex64) -> f64 {
        largest_singular_with(self.basis.dim(Space::Both), |x| self.dirac_apply(alpha, shift, x, false), |x| self.dirac_apply(alpha, shift, x, true))
    }

    /// `D(α)` at `k = 0` compressed from label `j` to label `j − 1`, the only label it reaches.
    pub fn dirac_block(&self, alpha: Complex64, j: u8) -> CMatrix {
        let d = self.dirac(alpha, ZERO);
        compress(&d, &self.basis, Space::Both, (j + 2) % 3, j)
    }

    /// Smallest singular triplets of `D(α) + shift`, solving through the Schur complement
    /// `S = Δ₂ − α² U₋ Δ₁⁻¹ U₊` of the diagonal block `Δ₁` when it is well conditioned.
    pub fn dirac_smallest(&self, alpha: Complex64, shift: Complex64, count: usize) -> SmallSingular {
        let m = self.dirac(alpha, shift);
        let d1: Vec<Complex64> = self.basis.first.modes().iter().map(|x| x.nu() + shift).collect();
        let d2: Vec<Complex64> = self.basis.second.modes().iter().map(|x| x.nu() + shift).collect();
        if m.nrows() <= 96 || d1.iter().any(|d| d.norm() < SCHUR_FLOOR) {
            return smallest_singular(&m, count);
        }
        let (n1, n2) = (d1.len(), d2.len());
        let mut s = CMatrix::from_diagonal(&nalgebra::DVector::from_vec(d2.clone()));
        let a2 = alpha * alpha;
        for (c, col) in self.u_plus.columns.iter().enumerate() {
            for &(r, v) in col {
                let w = a2 * v / d1[r];
                for &(row, u) in &self.u_minus.columns[r] {
                    s[(row, c)] -= u * w;
                }
            }
        }
        let lu = Factored::new(&s);
        let up_adj = self.u_plus.adjoint();
        let um_adj = self.u_minus.adjoint();
        let ac = alpha.conj();
        let solve = |b: &CMatrix| -> Option<CMatrix> {
            let b1 = b.rows(0, n1);
            let b2 = b.rows(n1, n2);
            let y1 = CMatrix::from_fn(n1, b.ncols(), |r, c| b1[(r, c)] / d1[r]);
            let rhs = b2 - self.u_minus.mul_mat(&y1) * alpha;
            let x2 = lu.solve(&rhs)?;
            let t = b1 - self.u_plus.mul_mat(&x2) * alpha;
            let x1 = CMatrix::from_fn(n1, b.ncols(), |r, c| t[(r, c)] / d1[r]);
            let mut x = CMatrix::zeros(n1 + n2, b.ncols());
            x.rows_mut(0, n1).copy_from(&x1);
            x.rows_mut(n1, n2).copy_from(&x2);
            Some(x)
        };
        let solve_adj = |b: &CMatrix| -> Option<CMatrix> {
            let b1 = b.rows(0, n1);
            let b2 = b.rows(n1, n2);
            let y1 = CMatrix::from_fn(n1, b.ncols(), |r, c| b1[(r, c)] / d1[r].conj());
            let rhs = b2 - up_adj.mul_mat(&y1) * ac;
            let x2 = lu.solve_adjoint(&rhs)?;
            let t = b1 - um_adj.mul_mat(&x2) * ac;
            let x1 = CMatrix::from_fn(n1, b.ncols(), |r, c| t[(r, c)] / d1[r].conj());
            let mut x = CMatrix::zeros(n1 + n2, b.ncols());
            x.rows_mut(0, n1).copy_from(&x1);
            x.rows_mut(n1, n2).copy_from(&x2);
            Some(x)
        };
        let apply = |x: &CMatrix| self.dirac_apply(alpha, shift, x, false);
        inverse_iteration(&m, count, apply, solve, solve_adj)
    }
}

/// `B_i* M B_j` without forming the bases densely.
pub fn compress(m: &CMatrix, b: &SectorBasis, space: Space, i: u8, j: u8) -> CMatrix {
    let ci = b.subspace_columns(space, i);
    let cj = b.subspace_columns(space, j);
    let n = m.nrows();
    // M B_j
    let mut mb = CMatrix::zeros(n, cj.len());
    for (c, col) in cj.iter().enumerate() {
        for &(r, w) in col {
            for row in 0..n {
                mb[(row, c)] += m[(row, r)] * w;
            }
        }
    }
    let mut out = CMatrix::zeros(ci.len(), cj.len());
    for (r, col) in ci.iter().enumerate() {
        for c in 0..cj.len() {
            let mut acc = ZERO;
            for &(row, w) in col {
                acc += w.conj() * mb[(row, c)];
            }
            out[(r, c)] = acc;
        }
    }
    out
}

/// Compression of a rotation-commuting operator to `L²_{0,j}`.
///
/// Fails with [`Error::NonInvariant`] when `M` maps `L²_{0,j}` outside itself by more
/// than `tol` (relative to the largest entry of `M`).
pub fn restrict_subspace(m: &CMatrix, j: u8, b: &SectorBasis, space: Space, tol: f64) -> Result<CMatrix> {
    let block = compress(m, b, space, j, j);
    let scale = m.iter().map(|x| x.norm()).fold(0.0, f64::max).max(1e-300);
    let mut leak: f64 = 0.0;
    for other in 0..3u8 {
        if other == j % 3 {
            continue;
        }
        let off = compress(m, b, space, other, j);
        leak = leak.max(off.iter().map(|x| x.norm()).fold(0.0, f64::max));
    }
    if leak > tol * scale {
        return Err(Error::NonInvariant { leakage: leak / scale });
    }
    Ok(block)
}
