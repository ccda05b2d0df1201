//! Dense complex linear algebra helpers on top of nalgebra.

use alloc::vec::Vec;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::fourier_ops::CMatrix;
use crate::{Error, Result};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Eigenvalues of a general complex matrix (complex Schur form).
pub fn eigenvalues(m: &CMatrix) -> Result<Vec<Complex64>> {
    if m.nrows() == 0 {
        return Ok(Vec::new());
    }
    let schur = nalgebra::Schur::try_new(m.clone(), 1e-15, 100_000).ok_or(Error::Solver)?;
    let (_, t) = schur.unpack();
    Ok((0..t.nrows()).map(|i| t[(i, i)]).collect())
}

/// All singular values, ascending.
pub fn singular_values(m: &CMatrix) -> Vec<f64> {
    let mut s: Vec<f64> = m.clone().singular_values().iter().copied().collect();
    s.sort_by(f64::total_cmp);
    s
}

/// Eigenvalues of a Hermitian matrix, ascending.
pub fn hermitian_eigenvalues(m: &CMatrix) -> Vec<f64> {
    let mut e: Vec<f64> = m.clone().symmetric_eigenvalues().iter().copied().collect();
    e.sort_by(f64::total_cmp);
    e
}

/// Smallest singular values (ascending) with right singular vectors as columns.
#[derive(Clone, Debug)]
pub struct SmallSingular {
    pub values: Vec<f64>,
    pub vectors: CMatrix,
}

/// Full SVD, keeping the `count` smallest triplets.
pub fn smallest_singular_dense(m: &CMatrix, count: usize) -> SmallSingular {
    let n = m.ncols();
    let svd = m.clone().svd(false, true);
    let vt = svd.v_t.expect("requested V");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[a].total_cmp(&svd.singular_values[b]));
    let count = count.min(order.len());
    let mut vectors = CMatrix::zeros(n, count);
    let mut values = Vec::with_capacity(count);
    for (c, &i) in order.iter().take(count).enumerate() {
        values.push(svd.singular_values[i]);
        for r in 0..n {
            vectors[(r, c)] = vt[(i, r)].conj();
        }
    }
    SmallSingular { values, vectors }
}

fn orthonormalize(x: CMatrix) -> CMatrix {
    x.qr().q()
}

/// Smallest singular triplets of a square matrix by block inverse iteration on
/// `(M*M)⁻¹`, followed by a Rayleigh–Ritz step. Falls back to a full SVD for small
/// matrices.
pub fn smallest_singular(m: &CMatrix, count: usize) -> SmallSingular {
    let n = m.ncols();
    if n <= 96 || m.nrows() != n || count + 4 >= n {
        return smallest_singular_dense(m, count);
    }
    let f = Factored::new(m);
    inverse_iteration(m, count, |x| m * x, |x| f.solve(x), |x| f.solve_adjoint(x))
}

/// LU factors `PM = LU` serving solves with `M` and `M*`. Zero pivots are raised to
/// `ε·max|U_ii|`, so the solves stay finite on singular matrices and amplify the null
/// directions, which is what inverse iteration needs.
pub struct Factored {
    l: CMatrix,
    u: CMatrix,
    p: nalgebra::PermutationSequence<nalgebra::Dyn>,
}

impl Factored {
    pub fn new(m: &CMatrix) -> Self {
        let lu = m.clone().lu();
        let (p, l, mut u) = lu.unpack();
        let n = u.nrows();
        let top = (0..n).map(|i| u[(i, i)].norm()).fold(0.0, f64::max);
        let floor = f64::EPSILON * top.max(f64::MIN_POSITIVE);
        for i in 0..n {
            if u[(i, i)].norm() < floor {
                u[(i, i)] = Complex64::new(floor, 0.0);
            }
        }
        Self { l, u, p }
    }

    pub fn solve(&self, b: &CMatrix) -> Option<CMatrix> {
        let mut x = b.clone();
        self.p.permute_rows(&mut x);
        (self.l.solve_lower_triangular_with_diag_mut(&mut x, Complex64::new(1.0, 0.0)) && self.u.solve_upper_triangular_mut(&mut x)).then_some(x)
    }

    pub fn solve_adjoint(&self, b: &CMatrix) -> Option<CMatrix> {
        let mut x = b.clone();
        if !(self.u.ad_solve_upper_triangular_mut(&mut x) && self.l.ad_solve_lower_triangular_mut(&mut x)) {
            return None;
        }
        self.p.inv_permute_rows(&mut x);
        Some(x)
    }
}

/// Ritz values below this fraction of the largest one mark directions that the solves
/// amplify enough to swamp the rest of the block.
const NEAR_SINGULAR: f64 = 1e-10;

/// Block inverse iteration with caller-supplied solvers for `M` and `M*`.
pub fn inverse_iteration<A, F, G>(m: &CMatrix, count: usize, apply: A, solve: F, solve_adj: G) -> SmallSingular
where
    A: Fn(&CMatrix) -> CMatrix,
    F: Fn(&CMatrix) -> Option<CMatrix>,
    G: Fn(&CMatrix) -> Option<CMatrix>,
{
    try_inverse_iteration(m.ncols(), count, apply, solve, solve_adj).unwrap_or_else(|| smallest_singular_dense(m, count))
}

fn random_block(n: usize, b: usize, seed: u64) -> CMatrix {
    let mut state = 0x9e37_79b9_7f4a_7c15u64 ^ seed;
    orthonormalize(CMatrix::from_fn(n, b, |_, _| {
        state ^= state << 13;
        state ^= state >> 7;
        state ^= state << 17;
        Complex64::new((state >> 11) as f64 / (1u64 << 53) as f64 - 0.5, (state & 0xffff) as f64 / 65536.0 - 0.5)
    }))
}

/// Orthonormal basis of the part of `z` orthogonal to the orthonormal columns of `q`.
fn project_out(z: CMatrix, q: &CMatrix) -> CMatrix {
    let mut z = z;
    for _ in 0..2 {
        if q.ncols() > 0 {
            z -= q * q.ad_mul(&z);
        }
        z = orthonormalize(z);
    }
    z
}

/// The `k`-dimensional right and left subspaces that the solves amplify most. The solves
/// alternate, since `M⁻¹` maps left singular vectors to right ones.
fn dominant<F, G>(n: usize, k: usize, solve: &F, solve_adj: &G) -> Option<(CMatrix, CMatrix)>
where
    F: Fn(&CMatrix) -> Option<CMatrix>,
    G: Fn(&CMatrix) -> Option<CMatrix>,
{
    let mut left = orthonormalize(solve_adj(&random_block(n, k, 0x5bd1_e995))?);
    let mut right = orthonormalize(solve(&left)?);
    for _ in 0..2 {
        left = orthonormalize(solve_adj(&right)?);
        right = orthonormalize(solve(&left)?);
    }
    Some((right, left))
}

/// [`inverse_iteration`] without the dense fallback; `None` when a solve fails.
///
/// Once Ritz values far below the rest appear, the matching right and left directions of
/// the solvers are computed and projected out of every iterate, so that rounding errors
/// along them are never amplified. They stay in the Rayleigh–Ritz basis.
pub fn try_inverse_iteration<A, F, G>(n: usize, count: usize, apply: A, solve: F, solve_adj: G) -> Option<SmallSingular>
where
    A: Fn(&CMatrix) -> CMatrix,
    F: Fn(&CMatrix) -> Option<CMatrix>,
    G: Fn(&CMatrix) -> Option<CMatrix>,
{
    let b = 2 * count + 4;
    if b >= n {
        return None;
    }
    let mut x = random_block(n, b, 0);
    let mut left = CMatrix::zeros(n, 0);
    let mut right = CMatrix::zeros(n, 0);
    let mut prev: Vec<f64> = Vec::new();
    let mut last = None;
    for _ in 0..60 {
        let y = project_out(solve_adj(&x)?, &left);
        let z = solve(&y)?;
        if z.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return None;
        }
        x = project_out(z, &right);
        let mut basis = CMatrix::zeros(n, right.ncols() + b);
        basis.columns_mut(0, right.ncols()).copy_from(&right);
        basis.columns_mut(right.ncols(), b).copy_from(&x);
        let mut ritz = rayleigh_ritz(&apply, &basis, basis.ncols());
        let top = ritz.values.last().copied().unwrap_or(0.0);
        let k = ritz.values.iter().filter(|&&s| s < NEAR_SINGULAR * top).count();
        if k > right.ncols() {
            if k > count + 2 {
                return None;
            }
            (right, left) = dominant(n, k, &solve, &solve_adj)?;
            x = project_out(x, &right);
            prev.clear();
            continue;
        }
        ritz.values.truncate(count);
        ritz.vectors = ritz.vectors.columns(0, count).into_owned();
        let done = prev.len() == count
            && prev.iter().zip(ritz.values.iter()).all(|(a, b)| (a - b).abs() <= 1e-11 * b.max(NEAR_SINGULAR * top) || (a - b).abs() <= 1e-15 * top);
        prev = ritz.values.clone();
        if done {
            return Some(ritz);
        }
        last = Some(ritz);
    }
    last
}

/// The `count` smallest singular values only. Falls back to a values-only SVD, which is
/// much cheaper than one with vectors.
pub fn smallest_singular_values(m: &CMatrix, count: usize) -> Vec<f64> {
    let n = m.ncols();
    let dense = || {
        let mut s = singular_values(m);
        s.truncate(count);
        s
    };
    if n <= 96 || m.nrows() != n {
        return dense();
    }
    let f = Factored::new(m);
    match try_inverse_iteration(n, count, |x| m * x, |x| f.solve(x), |x| f.solve_adjoint(x)) {
        Some(r) => r.values,
        None => dense(),
    }
}

fn rayleigh_ritz<A: Fn(&CMatrix) -> CMatrix>(apply: &A, x: &CMatrix, count: usize) -> SmallSingular {
    let y = apply(x);
    let small = smallest_singular_dense(&y, count);
    SmallSingular { values: small.values, vectors: x * small.vectors }
}

/// Largest singular value by power iteration on `M*M` (relative accuracy ~1e−6).
pub fn largest_singular(m: &CMatrix) -> f64 {
    largest_singular_with(m.ncols(), |v| m * v, |w| m.ad_mul(w))
}

/// [`largest_singular`] for an operator given by its action and the action of its adjoint.
pub fn largest_singular_with<A, B>(n: usize, apply: A, apply_adj: B) -> f64
where
    A: Fn(&CMatrix) -> CMatrix,
    B: Fn(&CMatrix) -> CMatrix,
{
    if n == 0 {
        return 0.0;
    }
    let mut v = DMatrix::from_fn(n, 1, |i, _| Complex64::new(1.0 + (i % 7) as f64 * 0.1, (i % 3) as f64 * 0.05));
    let mut sigma = 0.0;
    for _ in 0..200 {
        let nv = v.norm();
        if nv == 0.0 {
            return 0.0;
        }
        v /= Complex64::new(nv, 0.0);
        let w = apply(&v);
        let s = w.norm();
        v = apply_adj(&w);
        if (s - sigma).abs() <= 1e-9 * s {
            return s;
        }
        sigma = s;
    }
    sigma
}

/// Number of leading (smallest) values below `threshold`, together with the ratio of the
/// next value to the last one counted (or to the threshold when none is counted).
pub fn count_below(values: &[f64], threshold: f64) -> (usize, f64) {
    let k = values.iter().take_while(|&&s| s < threshold).count();
    let ratio = match (k, values.get(k)) {
        (_, None) => f64::INFINITY,
        (0, Some(&next)) => next / threshold,
        (k, Some(&next)) => next / values[k - 1].max(1e-300),
    };
    (k, ratio)
}

/// `tr(M^ℓ)` for several powers with few matrix products.
pub fn power_traces(m: &CMatrix, ells: &[u32]) -> Vec<Complex64> {
    let max = ells.iter().copied().max().unwrap_or(0);
    let mut powers: Vec<CMatrix> = Vec::new();
    powers.push(CMatrix::identity(m.nrows(), m.ncols()));
    // M^j for j ≤ ⌈max/2⌉
    let half = (max + 1) / 2;
    for j in 1..=half as usize {
        let next = &powers[j - 1] * m;
        powers.push(next);
    }
    ells.iter()
        .map(|&l| {
            let a = (l / 2) as usize;
            let b = (l - l / 2) as usize;
            trace_of_product(&powers[a], &powers[b])
        })
        .collect()
}

/// `tr(AB)` in `O(n²)`.
pub fn trace_of_product(a: &CMatrix, b: &CMatrix) -> Complex64 {
    let mut acc = ZERO;
    for i in 0..a.nrows() {
        for j in 0..a.ncols() {
            acc += a[(i, j)] * b[(j, i)];
        }
    }
    acc
}

/// Greedy nearest matching of two point sets; returns the largest matched distance
/// and the number of unmatched points.
pub fn match_spectra(a: &[Complex64], b: &[Complex64]) -> (f64, usize) {
    let mut pairs: Vec<(f64, usize, usize)> = Vec::with_capacity(a.len() * b.len());
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            pairs.push(((x - y).norm(), i, j));
        }
    }
    pairs.sort_by(|p, q| p.0.total_cmp(&q.0));
    let mut used_a = alloc::vec![false; a.len()];
    let mut used_b = alloc::vec![false; b.len()];
    let mut worst: f64 = 0.0;
    let mut matched = 0;
    for (d, i, j) in pairs {
        if !used_a[i] && !used_b[j] {
            used_a[i] = true;
            used_b[j] = true;
            worst = worst.max(d);
            matched += 1;
        }
    }
    (worst, a.len().max(b.len()) - matched)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DVector;

    fn test_matrix(n: usize, seed: u64) -> CMatrix {
        let mut s = seed;
        CMatrix::from_fn(n, n, |_, _| {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            Complex64::new(((s >> 33) as f64 / (1u64 << 31) as f64) - 0.5, ((s >> 13) & 0xfffff) as f64 / 1048576.0 - 0.5)
        })
    }

    #[test]
    fn inverse_iteration_matches_full_svd() {
        let mut m = test_matrix(150, 3);
        // plant a near-kernel direction
        let v = CMatrix::from_fn(150, 1, |i, _| Complex64::new((i as f64).sin(), 0.0));
        let v = &v / Complex64::new(v.norm(), 0.0);
        let proj = &m * &v * v.adjoint();
        m -= proj * Complex64::new(1.0 - 1e-9, 0.0);
        let full = singular_values(&m);
        let small = smallest_singular(&m, 3);
        for i in 0..3 {
            assert!((small.values[i] - full[i]).abs() < 1e-10 * full[full.len() - 1], "{i}");
        }
        let r = (&m * small.vectors.column(0)).norm();
        assert!((r - small.values[0]).abs() < 1e-10);
    }

    #[test]
    fn inverse_iteration_on_singular_matrices() {
        // Right null vectors are the last left singular vectors, so left and right null
        // spaces are orthogonal, as for the Dirac operator.
        for (n, rank_loss, seed) in [(150, 1, 3), (160, 2, 4), (200, 3, 5)] {
            let q = test_matrix(n, seed).qr().q();
            let s = DVector::from_fn(n, |i, _| Complex64::new(if i < rank_loss { 0.0 } else { 0.5 + i as f64 / n as f64 }, 0.0));
            let v = CMatrix::from_fn(n, n, |r, c| q[(r, n - 1 - c)]);
            let m = &q * CMatrix::from_diagonal(&s) * v.adjoint();
            let truth = smallest_singular_dense(&m, 5);
            let fast = smallest_singular(&m, 5);
            let values = smallest_singular_values(&m, 5);
            let scale = truth.values[4];
            for i in 0..5 {
                assert!((fast.values[i] - truth.values[i]).abs() < 1e-10 * scale, "{n} {i}: {} vs {}", fast.values[i], truth.values[i]);
                assert!((values[i] - truth.values[i]).abs() < 1e-10 * scale);
                let r = (&m * fast.vectors.column(i)).norm();
                assert!((r - fast.values[i]).abs() < 1e-9 * scale);
            }
        }
    }

    #[test]
    fn largest_singular_by_power_iteration() {
        let m = test_matrix(60, 5);
        let full = singular_values(&m);
        assert!((largest_singular(&m) / full[59] - 1.0).abs() < 1e-5);
    }

    #[test]
    fn power_traces_agree_with_eigenvalues() {
        let m = test_matrix(20, 7);
        let ev = eigenvalues(&m).unwrap();
        let tr = power_traces(&m, &[2, 3, 4, 5]);
        for (k, l) in [2u32, 3, 4, 5].iter().enumerate() {
            let want: Complex64 = ev.iter().map(|e| e.powu(*l)).sum();
            assert!((tr[k] - want).norm() < 1e-9 * want.norm().max(1.0));
        }
    }

    #[test]
    fn matching_reports_distance() {
        let a = [Complex64::new(1.0, 0.0), Complex64::new(2.0, 0.0)];
        let b = [Complex64::new(2.0, 1e-3), Complex64::new(1.0, 0.0)];
        let (d, un) = match_spectra(&a, &b);
        assert!((d - 1e-3).abs() < 1e-15);
        assert_eq!(un, 0);
    }
}
