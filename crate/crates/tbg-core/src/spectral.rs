//! Magic angles as reciprocal square roots of the spectrum of `A₀`, their
//! multiplicities, and flat-band kernel vectors of `D(α) + k`.

use alloc::vec;
use alloc::vec::Vec;

use nalgebra::DVector;
use num_complex::Complex64;

use crate::algebra::{pairing, ModeIndex, Sector};
use crate::fourier_ops::{restrict_subspace, CMatrix, OperatorSet, Space, TruncationParams};
use crate::linalg::{count_below, eigenvalues, match_spectra, smallest_singular, smallest_singular_values};
use crate::potential::FourierPotential;
use crate::{Error, Result};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Singular values below `KERNEL_RELATIVE · σ_max` count as kernel.
pub const KERNEL_RELATIVE: f64 = 1e-8;
/// Required ratio between the first non-kernel and the last kernel singular value.
pub const KERNEL_GAP: f64 = 1e3;
/// Cluster radius as a fraction of the distance to the nearest separate eigenvalue.
pub const CLUSTER_FRACTION: f64 = 1e-2;
/// Eigenvalues closer than this (relative) are never treated as separate.
pub const CLUSTER_MAX_RELATIVE: f64 = 1e-3;
/// `|Im α| ≤ REAL_RELATIVE·|α|` counts as real.
pub const REAL_RELATIVE: f64 = 1e-4;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Window {
    Real,
    Complex,
    All,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Classification {
    Simple,
    Double,
    JordanDegenerate,
    Unclassified,
}

#[derive(Clone, Debug)]
pub struct SearchOptions {
    pub window: Window,
    /// Only angles with `|α| ≤ max_modulus` are reported.
    pub max_modulus: f64,
    /// Which rotational blocks to diagonalize.
    pub subspaces: [bool; 3],
    /// Recompute at `N + 4` and fail if an angle moves by more than this.
    pub stability: Option<f64>,
    /// Confirm every angle by the smallest singular value of `D(α)`.
    pub confirm: bool,
    /// Compute kernel dimensions in all blocks and classify.
    pub classify: bool,
}

impl Default for SearchOptions {
    fn default() -> Self {
        Self {
            window: Window::All,
            max_modulus: 3.0,
            subspaces: [true; 3],
            stability: None,
            confirm: true,
            classify: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MagicAngle {
    pub alpha: Complex64,
    /// Labels `j` of the blocks of `A₀` carrying the eigenvalue `1/α²`.
    pub subspaces: Vec<u8>,
    pub algebraic_mult: usize,
    pub geometric_mult: usize,
    /// Kernel dimension of `D(α)` on `L²_{0,j}`, indexed by `j`.
    pub kernel_dims: [usize; 3],
    pub classification: Classification,
    /// Smallest singular value of truncated `D(α)` on the first carrying block.
    pub residual: f64,
    /// Movement between truncation `N` and `N + 4`, when measured.
    pub drift: Option<f64>,
    pub truncation: TruncationParams,
}

impl MagicAngle {
    pub fn subspace(&self) -> u8 {
        self.subspaces.first().copied().unwrap_or(0)
    }
}

/// Eigenvalues `μ` of the blocks `A₀|_{L²_{0,j}}`.
#[derive(Clone, Debug)]
pub struct BlockSpectra {
    pub truncation: TruncationParams,
    pub blocks: [Vec<Complex64>; 3],
}

impl BlockSpectra {
    pub fn compute(ops: &OperatorSet, which: [bool; 3]) -> Result<Self> {
        let a0 = ops.a_k(ZERO)?;
        let mut blocks: [Vec<Complex64>; 3] = Default::default();
        for j in 0..3u8 {
            if which[j as usize] {
                let blk = restrict_subspace(&a0, j, &ops.basis, Space::First, 1e-10)?;
                blocks[j as usize] = eigenvalues(&blk)?;
            }
        }
        Ok(Self { truncation: ops.basis.truncation, blocks })
    }

    fn tagged(&self) -> Vec<(Complex64, u8)> {
        let mut out = Vec::new();
        for (j, b) in self.blocks.iter().enumerate() {
            for &mu in b {
                out.push((mu, j as u8));
            }
        }
        out
    }
}

/// `1/√μ`, normalized to `Re α > 0` (or `Im α > 0` on the imaginary axis).
pub fn alpha_from_mu(mu: Complex64) -> Complex64 {
    let a = Complex64::new(1.0, 0.0) / mu.sqrt();
    if a.re < 0.0 || (a.re == 0.0 && a.im < 0.0) {
        -a
    } else {
        a
    }
}

/// A group of numerically coincident eigenvalues.
#[derive(Clone, Debug)]
pub struct Cluster {
    pub mu: Complex64,
    pub members: Vec<(Complex64, u8)>,
}

/// Cluster of `pool` around `mu`: members within `CLUSTER_FRACTION` times the distance to the
/// nearest separate eigenvalue.
pub fn cluster_at(mu: Complex64, pool: &[(Complex64, u8)]) -> Result<Cluster> {
    let scale = mu.norm();
    let near = CLUSTER_MAX_RELATIVE * scale;
    let spacing = pool.iter().map(|(x, _)| (x - mu).norm()).filter(|&d| d > near).fold(f64::INFINITY, f64::min);
    let rho = if spacing.is_finite() { (CLUSTER_FRACTION * spacing).min(near) } else { near };
    let mut members = Vec::new();
    for &(x, j) in pool {
        let d = (x - mu).norm();
        if d <= rho {
            members.push((x, j));
        } else if d <= near {
            return Err(Error::AmbiguousCluster { mu });
        }
    }
    let mean = members.iter().map(|m| m.0).sum::<Complex64>() / members.len().max(1) as f64;
    Ok(Cluster { mu: mean, members })
}

fn in_window(a: Complex64, w: Window, max_modulus: f64) -> bool {
    if a.norm() > max_modulus {
        return false;
    }
    let real = a.im.abs() <= REAL_RELATIVE * a.norm();
    match w {
        Window::Real => real,
        Window::Complex => !real,
        Window::All => true,
    }
}

/// Kernel dimensions of `D(α)` on the three rotational subspaces, with the singular values used.
#[derive(Clone, Debug)]
pub struct KernelCensus {
    pub dims: [usize; 3],
    pub gaps: [f64; 3],
    pub smallest: [Vec<f64>; 3],
    pub threshold: f64,
}

pub fn kernel_census(ops: &OperatorSet, alpha: Complex64, which: [bool; 3]) -> KernelCensus {
    let sigma_max = ops.dirac_norm(alpha, ZERO);
    let threshold = KERNEL_RELATIVE * sigma_max;
    let mut dims = [0; 3];
    let mut gaps = [f64::INFINITY; 3];
    let mut smallest: [Vec<f64>; 3] = Default::default();
    for j in 0..3u8 {
        if !which[j as usize] {
            continue;
        }
        let blk = ops.dirac_block(alpha, j);
        let s = smallest_singular_values(&blk, 3);
        let (k, ratio) = count_below(&s, threshold);
        dims[j as usize] = k;
        gaps[j as usize] = ratio;
        smallest[j as usize] = s;
    }
    KernelCensus { dims, gaps, smallest, threshold }
}

fn classification(alg: usize, geo: usize, dims: [usize; 3]) -> Classification {
    if alg > geo {
        Classification::JordanDegenerate
    } else if geo == 1 && dims == [0, 0, 1] {
        Classification::Simple
    } else if geo == 2 && dims == [1, 1, 0] {
        Classification::Double
    } else {
        Classification::Unclassified
    }
}

/// Magic angles in `window`, from dense eigensolves of the `A₀` blocks.
pub fn magic_angles(p: &FourierPotential, t: TruncationParams, opts: &SearchOptions) -> Result<Vec<MagicAngle>> {
    let ops = OperatorSet::new(p, t);
    let spectra = BlockSpectra::compute(&ops, opts.subspaces)?;
    let mut angles = angles_from_spectra(&ops, &spectra, opts)?;
    check_stability(p, t, opts, &mut angles)?;
    Ok(angles)
}

/// With `opts.stability = Some(δ)`, records each angle's distance to the spectrum at
/// `N + 4` and fails when it exceeds `δ`.
pub fn check_stability(p: &FourierPotential, t: TruncationParams, opts: &SearchOptions, angles: &mut [MagicAngle]) -> Result<()> {
    let Some(delta) = opts.stability else { return Ok(()) };
    let ops2 = OperatorSet::new(p, TruncationParams::new(t.radius + 4));
    let spectra2 = BlockSpectra::compute(&ops2, opts.subspaces)?;
    let pool2: Vec<Complex64> = spectra2.tagged().into_iter().map(|(mu, _)| alpha_from_mu(mu)).collect();
    for a in angles {
        let drift = pool2.iter().map(|b| (b - a.alpha).norm()).fold(f64::INFINITY, f64::min);
        a.drift = Some(drift);
        if drift > delta {
            return Err(Error::TruncationUnstable { alpha: a.alpha, drift });
        }
    }
    Ok(())
}

/// Magic angles from precomputed block spectra.
pub fn angles_from_spectra(ops: &OperatorSet, spectra: &BlockSpectra, opts: &SearchOptions) -> Result<Vec<MagicAngle>> {
    let out = candidate_angles(ops, spectra, opts)?.into_iter().filter_map(|a| resolve_angle(ops, a, opts)).collect();
    Ok(out)
}

/// Eigenvalue clusters inside the window, sorted by modulus, before any kernel
/// computation. Pass each through [`resolve_angle`].
pub fn candidate_angles(ops: &OperatorSet, spectra: &BlockSpectra, opts: &SearchOptions) -> Result<Vec<MagicAngle>> {
    let pool = spectra.tagged();
    let floor = 1.0 / (opts.max_modulus * opts.max_modulus);
    let mut order: Vec<usize> = (0..pool.len()).filter(|&i| pool[i].0.norm() >= floor * 0.5).collect();
    order.sort_by(|&a, &b| pool[b].0.norm().total_cmp(&pool[a].0.norm()));
    let mut taken = vec![false; pool.len()];
    let mut out = Vec::new();
    for i in order {
        if taken[i] {
            continue;
        }
        let cluster = cluster_at(pool[i].0, &pool)?;
        for (x, j) in &cluster.members {
            if let Some(k) = pool.iter().position(|(y, l)| y == x && l == j) {
                taken[k] = true;
            }
        }
        let alpha = alpha_from_mu(cluster.mu);
        if !in_window(alpha, opts.window, opts.max_modulus) {
            continue;
        }
        let mut subspaces: Vec<u8> = cluster.members.iter().map(|m| m.1).collect();
        subspaces.sort_unstable();
        subspaces.dedup();
        out.push(MagicAngle {
            alpha,
            subspaces,
            algebraic_mult: cluster.members.len(),
            geometric_mult: 0,
            kernel_dims: [0; 3],
            classification: Classification::Unclassified,
            residual: f64::NAN,
            drift: None,
            truncation: ops.basis.truncation,
        });
    }
    out.sort_by(|a, b| a.alpha.norm().total_cmp(&b.alpha.norm()).then(a.alpha.im.total_cmp(&b.alpha.im)));
    Ok(out)
}

/// Kernel census and classification of a candidate; `None` when confirmation is on and
/// `D(α)` has no kernel on the candidate's subspace.
pub fn resolve_angle(ops: &OperatorSet, mut angle: MagicAngle, opts: &SearchOptions) -> Option<MagicAngle> {
    let which = if opts.classify {
        [true; 3]
    } else if opts.confirm {
        let mut w = [false; 3];
        w[angle.subspace() as usize] = true;
        w
    } else {
        return Some(angle);
    };
    let census = kernel_census(ops, angle.alpha, which);
    angle.kernel_dims = census.dims;
    angle.geometric_mult = census.dims.iter().sum();
    angle.residual = census.smallest[angle.subspace() as usize].first().copied().unwrap_or(f64::NAN);
    if opts.classify {
        angle.classification = classification(angle.algebraic_mult, angle.geometric_mult, census.dims);
    }
    if opts.confirm && !(angle.residual < census.threshold) {
        return None;
    }
    Some(angle)
}

/// Multiplicities of a (near) magic `α`: snaps to the nearest eigenvalue cluster of the
/// `A₀` blocks, then counts kernel dimensions per subspace.
pub fn classify(p: &FourierPotential, alpha: Complex64, t: TruncationParams) -> Result<MagicAngle> {
    let ops = OperatorSet::new(p, t);
    let spectra = BlockSpectra::compute(&ops, [true; 3])?;
    classify_with(&ops, &spectra, alpha)
}

pub fn classify_with(ops: &OperatorSet, spectra: &BlockSpectra, alpha: Complex64) -> Result<MagicAngle> {
    let pool = spectra.tagged();
    let target = Complex64::new(1.0, 0.0) / (alpha * alpha);
    let nearest = pool
        .iter()
        .min_by(|a, b| (a.0 - target).norm().total_cmp(&(b.0 - target).norm()))
        .ok_or(Error::EmptyKernel { smallest: f64::INFINITY })?;
    let cluster = cluster_at(nearest.0, &pool)?;
    let snapped = alpha_from_mu(cluster.mu);
    let snapped = if (snapped - alpha).norm() <= (-snapped - alpha).norm() { snapped } else { -snapped };
    let census = kernel_census(ops, snapped, [true; 3]);
    let mut subspaces: Vec<u8> = cluster.members.iter().map(|m| m.1).collect();
    subspaces.sort_unstable();
    subspaces.dedup();
    let geo: usize = census.dims.iter().sum();
    let first = subspaces.first().copied().unwrap_or(0) as usize;
    Ok(MagicAngle {
        alpha: snapped,
        algebraic_mult: cluster.members.len(),
        geometric_mult: geo,
        kernel_dims: census.dims,
        classification: classification(cluster.members.len(), geo, census.dims),
        residual: census.smallest[first].first().copied().unwrap_or(f64::NAN),
        drift: None,
        truncation: ops.basis.truncation,
        subspaces,
    })
}

/// Normalized element of `ker(D(α) + k)` in Fourier coefficients.
#[derive(Clone, Debug)]
pub struct KernelVector {
    pub modes: Vec<ModeIndex>,
    pub coeffs: Vec<Complex64>,
    pub k: Complex64,
    pub alpha: Complex64,
    pub subspace: Option<u8>,
    /// `‖(D(α) + k)v‖`.
    pub residual: f64,
}

impl KernelVector {
    /// `(u₁(z), u₂(z))` by direct Fourier summation.
    pub fn eval(&self, z: Complex64) -> [Complex64; 2] {
        let mut out = [ZERO; 2];
        for (m, c) in self.modes.iter().zip(&self.coeffs) {
            let v = c * Complex64::cis(pairing(m.nu(), z));
            match m.sector {
                Sector::MinusK => out[0] += v,
                Sector::PlusK => out[1] += v,
            }
        }
        out
    }

    pub fn norm(&self) -> f64 {
        libm::sqrt(self.coeffs.iter().map(|c| c.norm_sqr()).sum())
    }
}

fn modes_of(ops: &OperatorSet) -> Vec<ModeIndex> {
    ops.basis.first.modes().iter().chain(ops.basis.second.modes()).copied().collect()
}

/// Kernel of `D(α) + k`. At `k = 0` the vectors are computed per rotational subspace and tagged.
pub fn kernel_basis(p: &FourierPotential, alpha: Complex64, k: Complex64, t: TruncationParams) -> Result<Vec<KernelVector>> {
    let ops = OperatorSet::new(p, t);
    kernel_basis_with(&ops, alpha, k)
}

pub fn kernel_basis_with(ops: &OperatorSet, alpha: Complex64, k: Complex64) -> Result<Vec<KernelVector>> {
    let d = ops.dirac(alpha, k);
    let threshold = KERNEL_RELATIVE * ops.dirac_norm(alpha, k);
    let modes = modes_of(ops);
    let mut out = Vec::new();
    let mut smallest = f64::INFINITY;
    if k == ZERO {
        for j in 0..3u8 {
            let blk = ops.dirac_block(alpha, j);
            let s = smallest_singular(&blk, 3);
            smallest = smallest.min(s.values[0]);
            let (cnt, ratio) = count_below(&s.values, threshold);
            if cnt == 0 || ratio < KERNEL_GAP {
                continue;
            }
            let b = ops.basis.subspace_matrix(Space::Both, j);
            for c in 0..cnt {
                let v: DVector<Complex64> = &b * s.vectors.column(c);
                out.push(make_vector(&d, &modes, v, k, alpha, Some(j)));
            }
        }
    } else {
        let s = ops.dirac_smallest(alpha, k, 4);
        smallest = s.values[0];
        let (cnt, ratio) = count_below(&s.values, threshold);
        if cnt > 0 && ratio >= KERNEL_GAP {
            for c in 0..cnt {
                let v: DVector<Complex64> = s.vectors.column(c).into_owned();
                out.push(make_vector(&d, &modes, v, k, alpha, None));
            }
        }
    }
    if out.is_empty() {
        return Err(Error::EmptyKernel { smallest });
    }
    Ok(out)
}

fn make_vector(d: &CMatrix, modes: &[ModeIndex], v: DVector<Complex64>, k: Complex64, alpha: Complex64, subspace: Option<u8>) -> KernelVector {
    let n = v.norm();
    let v = v / Complex64::new(n, 0.0);
    let residual = (d * &v).norm();
    KernelVector { modes: modes.to_vec(), coeffs: v.iter().copied().collect(), k, alpha, subspace, residual }
}

#[derive(Clone, Debug, PartialEq)]
pub struct KIndependenceReport {
    pub max_distance: f64,
    pub matched: usize,
    pub unmatched: usize,
}

/// Compare the spectra of `A_{k₁}` and `A_{k₂}` above the modulus floor.
pub fn verify_k_independence(p: &FourierPotential, t: TruncationParams, k1: Complex64, k2: Complex64, floor: f64) -> Result<KIndependenceReport> {
    let ops = OperatorSet::new(p, t);
    let e1: Vec<Complex64> = eigenvalues(&ops.a_k(k1)?)?.into_iter().filter(|m| m.norm() > floor).collect();
    let e2: Vec<Complex64> = if k2 == k1 {
        e1.clone()
    } else {
        eigenvalues(&ops.a_k(k2)?)?.into_iter().filter(|m| m.norm() > floor).collect()
    };
    let (d, un) = match_spectra(&e1, &e2);
    Ok(KIndependenceReport { max_distance: d, matched: e1.len().min(e2.len()), unmatched: un })
}
