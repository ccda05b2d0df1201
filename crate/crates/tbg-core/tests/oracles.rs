//! Cross-checks against independent closed forms and brute-force evaluations.

use num_complex::Complex64;

use tbg_core::algebra::*;
use tbg_core::bands::{bands_at, full_bm_bands, hermitian_spectrum};
use tbg_core::fourier_ops::{OperatorSet, TruncationParams};
use tbg_core::linalg::{eigenvalues, match_spectra};
use tbg_core::potential::{build_u1, build_u2};
use tbg_core::spectral::{classify, verify_k_independence};
use tbg_core::theta::weierstrass_p;
use tbg_core::traces::{exact_remainders, numeric_trace, Schedule, TraceSpace};

/// `℘` by direct summation over hexagonal shells `max(|a|, |b|, |a − b|) ≤ R`; the shells are
/// six-fold symmetric so the tail is `O(R⁻⁴)`.
fn wp_lattice_sum(z: Complex64, r: i64) -> Complex64 {
    let mut s = Complex64::new(1.0, 0.0) / (z * z);
    for a in -r..=r {
        for b in -r..=r {
            if (a, b) == (0, 0) || (a - b).abs() > r {
                continue;
            }
            let l = Complex64::new(a as f64, 0.0) + OMEGA * b as f64;
            s += Complex64::new(1.0, 0.0) / ((z - l) * (z - l)) - Complex64::new(1.0, 0.0) / (l * l);
        }
    }
    s
}

#[test]
fn weierstrass_matches_lattice_sum() {
    for z in [Complex64::new(0.21, 0.13), Complex64::new(-0.35, 0.4), Complex64::new(0.05, -0.3), Complex64::new(0.45, 0.0)] {
        let a = weierstrass_p(z).unwrap();
        let b = wp_lattice_sum(z, 120);
        assert!((a - b).norm() < 1e-7 * a.norm(), "{z}: {a} vs {b}");
    }
}

#[test]
fn u1_full_traces_match_closed_forms() {
    let s = Schedule::default();
    let oracle = [4.0 * PI / SQRT3, 96.0 * PI / (7.0 * SQRT3), 40.0 * PI / SQRT3];
    for (ell, want) in [2u32, 3, 4].into_iter().zip(oracle) {
        let t = numeric_trace(&build_u1(), ell, TraceSpace::Full, &s).unwrap();
        assert!((t.numeric_value.re - want).abs() < 1e-8 * want, "ℓ={ell}: {}", t.numeric_value);
    }
}

#[test]
fn remainders_agree_with_numeric_subspace_traces() {
    let s = Schedule::default();
    for p in [build_u1(), build_u2()] {
        let full = numeric_trace(&p, 2, TraceSpace::Full, &s).unwrap().numeric_value;
        let r = exact_remainders(&p, 2).unwrap();
        for j in 0..3u8 {
            let sub = numeric_trace(&p, 2, TraceSpace::Subspace(j), &s).unwrap().numeric_value;
            let d = sub * 3.0 - full - r[j as usize].embed();
            assert!(d.norm() < 1e-6, "j={j}: {d}");
        }
    }
}

#[test]
fn remainders_vanish_in_sum_and_pair_up() {
    for p in [build_u1(), build_u2()] {
        for ell in 2..=4 {
            let r = exact_remainders(&p, ell).unwrap();
            assert_eq!(r[0], r[1]);
            assert!((&(&r[0] + &r[1]) + &r[2]).is_zero());
        }
    }
}

#[test]
fn no_flat_band_away_from_magic_angles() {
    // dense Hermitian eigensolve as the reference
    let ops = OperatorSet::new(&build_u1(), TruncationParams::new(6));
    let h = hermitian_spectrum(&ops, Complex64::new(0.5, 0.0), Complex64::new(0.0, 0.0));
    let e1 = h.iter().copied().filter(|x| *x > 0.0).fold(f64::INFINITY, f64::min);
    assert!(e1 > 1e-2);
    let s = bands_at(&ops, Complex64::new(0.5, 0.0), Complex64::new(0.0, 0.0), 1);
    assert!((s[0] - e1).abs() < 1e-10);
}

#[test]
fn flat_bands_match_dense_hermitian_spectrum() {
    // at a refined magic angle D(α) − k is numerically singular for every k
    let p = build_u2();
    let t = TruncationParams::new(8);
    let alpha = classify(&p, Complex64::new(0.8538, 0.0), t).unwrap().alpha;
    let ops = OperatorSet::new(&p, t);
    for k in [Complex64::new(0.3, 0.7), Complex64::new(-1.1, 0.2), Complex64::new(0.05, -0.4)] {
        let mut h: Vec<f64> = hermitian_spectrum(&ops, alpha, k).into_iter().filter(|x| *x >= 0.0).collect();
        h.sort_by(f64::total_cmp);
        let e = bands_at(&ops, alpha, k, 4);
        assert!(e[0] < 1e-10 && e[1] < 1e-10, "{e:?}");
        // the zero modes may land on either side of 0 in the dense solve
        let above: Vec<f64> = h.iter().copied().filter(|x| *x > 1e-8).collect();
        for j in 0..2 {
            assert!((e[2 + j] - above[j]).abs() < 1e-9, "{k} {j}: {} vs {}", e[2 + j], above[j]);
        }
    }
}

#[test]
fn full_model_without_anti_chiral_term_is_chiral() {
    let p = build_u2();
    let t = TruncationParams::new(5);
    let ops = OperatorSet::new(&p, t);
    let k = Complex64::new(-0.8, 1.7);
    let c = bands_at(&ops, Complex64::new(0.7, 0.0), k, 3);
    let f = full_bm_bands(&p, Complex64::new(0.7, 0.0), 0.0, k, t, 3);
    for j in 0..3 {
        assert!((f[3 + j] - c[j]).abs() < 1e-10);
        assert!((f[2 - j] + c[j]).abs() < 1e-10);
    }
}

#[test]
fn birman_schwinger_spectrum_is_k_independent() {
    let r = verify_k_independence(&build_u2(), TruncationParams::new(12), Complex64::new(0.9, 0.4), Complex64::new(-1.3, 2.2), 0.1).unwrap();
    assert_eq!(r.unmatched, 0);
    assert!(r.max_distance < 1e-6, "{r:?}");
}

#[test]
fn rotated_operators_are_conjugate() {
    let ops = OperatorSet::new(&build_u1(), TruncationParams::new(6));
    let k = Complex64::new(0.4, -0.9);
    let a = eigenvalues(&ops.a_k(k).unwrap()).unwrap();
    let b = eigenvalues(&ops.a_k(OMEGA * k).unwrap()).unwrap();
    let (d, un) = match_spectra(&a, &b);
    assert_eq!(un, 0);
    assert!(d < 1e-9);
}
