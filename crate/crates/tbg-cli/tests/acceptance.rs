//! Exit gate: one PASS/FAIL line per acceptance criterion.
//!
//! `cargo test -p tbg-cli --test acceptance -- --nocapture`

use std::f64::consts::PI;
use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;
use tbg_core::algebra::{pairing, OMEGA, Q1, Q2, Z_S};
use tbg_core::bands::{bands_at, Waypoint};
use tbg_core::fourier_ops::{OperatorSet, TruncationParams};
use tbg_core::linalg::match_spectra;
use tbg_core::potential::{build_interpolated, build_u1, build_u2, FourierPotential};
use tbg_core::spectral::{classify, kernel_census, magic_angles, verify_k_independence, BlockSpectra, Classification, SearchOptions, Window};
use tbg_core::theta::{e_p, f_k, lattice_distance, theta1};
use tbg_core::traces::exact_remainders;
use tbg_core::Error;

const MAGIC_TIME_BUDGET: Duration = Duration::from_secs(60);
const U2_FIRST: f64 = 0.853799;
const U2_FIRST_TOL: f64 = 5e-5;
const U1_FIRST_COMPLEX: Complex64 = Complex64::new(0.9628, 0.9873);
const U1_FIRST_COMPLEX_TOL: f64 = 2e-3;
const FULL_TRACE_REL: f64 = 1e-3;
const SUB_TRACE_ABS: f64 = 1e-3;
const SUB_TRACE_REL: f64 = 2e-3;
/// Displayed criterion values carry one decimal.
const CRITERION_DISPLAY: f64 = 0.05;
const RIGIDITY_GAP: f64 = 1e3;
const JORDAN_THETA: f64 = 2.808850897;
const JORDAN_ALPHA: f64 = 1.2400;
const JORDAN_ALPHA_TOL: f64 = 1e-3;
const JORDAN_SIGMA2: f64 = 3.990;
const JORDAN_SIGMA2_TOL: f64 = 5e-2;
/// Units factor between the rescaled Dirac operator and the plotted singular values.
const SIGMA_SCALE: f64 = 16.0 * PI / 3.0;
const FLAT_MAX: f64 = 1e-4;
const GAP_FACTOR: f64 = 1e3;
const DIRAC_POINT_E1: f64 = 1e-8;
const K_INDEPENDENCE: f64 = 1e-6;
const BLOCK_SPECTRA: f64 = 1e-8;
const THETA_PERIODICITY: f64 = 1e-12;
const FK_PERIODICITY: f64 = 1e-10;
const ZERO_LOCATION: f64 = 1e-6;
const BOUNDARY: f64 = -2.0;
const PUNCTURE: f64 = 1.0;
const DECOMPOSITION_TOL: f64 = 0.05;
const CURVATURE_SYMMETRY: f64 = 1e-6;
const CURVATURE_SIGN: f64 = 1e-6;
const GRAMIAN_PERIODICITY: f64 = 1e-8;

struct Workspace {
    _dir: tempfile::TempDir,
    root: PathBuf,
}

impl Workspace {
    fn new() -> Self {
        let dir = tempfile::tempdir().unwrap();
        let root = dir.path().to_path_buf();
        Self { _dir: dir, root }
    }

    /// Runs `tbg` writing into `root/name`; returns the report and the wall time.
    fn tbg(&self, name: &str, args: &[&str]) -> (Value, Duration, PathBuf) {
        let out = self.root.join(name);
        let t0 = Instant::now();
        let o = Command::new(env!("CARGO_BIN_EXE_tbg")).args(["--quiet", "--out", out.to_str().unwrap()]).args(args).output().unwrap();
        let dt = t0.elapsed();
        assert!(o.status.success(), "tbg {args:?} failed: {}", String::from_utf8_lossy(&o.stdout));
        let report = serde_json::from_str(&fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
        (report, dt, out)
    }
}

fn cplx(v: &Value) -> Complex64 {
    Complex64::new(v[0].as_f64().unwrap(), v[1].as_f64().unwrap())
}

fn num(v: &Value) -> f64 {
    v.as_f64().unwrap_or_else(|| panic!("not a number: {v}"))
}

fn trace_value(report: &Value, ell: u64, space: &str) -> Complex64 {
    let t = report["traces"].as_array().unwrap().iter().find(|t| t["ell"] == ell && t["space"] == space).unwrap_or_else(|| panic!("no trace ℓ={ell} {space}"));
    cplx(&t["value"])
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

struct Criterion {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: String) -> Criterion {
    Criterion { pass, detail }
}

fn magic_angles_timing(ws: &Workspace) -> Criterion {
    let (u2, t2, _) = ws.tbg("c1-u2", &["magic", "--potential", "u2", "--N", "20", "--window", "real", "--max-modulus", "1.5"]);
    let a2 = cplx(&u2["angles"][0]["alpha"]);
    let (u1, t1, _) = ws.tbg("c1-u1", &["magic", "--potential", "u1", "--N", "20", "--window", "complex", "--max-modulus", "1.5"]);
    let a1 = u1["angles"].as_array().unwrap().iter().map(|a| cplx(&a["alpha"])).find(|a| a.im > 0.0).unwrap();
    let e2 = (a2 - U2_FIRST).norm();
    let e1 = (a1 - U1_FIRST_COMPLEX).norm();
    verdict(
        e2 < U2_FIRST_TOL && e1 < U1_FIRST_COMPLEX_TOL && t2 <= MAGIC_TIME_BUDGET && t1 <= MAGIC_TIME_BUDGET,
        format!("U₂ α = {:.7} (err {e2:.1e}, {:.1}s); U₁ α = {:.5}{:+.5}i (err {e1:.1e}, {:.1}s)", a2.re, t2.as_secs_f64(), a1.re, a1.im, t1.as_secs_f64()),
    )
}

fn full_traces(trace: &Value) -> Criterion {
    let s3 = 3f64.sqrt();
    let targets = [(2, 4.0 * PI / s3), (3, 96.0 * PI / (7.0 * s3)), (4, 40.0 * PI / s3)];
    let mut worst: f64 = 0.0;
    let mut parts = Vec::new();
    for (ell, want) in targets {
        let got = trace_value(trace, ell, "full");
        let e = (got - want).norm() / want;
        worst = worst.max(e);
        parts.push(format!("ℓ={ell}: {:.8} vs {want:.8}", got.re));
    }
    verdict(worst < FULL_TRACE_REL, format!("{} (max rel {worst:.1e})", parts.join("; ")))
}

fn exact_remainder_values(trace: &Value) -> Criterion {
    let rem = |ell: u64| -> Vec<String> {
        let e = trace["remainders"].as_array().unwrap().iter().find(|r| r["ell"] == ell).unwrap();
        e["values"].as_array().unwrap().iter().map(|v| v.as_str().unwrap().to_string()).collect()
    };
    let r2 = rem(2);
    let r3 = rem(3);
    let r4 = rem(4);
    let values_ok = r2 == ["-9", "-9", "18"] && r3[2] == "2430/49" && r4[2] == "13122/91";
    let mut identities = true;
    for p in [build_u1(), build_u2()] {
        for ell in 2..=4 {
            let r = exact_remainders(&p, ell).unwrap();
            identities &= r[0] == r[1] && (&(&r[0] + &r[1]) + &r[2]).is_zero();
        }
    }
    verdict(values_ok && identities, format!("R₂ = {r2:?}, R₃,₂ = {}, R₄,₂ = {}; ΣR = 0 and R₀ = R₁ for ℓ ≤ 4: {identities}", r3[2], r4[2]))
}

fn subspace_traces(trace: &Value) -> Criterion {
    let t20 = trace_value(trace, 2, "0").re;
    let t22 = trace_value(trace, 2, "2").re;
    let t32 = trace_value(trace, 3, "2").re;
    let t42 = trace_value(trace, 4, "2").re;
    let pass = (t20 + 0.581601).abs() < SUB_TRACE_ABS && (t22 - 8.4184).abs() < SUB_TRACE_ABS && rel(t32, 24.8223) < SUB_TRACE_REL && rel(t42, 72.2499) < SUB_TRACE_REL;
    verdict(pass, format!("tr²|₀ = {t20:.6}, tr²|₂ = {t22:.6}, tr³|₂ = {t32:.6}, tr⁴|₂ = {t42:.6}"))
}

fn nonreal_criterion(trace: &Value) -> Criterion {
    let entry = |space: &str| trace["criterion"].as_array().unwrap().iter().find(|c| c["space"] == space).unwrap().clone();
    let full = entry("full");
    let sub = entry("2");
    let shown = |c: &Value, lhs: f64, rhs: f64| c["holds"] == true && (num(&c["lhs"]) - lhs).abs() <= CRITERION_DISPLAY && (num(&c["rhs"]) - rhs).abs() <= CRITERION_DISPLAY;
    verdict(
        shown(&full, 526.4, 618.8) && shown(&sub, 608.2, 616.1),
        format!("L²₀: {:.1} < {:.1}; L²₀,₂: {:.1} < {:.1}", num(&full["lhs"]), num(&full["rhs"]), num(&sub["lhs"]), num(&sub["rhs"])),
    )
}

/// Kernel dimensions in the order (L²₀,₂, L²₀,₀, L²₀,₁) and the smallest gap factor.
fn rigidity_at(p: &FourierPotential) -> ([usize; 3], f64) {
    let t = TruncationParams::new(20);
    let opts = SearchOptions { window: Window::Real, max_modulus: 1.0, ..SearchOptions::default() };
    let first = magic_angles(p, t, &opts).unwrap().remove(0);
    let census = kernel_census(&OperatorSet::new(p, t), first.alpha, [true; 3]);
    let d = census.dims;
    ([d[2], d[0], d[1]], census.gaps.iter().copied().fold(f64::INFINITY, f64::min))
}

fn rigidity() -> Criterion {
    let (d2, g2) = rigidity_at(&build_u2());
    let (d1, g1) = rigidity_at(&build_u1());
    verdict(d2 == [0, 1, 1] && d1 == [1, 0, 0] && g2 >= RIGIDITY_GAP && g1 >= RIGIDITY_GAP, format!("U₂ {d2:?} (gap {g2:.1e}); U₁ {d1:?} (gap {g1:.1e})"))
}

fn jordan() -> Criterion {
    let p = build_interpolated(JORDAN_THETA);
    let t = TruncationParams::new(12);
    let m = classify(&p, Complex64::new(JORDAN_ALPHA, 0.0), t).unwrap();
    let sigma = OperatorSet::new(&p, t).dirac_smallest(m.alpha, Complex64::new(0.0, 0.0), 3).values;
    let scaled = sigma[1] * SIGMA_SCALE;
    let pass = (m.alpha - JORDAN_ALPHA).norm() < JORDAN_ALPHA_TOL
        && m.algebraic_mult == 2
        && m.geometric_mult == 1
        && m.classification == Classification::JordanDegenerate
        && (scaled - JORDAN_SIGMA2).abs() <= JORDAN_SIGMA2_TOL;
    verdict(
        pass,
        format!(
            "α = {:.6}{:+.1e}i, algebraic {}, geometric {}; σ = {:?}, σ₂ = {:.6} (×16π/3 = {scaled:.4})",
            m.alpha.re, m.alpha.im, m.algebraic_mult, m.geometric_mult, sigma.iter().map(|s| format!("{s:.3e}")).collect::<Vec<_>>(), sigma[1]
        ),
    )
}

fn flat_band_and_gap(ws: &Workspace) -> Criterion {
    let (b, _, _) = ws.tbg("c8-bands", &["bands", "--potential", "u2", "--N", "10", "--alpha", "0.8538", "--refine", "--grid", "12"]);
    let g = &b["gap"];
    let flat = num(&g["flat_max"]);
    let gap = num(&g["gap_min"]);
    let m = g["m"].as_u64().unwrap();
    let mut dirac: f64 = 0.0;
    for p in [build_u1(), build_u2()] {
        let ops = OperatorSet::new(&p, TruncationParams::new(8));
        for k in [Waypoint::K.value(), Waypoint::KPrime.value()] {
            dirac = dirac.max(bands_at(&ops, Complex64::new(0.5, 0.0), k, 1)[0]);
        }
    }
    verdict(
        flat < FLAT_MAX && gap >= GAP_FACTOR * flat && m == 2 && dirac < DIRAC_POINT_E1,
        format!("max(E₁,E₂) = {flat:.2e}, min E₃ = {gap:.4}, m = {m}; E₁(0.5, ±K) ≤ {dirac:.1e}"),
    )
}

fn admissible_k(rng: &mut ChaCha8Rng, p: &FourierPotential, t: TruncationParams) -> Complex64 {
    loop {
        let k = Complex64::new(rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0));
        match OperatorSet::new(p, t).a_k(k) {
            Ok(_) => return k,
            Err(Error::NearDiracPoint { .. }) => continue,
            Err(e) => panic!("{e}"),
        }
    }
}

fn properties(ws: &Workspace) -> Criterion {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let t = TruncationParams::new(12);
    let mut kdist: f64 = 0.0;
    let mut unmatched = 0;
    let mut blocks: f64 = 0.0;
    for p in [build_u1(), build_u2()] {
        let k1 = admissible_k(&mut rng, &p, t);
        let k2 = admissible_k(&mut rng, &p, t);
        let r = verify_k_independence(&p, t, k1, k2, 0.1).unwrap();
        kdist = kdist.max(r.max_distance);
        unmatched += r.unmatched;
        let s = BlockSpectra::compute(&OperatorSet::new(&p, t), [true, true, false]).unwrap();
        let (d, un) = match_spectra(&s.blocks[0], &s.blocks[1]);
        blocks = blocks.max(d);
        unmatched += un;
    }

    let close = |a: Complex64, b: Complex64| (a - b).norm() / a.norm().max(b.norm()).max(1.0);
    let mut theta_err: f64 = 0.0;
    let mut fk_err: f64 = 0.0;
    for _ in 0..200 {
        let z = Complex64::new(rng.gen_range(-1.5..1.5), rng.gen_range(-1.5..1.5));
        let t0 = theta1(z);
        theta_err = theta_err.max(close(theta1(z + 1.0), -t0));
        let factor = -(-Complex64::i() * PI * OMEGA - Complex64::i() * 2.0 * PI * z).exp();
        theta_err = theta_err.max(close(theta1(z + OMEGA), factor * t0));
        let k = Complex64::new(rng.gen_range(-4.0..4.0), rng.gen_range(-4.0..4.0));
        let w = Complex64::new(rng.gen_range(-0.5..0.5), rng.gen_range(-0.5..0.5));
        if lattice_distance(w) < 1e-3 {
            continue;
        }
        let f = f_k(k, w).unwrap();
        fk_err = fk_err.max(close(f_k(k, w + 1.0).unwrap(), f)).max(close(f_k(k, w + OMEGA).unwrap(), f));
        let p = Q1 * rng.gen_range(-2..=2) as f64 + Q2 * rng.gen_range(-2..=2) as f64;
        fk_err = fk_err.max(close(f_k(k + p, w).unwrap(), f * Complex64::cis(-pairing(p, w)) / e_p(k, p)));
    }

    let (wf, _, _) = ws.tbg("c9-wavefunction", &["wavefunction", "--potential", "u2", "--N", "10", "--alpha", "0.8538", "--grid", "64"]);
    let vectors = wf["vectors"].as_array().unwrap();
    let zeros = |j: u64| -> Vec<(Complex64, u64)> {
        let v = vectors.iter().find(|v| v["subspace"] == j).unwrap_or_else(|| panic!("no j={j} vector"));
        v["zeros"].as_array().unwrap().iter().map(|z| (cplx(&z["location"]), z["order"].as_u64().unwrap())).collect()
    };
    let z0 = zeros(0);
    let z1 = zeros(1);
    let near = |z: Complex64, w: Complex64| lattice_distance(z - w) < ZERO_LOCATION;
    let census_ok = z0.len() == 2
        && z0.iter().all(|&(_, o)| o == 1)
        && z0.iter().any(|&(z, _)| near(z, Z_S))
        && z0.iter().any(|&(z, _)| near(z, -Z_S))
        && z1.len() == 1
        && z1[0].1 == 2
        && near(z1[0].0, Complex64::new(0.0, 0.0));

    let pass = kdist < K_INDEPENDENCE && unmatched == 0 && blocks < BLOCK_SPECTRA && theta_err < THETA_PERIODICITY && fk_err < FK_PERIODICITY && census_ok;
    verdict(
        pass,
        format!(
            "k-independence {kdist:.1e} ({unmatched} unmatched); Spec A₀|₀ vs A₀|₁ {blocks:.1e}; θ {theta_err:.1e}; F_k {fk_err:.1e}; zeros j=0 {:?}, j=1 {:?}",
            z0.iter().map(|(z, o)| format!("{:.4}{:+.4}i×{o}", z.re, z.im)).collect::<Vec<_>>(),
            z1.iter().map(|(z, o)| format!("{:.1e}{:+.1e}i×{o}", z.re, z.im)).collect::<Vec<_>>()
        ),
    )
}

fn topology(ws: &Workspace) -> Criterion {
    let (c, _, _) = ws.tbg("c10-chern", &["chern", "--potential", "u2", "--N", "8", "--alpha", "0.8538", "--plaquette", "24,48"]);
    let plaq: Vec<(u64, i64)> = c["plaquette"].as_array().unwrap().iter().map(|e| (e["n"].as_u64().unwrap(), e["c1"].as_i64().unwrap())).collect();
    let boundary = num(&c["boundary"]);
    let puncture = num(&c["puncture"]);
    let rot = num(&c["rotation_defect"]);
    let par = num(&c["parity_defect"]);
    let (hmin, hmax) = (num(&c["curvature_min"]), num(&c["curvature_max"]));
    let qp = num(&c["quasi_periodicity_defect"]);
    let pass = plaq == [(24, -1), (48, -1)]
        && (boundary - BOUNDARY).abs() <= DECOMPOSITION_TOL
        && (puncture - PUNCTURE).abs() <= DECOMPOSITION_TOL
        && rot <= CURVATURE_SYMMETRY
        && par <= CURVATURE_SYMMETRY
        && hmin >= -CURVATURE_SIGN * hmax
        && qp <= GRAMIAN_PERIODICITY;
    verdict(
        pass,
        format!("plaquette {plaq:?}; boundary {boundary:.4}, puncture {puncture:.4}; H(ωk) {rot:.1e}, H(−k) {par:.1e}, H ∈ [{hmin:.4}, {hmax:.4}]; Gramian {qp:.1e}"),
    )
}

fn files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut v: Vec<(String, Vec<u8>)> = fs::read_dir(dir).unwrap().map(|e| e.unwrap()).map(|e| (e.file_name().to_string_lossy().into_owned(), fs::read(e.path()).unwrap())).collect();
    v.sort();
    v
}

fn determinism(ws: &Workspace) -> Criterion {
    let commands: [(&str, &[&str]); 6] = [
        ("magic", &["magic", "--potential", "u2", "--N", "8", "--max-modulus", "2"]),
        ("trace", &["trace", "--potential", "u1", "--ell", "2,3", "--subspace", "full", "--subspace", "2", "--exact-remainder", "--criterion", "--schedule", "8,12,16"]),
        ("bands", &["bands", "--potential", r#"{"interp": 2.5}"#, "--N", "6", "--alpha", "0.7+0.1i", "--grid", "4"]),
        ("wavefunction", &["wavefunction", "--potential", "u2", "--N", "6", "--alpha", "0.8538", "--grid", "16"]),
        ("chern", &["chern", "--potential", "u2", "--N", "6", "--alpha", "0.8538", "--frame-grid", "12", "--plaquette", "8", "--field", "8", "--samples", "4"]),
        ("sweep", &["--seed", "3", "sweep", "--N", "5", "--steps", "3", "--trace-n", "5"]),
    ];
    let mut differing = Vec::new();
    for (name, args) in commands {
        let (_, _, a) = ws.tbg(&format!("c11-{name}-a"), args);
        let cfg = a.join("config.json");
        let (_, _, b) = ws.tbg(&format!("c11-{name}-b"), &["--jobs", "1", "run", "--config", cfg.to_str().unwrap()]);
        let (_, _, c) = ws.tbg(&format!("c11-{name}-c"), &["--jobs", "3", "run", "--config", cfg.to_str().unwrap()]);
        let fa = files(&a);
        if fa.len() < 3 || fa != files(&b) || fa != files(&c) {
            differing.push(name);
        }
    }
    let schema = |dir: &str| {
        let d = ws.root.join(dir);
        let o = Command::new(env!("CARGO_BIN_EXE_tbg")).args(["schema", "--write", d.to_str().unwrap()]).output().unwrap();
        assert!(o.status.success());
        files(&d)
    };
    if schema("c11-schema-a") != schema("c11-schema-b") {
        differing.push("schema");
    }
    verdict(differing.is_empty(), if differing.is_empty() { "magic, trace, bands, wavefunction, chern, sweep, run, schema: identical bytes across reruns and thread counts".into() } else { format!("differing: {differing:?}") })
}

#[test]
fn acceptance() {
    let ws = Workspace::new();
    let (trace, _, _) = ws.tbg("trace-u1", &["trace", "--potential", "u1", "--ell", "2,3,4", "--subspace", "full", "--subspace", "0", "--subspace", "1", "--subspace", "2", "--exact-remainder", "--criterion"]);
    let criteria: Vec<(&str, Box<dyn FnOnce() -> Criterion + '_>)> = vec![
        ("magic angles", Box::new(|| magic_angles_timing(&ws))),
        ("full traces", Box::new(|| full_traces(&trace))),
        ("exact remainders", Box::new(|| exact_remainder_values(&trace))),
        ("subspace traces", Box::new(|| subspace_traces(&trace))),
        ("non-real criterion", Box::new(|| nonreal_criterion(&trace))),
        ("rigidity pattern", Box::new(rigidity)),
        ("Jordan structure", Box::new(jordan)),
        ("flat band and gap", Box::new(|| flat_band_and_gap(&ws))),
        ("property suites", Box::new(|| properties(&ws))),
        ("topology", Box::new(|| topology(&ws))),
        ("determinism", Box::new(|| determinism(&ws))),
    ];
    let mut failed = Vec::new();
    for (i, (name, check)) in criteria.into_iter().enumerate() {
        let t0 = Instant::now();
        let c = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|e| {
            let msg = e.downcast_ref::<String>().cloned().or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_default();
            verdict(false, format!("panicked: {msg}"))
        });
        println!("{} {:>2} {name}: {} [{:.1}s]", if c.pass { "PASS" } else { "FAIL" }, i + 1, c.detail, t0.elapsed().as_secs_f64());
        if !c.pass {
            failed.push(i + 1);
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
