use std::collections::BTreeMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use tbg_core::algebra::{OMEGA, Q1, Q2};
use tbg_core::bands::{anti_chiral, bands_at, full_bm_bands_with, gap_from_grid, k_grid, k_path, BandGrid, BandModel, Waypoint, FLAT_THRESHOLD, GAP_MARGIN};
use tbg_core::chern::{
    boundary_integral_c1, chern_plaquette, curvature, curvature_field, dual_lattice_distance, gramian_vanishing_order, quasi_periodicity_defect, ContourSpec, ThetaFrame,
};
use tbg_core::fourier_ops::{OperatorSet, TruncationParams};
use tbg_core::potential::{build_interpolated, build_interpolated_literal, FourierPotential};
use tbg_core::spectral::{candidate_angles, check_stability, classify, kernel_basis_with, magic_angles, resolve_angle, BlockSpectra, Classification, MagicAngle, SearchOptions, Window};
use tbg_core::theta::{sample_kernel, zero_census, CellGrid};
use tbg_core::traces::{combine, exact_remainders, nonreal_from_values, numeric_traces, truncated_traces, Schedule, TraceResult, TraceSpace};

use crate::config::*;
use crate::error::CliError;
use crate::report::*;

pub type Result<T> = std::result::Result<T, CliError>;

/// A report plus named auxiliary files (CSV), in emission order.
#[derive(Clone, Debug, PartialEq)]
pub struct Outputs {
    pub report: serde_json::Value,
    pub files: Vec<(String, String)>,
}

impl Outputs {
    fn new<R: Serialize>(report: &R, files: Vec<(String, String)>) -> Result<Self> {
        Ok(Self { report: serde_json::to_value(report)?, files })
    }
}

pub const CHECKPOINT_FILE: &str = "sweep.checkpoint.jsonl";

fn pool(jobs: Option<usize>) -> Result<rayon::ThreadPool> {
    let n = jobs.unwrap_or_else(|| std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1));
    rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build().map_err(|e| CliError::Config(e.to_string()))
}

fn csv_text<F>(header: &[String], rows: usize, mut row: F) -> Result<String>
where
    F: FnMut(usize) -> Vec<String>,
{
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for i in 0..rows {
        w.write_record(row(i))?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

fn header(cols: &[&str]) -> Vec<String> {
    cols.iter().map(|s| s.to_string()).collect()
}

fn join<T: ToString>(xs: &[T]) -> String {
    xs.iter().map(T::to_string).collect::<Vec<_>>().join(";")
}

/// Runs the task; `checkpoint_dir` enables sweep checkpointing.
pub fn execute(cfg: &RunConfig, checkpoint_dir: Option<&Path>) -> Result<Outputs> {
    let pool = pool(cfg.jobs)?;
    match &cfg.task {
        Task::Magic(p) => magic(p),
        Task::Trace(p) => trace(p),
        Task::Bands(p) => pool.install(|| bands(p)),
        Task::Wavefunction(p) => wavefunction(p),
        Task::Chern(p) => chern(p, cfg.seed),
        Task::Sweep(p) => sweep(p, &cfg.hash(), checkpoint_dir, &pool),
    }
}

fn angle_table(angles: &[AngleEntry]) -> Result<String> {
    let h = header(&["index", "alpha_re", "alpha_im", "modulus", "subspaces", "algebraic", "geometric", "kernel_dims", "classification", "residual", "truncation"]);
    csv_text(&h, angles.len(), |i| {
        let a = &angles[i];
        vec![
            i.to_string(),
            a.alpha[0].to_string(),
            a.alpha[1].to_string(),
            a.modulus.to_string(),
            join(&a.subspaces),
            a.algebraic_multiplicity.to_string(),
            a.geometric_multiplicity.to_string(),
            join(&a.kernel_dims),
            a.classification.clone(),
            a.residual.map(|r| r.to_string()).unwrap_or_default(),
            a.truncation.to_string(),
        ]
    })
}

pub fn magic(p: &MagicParams) -> Result<Outputs> {
    let pot = p.potential.build()?;
    let opts = SearchOptions {
        window: match p.window {
            WindowSpec::Real => Window::Real,
            WindowSpec::Complex => Window::Complex,
            WindowSpec::All => Window::All,
        },
        max_modulus: p.max_modulus,
        stability: p.stability,
        classify: p.classify,
        ..SearchOptions::default()
    };
    let t = TruncationParams::new(p.truncation);
    let ops = OperatorSet::new(&pot, t);
    let spectra = BlockSpectra::compute(&ops, opts.subspaces)?;
    let candidates = candidate_angles(&ops, &spectra, &opts)?;
    let mut found: Vec<MagicAngle> = candidates.into_par_iter().filter_map(|a| resolve_angle(&ops, a, &opts)).collect();
    check_stability(&pot, t, &opts, &mut found)?;
    let angles: Vec<AngleEntry> = found.iter().map(AngleEntry::from).collect();
    let table = angle_table(&angles)?;
    let report = MagicReport { potential: p.potential.clone(), truncation: p.truncation, window: p.window, angles };
    Outputs::new(&report, vec![("magic.csv".into(), table)])
}

struct TraceTable {
    values: BTreeMap<(SpaceSpec, u32), TraceResult>,
}

impl TraceTable {
    fn build(pot: &FourierPotential, ells: &[u32], spaces: &[SpaceSpec], schedule: &Schedule) -> Result<Self> {
        let mut values = BTreeMap::new();
        for r in numeric_traces(pot, ells, TraceSpace::Full, schedule)? {
            values.insert((SpaceSpec::Full, r.ell), r);
        }
        for &s in spaces {
            let j = match s {
                SpaceSpec::Full => continue,
                SpaceSpec::L0 => 0u8,
                SpaceSpec::L1 => 1,
                SpaceSpec::L2 => 2,
            };
            if pot.exact().is_some() {
                for &ell in ells {
                    let r = exact_remainders(pot, ell)?[j as usize].clone();
                    let c = combine(&values[&(SpaceSpec::Full, ell)], j, r);
                    values.insert((s, ell), c);
                }
            } else {
                for r in numeric_traces(pot, ells, TraceSpace::Subspace(j), schedule)? {
                    values.insert((s, r.ell), r);
                }
            }
        }
        Ok(Self { values })
    }

    fn get(&self, s: SpaceSpec, ell: u32) -> &TraceResult {
        &self.values[&(s, ell)]
    }
}

pub fn trace(p: &TraceParams) -> Result<Outputs> {
    let pot = p.potential.build()?;
    let schedule = Schedule { truncations: p.schedule.clone(), tolerance: p.tolerance, exponent: p.exponent };
    let mut ells = p.ells.clone();
    let mut spaces = p.spaces.clone();
    if p.criterion {
        ells.extend([2, 3, 4]);
        spaces.extend(SpaceSpec::all());
    }
    ells.sort_unstable();
    ells.dedup();
    spaces.sort_unstable();
    spaces.dedup();
    let table = TraceTable::build(&pot, &ells, &spaces, &schedule)?;

    let mut requested = p.spaces.clone();
    requested.sort_unstable();
    requested.dedup();
    let mut traces = Vec::new();
    for &s in &requested {
        for &ell in &p.ells {
            let r = table.get(s, ell);
            traces.push(TraceEntry {
                ell,
                space: s,
                value: from_c(r.numeric_value),
                raw: from_c(r.raw_value),
                exact_remainder: r.exact_part.as_ref().map(exact_string),
                truncations: r.n_sequence.clone(),
                extrapolated: r.extrapolated,
            });
        }
    }

    let mut remainders = Vec::new();
    if p.exact_remainder {
        for &ell in &p.ells {
            let r = exact_remainders(&pot, ell)?;
            let values = [exact_string(&r[0]), exact_string(&r[1]), exact_string(&r[2])];
            let display = format!("R = [{}]", values.join(", "));
            remainders.push(RemainderEntry { ell, values, display });
        }
    }

    let mut criterion = Vec::new();
    if p.criterion {
        for s in SpaceSpec::all() {
            let t = |ell| table.get(s, ell).numeric_value.re;
            let r = nonreal_from_values(t(2), t(3), t(4));
            criterion.push(CriterionEntry { space: s, holds: r.holds, lhs: r.lhs, rhs: r.rhs });
        }
    }

    let h = header(&["ell", "space", "value_re", "value_im", "raw_re", "raw_im", "exact_remainder", "truncations", "extrapolated"]);
    let csv = csv_text(&h, traces.len(), |i| {
        let t = &traces[i];
        vec![
            t.ell.to_string(),
            t.space.label().into(),
            t.value[0].to_string(),
            t.value[1].to_string(),
            t.raw[0].to_string(),
            t.raw[1].to_string(),
            t.exact_remainder.clone().unwrap_or_default(),
            join(&t.truncations),
            t.extrapolated.to_string(),
        ]
    })?;
    let report = TraceReport { potential: p.potential.clone(), schedule: p.schedule.clone(), traces, remainders, criterion };
    Outputs::new(&report, vec![("traces.csv".into(), csv)])
}

fn momenta(spec: &KSpec) -> Result<Vec<Complex64>> {
    Ok(match spec {
        KSpec::Path { points, per_segment } => {
            let pts = points.iter().map(|s| Waypoint::parse(s).ok_or_else(|| CliError::Config(format!("unknown path point {s:?} (use G, K, K', M)")))).collect::<Result<Vec<_>>>()?;
            if pts.len() < 2 || *per_segment == 0 {
                return Err(CliError::Config("a path needs two points and per_segment > 0".into()));
            }
            k_path(&pts, *per_segment)
        }
        KSpec::Grid { n } => k_grid(*n),
        KSpec::Points { ks } => ks.iter().map(|&k| to_c(k)).collect(),
    })
}

/// Nearest magic angle to `seed` at truncation `t`.
pub fn refine_alpha(pot: &FourierPotential, seed: Complex64, t: TruncationParams) -> Result<Complex64> {
    Ok(classify(pot, seed, t)?.alpha)
}

pub fn bands(p: &BandsParams) -> Result<Outputs> {
    let pot = p.potential.build()?;
    let t = TruncationParams::new(p.truncation);
    let alpha = if p.refine { refine_alpha(&pot, to_c(p.alpha), t)? } else { to_c(p.alpha) };
    let ks = momenta(&p.kpoints)?;
    let ops = OperatorSet::new(&pot, t);
    let energies: Vec<Vec<f64>> = match p.beta {
        None => ks.par_iter().map(|&k| bands_at(&ops, alpha, k, p.count)).collect(),
        Some(beta) => {
            let v = anti_chiral(&pot, &ops);
            ks.par_iter().map(|&k| full_bm_bands_with(&ops, &v, alpha, beta, k, p.count)).collect()
        }
    };
    let width = energies.iter().map(Vec::len).min().unwrap_or(0);
    let band_min: Vec<f64> = (0..width).map(|j| energies.iter().map(|e| e[j]).fold(f64::INFINITY, f64::min)).collect();
    let band_max: Vec<f64> = (0..width).map(|j| energies.iter().map(|e| e[j]).fold(f64::NEG_INFINITY, f64::max)).collect();
    let model = match p.beta {
        None => BandModel::Chiral,
        Some(beta) => BandModel::FullBm { beta },
    };
    let gap = matches!(model, BandModel::Chiral).then(|| {
        let r = gap_from_grid(&BandGrid { ks: ks.clone(), energies: energies.clone(), alpha, model });
        GapEntry { m: r.m, flat_max: r.flat_max, gap_min: r.gap_min, conclusive: r.gap_min >= GAP_MARGIN * FLAT_THRESHOLD }
    });

    let mut h = header(&["index", "k_re", "k_im", "path_length"]);
    h.extend((1..=width).map(|j| format!("E{j}")));
    let mut s = 0.0;
    let csv = csv_text(&h, ks.len(), |i| {
        if i > 0 {
            s += (ks[i] - ks[i - 1]).norm();
        }
        let mut row = vec![i.to_string(), ks[i].re.to_string(), ks[i].im.to_string(), s.to_string()];
        row.extend(energies[i][..width].iter().map(f64::to_string));
        row
    })?;
    let report = BandsReport {
        potential: p.potential.clone(),
        truncation: p.truncation,
        alpha: from_c(alpha),
        model: if p.beta.is_some() { "full".into() } else { "chiral".into() },
        beta: p.beta,
        kpoints: ks.len(),
        count: p.count,
        band_min,
        band_max,
        gap,
    };
    Outputs::new(&report, vec![("bands.csv".into(), csv)])
}

pub fn wavefunction(p: &WavefunctionParams) -> Result<Outputs> {
    let pot = p.potential.build()?;
    let t = TruncationParams::new(p.truncation);
    let alpha = refine_alpha(&pot, to_c(p.alpha), t)?;
    let ops = OperatorSet::new(&pot, t);
    let vecs = kernel_basis_with(&ops, alpha, to_c(p.k))?;
    let grid = CellGrid::new(p.grid);
    let samples: Vec<_> = vecs.iter().map(|v| sample_kernel(v, grid.clone())).collect();
    let mut entries = Vec::new();
    for v in &vecs {
        let (zeros, zeros_error) = match zero_census(v, grid.clone()) {
            Ok(z) => (Some(z.iter().map(|z| ZeroEntry { location: from_c(z.location), order: z.order as usize, slope: z.slope, depth: z.depth }).collect()), None),
            Err(e) => (None, Some(e.to_string())),
        };
        entries.push(VectorEntry { subspace: v.subspace, residual: v.residual, norm: v.norm(), zeros, zeros_error });
    }
    let mut h = header(&["index", "s", "t", "x", "y"]);
    for n in 0..vecs.len() {
        for c in ["u1_re", "u1_im", "u2_re", "u2_im", "abs"] {
            h.push(format!("v{n}_{c}"));
        }
    }
    let csv = csv_text(&h, grid.len(), |idx| {
        let z = grid.point(idx);
        let mut row = vec![idx.to_string(), grid.coord(idx / grid.m).to_string(), grid.coord(idx % grid.m).to_string(), z.re.to_string(), z.im.to_string()];
        for s in &samples {
            let (a, b) = (s.comps[0][idx], s.comps[1][idx]);
            row.extend([a.re, a.im, b.re, b.im, s.abs_at(idx)].iter().map(f64::to_string));
        }
        row
    })?;
    let report = WavefunctionReport { potential: p.potential.clone(), truncation: p.truncation, alpha_seed: p.alpha, alpha: from_c(alpha), k: p.k, grid: p.grid, vectors: entries };
    Outputs::new(&report, vec![("wavefunction.csv".into(), csv)])
}

pub fn chern(p: &ChernParams, seed: u64) -> Result<Outputs> {
    let pot = p.potential.build()?;
    let t = TruncationParams::new(p.truncation);
    let alpha = refine_alpha(&pot, to_c(p.alpha), t)?;
    let ops = OperatorSet::new(&pot, t);
    let vecs = kernel_basis_with(&ops, alpha, Complex64::new(0.0, 0.0))?;
    let (frame, generator_subspace) = vecs
        .iter()
        .find_map(|v| ThetaFrame::from_kernel(v, CellGrid::new(p.frame_grid)).ok().filter(|f| f.rank() == vecs.len()).map(|f| (f, v.subspace)))
        .ok_or(tbg_core::Error::RankChange { expected: vecs.len(), found: 0 })?;

    let plaquette = p.plaquette.iter().map(|&n| Ok(PlaquetteEntry { n, c1: chern_plaquette(&frame, n)? })).collect::<Result<Vec<_>>>()?;
    let field = curvature_field(&frame, p.field)?;
    let spec = ContourSpec { radius: p.contour_radius.unwrap_or(ContourSpec::default().radius), nodes: p.contour_nodes, ..ContourSpec::default() };
    let b = boundary_integral_c1(&frame, &spec)?;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let hmax = field.max();
    let (mut rot, mut par, mut qp) = (0.0f64, 0.0f64, 0.0f64);
    let mut taken = 0;
    while taken < p.samples {
        let k = Q1 * rng.gen_range(-0.5..0.5) + Q2 * rng.gen_range(-0.5..0.5);
        if dual_lattice_distance(k) < 0.1 * Q1.norm() {
            continue;
        }
        taken += 1;
        let h = curvature(&frame, k)?.0;
        rot = rot.max((curvature(&frame, OMEGA * k)?.0 - h).abs() / hmax);
        par = par.max((curvature(&frame, -k)?.0 - h).abs() / hmax);
        qp = qp.max(quasi_periodicity_defect(&frame, k, Q1)).max(quasi_periodicity_defect(&frame, k, Q2));
    }

    let h = header(&["a", "b", "k_re", "k_im", "curvature", "gram_det", "masked"]);
    let n = field.n;
    let csv = csv_text(&h, field.ks.len(), |i| {
        vec![(i / n).to_string(), (i % n).to_string(), field.ks[i].re.to_string(), field.ks[i].im.to_string(), field.h[i].to_string(), field.g[i].to_string(), field.masked[i].to_string()]
    })?;
    let report = ChernReport {
        potential: p.potential.clone(),
        truncation: p.truncation,
        alpha_seed: p.alpha,
        alpha: from_c(alpha),
        rank: frame.rank(),
        generator_subspace,
        c1: plaquette.first().map_or(0, |e| e.c1),
        plaquette,
        curvature_chern: field.chern(),
        curvature_min: field.min(),
        curvature_max: hmax,
        curvature_max_imag: field.max_imag,
        boundary: b.boundary,
        puncture: b.puncture,
        boundary_total: b.total,
        rotation_defect: rot,
        parity_defect: par,
        quasi_periodicity_defect: qp,
        vanishing_order: gramian_vanishing_order(&frame).0,
    };
    Outputs::new(&report, vec![("curvature.csv".into(), csv)])
}

fn sweep_row(p: &SweepParams, step: usize) -> SweepRowEntry {
    let theta = p.theta_start + (p.theta_end - p.theta_start) * step as f64 / p.steps as f64;
    let pot = if p.literal { build_interpolated_literal(theta) } else { build_interpolated(theta) };
    let opts = SearchOptions { max_modulus: p.max_modulus, ..SearchOptions::default() };
    let mut row = SweepRowEntry { step, theta, simple: 0, double: 0, jordan: 0, unclassified: 0, angles: Vec::new(), trace_full: None, trace_sub01: None, trace_sub2: None, error: None };
    match magic_angles(&pot, TruncationParams::new(p.truncation), &opts) {
        Ok(angles) => {
            for a in &angles {
                match a.classification {
                    Classification::Simple => row.simple += 1,
                    Classification::Double => row.double += 1,
                    Classification::JordanDegenerate => row.jordan += 1,
                    Classification::Unclassified => row.unclassified += 1,
                }
            }
            row.angles = angles.iter().map(AngleEntry::from).collect();
        }
        Err(e) => row.error = Some(e.to_string()),
    }
    if let Some(n) = p.trace_truncation {
        let tr = |s| truncated_traces(&pot, &[2], s, n).map(|v| v[0].re);
        match (tr(TraceSpace::Full), tr(TraceSpace::Subspace(0)), tr(TraceSpace::Subspace(2))) {
            (Ok(f), Ok(a), Ok(b)) => {
                row.trace_full = Some(f);
                row.trace_sub01 = Some(a);
                row.trace_sub2 = Some(b);
            }
            (Err(e), _, _) | (_, Err(e), _) | (_, _, Err(e)) => row.error = Some(e.to_string()),
        }
    }
    row
}

/// Rows already recorded for this configuration; a torn trailing line is dropped.
fn read_checkpoint(path: &Path, hash: &str) -> Vec<SweepRowEntry> {
    let Ok(f) = File::open(path) else { return Vec::new() };
    let mut lines = BufReader::new(f).lines();
    match lines.next() {
        Some(Ok(h)) if h.trim() == hash => {}
        _ => return Vec::new(),
    }
    let mut rows = Vec::new();
    for line in lines {
        match line.ok().and_then(|l| serde_json::from_str::<SweepRowEntry>(&l).ok()) {
            Some(r) if r.step == rows.len() => rows.push(r),
            _ => break,
        }
    }
    rows
}

fn write_checkpoint(path: &Path, hash: &str, rows: &[SweepRowEntry]) -> Result<File> {
    let mut f = File::create(path)?;
    writeln!(f, "{hash}")?;
    for r in rows {
        writeln!(f, "{}", serde_json::to_string(r)?)?;
    }
    f.sync_data()?;
    Ok(OpenOptions::new().append(true).open(path)?)
}

pub fn sweep(p: &SweepParams, hash: &str, dir: Option<&Path>, pool: &rayon::ThreadPool) -> Result<Outputs> {
    if p.steps == 0 {
        return Err(CliError::Config("sweep needs at least one step".into()));
    }
    let path = dir.map(|d| d.join(CHECKPOINT_FILE));
    let mut rows = path.as_deref().map(|f| read_checkpoint(f, hash)).unwrap_or_default();
    rows.truncate(p.steps);
    let mut sink = match &path {
        Some(f) => Some(write_checkpoint(f, hash, &rows)?),
        None => None,
    };
    let chunk = pool.current_num_threads().max(1);
    while rows.len() < p.steps {
        let steps: Vec<usize> = (rows.len()..(rows.len() + chunk).min(p.steps)).collect();
        let fresh: Vec<SweepRowEntry> = pool.install(|| steps.par_iter().map(|&s| sweep_row(p, s)).collect());
        for r in fresh {
            if let Some(f) = sink.as_mut() {
                writeln!(f, "{}", serde_json::to_string(&r)?)?;
                f.flush()?;
            }
            rows.push(r);
        }
    }

    let sub2_sign_changes = rows
        .windows(2)
        .filter_map(|w| match (w[0].trace_sub2, w[1].trace_sub2) {
            (Some(a), Some(b)) if a.signum() != b.signum() => Some(w[0].step),
            _ => None,
        })
        .collect();
    let opt = |x: Option<f64>| x.map(|v| v.to_string()).unwrap_or_default();
    let h = header(&["step", "theta", "simple", "double", "jordan", "unclassified", "trace_full", "trace_sub01", "trace_sub2", "error"]);
    let summary = csv_text(&h, rows.len(), |i| {
        let r = &rows[i];
        vec![
            r.step.to_string(),
            r.theta.to_string(),
            r.simple.to_string(),
            r.double.to_string(),
            r.jordan.to_string(),
            r.unclassified.to_string(),
            opt(r.trace_full),
            opt(r.trace_sub01),
            opt(r.trace_sub2),
            r.error.clone().unwrap_or_default(),
        ]
    })?;
    let flat: Vec<(usize, f64, &AngleEntry)> = rows.iter().flat_map(|r| r.angles.iter().map(move |a| (r.step, r.theta, a))).collect();
    let h = header(&["step", "theta", "alpha_re", "alpha_im", "subspaces", "algebraic", "geometric", "classification"]);
    let angles = csv_text(&h, flat.len(), |i| {
        let (s, th, a) = flat[i];
        vec![
            s.to_string(),
            th.to_string(),
            a.alpha[0].to_string(),
            a.alpha[1].to_string(),
            join(&a.subspaces),
            a.algebraic_multiplicity.to_string(),
            a.geometric_multiplicity.to_string(),
            a.classification.clone(),
        ]
    })?;
    let report = SweepReport {
        family: if p.literal { "interp_literal".into() } else { "interp".into() },
        truncation: p.truncation,
        steps: p.steps,
        rows,
        sub2_sign_changes,
    };
    Outputs::new(&report, vec![("sweep.csv".into(), summary), ("sweep_angles.csv".into(), angles)])
}
