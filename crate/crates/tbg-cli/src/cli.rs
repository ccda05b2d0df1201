use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::config::*;
use crate::error::CliError;

fn potential(s: &str) -> Result<PotentialSpec, String> {
    PotentialSpec::parse(s).map_err(|e| e.to_string())
}

fn complex(s: &str) -> Result<Cplx, String> {
    parse_complex(s).map_err(|e| e.to_string())
}

fn space(s: &str) -> Result<SpaceSpec, String> {
    SpaceSpec::parse(s).map_err(|e| e.to_string())
}

#[derive(Debug, Parser)]
#[command(name = "tbg", version, about = "Magic angles, trace certificates, bands and Chern numbers for chiral twisted bilayer graphene")]
pub struct Cli {
    /// Directory receiving report.json, config.json and CSV files.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Reuse results keyed by the configuration hash (directory from TBG_CACHE_DIR).
    #[arg(long, global = true)]
    pub cache: bool,
    /// Worker threads (results do not depend on this).
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Do not print the report on stdout.
    #[arg(long, global = true)]
    pub quiet: bool,
    #[command(subcommand)]
    pub cmd: Cmd,
}

#[derive(Debug, Args)]
pub struct PotentialArg {
    /// `u1`, `u2`, `w`, `{"interp": θ}`, `{"interp_literal": θ}`, a list of
    /// `{"p": [m, n], "orbit_coeff": "..."}`, or a JSON file holding one of these.
    #[arg(long, value_parser = potential)]
    pub potential: PotentialSpec,
}

#[derive(Debug, Subcommand)]
pub enum Cmd {
    /// Magic angles with multiplicities.
    Magic {
        #[command(flatten)]
        potential: PotentialArg,
        #[arg(long = "N", alias = "n", default_value_t = 20)]
        n: i64,
        #[arg(long, value_enum, default_value = "all")]
        window: WindowArg,
        #[arg(long, default_value_t = 3.0)]
        max_modulus: f64,
        /// Recompute at N + 4 and fail when an angle moves further than this.
        #[arg(long)]
        stability: Option<f64>,
        #[arg(long)]
        no_classify: bool,
    },
    /// Traces of powers of A₀, exact remainders and the non-real criterion.
    Trace {
        #[command(flatten)]
        potential: PotentialArg,
        #[arg(long, value_delimiter = ',', default_values_t = [2u32, 3, 4])]
        ell: Vec<u32>,
        /// `full`, `0`, `1` or `2`; repeatable.
        #[arg(long, value_parser = space)]
        subspace: Vec<SpaceSpec>,
        #[arg(long)]
        exact_remainder: bool,
        #[arg(long)]
        criterion: bool,
        #[arg(long, value_delimiter = ',', default_values_t = tbg_core::traces::DEFAULT_SCHEDULE)]
        schedule: Vec<i64>,
        #[arg(long, default_value_t = tbg_core::traces::DEFAULT_EXPONENT)]
        exponent: i32,
        #[arg(long, default_value_t = tbg_core::traces::DEFAULT_TOLERANCE)]
        tolerance: f64,
    },
    /// Band energies along a path or on a grid.
    Bands {
        #[command(flatten)]
        potential: PotentialArg,
        #[arg(long = "N", alias = "n", default_value_t = 8)]
        n: i64,
        #[arg(long, value_parser = complex)]
        alpha: Cplx,
        /// Move alpha to the nearest magic angle first.
        #[arg(long)]
        refine: bool,
        /// Comma separated points among G, K, K', M.
        #[arg(long, value_delimiter = ',', conflicts_with = "grid")]
        path: Option<Vec<String>>,
        #[arg(long, default_value_t = 24)]
        per_segment: usize,
        #[arg(long)]
        grid: Option<usize>,
        #[arg(long, default_value_t = 4)]
        count: usize,
        /// Anti-chiral coupling; selects the full model.
        #[arg(long)]
        beta: Option<f64>,
    },
    /// Flat-band wavefunctions and their zeros at a magic angle.
    Wavefunction {
        #[command(flatten)]
        potential: PotentialArg,
        #[arg(long = "N", alias = "n", default_value_t = 10)]
        n: i64,
        #[arg(long, value_parser = complex)]
        alpha: Cplx,
        #[arg(long, value_parser = complex, default_value = "0")]
        k: Cplx,
        #[arg(long, default_value_t = 64)]
        grid: usize,
    },
    /// Berry curvature and Chern number of the flat bands.
    Chern {
        #[command(flatten)]
        potential: PotentialArg,
        #[arg(long = "N", alias = "n", default_value_t = 8)]
        n: i64,
        #[arg(long, value_parser = complex)]
        alpha: Cplx,
        #[arg(long, default_value_t = 32)]
        frame_grid: usize,
        #[arg(long, value_delimiter = ',', default_values_t = [24usize, 48])]
        plaquette: Vec<usize>,
        #[arg(long, default_value_t = 24)]
        field: usize,
        #[arg(long)]
        contour_radius: Option<f64>,
        #[arg(long, default_value_t = 48)]
        contour_nodes: usize,
        #[arg(long, default_value_t = 8)]
        samples: usize,
    },
    /// Magic angles and tr(A₀²) across the family U_θ.
    Sweep {
        #[arg(long = "N", alias = "n", default_value_t = 8)]
        n: i64,
        #[arg(long, default_value_t = 64)]
        steps: usize,
        #[arg(long, default_value_t = 0.0)]
        theta_start: f64,
        #[arg(long, default_value_t = std::f64::consts::TAU)]
        theta_end: f64,
        #[arg(long, default_value_t = 2.0)]
        max_modulus: f64,
        #[arg(long)]
        trace_n: Option<i64>,
        #[arg(long)]
        literal: bool,
    },
    /// Re-run a stored config.json.
    Run {
        #[arg(long)]
        config: PathBuf,
    },
    /// Print a JSON schema, or write all of them into a directory.
    Schema {
        name: Option<String>,
        #[arg(long)]
        write: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, Debug, clap::ValueEnum)]
pub enum WindowArg {
    Real,
    Complex,
    All,
}

pub enum Action {
    Run(RunConfig),
    Schema { name: Option<String>, write: Option<PathBuf> },
}

impl Cli {
    pub fn action(self) -> Result<Action, CliError> {
        let task = match self.cmd {
            Cmd::Schema { name, write } => return Ok(Action::Schema { name, write }),
            Cmd::Run { config } => {
                let mut cfg = RunConfig::load(&config)?;
                cfg.output = self.out.or(cfg.output);
                cfg.cache |= self.cache;
                cfg.jobs = self.jobs.or(cfg.jobs);
                if let Some(s) = self.seed {
                    cfg.seed = s;
                }
                return Ok(Action::Run(cfg));
            }
            Cmd::Magic { potential, n, window, max_modulus, stability, no_classify } => Task::Magic(MagicParams {
                potential: potential.potential,
                truncation: n,
                window: match window {
                    WindowArg::Real => WindowSpec::Real,
                    WindowArg::Complex => WindowSpec::Complex,
                    WindowArg::All => WindowSpec::All,
                },
                max_modulus,
                stability,
                classify: !no_classify,
            }),
            Cmd::Trace { potential, ell, subspace, exact_remainder, criterion, schedule, exponent, tolerance } => Task::Trace(TraceParams {
                potential: potential.potential,
                ells: ell,
                spaces: if subspace.is_empty() { vec![SpaceSpec::Full] } else { subspace },
                exact_remainder,
                criterion,
                schedule,
                exponent,
                tolerance,
            }),
            Cmd::Bands { potential, n, alpha, refine, path, per_segment, grid, count, beta } => Task::Bands(BandsParams {
                potential: potential.potential,
                truncation: n,
                alpha,
                refine,
                kpoints: match (path, grid) {
                    (_, Some(n)) => KSpec::Grid { n },
                    (Some(points), None) => KSpec::Path { points, per_segment },
                    (None, None) => KSpec::Path { points: ["G", "K", "M", "G"].map(String::from).to_vec(), per_segment },
                },
                count,
                beta,
            }),
            Cmd::Wavefunction { potential, n, alpha, k, grid } => Task::Wavefunction(WavefunctionParams { potential: potential.potential, truncation: n, alpha, k, grid }),
            Cmd::Chern { potential, n, alpha, frame_grid, plaquette, field, contour_radius, contour_nodes, samples } => {
                Task::Chern(ChernParams { potential: potential.potential, truncation: n, alpha, frame_grid, plaquette, field, contour_radius, contour_nodes, samples })
            }
            Cmd::Sweep { n, steps, theta_start, theta_end, max_modulus, trace_n, literal } => {
                Task::Sweep(SweepParams { literal, truncation: n, steps, theta_start, theta_end, max_modulus, trace_truncation: trace_n })
            }
        };
        Ok(Action::Run(RunConfig { task, seed: self.seed.unwrap_or(0), output: self.out, cache: self.cache, jobs: self.jobs }))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(args: &[&str]) -> RunConfig {
        match Cli::try_parse_from(args).unwrap().action().unwrap() {
            Action::Run(c) => c,
            Action::Schema { .. } => panic!("expected a run"),
        }
    }

    #[test]
    fn magic_flags() {
        let c = parse(&["tbg", "magic", "--potential", "u2", "--N", "20", "--window", "real"]);
        let Task::Magic(m) = c.task else { panic!() };
        assert_eq!(m.truncation, 20);
        assert_eq!(m.window, WindowSpec::Real);
        assert_eq!(m.potential, PotentialSpec::Named(NamedPotential::U2));
    }

    #[test]
    fn trace_flags() {
        let c = parse(&["tbg", "--seed", "3", "trace", "--potential", "u1", "--ell", "2", "--subspace", "0", "--exact-remainder"]);
        assert_eq!(c.seed, 3);
        let Task::Trace(t) = c.task else { panic!() };
        assert_eq!(t.ells, vec![2]);
        assert_eq!(t.spaces, vec![SpaceSpec::L0]);
        assert!(t.exact_remainder && !t.criterion);
        assert_eq!(t.schedule, vec![16, 24, 32]);
    }

    #[test]
    fn bands_default_path() {
        let c = parse(&["tbg", "bands", "--potential", r#"{"interp": 1.0}"#, "--alpha", "0.5+0.1i"]);
        let Task::Bands(b) = c.task else { panic!() };
        assert_eq!(b.alpha, [0.5, 0.1]);
        assert!(matches!(b.kpoints, KSpec::Path { ref points, .. } if points.len() == 4));
    }
}
