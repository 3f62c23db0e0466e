use std::path::PathBuf;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use plapflow::discrete::Metabolic;
use plapflow::gradientflow::NetworkFormation;
use plapflow::mesh::TriBase;
use plapflow::plaplacian::{CaseName, RadialCenter, SolverSettings};

use crate::config::{
    ConvergenceRun, DiscreteRun, DiscreteStudy, NetworkRun, PlapRun, RunConfig, Scenario, Tc6Run,
    OUTPUT_ROOT_VAR,
};

#[derive(Debug, Parser)]
#[command(
    name = "plapflow",
    version,
    about = "Gradient-flow solver for transport networks and the p-Laplacian"
)]
pub struct Cli {
    /// Output directory (default: $PLAPFLOW_OUT/<command>, or ./plapflow-out/<command>).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// JSON file with Newton and time-stepping settings (keys of `solver` in the manifest).
    #[arg(long, global = true)]
    pub solver: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Network formation from a Gaussian source on the unit square.
    NetworkFormation(NetworkArgs),
    /// One p-Laplacian test case on one mesh.
    Plap(PlapArgs),
    /// Convergence study of a test case over refined meshes.
    Convergence(ConvergenceArgs),
    /// L-shape sweep over p with a constant source.
    Tc6(Tc6Args),
    /// Checks and studies of the graph model.
    Discrete(DiscreteArgs),
    /// Re-run the configuration stored in a manifest.
    Replay { manifest: PathBuf },
}

#[derive(Debug, Args)]
pub struct NetworkArgs {
    /// Cells per side.
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub t_max: Option<f64>,
    #[arg(long)]
    pub gamma: Option<f64>,
    /// Snapshot times for log10(c).
    #[arg(long, value_delimiter = ',', default_values_t = [0.0, 1.0, 5.0, 10.0, 25.0, 50.0, 100.0, 200.0])]
    pub snapshots: Vec<f64>,
    /// Keep the source as given; a pure Neumann problem then refuses it.
    #[arg(long)]
    pub no_mean_correct: bool,
    /// 512 x 512 cells up to t = 200.
    #[arg(long = "paper-scale", alias = "full-scale")]
    pub full_scale: bool,
}

#[derive(Debug, Args)]
pub struct PlapArgs {
    #[arg(long)]
    pub case: CaseName,
    #[arg(long, default_value_t = 32)]
    pub n: usize,
    #[arg(long, value_enum, default_value_t = CenterArg::Center)]
    pub center: CenterArg,
}

#[derive(Debug, Args)]
pub struct ConvergenceArgs {
    #[arg(long)]
    pub case: CaseName,
    /// Number of levels.
    #[arg(long, default_value_t = 4)]
    pub levels: usize,
    /// Cells per unit length on the coarsest level.
    #[arg(long, default_value_t = 16)]
    pub n0: usize,
    #[arg(long, default_value_t = 3)]
    pub fit_last: usize,
    #[arg(long, value_enum, default_value_t = CenterArg::Center)]
    pub center: CenterArg,
    /// Run levels one after another.
    #[arg(long)]
    pub serial: bool,
}

#[derive(Debug, Args)]
pub struct Tc6Args {
    #[arg(long, value_delimiter = ',', default_values_t = [5.0, 10.0, 20.0, 50.0])]
    pub p: Vec<f64>,
    /// Cells per unit length.
    #[arg(long, default_value_t = 32)]
    pub n: usize,
    /// h = 1/512.
    #[arg(long = "paper-scale", alias = "full-scale")]
    pub full_scale: bool,
    #[arg(long)]
    pub serial: bool,
}

#[derive(Debug, Args)]
pub struct DiscreteArgs {
    #[arg(long, value_enum)]
    pub study: DiscreteStudy,
    #[arg(long, default_value_t = 1000)]
    pub samples: usize,
    #[arg(long, value_enum, default_value_t = BaseArg::Rhombus)]
    pub base: BaseArg,
    /// Largest refinement count.
    #[arg(long, default_value_t = 3)]
    pub refinements: usize,
    #[arg(long, default_value_t = 0.1)]
    pub r: f64,
    #[arg(long, default_value_t = 1.0)]
    pub nu: f64,
    #[arg(long, default_value_t = 2.0)]
    pub gamma: f64,
    #[arg(long, default_value_t = 10.0)]
    pub t_max: f64,
}

#[derive(Clone, Copy, Debug, clap::ValueEnum)]
pub enum CenterArg {
    Center,
    Corner,
}

impl From<CenterArg> for RadialCenter {
    fn from(c: CenterArg) -> Self {
        match c {
            CenterArg::Center => Self::Center,
            CenterArg::Corner => Self::Corner,
        }
    }
}

#[derive(Clone, Copy, Debug, clap::ValueEnum)]
pub enum BaseArg {
    Triangle,
    Rhombus,
}

impl From<BaseArg> for TriBase {
    fn from(b: BaseArg) -> Self {
        match b {
            BaseArg::Triangle => Self::Triangle,
            BaseArg::Rhombus => Self::Rhombus,
        }
    }
}

fn default_output(command: &str) -> PathBuf {
    let root = std::env::var_os(OUTPUT_ROOT_VAR)
        .map(PathBuf::from)
        .unwrap_or_else(|| "plapflow-out".into());
    root.join(command)
}

impl Cli {
    /// The run configuration these arguments describe.
    pub fn into_config(self) -> anyhow::Result<RunConfig> {
        let solver = match &self.solver {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .with_context(|| format!("reading {}", path.display()))?;
                serde_json::from_str::<SolverSettings>(&text)
                    .with_context(|| format!("parsing {}", path.display()))?
            }
            None => SolverSettings::default(),
        };
        solver.newton.validate()?;
        solver.time.validate()?;
        let scenario = match self.command {
            Command::Replay { manifest } => {
                let text = std::fs::read_to_string(&manifest)
                    .with_context(|| format!("reading {}", manifest.display()))?;
                let v: serde_json::Value = serde_json::from_str(&text)?;
                let mut cfg: RunConfig =
                    serde_json::from_value(v.get("config").cloned().unwrap_or(v))
                        .with_context(|| format!("parsing {}", manifest.display()))?;
                if let Some(out) = self.out {
                    cfg.output_dir = out;
                }
                return Ok(cfg);
            }
            Command::NetworkFormation(a) => {
                let mut setup = if a.full_scale {
                    NetworkFormation::full_scale()
                } else {
                    NetworkFormation::default()
                };
                if let Some(n) = a.n {
                    setup.n = n;
                }
                if let Some(t) = a.t_max {
                    setup.t_max = t;
                }
                if let Some(g) = a.gamma {
                    setup.params.gamma = g;
                }
                Scenario::NetworkFormation(NetworkRun {
                    setup,
                    snapshots: a.snapshots,
                    mean_correct: !a.no_mean_correct,
                })
            }
            Command::Plap(a) => Scenario::Plap(PlapRun {
                case: a.case,
                n: a.n,
                center: a.center.into(),
            }),
            Command::Convergence(a) => {
                if a.levels < 2 {
                    anyhow::bail!("a convergence study needs at least 2 levels");
                }
                Scenario::Convergence(ConvergenceRun {
                    case: a.case,
                    levels: (0..a.levels).map(|k| a.n0 << k).collect(),
                    fit_last: a.fit_last,
                    center: a.center.into(),
                    parallel: !a.serial,
                })
            }
            Command::Tc6(a) => Scenario::Tc6Sweep(Tc6Run {
                ps: a.p,
                n: if a.full_scale { 512 } else { a.n },
                parallel: !a.serial,
            }),
            Command::Discrete(a) => Scenario::DiscreteStudy(DiscreteRun {
                study: a.study,
                samples: a.samples,
                base: a.base.into(),
                refinements: a.refinements,
                r: a.r,
                metabolic: Metabolic {
                    nu: a.nu,
                    gamma: a.gamma,
                },
                t_max: a.t_max,
            }),
        };
        let output_dir = self.out.unwrap_or_else(|| default_output(scenario.name()));
        Ok(RunConfig {
            scenario,
            output_dir,
            seed: self.seed,
            solver,
        })
    }
}
