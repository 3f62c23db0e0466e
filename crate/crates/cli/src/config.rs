use std::path::PathBuf;

use plapflow::discrete::Metabolic;
use plapflow::gradientflow::NetworkFormation;
use plapflow::mesh::TriBase;
use plapflow::plaplacian::{CaseName, RadialCenter, SolverSettings};
use serde::{Deserialize, Serialize};

/// Environment variable naming the default output root.
pub const OUTPUT_ROOT_VAR: &str = "PLAPFLOW_OUT";

/// Everything needed to reproduce a run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub scenario: Scenario,
    pub output_dir: PathBuf,
    pub seed: u64,
    pub solver: SolverSettings,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scenario {
    NetworkFormation(NetworkRun),
    Plap(PlapRun),
    Convergence(ConvergenceRun),
    DiscreteStudy(DiscreteRun),
    Tc6Sweep(Tc6Run),
}

impl Scenario {
    pub fn name(&self) -> &'static str {
        match self {
            Self::NetworkFormation(_) => "network-formation",
            Self::Plap(_) => "plap",
            Self::Convergence(_) => "convergence",
            Self::DiscreteStudy(_) => "discrete",
            Self::Tc6Sweep(_) => "tc6",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkRun {
    pub setup: NetworkFormation,
    /// Times at which `log10(c)` is written; the final state is always written.
    pub snapshots: Vec<f64>,
    pub mean_correct: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlapRun {
    pub case: CaseName,
    pub n: usize,
    pub center: RadialCenter,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConvergenceRun {
    pub case: CaseName,
    /// Cells per unit length of each level.
    pub levels: Vec<usize>,
    pub fit_last: usize,
    pub center: RadialCenter,
    pub parallel: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tc6Run {
    pub ps: Vec<f64>,
    pub n: usize,
    pub parallel: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum DiscreteStudy {
    /// Random conductances: sup |Q - Z| against (2/3) max D.
    QzGap,
    /// Random conductances: graph energy against the semi-discrete energy on diamonds.
    Energies,
    /// Random P1 pairs: X (x) X form against half the stiffness form.
    XxIdentity,
    /// Random conductances: semi-discrete energy gap between Q and Z and its bound.
    EnergyGap,
    /// Random smooth sources: mass balance and both source bound constants.
    Sources,
    /// Lipschitz conductance on refined meshes against a fine reference.
    Refinement,
    /// Edgewise conductance flow on a small graph.
    Flow,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiscreteRun {
    pub study: DiscreteStudy,
    pub samples: usize,
    pub base: TriBase,
    /// Largest refinement count of the meshes drawn from.
    pub refinements: usize,
    pub r: f64,
    pub metabolic: Metabolic,
    pub t_max: f64,
}

impl Default for DiscreteRun {
    fn default() -> Self {
        Self {
            study: DiscreteStudy::QzGap,
            samples: 1000,
            base: TriBase::Rhombus,
            refinements: 3,
            r: 0.1,
            metabolic: Metabolic {
                nu: 1.0,
                gamma: 2.0,
            },
            t_max: 10.0,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Vec<RunConfig> {
        let solver = SolverSettings::default();
        let mk = |scenario| RunConfig {
            scenario,
            output_dir: "out/x".into(),
            seed: 7,
            solver,
        };
        vec![
            mk(Scenario::NetworkFormation(NetworkRun {
                setup: NetworkFormation::default(),
                snapshots: vec![1.0, 10.0],
                mean_correct: true,
            })),
            mk(Scenario::Plap(PlapRun {
                case: CaseName::TC2,
                n: 16,
                center: RadialCenter::Corner,
            })),
            mk(Scenario::Convergence(ConvergenceRun {
                case: CaseName::TC1,
                levels: vec![16, 32],
                fit_last: 3,
                center: RadialCenter::Center,
                parallel: true,
            })),
            mk(Scenario::DiscreteStudy(DiscreteRun::default())),
            mk(Scenario::Tc6Sweep(Tc6Run {
                ps: vec![5.0, 0.1 + 0.2],
                n: 32,
                parallel: false,
            })),
        ]
    }

    #[test]
    fn json_round_trip_is_identical() {
        for cfg in sample() {
            let s = serde_json::to_string_pretty(&cfg).unwrap();
            let back: RunConfig = serde_json::from_str(&s).unwrap();
            assert_eq!(back, cfg);
            assert_eq!(serde_json::to_string_pretty(&back).unwrap(), s);
        }
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let cfg = &sample()[1];
        let mut v = serde_json::to_value(cfg).unwrap();
        v["solver"]["time"]["dt00"] = 1.0.into();
        assert!(serde_json::from_value::<RunConfig>(v).is_err());
        let mut v = serde_json::to_value(cfg).unwrap();
        v["scenario"]["plap"]["extra"] = 1.into();
        assert!(serde_json::from_value::<RunConfig>(v).is_err());
    }
}
