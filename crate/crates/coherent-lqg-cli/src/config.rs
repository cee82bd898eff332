//! Experiment configuration: a TOML file selecting a scenario plus
//! optional overrides of the optimizer hyperparameters and a budget
//! preset. Unknown keys are rejected.

use coherent_lqg::de::{DEConfig, PenaltyMode, RangeMode};
use coherent_lqg::scenarios::{ScenarioId, ScenarioSpec};
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub scenario: String,
    /// Extra seeds to run in addition to the one given on the command line.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub seeds: Vec<u64>,
    /// Budget preset: full (default), desk, or smoke.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub budget: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub de: Option<DeOverrides>,
}

/// Optional per-field overrides of [`DEConfig`]; anything left out keeps
/// the scenario/budget default.
#[derive(Debug, Clone, Default, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct DeOverrides {
    pub n_pop: Option<usize>,
    pub f_scale: Option<f64>,
    pub cr: Option<f64>,
    pub delta: Option<f64>,
    pub phi: Option<f64>,
    pub rounds: Option<usize>,
    pub rho_max: Option<f64>,
    pub alpha: Option<f64>,
    pub zeta: Option<f64>,
    pub bet_runs: Option<usize>,
    pub bet_iters: Option<usize>,
    pub init_bound: Option<f64>,
    pub max_gen: Option<u64>,
    pub stagnation_cap: Option<u64>,
    pub conv_threshold: Option<f64>,
    pub penalty: Option<PenaltyMode>,
    pub range: Option<RangeMode>,
    pub trace_stride: Option<u64>,
}

impl DeOverrides {
    pub fn apply(&self, cfg: &mut DEConfig) {
        macro_rules! set {
            ($($field:ident),*) => {
                $(if let Some(v) = self.$field.clone() { cfg.$field = v; })*
            };
        }
        set!(
            n_pop, f_scale, cr, delta, phi, rounds, rho_max, alpha, zeta, bet_runs, bet_iters,
            init_bound, max_gen, stagnation_cap, conv_threshold, penalty, range, trace_stride
        );
    }
}

/// Applies a named budget preset on top of the scenario defaults.
pub fn apply_budget(cfg: &mut DEConfig, budget: &str) -> Result<(), CliError> {
    match budget {
        "full" => {}
        "desk" => {
            cfg.rounds = 10;
            cfg.max_gen = 20_000;
            cfg.stagnation_cap = 5_000;
        }
        "smoke" => {
            cfg.rounds = 2;
            cfg.max_gen = 60;
            cfg.stagnation_cap = 40;
            cfg.bet_runs = 2;
            cfg.bet_iters = 5;
        }
        other => return Err(CliError::Usage(format!("unknown budget preset '{other}'"))),
    }
    Ok(())
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Usage(format!("invalid config: {e}")))
    }

    pub fn scenario_id(&self) -> Result<ScenarioId, CliError> {
        self.scenario
            .parse()
            .map_err(|e: coherent_lqg::Error| CliError::Usage(e.to_string()))
    }

    /// Resolved optimizer configuration for one seed.
    pub fn build(&self, spec: &ScenarioSpec, seed: u64) -> Result<DEConfig, CliError> {
        let mut cfg = DEConfig::for_scenario(spec);
        if let Some(budget) = &self.budget {
            apply_budget(&mut cfg, budget)?;
        }
        if let Some(de) = &self.de {
            de.apply(&mut cfg);
        }
        cfg.seed = seed;
        cfg.validate().map_err(|e| CliError::Usage(e.to_string()))?;
        Ok(cfg)
    }
}
