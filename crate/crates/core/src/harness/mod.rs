//! Seeded Monte Carlo experiments that check each closed form against
//! simulated attacks.

mod exec;
mod experiments;
mod output;
mod simulate;

pub use exec::{map_indexed, Execution, CHUNK_ROWS};
pub use experiments::{
    check_logistic_figure, check_rows, closed_form_r2, convergence_gaps, quadratic_fit_r2, run_convergence,
    run_logistic_figure, run_recovery_attack, run_recovery_attack_with, run_small_sample, run_small_sample_ladder,
    run_tradeoff_sweep, AttackerOutcome, RecoveryReport, RecoveryScenario, SmallSampleReport, ToleranceViolation,
};
pub use output::{write_rows_csv, write_rows_json, CSV_HEADER};
pub use simulate::{simulate_queries, SimulatedQueries};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::garbler::GarblingConfig;
use crate::model::{CovariateSpec, RegressionModel};

/// Relative tolerances used when comparing empirical columns with their
/// closed forms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    /// For β̂ against plim β̂ = (1+γ)β.
    pub estimation: f64,
    /// For empirical σ² against the closed form.
    pub prediction: f64,
    /// For small-sample MSE against the analytic value.
    pub small_sample: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            estimation: 0.01,
            prediction: 0.02,
            small_sample: 0.03,
        }
    }
}

/// γ grid used when none is given: 0 to 1 in steps of 0.05.
pub fn default_gamma_grid() -> Vec<f64> {
    (0..=20).map(|i| i as f64 * 0.05).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub model: RegressionModel,
    pub garbling: GarblingConfig,
    pub covariates: CovariateSpec,
    pub n: usize,
    pub replicates: usize,
    #[serde(default)]
    pub gamma_grid: Option<Vec<f64>>,
    pub seed: u64,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub execution: Execution,
}

impl ExperimentConfig {
    /// Config with one replicate, no grid, and default tolerances.
    pub fn new(
        model: RegressionModel,
        garbling: GarblingConfig,
        covariates: CovariateSpec,
        n: usize,
        seed: u64,
    ) -> Result<Self> {
        let cfg = ExperimentConfig {
            model,
            garbling,
            covariates,
            n,
            replicates: 1,
            gamma_grid: None,
            seed,
            tolerances: Tolerances::default(),
            execution: Execution::default(),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_grid(mut self, grid: Vec<f64>) -> Self {
        self.gamma_grid = Some(grid);
        self
    }

    pub fn with_replicates(mut self, replicates: usize) -> Self {
        self.replicates = replicates;
        self
    }

    pub fn with_execution(mut self, execution: Execution) -> Self {
        self.execution = execution;
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        self.garbling.validate_for(&self.model)?;
        self.covariates.validate()?;
        if self.covariates.k() != self.model.k() {
            return Err(Error::DimensionMismatch {
                expected: self.model.k(),
                actual: self.covariates.k(),
            });
        }
        if self.n == 0 {
            return Err(Error::invalid("n", "must be at least 1"));
        }
        if self.replicates == 0 {
            return Err(Error::invalid("replicates", "must be at least 1"));
        }
        if let Some(grid) = &self.gamma_grid {
            if grid.iter().any(|g| !g.is_finite()) {
                return Err(Error::invalid("gamma_grid", "entries must be finite"));
            }
        }
        Ok(())
    }

    /// The garbling config with every γᵢ set to `gamma`.
    pub(crate) fn garbling_at(&self, gamma: f64) -> GarblingConfig {
        GarblingConfig {
            gammas: vec![gamma; self.model.k()],
            ..self.garbling.clone()
        }
    }
}

/// One line of an experiment table. The scalar `d_*` columns refer to the
/// first regressor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRow {
    pub gamma: f64,
    pub lambda: f64,
    pub n: usize,
    pub d_closed: f64,
    pub d_empirical: f64,
    pub sigma2_closed: f64,
    pub sigma2_empirical: f64,
    pub sigma2_probability_scale: Option<f64>,
    pub recovered_beta: Option<f64>,
    pub seed: u64,
}
