//! Monte Carlo size and power sweeps.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;
use std::path::Path;

use super::rng::rep_seed;
use super::scenarios::{generate, ScenarioConfig, ScenarioId};
use super::SimulateError;
use crate::combine::{estimate_covariance, joint, product_test};
use crate::data::{validate_spec, ModelSpec};
use crate::estimators::{estimate, EstimatorOptions};
use crate::keyvalue::{check_keys, parse_key_values, split_list};

pub const DEFAULT_N_GRID: [usize; 5] = [100, 250, 500, 750, 1000];

#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub scenario: ScenarioId,
    pub n_grid: Vec<usize>,
    pub beta_values: Vec<f64>,
    pub reps: usize,
    pub alpha: f64,
    pub master_seed: u64,
    /// `None` uses the scenario's default model set.
    pub models: Option<Vec<ModelSpec>>,
    /// Index of the first replicate; sweeps over disjoint rep ranges merge
    /// into the sweep over their union.
    pub first_rep: u64,
}

impl SweepConfig {
    /// Null sweep over the default grid with 1000 reps at level 0.05.
    pub fn new(scenario: ScenarioId, master_seed: u64) -> Self {
        Self {
            scenario,
            n_grid: DEFAULT_N_GRID.to_vec(),
            beta_values: vec![0.0],
            reps: 1000,
            alpha: 0.05,
            master_seed,
            models: None,
            first_rep: 0,
        }
    }

    pub const KEYS: [&'static str; 7] = ["scenario", "n_grid", "beta", "reps", "alpha", "seed", "models"];

    /// Parses a flat `key=value` file. `models` separates specs with `;`.
    /// The seed is mandatory.
    pub fn from_config_str(text: &str) -> Result<Self, SimulateError> {
        let pairs = parse_key_values(text).map_err(|e| SimulateError::InvalidConfig(e.to_string()))?;
        Self::from_key_values(&pairs)
    }

    pub fn from_key_values(pairs: &BTreeMap<String, String>) -> Result<Self, SimulateError> {
        check_keys(pairs, &Self::KEYS).map_err(|e| SimulateError::InvalidConfig(e.to_string()))?;
        let get = |k: &str| pairs.get(k).map(String::as_str);
        let scenario: ScenarioId = get("scenario")
            .ok_or_else(|| SimulateError::InvalidConfig("missing key `scenario`".into()))?
            .parse()?;
        let seed = get("seed")
            .ok_or_else(|| SimulateError::InvalidConfig("missing key `seed`".into()))?
            .parse::<u64>()
            .map_err(|e| SimulateError::InvalidConfig(format!("seed: {e}")))?;
        let mut config = Self::new(scenario, seed);
        if let Some(v) = get("n_grid") {
            config.n_grid = parse_list(v, "n_grid")?;
        }
        if let Some(v) = get("beta") {
            config.beta_values = parse_list(v, "beta")?;
        }
        if let Some(v) = get("reps") {
            config.reps = parse_one(v, "reps")?;
        }
        if let Some(v) = get("alpha") {
            config.alpha = parse_one(v, "alpha")?;
        }
        if let Some(v) = get("models") {
            config.models = Some(parse_models(v, scenario)?);
        }
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), SimulateError> {
        let bad = |msg: String| Err(SimulateError::InvalidConfig(msg));
        if self.reps == 0 {
            return bad("reps must be at least 1".into());
        }
        if self.n_grid.is_empty() || self.beta_values.is_empty() {
            return bad("n_grid and beta need at least one value each".into());
        }
        if let Some(n) = self.n_grid.iter().find(|&&n| n < 2) {
            return bad(format!("every n must be at least 2, got {n}"));
        }
        if let Some(b) = self.beta_values.iter().find(|b| !b.is_finite()) {
            return bad(format!("beta values must be finite, got {b}"));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return bad(format!("alpha must lie in (0, 1), got {}", self.alpha));
        }
        let models = self.model_set();
        if models.len() < 2 && self.scenario != ScenarioId::Faith {
            return bad(format!(
                "the product test needs at least 2 models, got {}",
                models.len()
            ));
        }
        Ok(())
    }

    pub fn model_set(&self) -> Vec<ModelSpec> {
        self.models.clone().unwrap_or_else(|| self.scenario.default_models())
    }
}

/// Parses `;`-separated model specs; adjustment defaults to the scenario's
/// first four covariates.
pub fn parse_models(text: &str, scenario: ScenarioId) -> Result<Vec<ModelSpec>, SimulateError> {
    let default_adj: Vec<String> = scenario.covariate_names().into_iter().take(4).collect();
    text.split(';')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| ModelSpec::parse(s, &default_adj).map_err(SimulateError::from))
        .collect()
}

fn parse_one<T: std::str::FromStr>(v: &str, key: &str) -> Result<T, SimulateError>
where
    T::Err: fmt::Display,
{
    v.trim()
        .parse()
        .map_err(|e| SimulateError::InvalidConfig(format!("{key}: {e}")))
}

fn parse_list<T: std::str::FromStr>(v: &str, key: &str) -> Result<Vec<T>, SimulateError>
where
    T::Err: fmt::Display,
{
    split_list(v).iter().map(|s| parse_one(s, key)).collect()
}

/// How replicates are scheduled. Results do not depend on the choice.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Execution {
    #[cfg_attr(not(feature = "parallel"), default)]
    Sequential,
    #[cfg(feature = "parallel")]
    #[default]
    Parallel,
}

/// Tally for one `(scenario, n, beta)` grid point.
#[derive(Debug, Clone, PartialEq)]
pub struct RejectionRow {
    pub scenario: String,
    pub n: usize,
    pub beta: f64,
    pub reps: usize,
    pub rejections: usize,
    pub degenerate: usize,
    /// Reps where an estimator failed; counted as non-rejections.
    pub failures: usize,
    /// Mean of `T_n` over the reps that produced a statistic.
    pub mean_t_stat: f64,
}

impl RejectionRow {
    pub fn rejection_rate(&self) -> f64 {
        self.rejections as f64 / self.reps as f64
    }

    pub fn degenerate_fraction(&self) -> f64 {
        self.degenerate as f64 / self.reps as f64
    }

    fn completed(&self) -> usize {
        self.reps - self.failures
    }

    fn merge(&mut self, other: &RejectionRow) {
        let (k1, k2) = (self.completed() as f64, other.completed() as f64);
        self.mean_t_stat = if k1 + k2 == 0.0 {
            f64::NAN
        } else {
            let part = |m: f64, k: f64| if k == 0.0 { 0.0 } else { m * k };
            (part(self.mean_t_stat, k1) + part(other.mean_t_stat, k2)) / (k1 + k2)
        };
        self.reps += other.reps;
        self.rejections += other.rejections;
        self.degenerate += other.degenerate;
        self.failures += other.failures;
    }

    fn key(&self) -> (String, u64, usize) {
        (self.scenario.clone(), order_key(self.beta), self.n)
    }
}

impl fmt::Display for RejectionRow {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} n={} beta={} reps={} rejection_rate={:.3} mean_t={:.3} degenerate={:.3} failures={}",
            self.scenario,
            self.n,
            self.beta,
            self.reps,
            self.rejection_rate(),
            self.mean_t_stat,
            self.degenerate_fraction(),
            self.failures
        )
    }
}

/// Total order on f64 bit patterns that agrees with numeric order.
fn order_key(x: f64) -> u64 {
    let bits = x.to_bits();
    if bits >> 63 == 1 {
        !bits
    } else {
        bits | (1 << 63)
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RejectionTable {
    pub rows: Vec<RejectionRow>,
}

pub const REJECTION_CSV_HEADER: &str =
    "scenario,n,beta,reps,rejection_rate,mean_t_stat,degenerate_fraction,rejections,failures";

impl RejectionTable {
    /// Combines tallies of matching grid points; unmatched rows are appended.
    pub fn merge(&mut self, other: &RejectionTable) {
        for row in &other.rows {
            match self.rows.iter_mut().find(|r| r.key() == row.key()) {
                Some(existing) => existing.merge(row),
                None => self.rows.push(row.clone()),
            }
        }
    }

    pub fn find(&self, scenario: ScenarioId, n: usize, beta: f64) -> Option<&RejectionRow> {
        self.rows
            .iter()
            .find(|r| r.scenario == scenario.key() && r.n == n && r.beta == beta)
    }

    /// Rows sorted by scenario, then beta, then n.
    pub fn sorted_rows(&self) -> Vec<&RejectionRow> {
        let mut rows: Vec<&RejectionRow> = self.rows.iter().collect();
        rows.sort_by_key(|r| r.key());
        rows
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "{REJECTION_CSV_HEADER}")?;
        for r in self.sorted_rows() {
            writeln!(
                out,
                "{},{},{},{},{},{},{},{},{}",
                r.scenario,
                r.n,
                r.beta,
                r.reps,
                r.rejection_rate(),
                r.mean_t_stat,
                r.degenerate_fraction(),
                r.rejections,
                r.failures
            )?;
        }
        Ok(())
    }
}

/// Writes the table as CSV, one row per grid point.
pub fn summarize(table: &RejectionTable, path: impl AsRef<Path>) -> Result<(), SimulateError> {
    if table.rows.is_empty() {
        return Err(SimulateError::InvalidConfig("cannot summarize an empty table".into()));
    }
    let mut buf = Vec::new();
    table.write_csv(&mut buf)?;
    std::fs::write(path, buf)?;
    Ok(())
}

#[derive(Debug, Clone, Copy)]
struct RepOutcome {
    rejected: bool,
    degenerate: bool,
    /// `None` when an estimator failed.
    t_stat: Option<f64>,
}

fn run_rep(config: &SweepConfig, models: &[ModelSpec], n: usize, beta: f64, rep: u64) -> RepOutcome {
    let seed = rep_seed(config.master_seed, config.scenario.key(), n, beta, rep);
    let failed = RepOutcome {
        rejected: false,
        degenerate: false,
        t_stat: None,
    };
    let Ok(table) = generate(&ScenarioConfig {
        id: config.scenario,
        n,
        beta,
        seed,
    }) else {
        return failed;
    };
    let options = EstimatorOptions::default();
    let mut outputs = Vec::with_capacity(models.len());
    for spec in models {
        match estimate(&table, spec, &options) {
            Ok(out) => outputs.push(out),
            Err(_) => return failed,
        }
    }
    let Ok(j) = joint(&outputs) else {
        return failed;
    };
    let sigma = estimate_covariance(&j);
    match product_test(&j, &sigma, &[config.alpha]) {
        Ok(t) => RepOutcome {
            rejected: t.reject_at[0].1,
            degenerate: t.degenerate,
            t_stat: Some(t.t_stat),
        },
        Err(_) => failed,
    }
}

fn tally(config: &SweepConfig, n: usize, beta: f64, outcomes: &[RepOutcome]) -> RejectionRow {
    let stats: Vec<f64> = outcomes.iter().filter_map(|o| o.t_stat).collect();
    RejectionRow {
        scenario: config.scenario.key().to_string(),
        n,
        beta,
        reps: outcomes.len(),
        rejections: outcomes.iter().filter(|o| o.rejected).count(),
        degenerate: outcomes.iter().filter(|o| o.degenerate).count(),
        failures: outcomes.len() - stats.len(),
        mean_t_stat: if stats.is_empty() {
            f64::NAN
        } else {
            crate::stats::mean(&stats)
        },
    }
}

pub fn run_sweep(config: &SweepConfig) -> Result<RejectionTable, SimulateError> {
    run_sweep_with(config, Execution::default())
}

/// Runs every `(n, beta)` grid point; rows come out in grid order (beta
/// outer, n inner).
pub fn run_sweep_with(config: &SweepConfig, execution: Execution) -> Result<RejectionTable, SimulateError> {
    config.validate()?;
    let models = config.model_set();
    check_models(config, &models)?;

    let mut rows = Vec::new();
    for &beta in &config.beta_values {
        for &n in &config.n_grid {
            let reps = config.first_rep..config.first_rep + config.reps as u64;
            let outcomes: Vec<RepOutcome> = match execution {
                Execution::Sequential => reps.map(|r| run_rep(config, &models, n, beta, r)).collect(),
                #[cfg(feature = "parallel")]
                Execution::Parallel => {
                    use rayon::prelude::*;
                    reps.into_par_iter()
                        .map(|r| run_rep(config, &models, n, beta, r))
                        .collect()
                }
            };
            rows.push(tally(config, n, beta, &outcomes));
        }
    }
    Ok(RejectionTable { rows })
}

/// Confirms each model fits the scenario's columns before any rep runs, so
/// a misconfigured sweep fails loudly instead of tallying failures.
fn check_models(config: &SweepConfig, models: &[ModelSpec]) -> Result<(), SimulateError> {
    let probe = generate(&ScenarioConfig {
        id: config.scenario,
        n: 2,
        beta: 0.0,
        seed: config.master_seed,
    })?;
    for spec in models {
        validate_spec(&probe, spec).map_err(|source| SimulateError::IncompatibleModel {
            scenario: config.scenario.key().to_string(),
            model: spec.label(),
            source,
        })?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(id: ScenarioId) -> SweepConfig {
        SweepConfig {
            n_grid: vec![100],
            reps: 6,
            ..SweepConfig::new(id, 11)
        }
    }

    #[test]
    fn one_row_per_grid_point() {
        let mut c = small(ScenarioId::BfiA);
        c.n_grid = vec![100, 150];
        c.beta_values = vec![0.0, 10.0];
        let t = run_sweep(&c).unwrap();
        assert_eq!(t.rows.len(), 4);
        for r in &t.rows {
            assert_eq!(r.reps, 6);
            assert!(r.rejections <= r.reps);
        }
    }

    #[test]
    fn incompatible_model_is_rejected_up_front() {
        let mut c = small(ScenarioId::BfA);
        c.models = Some(vec![ModelSpec::backdoor(["c1"]), ModelSpec::iv()]);
        assert!(matches!(run_sweep(&c), Err(SimulateError::IncompatibleModel { .. })));
    }

    #[test]
    fn config_file_round_trip() {
        let c = SweepConfig::from_config_str(
            "scenario=MBD\nseed=5\nn_grid=100,200\nbeta=0,10\nreps=3\nalpha=0.1\n\
             models=backdoor:adj=c1,c2;backdoor:adj=c1",
        )
        .unwrap();
        assert_eq!(c.scenario, ScenarioId::Mbd);
        assert_eq!(c.n_grid, vec![100, 200]);
        assert_eq!(c.beta_values, vec![0.0, 10.0]);
        assert_eq!(c.model_set().len(), 2);
        assert!(SweepConfig::from_config_str("scenario=MBD").is_err());
        assert!(SweepConfig::from_config_str("scenario=MBD\nseed=1\nreps=0").is_err());
        assert!(SweepConfig::from_config_str("scenario=MBD\nseed=1\ncolour=red").is_err());
    }

    #[test]
    fn order_key_is_monotone() {
        let xs = [-10.0, -0.5, 0.0, 0.5, 10.0];
        for w in xs.windows(2) {
            assert!(order_key(w[0]) < order_key(w[1]));
        }
    }
}
