//! Joint influence matrix, its covariance, and the product test.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::io::Write;

use nalgebra::{DMatrix, SymmetricEigen};
use thiserror::Error;

use crate::data::{DataError, ModelSpec, ObservationTable};
use crate::estimators::{estimate, wald_interval, EstimatorError, EstimatorOptions, EstimatorOutput, WaldInterval};
use crate::stats::{two_sided_critical_value, two_sided_p_value};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CombineError {
    #[error("the product test needs at least 2 models, got {0}")]
    TooFewModels(usize),
    #[error("model `{label}` has {found} influence values, expected {expected}")]
    LengthMismatch {
        label: String,
        expected: usize,
        found: usize,
    },
    #[error("duplicate model label `{0}`")]
    DuplicateLabel(String),
    #[error("significance level must lie in (0, 1), got {0}")]
    InvalidLevel(f64),
    #[error("model `{label}`: {source}")]
    Estimator {
        label: String,
        #[source]
        source: EstimatorError,
    },
    #[error(transparent)]
    Data(#[from] DataError),
    #[error("io: {0}")]
    Io(String),
}

impl From<std::io::Error> for CombineError {
    fn from(e: std::io::Error) -> Self {
        CombineError::Io(e.to_string())
    }
}

/// Stacked estimates and `n x K` influence matrix, in input order.
#[derive(Debug, Clone, PartialEq)]
pub struct JointEstimate {
    pub labels: Vec<String>,
    pub psi: Vec<f64>,
    pub if_matrix: DMatrix<f64>,
}

impl JointEstimate {
    pub fn n(&self) -> usize {
        self.if_matrix.nrows()
    }

    pub fn k(&self) -> usize {
        self.psi.len()
    }
}

pub fn joint(outputs: &[EstimatorOutput]) -> Result<JointEstimate, CombineError> {
    if outputs.len() < 2 {
        return Err(CombineError::TooFewModels(outputs.len()));
    }
    let n = outputs[0].if_values.len();
    let mut seen = HashSet::new();
    for out in outputs {
        if !seen.insert(out.label.as_str()) {
            return Err(CombineError::DuplicateLabel(out.label.clone()));
        }
        if out.if_values.len() != n {
            return Err(CombineError::LengthMismatch {
                label: out.label.clone(),
                expected: n,
                found: out.if_values.len(),
            });
        }
    }
    let mut if_matrix = DMatrix::zeros(n, outputs.len());
    for (k, out) in outputs.iter().enumerate() {
        if_matrix.column_mut(k).copy_from_slice(&out.if_values);
    }
    Ok(JointEstimate {
        labels: outputs.iter().map(|o| o.label.clone()).collect(),
        psi: outputs.iter().map(|o| o.psi_hat).collect(),
        if_matrix,
    })
}

/// `sigma[j][k] = (1/n) sum_i phi_ij phi_ik`.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceEstimate {
    pub sigma: DMatrix<f64>,
}

impl CovarianceEstimate {
    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut ev: Vec<f64> = SymmetricEigen::new(self.sigma.clone())
            .eigenvalues
            .iter()
            .copied()
            .collect();
        ev.sort_by(f64::total_cmp);
        ev
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues()[0]
    }

    /// Ratio of extreme eigenvalues; infinite when the smallest is not positive.
    pub fn condition_number(&self) -> f64 {
        let ev = self.eigenvalues();
        let (lo, hi) = (ev[0], ev[ev.len() - 1]);
        if lo <= 0.0 {
            f64::INFINITY
        } else {
            hi / lo
        }
    }

    /// Quadratic form `g' sigma g`.
    pub fn quadratic_form(&self, g: &[f64]) -> f64 {
        let k = g.len();
        let mut total = 0.0;
        for i in 0..k {
            for j in 0..k {
                total += g[i] * self.sigma[(i, j)] * g[j];
            }
        }
        total
    }
}

pub fn estimate_covariance(joint: &JointEstimate) -> CovarianceEstimate {
    let (n, k) = (joint.n(), joint.k());
    let mut sigma = DMatrix::zeros(k, k);
    for j in 0..k {
        let cj = joint.if_matrix.column(j);
        for l in 0..=j {
            let v = cj.dot(&joint.if_matrix.column(l)) / n as f64;
            sigma[(j, l)] = v;
            sigma[(l, j)] = v;
        }
    }
    CovarianceEstimate { sigma }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProductTestResult {
    pub k: usize,
    pub n: usize,
    pub t_stat: f64,
    pub p_value: f64,
    /// `prod_k psi_k`.
    pub product: f64,
    /// `gamma_k = prod_{j != k} psi_j`.
    pub gamma: Vec<f64>,
    /// `gamma' Sigma gamma`.
    pub variance: f64,
    /// Decision `|t| > q_{1 - alpha/2}` for each requested level.
    pub reject_at: Vec<(f64, bool)>,
    /// Set when the variance is numerically zero; the result then carries
    /// `t_stat = 0`, `p_value = 1`, and no rejections.
    pub degenerate: bool,
    pub sigma_condition_number: f64,
}

impl ProductTestResult {
    pub fn rejects(&self, alpha: f64) -> Option<bool> {
        self.reject_at.iter().find(|(a, _)| *a == alpha).map(|(_, r)| *r)
    }
}

fn leave_one_out_products(psi: &[f64]) -> Vec<f64> {
    (0..psi.len())
        .map(|k| {
            psi.iter()
                .enumerate()
                .filter(|(j, _)| *j != k)
                .map(|(_, v)| v)
                .product()
        })
        .collect()
}

pub fn product_test(
    joint: &JointEstimate,
    sigma: &CovarianceEstimate,
    levels: &[f64],
) -> Result<ProductTestResult, CombineError> {
    if let Some(&bad) = levels.iter().find(|&&a| !(a > 0.0 && a < 1.0)) {
        return Err(CombineError::InvalidLevel(bad));
    }
    let product: f64 = joint.psi.iter().product();
    let gamma = leave_one_out_products(&joint.psi);
    let variance = sigma.quadratic_form(&gamma);

    let max_diag = (0..joint.k()).map(|i| sigma.sigma[(i, i)]).fold(0.0, f64::max);
    let max_gamma_sq = gamma.iter().map(|g| g * g).fold(1.0, f64::max);
    let threshold = 1e-12 * max_diag * max_gamma_sq;
    let degenerate = variance.is_nan() || variance <= threshold;

    let t_stat = if degenerate {
        0.0
    } else {
        (joint.n() as f64).sqrt() * product / variance.sqrt()
    };
    let p_value = if degenerate { 1.0 } else { two_sided_p_value(t_stat) };
    let reject_at = levels
        .iter()
        .map(|&a| (a, !degenerate && t_stat.abs() > two_sided_critical_value(a)))
        .collect();
    Ok(ProductTestResult {
        k: joint.k(),
        n: joint.n(),
        t_stat,
        p_value,
        product,
        gamma,
        variance: variance.max(0.0),
        reject_at,
        degenerate,
        sigma_condition_number: sigma.condition_number(),
    })
}

/// Everything reported for one data set: per-model estimates and Wald
/// intervals, plus the combined product test.
#[derive(Debug, Clone, PartialEq)]
pub struct Analysis {
    pub estimates: Vec<EstimatorOutput>,
    pub intervals: Vec<WaldInterval>,
    pub covariance: CovarianceEstimate,
    pub test: ProductTestResult,
}

/// Runs every model, the joint covariance, and the product test, with
/// default estimator options and 95% Wald intervals.
pub fn analyze_all(table: &ObservationTable, specs: &[ModelSpec], levels: &[f64]) -> Result<Analysis, CombineError> {
    analyze_all_with(table, specs, levels, 0.95, &EstimatorOptions::default())
}

pub fn analyze_all_with(
    table: &ObservationTable,
    specs: &[ModelSpec],
    levels: &[f64],
    confidence: f64,
    options: &EstimatorOptions,
) -> Result<Analysis, CombineError> {
    if specs.len() < 2 {
        return Err(CombineError::TooFewModels(specs.len()));
    }
    let wrap = |spec: &ModelSpec| {
        let label = spec.label();
        move |source| CombineError::Estimator { label, source }
    };
    let mut estimates = Vec::with_capacity(specs.len());
    for spec in specs {
        estimates.push(estimate(table, spec, options).map_err(wrap(spec))?);
    }
    let joint_estimate = joint(&estimates)?;
    let covariance = estimate_covariance(&joint_estimate);
    let test = product_test(&joint_estimate, &covariance, levels)?;
    let mut intervals = Vec::with_capacity(specs.len());
    for (spec, est) in specs.iter().zip(&estimates) {
        intervals.push(wald_interval(est, confidence).map_err(wrap(spec))?);
    }
    Ok(Analysis {
        estimates,
        intervals,
        covariance,
        test,
    })
}

pub const INTERVAL_CSV_HEADER: &str = "label,estimate,std_error,ci_lower,ci_upper,p_value";
pub const COMBINED_CSV_HEADER: &str = "K,product,variance,t_stat,p_value,degenerate_flag,sigma_condition_number";

fn csv_field(text: &str) -> String {
    if text.contains([',', '"', '\n']) {
        format!("\"{}\"", text.replace('"', "\"\""))
    } else {
        text.to_string()
    }
}

pub fn write_intervals_csv<W: Write>(mut out: W, intervals: &[WaldInterval]) -> std::io::Result<()> {
    writeln!(out, "{INTERVAL_CSV_HEADER}")?;
    for w in intervals {
        writeln!(
            out,
            "{},{},{},{},{},{}",
            csv_field(&w.label),
            w.estimate,
            w.std_error,
            w.lower,
            w.upper,
            w.p_value
        )?;
    }
    Ok(())
}

pub fn write_combined_csv<W: Write>(mut out: W, result: &ProductTestResult) -> std::io::Result<()> {
    writeln!(out, "{COMBINED_CSV_HEADER}")?;
    writeln!(
        out,
        "{},{},{},{},{},{},{}",
        result.k,
        result.product,
        result.variance,
        result.t_stat,
        result.p_value,
        result.degenerate,
        result.sigma_condition_number
    )
}

impl Analysis {
    /// Human-readable summary: one line per model, then the combined test.
    pub fn text_report(&self) -> String {
        let mut s = String::new();
        let width = self.intervals.iter().map(|w| w.label.len()).max().unwrap_or(5).max(5);
        let level = self.intervals.first().map_or(0.95, |w| w.level);
        let _ = writeln!(
            s,
            "{:<width$}  {:>10}  {:>10}  {:>24}  {:>8}",
            "model",
            "estimate",
            "std.err",
            format!("{:.0}% CI", level * 100.0),
            "p"
        );
        for w in &self.intervals {
            let ci = format!("({:.3}, {:.3})", w.lower, w.upper);
            let _ = writeln!(
                s,
                "{:<width$}  {:>10.4}  {:>10.4}  {:>24}  {:>8.4}",
                w.label, w.estimate, w.std_error, ci, w.p_value
            );
        }
        let t = &self.test;
        let _ = writeln!(
            s,
            "\ncombined product test (K = {}, n = {}): T = {:.4}, p = {:.4}",
            t.k, t.n, t.t_stat, t.p_value
        );
        let _ = writeln!(
            s,
            "  product = {:.6}, gamma' Sigma gamma = {:.6}",
            t.product, t.variance
        );
        let _ = writeln!(s, "  Sigma condition number = {:.4e}", t.sigma_condition_number);
        if t.degenerate {
            let _ = writeln!(s, "  variance is numerically zero: reported as p = 1, no rejection");
        }
        for (alpha, reject) in &t.reject_at {
            let _ = writeln!(
                s,
                "  alpha = {alpha}: {}",
                if *reject { "reject H0" } else { "do not reject H0" }
            );
        }
        s
    }
}
