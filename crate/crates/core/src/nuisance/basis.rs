use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;

use super::NuisanceError;

pub const MAX_POLYNOMIAL_DEGREE: usize = 5;
pub const MAX_KNOTS_PER_COVARIATE: usize = 10;
pub const DEFAULT_KNOTS_PER_COVARIATE: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BasisKind {
    Linear,
    Polynomial {
        degree: usize,
    },
    /// Cubic polynomial plus truncated cubics `(x - k)^3_+` at empirical
    /// quantile knots: an additive, unpenalized regression-spline stand-in
    /// for a generalized additive model.
    SplineLike {
        knots_per_covariate: usize,
    },
}

/// How covariates are expanded before a nuisance regression.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BasisSpec {
    pub kind: BasisKind,
    pub include_interactions: bool,
}

impl Default for BasisSpec {
    fn default() -> Self {
        Self {
            kind: BasisKind::SplineLike {
                knots_per_covariate: DEFAULT_KNOTS_PER_COVARIATE,
            },
            include_interactions: false,
        }
    }
}

impl BasisSpec {
    pub fn linear() -> Self {
        Self {
            kind: BasisKind::Linear,
            include_interactions: false,
        }
    }

    pub fn polynomial(degree: usize) -> Result<Self, NuisanceError> {
        let spec = Self {
            kind: BasisKind::Polynomial { degree },
            include_interactions: false,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn spline(knots_per_covariate: usize) -> Result<Self, NuisanceError> {
        let spec = Self {
            kind: BasisKind::SplineLike { knots_per_covariate },
            include_interactions: false,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn with_interactions(mut self, on: bool) -> Self {
        self.include_interactions = on;
        self
    }

    pub fn validate(&self) -> Result<(), NuisanceError> {
        match self.kind {
            BasisKind::Polynomial { degree } if !(2..=MAX_POLYNOMIAL_DEGREE).contains(&degree) => Err(
                NuisanceError::InvalidBasis(format!("polynomial degree must be in 2..={MAX_POLYNOMIAL_DEGREE}")),
            ),
            BasisKind::SplineLike { knots_per_covariate }
                if !(1..=MAX_KNOTS_PER_COVARIATE).contains(&knots_per_covariate) =>
            {
                Err(NuisanceError::InvalidBasis(format!(
                    "knots per covariate must be in 1..={MAX_KNOTS_PER_COVARIATE}"
                )))
            }
            _ => Ok(()),
        }
    }
}

impl fmt::Display for BasisSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            BasisKind::Linear => write!(f, "linear")?,
            BasisKind::Polynomial { degree } => write!(f, "poly:{degree}")?,
            BasisKind::SplineLike { knots_per_covariate } => write!(f, "spline:{knots_per_covariate}")?,
        }
        if self.include_interactions {
            write!(f, "+interactions")?;
        }
        Ok(())
    }
}

/// Parses `linear`, `poly:<degree>`, or `spline:<knots>`. Interactions are
/// configured separately.
impl FromStr for BasisSpec {
    type Err = NuisanceError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        let bad = || NuisanceError::InvalidBasis(s.to_string());
        let parse_count = |v: &str| v.trim().parse::<usize>().map_err(|_| bad());
        match s.split_once(':') {
            None if s == "linear" => Ok(Self::linear()),
            Some(("poly", v)) => Self::polynomial(parse_count(v)?),
            Some(("spline", v)) => Self::spline(parse_count(v)?),
            _ => Err(bad()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum CovariateTerms {
    /// Single linear term. Used for the linear basis and for any covariate
    /// taking at most two distinct values, where higher powers are collinear.
    Linear,
    Powers(usize),
    Spline(Vec<f64>),
}

/// A basis whose data-dependent parts (spline knots) have been fixed on a
/// sample, so the same columns can be rebuilt for counterfactual inputs.
///
/// Column order: intercept, binary columns, per-covariate basis functions,
/// then pairwise products of the binary columns and raw covariates when
/// interactions are enabled.
#[derive(Debug, Clone, PartialEq)]
pub struct BasisExpansion {
    spec: BasisSpec,
    n_binary: usize,
    terms: Vec<CovariateTerms>,
    feature_names: Vec<String>,
}

fn distinct_count_at_most(values: &[f64], limit: usize) -> bool {
    let mut seen: Vec<f64> = Vec::with_capacity(limit + 1);
    for &v in values {
        if !seen.contains(&v) {
            seen.push(v);
            if seen.len() > limit {
                return false;
            }
        }
    }
    true
}

/// Empirical quantile with linear interpolation between order statistics.
fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

fn quantile_knots(values: &[f64], count: usize) -> Vec<f64> {
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.total_cmp(b));
    let (min, max) = (sorted[0], sorted[sorted.len() - 1]);
    let mut knots: Vec<f64> = Vec::with_capacity(count);
    for j in 1..=count {
        let k = quantile_sorted(&sorted, j as f64 / (count + 1) as f64);
        // Knots on the boundary or repeated by ties give all-zero or duplicate columns.
        if k > min && k < max && knots.last().is_none_or(|&last| k > last) {
            knots.push(k);
        }
    }
    knots
}

impl BasisExpansion {
    pub fn fit(
        covariates: &[&[f64]],
        covariate_names: &[String],
        binary_names: &[String],
        spec: BasisSpec,
    ) -> Result<Self, NuisanceError> {
        spec.validate()?;
        if covariates.len() != covariate_names.len() {
            return Err(NuisanceError::DimensionMismatch {
                expected: covariate_names.len(),
                found: covariates.len(),
            });
        }
        let mut terms = Vec::with_capacity(covariates.len());
        for (values, name) in covariates.iter().zip(covariate_names) {
            if values.is_empty() {
                return Err(NuisanceError::EmptyDesign);
            }
            let constant = values.iter().all(|&v| v == values[0]);
            let term = match spec.kind {
                BasisKind::SplineLike { .. } if constant => {
                    return Err(NuisanceError::DegenerateCovariate(name.clone()))
                }
                _ if distinct_count_at_most(values, 2) => CovariateTerms::Linear,
                BasisKind::Linear => CovariateTerms::Linear,
                BasisKind::Polynomial { degree } => CovariateTerms::Powers(degree),
                BasisKind::SplineLike { knots_per_covariate } => {
                    CovariateTerms::Spline(quantile_knots(values, knots_per_covariate))
                }
            };
            terms.push(term);
        }

        let mut feature_names = vec!["(intercept)".to_string()];
        feature_names.extend(binary_names.iter().cloned());
        for (term, name) in terms.iter().zip(covariate_names) {
            match term {
                CovariateTerms::Linear => feature_names.push(name.clone()),
                CovariateTerms::Powers(d) => {
                    feature_names.push(name.clone());
                    feature_names.extend((2..=*d).map(|p| format!("{name}^{p}")));
                }
                CovariateTerms::Spline(knots) => {
                    feature_names.push(name.clone());
                    feature_names.push(format!("{name}^2"));
                    feature_names.push(format!("{name}^3"));
                    feature_names.extend(knots.iter().map(|k| format!("({name}-{k})^3+")));
                }
            }
        }
        if spec.include_interactions {
            let raw: Vec<&String> = binary_names.iter().chain(covariate_names).collect();
            for i in 0..raw.len() {
                for j in i + 1..raw.len() {
                    feature_names.push(format!("{}:{}", raw[i], raw[j]));
                }
            }
        }

        Ok(Self {
            spec,
            n_binary: binary_names.len(),
            terms,
            feature_names,
        })
    }

    pub fn spec(&self) -> BasisSpec {
        self.spec
    }

    pub fn width(&self) -> usize {
        self.feature_names.len()
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    /// Builds the `n x d` design for the given covariate and binary columns.
    pub fn design(&self, covariates: &[&[f64]], binaries: &[&[f64]]) -> Result<DMatrix<f64>, NuisanceError> {
        if covariates.len() != self.terms.len() {
            return Err(NuisanceError::DimensionMismatch {
                expected: self.terms.len(),
                found: covariates.len(),
            });
        }
        if binaries.len() != self.n_binary {
            return Err(NuisanceError::DimensionMismatch {
                expected: self.n_binary,
                found: binaries.len(),
            });
        }
        let n = covariates
            .first()
            .or(binaries.first())
            .map(|c| c.len())
            .ok_or(NuisanceError::EmptyDesign)?;
        if let Some(bad) = covariates.iter().chain(binaries).find(|c| c.len() != n) {
            return Err(NuisanceError::DimensionMismatch {
                expected: n,
                found: bad.len(),
            });
        }

        let mut x = DMatrix::<f64>::zeros(n, self.width());
        x.column_mut(0).fill(1.0);
        let mut col = 1;
        for b in binaries {
            x.column_mut(col).copy_from_slice(b);
            col += 1;
        }
        for (term, values) in self.terms.iter().zip(covariates) {
            match term {
                CovariateTerms::Linear => {
                    x.column_mut(col).copy_from_slice(values);
                    col += 1;
                }
                CovariateTerms::Powers(d) => {
                    for p in 1..=*d as i32 {
                        for (dst, &v) in x.column_mut(col).iter_mut().zip(values.iter()) {
                            *dst = v.powi(p);
                        }
                        col += 1;
                    }
                }
                CovariateTerms::Spline(knots) => {
                    for p in 1..=3 {
                        for (dst, &v) in x.column_mut(col).iter_mut().zip(values.iter()) {
                            *dst = v.powi(p);
                        }
                        col += 1;
                    }
                    for &k in knots {
                        for (dst, &v) in x.column_mut(col).iter_mut().zip(values.iter()) {
                            let t = (v - k).max(0.0);
                            *dst = t * t * t;
                        }
                        col += 1;
                    }
                }
            }
        }
        if self.spec.include_interactions {
            let raw: Vec<&[f64]> = binaries.iter().chain(covariates).copied().collect();
            for i in 0..raw.len() {
                for j in i + 1..raw.len() {
                    for (r, dst) in x.column_mut(col).iter_mut().enumerate() {
                        *dst = raw[i][r] * raw[j][r];
                    }
                    col += 1;
                }
            }
        }
        debug_assert_eq!(col, self.width());
        Ok(x)
    }
}

/// One-shot expansion of an `n x p` covariate matrix plus binary columns.
pub fn expand_basis(
    covariates: &DMatrix<f64>,
    extra_binary: &[&[f64]],
    spec: BasisSpec,
) -> Result<DMatrix<f64>, NuisanceError> {
    let columns: Vec<Vec<f64>> = covariates.column_iter().map(|c| c.iter().copied().collect()).collect();
    let column_refs: Vec<&[f64]> = columns.iter().map(Vec::as_slice).collect();
    let names: Vec<String> = (1..=columns.len()).map(|j| format!("x{j}")).collect();
    let binary_names: Vec<String> = (1..=extra_binary.len()).map(|j| format!("b{j}")).collect();
    if column_refs.is_empty() && extra_binary.is_empty() {
        // Intercept-only design still needs a row count.
        let mut x = DMatrix::zeros(covariates.nrows(), 1);
        x.fill(1.0);
        return Ok(x);
    }
    BasisExpansion::fit(&column_refs, &names, &binary_names, spec)?.design(&column_refs, extra_binary)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(n: usize) -> Vec<f64> {
        (0..n).map(|i| -2.0 + 4.0 * i as f64 / (n - 1) as f64).collect()
    }

    #[test]
    fn linear_with_one_binary_has_three_columns() {
        let c = DMatrix::from_column_slice(4, 1, &[0.1, 0.5, -0.3, 2.0]);
        let b = [0.0, 1.0, 1.0, 0.0];
        let x = expand_basis(&c, &[&b], BasisSpec::linear()).unwrap();
        assert_eq!(x.ncols(), 3);
        assert_eq!(x.column(1).as_slice(), &b);
        assert_eq!(x[(2, 2)], -0.3);
    }

    #[test]
    fn quadratic_on_two_covariates_has_five_columns() {
        let g = grid(6);
        let mut c = DMatrix::zeros(6, 2);
        c.column_mut(0).copy_from_slice(&g);
        c.column_mut(1)
            .copy_from_slice(&g.iter().map(|v| v * v + 0.1 * v).collect::<Vec<_>>());
        let x = expand_basis(&c, &[], BasisSpec::polynomial(2).unwrap()).unwrap();
        assert_eq!(x.ncols(), 5);
    }

    #[test]
    fn spline_with_three_knots_has_seven_columns() {
        // intercept + (x, x^2, x^3) + three truncated cubics
        let c = DMatrix::from_column_slice(20, 1, &grid(20));
        let x = expand_basis(&c, &[], BasisSpec::spline(3).unwrap()).unwrap();
        assert_eq!(x.ncols(), 7);
    }

    #[test]
    fn spline_knots_sit_at_quartiles() {
        let values = grid(101);
        let knots = quantile_knots(&values, 3);
        assert_eq!(knots.len(), 3);
        for (k, expect) in knots.iter().zip([-1.0, 0.0, 1.0]) {
            assert!((k - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn constant_covariate_rejected_for_splines() {
        let c = DMatrix::from_element(5, 1, 3.0);
        assert_eq!(
            expand_basis(&c, &[], BasisSpec::spline(3).unwrap()).unwrap_err(),
            NuisanceError::DegenerateCovariate("x1".into())
        );
        assert!(expand_basis(&c, &[], BasisSpec::linear()).is_ok());
    }

    #[test]
    fn two_valued_covariate_enters_linearly() {
        let c = DMatrix::from_column_slice(6, 1, &[0.0, 1.0, 1.0, 0.0, 1.0, 0.0]);
        let x = expand_basis(&c, &[], BasisSpec::spline(3).unwrap()).unwrap();
        assert_eq!(x.ncols(), 2);
    }

    #[test]
    fn interactions_are_appended_last() {
        let g = grid(8);
        let c = DMatrix::from_column_slice(8, 1, &g);
        let b = [0.0, 1.0, 0.0, 1.0, 0.0, 1.0, 0.0, 1.0];
        let x = expand_basis(&c, &[&b], BasisSpec::linear().with_interactions(true)).unwrap();
        assert_eq!(x.ncols(), 4);
        for r in 0..8 {
            assert_eq!(x[(r, 3)], b[r] * g[r]);
        }
    }

    #[test]
    fn basis_spec_parsing() {
        assert_eq!("linear".parse::<BasisSpec>().unwrap(), BasisSpec::linear());
        assert_eq!(
            "poly:3".parse::<BasisSpec>().unwrap(),
            BasisSpec::polynomial(3).unwrap()
        );
        assert_eq!("spline:5".parse::<BasisSpec>().unwrap(), BasisSpec::spline(5).unwrap());
        assert!("poly:9".parse::<BasisSpec>().is_err());
        assert!("spline:0".parse::<BasisSpec>().is_err());
        assert!("cubic".parse::<BasisSpec>().is_err());
        assert_eq!(BasisSpec::default().to_string(), "spline:3");
    }
}
