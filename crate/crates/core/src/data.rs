//! Observed data `O = {C, Z, A, M, Y}` with named roles, CSV loading, and
//! the per-model specifications that say which columns an estimator uses.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::path::Path;

use thiserror::Error;

use crate::keyvalue::{self, KeyValueError};
use crate::nuisance::BasisSpec;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DataError {
    #[error("column `{0}` not found")]
    MissingColumn(String),
    #[error("column `{column}`, row {row}: expected 0 or 1, found `{value}`")]
    NonBinaryValue { column: String, row: usize, value: String },
    #[error("column `{column}`, row {row}: missing value")]
    MissingValue { column: String, row: usize },
    #[error("column `{column}`, row {row}: `{value}` is not a finite number")]
    InvalidNumber { column: String, row: usize, value: String },
    #[error("no data rows")]
    EmptyFile,
    #[error("at least 2 rows are required, found {0}")]
    TooFewRows(usize),
    #[error("column `{column}` has {found} rows, expected {expected}")]
    LengthMismatch {
        column: String,
        expected: usize,
        found: usize,
    },
    #[error("column name `{0}` is used for more than one role")]
    DuplicateName(String),
    #[error("front-door model requires a mediator column")]
    SpecRequiresMediator,
    #[error("IV model requires an instrument column")]
    SpecRequiresInstrument,
    #[error("unknown covariate `{0}`")]
    UnknownCovariate(String),
    #[error("IV model is unconditional and takes no adjustment covariates")]
    IvTakesNoCovariates,
    #[error("invalid model spec `{0}`")]
    InvalidModelSpec(String),
    #[error("invalid column mapping: {0}")]
    InvalidMapping(String),
    #[error(transparent)]
    Config(#[from] KeyValueError),
    #[error("csv: {0}")]
    Csv(String),
    #[error("io: {0}")]
    Io(String),
}

impl From<csv::Error> for DataError {
    fn from(e: csv::Error) -> Self {
        DataError::Csv(e.to_string())
    }
}

impl From<std::io::Error> for DataError {
    fn from(e: std::io::Error) -> Self {
        DataError::Io(e.to_string())
    }
}

/// A named column of values.
#[derive(Debug, Clone, PartialEq)]
pub struct Column {
    pub name: String,
    pub values: Vec<f64>,
}

impl Column {
    pub fn new(name: impl Into<String>, values: Vec<f64>) -> Self {
        Self {
            name: name.into(),
            values,
        }
    }
}

/// Immutable, fully observed dataset. Binary roles (treatment, instrument,
/// mediator) are stored as `0.0` / `1.0`.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationTable {
    n_rows: usize,
    outcome: Column,
    treatment: Column,
    instrument: Option<Column>,
    mediator: Option<Column>,
    covariates: Vec<Column>,
}

impl ObservationTable {
    /// Builds a validated table. Every column must have the same length
    /// (at least 2), binary roles must hold only 0/1, and every value must
    /// be finite.
    pub fn new(
        outcome: Column,
        treatment: Column,
        instrument: Option<Column>,
        mediator: Option<Column>,
        covariates: Vec<Column>,
    ) -> Result<Self, DataError> {
        let n_rows = outcome.values.len();
        if n_rows == 0 {
            return Err(DataError::EmptyFile);
        }
        if n_rows < 2 {
            return Err(DataError::TooFewRows(n_rows));
        }

        let mut seen = HashSet::new();
        let all = std::iter::once(&outcome)
            .chain(std::iter::once(&treatment))
            .chain(instrument.iter())
            .chain(mediator.iter())
            .chain(covariates.iter());
        for col in all {
            if !seen.insert(col.name.as_str()) {
                return Err(DataError::DuplicateName(col.name.clone()));
            }
            if col.values.len() != n_rows {
                return Err(DataError::LengthMismatch {
                    column: col.name.clone(),
                    expected: n_rows,
                    found: col.values.len(),
                });
            }
            if let Some(row) = col.values.iter().position(|v| !v.is_finite()) {
                return Err(DataError::InvalidNumber {
                    column: col.name.clone(),
                    row: row + 1,
                    value: col.values[row].to_string(),
                });
            }
        }
        for col in std::iter::once(&treatment)
            .chain(instrument.iter())
            .chain(mediator.iter())
        {
            if let Some(row) = col.values.iter().position(|&v| v != 0.0 && v != 1.0) {
                return Err(DataError::NonBinaryValue {
                    column: col.name.clone(),
                    row: row + 1,
                    value: col.values[row].to_string(),
                });
            }
        }

        Ok(Self {
            n_rows,
            outcome,
            treatment,
            instrument,
            mediator,
            covariates,
        })
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn outcome(&self) -> &[f64] {
        &self.outcome.values
    }

    pub fn treatment(&self) -> &[f64] {
        &self.treatment.values
    }

    pub fn instrument(&self) -> Option<&[f64]> {
        self.instrument.as_ref().map(|c| c.values.as_slice())
    }

    pub fn mediator(&self) -> Option<&[f64]> {
        self.mediator.as_ref().map(|c| c.values.as_slice())
    }

    pub fn outcome_name(&self) -> &str {
        &self.outcome.name
    }

    pub fn treatment_name(&self) -> &str {
        &self.treatment.name
    }

    pub fn instrument_name(&self) -> Option<&str> {
        self.instrument.as_ref().map(|c| c.name.as_str())
    }

    pub fn mediator_name(&self) -> Option<&str> {
        self.mediator.as_ref().map(|c| c.name.as_str())
    }

    pub fn n_covariates(&self) -> usize {
        self.covariates.len()
    }

    pub fn covariate_names(&self) -> Vec<&str> {
        self.covariates.iter().map(|c| c.name.as_str()).collect()
    }

    pub fn covariate(&self, name: &str) -> Option<&[f64]> {
        self.covariates
            .iter()
            .find(|c| c.name == name)
            .map(|c| c.values.as_slice())
    }

    /// Resolves an adjustment-set entry. Besides covariates, the instrument
    /// column may be named, for designs that adjust for the instrument in a
    /// backdoor model.
    pub fn adjustment_column(&self, name: &str) -> Option<&[f64]> {
        self.covariate(name).or_else(|| {
            self.instrument
                .as_ref()
                .filter(|c| c.name == name)
                .map(|c| c.values.as_slice())
        })
    }

    /// Resolves a list of adjustment names to their columns, in order.
    pub fn adjustment_columns(&self, names: &[String]) -> Result<Vec<&[f64]>, DataError> {
        names
            .iter()
            .map(|n| {
                self.adjustment_column(n)
                    .ok_or_else(|| DataError::UnknownCovariate(n.clone()))
            })
            .collect()
    }

    /// Returns a copy with the outcome column replaced.
    pub fn with_outcome(&self, values: Vec<f64>) -> Result<Self, DataError> {
        Self::new(
            Column::new(self.outcome.name.clone(), values),
            self.treatment.clone(),
            self.instrument.clone(),
            self.mediator.clone(),
            self.covariates.clone(),
        )
    }

    /// Returns a copy whose row `i` is row `order[i]` of `self`.
    pub fn permuted(&self, order: &[usize]) -> Result<Self, DataError> {
        let pick = |c: &Column| Column::new(c.name.clone(), order.iter().map(|&i| c.values[i]).collect());
        Self::new(
            pick(&self.outcome),
            pick(&self.treatment),
            self.instrument.as_ref().map(pick),
            self.mediator.as_ref().map(pick),
            self.covariates.iter().map(pick).collect(),
        )
    }

    /// The mapping that reloads this table from its own CSV serialization.
    pub fn column_mapping(&self) -> ColumnMapping {
        ColumnMapping {
            outcome: self.outcome.name.clone(),
            treatment: self.treatment.name.clone(),
            instrument: self.instrument_name().map(str::to_string),
            mediator: self.mediator_name().map(str::to_string),
            covariates: self.covariates.iter().map(|c| c.name.clone()).collect(),
        }
    }

    fn columns_in_file_order(&self) -> Vec<&Column> {
        self.covariates
            .iter()
            .chain(self.instrument.iter())
            .chain(std::iter::once(&self.treatment))
            .chain(self.mediator.iter())
            .chain(std::iter::once(&self.outcome))
            .collect()
    }

    /// Writes covariates, instrument, treatment, mediator, outcome (in that
    /// order). Values use the shortest representation that parses back to
    /// the same `f64`, so [`load_csv`] reproduces the table exactly.
    pub fn write_csv<W: std::io::Write>(&self, writer: W) -> Result<(), DataError> {
        let cols = self.columns_in_file_order();
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(cols.iter().map(|c| c.name.as_str()))?;
        let mut record = Vec::with_capacity(cols.len());
        for i in 0..self.n_rows {
            record.clear();
            record.extend(cols.iter().map(|c| format_value(c.values[i])));
            w.write_record(&record)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<(), DataError> {
        let file = std::fs::File::create(path)?;
        self.write_csv(std::io::BufWriter::new(file))
    }
}

fn format_value(v: f64) -> String {
    // `{}` on f64 is the shortest round-tripping decimal.
    format!("{v}")
}

/// Which file columns play which role.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ColumnMapping {
    pub outcome: String,
    pub treatment: String,
    pub instrument: Option<String>,
    pub mediator: Option<String>,
    pub covariates: Vec<String>,
}

impl ColumnMapping {
    pub const KEYS: [&'static str; 5] = ["outcome", "treatment", "instrument", "mediator", "covariates"];

    pub fn new(outcome: impl Into<String>, treatment: impl Into<String>) -> Self {
        Self {
            outcome: outcome.into(),
            treatment: treatment.into(),
            ..Self::default()
        }
    }

    pub fn with_instrument(mut self, name: impl Into<String>) -> Self {
        self.instrument = Some(name.into());
        self
    }

    pub fn with_mediator(mut self, name: impl Into<String>) -> Self {
        self.mediator = Some(name.into());
        self
    }

    pub fn with_covariates<I, S>(mut self, names: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        self.covariates = names.into_iter().map(Into::into).collect();
        self
    }

    /// Builds a mapping from `key=value` pairs (`outcome`, `treatment`,
    /// `instrument`, `mediator`, `covariates` as a comma-separated list).
    /// Keys outside that set are ignored so that one file can also carry
    /// other settings.
    pub fn from_key_values(pairs: &BTreeMap<String, String>) -> Result<Self, DataError> {
        let get = |k: &str| pairs.get(k).map(|v| v.trim().to_string()).filter(|v| !v.is_empty());
        let outcome = get("outcome").ok_or_else(|| DataError::InvalidMapping("`outcome` is required".into()))?;
        let treatment = get("treatment").ok_or_else(|| DataError::InvalidMapping("`treatment` is required".into()))?;
        let mapping = Self {
            outcome,
            treatment,
            instrument: get("instrument"),
            mediator: get("mediator"),
            covariates: get("covariates").map(|v| keyvalue::split_list(&v)).unwrap_or_default(),
        };
        mapping.check_distinct()?;
        Ok(mapping)
    }

    pub fn from_config_str(text: &str) -> Result<Self, DataError> {
        Self::from_key_values(&keyvalue::parse_key_values(text)?)
    }

    fn names(&self) -> impl Iterator<Item = &String> {
        std::iter::once(&self.outcome)
            .chain(std::iter::once(&self.treatment))
            .chain(self.instrument.iter())
            .chain(self.mediator.iter())
            .chain(self.covariates.iter())
    }

    pub fn check_distinct(&self) -> Result<(), DataError> {
        let mut seen = HashSet::new();
        for name in self.names() {
            if !seen.insert(name.as_str()) {
                return Err(DataError::DuplicateName(name.clone()));
            }
        }
        Ok(())
    }
}

fn is_missing(field: &str) -> bool {
    field.is_empty() || field.eq_ignore_ascii_case("na") || field.eq_ignore_ascii_case("nan")
}

fn parse_field(column: &str, row: usize, field: &str) -> Result<f64, DataError> {
    let field = field.trim();
    if is_missing(field) {
        return Err(DataError::MissingValue {
            column: column.to_string(),
            row,
        });
    }
    match field.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(DataError::InvalidNumber {
            column: column.to_string(),
            row,
            value: field.to_string(),
        }),
    }
}

fn parse_binary(column: &str, row: usize, field: &str) -> Result<f64, DataError> {
    let v = parse_field(column, row, field)?;
    if v == 0.0 || v == 1.0 {
        Ok(v)
    } else {
        Err(DataError::NonBinaryValue {
            column: column.to_string(),
            row,
            value: field.trim().to_string(),
        })
    }
}

/// Reads a CSV with a header row and returns the validated table for
/// `mapping`. Rows are numbered from 1, not counting the header.
pub fn load_csv(path: impl AsRef<Path>, mapping: &ColumnMapping) -> Result<ObservationTable, DataError> {
    let file = std::fs::File::open(path)?;
    read_csv(std::io::BufReader::new(file), mapping)
}

pub fn read_csv<R: std::io::Read>(reader: R, mapping: &ColumnMapping) -> Result<ObservationTable, DataError> {
    mapping.check_distinct()?;
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let headers = rdr.headers()?.clone();
    if headers.is_empty() {
        return Err(DataError::EmptyFile);
    }
    let index_of = |name: &str| {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| DataError::MissingColumn(name.to_string()))
    };

    let outcome_idx = index_of(&mapping.outcome)?;
    let treatment_idx = index_of(&mapping.treatment)?;
    let instrument_idx = mapping.instrument.as_deref().map(index_of).transpose()?;
    let mediator_idx = mapping.mediator.as_deref().map(index_of).transpose()?;
    let covariate_idx: Vec<usize> = mapping
        .covariates
        .iter()
        .map(|c| index_of(c))
        .collect::<Result<_, _>>()?;

    let mut outcome = Vec::new();
    let mut treatment = Vec::new();
    let mut instrument = Vec::new();
    let mut mediator = Vec::new();
    let mut covariates = vec![Vec::new(); covariate_idx.len()];

    for (i, record) in rdr.records().enumerate() {
        let record = record?;
        let row = i + 1;
        let field = |idx: usize| record.get(idx).unwrap_or("");
        outcome.push(parse_field(&mapping.outcome, row, field(outcome_idx))?);
        treatment.push(parse_binary(&mapping.treatment, row, field(treatment_idx))?);
        if let (Some(idx), Some(name)) = (instrument_idx, mapping.instrument.as_deref()) {
            instrument.push(parse_binary(name, row, field(idx))?);
        }
        if let (Some(idx), Some(name)) = (mediator_idx, mapping.mediator.as_deref()) {
            mediator.push(parse_binary(name, row, field(idx))?);
        }
        for ((col, &idx), name) in covariates.iter_mut().zip(&covariate_idx).zip(&mapping.covariates) {
            col.push(parse_field(name, row, field(idx))?);
        }
    }
    if outcome.is_empty() {
        return Err(DataError::EmptyFile);
    }

    ObservationTable::new(
        Column::new(mapping.outcome.clone(), outcome),
        Column::new(mapping.treatment.clone(), treatment),
        mapping.instrument.clone().map(|n| Column::new(n, instrument)),
        mapping.mediator.clone().map(|n| Column::new(n, mediator)),
        mapping
            .covariates
            .iter()
            .cloned()
            .zip(covariates)
            .map(|(n, v)| Column::new(n, v))
            .collect(),
    )
}

/// The three identification strategies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ModelKind {
    Backdoor,
    FrontDoor,
    Iv,
}

impl ModelKind {
    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Backdoor => "backdoor",
            ModelKind::FrontDoor => "frontdoor",
            ModelKind::Iv => "iv",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for ModelKind {
    type Err = DataError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "backdoor" => Ok(ModelKind::Backdoor),
            "frontdoor" | "front-door" => Ok(ModelKind::FrontDoor),
            "iv" => Ok(ModelKind::Iv),
            other => Err(DataError::InvalidModelSpec(other.to_string())),
        }
    }
}

/// One candidate causal model: its identification strategy, adjustment set,
/// and the basis used for its nuisance regressions.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpec {
    pub kind: ModelKind,
    pub adjustment: Vec<String>,
    pub basis: BasisSpec,
}

impl ModelSpec {
    pub fn backdoor<I, S>(adjustment: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self {
            kind: ModelKind::Backdoor,
            adjustment: adjustment.into_iter().map(Into::into).collect(),
            basis: BasisSpec::default(),
        }
    }

    pub fn frontdoor<I, S>(adjustment: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self {
            kind: ModelKind::FrontDoor,
            adjustment: adjustment.into_iter().map(Into::into).collect(),
            basis: BasisSpec::default(),
        }
    }

    pub fn iv() -> Self {
        Self {
            kind: ModelKind::Iv,
            adjustment: Vec::new(),
            basis: BasisSpec::default(),
        }
    }

    pub fn with_basis(mut self, basis: BasisSpec) -> Self {
        self.basis = basis;
        self
    }

    /// Report label, e.g. `backdoor[c1,c3]`, `frontdoor[c1]`, or `iv`.
    /// Backdoor models with different adjustment sets get distinct labels.
    pub fn label(&self) -> String {
        match self.kind {
            ModelKind::Iv => "iv".to_string(),
            kind => format!("{kind}[{}]", self.adjustment.join(",")),
        }
    }

    /// Parses the `kind[:key=value]...` mini-syntax:
    /// `backdoor:adj=c1,c2:basis=spline:3`, `frontdoor:adj=c1`, `iv`.
    /// Without `adj=`, backdoor and front-door models adjust for
    /// `default_adjustment`.
    pub fn parse(text: &str, default_adjustment: &[String]) -> Result<Self, DataError> {
        let invalid = || DataError::InvalidModelSpec(text.to_string());
        let mut parts = text.split(':');
        let kind: ModelKind = parts.next().ok_or_else(invalid)?.parse().map_err(|_| invalid())?;

        // Re-join values that themselves contain ':' (e.g. `basis=spline:3`).
        let mut options: Vec<(String, String)> = Vec::new();
        for part in parts {
            match part.split_once('=') {
                Some((k, v)) => options.push((k.trim().to_string(), v.trim().to_string())),
                None => match options.last_mut() {
                    Some((_, v)) => {
                        v.push(':');
                        v.push_str(part.trim());
                    }
                    None => return Err(invalid()),
                },
            }
        }

        let mut spec = Self {
            kind,
            adjustment: if kind == ModelKind::Iv {
                Vec::new()
            } else {
                default_adjustment.to_vec()
            },
            basis: BasisSpec::default(),
        };
        for (key, value) in options {
            match key.as_str() {
                "adj" => spec.adjustment = keyvalue::split_list(&value),
                "basis" => {
                    let include_interactions = spec.basis.include_interactions;
                    spec.basis = value.parse().map_err(|_| invalid())?;
                    spec.basis.include_interactions = include_interactions;
                }
                "interactions" => {
                    spec.basis.include_interactions = match value.as_str() {
                        "true" => true,
                        "false" => false,
                        _ => return Err(invalid()),
                    }
                }
                _ => return Err(invalid()),
            }
        }
        Ok(spec)
    }
}

/// Checks that `table` carries every column the model needs. Pure.
pub fn validate_spec(table: &ObservationTable, spec: &ModelSpec) -> Result<(), DataError> {
    match spec.kind {
        ModelKind::FrontDoor if table.mediator().is_none() => return Err(DataError::SpecRequiresMediator),
        ModelKind::Iv if table.instrument().is_none() => return Err(DataError::SpecRequiresInstrument),
        ModelKind::Iv if !spec.adjustment.is_empty() => return Err(DataError::IvTakesNoCovariates),
        _ => {}
    }
    for name in &spec.adjustment {
        if table.adjustment_column(name).is_none() {
            return Err(DataError::UnknownCovariate(name.clone()));
        }
    }
    Ok(())
}
