//! Datasets, encoding configuration and design-matrix assembly.
//!
//! A [`Dataset`] holds the count response and raw predictor columns as read
//! from CSV. [`encode`] turns it into a [`DesignMatrix`] with a leading
//! intercept, one column per numeric or binary predictor and `L − 1` dummy
//! columns per categorical predictor (the declared base level is omitted).

use std::collections::BTreeMap;
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const INTERCEPT: &str = "(Intercept)";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ColumnKind {
    Numeric,
    Categorical,
    /// A 0/1 indicator kept as a single column.
    Binary,
}

/// Transform applied to a numeric value at encode time.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Transform {
    #[default]
    None,
    /// Natural logarithm; values must be strictly positive.
    Log,
    /// `value − origin`, e.g. publication year stored as years since 2014.
    SubtractOrigin(f64),
}

impl Transform {
    fn apply(self, value: f64) -> Option<f64> {
        match self {
            Transform::None => Some(value),
            Transform::Log => (value > 0.0).then(|| value.ln()),
            Transform::SubtractOrigin(origin) => Some(value - origin),
        }
    }

    fn label(self, name: &str) -> String {
        match self {
            Transform::Log => format!("log({name})"),
            Transform::None | Transform::SubtractOrigin(_) => name.to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictorSpec {
    pub name: String,
    pub kind: ColumnKind,
    #[serde(default)]
    pub transform: Transform,
    /// Level order for a categorical; first-appearance order when omitted.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub levels: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub base: Option<String>,
}

impl PredictorSpec {
    pub fn numeric(name: &str) -> Self {
        Self {
            name: name.to_string(),
            kind: ColumnKind::Numeric,
            transform: Transform::None,
            levels: None,
            base: None,
        }
    }

    pub fn binary(name: &str) -> Self {
        Self {
            kind: ColumnKind::Binary,
            ..Self::numeric(name)
        }
    }

    pub fn categorical(name: &str, levels: &[&str], base: &str) -> Self {
        Self {
            kind: ColumnKind::Categorical,
            levels: Some(levels.iter().map(|s| s.to_string()).collect()),
            base: Some(base.to_string()),
            ..Self::numeric(name)
        }
    }

    pub fn with_transform(mut self, transform: Transform) -> Self {
        self.transform = transform;
        self
    }
}

/// Declarative description of how a CSV maps onto a model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncodingConfig {
    pub response: String,
    pub predictors: Vec<PredictorSpec>,
    /// Predictors entering the hurdle equation; all predictors when omitted.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hurdle: Option<Vec<String>>,
}

impl EncodingConfig {
    pub fn from_json_file(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn predictor(&self, name: &str) -> Option<&PredictorSpec> {
        self.predictors.iter().find(|p| p.name == name)
    }

    pub fn mean_predictors(&self) -> Vec<String> {
        self.predictors.iter().map(|p| p.name.clone()).collect()
    }

    pub fn hurdle_predictors(&self) -> Vec<String> {
        self.hurdle.clone().unwrap_or_else(|| self.mean_predictors())
    }

    pub fn validate(&self) -> Result<()> {
        let mut seen = BTreeMap::new();
        for p in &self.predictors {
            if seen.insert(p.name.as_str(), ()).is_some() {
                return Err(Error::Config(format!("predictor \"{}\" declared twice", p.name)));
            }
            if p.name == self.response {
                return Err(Error::Config(format!(
                    "response \"{}\" cannot also be a predictor",
                    p.name
                )));
            }
            if p.kind == ColumnKind::Categorical {
                if p.base.is_none() {
                    return Err(Error::Config(format!(
                        "categorical \"{}\" needs a base level",
                        p.name
                    )));
                }
                if p.transform != Transform::None {
                    return Err(Error::Config(format!(
                        "categorical \"{}\" cannot be transformed",
                        p.name
                    )));
                }
            }
        }
        for h in self.hurdle_predictors() {
            if self.predictor(&h).is_none() {
                return Err(Error::Config(format!(
                    "hurdle predictor \"{h}\" is not a declared predictor"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ColumnValues {
    Numeric(Vec<f64>),
    Categorical(Vec<String>),
}

impl ColumnValues {
    pub fn len(&self) -> usize {
        match self {
            ColumnValues::Numeric(v) => v.len(),
            ColumnValues::Categorical(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn cell(&self, i: usize) -> String {
        match self {
            ColumnValues::Numeric(v) => v[i].to_string(),
            ColumnValues::Categorical(v) => v[i].clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Column {
    pub name: String,
    pub values: ColumnValues,
}

/// Count response plus raw predictor columns, all of length `n`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    response: String,
    y: Vec<u64>,
    columns: Vec<Column>,
}

impl Dataset {
    pub fn new(response: impl Into<String>, y: Vec<u64>, columns: Vec<Column>) -> Result<Self> {
        let n = y.len();
        if n == 0 {
            return Err(Error::Data("dataset has no rows".into()));
        }
        for c in &columns {
            if c.values.len() != n {
                return Err(Error::Dimension(format!(
                    "column \"{}\" has {} values, response has {n}",
                    c.name,
                    c.values.len()
                )));
            }
        }
        Ok(Self {
            response: response.into(),
            y,
            columns,
        })
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn response_name(&self) -> &str {
        &self.response
    }

    pub fn y(&self) -> &[u64] {
        &self.y
    }

    pub fn columns(&self) -> &[Column] {
        &self.columns
    }

    pub fn column(&self, name: &str) -> Option<&Column> {
        self.columns.iter().find(|c| c.name == name)
    }

    /// Writes the dataset as an RFC 4180 CSV with the response first.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        self.write_to(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        self.write_to(&mut w)?;
        let bytes = w
            .into_inner()
            .map_err(|e| Error::Io(std::io::Error::other(e.to_string())))?;
        Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
    }

    fn write_to<W: std::io::Write>(&self, w: &mut csv::Writer<W>) -> Result<()> {
        let mut header = vec![self.response.clone()];
        header.extend(self.columns.iter().map(|c| c.name.clone()));
        w.write_record(&header)?;
        for i in 0..self.n() {
            let mut record = vec![self.y[i].to_string()];
            record.extend(self.columns.iter().map(|c| c.values.cell(i)));
            w.write_record(&record)?;
        }
        Ok(())
    }
}

/// Reads a header-bearing CSV file into a typed [`Dataset`].
///
/// Row numbers in errors count data records from 1 (the header is not counted).
pub fn read_csv(path: impl AsRef<Path>, schema: &EncodingConfig) -> Result<Dataset> {
    let path = path.as_ref();
    let file = std::fs::File::open(path)?;
    read_csv_from(file, schema)
}

pub fn read_csv_from<R: std::io::Read>(reader: R, schema: &EncodingConfig) -> Result<Dataset> {
    schema.validate()?;
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let headers = rdr.headers()?.clone();
    if headers.is_empty() {
        return Err(Error::Data("empty file".into()));
    }
    let index_of = |name: &str| -> Result<usize> {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| Error::Config(format!("missing column \"{name}\"")))
    };
    let response_idx = index_of(&schema.response)?;
    let predictor_idx = schema
        .predictors
        .iter()
        .map(|p| index_of(&p.name))
        .collect::<Result<Vec<_>>>()?;

    let mut y = Vec::new();
    let mut raw: Vec<Vec<String>> = vec![Vec::new(); schema.predictors.len()];
    for (i, record) in rdr.records().enumerate() {
        let row = i + 1;
        let record = record?;
        let cell = |idx: usize, column: &str| -> Result<String> {
            let value = record.get(idx).unwrap_or("").trim();
            if value.is_empty() {
                Err(Error::Cell {
                    row,
                    column: column.to_string(),
                    message: "empty cell".into(),
                })
            } else {
                Ok(value.to_string())
            }
        };
        let text = cell(response_idx, &schema.response)?;
        y.push(parse_count(&text).ok_or_else(|| Error::Cell {
            row,
            column: schema.response.clone(),
            message: format!("\"{text}\" is not a nonnegative integer count"),
        })?);
        for (j, p) in schema.predictors.iter().enumerate() {
            raw[j].push(cell(predictor_idx[j], &p.name)?);
        }
    }
    if y.is_empty() {
        return Err(Error::Data("file has a header but no data rows".into()));
    }

    let columns = schema
        .predictors
        .iter()
        .zip(raw)
        .map(|(p, cells)| {
            let values = match p.kind {
                ColumnKind::Categorical => ColumnValues::Categorical(cells),
                ColumnKind::Numeric | ColumnKind::Binary => {
                    let mut out = Vec::with_capacity(cells.len());
                    for (i, text) in cells.iter().enumerate() {
                        let v: f64 = text.parse().ok().filter(|v: &f64| v.is_finite()).ok_or_else(
                            || Error::Cell {
                                row: i + 1,
                                column: p.name.clone(),
                                message: format!("\"{text}\" is not a number"),
                            },
                        )?;
                        out.push(v);
                    }
                    ColumnValues::Numeric(out)
                }
            };
            Ok(Column {
                name: p.name.clone(),
                values,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Dataset::new(schema.response.clone(), y, columns)
}

fn parse_count(text: &str) -> Option<u64> {
    if let Ok(v) = text.parse::<u64>() {
        return Some(v);
    }
    let v: f64 = text.parse().ok()?;
    (v.is_finite() && v >= 0.0 && v.fract() == 0.0 && v < 9.0e15).then_some(v as u64)
}

/// Model matrix with labelled columns; column 0 is the intercept.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrix {
    x: DMatrix<f64>,
    labels: Vec<String>,
    /// `(variable, base level)` for every categorical that was encoded.
    base_levels: Vec<(String, String)>,
}

impl DesignMatrix {
    /// Builds a design from a matrix whose first column must be all ones.
    pub fn new(x: DMatrix<f64>, labels: Vec<String>) -> Result<Self> {
        if labels.len() != x.ncols() {
            return Err(Error::Dimension(format!(
                "{} labels for {} columns",
                labels.len(),
                x.ncols()
            )));
        }
        if x.ncols() == 0 || labels[0] != INTERCEPT || x.column(0).iter().any(|&v| v != 1.0) {
            return Err(Error::Config("first column must be the intercept".into()));
        }
        if labels.iter().filter(|l| *l == INTERCEPT).count() != 1 {
            return Err(Error::Config("intercept must appear exactly once".into()));
        }
        Ok(Self {
            x,
            labels,
            base_levels: Vec::new(),
        })
    }

    /// Intercept-only design with `n` rows.
    pub fn intercept_only(n: usize) -> Self {
        Self {
            x: DMatrix::from_element(n, 1, 1.0),
            labels: vec![INTERCEPT.to_string()],
            base_levels: Vec::new(),
        }
    }

    /// Intercept plus the given covariate columns (each of length `n`).
    pub fn from_columns(n: usize, covariates: &[(&str, Vec<f64>)]) -> Result<Self> {
        let mut x = DMatrix::from_element(n, covariates.len() + 1, 1.0);
        let mut labels = vec![INTERCEPT.to_string()];
        for (j, (name, values)) in covariates.iter().enumerate() {
            if values.len() != n {
                return Err(Error::Dimension(format!(
                    "covariate \"{name}\" has {} rows, expected {n}",
                    values.len()
                )));
            }
            x.column_mut(j + 1).copy_from_slice(values);
            labels.push(name.to_string());
        }
        Self::new(x, labels)
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.x
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn base_levels(&self) -> &[(String, String)] {
        &self.base_levels
    }

    pub fn nrows(&self) -> usize {
        self.x.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.x.ncols()
    }

    pub fn column_index(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        self.x.row(i).iter().copied().collect()
    }

    /// Keeps the intercept and the listed columns (in the design's own order).
    pub fn select(&self, keep: &[String]) -> Result<Self> {
        for k in keep {
            if self.column_index(k).is_none() {
                return Err(Error::UnknownName(k.clone()));
            }
        }
        let idx: Vec<usize> = (0..self.ncols())
            .filter(|&j| j == 0 || keep.contains(&self.labels[j]))
            .collect();
        let x = self.x.select_columns(idx.iter());
        let labels = idx.iter().map(|&j| self.labels[j].clone()).collect();
        Ok(Self {
            x,
            labels,
            base_levels: self.base_levels.clone(),
        })
    }

    /// Keeps the listed rows.
    pub fn select_rows(&self, rows: &[usize]) -> Self {
        Self {
            x: self.x.select_rows(rows.iter()),
            labels: self.labels.clone(),
            base_levels: self.base_levels.clone(),
        }
    }
}

/// Encodes the mean-equation predictors of `cfg`.
pub fn encode(ds: &Dataset, cfg: &EncodingConfig) -> Result<DesignMatrix> {
    encode_predictors(ds, cfg, &cfg.mean_predictors())
}

/// Encodes the hurdle-equation predictors of `cfg`.
pub fn encode_hurdle(ds: &Dataset, cfg: &EncodingConfig) -> Result<DesignMatrix> {
    encode_predictors(ds, cfg, &cfg.hurdle_predictors())
}

/// Encodes the named predictors in declaration order.
pub fn encode_predictors(
    ds: &Dataset,
    cfg: &EncodingConfig,
    names: &[String],
) -> Result<DesignMatrix> {
    cfg.validate()?;
    let n = ds.n();
    let mut columns: Vec<Vec<f64>> = Vec::new();
    let mut labels = vec![INTERCEPT.to_string()];
    let mut base_levels = Vec::new();

    for spec in cfg.predictors.iter().filter(|p| names.contains(&p.name)) {
        let column = ds
            .column(&spec.name)
            .ok_or_else(|| Error::Config(format!("missing column \"{}\"", spec.name)))?;
        match (spec.kind, &column.values) {
            (ColumnKind::Numeric, ColumnValues::Numeric(values)) => {
                let mut out = Vec::with_capacity(n);
                for (i, &v) in values.iter().enumerate() {
                    out.push(spec.transform.apply(v).ok_or_else(|| Error::Cell {
                        row: i + 1,
                        column: spec.name.clone(),
                        message: format!("log transform needs a positive value, got {v}"),
                    })?);
                }
                columns.push(out);
                labels.push(spec.transform.label(&spec.name));
            }
            (ColumnKind::Binary, ColumnValues::Numeric(values)) => {
                if let Some(i) = values.iter().position(|&v| v != 0.0 && v != 1.0) {
                    return Err(Error::Cell {
                        row: i + 1,
                        column: spec.name.clone(),
                        message: format!("binary column holds {}", values[i]),
                    });
                }
                columns.push(values.clone());
                labels.push(spec.name.clone());
            }
            (ColumnKind::Categorical, ColumnValues::Categorical(values)) => {
                let base = spec.base.as_deref().expect("validated");
                let levels = match &spec.levels {
                    Some(levels) => levels.clone(),
                    None => first_appearance_order(values),
                };
                if !levels.iter().any(|l| l == base) {
                    return Err(Error::Config(format!(
                        "base level \"{base}\" of \"{}\" is not a declared level",
                        spec.name
                    )));
                }
                if !values.iter().any(|v| v == base) {
                    return Err(Error::Config(format!(
                        "base level \"{base}\" of \"{}\" does not occur in the data",
                        spec.name
                    )));
                }
                if let Some(i) = values.iter().position(|v| !levels.contains(v)) {
                    return Err(Error::Cell {
                        row: i + 1,
                        column: spec.name.clone(),
                        message: format!("undeclared level \"{}\"", values[i]),
                    });
                }
                for level in levels.iter().filter(|l| *l != base) {
                    columns.push(
                        values
                            .iter()
                            .map(|v| if v == level { 1.0 } else { 0.0 })
                            .collect(),
                    );
                    labels.push(format!("{}={}", spec.name, level));
                }
                base_levels.push((spec.name.clone(), base.to_string()));
            }
            (kind, _) => {
                return Err(Error::Config(format!(
                    "column \"{}\" does not hold {kind:?} data",
                    spec.name
                )))
            }
        }
    }

    let mut x = DMatrix::from_element(n, columns.len() + 1, 1.0);
    for (j, c) in columns.iter().enumerate() {
        x.column_mut(j + 1).copy_from_slice(c);
    }
    Ok(DesignMatrix {
        x,
        labels,
        base_levels,
    })
}

fn first_appearance_order(values: &[String]) -> Vec<String> {
    let mut levels: Vec<String> = Vec::new();
    for v in values {
        if !levels.contains(v) {
            levels.push(v.clone());
        }
    }
    levels
}

#[cfg(test)]
mod tests {
    use super::*;

    fn access_config() -> EncodingConfig {
        EncodingConfig {
            response: "cites".into(),
            predictors: vec![PredictorSpec::categorical(
                "access",
                &["Closed", "Green", "Bronze", "Gold", "Hybrid"],
                "Closed",
            )],
            hurdle: None,
        }
    }

    fn access_dataset(levels: &[&str]) -> Dataset {
        Dataset::new(
            "cites",
            vec![1; levels.len()],
            vec![Column {
                name: "access".into(),
                values: ColumnValues::Categorical(levels.iter().map(|s| s.to_string()).collect()),
            }],
        )
        .unwrap()
    }

    #[test]
    fn dummy_block_omits_base_level() {
        let ds = access_dataset(&["Closed", "Green", "Gold"]);
        let dm = encode(&ds, &access_config()).unwrap();
        assert_eq!(
            dm.labels(),
            ["(Intercept)", "access=Green", "access=Bronze", "access=Gold", "access=Hybrid"]
        );
        let block: Vec<Vec<f64>> = (0..3).map(|i| dm.row(i)[1..].to_vec()).collect();
        assert_eq!(
            block,
            vec![
                vec![0.0, 0.0, 0.0, 0.0],
                vec![1.0, 0.0, 0.0, 0.0],
                vec![0.0, 0.0, 1.0, 0.0]
            ]
        );
        assert_eq!(dm.base_levels(), [("access".to_string(), "Closed".to_string())]);
    }

    #[test]
    fn year_offset_and_log_transforms() {
        let years: Vec<f64> = (2014..=2021).map(f64::from).collect();
        let ds = Dataset::new(
            "cites",
            vec![0; 8],
            vec![
                Column {
                    name: "year".into(),
                    values: ColumnValues::Numeric(years),
                },
                Column {
                    name: "founded".into(),
                    values: ColumnValues::Numeric(vec![1985.0; 8]),
                },
            ],
        )
        .unwrap();
        let cfg = EncodingConfig {
            response: "cites".into(),
            predictors: vec![
                PredictorSpec::numeric("year").with_transform(Transform::SubtractOrigin(2014.0)),
                PredictorSpec::numeric("founded").with_transform(Transform::Log),
            ],
            hurdle: None,
        };
        let dm = encode(&ds, &cfg).unwrap();
        assert_eq!(dm.labels(), ["(Intercept)", "year", "log(founded)"]);
        let ages: Vec<f64> = dm.matrix().column(1).iter().copied().collect();
        assert_eq!(ages, (0..8).map(f64::from).collect::<Vec<_>>());
        assert!((dm.matrix()[(0, 2)] - 7.5934).abs() < 1e-4);
    }

    #[test]
    fn log_of_nonpositive_reports_row() {
        let ds = Dataset::new(
            "cites",
            vec![0; 3],
            vec![Column {
                name: "founded".into(),
                values: ColumnValues::Numeric(vec![1990.0, 0.0, 2000.0]),
            }],
        )
        .unwrap();
        let cfg = EncodingConfig {
            response: "cites".into(),
            predictors: vec![PredictorSpec::numeric("founded").with_transform(Transform::Log)],
            hurdle: None,
        };
        match encode(&ds, &cfg) {
            Err(Error::Cell { row, column, .. }) => {
                assert_eq!(row, 2);
                assert_eq!(column, "founded");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn base_level_must_be_declared_and_present() {
        let ds = access_dataset(&["Green", "Gold"]);
        assert!(matches!(encode(&ds, &access_config()), Err(Error::Config(_))));
        let mut cfg = access_config();
        cfg.predictors[0].base = Some("Platinum".into());
        let ds = access_dataset(&["Closed", "Gold"]);
        assert!(matches!(encode(&ds, &cfg), Err(Error::Config(_))));
    }

    #[test]
    fn undeclared_level_is_rejected() {
        let ds = access_dataset(&["Closed", "Diamond"]);
        assert!(matches!(encode(&ds, &access_config()), Err(Error::Cell { row: 2, .. })));
    }

    #[test]
    fn column_count_formula() {
        let ds = Dataset::new(
            "y",
            vec![0, 1, 2, 3],
            vec![
                Column {
                    name: "a".into(),
                    values: ColumnValues::Numeric(vec![0.1, 0.2, 0.3, 0.4]),
                },
                Column {
                    name: "g".into(),
                    values: ColumnValues::Categorical(
                        ["u", "v", "w", "u"].iter().map(|s| s.to_string()).collect(),
                    ),
                },
                Column {
                    name: "f".into(),
                    values: ColumnValues::Numeric(vec![0.0, 1.0, 1.0, 0.0]),
                },
            ],
        )
        .unwrap();
        let cfg = EncodingConfig {
            response: "y".into(),
            predictors: vec![
                PredictorSpec::numeric("a"),
                PredictorSpec {
                    kind: ColumnKind::Categorical,
                    base: Some("u".into()),
                    ..PredictorSpec::numeric("g")
                },
                PredictorSpec::binary("f"),
            ],
            hurdle: Some(vec!["f".into()]),
        };
        let dm = encode(&ds, &cfg).unwrap();
        assert_eq!(dm.ncols(), 1 + 1 + (3 - 1) + 1);
        assert_eq!(dm.labels()[2], "g=v");
        let dh = encode_hurdle(&ds, &cfg).unwrap();
        assert_eq!(dh.labels(), ["(Intercept)", "f"]);
        assert_eq!(encode(&ds, &cfg).unwrap(), dm);
    }

    #[test]
    fn select_keeps_intercept() {
        let dm = DesignMatrix::from_columns(3, &[("a", vec![1.0, 2.0, 3.0]), ("b", vec![0.0; 3])])
            .unwrap();
        let s = dm.select(&["b".to_string()]).unwrap();
        assert_eq!(s.labels(), ["(Intercept)", "b"]);
        assert!(dm.select(&["zz".to_string()]).is_err());
        assert_eq!(dm.select(&[]).unwrap().ncols(), 1);
    }

    #[test]
    fn design_requires_intercept() {
        let x = DMatrix::from_element(2, 1, 2.0);
        assert!(DesignMatrix::new(x, vec![INTERCEPT.into()]).is_err());
    }

    #[test]
    fn config_validation() {
        let mut cfg = access_config();
        cfg.hurdle = Some(vec!["nope".into()]);
        assert!(cfg.validate().is_err());
        let mut cfg = access_config();
        cfg.predictors[0].base = None;
        assert!(cfg.validate().is_err());
        let json = r#"{"response":"y","predictors":[
            {"name":"year","kind":"numeric","transform":{"subtract_origin":2014}},
            {"name":"founded","kind":"numeric","transform":"log"},
            {"name":"oa","kind":"categorical","levels":["Closed","Green"],"base":"Closed"}]}"#;
        let cfg: EncodingConfig = serde_json::from_str(json).unwrap();
        assert_eq!(cfg.predictors[0].transform, Transform::SubtractOrigin(2014.0));
        assert_eq!(cfg.predictors[1].transform, Transform::Log);
        cfg.validate().unwrap();
    }
}

#[cfg(test)]
mod proptests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn dummy_rows_sum_to_at_most_one(levels in proptest::collection::vec(0usize..4, 1..60)) {
            let names = ["base", "l1", "l2", "l3"];
            let mut values: Vec<String> = levels.iter().map(|&i| names[i].to_string()).collect();
            values.push("base".into());
            let n = values.len();
            let ds = Dataset::new("y", vec![0; n], vec![Column {
                name: "g".into(),
                values: ColumnValues::Categorical(values.clone()),
            }]).unwrap();
            let cfg = EncodingConfig {
                response: "y".into(),
                predictors: vec![PredictorSpec::categorical("g", &names, "base")],
                hurdle: None,
            };
            let dm = encode(&ds, &cfg).unwrap();
            prop_assert_eq!(dm.ncols(), 4);
            for i in 0..n {
                let s: f64 = dm.row(i)[1..].iter().sum();
                prop_assert!(s == 0.0 || s == 1.0);
                prop_assert_eq!(s == 0.0, values[i] == "base");
            }
        }
    }
}
