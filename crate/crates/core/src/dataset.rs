//! Attribute-typed tabular data, preprocessing and train/test splitting.

use std::collections::BTreeSet;
use std::io::Read;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forecast::{LabelId, LabelSpace};

/// Identifies the shuffle used by [`split`]; stamped into protocol reports.
pub const SPLIT_GENERATOR: &str = "chacha8-fisher-yates-v1";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum AttributeKind {
    Numeric,
    Nominal(Vec<String>),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Attribute {
    pub name: String,
    pub kind: AttributeKind,
}

impl Attribute {
    pub fn numeric(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            kind: AttributeKind::Numeric,
        }
    }

    pub fn nominal<S: Into<String>>(name: impl Into<String>, values: impl IntoIterator<Item = S>) -> Self {
        Self {
            name: name.into(),
            kind: AttributeKind::Nominal(values.into_iter().map(Into::into).collect()),
        }
    }

    pub fn is_numeric(&self) -> bool {
        matches!(self.kind, AttributeKind::Numeric)
    }

    pub fn nominal_values(&self) -> Option<&[String]> {
        match &self.kind {
            AttributeKind::Nominal(v) => Some(v),
            AttributeKind::Numeric => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Schema {
    attributes: Vec<Attribute>,
    class_index: usize,
}

impl Schema {
    pub fn new(attributes: Vec<Attribute>, class_index: usize) -> Result<Self> {
        let mut names = BTreeSet::new();
        for a in &attributes {
            if !names.insert(a.name.as_str()) {
                return Err(Error::Schema(format!("duplicate attribute name `{}`", a.name)));
            }
            if let AttributeKind::Nominal(values) = &a.kind {
                let distinct: BTreeSet<&String> = values.iter().collect();
                if distinct.len() != values.len() {
                    return Err(Error::Schema(format!(
                        "attribute `{}` repeats a nominal value",
                        a.name
                    )));
                }
            }
        }
        let Some(class) = attributes.get(class_index) else {
            return Err(Error::Schema(format!(
                "class index {class_index} outside {} attributes",
                attributes.len()
            )));
        };
        match class.nominal_values() {
            Some(v) if v.len() >= 2 => {}
            _ => {
                return Err(Error::Schema(format!(
                    "class attribute `{}` must be nominal with at least 2 values",
                    class.name
                )))
            }
        }
        Ok(Self {
            attributes,
            class_index,
        })
    }

    /// Schema whose class is the last attribute.
    pub fn with_last_class(attributes: Vec<Attribute>) -> Result<Self> {
        let idx = attributes.len().checked_sub(1).ok_or_else(|| Error::Schema("no attributes".into()))?;
        Self::new(attributes, idx)
    }

    pub fn attributes(&self) -> &[Attribute] {
        &self.attributes
    }

    pub fn class_index(&self) -> usize {
        self.class_index
    }

    pub fn class_attribute(&self) -> &Attribute {
        &self.attributes[self.class_index]
    }

    pub fn num_classes(&self) -> usize {
        self.class_attribute().nominal_values().map_or(0, <[String]>::len)
    }

    pub fn label_space(&self) -> LabelSpace {
        let values = self.class_attribute().nominal_values().unwrap_or_default();
        LabelSpace::new(values.iter().cloned()).expect("validated class attribute")
    }

    /// Indices of the non-class attributes.
    pub fn feature_indices(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.attributes.len()).filter(move |&i| i != self.class_index)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Value {
    Numeric(f64),
    /// Index into the attribute's value list.
    Nominal(usize),
    Missing,
}

impl Value {
    pub fn is_missing(self) -> bool {
        matches!(self, Value::Missing)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    schema: Schema,
    rows: Vec<Vec<Value>>,
    name: String,
}

impl Dataset {
    pub fn new(schema: Schema, rows: Vec<Vec<Value>>, name: impl Into<String>) -> Result<Self> {
        for (i, row) in rows.iter().enumerate() {
            check_row(&schema, row).map_err(|m| Error::Schema(format!("row {i}: {m}")))?;
        }
        Ok(Self {
            schema,
            rows,
            name: name.into(),
        })
    }

    pub fn schema(&self) -> &Schema {
        &self.schema
    }

    pub fn rows(&self) -> &[Vec<Value>] {
        &self.rows
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Class label of a row, `None` when missing.
    pub fn class_of(&self, row: usize) -> Option<LabelId> {
        match self.rows[row][self.schema.class_index] {
            Value::Nominal(v) => Some(LabelId(v)),
            _ => None,
        }
    }

    /// New dataset with the same schema holding the selected rows.
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            schema: self.schema.clone(),
            rows: indices.iter().map(|&i| self.rows[i].clone()).collect(),
            name: self.name.clone(),
        }
    }

    fn with_rows(&self, rows: Vec<Vec<Value>>) -> Dataset {
        Dataset {
            schema: self.schema.clone(),
            rows,
            name: self.name.clone(),
        }
    }
}

fn check_row(schema: &Schema, row: &[Value]) -> std::result::Result<(), String> {
    if row.len() != schema.attributes.len() {
        return Err(format!(
            "has {} values, schema has {} attributes",
            row.len(),
            schema.attributes.len()
        ));
    }
    for (value, attr) in row.iter().zip(&schema.attributes) {
        match (value, &attr.kind) {
            (Value::Missing, _) => {}
            (Value::Numeric(x), AttributeKind::Numeric) if x.is_finite() => {}
            (Value::Nominal(v), AttributeKind::Nominal(values)) if *v < values.len() => {}
            _ => return Err(format!("invalid value {value:?} for attribute `{}`", attr.name)),
        }
    }
    Ok(())
}

/// Parses CSV under a known schema. The header must list the schema's
/// attribute names in order; an empty cell or `?` is missing.
pub fn parse_csv_with_schema<R: Read>(input: R, schema: &Schema, name: &str) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(input);
    let header = reader.headers().map_err(|e| Error::parse(1, e.to_string()))?.clone();
    let expected: Vec<&str> = schema.attributes.iter().map(|a| a.name.as_str()).collect();
    if header.iter().ne(expected.iter().copied()) {
        return Err(Error::parse(
            1,
            format!("header does not match schema; expected `{}`", expected.join(",")),
        ));
    }
    let mut rows = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::parse(i + 2, e.to_string()))?;
        let line = record.position().map_or(i + 2, |p| p.line() as usize);
        if record.len() != expected.len() {
            return Err(Error::parse(
                line,
                format!("expected {} cells, got {}", expected.len(), record.len()),
            ));
        }
        let row = record
            .iter()
            .zip(&schema.attributes)
            .map(|(cell, attr)| parse_cell(cell, attr).map_err(|m| Error::parse(line, m)))
            .collect::<Result<Vec<_>>>()?;
        rows.push(row);
    }
    Dataset::new(schema.clone(), rows, name)
}

pub(crate) fn parse_cell(cell: &str, attr: &Attribute) -> std::result::Result<Value, String> {
    if cell.is_empty() || cell == "?" {
        return Ok(Value::Missing);
    }
    match &attr.kind {
        AttributeKind::Numeric => cell
            .parse::<f64>()
            .ok()
            .filter(|x| x.is_finite())
            .map(Value::Numeric)
            .ok_or_else(|| format!("column `{}`: `{cell}` is not a number", attr.name)),
        AttributeKind::Nominal(values) => values
            .iter()
            .position(|v| v == cell)
            .map(Value::Nominal)
            .ok_or_else(|| format!("column `{}`: undeclared nominal value `{cell}`", attr.name)),
    }
}

/// Which rows supply normalization and imputation statistics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PreprocessScope {
    /// Training rows only.
    #[default]
    Train,
    /// Training and test rows together.
    All,
}

#[derive(Debug, Clone, PartialEq)]
enum AttributeStats {
    Numeric { min: f64, max: f64, mean: f64 },
    Nominal { mode: usize },
    Class,
}

/// Min-max scaling and mean/mode imputation fitted on one set of rows.
#[derive(Debug, Clone, PartialEq)]
pub struct Preprocessor {
    stats: Vec<AttributeStats>,
}

impl Preprocessor {
    pub fn fit<'a>(schema: &Schema, rows: impl Iterator<Item = &'a Vec<Value>> + Clone) -> Result<Self> {
        let mut stats = Vec::with_capacity(schema.attributes.len());
        for (j, attr) in schema.attributes.iter().enumerate() {
            if j == schema.class_index {
                stats.push(AttributeStats::Class);
                continue;
            }
            let no_values = || {
                Error::Schema(format!(
                    "attribute `{}` has no observed training values",
                    attr.name
                ))
            };
            match &attr.kind {
                AttributeKind::Numeric => {
                    let (mut min, mut max, mut sum, mut count) =
                        (f64::INFINITY, f64::NEG_INFINITY, 0.0, 0usize);
                    for row in rows.clone() {
                        if let Value::Numeric(x) = row[j] {
                            min = min.min(x);
                            max = max.max(x);
                            sum += x;
                            count += 1;
                        }
                    }
                    if count == 0 {
                        return Err(no_values());
                    }
                    stats.push(AttributeStats::Numeric {
                        min,
                        max,
                        mean: sum / count as f64,
                    });
                }
                AttributeKind::Nominal(values) => {
                    let mut counts = vec![0usize; values.len()];
                    for row in rows.clone() {
                        if let Value::Nominal(v) = row[j] {
                            counts[v] += 1;
                        }
                    }
                    if counts.iter().all(|&c| c == 0) {
                        return Err(no_values());
                    }
                    // first maximum wins
                    let mode = counts
                        .iter()
                        .enumerate()
                        .fold(0, |best, (v, &c)| if c > counts[best] { v } else { best });
                    stats.push(AttributeStats::Nominal { mode });
                }
            }
        }
        Ok(Self { stats })
    }

    pub fn transform(&self, data: &Dataset) -> Dataset {
        let rows = data
            .rows
            .iter()
            .map(|row| {
                row.iter()
                    .zip(&self.stats)
                    .map(|(&value, stats)| match (stats, value) {
                        (AttributeStats::Class, v) => v,
                        (AttributeStats::Numeric { min, max, mean }, v) => {
                            let x = match v {
                                Value::Numeric(x) => x,
                                _ => *mean,
                            };
                            let scaled = if max > min { (x - min) / (max - min) } else { 0.0 };
                            Value::Numeric(scaled.clamp(0.0, 1.0))
                        }
                        (AttributeStats::Nominal { mode }, v) => match v {
                            Value::Nominal(_) => v,
                            _ => Value::Nominal(*mode),
                        },
                    })
                    .collect()
            })
            .collect();
        data.with_rows(rows)
    }
}

/// Normalizes numerics to `[0, 1]` and imputes missing values, using
/// statistics from `train` only. Test values outside the training range are
/// clipped.
pub fn preprocess(train: &Dataset, test: &Dataset) -> Result<(Dataset, Dataset)> {
    preprocess_with_scope(train, test, PreprocessScope::Train)
}

pub fn preprocess_with_scope(
    train: &Dataset,
    test: &Dataset,
    scope: PreprocessScope,
) -> Result<(Dataset, Dataset)> {
    if train.schema != test.schema {
        return Err(Error::Schema("train and test schemas differ".into()));
    }
    let pre = match scope {
        PreprocessScope::Train => Preprocessor::fit(&train.schema, train.rows.iter())?,
        PreprocessScope::All => {
            Preprocessor::fit(&train.schema, train.rows.iter().chain(test.rows.iter()))?
        }
    };
    Ok((pre.transform(train), pre.transform(test)))
}

/// Fraction of rows used for training and the seeds of the repeated splits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitPlan {
    train_fraction: f64,
    seeds: Vec<u64>,
}

impl SplitPlan {
    pub fn new(train_fraction: f64, seeds: Vec<u64>) -> Result<Self> {
        if !(train_fraction > 0.0 && train_fraction < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "train fraction {train_fraction} outside (0, 1)"
            )));
        }
        if seeds.is_empty() {
            return Err(Error::InvalidParameter("split plan needs at least one seed".into()));
        }
        let distinct: BTreeSet<u64> = seeds.iter().copied().collect();
        if distinct.len() != seeds.len() {
            return Err(Error::InvalidParameter("split seeds must be distinct".into()));
        }
        Ok(Self {
            train_fraction,
            seeds,
        })
    }

    /// `count` consecutive seeds starting at 0.
    pub fn with_seed_count(train_fraction: f64, count: usize) -> Result<Self> {
        Self::new(train_fraction, (0..count as u64).collect())
    }

    pub fn train_fraction(&self) -> f64 {
        self.train_fraction
    }

    pub fn seeds(&self) -> &[u64] {
        &self.seeds
    }

    /// Training rows out of `n`: the ceiling of `fraction * n`, kept within
    /// `[1, n - 1]`.
    pub fn train_count(&self, n: usize) -> usize {
        // the small offset stops 0.66 * 150 = 99.00000000000001 rounding up
        let raw = (self.train_fraction * n as f64 - 1e-9).ceil() as usize;
        raw.clamp(1, n.saturating_sub(1).max(1))
    }
}

impl Default for SplitPlan {
    fn default() -> Self {
        Self {
            train_fraction: 0.66,
            seeds: (0..5).collect(),
        }
    }
}

/// Deterministic permutation of `0..n` for `seed`.
pub fn shuffled_indices(n: usize, seed: u64) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut idx: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        let j = rng.random_range(0..=i);
        idx.swap(i, j);
    }
    idx
}

/// Shuffles with `seed` and cuts into train and test parts.
pub fn split(data: &Dataset, plan: &SplitPlan, seed: u64) -> Result<(Dataset, Dataset)> {
    if !plan.seeds.contains(&seed) {
        return Err(Error::InvalidParameter(format!("seed {seed} is not in the split plan")));
    }
    let n = data.len();
    if n < 3 {
        return Err(Error::InvalidParameter(format!(
            "dataset `{}` has {n} rows; splitting needs at least 3",
            data.name
        )));
    }
    let idx = shuffled_indices(n, seed);
    let cut = plan.train_count(n);
    Ok((data.subset(&idx[..cut]), data.subset(&idx[cut..])))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy_schema() -> Schema {
        Schema::with_last_class(vec![
            Attribute::numeric("x"),
            Attribute::nominal("color", ["red", "blue"]),
            Attribute::nominal("class", ["a", "b"]),
        ])
        .unwrap()
    }

    fn toy(rows: Vec<Vec<Value>>) -> Dataset {
        Dataset::new(toy_schema(), rows, "toy").unwrap()
    }

    fn row(x: Option<f64>, color: Option<usize>, class: usize) -> Vec<Value> {
        vec![
            x.map_or(Value::Missing, Value::Numeric),
            color.map_or(Value::Missing, Value::Nominal),
            Value::Nominal(class),
        ]
    }

    #[test]
    fn schema_validation() {
        assert!(Schema::with_last_class(vec![Attribute::numeric("x"), Attribute::numeric("y")]).is_err());
        assert!(Schema::with_last_class(vec![Attribute::nominal("c", ["only"])]).is_err());
        assert!(Schema::with_last_class(vec![
            Attribute::numeric("x"),
            Attribute::nominal("x", ["a", "b"])
        ])
        .is_err());
        assert!(Schema::new(vec![Attribute::nominal("c", ["a", "b"])], 3).is_err());
        let s = toy_schema();
        assert_eq!(s.num_classes(), 2);
        assert_eq!(s.feature_indices().collect::<Vec<_>>(), vec![0, 1]);
    }

    #[test]
    fn dataset_rejects_bad_rows() {
        let s = toy_schema();
        assert!(Dataset::new(s.clone(), vec![vec![Value::Numeric(1.0)]], "t").is_err());
        assert!(Dataset::new(
            s.clone(),
            vec![vec![Value::Numeric(1.0), Value::Nominal(5), Value::Nominal(0)]],
            "t"
        )
        .is_err());
        assert!(Dataset::new(
            s,
            vec![vec![Value::Nominal(0), Value::Nominal(0), Value::Nominal(0)]],
            "t"
        )
        .is_err());
    }

    #[test]
    fn csv_parsing() {
        let s = toy_schema();
        let d = parse_csv_with_schema("x,color,class\n".as_bytes(), &s, "t").unwrap();
        assert!(d.is_empty());
        let d = parse_csv_with_schema("x,color,class\n1.5,red,a\n?,,b\n".as_bytes(), &s, "t").unwrap();
        assert_eq!(d.rows()[0], row(Some(1.5), Some(0), 0));
        assert_eq!(d.rows()[1], row(None, None, 1));
        assert!(parse_csv_with_schema("x,class,color\n".as_bytes(), &s, "t").is_err());
        let err = parse_csv_with_schema("x,color,class\n1,green,a\n".as_bytes(), &s, "t").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("line 2") && msg.contains("color") && msg.contains("green"), "{msg}");
        let err = parse_csv_with_schema("x,color,class\nabc,red,a\n".as_bytes(), &s, "t").unwrap_err();
        assert!(err.to_string().contains("not a number"));
    }

    #[test]
    fn min_max_with_clipping() {
        let train = toy(vec![row(Some(0.0), Some(0), 0), row(Some(10.0), Some(1), 1)]);
        let test = toy(vec![row(Some(5.0), Some(0), 0), row(Some(12.0), Some(0), 1), row(Some(-3.0), Some(0), 1)]);
        let (tr, te) = preprocess(&train, &test).unwrap();
        assert_eq!(tr.rows()[1][0], Value::Numeric(1.0));
        assert_eq!(te.rows()[0][0], Value::Numeric(0.5));
        assert_eq!(te.rows()[1][0], Value::Numeric(1.0));
        assert_eq!(te.rows()[2][0], Value::Numeric(0.0));
    }

    #[test]
    fn constant_attribute_maps_to_zero() {
        let train = toy(vec![row(Some(4.0), Some(0), 0), row(Some(4.0), Some(1), 1)]);
        let (tr, te) = preprocess(&train, &train.clone()).unwrap();
        assert!(tr.rows().iter().chain(te.rows()).all(|r| r[0] == Value::Numeric(0.0)));
    }

    #[test]
    fn imputation_uses_training_mean_and_mode() {
        let train = toy(vec![
            row(Some(0.0), Some(1), 0),
            row(Some(6.0), Some(1), 1),
            row(Some(10.0), Some(0), 1),
        ]);
        let test = toy(vec![row(None, None, 0)]);
        let (_, te) = preprocess(&train, &test).unwrap();
        assert_eq!(te.rows()[0][0], Value::Numeric(16.0 / 3.0 / 10.0));
        assert_eq!(te.rows()[0][1], Value::Nominal(1));
        assert_eq!(te.rows()[0][2], Value::Nominal(0));
    }

    #[test]
    fn unobserved_attribute_is_an_error() {
        let train = toy(vec![row(None, Some(0), 0), row(None, Some(1), 1)]);
        assert!(preprocess(&train, &train).is_err());
    }

    #[test]
    fn scope_all_uses_test_rows_too() {
        let train = toy(vec![row(Some(0.0), Some(0), 0), row(Some(10.0), Some(1), 1)]);
        let test = toy(vec![row(Some(20.0), Some(0), 0)]);
        let (tr, te) = preprocess_with_scope(&train, &test, PreprocessScope::All).unwrap();
        assert_eq!(tr.rows()[1][0], Value::Numeric(0.5));
        assert_eq!(te.rows()[0][0], Value::Numeric(1.0));
    }

    #[test]
    fn split_sizes_and_determinism() {
        let rows: Vec<_> = (0..150).map(|i| row(Some(i as f64), Some(0), i % 2)).collect();
        let data = toy(rows);
        let plan = SplitPlan::default();
        let (tr, te) = split(&data, &plan, 3).unwrap();
        assert_eq!((tr.len(), te.len()), (99, 51));
        let (tr2, _) = split(&data, &plan, 3).unwrap();
        assert_eq!(tr, tr2);
        let (tr3, _) = split(&data, &plan, 4).unwrap();
        assert_ne!(tr, tr3);
        assert!(split(&data, &plan, 99).is_err());
        let tiny = toy(vec![row(Some(0.0), Some(0), 0); 2]);
        assert!(split(&tiny, &plan, 0).is_err());
    }

    #[test]
    fn split_plan_validation() {
        assert!(SplitPlan::new(0.0, vec![1]).is_err());
        assert!(SplitPlan::new(1.0, vec![1]).is_err());
        assert!(SplitPlan::new(0.5, vec![]).is_err());
        assert!(SplitPlan::new(0.5, vec![1, 1]).is_err());
        let plan = SplitPlan::new(0.66, vec![0]).unwrap();
        assert_eq!(plan.train_count(3), 2);
        assert_eq!(plan.train_count(214), 142);
    }
}
