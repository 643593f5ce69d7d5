//! Observed data: single-consumer panels, repeated cross-sections, and
//! nonlinear cost matrices, with CSV ingestion and serialization.
//!
//! Two file formats are supported:
//!
//! * `wide-csv` for deterministic data: header `p1,...,pL,x1,...,xL`
//!   with an optional leading `label` column, one row per observation.
//! * `long-csv` for cross-sectional data: a choices file with header
//!   `period,household,x1,...,xL` and a companion price file with header
//!   `period,p1,...,pL`, one row per period.

use crate::error::{Error, Result};
use std::io::Write;
use std::path::Path;

/// T observations of (price vector, bundle) for a single consumer.
///
/// Invariants, enforced at construction: all prices strictly positive,
/// all quantities nonnegative, identical dimension across observations,
/// and strictly positive expenditure `p·x` at every observation.
#[derive(Debug, Clone, PartialEq)]
pub struct DeterministicDataset {
    prices: Vec<Vec<f64>>,
    bundles: Vec<Vec<f64>>,
    labels: Option<Vec<String>>,
}

impl DeterministicDataset {
    pub fn new(prices: Vec<Vec<f64>>, bundles: Vec<Vec<f64>>) -> Result<Self> {
        Self::with_labels(prices, bundles, None)
    }

    pub fn with_labels(
        prices: Vec<Vec<f64>>,
        bundles: Vec<Vec<f64>>,
        labels: Option<Vec<String>>,
    ) -> Result<Self> {
        if prices.is_empty() || prices.len() != bundles.len() {
            return Err(Error::EmptyDataset);
        }
        let dim = prices[0].len();
        if dim == 0 {
            return Err(Error::EmptyDataset);
        }
        for (row, (p, x)) in prices.iter().zip(&bundles).enumerate() {
            validate_observation(row + 1, dim, p, x)?;
        }
        if let Some(ref l) = labels {
            if l.len() != prices.len() {
                return Err(Error::Malformed {
                    row: 0,
                    msg: "label count does not match observation count".into(),
                });
            }
        }
        Ok(Self {
            prices,
            bundles,
            labels,
        })
    }

    /// Number of observations T.
    pub fn len(&self) -> usize {
        self.prices.len()
    }

    pub fn is_empty(&self) -> bool {
        false // invariant: T >= 1
    }

    /// Number of goods L.
    pub fn dim(&self) -> usize {
        self.prices[0].len()
    }

    pub fn prices(&self, t: usize) -> &[f64] {
        &self.prices[t]
    }

    pub fn bundle(&self, t: usize) -> &[f64] {
        &self.bundles[t]
    }

    pub fn labels(&self) -> Option<&[String]> {
        self.labels.as_deref()
    }

    /// Expenditure `p^t · x^t`; strictly positive by construction.
    pub fn expenditure(&self, t: usize) -> f64 {
        dot(&self.prices[t], &self.bundles[t])
    }

    pub fn iter(&self) -> impl Iterator<Item = (&[f64], &[f64])> {
        self.prices
            .iter()
            .map(|p| p.as_slice())
            .zip(self.bundles.iter().map(|x| x.as_slice()))
    }
}

fn validate_observation(row: usize, dim: usize, p: &[f64], x: &[f64]) -> Result<()> {
    if p.len() != dim {
        return Err(Error::DimensionMismatch {
            row,
            expected: dim,
            found: p.len(),
        });
    }
    if x.len() != dim {
        return Err(Error::DimensionMismatch {
            row,
            expected: dim,
            found: x.len(),
        });
    }
    for (i, &v) in p.iter().enumerate() {
        if !(v > 0.0) || !v.is_finite() {
            return Err(Error::NonpositivePrice {
                row,
                component: i + 1,
                value: v,
            });
        }
    }
    for (i, &v) in x.iter().enumerate() {
        if v < 0.0 || !v.is_finite() {
            return Err(Error::NegativeQuantity {
                row,
                component: i + 1,
                value: v,
            });
        }
    }
    if !(dot(p, x) > 0.0) {
        return Err(Error::ZeroExpenditure { row });
    }
    Ok(())
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// One period of a repeated cross-section: a price vector and the
/// choices made by the households sampled at those prices.
#[derive(Debug, Clone, PartialEq)]
pub struct Period {
    pub key: String,
    pub prices: Vec<f64>,
    pub choices: Vec<Vec<f64>>,
    pub households: Vec<String>,
}

/// T independent cross-sections of household choices.
///
/// Every bundle has strictly positive expenditure at its own period's
/// prices; this is required by the normalization step downstream.
#[derive(Debug, Clone, PartialEq)]
pub struct StochasticDataset {
    periods: Vec<Period>,
}

impl StochasticDataset {
    pub fn new(periods: Vec<Period>) -> Result<Self> {
        if periods.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let dim = periods[0].prices.len();
        let mut row = 0usize;
        for period in &periods {
            if period.choices.is_empty() {
                return Err(Error::EmptyPeriod {
                    period: period.key.clone(),
                });
            }
            if period.prices.len() != dim {
                return Err(Error::DimensionMismatch {
                    row: 0,
                    expected: dim,
                    found: period.prices.len(),
                });
            }
            for (i, &v) in period.prices.iter().enumerate() {
                if !(v > 0.0) || !v.is_finite() {
                    return Err(Error::NonpositivePrice {
                        row: 0,
                        component: i + 1,
                        value: v,
                    });
                }
            }
            for x in &period.choices {
                row += 1;
                validate_observation(row, dim, &period.prices, x)?;
            }
        }
        Ok(Self { periods })
    }

    /// Number of periods T.
    pub fn len(&self) -> usize {
        self.periods.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Number of goods L.
    pub fn dim(&self) -> usize {
        self.periods[0].prices.len()
    }

    pub fn period(&self, t: usize) -> &Period {
        &self.periods[t]
    }

    pub fn periods(&self) -> &[Period] {
        &self.periods
    }

    pub fn price_vectors(&self) -> Vec<Vec<f64>> {
        self.periods.iter().map(|p| p.prices.clone()).collect()
    }

    /// Index of the period with the given key.
    pub fn period_index(&self, key: &str) -> Option<usize> {
        self.periods.iter().position(|p| p.key == key)
    }
}

/// Costs of observed bundles under observed (possibly nonlinear) price
/// systems: entry `(t, s)` is the cost of bundle `s` under price system
/// `t`. Diagonal entries are strictly positive.
#[derive(Debug, Clone, PartialEq)]
pub struct CostMatrix {
    costs: Vec<Vec<f64>>,
}

impl CostMatrix {
    pub fn new(costs: Vec<Vec<f64>>) -> Result<Self> {
        let t = costs.len();
        if t == 0 {
            return Err(Error::BadCostMatrix("empty matrix".into()));
        }
        for (i, row) in costs.iter().enumerate() {
            if row.len() != t {
                return Err(Error::BadCostMatrix(format!(
                    "row {} has {} entries, expected {}",
                    i + 1,
                    row.len(),
                    t
                )));
            }
            for (j, &v) in row.iter().enumerate() {
                if v < 0.0 || !v.is_finite() {
                    return Err(Error::BadCostMatrix(format!(
                        "entry ({}, {}) is negative or non-finite",
                        i + 1,
                        j + 1
                    )));
                }
            }
            if !(row[i] > 0.0) {
                return Err(Error::BadCostMatrix(format!(
                    "diagonal entry {} is not strictly positive",
                    i + 1
                )));
            }
        }
        Ok(Self { costs })
    }

    /// Linear-pricing cost matrix: entry `(t, s) = p^t · x^s`.
    pub fn from_linear(data: &DeterministicDataset) -> Self {
        let t = data.len();
        let costs = (0..t)
            .map(|i| (0..t).map(|j| dot(data.prices(i), data.bundle(j))).collect())
            .collect();
        Self { costs }
    }

    pub fn len(&self) -> usize {
        self.costs.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn cost(&self, t: usize, s: usize) -> f64 {
        self.costs[t][s]
    }
}

// ---------------------------------------------------------------------------
// CSV ingestion
// ---------------------------------------------------------------------------

/// Loads a deterministic dataset from a wide CSV file.
///
/// The header must be `p1,...,pL,x1,...,xL`, optionally preceded by a
/// `label` column. Row order is preserved. Errors carry the offending
/// 1-based data row number.
pub fn load_deterministic<P: AsRef<Path>>(path: P) -> Result<DeterministicDataset> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .flexible(true)
        .from_path(path.as_ref())?;
    let headers: Vec<String> = reader
        .headers()?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    let (has_label, dim) = parse_wide_header(&headers)?;

    let mut prices = Vec::new();
    let mut bundles = Vec::new();
    let mut labels = Vec::new();
    let expected_fields = headers.len();
    for (idx, record) in reader.records().enumerate() {
        let row = idx + 1;
        let record = record?;
        if record.len() != expected_fields {
            return Err(Error::Malformed {
                row,
                msg: format!("expected {} fields, found {}", expected_fields, record.len()),
            });
        }
        let offset = usize::from(has_label);
        if has_label {
            labels.push(record[0].to_string());
        }
        let mut p = Vec::with_capacity(dim);
        let mut x = Vec::with_capacity(dim);
        for i in 0..dim {
            p.push(parse_number(&record[offset + i], row, &headers[offset + i])?);
        }
        for i in 0..dim {
            x.push(parse_number(
                &record[offset + dim + i],
                row,
                &headers[offset + dim + i],
            )?);
        }
        validate_observation(row, dim, &p, &x)?;
        prices.push(p);
        bundles.push(x);
    }
    DeterministicDataset::with_labels(prices, bundles, has_label.then_some(labels))
}

fn parse_wide_header(headers: &[String]) -> Result<(bool, usize)> {
    let has_label = headers.first().map(|h| h == "label").unwrap_or(false);
    let cols = &headers[usize::from(has_label)..];
    if cols.is_empty() || cols.len() % 2 != 0 {
        return Err(Error::BadHeader(format!(
            "expected p1..pL,x1..xL columns, found {:?}",
            headers
        )));
    }
    let dim = cols.len() / 2;
    for i in 0..dim {
        if cols[i] != format!("p{}", i + 1) {
            return Err(Error::BadHeader(format!(
                "column {} should be p{}, found {:?}",
                i + 1 + usize::from(has_label),
                i + 1,
                cols[i]
            )));
        }
        if cols[dim + i] != format!("x{}", i + 1) {
            return Err(Error::BadHeader(format!(
                "column {} should be x{}, found {:?}",
                dim + i + 1 + usize::from(has_label),
                i + 1,
                cols[dim + i]
            )));
        }
    }
    Ok((has_label, dim))
}

fn parse_number(field: &str, row: usize, column: &str) -> Result<f64> {
    field.parse::<f64>().map_err(|_| Error::Malformed {
        row,
        msg: format!("cannot parse {:?} in column {:?} as a number", field, column),
    })
}

/// Loads a repeated cross-section from a long CSV choices file plus a
/// companion price file.
///
/// Choices are grouped by period in file order; prices are matched by
/// the period key. Every price-file period must receive at least one
/// choice and every choices-file period must be priced.
pub fn load_stochastic<P: AsRef<Path>, Q: AsRef<Path>>(
    choices_path: P,
    prices_path: Q,
) -> Result<StochasticDataset> {
    // Price file: period,p1..pL
    let mut preader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .flexible(true)
        .from_path(prices_path.as_ref())?;
    let pheaders: Vec<String> = preader.headers()?.iter().map(|h| h.to_string()).collect();
    if pheaders.first().map(String::as_str) != Some("period") || pheaders.len() < 2 {
        return Err(Error::BadHeader(format!(
            "price file header must be period,p1..pL, found {:?}",
            pheaders
        )));
    }
    let dim = pheaders.len() - 1;
    for i in 0..dim {
        if pheaders[i + 1] != format!("p{}", i + 1) {
            return Err(Error::BadHeader(format!(
                "price file column {} should be p{}, found {:?}",
                i + 2,
                i + 1,
                pheaders[i + 1]
            )));
        }
    }
    let mut price_by_period: Vec<(String, Vec<f64>)> = Vec::new();
    for (idx, record) in preader.records().enumerate() {
        let row = idx + 1;
        let record = record?;
        if record.len() != dim + 1 {
            return Err(Error::Malformed {
                row,
                msg: format!("price file: expected {} fields, found {}", dim + 1, record.len()),
            });
        }
        let key = record[0].to_string();
        if price_by_period.iter().any(|(k, _)| *k == key) {
            return Err(Error::Malformed {
                row,
                msg: format!("duplicate period {:?} in price file", key),
            });
        }
        let p: Vec<f64> = (0..dim)
            .map(|i| parse_number(&record[i + 1], row, &pheaders[i + 1]))
            .collect::<Result<_>>()?;
        price_by_period.push((key, p));
    }

    // Choices file: period,household,x1..xL
    let mut creader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .flexible(true)
        .from_path(choices_path.as_ref())?;
    let cheaders: Vec<String> = creader.headers()?.iter().map(|h| h.to_string()).collect();
    if cheaders.len() != dim + 2
        || cheaders[0] != "period"
        || cheaders[1] != "household"
        || (0..dim).any(|i| cheaders[i + 2] != format!("x{}", i + 1))
    {
        return Err(Error::BadHeader(format!(
            "choices file header must be period,household,x1..x{}, found {:?}",
            dim, cheaders
        )));
    }

    let mut periods: Vec<Period> = Vec::new();
    for (idx, record) in creader.records().enumerate() {
        let row = idx + 1;
        let record = record?;
        if record.len() != dim + 2 {
            return Err(Error::Malformed {
                row,
                msg: format!(
                    "choices file: expected {} fields, found {}",
                    dim + 2,
                    record.len()
                ),
            });
        }
        let key = record[0].to_string();
        let household = record[1].to_string();
        let x: Vec<f64> = (0..dim)
            .map(|i| parse_number(&record[i + 2], row, &cheaders[i + 2]))
            .collect::<Result<_>>()?;
        let position = periods.iter().position(|p| p.key == key);
        let period = match position {
            Some(i) => &mut periods[i],
            None => {
                let prices = price_by_period
                    .iter()
                    .find(|(k, _)| *k == key)
                    .map(|(_, p)| p.clone())
                    .ok_or_else(|| Error::UnknownPeriod {
                        row,
                        period: key.clone(),
                    })?;
                periods.push(Period {
                    key: key.clone(),
                    prices,
                    choices: Vec::new(),
                    households: Vec::new(),
                });
                periods.last_mut().unwrap()
            }
        };
        period.choices.push(x);
        period.households.push(household);
    }

    for (key, _) in &price_by_period {
        if !periods.iter().any(|p| p.key == *key) {
            return Err(Error::EmptyPeriod {
                period: key.clone(),
            });
        }
    }
    StochasticDataset::new(periods)
}

// ---------------------------------------------------------------------------
// Serialization (round-trips decimal inputs of <= 12 significant digits)
// ---------------------------------------------------------------------------

/// Writes a deterministic dataset back to wide CSV.
pub fn write_deterministic<W: Write>(data: &DeterministicDataset, mut out: W) -> Result<()> {
    let dim = data.dim();
    let mut header = Vec::new();
    if data.labels().is_some() {
        header.push("label".to_string());
    }
    header.extend((1..=dim).map(|i| format!("p{i}")));
    header.extend((1..=dim).map(|i| format!("x{i}")));
    writeln!(out, "{}", header.join(","))?;
    for t in 0..data.len() {
        let mut fields = Vec::new();
        if let Some(labels) = data.labels() {
            fields.push(labels[t].clone());
        }
        fields.extend(data.prices(t).iter().map(|v| v.to_string()));
        fields.extend(data.bundle(t).iter().map(|v| v.to_string()));
        writeln!(out, "{}", fields.join(","))?;
    }
    Ok(())
}

/// Writes a stochastic dataset as a (choices, prices) pair of long CSVs.
pub fn write_stochastic<W1: Write, W2: Write>(
    data: &StochasticDataset,
    mut choices_out: W1,
    mut prices_out: W2,
) -> Result<()> {
    let dim = data.dim();
    let xcols: Vec<String> = (1..=dim).map(|i| format!("x{i}")).collect();
    writeln!(choices_out, "period,household,{}", xcols.join(","))?;
    for period in data.periods() {
        for (h, x) in period.households.iter().zip(&period.choices) {
            let vals: Vec<String> = x.iter().map(|v| v.to_string()).collect();
            writeln!(choices_out, "{},{},{}", period.key, h, vals.join(","))?;
        }
    }
    let pcols: Vec<String> = (1..=dim).map(|i| format!("p{i}")).collect();
    writeln!(prices_out, "period,{}", pcols.join(","))?;
    for period in data.periods() {
        let vals: Vec<String> = period.prices.iter().map(|v| v.to_string()).collect();
        writeln!(prices_out, "{},{}", period.key, vals.join(","))?;
    }
    Ok(())
}
