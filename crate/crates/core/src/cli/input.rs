//! Cohort CSV ingestion.
//!
//! Binomial schema: `unit_id,successes,trials[,covariate...]`, one row per
//! unit. Multinomial long schema: `unit_id,category,count`, one row per
//! (unit, category), with covariates in an optional sidecar
//! `unit_id[,covariate...]`. Categories keep their order of first appearance
//! and missing (unit, category) pairs count as zero.

use std::collections::{BTreeMap, HashMap, HashSet};

use crate::error::{Error, Result};
use crate::likelihood::{Family, UnitObservations};

fn input_error(line: usize, message: impl Into<String>) -> Error {
    Error::Input {
        line,
        message: message.into(),
    }
}

fn reader(text: &str) -> csv::Reader<&[u8]> {
    csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes())
}

fn check_header(headers: &csv::StringRecord, expected: &[&str]) -> Result<()> {
    let got: Vec<&str> = headers.iter().collect();
    if got.len() < expected.len() || got[..expected.len()] != *expected {
        return Err(input_error(
            1,
            format!(
                "header must start with `{}`, found `{}`",
                expected.join(","),
                got.join(",")
            ),
        ));
    }
    let mut seen = HashSet::new();
    if let Some(dup) = got.iter().find(|h| !seen.insert(**h)) {
        return Err(input_error(1, format!("duplicate column `{dup}`")));
    }
    Ok(())
}

fn parse_count(field: &str, column: &str, line: usize) -> Result<u64> {
    match field.parse::<i64>() {
        Ok(v) if v < 0 => Err(input_error(
            line,
            format!("negative count {v} in `{column}`"),
        )),
        Ok(v) => Ok(v as u64),
        Err(_) => Err(input_error(
            line,
            format!("`{column}` is not an integer: `{field}`"),
        )),
    }
}

fn parse_covariate(field: &str, column: &str, line: usize) -> Result<f64> {
    match field.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(input_error(
            line,
            format!("covariate `{column}` is not numeric: `{field}`"),
        )),
    }
}

fn record_line(record: &csv::StringRecord) -> usize {
    record.position().map_or(0, |p| p.line() as usize)
}

fn csv_error(e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line() as usize);
    input_error(line, format!("malformed CSV: {e}"))
}

/// Reads the binomial schema.
pub fn parse_binomial(text: &str) -> Result<Vec<UnitObservations>> {
    let mut rdr = reader(text);
    let headers = rdr.headers().map_err(csv_error)?.clone();
    check_header(&headers, &["unit_id", "successes", "trials"])?;
    let covariate_names: Vec<&str> = headers.iter().skip(3).collect();

    let mut seen = HashMap::new();
    let mut units = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(csv_error)?;
        let line = record_line(&record);
        let id = record[0].to_string();
        if id.is_empty() {
            return Err(input_error(line, "empty unit_id"));
        }
        if let Some(first) = seen.insert(id.clone(), line) {
            return Err(input_error(
                line,
                format!("duplicate unit_id `{id}` (first on line {first})"),
            ));
        }
        let successes = parse_count(&record[1], "successes", line)?;
        let trials = parse_count(&record[2], "trials", line)?;
        if successes > trials {
            return Err(input_error(
                line,
                format!("successes {successes} exceed trials {trials}"),
            ));
        }
        let mut unit = UnitObservations::binomial(id, successes, trials)
            .map_err(|e| input_error(line, e.to_string()))?;
        for (name, field) in covariate_names.iter().zip(record.iter().skip(3)) {
            unit = unit.with_covariate(*name, parse_covariate(field, name, line)?);
        }
        units.push(unit);
    }
    Ok(units)
}

/// Reads the long multinomial schema and an optional covariate sidecar.
pub fn parse_multinomial(
    text: &str,
    sidecar: Option<&str>,
) -> Result<(Vec<UnitObservations>, Family)> {
    let mut rdr = reader(text);
    let headers = rdr.headers().map_err(csv_error)?.clone();
    check_header(&headers, &["unit_id", "category", "count"])?;

    let mut categories: Vec<String> = Vec::new();
    let mut unit_order: Vec<String> = Vec::new();
    let mut counts: HashMap<String, BTreeMap<usize, u64>> = HashMap::new();
    let mut seen = HashMap::new();
    for record in rdr.records() {
        let record = record.map_err(csv_error)?;
        let line = record_line(&record);
        let (id, category) = (record[0].to_string(), record[1].to_string());
        if id.is_empty() || category.is_empty() {
            return Err(input_error(line, "empty unit_id or category"));
        }
        if let Some(first) = seen.insert((id.clone(), category.clone()), line) {
            return Err(input_error(
                line,
                format!(
                    "duplicate (unit_id, category) `{id}`, `{category}` (first on line {first})"
                ),
            ));
        }
        let count = parse_count(&record[2], "count", line)?;
        let c = match categories.iter().position(|k| *k == category) {
            Some(c) => c,
            None => {
                categories.push(category);
                categories.len() - 1
            }
        };
        if !counts.contains_key(&id) {
            unit_order.push(id.clone());
        }
        counts.entry(id).or_default().insert(c, count);
    }
    if categories.len() < 2 {
        return Err(input_error(
            1,
            "multinomial cohorts need at least 2 categories",
        ));
    }

    let covariates = match sidecar {
        Some(text) => parse_sidecar(text, &unit_order)?,
        None => HashMap::new(),
    };
    let units = unit_order
        .iter()
        .map(|id| {
            let per = &counts[id];
            let vector = (0..categories.len())
                .map(|c| per.get(&c).copied().unwrap_or(0))
                .collect();
            let mut unit = UnitObservations::multinomial(id.clone(), vector)?;
            if let Some(covs) = covariates.get(id) {
                unit.covariates = covs.clone();
            }
            Ok(unit)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((units, Family::Multinomial { categories }))
}

fn parse_sidecar(text: &str, known: &[String]) -> Result<HashMap<String, BTreeMap<String, f64>>> {
    let mut rdr = reader(text);
    let headers = rdr.headers().map_err(csv_error)?.clone();
    check_header(&headers, &["unit_id"])?;
    let names: Vec<&str> = headers.iter().skip(1).collect();
    let mut out = HashMap::new();
    for record in rdr.records() {
        let record = record.map_err(csv_error)?;
        let line = record_line(&record);
        let id = record[0].to_string();
        if !known.contains(&id) {
            return Err(input_error(
                line,
                format!("covariate row for unknown unit_id `{id}`"),
            ));
        }
        let mut covs = BTreeMap::new();
        for (name, field) in names.iter().zip(record.iter().skip(1)) {
            covs.insert(name.to_string(), parse_covariate(field, name, line)?);
        }
        if out.insert(id.clone(), covs).is_some() {
            return Err(input_error(line, format!("duplicate unit_id `{id}`")));
        }
    }
    Ok(out)
}
