//! Grouped statistics over a records CSV.

use crate::error::CliError;
use dme_core::harness::Summary;
use serde::Serialize;
use std::collections::HashMap;

/// Which kind of records a CSV holds, detected from its header.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum RecordKind {
    /// One row per (compressor, dissimilarity, trial); metrics are columns.
    Sweep,
    /// One row per (compressor, trial, iteration, metric).
    Task,
}

impl RecordKind {
    /// The grouping axis.
    pub fn axis(self) -> &'static str {
        match self {
            RecordKind::Sweep => "dissim",
            RecordKind::Task => "iteration",
        }
    }

    /// Width of the shaded band in standard deviations.
    pub fn default_band(self) -> f64 {
        match self {
            RecordKind::Sweep => 2.0,
            RecordKind::Task => 1.0,
        }
    }
}

pub const SWEEP_METRICS: [&str; 3] = ["l2_sq", "linf", "cosine"];

/// Statistics of one (label, metric, axis value) group.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroupRow {
    pub label: String,
    pub metric: String,
    /// The axis value exactly as written in the records file.
    pub x: String,
    /// Rows in the group, including ones without a value.
    pub records: usize,
    /// Rows contributing a value.
    pub n: usize,
    pub mean: Option<f64>,
    pub std: Option<f64>,
    pub band_lo: Option<f64>,
    pub band_hi: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryTable {
    pub kind: RecordKind,
    pub band: f64,
    pub total_records: usize,
    pub rows: Vec<GroupRow>,
}

fn column(headers: &csv::StringRecord, name: &str) -> Result<usize, CliError> {
    headers.iter().position(|h| h == name).ok_or_else(|| CliError::Csv(format!("missing column `{name}`")))
}

fn cell_f64(rec: &csv::StringRecord, idx: usize, name: &str, row: usize) -> Result<Option<f64>, CliError> {
    let s = rec.get(idx).unwrap_or("").trim();
    if s.is_empty() {
        return Ok(None);
    }
    s.parse()
        .map(Some)
        .map_err(|_| CliError::Csv(format!("row {row}, column `{name}`: `{s}` is not a number")))
}

#[derive(Default)]
struct Acc {
    records: usize,
    values: Vec<f64>,
}

/// Group a records CSV by (label, metric, axis) in first-appearance order.
/// `band` overrides the default band width.
pub fn summarize(reader: impl std::io::Read, band: Option<f64>) -> Result<SummaryTable, CliError> {
    let mut rdr = csv::ReaderBuilder::new().from_reader(reader);
    let headers = rdr.headers().map_err(|e| CliError::Csv(e.to_string()))?.clone();
    let kind = if headers.iter().any(|h| h == "dissim") {
        RecordKind::Sweep
    } else if headers.iter().any(|h| h == "iteration") {
        RecordKind::Task
    } else {
        return Err(CliError::Csv("missing column `dissim` (sweep) or `iteration` (task)".into()));
    };
    let label = column(&headers, "label")?;
    let axis = column(&headers, kind.axis())?;
    let metric_cols: Vec<(String, usize)> = match kind {
        RecordKind::Sweep => {
            SWEEP_METRICS.iter().map(|m| column(&headers, m).map(|i| (m.to_string(), i))).collect::<Result<_, _>>()?
        }
        RecordKind::Task => vec![("value".into(), column(&headers, "value")?)],
    };
    let metric_name = if kind == RecordKind::Task { Some(column(&headers, "metric")?) } else { None };

    let mut order: Vec<(String, String, String)> = Vec::new();
    let mut groups: HashMap<(String, String, String), Acc> = HashMap::new();
    let mut total = 0;
    for (i, rec) in rdr.records().enumerate() {
        let row = i + 2;
        let rec = rec.map_err(|e| CliError::Csv(format!("row {row}: {e}")))?;
        total += 1;
        let lbl = rec.get(label).unwrap_or("").to_string();
        let x = rec.get(axis).unwrap_or("").trim().to_string();
        x.parse::<f64>()
            .map_err(|_| CliError::Csv(format!("row {row}, column `{}`: `{x}` is not a number", kind.axis())))?;
        for (name, idx) in &metric_cols {
            let metric = match metric_name {
                Some(mi) => rec.get(mi).unwrap_or("").to_string(),
                None => name.clone(),
            };
            let v = cell_f64(&rec, *idx, name, row)?;
            let key = (lbl.clone(), metric, x.clone());
            let acc = groups.entry(key.clone()).or_insert_with(|| {
                order.push(key);
                Acc::default()
            });
            acc.records += 1;
            acc.values.extend(v);
        }
    }
    // Metrics that never got a value anywhere (not requested) are dropped.
    let present: std::collections::HashSet<&str> =
        groups.iter().filter(|(_, a)| !a.values.is_empty()).map(|((_, m, _), _)| m.as_str()).collect();
    let band = band.unwrap_or(kind.default_band());
    let rows = order
        .iter()
        .filter(|(_, m, _)| present.contains(m.as_str()))
        .map(|key| {
            let acc = &groups[key];
            let s = Summary::of(&acc.values);
            GroupRow {
                label: key.0.clone(),
                metric: key.1.clone(),
                x: key.2.clone(),
                records: acc.records,
                n: acc.values.len(),
                mean: s.map(|s| s.mean),
                std: s.map(|s| s.std),
                band_lo: s.map(|s| s.band(band).0),
                band_hi: s.map(|s| s.band(band).1),
            }
        })
        .collect();
    Ok(SummaryTable { kind, band, total_records: total, rows })
}

impl SummaryTable {
    /// CSV with columns `label, metric, <axis>, records, n, mean, std,
    /// band_lo, band_hi`.
    pub fn to_csv(&self) -> Vec<u8> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["label", "metric", self.kind.axis(), "records", "n", "mean", "std", "band_lo", "band_hi"])
            .expect("in-memory write");
        let f = |v: Option<f64>| v.map(|v| v.to_string()).unwrap_or_default();
        for r in &self.rows {
            w.write_record([
                r.label.clone(),
                r.metric.clone(),
                r.x.clone(),
                r.records.to_string(),
                r.n.to_string(),
                f(r.mean),
                f(r.std),
                f(r.band_lo),
                f(r.band_hi),
            ])
            .expect("in-memory write");
        }
        w.into_inner().expect("in-memory flush")
    }

    pub fn metrics(&self) -> Vec<&str> {
        let mut out: Vec<&str> = Vec::new();
        for r in &self.rows {
            if !out.contains(&r.metric.as_str()) {
                out.push(&r.metric);
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn task_csv(values: &[&str]) -> String {
        let mut s = String::from("label,scheme,task,trial,iteration,metric,value,bits_per_client,error\n");
        for (t, v) in values.iter().enumerate() {
            s.push_str(&format!("a,identity,kmeans,{t},0,cost,{v},0,\n"));
        }
        s
    }

    #[test]
    fn single_record_has_zero_std() {
        let t = summarize(task_csv(&["5"]).as_bytes(), None).unwrap();
        assert_eq!(t.rows.len(), 1);
        assert_eq!((t.rows[0].mean, t.rows[0].std), (Some(5.0), Some(0.0)));
    }

    #[test]
    fn pair_uses_sample_std() {
        let t = summarize(task_csv(&["1", "3"]).as_bytes(), None).unwrap();
        assert_eq!(t.rows[0].mean, Some(2.0));
        assert_eq!(t.rows[0].std, Some(2f64.sqrt()));
        assert_eq!((t.rows[0].band_lo, t.rows[0].band_hi), (Some(2.0 - 2f64.sqrt()), Some(2.0 + 2f64.sqrt())));
    }

    #[test]
    fn bad_number_names_the_column() {
        let err = summarize(task_csv(&["x"]).as_bytes(), None).unwrap_err().to_string();
        assert!(err.contains("`value`") && err.contains("row 2"), "{err}");
        let err = summarize("label,iteration\na,1\n".as_bytes(), None).unwrap_err().to_string();
        assert!(err.contains("`value`"), "{err}");
    }
}
