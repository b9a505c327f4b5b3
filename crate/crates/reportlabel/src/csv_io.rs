//! Report and label CSV files.
//!
//! Four layouts are recognized from the header:
//!
//! * `report_id,patient_id,text`: unlabeled reports;
//! * the same followed by the 14 condition columns: labeled reports;
//! * `Reports` (or `text`) followed by the 14 condition columns, as written
//!   by rule-based labelers;
//! * a lone `Reports` or `text` column.
//!
//! Any labeled layout may end with a `split` column holding `train` or
//! `dev`. Files without ids get `row{n}` ids, one patient per row. Data rows
//! are numbered from 1 in diagnostics.

use std::fs::File;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use reportlabel_core::corpus::{DataError, Dataset, LabeledReport, Provenance, Report, Split};
use reportlabel_core::schema::{encode_label_row, parse_label_value, validate, Condition, LabelVector};
use serde::Serialize;

pub const REPORT_COLUMNS: [&str; 3] = ["report_id", "patient_id", "text"];
pub const SPLIT_COLUMN: &str = "split";
/// Text column name used by rule-based labelers.
pub const RULE_TEXT_COLUMN: &str = "Reports";

#[derive(Debug, thiserror::Error)]
pub enum CsvError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: unrecognized header {found:?}")]
    Header { path: PathBuf, found: Vec<String> },
    #[error("{path}: row {row}: {message}")]
    Row { path: PathBuf, row: usize, message: String },
    #[error("{path}: {source}")]
    Data {
        path: PathBuf,
        #[source]
        source: DataError,
    },
}

impl CsvError {
    /// Data row the error points at, if any.
    pub fn row(&self) -> Option<usize> {
        match self {
            CsvError::Row { row, .. } => Some(*row),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Layout {
    Reports,
    Labeled,
    RuleLabels,
    TextOnly,
}

impl Layout {
    pub fn has_labels(self) -> bool {
        matches!(self, Layout::Labeled | Layout::RuleLabels)
    }

    pub fn has_ids(self) -> bool {
        matches!(self, Layout::Reports | Layout::Labeled)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LoadedCsv {
    /// Unlabeled layouts yield all-Blank label vectors.
    pub dataset: Dataset,
    pub layout: Layout,
    /// Ids of reports whose text is empty after normalization. They are
    /// kept in the dataset.
    pub empty_reports: Vec<String>,
}

fn detect(header: &[String]) -> Option<(Layout, bool)> {
    let (body, has_split) = match header.split_last() {
        Some((last, rest)) if last == SPLIT_COLUMN => (rest, true),
        _ => (header, false),
    };
    let names: Vec<&str> = body.iter().map(String::as_str).collect();
    let conditions: Vec<&str> = Condition::ALL.iter().map(|c| c.name()).collect();
    let is_text = |s: &str| s == RULE_TEXT_COLUMN || s == "text";
    let layout = if names == REPORT_COLUMNS {
        Layout::Reports
    } else if names.len() == 3 + conditions.len() && names[..3] == REPORT_COLUMNS && names[3..] == conditions[..] {
        Layout::Labeled
    } else if names.len() == 1 + conditions.len() && is_text(names[0]) && names[1..] == conditions[..] {
        Layout::RuleLabels
    } else if names.len() == 1 && is_text(names[0]) {
        Layout::TextOnly
    } else {
        return None;
    };
    if has_split && !layout.has_labels() {
        return None;
    }
    Some((layout, has_split))
}

pub fn load_reports_csv(path: &Path, provenance: Provenance) -> Result<LoadedCsv, CsvError> {
    let file = File::open(path).map_err(|source| CsvError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    read_reports_csv(file, path, provenance)
}

/// Reads from any source; `path` only labels diagnostics.
pub fn read_reports_csv<R: Read>(reader: R, path: &Path, provenance: Provenance) -> Result<LoadedCsv, CsvError> {
    let row_err = |row: usize, message: String| CsvError::Row {
        path: path.to_path_buf(),
        row,
        message,
    };
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).flexible(true).from_reader(reader);
    let header: Vec<String> = rdr
        .headers()
        .map_err(|e| row_err(0, e.to_string()))?
        .iter()
        .map(|s| s.trim_start_matches('\u{feff}').to_string())
        .collect();
    let (layout, has_split) = detect(&header).ok_or_else(|| CsvError::Header {
        path: path.to_path_buf(),
        found: header.clone(),
    })?;
    let mut items = Vec::new();
    let mut split = has_split.then(std::collections::BTreeMap::new);
    let mut empty_reports = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        let row = i + 1;
        let record = record.map_err(|e| row_err(row, e.to_string()))?;
        if record.len() != header.len() {
            return Err(row_err(row, format!("expected {} cells, found {}", header.len(), record.len())));
        }
        let (report_id, patient_id, text, label_cells) = if layout.has_ids() {
            (record[0].to_string(), record[1].to_string(), &record[2], 3)
        } else {
            let id = format!("row{row}");
            (id.clone(), id, &record[0], 1)
        };
        let labels = if layout.has_labels() {
            let mut map = std::collections::BTreeMap::new();
            for (k, c) in Condition::ALL.iter().enumerate() {
                let class = parse_label_value(Some(&record[label_cells + k]), c.name()).map_err(|e| row_err(row, e.to_string()))?;
                map.insert(*c, class);
            }
            validate(&map).map_err(|e| row_err(row, e.to_string()))?
        } else {
            LabelVector::blank()
        };
        if let Some(split) = split.as_mut() {
            let side = match record[header.len() - 1].trim() {
                "train" => Split::Train,
                "dev" => Split::Dev,
                other => return Err(row_err(row, format!("split must be train or dev, found {other:?}"))),
            };
            split.insert(report_id.clone(), side);
        }
        let report = Report::new(report_id, patient_id, text);
        if report.text.is_empty() {
            empty_reports.push(report.report_id.clone());
        }
        items.push(LabeledReport {
            report,
            labels,
            provenance,
        });
    }
    let data_err = |source| CsvError::Data {
        path: path.to_path_buf(),
        source,
    };
    let mut dataset = Dataset::new(items).map_err(data_err)?;
    if let Some(split) = split {
        dataset = dataset.with_split(split, 0).map_err(data_err)?;
    }
    Ok(LoadedCsv {
        dataset,
        layout,
        empty_reports,
    })
}

fn labeled_header(with_split: bool) -> Vec<&'static str> {
    let mut header: Vec<&str> = REPORT_COLUMNS.to_vec();
    header.extend(Condition::ALL.iter().map(|c| c.name()));
    if with_split {
        header.push(SPLIT_COLUMN);
    }
    header
}

/// Labeled layout with canonical label cells; a `split` column is added
/// when the dataset has one.
pub fn write_reports<W: Write>(ds: &Dataset, writer: W) -> Result<(), csv::Error> {
    let with_split = ds.split().is_some();
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(labeled_header(with_split))?;
    for item in ds.items() {
        let r = &item.report;
        let mut row: Vec<&str> = vec![&r.report_id, &r.patient_id, &r.text];
        row.extend(encode_label_row(&item.labels));
        if with_split {
            row.push(match ds.split_of(&r.report_id) {
                Some(Split::Dev) => "dev",
                _ => "train",
            });
        }
        wtr.write_record(&row)?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn write_reports_csv(ds: &Dataset, path: &Path) -> Result<(), CsvError> {
    let io_err = |source| CsvError::Io {
        path: path.to_path_buf(),
        source,
    };
    let file = File::create(path).map_err(io_err)?;
    write_reports(ds, std::io::BufWriter::new(file)).map_err(|e| io_err(e.into()))
}

/// Labeled rows for `reports` with `labels` in the same order.
pub fn write_labels<W: Write>(reports: &[&Report], labels: &[LabelVector], writer: W) -> Result<(), csv::Error> {
    assert_eq!(reports.len(), labels.len(), "one label vector per report");
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(labeled_header(false))?;
    for (r, l) in reports.iter().zip(labels) {
        let mut row: Vec<&str> = vec![&r.report_id, &r.patient_id, &r.text];
        row.extend(encode_label_row(l));
        wtr.write_record(&row)?;
    }
    wtr.flush()?;
    Ok(())
}
