//! Long-format delimited input.
//!
//! Each row is one subject at one arm (unpaired) or one timepoint (paired),
//! keyed by a subject column and a group column. Every other column is a
//! numeric variable. The response may live in the same file as the
//! candidates or in its own file; rows are matched on (subject, group).

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};

use csv::{ReaderBuilder, StringRecord, Trim};

use crate::error::{Error, Result};
use crate::pipeline::{Candidate, Dataset};
use crate::rankstats::{Design, PairedSample, TwoArmSample, Variable};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ColumnMap {
    pub subject: String,
    pub group: String,
    /// Response column; may be omitted only when candidates come from their
    /// own file and the response file has exactly one value column.
    pub response: Option<String>,
    pub treated_label: String,
    pub control_label: String,
    pub post_label: String,
    pub pre_label: String,
}

impl Default for ColumnMap {
    fn default() -> Self {
        ColumnMap {
            subject: "subject".into(),
            group: "group".into(),
            response: None,
            treated_label: "treated".into(),
            control_label: "control".into(),
            post_label: "post".into(),
            pre_label: "pre".into(),
        }
    }
}

impl ColumnMap {
    fn labels(&self, design: Design) -> (&str, &str) {
        match design {
            Design::Unpaired => (&self.treated_label, &self.control_label),
            Design::Paired => (&self.post_label, &self.pre_label),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IngestSpec {
    pub response_path: PathBuf,
    /// Candidates are read from the response file when absent.
    pub candidates_path: Option<PathBuf>,
    pub design: Design,
    pub columns: ColumnMap,
    /// Overrides detection from the file extension.
    pub delimiter: Option<u8>,
}

impl IngestSpec {
    pub fn new(response_path: impl Into<PathBuf>, design: Design) -> Self {
        IngestSpec {
            response_path: response_path.into(),
            candidates_path: None,
            design,
            columns: ColumnMap::default(),
            delimiter: None,
        }
    }

    fn delimiter_for(&self, path: &Path) -> u8 {
        self.delimiter.unwrap_or_else(|| delimiter_for_path(path))
    }
}

/// Tab for .tsv, .tab and .txt; comma otherwise.
pub fn delimiter_for_path(path: &Path) -> u8 {
    match path
        .extension()
        .and_then(|e| e.to_str())
        .map(|e| e.to_ascii_lowercase())
        .as_deref()
    {
        Some("tsv" | "tab" | "txt") => b'\t',
        _ => b',',
    }
}

pub fn ingest(spec: &IngestSpec) -> Result<Dataset> {
    let read = |path: &Path| {
        fs::read(path).map_err(|e| Error::Ingest {
            path: path.to_path_buf(),
            line: 0,
            message: format!("cannot read file: {e}"),
        })
    };
    let response = read(&spec.response_path)?;
    let candidates = spec.candidates_path.as_deref().map(read).transpose()?;
    ingest_bytes(spec, &response, candidates.as_deref())
}

/// Same as [`ingest`] with the file contents already in memory. The paths
/// in `spec` are used for delimiter detection and diagnostics only.
pub fn ingest_bytes(
    spec: &IngestSpec,
    response: &[u8],
    candidates: Option<&[u8]>,
) -> Result<Dataset> {
    let resp_table = Table::parse(
        &spec.response_path,
        response,
        spec.delimiter_for(&spec.response_path),
    )?;
    let cols = &spec.columns;
    let resp_keys = KeyedRows::build(&resp_table, spec)?;

    let value_columns: Vec<usize> = resp_table.value_columns(cols);
    let response_col = match &cols.response {
        Some(name) => resp_table.column(name)?,
        None if candidates.is_some() && value_columns.len() == 1 => value_columns[0],
        None => {
            return Err(resp_table.error(
                1,
                "cannot tell which column holds the response; name it explicitly".into(),
            ))
        }
    };
    let order = resp_keys.order(&resp_table, spec.design)?;
    let response_values =
        resp_table.numeric_column(response_col, order.iter().map(|&(_, row)| row))?;

    let cand_path = spec
        .candidates_path
        .as_deref()
        .unwrap_or(&spec.response_path);
    let owned;
    let (cand_table, cand_rows): (&Table, Vec<usize>) = match candidates {
        None => (&resp_table, order.iter().map(|&(_, row)| row).collect()),
        Some(bytes) => {
            owned = Table::parse(cand_path, bytes, spec.delimiter_for(cand_path))?;
            let cand_keys = KeyedRows::build(&owned, spec)?;
            let rows = cand_keys.align_to(&owned, &resp_keys, &resp_table, &order, spec)?;
            (&owned, rows)
        }
    };
    if cand_table.rows.is_empty() {
        return Err(cand_table.error(1, "no data rows".into()));
    }
    // A copy of the response in the candidate file is not a candidate.
    let response_name = &resp_table.headers[response_col];
    let cand_cols: Vec<usize> = cand_table
        .value_columns(cols)
        .into_iter()
        .filter(|&c| &cand_table.headers[c] != response_name)
        .collect();
    if cand_cols.is_empty() {
        return Err(cand_table.error(1, "no candidate columns".into()));
    }

    let split = |values: Vec<f64>| -> Result<Variable> {
        let half = match spec.design {
            Design::Unpaired => resp_keys.first_count(),
            Design::Paired => values.len() / 2,
        };
        let (first, second) = values.split_at(half);
        Ok(match spec.design {
            Design::Unpaired => {
                Variable::Unpaired(TwoArmSample::new(first.to_vec(), second.to_vec())?)
            }
            Design::Paired => Variable::Paired(PairedSample::new(first.to_vec(), second.to_vec())?),
        })
    };

    let candidates = cand_cols
        .iter()
        .map(|&c| {
            let values = cand_table.numeric_column(c, cand_rows.iter().copied())?;
            Ok(Candidate {
                name: cand_table.headers[c].clone(),
                values: split(values)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let subject_ids: Vec<String> = match spec.design {
        Design::Unpaired => order.iter().map(|(k, _)| k.subject.clone()).collect(),
        Design::Paired => order[..order.len() / 2]
            .iter()
            .map(|(k, _)| k.subject.clone())
            .collect(),
    };
    Dataset::new(split(response_values)?, candidates, subject_ids)
}

struct Table {
    origin: PathBuf,
    headers: Vec<String>,
    /// (1-based line, record)
    rows: Vec<(u64, StringRecord)>,
}

impl Table {
    fn parse(origin: &Path, bytes: &[u8], delimiter: u8) -> Result<Table> {
        let csv_error = |e: csv::Error| {
            let line = e.position().map(|p| p.line()).unwrap_or(0);
            let message = match e.kind() {
                csv::ErrorKind::UnequalLengths {
                    expected_len, len, ..
                } => {
                    format!("expected {expected_len} fields, found {len}")
                }
                csv::ErrorKind::Utf8 { .. } => "invalid UTF-8".to_string(),
                _ => e.to_string(),
            };
            Error::Ingest {
                path: origin.to_path_buf(),
                line,
                message,
            }
        };
        let mut reader = ReaderBuilder::new()
            .delimiter(delimiter)
            .has_headers(true)
            .trim(Trim::All)
            .comment(None)
            .from_reader(bytes);
        let headers: Vec<String> = reader
            .headers()
            .map_err(csv_error)?
            .iter()
            .map(str::to_string)
            .collect();
        let table_err = |line, message| Error::Ingest {
            path: origin.to_path_buf(),
            line,
            message,
        };
        if headers.is_empty() || headers.iter().all(|h| h.is_empty()) {
            return Err(table_err(1, "missing header row".into()));
        }
        let mut seen = HashMap::new();
        for (i, h) in headers.iter().enumerate() {
            if h.is_empty() {
                return Err(table_err(1, format!("column {} has an empty name", i + 1)));
            }
            if let Some(prev) = seen.insert(h.as_str(), i) {
                return Err(table_err(
                    1,
                    format!(
                        "column '{h}' appears twice (columns {} and {})",
                        prev + 1,
                        i + 1
                    ),
                ));
            }
        }
        let mut rows = Vec::new();
        for record in reader.records() {
            let record = record.map_err(csv_error)?;
            let line = record.position().map(|p| p.line()).unwrap_or(0);
            // Blank lines are skipped by the reader; a lone empty field is not data.
            if record.len() == 1 && record[0].is_empty() && headers.len() > 1 {
                continue;
            }
            rows.push((line, record));
        }
        Ok(Table {
            origin: origin.to_path_buf(),
            headers,
            rows,
        })
    }

    fn error(&self, line: u64, message: String) -> Error {
        Error::Ingest {
            path: self.origin.clone(),
            line,
            message,
        }
    }

    fn column(&self, name: &str) -> Result<usize> {
        self.headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| self.error(1, format!("no column named '{name}'")))
    }

    fn value_columns(&self, cols: &ColumnMap) -> Vec<usize> {
        (0..self.headers.len())
            .filter(|&i| self.headers[i] != cols.subject && self.headers[i] != cols.group)
            .collect()
    }

    fn numeric_column(&self, col: usize, rows: impl Iterator<Item = usize>) -> Result<Vec<f64>> {
        rows.map(|r| {
            let (line, record) = &self.rows[r];
            let cell = &record[col];
            let name = &self.headers[col];
            if cell.is_empty() {
                return Err(self.error(*line, format!("missing value in column '{name}'")));
            }
            match cell.parse::<f64>() {
                Ok(v) if v.is_finite() => Ok(v),
                _ => Err(self.error(
                    *line,
                    format!("non-numeric value '{cell}' in column '{name}'"),
                )),
            }
        })
        .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
struct Key {
    subject: String,
    /// Treated / post when true.
    first: bool,
}

struct KeyedRows {
    /// Keys in file order with their row index.
    keys: Vec<(Key, usize)>,
    index: HashMap<Key, usize>,
}

impl KeyedRows {
    fn build(table: &Table, spec: &IngestSpec) -> Result<KeyedRows> {
        let cols = &spec.columns;
        let subject_col = table.column(&cols.subject)?;
        let group_col = table.column(&cols.group)?;
        let (first_label, second_label) = cols.labels(spec.design);
        let mut keys = Vec::with_capacity(table.rows.len());
        let mut index: HashMap<Key, usize> = HashMap::with_capacity(table.rows.len());
        let mut arm_of: HashMap<String, (bool, u64)> = HashMap::new();
        for (r, (line, record)) in table.rows.iter().enumerate() {
            let subject = &record[subject_col];
            if subject.is_empty() {
                return Err(table.error(
                    *line,
                    format!("missing subject id in column '{}'", cols.subject),
                ));
            }
            let label = &record[group_col];
            let first = if label == first_label {
                true
            } else if label == second_label {
                false
            } else {
                return Err(table.error(
                    *line,
                    format!(
                        "unknown group '{label}' (expected '{first_label}' or '{second_label}')"
                    ),
                ));
            };
            let key = Key {
                subject: subject.to_string(),
                first,
            };
            if let Some(&prev) = index.get(&key) {
                return Err(table.error(
                    *line,
                    format!(
                        "duplicate row for subject '{subject}' at '{label}' (first on line {})",
                        table.rows[prev].0
                    ),
                ));
            }
            if spec.design == Design::Unpaired {
                if let Some(&(arm, prev_line)) = arm_of.get(subject) {
                    if arm != first {
                        return Err(table.error(
                            *line,
                            format!("subject '{subject}' appears in both arms (also on line {prev_line})"),
                        ));
                    }
                }
                arm_of.insert(subject.to_string(), (first, *line));
            }
            index.insert(key.clone(), r);
            keys.push((key, r));
        }
        if keys.is_empty() {
            return Err(table.error(1, "no data rows".into()));
        }
        Ok(KeyedRows { keys, index })
    }

    fn first_count(&self) -> usize {
        self.keys.iter().filter(|(k, _)| k.first).count()
    }

    /// Canonical row order: treated then control, or every subject's post
    /// row followed by every subject's pre row in first-appearance order.
    fn order(&self, table: &Table, design: Design) -> Result<Vec<(Key, usize)>> {
        match design {
            Design::Unpaired => {
                let mut out: Vec<(Key, usize)> =
                    self.keys.iter().filter(|(k, _)| k.first).cloned().collect();
                out.extend(self.keys.iter().filter(|(k, _)| !k.first).cloned());
                Ok(out)
            }
            Design::Paired => {
                let mut subjects: Vec<&str> = Vec::new();
                let mut seen = std::collections::HashSet::new();
                for (k, _) in &self.keys {
                    if seen.insert(k.subject.as_str()) {
                        subjects.push(&k.subject);
                    }
                }
                let mut post = Vec::with_capacity(subjects.len());
                let mut pre = Vec::with_capacity(subjects.len());
                for s in subjects {
                    let find = |first: bool| {
                        let key = Key {
                            subject: s.to_string(),
                            first,
                        };
                        self.index.get(&key).map(|&r| (key, r))
                    };
                    match (find(true), find(false)) {
                        (Some(a), Some(b)) => {
                            post.push(a);
                            pre.push(b);
                        }
                        (Some((_, r)), None) | (None, Some((_, r))) => {
                            return Err(table.error(
                                table.rows[r].0,
                                format!("subject '{s}' does not have exactly two timepoints"),
                            ));
                        }
                        (None, None) => unreachable!(),
                    }
                }
                post.extend(pre);
                Ok(post)
            }
        }
    }

    /// Row of this table for each key of `order`, rejecting keys present on
    /// only one side.
    fn align_to(
        &self,
        table: &Table,
        reference: &KeyedRows,
        ref_table: &Table,
        order: &[(Key, usize)],
        spec: &IngestSpec,
    ) -> Result<Vec<usize>> {
        let (first_label, second_label) = spec.columns.labels(spec.design);
        let label = |k: &Key| if k.first { first_label } else { second_label };
        for (k, r) in &self.keys {
            if !reference.index.contains_key(k) {
                return Err(table.error(
                    table.rows[*r].0,
                    format!(
                        "subject '{}' at '{}' does not appear in {}",
                        k.subject,
                        label(k),
                        ref_table.origin.display()
                    ),
                ));
            }
        }
        order
            .iter()
            .map(|(k, ref_row)| {
                self.index.get(k).copied().ok_or_else(|| {
                    ref_table.error(
                        ref_table.rows[*ref_row].0,
                        format!(
                            "subject '{}' at '{}' has no row in {}",
                            k.subject,
                            label(k),
                            table.origin.display()
                        ),
                    )
                })
            })
            .collect()
    }
}

/// Writes `data` in the long format read by [`ingest`], with the response
/// in a column named `response` and full-precision values.
pub fn write_dataset<W: std::io::Write>(data: &Dataset, out: W, delimiter: u8) -> Result<()> {
    let cols = ColumnMap::default();
    let reserved = [cols.subject.as_str(), cols.group.as_str(), "response"];
    if let Some(c) = data
        .candidates()
        .iter()
        .find(|c| reserved.contains(&c.name.as_str()))
    {
        return Err(Error::InvalidInput(format!(
            "candidate name '{}' collides with a key column",
            c.name
        )));
    }
    let (first_label, second_label) = cols.labels(data.design());
    let mut w = csv::WriterBuilder::new()
        .delimiter(delimiter)
        .from_writer(out);
    let mut header = vec![
        cols.subject.clone(),
        cols.group.clone(),
        "response".to_string(),
    ];
    header.extend(data.candidates().iter().map(|c| c.name.clone()));
    w.write_record(&header).map_err(csv_write_error)?;

    let columns: Vec<Vec<f64>> = std::iter::once(data.response())
        .chain(data.candidates().iter().map(|c| &c.values))
        .map(|v| v.observations().collect())
        .collect();
    let (n_first, _) = data.shape();
    let ids = data.subject_ids();
    let rows = columns[0].len();
    for i in 0..rows {
        let (subject, label) = match data.design() {
            Design::Unpaired => (
                &ids[i],
                if i < n_first {
                    first_label
                } else {
                    second_label
                },
            ),
            Design::Paired => {
                let n = ids.len();
                (&ids[i % n], if i < n { first_label } else { second_label })
            }
        };
        let mut record = vec![subject.clone(), label.to_string()];
        record.extend(columns.iter().map(|c| c[i].to_string()));
        w.write_record(&record).map_err(csv_write_error)?;
    }
    w.flush()?;
    Ok(())
}

pub(crate) fn csv_write_error(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::InvalidInput(format!("{other:?}")),
    }
}
