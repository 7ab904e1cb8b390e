//! Strict numeric CSV ingestion.

use std::io::Read;
use std::path::Path;

use pim::stats::Matrix;

use crate::config::CsvOptions;
use crate::error::{AppError, AppResult};

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub name: String,
    pub features: Matrix,
    pub target: Vec<f64>,
    pub feature_names: Vec<String>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.target.len()
    }

    pub fn is_empty(&self) -> bool {
        self.target.is_empty()
    }

    /// Rows `idx` of the features and target.
    pub fn subset(&self, idx: &[usize]) -> (Matrix, Vec<f64>) {
        let d = self.features.cols();
        let mut data = Vec::with_capacity(idx.len() * d);
        for &i in idx {
            data.extend_from_slice(self.features.row(i));
        }
        let x = Matrix::from_row_major(idx.len(), d, data).expect("sized from the dataset");
        (x, idx.iter().map(|&i| self.target[i]).collect())
    }
}

pub fn load_csv(path: &Path, opts: &CsvOptions) -> AppResult<Dataset> {
    let file = std::fs::File::open(path).map_err(|e| AppError::io(path, e))?;
    let name = path.file_stem().map_or_else(|| "dataset".into(), |s| s.to_string_lossy().into_owned());
    parse_csv(file, &name, opts)
}

/// Comma separated, decimal point, no blank cells. Errors name the 1-based
/// line and column of the offending cell.
pub fn parse_csv<R: Read>(reader: R, name: &str, opts: &CsvOptions) -> AppResult<Dataset> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(opts.has_header).trim(csv::Trim::All).from_reader(reader);
    let header: Option<Vec<String>> = if opts.has_header {
        let h = rdr.headers().map_err(|e| AppError::Data(format!("{name}: {e}")))?;
        Some(h.iter().map(str::to_owned).collect())
    } else {
        None
    };
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let first_line = if opts.has_header { 2 } else { 1 };
    for (r, record) in rdr.records().enumerate() {
        let record = record.map_err(|e| AppError::Data(format!("{name}: {e}")))?;
        let line = first_line + r;
        let row = record
            .iter()
            .enumerate()
            .map(|(c, cell)| {
                if cell.is_empty() {
                    return Err(AppError::Data(format!("{name}: line {line}, column {}: blank cell", c + 1)));
                }
                cell.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| AppError::Data(format!("{name}: line {line}, column {}: not a number: {cell:?}", c + 1)))
            })
            .collect::<AppResult<Vec<f64>>>()?;
        rows.push(row);
    }
    let width = rows.first().map_or(0, Vec::len);
    if rows.is_empty() || width < 2 {
        return Err(AppError::Data(format!("{name}: need at least one row with a feature and a target")));
    }
    let target_col = opts.target_column.unwrap_or(width - 1);
    if target_col >= width {
        return Err(AppError::Data(format!("{name}: target column {target_col} out of range for {width} columns")));
    }
    let d = width - 1;
    let mut data = Vec::with_capacity(rows.len() * d);
    let mut target = Vec::with_capacity(rows.len());
    for row in &rows {
        data.extend(row.iter().enumerate().filter(|(c, _)| *c != target_col).map(|(_, v)| *v));
        target.push(row[target_col]);
    }
    let feature_names = match header {
        Some(h) => h.into_iter().enumerate().filter(|(c, _)| *c != target_col).map(|(_, s)| s).collect(),
        None => (0..width).filter(|&c| c != target_col).map(|c| format!("x{c}")).collect(),
    };
    Ok(Dataset {
        name: name.to_owned(),
        features: Matrix::from_row_major(rows.len(), d, data).map_err(|e| AppError::Data(e.to_string()))?,
        target,
        feature_names,
    })
}

/// Writes a dataset back out with a header and the target last.
pub fn write_csv(path: &Path, data: &Dataset, target_name: &str) -> AppResult<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| AppError::Data(format!("{}: {e}", path.display())))?;
    let io = |e: csv::Error| AppError::Data(format!("{}: {e}", path.display()));
    let mut header = data.feature_names.clone();
    header.push(target_name.to_owned());
    w.write_record(&header).map_err(io)?;
    for r in 0..data.len() {
        let mut row: Vec<String> = data.features.row(r).iter().map(|v| v.to_string()).collect();
        row.push(data.target[r].to_string());
        w.write_record(&row).map_err(io)?;
    }
    w.flush().map_err(|e| AppError::io(path, e))
}
