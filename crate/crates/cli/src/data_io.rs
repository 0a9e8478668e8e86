use std::fs;
use std::path::Path;

use kernel_sdr::data::{standardize, Standardization};
use kernel_sdr::format::format_float;
use kernel_sdr::DataSet;
use nalgebra::{DMatrix, DVector};

use crate::error::{CliError, CliResult};

/// A data file after ingestion.
#[derive(Debug, Clone)]
pub struct LoadedData {
    /// Standardized predictors and the raw response.
    pub data: DataSet,
    /// Names of the retained predictor columns, in file order.
    pub columns: Vec<String>,
    /// Location and scale removed from each retained column.
    pub scaling: Standardization,
    /// Predictor columns dropped for having no spread.
    pub dropped: Vec<String>,
}

/// Reads a headed CSV file. Every column other than `response` is a
/// predictor; predictors are z-scored and constant ones dropped.
pub fn load_csv(path: &Path, response: &str) -> CliResult<LoadedData> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| CliError::Data(format!("cannot open {}: {e}", path.display())))?;
    let header: Vec<String> = reader
        .headers()
        .map_err(|e| CliError::Data(format!("{}: unreadable header: {e}", path.display())))?
        .iter()
        .map(str::to_string)
        .collect();
    let resp_idx = header.iter().position(|h| h == response).ok_or_else(|| {
        CliError::Data(format!(
            "{}: response column '{response}' not found (columns: {})",
            path.display(),
            header.join(",")
        ))
    })?;

    let mut values: Vec<Vec<f64>> = Vec::new();
    for (r, record) in reader.records().enumerate() {
        let row = r + 1;
        let record = record.map_err(|e| CliError::Data(format!("{}: data row {row}: {e}", path.display())))?;
        let mut parsed = Vec::with_capacity(header.len());
        for (j, cell) in record.iter().enumerate() {
            let v = cell.parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(|| {
                let what = if cell.is_empty() { "blank cell" } else { "non-numeric cell" };
                CliError::Data(format!(
                    "{}: {what} '{cell}' at data row {row}, column '{}'",
                    path.display(),
                    header[j]
                ))
            })?;
            parsed.push(v);
        }
        values.push(parsed);
    }
    let n = values.len();
    if n < 2 {
        return Err(CliError::Data(format!("{}: fewer than two data rows", path.display())));
    }

    let predictors: Vec<usize> = (0..header.len()).filter(|&j| j != resp_idx).collect();
    let raw = DMatrix::from_fn(n, predictors.len(), |i, k| values[i][predictors[k]]);
    let full = Standardization::from_columns(&raw);
    let keep: Vec<usize> = (0..predictors.len()).filter(|&k| full.sd[k] > 0.0).collect();
    let dropped: Vec<String> = (0..predictors.len())
        .filter(|k| !keep.contains(k))
        .map(|k| header[predictors[k]].clone())
        .collect();
    if keep.is_empty() {
        return Err(CliError::Data(format!("{}: every predictor column is constant", path.display())));
    }
    let kept = raw.select_columns(keep.iter());
    let (x, scaling) = standardize(&kept);
    let y = DVector::from_fn(n, |i, _| values[i][resp_idx]);
    Ok(LoadedData {
        data: DataSet::new(x, y)?,
        columns: keep.iter().map(|&k| header[predictors[k]].clone()).collect(),
        scaling,
        dropped,
    })
}

/// Writes a CSV file from a header and rows of already formatted cells.
pub fn write_csv(path: &Path, header: &[String], rows: &[Vec<String>]) -> CliResult<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    let fail = |e: csv::Error| CliError::Data(format!("cannot encode {}: {e}", path.display()));
    w.write_record(header).map_err(fail)?;
    for row in rows {
        w.write_record(row).map_err(fail)?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| CliError::Data(format!("cannot encode {}: {e}", path.display())))?;
    fs::write(path, bytes).map_err(|e| CliError::Data(format!("cannot write {}: {e}", path.display())))
}

/// Rows of a matrix formatted to 10 significant digits.
pub fn matrix_rows(m: &DMatrix<f64>) -> Vec<Vec<String>> {
    m.row_iter()
        .map(|r| r.iter().map(|v| format_float(*v)).collect())
        .collect()
}

/// Rows of a matrix in the shortest form that reads back exactly.
pub fn exact_rows(m: &DMatrix<f64>) -> Vec<Vec<String>> {
    m.row_iter()
        .map(|r| r.iter().map(|v| format!("{v}")).collect())
        .collect()
}

pub fn numbered(prefix: &str, k: usize) -> Vec<String> {
    (1..=k).map(|i| format!("{prefix}{i}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn file(name: &str, body: &str) -> std::path::PathBuf {
        let dir = std::env::temp_dir().join(format!("ksdr-io-{}-{name}", std::process::id()));
        fs::create_dir_all(&dir).unwrap();
        let p = dir.join("in.csv");
        fs::write(&p, body).unwrap();
        p
    }

    #[test]
    fn three_rows_two_predictors() {
        let p = file("basic", "a,b,y\n1,2,3\n2,5,4\n3,4,8\n");
        let d = load_csv(&p, "y").unwrap();
        assert_eq!(d.data.x().shape(), (3, 2));
        assert_eq!(d.data.y().as_slice(), &[3.0, 4.0, 8.0]);
        assert_eq!(d.columns, vec!["a", "b"]);
        assert!(d.data.x().column(0).sum().abs() < 1e-12);
    }

    #[test]
    fn constant_columns_are_dropped() {
        let p = file("const", "a,c,y\n1,7,3\n2,7,4\n3,7,8\n");
        let d = load_csv(&p, "y").unwrap();
        assert_eq!(d.dropped, vec!["c"]);
        assert_eq!(d.data.p(), 1);
    }

    #[test]
    fn blank_cell_names_row_and_column() {
        let p = file("blank", "a,b,y\n1,2,3\n2,,4\n");
        let msg = load_csv(&p, "y").unwrap_err().to_string();
        assert!(msg.contains("row 2") && msg.contains("'b'"), "{msg}");
    }

    #[test]
    fn missing_response_and_file() {
        let p = file("resp", "a,b\n1,2\n3,4\n");
        assert!(matches!(load_csv(&p, "y"), Err(CliError::Data(_))));
        assert!(load_csv(Path::new("/nonexistent/ksdr.csv"), "y").is_err());
    }

    #[test]
    fn written_data_reload_exactly() {
        let x = DMatrix::from_row_slice(4, 2, &[0.1, 3.0, -1.7, 2.5, 2.2, -0.4, 1.0 / 3.0, 9.0]);
        let dir = std::env::temp_dir().join(format!("ksdr-io-{}-rt", std::process::id()));
        fs::create_dir_all(&dir).unwrap();
        let path = dir.join("rt.csv");
        let mut rows = exact_rows(&x);
        for (i, r) in rows.iter_mut().enumerate() {
            r.push(format!("{}", i as f64));
        }
        let mut header = numbered("x", 2);
        header.push("y".to_string());
        write_csv(&path, &header, &rows).unwrap();
        let back = load_csv(&path, "y").unwrap();
        let (z, _) = standardize(&x);
        assert!((back.data.x() - z).amax() < 1e-12);
    }
}
