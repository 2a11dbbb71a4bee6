use std::collections::HashSet;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use pwls::Dataset64;

use crate::error::{CliError, Result};

pub const INTERCEPT_NAME: &str = "(intercept)";

/// A dataset together with the names of its design columns.
#[derive(Debug, Clone)]
pub struct Loaded {
    pub data: Dataset64,
    /// One name per column of `X`, the intercept first when present.
    pub columns: Vec<String>,
    pub response: String,
}

impl Loaded {
    /// Column index in `X` of a named predictor.
    pub fn column_index(&self, name: &str) -> Result<usize> {
        self.columns
            .iter()
            .position(|c| c == name && c != INTERCEPT_NAME)
            .ok_or_else(|| CliError::UnknownColumn(name.to_string()))
    }
}

/// Reads a delimited file with a header row.
///
/// `predictors = None` selects every column except the response. Row
/// numbers in errors count data rows from 1, as observation ids do.
pub fn load_csv(
    path: &Path,
    response: &str,
    predictors: Option<&[String]>,
    intercept: bool,
    delimiter: u8,
) -> Result<Loaded> {
    let file = std::fs::File::open(path).map_err(|source| CliError::Read {
        path: path.to_path_buf(),
        source,
    })?;
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(delimiter)
        .trim(csv::Trim::All)
        .from_reader(file);
    let header: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
    let find = |name: &str| {
        header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| CliError::UnknownColumn(name.to_string()))
    };
    let y_col = find(response)?;
    let names: Vec<String> = match predictors {
        Some(list) => list.to_vec(),
        None => header.iter().filter(|h| *h != response).cloned().collect(),
    };
    let mut seen = HashSet::new();
    for name in &names {
        if !seen.insert(name.as_str()) {
            return Err(CliError::DuplicateColumn(name.clone()));
        }
        if name == response {
            return Err(CliError::Usage(format!("column {name:?} is the response and a predictor")));
        }
    }
    if names.is_empty() && !intercept {
        return Err(CliError::Usage("no predictors selected".into()));
    }
    let x_cols = names.iter().map(|n| find(n)).collect::<Result<Vec<_>>>()?;

    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut y = Vec::new();
    for (k, record) in reader.records().enumerate() {
        let row = k + 1;
        let record = record?;
        let field = |col: usize| -> Result<f64> {
            let raw = record.get(col).unwrap_or("");
            if raw.is_empty() {
                return Err(CliError::BadRow {
                    row,
                    message: format!("missing value in column {:?}", header[col]),
                });
            }
            match raw.parse::<f64>() {
                Ok(v) if v.is_finite() => Ok(v),
                _ => Err(CliError::BadRow {
                    row,
                    message: format!("non-numeric value {raw:?} in column {:?}", header[col]),
                }),
            }
        };
        y.push(field(y_col)?);
        let mut xr = Vec::with_capacity(x_cols.len() + 1);
        if intercept {
            xr.push(1.0);
        }
        for &c in &x_cols {
            xr.push(field(c)?);
        }
        rows.push(xr);
    }
    let p = names.len() + usize::from(intercept);
    if rows.len() <= p {
        return Err(CliError::Usage(format!(
            "{} usable rows for {p} design columns; need at least {}",
            rows.len(),
            p + 1
        )));
    }
    let x = DMatrix::from_fn(rows.len(), p, |i, j| rows[i][j]);
    let data = Dataset64::new(x, DVector::from_vec(y))?;
    let mut columns = Vec::with_capacity(p);
    if intercept {
        columns.push(INTERCEPT_NAME.to_string());
    }
    columns.extend(names);
    Ok(Loaded {
        data,
        columns,
        response: response.to_string(),
    })
}

/// `"tab"` or `\t` for tabs, otherwise a single ASCII character.
pub fn parse_delimiter(s: &str) -> std::result::Result<u8, String> {
    match s {
        "tab" | "\\t" | "\t" => Ok(b'\t'),
        _ if s.len() == 1 && s.is_ascii() => Ok(s.as_bytes()[0]),
        _ => Err(format!("delimiter must be one ASCII character or \"tab\", got {s:?}")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn file(contents: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        f
    }

    #[test]
    fn intercept_is_prepended() {
        let f = file("x,y\n1,2\n2,3.5\n4,4\n");
        let l = load_csv(f.path(), "y", Some(&["x".into()]), true, b',').unwrap();
        assert_eq!(l.data.x().shape(), (3, 2));
        assert_eq!(l.data.x().column(0).as_slice(), &[1.0, 1.0, 1.0]);
        assert_eq!(l.data.x().column(1).as_slice(), &[1.0, 2.0, 4.0]);
        assert_eq!(l.data.y().as_slice(), &[2.0, 3.5, 4.0]);
        assert_eq!(l.columns, vec![INTERCEPT_NAME, "x"]);
    }

    #[test]
    fn blank_field_names_the_row() {
        let f = file("x,y\n1,2\n2,\n4,4\n5,1\n");
        let err = load_csv(f.path(), "y", None, true, b',').unwrap_err();
        assert!(matches!(err, CliError::BadRow { row: 2, .. }), "{err}");
        assert!(err.to_string().starts_with("row 2:"));
    }

    #[test]
    fn non_numeric_field_is_rejected() {
        let f = file("x,y\n1,2\nabc,3\n4,4\n5,1\n");
        let err = load_csv(f.path(), "y", None, true, b',').unwrap_err();
        assert!(matches!(err, CliError::BadRow { row: 2, .. }));
        let f = file("x,y\n1,2\nNaN,3\n4,4\n5,1\n");
        assert!(matches!(load_csv(f.path(), "y", None, true, b',').unwrap_err(), CliError::BadRow { row: 2, .. }));
    }

    #[test]
    fn unselected_columns_may_be_anything() {
        let f = file("x,note,y\n1,a,2\n2,,3\n4,c,4.5\n");
        let l = load_csv(f.path(), "y", Some(&["x".into()]), true, b',').unwrap();
        assert_eq!(l.data.n(), 3);
    }

    #[test]
    fn duplicate_selection() {
        let f = file("x,y\n1,2\n2,3\n4,4\n");
        let err = load_csv(f.path(), "y", Some(&["x".into(), "x".into()]), true, b',').unwrap_err();
        assert!(err.to_string().contains("column selected twice"));
    }

    #[test]
    fn column_errors() {
        let f = file("x,y\n1,2\n2,3\n4,4\n");
        assert!(matches!(load_csv(f.path(), "z", None, true, b',').unwrap_err(), CliError::UnknownColumn(_)));
        assert!(matches!(
            load_csv(f.path(), "y", Some(&["w".into()]), true, b',').unwrap_err(),
            CliError::UnknownColumn(_)
        ));
        assert!(matches!(
            load_csv(f.path(), "y", Some(&["y".into()]), true, b',').unwrap_err(),
            CliError::Usage(_)
        ));
        assert!(matches!(
            load_csv(Path::new("/nonexistent/data.csv"), "y", None, true, b',').unwrap_err(),
            CliError::Read { .. }
        ));
    }

    #[test]
    fn too_few_rows_and_rank_deficiency() {
        let f = file("x,y\n1,2\n2,3\n");
        assert!(matches!(load_csv(f.path(), "y", None, true, b',').unwrap_err(), CliError::Usage(_)));
        let f = file("a,b,y\n1,2,1\n2,4,3\n3,6,2\n4,8,5\n");
        let err = load_csv(f.path(), "y", None, true, b',').unwrap_err();
        assert_eq!(err.code(), "singular_design");
    }

    #[test]
    fn tab_delimited() {
        let f = file("x\ty\n1\t2\n2\t3\n4\t4.5\n");
        let l = load_csv(f.path(), "y", None, false, parse_delimiter("tab").unwrap()).unwrap();
        assert_eq!(l.columns, vec!["x"]);
        assert!(parse_delimiter("ab").is_err());
    }
}
