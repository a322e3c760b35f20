use std::path::Path;

use anyhow::{bail, Context, Result};
use ndarray::Array2;
use spnorm_core::Sample;

/// Reads a numeric CSV: rows are observations, columns variables. A first
/// row that does not parse as numbers is taken as a header.
pub fn read_matrix(path: &Path) -> Result<Array2<f64>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_path(path)
        .with_context(|| format!("cannot open {}", path.display()))?;
    let mut values = Vec::new();
    let mut width = None;
    let mut rows = 0usize;
    for (i, record) in reader.records().enumerate() {
        let record = record.with_context(|| format!("{}: malformed CSV", path.display()))?;
        let parsed: Result<Vec<f64>, _> = record.iter().map(str::parse::<f64>).collect();
        let row = match parsed {
            Ok(row) => row,
            Err(_) if i == 0 => continue,
            Err(_) => bail!("{}: row {} has a non-numeric field", path.display(), i + 1),
        };
        if let Some((col, v)) = row.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            bail!(
                "{}: row {}, column {} is {v}; missing or infinite values are not allowed",
                path.display(),
                i + 1,
                col + 1
            );
        }
        match width {
            None => width = Some(row.len()),
            Some(w) if w != row.len() => {
                bail!(
                    "{}: row {} has {} fields, expected {w}",
                    path.display(),
                    i + 1,
                    row.len()
                )
            }
            _ => {}
        }
        values.extend(row);
        rows += 1;
    }
    let Some(width) = width else {
        bail!("{}: no numeric rows", path.display());
    };
    Ok(Array2::from_shape_vec((rows, width), values)?)
}

pub fn read_sample(path: &Path) -> Result<Sample> {
    Ok(Sample::new(read_matrix(path)?)?)
}

/// A vector given as one CSV row or one CSV column.
pub fn read_vector(path: &Path) -> Result<Vec<f64>> {
    let m = read_matrix(path)?;
    if m.nrows() != 1 && m.ncols() != 1 {
        bail!(
            "{}: expected a single row or column, found {}×{}",
            path.display(),
            m.nrows(),
            m.ncols()
        );
    }
    Ok(m.iter().copied().collect())
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
    fn header_is_detected() {
        let f = file("a,b\n1,2\n3,4\n");
        assert_eq!(
            read_matrix(f.path()).unwrap(),
            ndarray::array![[1.0, 2.0], [3.0, 4.0]]
        );
        let f = file("1,2\n3,4\n");
        assert_eq!(read_matrix(f.path()).unwrap().nrows(), 2);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(read_matrix(file("1,2\n3,NaN\n").path()).is_err());
        assert!(read_matrix(file("1,2\n3,x\n").path()).is_err());
        assert!(read_matrix(file("1,2\n3\n").path()).is_err());
        assert!(read_matrix(file("a,b\n").path()).is_err());
        assert!(read_matrix(file("1,2\n,4\n").path()).is_err());
    }

    #[test]
    fn vectors_from_row_or_column() {
        assert_eq!(
            read_vector(file("1,2,3\n").path()).unwrap(),
            vec![1.0, 2.0, 3.0]
        );
        assert_eq!(read_vector(file("1\n2\n").path()).unwrap(), vec![1.0, 2.0]);
        assert!(read_vector(file("1,2\n3,4\n").path()).is_err());
    }
}
