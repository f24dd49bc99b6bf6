//! CSV and JSON file formats.
//!
//! Sample files hold one subject per row and one grid point per column. A
//! first row that does not parse as numbers is treated as a header. Numbers are
//! written with the shortest representation that round-trips exactly.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{FofrError, Result};
use crate::grid::{Curve, Grid, Surface};
use crate::inference::BandResult;

fn data_error(path: &Path, message: impl Into<String>) -> FofrError {
    FofrError::Data {
        path: path.to_path_buf(),
        message: message.into(),
    }
}

fn io_error(path: &Path, source: std::io::Error) -> FofrError {
    FofrError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn parse_row(record: &csv::StringRecord) -> Option<Vec<f64>> {
    record.iter().map(|f| f.trim().parse::<f64>().ok()).collect()
}

/// Read a numeric CSV into an `n x G` matrix.
pub fn read_matrix_csv(path: &Path) -> Result<DMatrix<f64>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_path(path)
        .map_err(|e| match e.into_kind() {
            csv::ErrorKind::Io(io) => io_error(path, io),
            other => data_error(path, format!("{other:?}")),
        })?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record = record.map_err(|e| data_error(path, e.to_string()))?;
        if record.iter().all(|f| f.trim().is_empty()) {
            continue;
        }
        match parse_row(&record) {
            Some(row) => {
                if let Some(first) = rows.first() {
                    if row.len() != first.len() {
                        return Err(data_error(
                            path,
                            format!("row {} has {} fields, expected {}", line + 1, row.len(), first.len()),
                        ));
                    }
                }
                if row.iter().any(|v| !v.is_finite()) {
                    return Err(data_error(path, format!("non-finite value in row {}", line + 1)));
                }
                rows.push(row);
            }
            None if line == 0 => continue,
            None => return Err(data_error(path, format!("non-numeric field in row {}", line + 1))),
        }
    }
    let first = rows.first().ok_or_else(|| data_error(path, "no data rows"))?;
    let cols = first.len();
    Ok(DMatrix::from_row_iterator(rows.len(), cols, rows.into_iter().flatten()))
}

/// Read a single curve stored as one row or one column.
pub fn read_vector_csv(path: &Path) -> Result<DVector<f64>> {
    let m = read_matrix_csv(path)?;
    if m.nrows() == 1 || m.ncols() == 1 {
        Ok(DVector::from_column_slice(m.as_slice()))
    } else {
        Err(data_error(
            path,
            format!("expected a single row or column, got {} x {}", m.nrows(), m.ncols()),
        ))
    }
}

/// Read a `G x G` surface stored as a square matrix (rows `s`, columns `t`).
pub fn read_surface_csv(path: &Path, grid: &Grid) -> Result<Surface> {
    let m = read_matrix_csv(path)?;
    if m.nrows() != grid.size() || m.ncols() != grid.size() {
        return Err(data_error(
            path,
            format!("expected a {g} x {g} matrix, got {} x {}", m.nrows(), m.ncols(), g = grid.size()),
        ));
    }
    Surface::new(grid.clone(), m)
}

fn write_lines(path: &Path, header: &str, body: impl FnOnce(&mut dyn Write) -> std::io::Result<()>) -> Result<()> {
    let file = File::create(path).map_err(|e| io_error(path, e))?;
    let mut out = BufWriter::new(file);
    let result = writeln!(out, "{header}").and_then(|_| body(&mut out)).and_then(|_| out.flush());
    result.map_err(|e| io_error(path, e))
}

/// `s,t,value` with `G²` data rows.
pub fn write_surface_csv(path: &Path, surface: &Surface) -> Result<()> {
    let pts = surface.grid.points();
    write_lines(path, "s,t,value", |out| {
        for (i, s) in pts.iter().enumerate() {
            for (j, t) in pts.iter().enumerate() {
                writeln!(out, "{s},{t},{}", surface.values[(i, j)])?;
            }
        }
        Ok(())
    })
}

/// `t,value` with `G` data rows.
pub fn write_curve_csv(path: &Path, curve: &Curve) -> Result<()> {
    write_lines(path, "t,value", |out| {
        for (t, v) in curve.grid.points().iter().zip(curve.values.iter()) {
            writeln!(out, "{t},{v}")?;
        }
        Ok(())
    })
}

/// Columns `t_or_st,center,lower,upper`; a surface point is written as `s:t`.
pub fn write_surface_band_csv(path: &Path, band: &BandResult<Surface>) -> Result<()> {
    let pts = band.center.grid.points();
    write_lines(path, "t_or_st,center,lower,upper", |out| {
        for (i, s) in pts.iter().enumerate() {
            for (j, t) in pts.iter().enumerate() {
                writeln!(
                    out,
                    "{s}:{t},{},{},{}",
                    band.center.values[(i, j)],
                    band.lower.values[(i, j)],
                    band.upper.values[(i, j)]
                )?;
            }
        }
        Ok(())
    })
}

/// Columns `t_or_st,center,lower,upper` over the `G` grid points.
pub fn write_curve_band_csv(path: &Path, band: &BandResult<Curve>) -> Result<()> {
    write_lines(path, "t_or_st,center,lower,upper", |out| {
        for (i, t) in band.center.grid.points().iter().enumerate() {
            writeln!(
                out,
                "{t},{},{},{}",
                band.center.values[i], band.lower.values[i], band.upper.values[i]
            )?;
        }
        Ok(())
    })
}

/// Write a header row and then one row per entry of `rows`.
pub fn write_table_csv(path: &Path, header: &[&str], rows: &[Vec<f64>]) -> Result<()> {
    write_lines(path, &header.join(","), |out| {
        for row in rows {
            let line: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            writeln!(out, "{}", line.join(","))?;
        }
        Ok(())
    })
}

/// Pretty-printed JSON.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    std::fs::write(path, text + "\n").map_err(|e| io_error(path, e))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| io_error(path, e))?;
    serde_json::from_str(&text).map_err(|e| data_error(path, e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::make_grid;
    use crate::sim::{DgpSpec, Dgp, ErrorSetting, MonteCarloReport};

    fn tmp() -> tempfile::TempDir {
        tempfile::tempdir().unwrap()
    }

    #[test]
    fn reads_with_and_without_header() {
        let dir = tmp();
        let a = dir.path().join("a.csv");
        std::fs::write(&a, "t1,t2,t3\n1,2,3\n4,5,6\n").unwrap();
        let b = dir.path().join("b.csv");
        std::fs::write(&b, "1,2,3\n4,5,6\n").unwrap();
        let ma = read_matrix_csv(&a).unwrap();
        assert_eq!(ma, read_matrix_csv(&b).unwrap());
        assert_eq!(ma.shape(), (2, 3));
        assert_eq!(ma[(1, 0)], 4.0);
    }

    #[test]
    fn ragged_rows_are_rejected() {
        let dir = tmp();
        let p = dir.path().join("r.csv");
        std::fs::write(&p, "1,2,3\n4,5\n").unwrap();
        assert!(matches!(read_matrix_csv(&p), Err(FofrError::Data { .. })));
        std::fs::write(&p, "1,2\n3,x\n").unwrap();
        assert!(matches!(read_matrix_csv(&p), Err(FofrError::Data { .. })));
        assert!(matches!(
            read_matrix_csv(&dir.path().join("missing.csv")),
            Err(FofrError::Io { .. })
        ));
    }

    #[test]
    fn surface_csv_shape_and_precision() {
        let dir = tmp();
        let g = make_grid(7).unwrap();
        let s = Surface::from_fn(&g, |s, t| (s * 3.0).sin() / (1.0 + t) + 1e-17);
        let p = dir.path().join("s.csv");
        write_surface_csv(&p, &s).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        assert!(!text.contains('\r'));
        let m = read_matrix_csv(&p).unwrap();
        assert_eq!(m.nrows(), 49);
        for r in 0..49 {
            let (i, j) = (r / 7, r % 7);
            assert_eq!(m[(r, 0)], g.points()[i]);
            assert_eq!(m[(r, 1)], g.points()[j]);
            assert_eq!(m[(r, 2)], s.values[(i, j)]);
        }
    }

    #[test]
    fn band_csv_columns() {
        let dir = tmp();
        let g = make_grid(5).unwrap();
        let c = Curve::from_fn(&g, |t| t * t);
        let band = BandResult {
            lower: Curve { grid: g.clone(), values: c.values.add_scalar(-0.5) },
            upper: Curve { grid: g.clone(), values: c.values.add_scalar(0.5) },
            center: c,
            alpha: 0.05,
            quantile: 1.0,
            half_width: 0.5,
            q: 20,
        };
        let p = dir.path().join("b.csv");
        write_curve_band_csv(&p, &band).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        assert_eq!(text.lines().next().unwrap(), "t_or_st,center,lower,upper");
        assert_eq!(text.lines().count(), 6);
    }

    #[test]
    fn report_json_round_trip() {
        let dir = tmp();
        let spec = DgpSpec::new(Dgp::Three, 30, ErrorSetting::Ii, 99).unwrap();
        let report = crate::sim::run_estimation_study(&DgpSpec { grid_size: 24, ..spec }, 2).unwrap();
        let p = dir.path().join("r.json");
        write_json(&p, &report).unwrap();
        let back: MonteCarloReport = read_json(&p).unwrap();
        assert_eq!(back, report);
    }

    #[test]
    fn matrix_round_trip_is_exact() {
        let dir = tmp();
        let rows = vec![vec![0.1 + 0.2, -1.0 / 3.0, 1e-300], vec![std::f64::consts::PI, 2.5e17, -0.0]];
        let p = dir.path().join("t.csv");
        write_table_csv(&p, &["a", "b", "c"], &rows).unwrap();
        let m = read_matrix_csv(&p).unwrap();
        for (i, row) in rows.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                assert_eq!(m[(i, j)].to_bits(), v.to_bits());
            }
        }
    }
}
