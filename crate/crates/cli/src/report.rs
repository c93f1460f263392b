use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

/// Where a number comes from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Oracle {
    ClosedForm,
    Quadrature,
    MonteCarlo,
    PaperIdentity,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Cell {
    Int(i64),
    Num(f64),
    Text(String),
}

impl Cell {
    /// Non-finite values become text so the JSON stays parseable.
    pub fn num(x: f64) -> Self {
        if x.is_finite() {
            Cell::Num(x)
        } else {
            Cell::Text(format!("{x}"))
        }
    }

    pub fn int(n: usize) -> Self {
        Cell::Int(n as i64)
    }

    pub fn text(s: impl Into<String>) -> Self {
        Cell::Text(s.into())
    }

    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Cell::Int(n) => Some(*n as f64),
            Cell::Num(x) => Some(*x),
            Cell::Text(_) => None,
        }
    }

    /// CSV rendering: shortest round-trip form, exponent notation for floats.
    pub fn render(&self) -> String {
        match self {
            Cell::Int(n) => n.to_string(),
            Cell::Num(x) => format!("{x:e}"),
            Cell::Text(s) => s.clone(),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Self {
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    pub fn write_csv(&self, w: impl Write) -> CliResult<()> {
        let mut out = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(w);
        if !self.columns.is_empty() {
            out.write_record(&self.columns)?;
        }
        for row in &self.rows {
            out.write_record(row.iter().map(Cell::render))?;
        }
        out.flush()?;
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ColumnProvenance {
    pub column: String,
    pub oracle: Oracle,
}

/// A plotted series: column `y` against column `x`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeriesSpec {
    pub series: String,
    pub x: String,
    pub y: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Settings {
    pub seed: u64,
    pub horizon: usize,
    pub quadrature: String,
    pub resolution: usize,
    pub convergence: String,
    pub tol: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub experiment: String,
    pub module: String,
    pub fixtures: Vec<String>,
    /// Seconds since the epoch; the only field that varies between runs.
    pub generated_unix: u64,
    pub settings: Settings,
    pub passed: bool,
    /// Names of failing checks, empty when `passed`.
    pub failures: Vec<String>,
    pub table: Table,
    /// One oracle tag per numeric column.
    pub provenance: Vec<ColumnProvenance>,
    pub series: Vec<SeriesSpec>,
    pub details: serde_json::Value,
}

/// Writes `bytes` to a temporary file beside `path` and renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> CliResult<()> {
    let dir = path.parent().filter(|d| !d.as_os_str().is_empty()).unwrap_or(Path::new("."));
    std::fs::create_dir_all(dir)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| CliError::Io(e.to_string()))?;
    Ok(())
}

impl Report {
    /// Writes `<stem>.json` and `<stem>.csv` under `dir`.
    pub fn save(&self, dir: &Path, stem: &str) -> CliResult<(PathBuf, PathBuf)> {
        let json = dir.join(format!("{stem}.json"));
        let csv = dir.join(format!("{stem}.csv"));
        let mut text = serde_json::to_string_pretty(self).map_err(|e| CliError::Report(e.to_string()))?;
        text.push('\n');
        write_atomic(&json, text.as_bytes())?;
        let mut buf = Vec::new();
        self.table.write_csv(&mut buf)?;
        write_atomic(&csv, &buf)?;
        Ok((json, csv))
    }
}

#[derive(Debug, Default, Deserialize)]
struct PlotView {
    #[serde(default)]
    table: Table,
    #[serde(default)]
    series: Vec<SeriesSpec>,
}

/// Long-format `series,x,y` rows for every series of a report. A report
/// without series yields the header alone.
pub fn emit_plot_data(report_json: &str, w: impl Write) -> CliResult<()> {
    let view: PlotView = serde_json::from_str(report_json).map_err(|e| CliError::Report(e.to_string()))?;
    let mut out = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(w);
    out.write_record(["series", "x", "y"])?;
    for s in &view.series {
        let (Some(ix), Some(iy)) = (view.table.column(&s.x), view.table.column(&s.y)) else {
            return Err(CliError::Report(format!("series {} names a missing column", s.series)));
        };
        for row in &view.table.rows {
            let (Some(x), Some(y)) = (row.get(ix), row.get(iy)) else {
                return Err(CliError::Report(format!("short row in series {}", s.series)));
            };
            if x.as_f64().is_some() && y.as_f64().is_some() {
                out.write_record([s.series.clone(), x.render(), y.render()])?;
            }
        }
    }
    out.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn plot(json: &str) -> CliResult<String> {
        let mut buf = Vec::new();
        emit_plot_data(json, &mut buf)?;
        Ok(String::from_utf8(buf).unwrap())
    }

    #[test]
    fn cells_render_deterministically() {
        assert_eq!(Cell::num(0.25).render(), "2.5e-1");
        assert_eq!(Cell::int(12).render(), "12");
        assert_eq!(Cell::num(f64::NAN), Cell::text("NaN"));
        let back: Vec<Cell> = serde_json::from_str("[3, 0.5, \"x\"]").unwrap();
        assert_eq!(back, vec![Cell::Int(3), Cell::Num(0.5), Cell::text("x")]);
    }

    #[test]
    fn plot_data_is_long_format() {
        let json = r#"{"table": {"columns": ["n", "rho"], "rows": [[1, 0.25], [2, 0.5]]},
                       "series": [{"series": "rho_alpha1", "x": "n", "y": "rho"}]}"#;
        assert_eq!(plot(json).unwrap(), "series,x,y\nrho_alpha1,1,2.5e-1\nrho_alpha1,2,5e-1\n");
        assert_eq!(plot("{}").unwrap(), "series,x,y\n");
        assert!(matches!(plot("{not json"), Err(CliError::Report(_))));
        let missing = r#"{"table": {"columns": ["n"], "rows": []}, "series": [{"series": "s", "x": "n", "y": "q"}]}"#;
        assert!(plot(missing).is_err());
    }

    #[test]
    fn csv_quotes_text_with_commas() {
        let mut t = Table::new(&["axiom", "verdict"]);
        t.push(vec![Cell::text("2.1.a"), Cell::text("pass, 3 checked")]);
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "axiom,verdict\n2.1.a,\"pass, 3 checked\"\n");
    }
}
