use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::config::{CliError, CliResult};
use crate::Format;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Reproducibility stamp carried by every report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Meta {
    pub version: String,
    pub config_sha256: String,
    pub seed: Option<u64>,
    pub n_sims: Option<u64>,
}

impl Meta {
    pub fn new(config_sha256: &str, seed: Option<u64>, n_sims: Option<u64>) -> Self {
        Self { version: VERSION.to_string(), config_sha256: config_sha256.to_string(), seed, n_sims }
    }

    fn csv_header() -> [&'static str; 4] {
        ["n_sims", "seed", "config_sha256", "version"]
    }

    fn csv_cells(&self) -> Vec<String> {
        vec![
            self.n_sims.map(|v| v.to_string()).unwrap_or_default(),
            self.seed.map(|v| v.to_string()).unwrap_or_default(),
            self.config_sha256.clone(),
            self.version.clone(),
        ]
    }
}

/// Six significant digits, fixed notation in the usual range.
pub fn sig6(v: f64) -> String {
    if !v.is_finite() {
        return v.to_string();
    }
    if v == 0.0 {
        return "0".into();
    }
    let rounded: f64 = format!("{v:.5e}").parse().unwrap_or(v);
    let exp = rounded.abs().log10().floor() as i32;
    if (-5..=9).contains(&exp) {
        format!("{:.*}", (5 - exp).max(0) as usize, rounded)
    } else {
        format!("{v:.5e}")
    }
}

pub fn opt6(v: Option<f64>) -> String {
    v.map(sig6).unwrap_or_default()
}

/// CSV table whose rows end with the [`Meta`] columns.
pub struct Table {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
    meta: Meta,
}

impl Table {
    pub fn new(header: Vec<String>, meta: &Meta) -> Self {
        Self { header, rows: Vec::new(), meta: meta.clone() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        let header: Vec<&str> = self.header.iter().map(String::as_str).chain(Meta::csv_header()).collect();
        out.push_str(&line(&header));
        for row in &self.rows {
            let cells: Vec<String> = row.iter().cloned().chain(self.meta.csv_cells()).collect();
            let refs: Vec<&str> = cells.iter().map(String::as_str).collect();
            out.push_str(&line(&refs));
        }
        out
    }
}

fn line(cells: &[&str]) -> String {
    let quoted: Vec<String> = cells
        .iter()
        .map(|c| if c.contains([',', '"', '\n']) { format!("\"{}\"", c.replace('"', "\"\"")) } else { c.to_string() })
        .collect();
    format!("{}\n", quoted.join(","))
}

/// Where and how reports are written.
pub struct Sink {
    out: Option<PathBuf>,
    format: Format,
}

impl Sink {
    pub fn new(out: Option<&Path>, format: Format) -> CliResult<Self> {
        if out.is_none() && format == Format::Both {
            return Err(CliError::Input("--format both needs --out DIR".into()));
        }
        if let Some(dir) = out {
            fs::create_dir_all(dir).map_err(|e| CliError::Output(format!("{}: {e}", dir.display())))?;
        }
        Ok(Self { out: out.map(Path::to_path_buf), format })
    }

    /// Emit `name.json` and/or `name.csv`; `extra` CSVs are written
    /// whenever CSV output is requested.
    pub fn emit<T: Serialize>(&self, name: &str, json: &T, csv: &Table, extra: &[(&str, &Table)]) -> CliResult<()> {
        let json_text = serde_json::to_string_pretty(json).map_err(|e| CliError::Output(e.to_string()))? + "\n";
        let want_json = matches!(self.format, Format::Json | Format::Both);
        let want_csv = matches!(self.format, Format::Csv | Format::Both);
        match &self.out {
            None => {
                if want_json {
                    print!("{json_text}");
                } else {
                    print!("{}", csv.render());
                }
            }
            Some(dir) => {
                if want_json {
                    write(&dir.join(format!("{name}.json")), &json_text)?;
                }
                if want_csv {
                    write(&dir.join(format!("{name}.csv")), &csv.render())?;
                    for (extra_name, table) in extra {
                        write(&dir.join(format!("{extra_name}.csv")), &table.render())?;
                    }
                }
            }
        }
        Ok(())
    }
}

fn write(path: &Path, text: &str) -> CliResult<()> {
    fs::write(path, text).map_err(|e| CliError::Output(format!("{}: {e}", path.display())))
}
