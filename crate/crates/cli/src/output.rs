//! Output sink with a provenance header: `# key: value` lines for CSV, a
//! `header` object for JSON.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;

use serde::Serialize;
use serde_json::{Map, Value};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

pub struct Output {
    pub format: Format,
    pub path: Option<PathBuf>,
    header: Vec<(String, String)>,
}

impl Output {
    pub fn new(format: Format, path: Option<PathBuf>, command: &str) -> Self {
        let mut o = Output { format, path, header: Vec::new() };
        o.note("command", command);
        o.note("version", env!("CARGO_PKG_VERSION"));
        o
    }

    pub fn note(&mut self, key: &str, value: impl ToString) {
        self.header.push((key.to_string(), value.to_string()));
    }

    fn writer(&self) -> Result<Box<dyn Write>, CliError> {
        Ok(match &self.path {
            Some(p) => Box::new(BufWriter::new(
                File::create(p).map_err(|e| CliError::Validation(format!("cannot write {}: {e}", p.display())))?,
            )),
            None => Box::new(BufWriter::new(io::stdout().lock())),
        })
    }

    /// Writes `csv` or the JSON form of `data`, depending on the format.
    pub fn emit<T: Serialize>(
        &self,
        data: &T,
        csv: impl FnOnce(&mut dyn Write) -> io::Result<()>,
    ) -> Result<(), CliError> {
        let mut w = self.writer()?;
        match self.format {
            Format::Csv => {
                for (k, v) in &self.header {
                    writeln!(w, "# {k}: {v}")?;
                }
                csv(&mut w)?;
            }
            Format::Json => {
                let header: Map<String, Value> =
                    self.header.iter().map(|(k, v)| (k.clone(), Value::String(v.clone()))).collect();
                let doc = serde_json::json!({ "header": header, "data": data });
                serde_json::to_writer_pretty(&mut w, &doc).map_err(io::Error::from)?;
                writeln!(w)?;
            }
        }
        w.flush()?;
        Ok(())
    }
}
