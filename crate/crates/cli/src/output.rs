use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;
use tempfile::NamedTempFile;

use crate::config::Format;
use crate::CliError;

/// Output target. Files are written to a temporary sibling and renamed on
/// success, so a failed run never leaves a partial file behind.
enum Sink {
    File {
        tmp: BufWriter<NamedTempFile>,
        path: PathBuf,
    },
    Stdout(BufWriter<io::Stdout>),
}

impl Sink {
    fn open(path: Option<&Path>) -> Result<Self, CliError> {
        let Some(path) = path else {
            return Ok(Self::Stdout(BufWriter::new(io::stdout())));
        };
        let dir = match path.parent() {
            Some(p) if !p.as_os_str().is_empty() => p,
            _ => Path::new("."),
        };
        let tmp = NamedTempFile::new_in(dir).map_err(|e| {
            CliError::Runtime(format!("cannot create output in {}: {e}", dir.display()))
        })?;
        Ok(Self::File {
            tmp: BufWriter::new(tmp),
            path: path.to_path_buf(),
        })
    }

    fn writer(&mut self) -> &mut dyn Write {
        match self {
            Self::File { tmp, .. } => tmp,
            Self::Stdout(w) => w,
        }
    }

    fn finish(self) -> Result<(), CliError> {
        match self {
            Self::File { tmp, path } => {
                let tmp = tmp
                    .into_inner()
                    .map_err(|e| CliError::Runtime(e.to_string()))?;
                tmp.persist(&path).map_err(|e| {
                    CliError::Runtime(format!("cannot write {}: {e}", path.display()))
                })?;
                Ok(())
            }
            Self::Stdout(mut w) => Ok(w.flush()?),
        }
    }
}

fn csv_err(e: csv::Error) -> CliError {
    CliError::Runtime(e.to_string())
}

fn json_err(e: serde_json::Error) -> CliError {
    CliError::Runtime(e.to_string())
}

/// Writes `header` then one record per item; `columns` must list the
/// record's fields in declaration order.
///
/// CSV: `# <header json>`, a column line, then rows. JSON: one object
/// `{"header": ..., "rows": [...]}`.
pub(crate) fn write_table<R, I>(
    path: Option<&Path>,
    format: Format,
    header: &serde_json::Value,
    columns: &[&str],
    records: I,
) -> Result<(), CliError>
where
    R: Serialize,
    I: IntoIterator<Item = Result<R, CliError>>,
{
    let mut sink = Sink::open(path)?;
    let w = sink.writer();
    match format {
        Format::Csv => {
            writeln!(w, "# {}", serde_json::to_string(header).map_err(json_err)?)?;
            let mut csv = csv::WriterBuilder::new().has_headers(false).from_writer(w);
            csv.write_record(columns).map_err(csv_err)?;
            for r in records {
                csv.serialize(r?).map_err(csv_err)?;
            }
            csv.flush()?;
        }
        Format::Json => {
            write!(
                w,
                "{{\"header\":{},\"rows\":[",
                serde_json::to_string(header).map_err(json_err)?
            )?;
            for (i, r) in records.into_iter().enumerate() {
                if i > 0 {
                    w.write_all(b",")?;
                }
                w.write_all(b"\n")?;
                serde_json::to_writer(&mut *w, &r?).map_err(json_err)?;
            }
            w.write_all(b"\n]}\n")?;
        }
    }
    sink.finish()
}
