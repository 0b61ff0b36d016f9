use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use causelab::data::Dataset;
use causelab::error::Error;

use crate::CliError;

pub fn read_text(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

pub fn read_csv(path: &Path) -> Result<Dataset, CliError> {
    let file = fs::File::open(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    Dataset::from_csv(io::BufReader::new(file)).map_err(|e| match e {
        Error::Parse(_) | Error::Csv(_) | Error::Io(_) => CliError::Input(format!("{}: {e}", path.display())),
        other => other.into(),
    })
}

/// Parses JSON text, reporting the line and column of syntax errors.
pub fn parse_json(path: &Path, text: &str) -> Result<serde_json::Value, CliError> {
    serde_json::from_str(text).map_err(|e| {
        CliError::Input(format!("{}: line {}, column {}: {e}", path.display(), e.line(), e.column()))
    })
}

pub fn csv_bytes(data: &Dataset) -> Result<Vec<u8>, CliError> {
    let mut buf = Vec::new();
    data.to_csv(&mut buf)?;
    Ok(buf)
}

/// Writes through a temporary file in the destination directory and renames
/// it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    let name = path
        .file_name()
        .ok_or_else(|| CliError::Usage(format!("output path `{}` has no file name", path.display())))?;
    let tmp = dir.join(format!(".{}.{}.tmp", name.to_string_lossy(), std::process::id()));
    let result = (|| {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    })();
    if result.is_err() {
        let _ = fs::remove_file(&tmp);
    }
    result.map_err(|e| CliError::Output(format!("{}: {e}", path.display())))
}

pub fn emit(out: Option<&Path>, bytes: &[u8]) -> Result<(), CliError> {
    match out {
        Some(p) => write_atomic(p, bytes),
        None => {
            let mut stdout = io::stdout().lock();
            stdout.write_all(bytes).and_then(|_| stdout.flush()).map_err(|e| CliError::Output(e.to_string()))
        }
    }
}

/// Deterministic JSON followed by a newline.
pub fn json_bytes(v: &serde_json::Value) -> Vec<u8> {
    let mut s = causelab::json::to_string(v);
    s.push('\n');
    s.into_bytes()
}

/// `data.csv` with kind `truth` becomes `data.truth.json` beside it.
pub fn sibling_path(csv: &Path, kind: &str) -> PathBuf {
    let stem = csv.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    csv.with_file_name(format!("{stem}.{kind}.json"))
}
