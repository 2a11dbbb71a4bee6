use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::{CliError, Result};

/// Shortest decimal that agrees with `x` to 10 significant digits.
pub fn fmt_csv(x: f64) -> String {
    if !x.is_finite() {
        return x.to_string();
    }
    let rounded: f64 = format!("{x:.9e}").parse().expect("formatted float parses");
    rounded.to_string()
}

/// Files are assembled in memory and written only once the command has
/// produced all of them.
#[derive(Debug, Default)]
pub struct Artifacts {
    files: Vec<(String, String)>,
}

impl Artifacts {
    pub fn add(&mut self, name: &str, contents: String) {
        self.files.push((name.to_string(), contents));
    }

    pub fn add_json<S: Serialize>(&mut self, name: &str, value: &S) {
        let mut text = serde_json::to_string_pretty(value).expect("reports serialize");
        text.push('\n');
        self.add(name, text);
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.files.iter().map(|(n, _)| n.as_str())
    }

    pub fn write_all(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        std::fs::create_dir_all(dir).map_err(|source| CliError::Write {
            path: dir.to_path_buf(),
            source,
        })?;
        let mut written = Vec::new();
        for (name, contents) in &self.files {
            let path = dir.join(name);
            std::fs::write(&path, contents).map_err(|source| CliError::Write {
                path: path.clone(),
                source,
            })?;
            log::info!("wrote {}", path.display());
            written.push(path);
        }
        Ok(written)
    }
}

/// CSV text with a header row.
pub fn csv_table<I, R>(header: &[&str], rows: I) -> String
where
    I: IntoIterator<Item = R>,
    R: IntoIterator<Item = String>,
{
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for row in rows {
        w.write_record(row).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 fields")
}
