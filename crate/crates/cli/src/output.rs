//! CSV tables and summary records.

use std::fs::{self, File};
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde_json::Value;

/// 17 significant digits.
pub fn num(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn cnum(z: Complex64) -> [String; 2] {
    [num(z.re), num(z.im)]
}

pub struct OutputDir {
    root: PathBuf,
    hash: String,
    command: String,
}

impl OutputDir {
    pub fn create(root: &Path, hash: &str, command: &str) -> io::Result<Self> {
        fs::create_dir_all(root)?;
        Ok(Self {
            root: root.to_path_buf(),
            hash: hash.to_string(),
            command: command.to_string(),
        })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    /// Writes `rows` under `header`, preceded by '#' comment lines carrying
    /// the command and config hash.
    pub fn table(&self, name: &str, comments: &[String], header: &[&str], rows: &[Vec<String>]) -> io::Result<()> {
        let mut file = File::create(self.path(name))?;
        writeln!(file, "# magtrace {}", self.command)?;
        writeln!(file, "# config_sha256 {}", self.hash)?;
        for c in comments {
            writeln!(file, "# {c}")?;
        }
        let mut w = csv::Writer::from_writer(file);
        w.write_record(header)?;
        for r in rows {
            w.write_record(r)?;
        }
        w.flush()
    }

    pub fn summary(&self, mut value: Value) -> io::Result<()> {
        if let Value::Object(map) = &mut value {
            map.insert("command".into(), Value::String(self.command.clone()));
            map.insert("config_sha256".into(), Value::String(self.hash.clone()));
        }
        let text = serde_json::to_string_pretty(&value).map_err(io::Error::other)?;
        fs::write(self.path("summary.json"), text + "\n")
    }
}

/// Complex number as a JSON pair [re, im].
pub fn json_complex(z: Complex64) -> Value {
    serde_json::json!([z.re, z.im])
}
