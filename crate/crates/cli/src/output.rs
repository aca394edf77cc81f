//! Output files: every one starts with the scenario hash and tool version.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::CliError;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// First 16 hex digits of SHA-256 over the config bytes and any seed
/// override.
pub fn scenario_hash(config: &[u8], seed_override: Option<u64>) -> String {
    let mut h = Sha256::new();
    h.update(config);
    if let Some(s) = seed_override {
        h.update(format!("\nseed-override={s}").as_bytes());
    }
    hex::encode(h.finalize())[..16].to_string()
}

pub struct OutDir {
    pub dir: PathBuf,
    pub hash: String,
    pub quiet: bool,
}

impl OutDir {
    pub fn create(dir: PathBuf, hash: String, quiet: bool) -> Result<Self, CliError> {
        fs::create_dir_all(&dir).map_err(|e| CliError::Failure(format!("cannot create {}: {e}", dir.display())))?;
        Ok(Self { dir, hash, quiet })
    }

    pub fn header(&self) -> String {
        format!("# ftl-homog {VERSION} scenario {}\n", self.hash)
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    /// Writes `name` with the header comment followed by `body`.
    pub fn write<F>(&self, name: &str, body: F) -> Result<PathBuf, CliError>
    where
        F: FnOnce(&mut dyn Write) -> std::io::Result<()>,
    {
        let path = self.path(name);
        let mut w = open(&path)?;
        w.write_all(self.header().as_bytes()).map_err(|e| io_err(&path, e))?;
        body(&mut w).and_then(|_| w.flush()).map_err(|e| io_err(&path, e))?;
        self.note(&path);
        Ok(path)
    }

    /// JSON has no comments, so the hash and version go in as fields.
    pub fn write_json(&self, name: &str, mut value: serde_json::Value) -> Result<PathBuf, CliError> {
        if let Some(obj) = value.as_object_mut() {
            obj.insert("scenario_hash".into(), self.hash.clone().into());
            obj.insert("tool_version".into(), VERSION.into());
        }
        let path = self.path(name);
        let mut w = open(&path)?;
        serde_json::to_writer_pretty(&mut w, &value)
            .map_err(|e| CliError::Failure(format!("{}: {e}", path.display())))?;
        writeln!(w).and_then(|_| w.flush()).map_err(|e| io_err(&path, e))?;
        self.note(&path);
        Ok(path)
    }

    fn note(&self, path: &Path) {
        if !self.quiet {
            println!("wrote {}", path.display());
        }
    }
}

pub fn open(path: &Path) -> Result<BufWriter<File>, CliError> {
    File::create(path).map(BufWriter::new).map_err(|e| io_err(path, e))
}

pub fn io_err(path: &Path, e: std::io::Error) -> CliError {
    CliError::Failure(format!("{}: {e}", path.display()))
}

/// Gnuplot script drawing columns of a comma-separated file.
pub struct Plot<'a> {
    pub output: &'a str,
    pub title: &'a str,
    pub xlabel: &'a str,
    pub ylabel: &'a str,
    pub loglog: bool,
    /// `(file, using, title, style)`.
    pub series: Vec<(&'a str, &'a str, &'a str, &'a str)>,
}

impl Plot<'_> {
    pub fn script(&self) -> String {
        let mut s = String::new();
        s.push_str("set datafile separator ','\n");
        s.push_str("set terminal pngcairo size 900,600\n");
        s.push_str(&format!("set output '{}'\n", self.output));
        s.push_str(&format!("set title '{}'\n", self.title));
        s.push_str(&format!("set xlabel '{}'\nset ylabel '{}'\n", self.xlabel, self.ylabel));
        if self.loglog {
            s.push_str("set logscale xy\n");
        }
        s.push_str("set key left top\n");
        let parts: Vec<String> = self
            .series
            .iter()
            .map(|(file, using, title, style)| format!("'{file}' using {using} title '{title}' with {style}"))
            .collect();
        s.push_str(&format!("plot {}\n", parts.join(", \\\n     ")));
        s
    }
}
