use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::config::Params;
use crate::error::{CliError, CliResult};

pub use gossiplab::io::fmt_float as f;

pub struct OutDir {
    root: PathBuf,
}

#[derive(Serialize)]
struct Manifest<'a> {
    command: &'a str,
    version: &'a str,
    seed: u64,
    config: BTreeMap<String, String>,
}

impl OutDir {
    pub fn create(root: &Path) -> CliResult<Self> {
        std::fs::create_dir_all(root).map_err(|source| CliError::Io {
            path: root.display().to_string(),
            source,
        })?;
        Ok(Self {
            root: root.to_owned(),
        })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    pub fn write(&self, name: &str, contents: &str) -> CliResult<()> {
        let path = self.path(name);
        std::fs::write(&path, contents).map_err(|source| CliError::Io {
            path: path.display().to_string(),
            source,
        })
    }

    pub fn write_json<S: Serialize>(&self, name: &str, value: &S) -> CliResult<()> {
        let mut s = serde_json::to_string_pretty(value).expect("serializable output");
        s.push('\n');
        self.write(name, &s)
    }

    pub fn write_manifest(&self, command: &str, seed: u64, params: &Params) -> CliResult<()> {
        self.write_json(
            "manifest.json",
            &Manifest {
                command,
                version: env!("CARGO_PKG_VERSION"),
                seed,
                config: params.resolved(),
            },
        )
    }
}

/// CSV text built row by row.
pub struct Csv {
    buf: String,
}

impl Csv {
    pub fn new(header: &[&str]) -> Self {
        let mut buf = header.join(",");
        buf.push('\n');
        Self { buf }
    }

    pub fn row(&mut self, fields: &[String]) {
        let _ = writeln!(self.buf, "{}", fields.join(","));
    }

    pub fn finish(self) -> String {
        self.buf
    }
}

/// `key=value` report lines.
#[derive(Default)]
pub struct Report {
    buf: String,
}

impl Report {
    pub fn line(&mut self, key: &str, value: impl std::fmt::Display) {
        let _ = writeln!(self.buf, "{key}={value}");
    }

    pub fn float(&mut self, key: &str, value: f64) {
        self.line(key, f(value));
    }

    pub fn finish(self) -> String {
        self.buf
    }
}
