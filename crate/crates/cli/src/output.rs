//! Output files. Every artifact carries the tool version and the sha256 of the
//! config bytes, so a result can be traced to the exact input that made it.

use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use rotorq_core::algebra::GateMatrix;
use serde::Serialize;
use sha2::{Digest, Sha256};

pub const TOOL: &str = "rotorq";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Clone, Debug, Serialize)]
pub struct Meta {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    pub config_sha256: String,
}

impl Meta {
    pub fn new(command: &str, config_bytes: &[u8]) -> Self {
        Self {
            tool: TOOL,
            version: VERSION,
            command: command.to_string(),
            config_sha256: hex::encode(Sha256::digest(config_bytes)),
        }
    }
}

#[derive(Serialize)]
struct Envelope<'a, T: Serialize> {
    meta: &'a Meta,
    result: &'a T,
}

/// Writes into one output directory and remembers what it wrote.
pub struct Artifacts {
    dir: PathBuf,
    meta: Meta,
    written: Vec<PathBuf>,
}

impl Artifacts {
    pub fn new(dir: &Path, meta: Meta) -> io::Result<Self> {
        fs::create_dir_all(dir)?;
        Ok(Self {
            dir: dir.to_path_buf(),
            meta,
            written: Vec::new(),
        })
    }

    pub fn meta(&self) -> &Meta {
        &self.meta
    }

    pub fn written(&self) -> &[PathBuf] {
        &self.written
    }

    /// `{"meta": ..., "result": ...}`, pretty printed.
    pub fn json<T: Serialize>(&mut self, name: &str, result: &T) -> io::Result<()> {
        let path = self.dir.join(name);
        let mut out = BufWriter::new(File::create(&path)?);
        serde_json::to_writer_pretty(&mut out, &Envelope { meta: &self.meta, result })?;
        writeln!(out)?;
        out.flush()?;
        self.written.push(path);
        Ok(())
    }

    /// CSV with the metadata lines first; `body` writes the rest.
    pub fn csv<F>(&mut self, name: &str, body: F) -> io::Result<()>
    where
        F: FnOnce(&mut dyn Write) -> io::Result<()>,
    {
        let path = self.dir.join(name);
        let mut out = BufWriter::new(File::create(&path)?);
        write_csv_meta(&mut out, &self.meta)?;
        body(&mut out)?;
        out.flush()?;
        self.written.push(path);
        Ok(())
    }
}

pub fn write_csv_meta<W: Write + ?Sized>(out: &mut W, meta: &Meta) -> io::Result<()> {
    writeln!(out, "# {} {}", meta.tool, meta.version)?;
    writeln!(out, "# config_sha256 {}", meta.config_sha256)?;
    writeln!(out, "# command {}", meta.command)
}

/// Row-major `[[re, im], ...]` entries.
#[derive(Clone, Debug, Serialize)]
pub struct MatrixJson(pub Vec<Vec<[f64; 2]>>);

impl From<&GateMatrix> for MatrixJson {
    fn from(g: &GateMatrix) -> Self {
        let n = g.dim();
        MatrixJson(
            (0..n)
                .map(|i| {
                    (0..n)
                        .map(|j| {
                            let z = g.get(i, j);
                            [z.re, z.im]
                        })
                        .collect()
                })
                .collect(),
        )
    }
}
