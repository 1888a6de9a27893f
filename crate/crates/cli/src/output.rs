//! Atomic output files and the run manifest.

use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::Context;
use serde::Serialize;
use tempfile::NamedTempFile;

use crate::Failure;

pub struct Outputs {
    dir: PathBuf,
    written: Vec<String>,
}

impl Outputs {
    pub fn create(dir: &Path) -> Result<Self, Failure> {
        std::fs::create_dir_all(dir)
            .with_context(|| format!("creating output directory {}", dir.display()))
            .map_err(Failure::argument)?;
        Ok(Outputs {
            dir: dir.to_path_buf(),
            written: Vec::new(),
        })
    }

    /// Writes through a temporary file in the same directory, then renames.
    pub fn write(&mut self, name: &str, contents: &str) -> Result<(), Failure> {
        let target = self.dir.join(name);
        let result = (|| -> anyhow::Result<()> {
            let mut tmp = NamedTempFile::new_in(&self.dir)?;
            tmp.write_all(contents.as_bytes())?;
            tmp.as_file().sync_all()?;
            tmp.persist(&target)?;
            Ok(())
        })();
        result
            .with_context(|| format!("writing {}", target.display()))
            .map_err(Failure::argument)?;
        self.written.push(name.to_owned());
        Ok(())
    }

    /// Records the resolved configuration; written last.
    pub fn finish<C: Serialize>(mut self, command: &str, config: &C) -> Result<(), Failure> {
        #[derive(Serialize)]
        struct Manifest<'a, C> {
            tool: &'static str,
            version: &'static str,
            command: &'a str,
            config: &'a C,
            outputs: &'a [String],
        }
        let outputs = self.written.clone();
        let manifest = Manifest {
            tool: "trendcast",
            version: env!("CARGO_PKG_VERSION"),
            command,
            config,
            outputs: &outputs,
        };
        let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes") + "\n";
        self.write("manifest.json", &text)
    }
}
