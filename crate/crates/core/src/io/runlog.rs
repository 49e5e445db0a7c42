//! JSON-lines run log that is rewritten atomically after every epoch.

use std::path::{Path, PathBuf};

use crate::error::Result;
use crate::io::tensor::write_atomic;
use crate::pipeline::{record_line, EpochRecord};

pub struct RunLogFile {
    path: PathBuf,
    text: String,
}

impl RunLogFile {
    /// Starts an empty log at `path`, replacing any previous file.
    pub fn create(path: &Path) -> Result<Self> {
        write_atomic(path, b"")?;
        Ok(Self {
            path: path.to_path_buf(),
            text: String::new(),
        })
    }

    pub fn append(&mut self, record: &EpochRecord) -> Result<()> {
        self.text.push_str(&record_line(record));
        self.text.push('\n');
        write_atomic(&self.path, self.text.as_bytes())
    }

    pub fn contents(&self) -> &str {
        &self.text
    }
}
