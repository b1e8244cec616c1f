//! Output files: staged in memory and written once via temp-file rename.

use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};

/// Files produced by one command, committed together at the end.
#[derive(Default)]
pub struct Outputs {
    files: Vec<(PathBuf, Vec<u8>)>,
}

impl Outputs {
    pub fn add(&mut self, path: PathBuf, content: Vec<u8>) {
        self.files.push((path, content));
    }

    /// Text file whose first lines are `# ` provenance comments.
    pub fn add_text(&mut self, path: PathBuf, provenance: &[String], body: &[u8]) {
        let mut content = Vec::new();
        for line in provenance {
            content.extend_from_slice(b"# ");
            content.extend_from_slice(line.as_bytes());
            content.push(b'\n');
        }
        content.extend_from_slice(body);
        self.add(path, content);
    }

    pub fn commit(self) -> Result<Vec<PathBuf>> {
        let mut written = Vec::new();
        for (path, content) in self.files {
            write_atomic(&path, &content)?;
            written.push(path);
        }
        Ok(written)
    }
}

pub fn write_atomic(path: &Path, content: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    std::fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    let mut tmp = tempfile::NamedTempFile::new_in(&dir)
        .with_context(|| format!("creating a temporary file in {}", dir.display()))?;
    tmp.write_all(content)?;
    tmp.flush()?;
    tmp.persist(path)
        .with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}
