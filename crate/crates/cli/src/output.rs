use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use hdent::Result;

/// Writes `bytes` to `path` through a temporary sibling and a rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    fs::create_dir_all(dir)?;
    let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let tmp = dir.join(format!(".{name}.tmp{}", std::process::id()));
    let result = (|| {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    })();
    if result.is_err() {
        let _ = fs::remove_file(&tmp);
    }
    Ok(result?)
}

pub fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

/// Files written by a command, reported on stdout.
#[derive(Debug, Default, serde::Serialize)]
pub struct Written {
    pub files: Vec<PathBuf>,
}

impl Written {
    pub fn json(&mut self, path: PathBuf, value: &impl serde::Serialize) -> Result<()> {
        write_json(&path, value)?;
        self.files.push(path);
        Ok(())
    }

    pub fn bytes(&mut self, path: PathBuf, bytes: &[u8]) -> Result<()> {
        write_atomic(&path, bytes)?;
        self.files.push(path);
        Ok(())
    }
}
