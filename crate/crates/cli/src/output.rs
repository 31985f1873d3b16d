//! All-or-nothing output: files are staged in a hidden directory inside the
//! destination and renamed into place only once every one was written.

use std::fs;
use std::path::{Path, PathBuf};

use tempfile::TempDir;

use crate::error::{CliError, CliResult};

pub struct Staging {
    dest: PathBuf,
    tmp: TempDir,
}

impl Staging {
    pub fn new(dest: &Path) -> CliResult<Self> {
        fs::create_dir_all(dest)
            .map_err(|e| CliError::Output(format!("cannot create {}: {e}", dest.display())))?;
        let tmp = tempfile::Builder::new()
            .prefix(".staging-")
            .tempdir_in(dest)
            .map_err(|e| CliError::Output(format!("cannot stage in {}: {e}", dest.display())))?;
        Ok(Self {
            dest: dest.to_path_buf(),
            tmp,
        })
    }

    /// Directory to write staged files into.
    pub fn path(&self) -> &Path {
        self.tmp.path()
    }

    pub fn write(&self, name: &str, contents: impl AsRef<[u8]>) -> CliResult<()> {
        let path = self.tmp.path().join(name);
        fs::write(&path, contents).map_err(|e| CliError::Output(format!("cannot write {}: {e}", path.display())))
    }

    /// Moves every staged file into the destination.
    pub fn commit(self) -> CliResult<Vec<PathBuf>> {
        let err = |e: std::io::Error| CliError::Output(format!("cannot commit outputs: {e}"));
        let mut names: Vec<_> = fs::read_dir(self.tmp.path())
            .map_err(err)?
            .map(|e| e.map(|e| e.file_name()))
            .collect::<Result<_, _>>()
            .map_err(err)?;
        names.sort();
        let mut out = Vec::with_capacity(names.len());
        for name in names {
            let target = self.dest.join(&name);
            fs::rename(self.tmp.path().join(&name), &target).map_err(err)?;
            out.push(target);
        }
        Ok(out)
    }
}
