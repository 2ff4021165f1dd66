//! Atomic artifact writes, number formatting and the on-disk cache.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use fkl_core::manifest::RunManifest;

/// Writes `bytes` to `path` through a temporary file in the same directory
/// followed by a rename, so readers never observe a partial file.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> io::Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    fs::create_dir_all(dir)?;
    let name = path
        .file_name()
        .ok_or_else(|| io::Error::new(io::ErrorKind::InvalidInput, "output path has no file name"))?;
    let tmp = dir.join(format!(".{}.tmp-{}", name.to_string_lossy(), std::process::id()));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)
}

/// Fixed 17-significant-digit scientific notation used in every CSV and
/// plot file, so that outputs are reproducible byte for byte.
pub fn num(v: f64) -> String {
    if v.is_nan() {
        "NaN".into()
    } else {
        format!("{v:.16e}")
    }
}

/// Two-column `x y` text.
pub fn plot_data(header: &str, points: impl IntoIterator<Item = (f64, f64)>) -> String {
    let mut out = format!("# {header}\n");
    for (x, y) in points {
        out.push_str(&num(x));
        out.push(' ');
        out.push_str(&num(y));
        out.push('\n');
    }
    out
}

/// Collects the files of one command and writes them with its manifest.
pub struct Artifacts {
    dir: PathBuf,
    pub manifest: RunManifest,
}

impl Artifacts {
    pub fn new(dir: &Path, manifest: RunManifest) -> Self {
        Self {
            dir: dir.to_path_buf(),
            manifest,
        }
    }

    /// Writes `name` immediately and records it under `key` in the manifest.
    pub fn write(&mut self, key: &str, name: &str, bytes: &[u8]) -> io::Result<()> {
        atomic_write(&self.dir.join(name), bytes)?;
        self.manifest.outputs.set(key, name);
        Ok(())
    }

    pub fn finish(self, started: std::time::Instant) -> io::Result<PathBuf> {
        let mut manifest = self.manifest;
        manifest.wall_clock_seconds = started.elapsed().as_secs_f64();
        let path = self.dir.join(format!("{}.manifest", manifest.command));
        atomic_write(&path, manifest.to_text().as_bytes())?;
        Ok(path)
    }
}

/// Content-addressed cache of intermediate artifacts.
#[derive(Debug, Clone)]
pub struct Cache {
    dir: PathBuf,
}

impl Cache {
    /// `FKL_CACHE_DIR` if set, otherwise `<out>/.fkl-cache`.
    pub fn locate(out: &Path) -> Self {
        let dir = std::env::var_os("FKL_CACHE_DIR")
            .map(PathBuf::from)
            .unwrap_or_else(|| out.join(".fkl-cache"));
        Self { dir }
    }

    pub fn path(&self, kind: &str, hash: &str) -> PathBuf {
        self.dir.join(format!("{kind}-{hash}"))
    }

    pub fn load(&self, kind: &str, hash: &str) -> Option<Vec<u8>> {
        fs::read(self.path(kind, hash)).ok()
    }

    /// Best effort: a cache that cannot be written only costs recomputation.
    pub fn store(&self, kind: &str, hash: &str, bytes: &[u8]) {
        if let Err(e) = atomic_write(&self.path(kind, hash), bytes) {
            log::warn!("could not write cache entry {kind}-{hash}: {e}");
        }
    }
}
