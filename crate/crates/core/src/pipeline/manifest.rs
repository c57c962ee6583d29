//! Content hashes of every run output: one `sha256  bytes  path` line per
//! file, paths relative to the output directory with `/` separators, sorted.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub const MANIFEST_FILE: &str = "manifest.txt";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestEntry {
    pub sha256: String,
    pub bytes: u64,
    pub path: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Manifest {
    pub entries: Vec<ManifestEntry>,
}

fn hash_file(path: &Path) -> Result<(String, u64)> {
    let data = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok((hex::encode(Sha256::digest(&data)), data.len() as u64))
}

fn collect(dir: &Path, out: &mut Vec<PathBuf>) -> Result<()> {
    for entry in std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        if path.is_dir() {
            collect(&path, out)?;
        } else {
            out.push(path);
        }
    }
    Ok(())
}

fn relative(root: &Path, path: &Path) -> String {
    let rel = path.strip_prefix(root).expect("path under root");
    rel.components()
        .map(|c| c.as_os_str().to_string_lossy())
        .collect::<Vec<_>>()
        .join("/")
}

impl Manifest {
    /// Hashes every file under `root` except an existing manifest.
    pub fn build(root: &Path) -> Result<Manifest> {
        let mut files = Vec::new();
        collect(root, &mut files)?;
        let mut entries = Vec::new();
        for f in files {
            let path = relative(root, &f);
            if path == MANIFEST_FILE {
                continue;
            }
            let (sha256, bytes) = hash_file(&f)?;
            entries.push(ManifestEntry { sha256, bytes, path });
        }
        entries.sort_by(|a, b| a.path.cmp(&b.path));
        Ok(Manifest { entries })
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        for e in &self.entries {
            writeln!(s, "{}  {}  {}", e.sha256, e.bytes, e.path).expect("write to string");
        }
        s
    }

    pub fn parse(text: &str) -> Result<Manifest> {
        let mut entries: Vec<ManifestEntry> = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let bad = |why: &str| Error::Manifest(format!("line {}: {why}", i + 1));
            let mut parts = line.splitn(3, "  ");
            let (Some(sha), Some(bytes), Some(path)) = (parts.next(), parts.next(), parts.next()) else {
                return Err(bad("expected `sha256  bytes  path`"));
            };
            if sha.len() != 64 || !sha.bytes().all(|b| b.is_ascii_hexdigit() && !b.is_ascii_uppercase()) {
                return Err(bad("not a sha256 digest"));
            }
            let bytes = bytes.parse().map_err(|_| bad("byte count is not a number"))?;
            if path.is_empty() || path.starts_with('/') || path.split('/').any(|c| c == "..") {
                return Err(bad("path must be relative and inside the output directory"));
            }
            if entries.last().is_some_and(|e| e.path.as_str() >= path) {
                return Err(bad("paths are not sorted and unique"));
            }
            entries.push(ManifestEntry {
                sha256: sha.to_string(),
                bytes,
                path: path.to_string(),
            });
        }
        Ok(Manifest { entries })
    }

    pub fn write(&self, root: &Path) -> Result<PathBuf> {
        let path = root.join(MANIFEST_FILE);
        std::fs::write(&path, self.render()).map_err(|e| Error::io(&path, e))?;
        Ok(path)
    }

    pub fn read(path: &Path) -> Result<Manifest> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    /// Re-hashes the listed files under `root`.
    pub fn verify(&self, root: &Path) -> Result<()> {
        for e in &self.entries {
            let path = root.join(&e.path);
            let (sha, bytes) = hash_file(&path).map_err(|_| Error::Manifest(format!("{} is missing", e.path)))?;
            if sha != e.sha256 || bytes != e.bytes {
                return Err(Error::Manifest(format!("{} does not match its recorded hash", e.path)));
            }
        }
        Ok(())
    }

    pub fn contains(&self, path: &str) -> bool {
        self.entries.iter().any(|e| e.path == path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn build_render_parse_verify() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::create_dir(dir.path().join("sub")).unwrap();
        std::fs::write(dir.path().join("sub/b.csv"), "x\n").unwrap();
        std::fs::write(dir.path().join("a.csv"), "").unwrap();
        let m = Manifest::build(dir.path()).unwrap();
        let text = m.render();
        let expected = format!(
            "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855  0  a.csv\n{}  2  sub/b.csv\n",
            hex::encode(Sha256::digest(b"x\n"))
        );
        assert_eq!(text, expected);
        m.write(dir.path()).unwrap();
        let back = Manifest::read(&dir.path().join(MANIFEST_FILE)).unwrap();
        assert_eq!(back, m);
        assert_eq!(Manifest::build(dir.path()).unwrap(), m);
        back.verify(dir.path()).unwrap();
        std::fs::write(dir.path().join("a.csv"), "tampered").unwrap();
        assert!(matches!(back.verify(dir.path()), Err(Error::Manifest(_))));
    }

    #[test]
    fn corrupt_manifests_are_refused() {
        let ok = "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855  0  a.csv";
        assert!(Manifest::parse(ok).is_ok());
        for bad in [
            "garbage",
            "e3b0  0  a.csv",
            "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855  x  a.csv",
            "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855  0  ../a.csv",
        ] {
            assert!(matches!(Manifest::parse(bad), Err(Error::Manifest(_))), "{bad}");
        }
        assert!(Manifest::parse(&format!("{ok}\n{ok}")).is_err());
    }
}
