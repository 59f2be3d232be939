//! Downloads named public datasets listed in a manifest.

use std::fs;
use std::io::Read;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::Deserialize;
use sha2::{Digest, Sha256};

/// Built-in manifest. `letter` is the union of the LIBSVM train and test
/// files (20000 instances, labels 1..26).
pub const BUILTIN_MANIFEST: &str = r#"
[letter]
files = [
    { url = "https://www.csie.ntu.edu.tw/~cjlin/libsvmtools/datasets/multiclass/letter.scale" },
    { url = "https://www.csie.ntu.edu.tw/~cjlin/libsvmtools/datasets/multiclass/letter.scale.t" },
]
"#;

#[derive(Debug, Clone, Deserialize)]
pub struct Source {
    pub url: String,
    /// Hex SHA-256 of the downloaded bytes. Unchecked when absent.
    pub sha256: Option<String>,
}

#[derive(Debug, Clone, Deserialize)]
pub struct Entry {
    pub files: Vec<Source>,
}

pub type Manifest = std::collections::BTreeMap<String, Entry>;

pub fn parse_manifest(text: &str) -> Result<Manifest> {
    toml::from_str(text).context("invalid dataset manifest")
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

fn download(url: &str) -> Result<Vec<u8>> {
    if let Some(path) = url.strip_prefix("file://") {
        return fs::read(path).with_context(|| format!("reading {path}"));
    }
    let mut body = Vec::new();
    ureq::get(url)
        .call()
        .with_context(|| format!("GET {url}"))?
        .into_body()
        .into_reader()
        .read_to_end(&mut body)?;
    Ok(body)
}

/// Fetches every file of `name`, verifies checksums and writes their
/// concatenation to `dir/name`. Returns the output path and, for each file,
/// its computed checksum.
pub fn fetch(manifest: &Manifest, name: &str, dir: &Path) -> Result<(PathBuf, Vec<String>)> {
    let Some(entry) = manifest.get(name) else {
        let known: Vec<&str> = manifest.keys().map(String::as_str).collect();
        bail!("unknown dataset '{name}' (known: {})", known.join(", "));
    };
    let mut data = Vec::new();
    let mut sums = Vec::new();
    for src in &entry.files {
        let bytes = download(&src.url)?;
        let sum = hex(&Sha256::digest(&bytes));
        if let Some(want) = &src.sha256 {
            if !want.eq_ignore_ascii_case(&sum) {
                bail!(
                    "checksum mismatch for {}: expected {want}, got {sum}",
                    src.url
                );
            }
        }
        data.extend_from_slice(&bytes);
        if !data.ends_with(b"\n") {
            data.push(b'\n');
        }
        sums.push(sum);
    }
    fs::create_dir_all(dir)?;
    let out = dir.join(name);
    fs::write(&out, data)?;
    Ok((out, sums))
}
