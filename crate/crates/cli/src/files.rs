use std::fs;
use std::path::{Path, PathBuf};

use bevkit_core::{load_scene, Error, Result, Scene};

pub fn require_exists(path: &Path) -> Result<()> {
    if path.exists() {
        Ok(())
    } else {
        Err(Error::io(path, std::io::Error::new(std::io::ErrorKind::NotFound, "no such file or directory")))
    }
}

/// Files with the given extension directly inside `dir`, sorted by name.
pub fn list_with_extension(dir: &Path, ext: &str) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for entry in fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        if path.is_file() && path.extension().is_some_and(|x| x == ext) {
            out.push(path);
        }
    }
    out.sort();
    Ok(out)
}

/// Scene paths from a file or a directory of `*.json` files.
pub fn scene_paths(path: &Path) -> Result<Vec<PathBuf>> {
    require_exists(path)?;
    if path.is_dir() {
        let paths = list_with_extension(path, "json")?;
        if paths.is_empty() {
            return Err(Error::EmptyInput(format!("no scene files in {}", path.display())));
        }
        Ok(paths)
    } else {
        Ok(vec![path.to_path_buf()])
    }
}

/// Loads scenes in path order and rejects duplicate scene ids.
pub fn load_scenes(path: &Path) -> Result<Vec<Scene>> {
    let scenes = scene_paths(path)?.iter().map(load_scene).collect::<Result<Vec<_>>>()?;
    let mut ids: Vec<&str> = scenes.iter().map(|s| s.scene_id.as_str()).collect();
    ids.sort_unstable();
    if let Some(w) = ids.windows(2).find(|w| w[0] == w[1]) {
        return Err(Error::validation(path.display().to_string(), format!("duplicate scene id `{}`", w[0])));
    }
    Ok(scenes)
}

pub fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn ensure_parent(path: &Path) -> Result<()> {
    match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => fs::create_dir_all(p).map_err(|e| Error::io(p, e)),
        _ => Ok(()),
    }
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    ensure_parent(path)?;
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn ensure_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

/// Writes to `path` when given, otherwise to standard output.
pub fn emit(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => write_text(p, text),
        None => {
            use std::io::Write;
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes()).and_then(|_| out.flush()).map_err(|e| Error::io("<stdout>", e))
        }
    }
}

/// Stable per-item seed from a run seed and a string key (FNV-1a).
pub fn keyed_seed(seed: u64, key: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325 ^ seed;
    for b in key.as_bytes() {
        h ^= *b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}
