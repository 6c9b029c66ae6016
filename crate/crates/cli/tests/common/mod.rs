#![allow(dead_code)]

use std::fs;
use std::path::{Path, PathBuf};

pub fn manifest() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
}

pub fn bundled() -> Vec<PathBuf> {
    let mut v: Vec<PathBuf> = fs::read_dir(manifest().join("scenarios"))
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "toml"))
        .collect();
    v.sort();
    v
}

pub fn files(dir: &Path) -> Vec<String> {
    let mut v: Vec<String> = fs::read_dir(dir).unwrap().map(|e| e.unwrap().file_name().to_string_lossy().into_owned()).collect();
    v.sort();
    v
}

/// Numeric tokens within relative `1e-9` (absolute `1e-13`), the rest exact.
pub fn same_up_to_rounding(actual: &str, golden: &str) -> Result<(), String> {
    let (a_lines, g_lines): (Vec<&str>, Vec<&str>) = (actual.lines().collect(), golden.lines().collect());
    if a_lines.len() != g_lines.len() {
        return Err(format!("{} lines vs {} golden", a_lines.len(), g_lines.len()));
    }
    for (i, (a, g)) in a_lines.iter().zip(&g_lines).enumerate() {
        let at: Vec<&str> = a.split([',', ' ']).collect();
        let gt: Vec<&str> = g.split([',', ' ']).collect();
        if at.len() != gt.len() {
            return Err(format!("line {i}: `{a}` vs `{g}`"));
        }
        for (x, y) in at.iter().zip(&gt) {
            let ok = x == y || match (x.parse::<f64>(), y.parse::<f64>()) {
                (Ok(p), Ok(q)) => p == q || (p - q).abs() <= 1e-13 + 1e-9 * q.abs(),
                _ => x == y,
            };
            if !ok {
                return Err(format!("line {i}: `{x}` vs golden `{y}`"));
            }
        }
    }
    Ok(())
}
