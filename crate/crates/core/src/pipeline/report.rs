use std::collections::BTreeMap;
use std::path::Path as FsPath;

use crate::detection::{f_measure, read_gray, DetectionMetrics, Mask};
use crate::error::{Error, Result};
use crate::kv;

/// Named block of `key: value` lines.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ReportSection {
    pub name: String,
    pub entries: Vec<(String, String)>,
}

impl ReportSection {
    pub fn new(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            entries: Vec::new(),
        }
    }

    pub fn push(&mut self, key: impl Into<String>, value: impl ToString) {
        self.entries.push((key.into(), value.to_string()));
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    /// Stage summary format, readable by [`ReportSection::parse`].
    pub fn to_kv(&self) -> String {
        let mut out = format!("[{}]\n", self.name);
        for (k, v) in &self.entries {
            out.push_str(&format!("{k} = {v}\n"));
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self> {
        let sections = kv::parse(text)?;
        let [s] = sections.as_slice() else {
            return Err(Error::Validation("summary must hold exactly one section".into()));
        };
        Ok(Self {
            name: s.name.clone(),
            entries: s.entries.iter().map(|e| (e.key.clone(), e.value.clone())).collect(),
        })
    }
}

/// Aggregated results of a pipeline run. Contains no timings, so identical
/// inputs give identical text.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct MetricsReport {
    pub header: Vec<(String, String)>,
    pub sections: Vec<ReportSection>,
}

impl MetricsReport {
    pub fn section(&self, name: &str) -> Option<&ReportSection> {
        self.sections.iter().find(|s| s.name == name)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::from("# inspection report\n");
        let write = |out: &mut String, entries: &[(String, String)]| {
            let width = entries.iter().map(|(k, _)| k.len()).max().unwrap_or(0);
            for (k, v) in entries {
                out.push_str(&format!("{k:<width$}  {v}\n"));
            }
        };
        write(&mut out, &self.header);
        for s in &self.sections {
            out.push_str(&format!("\n[{}]\n", s.name));
            write(&mut out, &s.entries);
        }
        out
    }
}

/// Formats a float with a fixed number of decimals for reports.
pub fn fixed(v: f64, decimals: usize) -> String {
    format!("{v:.decimals$}")
}

/// Per-image and mean precision, recall and F as an aligned table.
pub fn detection_table(rows: &[(String, DetectionMetrics)]) -> String {
    let width = rows.iter().map(|(n, _)| n.len()).chain([5]).max().unwrap();
    let mut out = format!("{:<width$}  {:>9}  {:>9}  {:>9}\n", "image", "precision", "recall", "F");
    let line = |name: &str, p: f64, r: f64, f: f64| format!("{name:<width$}  {p:>9.4}  {r:>9.4}  {f:>9.4}\n");
    for (name, m) in rows {
        out.push_str(&line(name, m.precision, m.recall, m.f_measure));
    }
    if !rows.is_empty() {
        let n = rows.len() as f64;
        let mean = |f: fn(&DetectionMetrics) -> f64| rows.iter().map(|(_, m)| f(m)).sum::<f64>() / n;
        out.push_str(&line(
            "mean",
            mean(|m| m.precision),
            mean(|m| m.recall),
            mean(|m| m.f_measure),
        ));
    }
    out
}

fn pnm_files(dir: &FsPath) -> Result<BTreeMap<String, std::path::PathBuf>> {
    let mut out = BTreeMap::new();
    for entry in std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        let is_pnm = path
            .extension()
            .and_then(|e| e.to_str())
            .is_some_and(|e| matches!(e, "pgm" | "ppm" | "pnm"));
        if is_pnm {
            if let Some(stem) = path.file_stem().and_then(|s| s.to_str()) {
                out.insert(stem.to_string(), path);
            }
        }
    }
    Ok(out)
}

/// Scores every predicted mask in `pred_dir` against the truth mask with the
/// same file stem in `truth_dir`, sorted by name.
pub fn evaluate_dirs(pred_dir: &FsPath, truth_dir: &FsPath) -> Result<Vec<(String, DetectionMetrics)>> {
    let preds = pnm_files(pred_dir)?;
    let truths = pnm_files(truth_dir)?;
    let mut rows = Vec::new();
    for (name, p) in &preds {
        let t = truths
            .get(name)
            .ok_or_else(|| Error::Validation(format!("no truth mask for `{name}`")))?;
        let m = f_measure(&Mask::from_gray(&read_gray(p)?), &Mask::from_gray(&read_gray(t)?))?;
        rows.push((name.clone(), m));
    }
    if rows.is_empty() {
        return Err(Error::Validation(format!("no masks found in {}", pred_dir.display())));
    }
    Ok(rows)
}
