//! Line-oriented `[section]` / `key = value` text format shared by scenario,
//! formation and pipeline files.
//!
//! Grammar, one construct per line, surrounding whitespace ignored:
//!
//! ```text
//! # comment            (only as the first non-blank character)
//! [section]            section header; sections may repeat
//! key = value          entry belonging to the most recent section
//! ```
//!
//! Vectors are written as comma-separated numbers (`x,y,z`). Entries before
//! the first header are rejected.

use nalgebra::{Vector2, Vector3};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Entry {
    pub key: String,
    pub value: String,
    pub line: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Section {
    pub name: String,
    pub line: usize,
    pub entries: Vec<Entry>,
}

impl Section {
    /// Rejects any key not listed in `allowed`.
    pub fn check_keys(&self, allowed: &[&str]) -> Result<()> {
        for e in &self.entries {
            if !allowed.contains(&e.key.as_str()) {
                return Err(Error::Parse {
                    line: e.line,
                    message: format!("unknown key `{}` in [{}]", e.key, self.name),
                });
            }
        }
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<&Entry> {
        self.entries.iter().find(|e| e.key == key)
    }

    pub fn all<'a>(&'a self, key: &'a str) -> impl Iterator<Item = &'a Entry> + 'a {
        self.entries.iter().filter(move |e| e.key == key)
    }

    pub fn require(&self, key: &str) -> Result<&Entry> {
        self.get(key).ok_or_else(|| Error::Parse {
            line: self.line,
            message: format!("[{}] is missing required key `{}`", self.name, key),
        })
    }
}

pub fn parse(text: &str) -> Result<Vec<Section>> {
    let mut sections: Vec<Section> = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        if let Some(rest) = trimmed.strip_prefix('[') {
            let name = rest.strip_suffix(']').ok_or_else(|| Error::Parse {
                line,
                message: "unterminated section header".into(),
            })?;
            let name = name.trim();
            if name.is_empty() || !name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
                return Err(Error::Parse {
                    line,
                    message: format!("invalid section name `{name}`"),
                });
            }
            sections.push(Section {
                name: name.to_string(),
                line,
                entries: Vec::new(),
            });
            continue;
        }
        let (key, value) = trimmed.split_once('=').ok_or_else(|| Error::Parse {
            line,
            message: format!("expected `key = value`, found `{trimmed}`"),
        })?;
        let key = key.trim();
        if key.is_empty() {
            return Err(Error::Parse {
                line,
                message: "empty key".into(),
            });
        }
        let section = sections.last_mut().ok_or_else(|| Error::Parse {
            line,
            message: "entry appears before any [section]".into(),
        })?;
        section.entries.push(Entry {
            key: key.to_string(),
            value: value.trim().to_string(),
            line,
        });
    }
    Ok(sections)
}

impl Entry {
    fn err(&self, what: &str) -> Error {
        Error::Parse {
            line: self.line,
            message: format!("`{}`: expected {what}, found `{}`", self.key, self.value),
        }
    }

    pub fn f64(&self) -> Result<f64> {
        let v: f64 = self.value.parse().map_err(|_| self.err("a number"))?;
        if v.is_finite() {
            Ok(v)
        } else {
            Err(self.err("a finite number"))
        }
    }

    pub fn usize(&self) -> Result<usize> {
        self.value.parse().map_err(|_| self.err("a non-negative integer"))
    }

    pub fn u64(&self) -> Result<u64> {
        self.value.parse().map_err(|_| self.err("a non-negative integer"))
    }

    pub fn bool(&self) -> Result<bool> {
        match self.value.as_str() {
            "true" | "yes" | "on" => Ok(true),
            "false" | "no" | "off" => Ok(false),
            _ => Err(self.err("true or false")),
        }
    }

    pub fn floats(&self, n: usize) -> Result<Vec<f64>> {
        let parts: Vec<&str> = self.value.split(',').map(str::trim).collect();
        if parts.len() != n {
            return Err(self.err(&format!("{n} comma-separated numbers")));
        }
        parts
            .iter()
            .map(|p| {
                p.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| self.err(&format!("{n} comma-separated numbers")))
            })
            .collect()
    }

    pub fn vec3(&self) -> Result<Vector3<f64>> {
        let v = self.floats(3)?;
        Ok(Vector3::new(v[0], v[1], v[2]))
    }

    pub fn vec2(&self) -> Result<Vector2<f64>> {
        let v = self.floats(2)?;
        Ok(Vector2::new(v[0], v[1]))
    }

    pub fn list(&self) -> Vec<String> {
        self.value
            .split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(String::from)
            .collect()
    }
}

/// Formats a float so that parsing it back yields the identical value.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:?}")
}

pub fn fmt_vec3(v: &Vector3<f64>) -> String {
    format!("{},{},{}", fmt_f64(v.x), fmt_f64(v.y), fmt_f64(v.z))
}
