//! Plain-text run configuration: `[section]` headers over `key = value`
//! lines.
//!
//! The format is deliberately small: `#` comments and blank lines are
//! skipped, every key carries its unit in its name, and nothing is ever
//! silently ignored — a key the command does not consume is a hard error
//! with its line number. The canonical serialization is what goes into
//! every output file's provenance header, and parsing that header yields a
//! config equal to the one the run used.

use std::cell::RefCell;
use std::collections::HashSet;

use cespin::{Error, Result};
use nalgebra::Vector3;

/// An ordered, line-tracked configuration tree.
#[derive(Debug, Clone)]
pub struct RunConfig {
    sections: Vec<Section>,
}

#[derive(Debug, Clone)]
struct Section {
    name: String,
    line: usize,
    entries: Vec<Entry>,
}

#[derive(Debug, Clone)]
struct Entry {
    key: String,
    value: String,
    line: usize,
}

impl PartialEq for RunConfig {
    /// Equality of content: same sections in the same order with the same
    /// key/value pairs. Line numbers are presentation, not content.
    fn eq(&self, other: &Self) -> bool {
        self.sections.len() == other.sections.len()
            && self.sections.iter().zip(&other.sections).all(|(a, b)| {
                a.name == b.name
                    && a.entries.len() == b.entries.len()
                    && a.entries
                        .iter()
                        .zip(&b.entries)
                        .all(|(x, y)| x.key == y.key && x.value == y.value)
            })
    }
}

fn valid_name(s: &str) -> bool {
    !s.is_empty()
        && s.chars()
            .all(|c| c.is_ascii_lowercase() || c.is_ascii_digit() || c == '_')
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<RunConfig> {
        let mut sections: Vec<Section> = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let lineno = idx + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if let Some(inner) = line.strip_prefix('[') {
                let name = inner.strip_suffix(']').ok_or_else(|| {
                    Error::config(format!("line {lineno}: unterminated section header"))
                })?;
                let name = name.trim();
                if !valid_name(name) {
                    return Err(Error::config(format!(
                        "line {lineno}: bad section name {name:?}"
                    )));
                }
                if sections.iter().any(|s| s.name == name) {
                    return Err(Error::config(format!(
                        "line {lineno}: duplicate section [{name}]"
                    )));
                }
                sections.push(Section {
                    name: name.to_string(),
                    line: lineno,
                    entries: Vec::new(),
                });
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::config(format!("line {lineno}: expected `key = value`"))
            })?;
            let (key, value) = (key.trim(), value.trim());
            if !valid_name(key) {
                return Err(Error::config(format!("line {lineno}: bad key {key:?}")));
            }
            if value.is_empty() {
                return Err(Error::config(format!("line {lineno}: key {key} has no value")));
            }
            let section = sections.last_mut().ok_or_else(|| {
                Error::config(format!("line {lineno}: key {key} before any [section]"))
            })?;
            if section.entries.iter().any(|e| e.key == key) {
                return Err(Error::config(format!(
                    "line {lineno}: duplicate key {key}"
                )));
            }
            section.entries.push(Entry {
                key: key.to_string(),
                value: value.to_string(),
                line: lineno,
            });
        }
        if sections.is_empty() {
            return Err(Error::config("config has no [section]"));
        }
        Ok(RunConfig { sections })
    }

    /// Canonical text form; `parse(to_text(c)) == c`.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for s in &self.sections {
            out.push_str(&format!("[{}]\n", s.name));
            for e in &s.entries {
                out.push_str(&format!("{} = {}\n", e.key, e.value));
            }
        }
        out
    }

    /// Sets or replaces a key in an existing section.
    pub fn set(&mut self, section: &str, key: &str, value: &str) -> Result<()> {
        let s = self
            .sections
            .iter_mut()
            .find(|s| s.name == section)
            .ok_or_else(|| Error::config(format!("no [{section}] section to set {key} in")))?;
        match s.entries.iter_mut().find(|e| e.key == key) {
            Some(e) => e.value = value.to_string(),
            None => s.entries.push(Entry {
                key: key.to_string(),
                value: value.to_string(),
                line: 0,
            }),
        }
        Ok(())
    }

    /// The single section a command reads; any other section is as unknown
    /// as an unknown key.
    pub fn sole_section(&self, name: &str) -> Result<SectionView<'_>> {
        if let Some(other) = self.sections.iter().find(|s| s.name != name) {
            return Err(Error::config(format!(
                "line {}: unexpected section [{}] (this command reads [{}])",
                other.line, other.name, name
            )));
        }
        let section = self
            .sections
            .iter()
            .find(|s| s.name == name)
            .ok_or_else(|| Error::config(format!("missing [{name}] section")))?;
        Ok(SectionView {
            section,
            used: RefCell::new(HashSet::new()),
        })
    }
}

/// Read access to one section with consumption tracking: after a command
/// has taken what it understands, `finish` turns every leftover key into a
/// line-numbered error.
pub struct SectionView<'a> {
    section: &'a Section,
    used: RefCell<HashSet<usize>>,
}

impl SectionView<'_> {
    fn raw(&self, key: &str) -> Option<&Entry> {
        let pos = self.section.entries.iter().position(|e| e.key == key)?;
        self.used.borrow_mut().insert(pos);
        Some(&self.section.entries[pos])
    }

    fn parse_entry<T: std::str::FromStr>(&self, e: &Entry, what: &str) -> Result<T> {
        e.value.parse().map_err(|_| {
            Error::config(format!(
                "line {}: {} is not {} ({:?})",
                e.line, e.key, what, e.value
            ))
        })
    }

    pub fn str_opt(&self, key: &str) -> Option<&str> {
        self.raw(key).map(|e| e.value.as_str())
    }

    pub fn str_req(&self, key: &str) -> Result<&str> {
        self.str_opt(key)
            .ok_or_else(|| self.missing(key))
    }

    pub fn f64_req(&self, key: &str) -> Result<f64> {
        let e = self.raw(key).ok_or_else(|| self.missing(key))?;
        self.parse_entry(e, "a number")
    }

    pub fn f64_or(&self, key: &str, default: f64) -> Result<f64> {
        match self.raw(key) {
            Some(e) => self.parse_entry(e, "a number"),
            None => Ok(default),
        }
    }

    pub fn f64_opt(&self, key: &str) -> Result<Option<f64>> {
        self.raw(key)
            .map(|e| self.parse_entry(e, "a number"))
            .transpose()
    }

    pub fn usize_req(&self, key: &str) -> Result<usize> {
        let e = self.raw(key).ok_or_else(|| self.missing(key))?;
        self.parse_entry(e, "a non-negative integer")
    }

    pub fn usize_opt(&self, key: &str) -> Result<Option<usize>> {
        self.raw(key)
            .map(|e| self.parse_entry(e, "a non-negative integer"))
            .transpose()
    }

    pub fn u64_req(&self, key: &str) -> Result<u64> {
        let e = self.raw(key).ok_or_else(|| self.missing(key))?;
        self.parse_entry(e, "a non-negative integer")
    }

    pub fn bool_req(&self, key: &str) -> Result<bool> {
        let e = self.raw(key).ok_or_else(|| self.missing(key))?;
        match e.value.as_str() {
            "true" => Ok(true),
            "false" => Ok(false),
            other => Err(Error::config(format!(
                "line {}: {} must be true or false ({other:?})",
                e.line, e.key
            ))),
        }
    }

    /// Three whitespace-separated components, e.g. `direction = 1 1 0`.
    pub fn vector3_req(&self, key: &str) -> Result<Vector3<f64>> {
        let e = self.raw(key).ok_or_else(|| self.missing(key))?;
        let parts: Vec<f64> = e
            .value
            .split_whitespace()
            .map(|p| p.parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| {
                Error::config(format!(
                    "line {}: {} must be three numbers ({:?})",
                    e.line, e.key, e.value
                ))
            })?;
        if parts.len() != 3 {
            return Err(Error::config(format!(
                "line {}: {} must be three numbers, found {}",
                e.line,
                e.key,
                parts.len()
            )));
        }
        Ok(Vector3::new(parts[0], parts[1], parts[2]))
    }

    /// Whitespace-separated float list, e.g. an initial fit guess.
    pub fn floats_opt(&self, key: &str) -> Result<Option<Vec<f64>>> {
        let Some(e) = self.raw(key) else {
            return Ok(None);
        };
        let parts: Vec<f64> = e
            .value
            .split_whitespace()
            .map(|p| p.parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| {
                Error::config(format!(
                    "line {}: {} must be a list of numbers ({:?})",
                    e.line, e.key, e.value
                ))
            })?;
        Ok(Some(parts))
    }

    fn missing(&self, key: &str) -> Error {
        Error::config(format!(
            "[{}] is missing the {key} key",
            self.section.name
        ))
    }

    pub fn finish(&self) -> Result<()> {
        let used = self.used.borrow();
        for (pos, e) in self.section.entries.iter().enumerate() {
            if !used.contains(&pos) {
                return Err(Error::config(format!(
                    "line {}: unknown key {} in [{}]",
                    e.line, e.key, self.section.name
                )));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_sections_keys_and_comments() {
        let text = "# run at 310 G\n[spectrum]\nfield_gauss = 310\ndirection = 1 1 0\n";
        let cfg = RunConfig::parse(text).unwrap();
        let sec = cfg.sole_section("spectrum").unwrap();
        assert_eq!(sec.f64_req("field_gauss").unwrap(), 310.0);
        assert_eq!(
            sec.vector3_req("direction").unwrap(),
            Vector3::new(1.0, 1.0, 0.0)
        );
        sec.finish().unwrap();
    }

    #[test]
    fn round_trips_through_canonical_text() {
        let text = "[simulate]\nsequence = hahn\nseed = 7\nsigma_mhz = 5.54885\n";
        let cfg = RunConfig::parse(text).unwrap();
        let again = RunConfig::parse(&cfg.to_text()).unwrap();
        assert_eq!(cfg, again);
        assert_eq!(cfg.to_text(), again.to_text());
    }

    #[test]
    fn set_overrides_and_appends() {
        let mut cfg = RunConfig::parse("[simulate]\nseed = 1\n").unwrap();
        cfg.set("simulate", "seed", "9").unwrap();
        cfg.set("simulate", "threads", "2").unwrap();
        let sec = cfg.sole_section("simulate").unwrap();
        assert_eq!(sec.u64_req("seed").unwrap(), 9);
        assert_eq!(sec.usize_opt("threads").unwrap(), Some(2));
        sec.finish().unwrap();
        assert!(cfg.set("fit", "seed", "1").is_err());
    }

    #[test]
    fn errors_carry_line_numbers() {
        let no_value = RunConfig::parse("[fit]\nmodel\n").unwrap_err();
        assert!(no_value.to_string().contains("line 2"), "{no_value}");
        let orphan = RunConfig::parse("seed = 1\n").unwrap_err();
        assert!(orphan.to_string().contains("line 1"), "{orphan}");
        let dup = RunConfig::parse("[a]\nx = 1\nx = 2\n").unwrap_err();
        assert!(dup.to_string().contains("line 3"), "{dup}");
        let bad_header = RunConfig::parse("[a\nx = 1\n").unwrap_err();
        assert!(bad_header.to_string().contains("line 1"), "{bad_header}");

        let cfg = RunConfig::parse("[fit]\nmodel = exp_decay\nextra_key = 3\n").unwrap();
        let sec = cfg.sole_section("fit").unwrap();
        sec.str_req("model").unwrap();
        let err = sec.finish().unwrap_err();
        assert!(
            err.to_string().contains("line 3") && err.to_string().contains("extra_key"),
            "{err}"
        );
    }

    #[test]
    fn rejects_wrong_or_extra_sections() {
        let cfg = RunConfig::parse("[fit]\nmodel = exp_decay\n").unwrap();
        assert!(cfg.sole_section("simulate").is_err());
        let two = RunConfig::parse("[fit]\nmodel = exp_decay\n[simulate]\nseed = 1\n").unwrap();
        assert!(two.sole_section("fit").is_err());
        assert!(RunConfig::parse("[fit]\nx = 1\n[fit]\ny = 2\n").is_err());
    }

    #[test]
    fn typed_getters_validate_their_values() {
        let cfg = RunConfig::parse(
            "[simulate]\ntrajectories = many\nideal_pulses = yes\ndirection = 1 1\n",
        )
        .unwrap();
        let sec = cfg.sole_section("simulate").unwrap();
        assert!(sec.usize_req("trajectories").is_err());
        assert!(sec.bool_req("ideal_pulses").is_err());
        assert!(sec.vector3_req("direction").is_err());
        assert!(sec.f64_req("absent_key").is_err());
    }
}
