//! Minimal line-anchored `key = value` format with `[section]` headers.
//!
//! `#` starts a comment. Keys may repeat within a section; sections may repeat.

use std::path::Path;

use crate::error::{Error, Result};

#[derive(Clone, Debug)]
pub struct Entry {
    pub key: String,
    pub value: String,
    pub line: usize,
}

#[derive(Clone, Debug)]
pub struct Section {
    pub name: String,
    pub line: usize,
    pub entries: Vec<Entry>,
}

#[derive(Clone, Debug)]
pub struct Document {
    pub path: String,
    pub sections: Vec<Section>,
}

impl Document {
    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config {
            path: path.display().to_string(),
            line: 0,
            msg: format!("cannot read file: {e}"),
        })?;
        Self::parse(&text, &path.display().to_string())
    }

    pub fn parse(text: &str, path: &str) -> Result<Self> {
        let mut sections = vec![Section { name: String::new(), line: 0, entries: Vec::new() }];
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            if let Some(rest) = content.strip_prefix('[') {
                let name = rest.strip_suffix(']').ok_or_else(|| Error::Config {
                    path: path.to_string(),
                    line,
                    msg: format!("unterminated section header `{content}`"),
                })?;
                sections.push(Section { name: name.trim().to_ascii_lowercase(), line, entries: Vec::new() });
                continue;
            }
            let (key, value) = content.split_once('=').ok_or_else(|| Error::Config {
                path: path.to_string(),
                line,
                msg: format!("expected `key = value`, got `{content}`"),
            })?;
            let key = key.trim().to_ascii_lowercase();
            if key.is_empty() {
                return Err(Error::Config { path: path.to_string(), line, msg: "empty key".into() });
            }
            sections.last_mut().expect("root section").entries.push(Entry {
                key,
                value: value.trim().to_string(),
                line,
            });
        }
        Ok(Self { path: path.to_string(), sections })
    }

    pub fn sections(&self, name: &str) -> impl Iterator<Item = &Section> + '_ {
        let name = name.to_string();
        self.sections.iter().filter(move |s| s.name == name)
    }

    pub fn section(&self, name: &str) -> Option<&Section> {
        self.sections(name).next()
    }

    pub fn error(&self, line: usize, msg: impl Into<String>) -> Error {
        Error::Config { path: self.path.clone(), line, msg: msg.into() }
    }

    /// Rejects keys outside `allowed` in `section`.
    pub fn check_keys(&self, section: &str, allowed: &[&str]) -> Result<()> {
        for s in self.sections(section) {
            for e in &s.entries {
                if !allowed.contains(&e.key.as_str()) {
                    return Err(self.error(e.line, format!("unknown key `{}` in [{}]", e.key, section)));
                }
            }
        }
        Ok(())
    }

    pub fn check_sections(&self, allowed: &[&str]) -> Result<()> {
        for s in &self.sections {
            if s.name.is_empty() {
                if let Some(e) = s.entries.first() {
                    return Err(self.error(e.line, "entry outside of any section"));
                }
            } else if !allowed.contains(&s.name.as_str()) {
                return Err(self.error(s.line, format!("unknown section [{}]", s.name)));
            }
        }
        Ok(())
    }
}

impl Section {
    pub fn get(&self, key: &str) -> Option<&Entry> {
        self.entries.iter().rev().find(|e| e.key == key)
    }

    pub fn all<'a>(&'a self, key: &'a str) -> impl Iterator<Item = &'a Entry> + 'a {
        self.entries.iter().filter(move |e| e.key == key)
    }
}

impl Entry {
    pub fn parse<T: std::str::FromStr>(&self, doc: &Document) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        self.value
            .parse()
            .map_err(|e| doc.error(self.line, format!("invalid value `{}` for `{}`: {e}", self.value, self.key)))
    }

    pub fn parse_list(&self, doc: &Document) -> Result<Vec<f64>> {
        self.value
            .split(',')
            .map(|s| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|e| doc.error(self.line, format!("invalid number `{}` in `{}`: {e}", s.trim(), self.key)))
            })
            .collect()
    }
}
