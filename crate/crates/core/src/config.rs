//! `key = value` configuration text with `#` comment lines.

use std::fmt::Display;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, IoContext, Result};
use crate::hash::ContentHasher;

/// Ordered key/value pairs; later `set` calls replace earlier values.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct KeyValues {
    entries: Vec<(String, String)>,
}

impl KeyValues {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut kv = KeyValues::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected `key = value`", n + 1)))?;
            let k = k.trim();
            if k.is_empty() {
                return Err(Error::Config(format!("line {}: empty key", n + 1)));
            }
            kv.set(k, v.trim());
        }
        Ok(kv)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&fs::read_to_string(path).at(path)?)
    }

    pub fn set(&mut self, key: &str, value: impl Display) -> &mut Self {
        let value = value.to_string();
        match self.entries.iter_mut().find(|(k, _)| k == key) {
            Some(slot) => slot.1 = value,
            None => self.entries.push((key.to_owned(), value)),
        }
        self
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    /// Typed lookup; `Ok(None)` when absent.
    pub fn get_parsed<T: FromStr>(&self, key: &str) -> Result<Option<T>> {
        self.get(key)
            .map(|v| {
                v.parse()
                    .map_err(|_| Error::Config(format!("{key} = {v:?} is not a valid value")))
            })
            .transpose()
    }

    pub fn require<T: FromStr>(&self, key: &str) -> Result<T> {
        self.get_parsed(key)?
            .ok_or_else(|| Error::Config(format!("missing key {key:?}")))
    }

    /// Overlay `other` onto `self`.
    pub fn merge(&mut self, other: &KeyValues) {
        for (k, v) in &other.entries {
            self.set(k, v);
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &str)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v.as_str()))
    }

    /// Order-independent hash of the resolved configuration.
    pub fn content_hash(&self) -> u64 {
        let mut sorted: Vec<_> = self.iter().collect();
        sorted.sort();
        let mut h = ContentHasher::new();
        for (k, v) in sorted {
            h.field(k).field(v);
        }
        h.finish()
    }

    pub fn to_text(&self) -> String {
        self.iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_override() {
        let mut kv = KeyValues::parse("# run\nseed = 4\n\nbatch_size=16\nseed = 5\n").unwrap();
        assert_eq!(kv.get("seed"), Some("5"));
        assert_eq!(kv.require::<usize>("batch_size").unwrap(), 16);
        let mut flags = KeyValues::new();
        flags.set("batch_size", 32);
        kv.merge(&flags);
        assert_eq!(kv.get_parsed::<usize>("batch_size").unwrap(), Some(32));
        assert!(kv.get_parsed::<usize>("missing").unwrap().is_none());
    }

    #[test]
    fn bad_lines() {
        assert!(KeyValues::parse("novalue\n").is_err());
        assert!(KeyValues::parse(" = 3\n").is_err());
        let kv = KeyValues::parse("lr = fast").unwrap();
        assert!(kv.get_parsed::<f32>("lr").is_err());
    }

    #[test]
    fn hash_ignores_order() {
        let a = KeyValues::parse("a = 1\nb = 2").unwrap();
        let b = KeyValues::parse("b = 2\na = 1").unwrap();
        assert_eq!(a.content_hash(), b.content_hash());
        assert_eq!(KeyValues::parse(&a.to_text()).unwrap(), a);
    }
}
