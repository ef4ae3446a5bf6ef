//! Flat `key = value` text used for dataset metadata, scenario files and
//! run manifests. One pair per line, `#` starts a comment.

use std::fmt::Display;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Default, PartialEq)]
pub struct KeyValues {
    entries: Vec<(String, String)>,
    /// Line of each entry in the parsed source, for error positions.
    lines: Vec<usize>,
    source: String,
}

impl KeyValues {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn parse(text: &str, source: &str) -> Result<Self> {
        let mut kv = Self {
            source: source.to_string(),
            ..Self::default()
        };
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap_or("");
            if content.trim().is_empty() {
                continue;
            }
            let Some(eq) = content.find('=') else {
                return Err(Error::Parse {
                    path: source.to_string(),
                    line,
                    column: 1,
                    message: "expected `key = value`".into(),
                });
            };
            let key = content[..eq].trim();
            let value = content[eq + 1..].trim();
            if key.is_empty() || key.contains(char::is_whitespace) {
                return Err(Error::Parse {
                    path: source.to_string(),
                    line,
                    column: 1,
                    message: format!("invalid key `{key}`"),
                });
            }
            if kv.get(key).is_some() {
                return Err(Error::Parse {
                    path: source.to_string(),
                    line,
                    column: 1,
                    message: format!("duplicate key `{key}`"),
                });
            }
            kv.entries.push((key.to_string(), value.to_string()));
            kv.lines.push(line);
        }
        Ok(kv)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, &path.display().to_string())
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_string()).map_err(|e| Error::io(path, e))
    }

    /// Sets `key`, replacing an earlier value.
    pub fn set(&mut self, key: &str, value: impl Display) {
        let value = value.to_string();
        match self.entries.iter_mut().find(|(k, _)| k == key) {
            Some(e) => e.1 = value,
            None => {
                self.entries.push((key.to_string(), value));
                self.lines.push(0);
            }
        }
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &str)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v.as_str()))
    }

    fn line_of(&self, key: &str) -> usize {
        self.entries
            .iter()
            .position(|(k, _)| k == key)
            .map_or(0, |i| self.lines[i])
    }

    pub fn require(&self, key: &str) -> Result<&str> {
        self.get(key)
            .ok_or_else(|| Error::Format(format!("{}: missing key `{key}`", self.source)))
    }

    /// Parses the value under `key`, reporting the line on failure.
    pub fn parse_value<T: FromStr>(&self, key: &str) -> Result<T>
    where
        T::Err: Display,
    {
        let raw = self.require(key)?;
        raw.parse().map_err(|e: T::Err| Error::Parse {
            path: self.source.clone(),
            line: self.line_of(key),
            column: 1,
            message: format!("bad value `{raw}` for `{key}`: {e}"),
        })
    }

    pub fn parse_optional<T: FromStr>(&self, key: &str) -> Result<Option<T>>
    where
        T::Err: Display,
    {
        match self.get(key) {
            None | Some("none") => Ok(None),
            Some(_) => self.parse_value(key).map(Some),
        }
    }
}

impl Display for KeyValues {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for (k, v) in &self.entries {
            writeln!(f, "{k} = {v}")?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_comments_and_blank_lines() {
        let kv = KeyValues::parse("# header\n\na.b = 1.5  # trailing\nname = core1\n", "x").unwrap();
        assert_eq!(kv.get("a.b"), Some("1.5"));
        assert_eq!(kv.parse_value::<f64>("a.b").unwrap(), 1.5);
        assert_eq!(kv.get("name"), Some("core1"));
    }

    #[test]
    fn positioned_errors() {
        match KeyValues::parse("a = 1\nnot a pair\n", "f.txt") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
        let kv = KeyValues::parse("a = 1\nb = x\n", "f.txt").unwrap();
        match kv.parse_value::<f64>("b") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
        assert!(KeyValues::parse("a = 1\na = 2\n", "f").is_err());
    }

    #[test]
    fn display_round_trip() {
        let mut kv = KeyValues::new();
        kv.set("x", 0.1f64);
        kv.set("y", "dirichlet:1e0");
        kv.set("x", 3e-4f64);
        let back = KeyValues::parse(&kv.to_string(), "m").unwrap();
        assert_eq!(back.parse_value::<f64>("x").unwrap(), 3e-4);
        assert_eq!(back.get("y"), Some("dirichlet:1e0"));
        assert_eq!(back.iter().count(), 2);
    }
}
